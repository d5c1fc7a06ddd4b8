//! LSTM sequence autoencoder.
//!
//! The encoder folds a sequence into a latent vector taken from the final
//! hidden state (both directions concatenated when bidirectional). The
//! decoder is seeded from the latent through per-layer affine maps and is
//! teacher forced: step t consumes the previous ground-truth frame, with a
//! zero frame at t = 0. Reconstruction loss is mean squared error averaged
//! over every timestep and feature.

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{lstm_backward, lstm_forward, LstmCache, LstmParams, LstmState};
use super::matrix::Affine;
use super::NnError;

pub const MAX_LAYERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqAeConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub num_layers: usize,
    pub bidirectional: bool,
}

impl SeqAeConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.latent_dim == 0 {
            return Err(NnError::InvalidInput("autoencoder dimensions must be positive".into()));
        }
        if self.num_layers == 0 || self.num_layers > MAX_LAYERS {
            return Err(NnError::InvalidInput(format!(
                "num_layers must be in 1..={MAX_LAYERS}, got {}",
                self.num_layers
            )));
        }
        Ok(())
    }

    fn layer_out_dim(&self) -> usize {
        if self.bidirectional {
            2 * self.hidden_dim
        } else {
            self.hidden_dim
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqAutoencoder {
    config: SeqAeConfig,
    enc_fwd: Vec<LstmParams>,
    enc_bwd: Vec<LstmParams>,
    latent: Affine,
    dec_init_h: Vec<Affine>,
    dec_init_c: Vec<Affine>,
    dec: Vec<LstmParams>,
    output: Affine,
}

struct EncLayerCache {
    inputs: Vec<Vec<f64>>,
    fwd: LstmCache,
    bwd: Option<LstmCache>,
}

struct DecLayerCache {
    inputs: Vec<Vec<f64>>,
    init: LstmState,
    cache: LstmCache,
}

pub struct ForwardCache {
    enc_layers: Vec<EncLayerCache>,
    final_feat: Vec<f64>,
    pub latent_vec: Vec<f64>,
    dec_layers: Vec<DecLayerCache>,
    pub recon: Vec<Vec<f64>>,
}

impl SeqAutoencoder {
    pub fn new(config: SeqAeConfig, rng: &mut ChaCha12Rng) -> Result<Self, NnError> {
        config.validate()?;
        let h = config.hidden_dim;
        let scale = 1.0 / (h as f64).sqrt();
        let out_dim = config.layer_out_dim();

        let mut enc_fwd = Vec::new();
        let mut enc_bwd = Vec::new();
        for l in 0..config.num_layers {
            let in_dim = if l == 0 { config.input_dim } else { out_dim };
            enc_fwd.push(LstmParams::init(in_dim, h, rng));
            if config.bidirectional {
                enc_bwd.push(LstmParams::init(in_dim, h, rng));
            }
        }
        let latent = Affine::uniform(config.latent_dim, out_dim, scale, rng);
        let mut dec_init_h = Vec::new();
        let mut dec_init_c = Vec::new();
        let mut dec = Vec::new();
        for l in 0..config.num_layers {
            dec_init_h.push(Affine::uniform(h, config.latent_dim, scale, rng));
            dec_init_c.push(Affine::uniform(h, config.latent_dim, scale, rng));
            let in_dim = if l == 0 { config.input_dim } else { h };
            dec.push(LstmParams::init(in_dim, h, rng));
        }
        let output = Affine::uniform(config.input_dim, h, scale, rng);

        Ok(Self { config, enc_fwd, enc_bwd, latent, dec_init_h, dec_init_c, dec, output })
    }

    pub fn config(&self) -> &SeqAeConfig {
        &self.config
    }

    fn zeros_like(&self) -> Self {
        let c = &self.config;
        let h = c.hidden_dim;
        let out_dim = c.layer_out_dim();
        let enc_in = |l: usize| if l == 0 { c.input_dim } else { out_dim };
        let dec_in = |l: usize| if l == 0 { c.input_dim } else { h };
        Self {
            config: *c,
            enc_fwd: (0..c.num_layers).map(|l| LstmParams::zeros(enc_in(l), h)).collect(),
            enc_bwd: if c.bidirectional {
                (0..c.num_layers).map(|l| LstmParams::zeros(enc_in(l), h)).collect()
            } else {
                Vec::new()
            },
            latent: Affine::zeros(c.latent_dim, out_dim),
            dec_init_h: (0..c.num_layers).map(|_| Affine::zeros(h, c.latent_dim)).collect(),
            dec_init_c: (0..c.num_layers).map(|_| Affine::zeros(h, c.latent_dim)).collect(),
            dec: (0..c.num_layers).map(|l| LstmParams::zeros(dec_in(l), h)).collect(),
            output: Affine::zeros(c.input_dim, h),
        }
    }

    pub fn check_sequence(&self, xs: &[Vec<f64>]) -> Result<(), NnError> {
        if xs.is_empty() {
            return Err(NnError::InvalidInput("sequence must contain at least one step".into()));
        }
        for (t, x) in xs.iter().enumerate() {
            if x.len() != self.config.input_dim {
                return Err(NnError::InvalidInput(format!(
                    "step {t} has dimension {}, model expects {}",
                    x.len(),
                    self.config.input_dim
                )));
            }
        }
        Ok(())
    }

    pub fn forward(&self, xs: &[Vec<f64>]) -> ForwardCache {
        let steps = xs.len();
        let h = self.config.hidden_dim;
        debug_assert!(steps > 0);

        let mut enc_layers = Vec::with_capacity(self.config.num_layers);
        let mut layer_inputs: Vec<Vec<f64>> = xs.to_vec();
        for l in 0..self.config.num_layers {
            let fwd = lstm_forward(&self.enc_fwd[l], &layer_inputs, None);
            let bwd = if self.config.bidirectional {
                let rev: Vec<Vec<f64>> = layer_inputs.iter().rev().cloned().collect();
                Some(lstm_forward(&self.enc_bwd[l], &rev, None))
            } else {
                None
            };
            let outputs: Vec<Vec<f64>> = (0..steps)
                .map(|t| match &bwd {
                    Some(b) => {
                        let mut v = fwd.hiddens[t].clone();
                        v.extend_from_slice(&b.hiddens[steps - 1 - t]);
                        v
                    }
                    None => fwd.hiddens[t].clone(),
                })
                .collect();
            enc_layers.push(EncLayerCache { inputs: layer_inputs, fwd, bwd });
            layer_inputs = outputs;
        }

        let top = enc_layers.last().expect("at least one encoder layer");
        let mut final_feat = top.fwd.hiddens[steps - 1].clone();
        if let Some(b) = &top.bwd {
            final_feat.extend_from_slice(&b.hiddens[steps - 1]);
        }
        let latent_vec = self.latent.forward(&final_feat);

        let mut teacher = Vec::with_capacity(steps);
        teacher.push(vec![0.0; self.config.input_dim]);
        teacher.extend(xs[..steps - 1].iter().cloned());

        let mut dec_layers = Vec::with_capacity(self.config.num_layers);
        let mut dec_inputs = teacher;
        for l in 0..self.config.num_layers {
            let init = LstmState {
                h: self.dec_init_h[l].forward(&latent_vec),
                c: self.dec_init_c[l].forward(&latent_vec),
            };
            let cache = lstm_forward(&self.dec[l], &dec_inputs, Some(&init));
            let outputs = cache.hiddens.clone();
            dec_layers.push(DecLayerCache { inputs: dec_inputs, init, cache });
            dec_inputs = outputs;
        }
        debug_assert_eq!(dec_inputs.len(), steps);
        debug_assert_eq!(dec_inputs[0].len(), h);
        let recon: Vec<Vec<f64>> = dec_inputs.iter().map(|hid| self.output.forward(hid)).collect();

        ForwardCache { enc_layers, final_feat, latent_vec, dec_layers, recon }
    }

    pub fn mse(recon: &[Vec<f64>], xs: &[Vec<f64>]) -> f64 {
        let count = (xs.len() * xs[0].len()) as f64;
        let mut total = 0.0;
        for (r, x) in recon.iter().zip(xs) {
            for (rv, xv) in r.iter().zip(x) {
                let diff = rv - xv;
                total += diff * diff;
            }
        }
        total / count
    }

    pub fn loss(&self, xs: &[Vec<f64>]) -> f64 {
        Self::mse(&self.forward(xs).recon, xs)
    }

    /// Full backpropagation. Returns the loss and a gradient holder shaped
    /// like the model.
    pub fn backward(&self, xs: &[Vec<f64>]) -> (f64, Self) {
        let steps = xs.len();
        let h = self.config.hidden_dim;
        let cache = self.forward(xs);
        let loss = Self::mse(&cache.recon, xs);
        let mut grads = self.zeros_like();
        let norm = 2.0 / (steps * self.config.input_dim) as f64;

        let mut d_h_top = vec![vec![0.0; h]; steps];
        for t in 0..steps {
            let d_recon: Vec<f64> =
                cache.recon[t].iter().zip(&xs[t]).map(|(r, x)| norm * (r - x)).collect();
            let top_hidden = &cache.dec_layers[self.config.num_layers - 1].cache.hiddens[t];
            self.output.backward_acc(top_hidden, &d_recon, &mut grads.output, &mut d_h_top[t]);
        }

        let mut d_latent = vec![0.0; self.config.latent_dim];
        let mut d_layer = d_h_top;
        for l in (0..self.config.num_layers).rev() {
            let layer = &cache.dec_layers[l];
            let back =
                lstm_backward(&self.dec[l], &layer.inputs, Some(&layer.init), &layer.cache, &d_layer);
            self.dec_init_h[l].backward_acc(
                &cache.latent_vec,
                &back.d_h0,
                &mut grads.dec_init_h[l],
                &mut d_latent,
            );
            self.dec_init_c[l].backward_acc(
                &cache.latent_vec,
                &back.d_c0,
                &mut grads.dec_init_c[l],
                &mut d_latent,
            );
            grads.dec[l] = add_lstm(&grads.dec[l], &back.grads);
            if l > 0 {
                d_layer = back.d_xs;
            }
        }

        let mut d_final = vec![0.0; cache.final_feat.len()];
        self.latent.backward_acc(&cache.final_feat, &d_latent, &mut grads.latent, &mut d_final);

        let out_dim = self.config.layer_out_dim();
        let mut d_out: Vec<Vec<f64>> = vec![vec![0.0; out_dim]; steps];
        for l in (0..self.config.num_layers).rev() {
            let layer = &cache.enc_layers[l];
            let mut d_h_f: Vec<Vec<f64>> = (0..steps).map(|t| d_out[t][..h].to_vec()).collect();
            let mut d_h_b: Vec<Vec<f64>> = if self.config.bidirectional {
                (0..steps).map(|s| d_out[steps - 1 - s][h..].to_vec()).collect()
            } else {
                Vec::new()
            };
            if l == self.config.num_layers - 1 {
                for k in 0..h {
                    d_h_f[steps - 1][k] += d_final[k];
                }
                if self.config.bidirectional {
                    for k in 0..h {
                        d_h_b[steps - 1][k] += d_final[h + k];
                    }
                }
            }

            let back_f = lstm_backward(&self.enc_fwd[l], &layer.inputs, None, &layer.fwd, &d_h_f);
            grads.enc_fwd[l] = add_lstm(&grads.enc_fwd[l], &back_f.grads);
            let back_b = layer.bwd.as_ref().map(|bwd_cache| {
                let rev: Vec<Vec<f64>> = layer.inputs.iter().rev().cloned().collect();
                let back = lstm_backward(&self.enc_bwd[l], &rev, None, bwd_cache, &d_h_b);
                grads.enc_bwd[l] = add_lstm(&grads.enc_bwd[l], &back.grads);
                back
            });

            if l > 0 {
                let in_dim = layer.inputs[0].len();
                d_out = (0..steps)
                    .map(|t| {
                        let mut v = back_f.d_xs[t].clone();
                        if let Some(bb) = &back_b {
                            for (slot, add) in v.iter_mut().zip(&bb.d_xs[steps - 1 - t]) {
                                *slot += add;
                            }
                        }
                        debug_assert_eq!(v.len(), in_dim);
                        v
                    })
                    .collect();
            }
        }

        (loss, grads)
    }

    /// Latent embedding of a sequence, used by the combined detector.
    pub fn encode_latent(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>, NnError> {
        self.check_sequence(xs)?;
        Ok(self.forward(xs).latent_vec)
    }

    pub fn reconstruction_error(&self, xs: &[Vec<f64>]) -> Result<f64, NnError> {
        self.check_sequence(xs)?;
        Ok(self.loss(xs))
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for p in &self.enc_fwd {
            out.extend([p.wx.data(), p.wh.data(), p.b.as_slice()]);
        }
        for p in &self.enc_bwd {
            out.extend([p.wx.data(), p.wh.data(), p.b.as_slice()]);
        }
        out.extend([self.latent.w.data(), self.latent.b.as_slice()]);
        for a in &self.dec_init_h {
            out.extend([a.w.data(), a.b.as_slice()]);
        }
        for a in &self.dec_init_c {
            out.extend([a.w.data(), a.b.as_slice()]);
        }
        for p in &self.dec {
            out.extend([p.wx.data(), p.wh.data(), p.b.as_slice()]);
        }
        out.extend([self.output.w.data(), self.output.b.as_slice()]);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = Vec::new();
        for p in &mut self.enc_fwd {
            out.push(p.wx.data_mut());
            out.push(p.wh.data_mut());
            out.push(&mut p.b);
        }
        for p in &mut self.enc_bwd {
            out.push(p.wx.data_mut());
            out.push(p.wh.data_mut());
            out.push(&mut p.b);
        }
        out.push(self.latent.w.data_mut());
        out.push(&mut self.latent.b);
        for a in &mut self.dec_init_h {
            out.push(a.w.data_mut());
            out.push(&mut a.b);
        }
        for a in &mut self.dec_init_c {
            out.push(a.w.data_mut());
            out.push(&mut a.b);
        }
        for p in &mut self.dec {
            out.push(p.wx.data_mut());
            out.push(p.wh.data_mut());
            out.push(&mut p.b);
        }
        out.push(self.output.w.data_mut());
        out.push(&mut self.output.b);
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for t in self.tensors() {
            flat.extend_from_slice(t);
        }
        flat
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<(), NnError> {
        if flat.len() != self.param_count() {
            return Err(NnError::InvalidInput(format!(
                "flat parameter vector has length {}, model expects {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let next = offset + t.len();
            t.copy_from_slice(&flat[offset..next]);
            offset = next;
        }
        Ok(())
    }

    /// Structural integrity check used when loading checkpoints.
    pub fn validate(&self) -> Result<(), NnError> {
        self.config.validate()?;
        let c = &self.config;
        let out_dim = c.layer_out_dim();
        let expect = |cond: bool, what: &str| -> Result<(), NnError> {
            if cond {
                Ok(())
            } else {
                Err(NnError::Checkpoint(format!("inconsistent shape for {what}")))
            }
        };
        expect(self.enc_fwd.len() == c.num_layers, "encoder stack")?;
        expect(
            self.enc_bwd.len() == if c.bidirectional { c.num_layers } else { 0 },
            "backward encoder stack",
        )?;
        expect(self.dec.len() == c.num_layers, "decoder stack")?;
        expect(self.dec_init_h.len() == c.num_layers, "decoder h seeds")?;
        expect(self.dec_init_c.len() == c.num_layers, "decoder c seeds")?;
        for (l, p) in self.enc_fwd.iter().enumerate() {
            let in_dim = if l == 0 { c.input_dim } else { out_dim };
            expect(
                p.input_dim == in_dim
                    && p.hidden_dim == c.hidden_dim
                    && p.wx.rows() == 4 * c.hidden_dim
                    && p.wx.cols() == in_dim
                    && p.wh.rows() == 4 * c.hidden_dim
                    && p.wh.cols() == c.hidden_dim
                    && p.b.len() == 4 * c.hidden_dim
                    && p.wx.shape_is_valid()
                    && p.wh.shape_is_valid(),
                "encoder layer",
            )?;
        }
        for (l, p) in self.enc_bwd.iter().enumerate() {
            let in_dim = if l == 0 { c.input_dim } else { out_dim };
            expect(
                p.input_dim == in_dim && p.hidden_dim == c.hidden_dim && p.wx.shape_is_valid(),
                "backward encoder layer",
            )?;
        }
        expect(
            self.latent.out_dim() == c.latent_dim
                && self.latent.in_dim() == out_dim
                && self.latent.w.shape_is_valid(),
            "latent head",
        )?;
        for a in self.dec_init_h.iter().chain(&self.dec_init_c) {
            expect(
                a.out_dim() == c.hidden_dim
                    && a.in_dim() == c.latent_dim
                    && a.w.shape_is_valid(),
                "decoder seed",
            )?;
        }
        for (l, p) in self.dec.iter().enumerate() {
            let in_dim = if l == 0 { c.input_dim } else { c.hidden_dim };
            expect(
                p.input_dim == in_dim && p.hidden_dim == c.hidden_dim && p.wx.shape_is_valid(),
                "decoder layer",
            )?;
        }
        expect(
            self.output.out_dim() == c.input_dim
                && self.output.in_dim() == c.hidden_dim
                && self.output.w.shape_is_valid(),
            "output head",
        )?;
        Ok(())
    }
}

fn add_lstm(a: &LstmParams, b: &LstmParams) -> LstmParams {
    let mut out = a.clone();
    for (slot, add) in out.wx.data_mut().iter_mut().zip(b.wx.data()) {
        *slot += add;
    }
    for (slot, add) in out.wh.data_mut().iter_mut().zip(b.wh.data()) {
        *slot += add;
    }
    for (slot, add) in out.b.iter_mut().zip(&b.b) {
        *slot += add;
    }
    out
}
