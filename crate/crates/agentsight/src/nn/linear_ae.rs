//! Small feed-forward autoencoder for fixed-size vectors.
//!
//! Encoder and decoder each have one tanh hidden layer; the latent and the
//! reconstruction are linear. Loss is mean squared error over the input
//! dimension.

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Affine;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearAeConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
}

impl LinearAeConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.latent_dim == 0 {
            return Err(NnError::InvalidInput("autoencoder dimensions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearAutoencoder {
    config: LinearAeConfig,
    enc_hidden: Affine,
    enc_latent: Affine,
    dec_hidden: Affine,
    dec_out: Affine,
}

pub struct LinearForward {
    pub enc_act: Vec<f64>,
    pub latent: Vec<f64>,
    pub dec_act: Vec<f64>,
    pub recon: Vec<f64>,
}

impl LinearAutoencoder {
    pub fn new(config: LinearAeConfig, rng: &mut ChaCha12Rng) -> Result<Self, NnError> {
        config.validate()?;
        let scale = 1.0 / (config.hidden_dim as f64).sqrt();
        Ok(Self {
            config,
            enc_hidden: Affine::uniform(config.hidden_dim, config.input_dim, scale, rng),
            enc_latent: Affine::uniform(config.latent_dim, config.hidden_dim, scale, rng),
            dec_hidden: Affine::uniform(config.hidden_dim, config.latent_dim, scale, rng),
            dec_out: Affine::uniform(config.input_dim, config.hidden_dim, scale, rng),
        })
    }

    pub fn config(&self) -> &LinearAeConfig {
        &self.config
    }

    fn zeros_like(&self) -> Self {
        let c = &self.config;
        Self {
            config: *c,
            enc_hidden: Affine::zeros(c.hidden_dim, c.input_dim),
            enc_latent: Affine::zeros(c.latent_dim, c.hidden_dim),
            dec_hidden: Affine::zeros(c.hidden_dim, c.latent_dim),
            dec_out: Affine::zeros(c.input_dim, c.hidden_dim),
        }
    }

    pub fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        if x.len() != self.config.input_dim {
            return Err(NnError::InvalidInput(format!(
                "input has dimension {}, model expects {}",
                x.len(),
                self.config.input_dim
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> LinearForward {
        let enc_act: Vec<f64> = self.enc_hidden.forward(x).iter().map(|v| v.tanh()).collect();
        let latent = self.enc_latent.forward(&enc_act);
        let dec_act: Vec<f64> = self.dec_hidden.forward(&latent).iter().map(|v| v.tanh()).collect();
        let recon = self.dec_out.forward(&dec_act);
        LinearForward { enc_act, latent, dec_act, recon }
    }

    pub fn mse(recon: &[f64], x: &[f64]) -> f64 {
        let mut total = 0.0;
        for (r, v) in recon.iter().zip(x) {
            let diff = r - v;
            total += diff * diff;
        }
        total / x.len() as f64
    }

    pub fn loss(&self, x: &[f64]) -> f64 {
        Self::mse(&self.forward(x).recon, x)
    }

    pub fn backward(&self, x: &[f64]) -> (f64, Self) {
        let cache = self.forward(x);
        let loss = Self::mse(&cache.recon, x);
        let mut grads = self.zeros_like();
        let norm = 2.0 / x.len() as f64;

        let d_recon: Vec<f64> = cache.recon.iter().zip(x).map(|(r, v)| norm * (r - v)).collect();
        let mut d_dec_act = vec![0.0; self.config.hidden_dim];
        self.dec_out.backward_acc(&cache.dec_act, &d_recon, &mut grads.dec_out, &mut d_dec_act);
        for (d, a) in d_dec_act.iter_mut().zip(&cache.dec_act) {
            *d *= 1.0 - a * a;
        }
        let mut d_latent = vec![0.0; self.config.latent_dim];
        self.dec_hidden.backward_acc(&cache.latent, &d_dec_act, &mut grads.dec_hidden, &mut d_latent);
        let mut d_enc_act = vec![0.0; self.config.hidden_dim];
        self.enc_latent.backward_acc(&cache.enc_act, &d_latent, &mut grads.enc_latent, &mut d_enc_act);
        for (d, a) in d_enc_act.iter_mut().zip(&cache.enc_act) {
            *d *= 1.0 - a * a;
        }
        let mut d_x = vec![0.0; self.config.input_dim];
        self.enc_hidden.backward_acc(x, &d_enc_act, &mut grads.enc_hidden, &mut d_x);

        (loss, grads)
    }

    pub fn encode_latent(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(x)?;
        Ok(self.forward(x).latent)
    }

    pub fn reconstruction_error(&self, x: &[f64]) -> Result<f64, NnError> {
        self.check_input(x)?;
        Ok(self.loss(x))
    }

    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.enc_hidden.w.data(),
            self.enc_hidden.b.as_slice(),
            self.enc_latent.w.data(),
            self.enc_latent.b.as_slice(),
            self.dec_hidden.w.data(),
            self.dec_hidden.b.as_slice(),
            self.dec_out.w.data(),
            self.dec_out.b.as_slice(),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        vec![
            self.enc_hidden.w.data_mut(),
            &mut self.enc_hidden.b,
            self.enc_latent.w.data_mut(),
            &mut self.enc_latent.b,
            self.dec_hidden.w.data_mut(),
            &mut self.dec_hidden.b,
            self.dec_out.w.data_mut(),
            &mut self.dec_out.b,
        ]
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

    pub fn validate(&self) -> Result<(), NnError> {
        self.config.validate()?;
        let c = &self.config;
        let ok = self.enc_hidden.out_dim() == c.hidden_dim
            && self.enc_hidden.in_dim() == c.input_dim
            && self.enc_latent.out_dim() == c.latent_dim
            && self.enc_latent.in_dim() == c.hidden_dim
            && self.dec_hidden.out_dim() == c.hidden_dim
            && self.dec_hidden.in_dim() == c.latent_dim
            && self.dec_out.out_dim() == c.input_dim
            && self.dec_out.in_dim() == c.hidden_dim
            && self.enc_hidden.w.shape_is_valid()
            && self.enc_latent.w.shape_is_valid()
            && self.dec_hidden.w.shape_is_valid()
            && self.dec_out.w.shape_is_valid();
        if ok {
            Ok(())
        } else {
            Err(NnError::Checkpoint("inconsistent feed-forward autoencoder shapes".into()))
        }
    }
}
