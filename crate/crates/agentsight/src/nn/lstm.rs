//! Single-layer LSTM forward pass and backpropagation through time.
//!
//! Gate pre-activations are stacked in the order input, forget, cell
//! candidate, output, so `wx` is `4H x D`, `wh` is `4H x H` and `b` is `4H`.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub wx: Matrix,
    pub wh: Matrix,
    pub b: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            wx: Matrix::zeros(4 * hidden_dim, input_dim),
            wh: Matrix::zeros(4 * hidden_dim, hidden_dim),
            b: vec![0.0; 4 * hidden_dim],
        }
    }

    /// Uniform(-1/sqrt(H), 1/sqrt(H)) weights with the forget-gate bias
    /// shifted by +1 so early training does not wipe the cell state.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut ChaCha12Rng) -> Self {
        let scale = 1.0 / (hidden_dim as f64).sqrt();
        let wx = Matrix::uniform(4 * hidden_dim, input_dim, scale, rng);
        let wh = Matrix::uniform(4 * hidden_dim, hidden_dim, scale, rng);
        let mut b: Vec<f64> = (0..4 * hidden_dim).map(|_| rng.gen_range(-scale..scale)).collect();
        for slot in &mut b[hidden_dim..2 * hidden_dim] {
            *slot += 1.0;
        }
        Self { input_dim, hidden_dim, wx, wh, b }
    }
}

/// Initial hidden and cell state for a sequence.
#[derive(Debug, Clone)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self { h: vec![0.0; hidden_dim], c: vec![0.0; hidden_dim] }
    }
}

/// Post-activation gate values and states recorded per timestep.
pub struct LstmCache {
    /// [i, f, g, o] per timestep.
    pub gates: Vec<[Vec<f64>; 4]>,
    pub cells: Vec<Vec<f64>>,
    pub hiddens: Vec<Vec<f64>>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn lstm_forward(params: &LstmParams, xs: &[Vec<f64>], init: Option<&LstmState>) -> LstmCache {
    let h_dim = params.hidden_dim;
    let zero_state = LstmState::zeros(h_dim);
    let init = init.unwrap_or(&zero_state);
    let mut h_prev = init.h.clone();
    let mut c_prev = init.c.clone();
    let mut cache = LstmCache {
        gates: Vec::with_capacity(xs.len()),
        cells: Vec::with_capacity(xs.len()),
        hiddens: Vec::with_capacity(xs.len()),
    };

    let mut z = vec![0.0; 4 * h_dim];
    for x in xs {
        debug_assert_eq!(x.len(), params.input_dim);
        z.copy_from_slice(&params.b);
        params.wx.matvec_acc(x, &mut z);
        params.wh.matvec_acc(&h_prev, &mut z);

        let mut i = vec![0.0; h_dim];
        let mut f = vec![0.0; h_dim];
        let mut g = vec![0.0; h_dim];
        let mut o = vec![0.0; h_dim];
        for k in 0..h_dim {
            i[k] = sigmoid(z[k]);
            f[k] = sigmoid(z[h_dim + k]);
            g[k] = z[2 * h_dim + k].tanh();
            o[k] = sigmoid(z[3 * h_dim + k]);
        }
        let mut c = vec![0.0; h_dim];
        let mut h = vec![0.0; h_dim];
        for k in 0..h_dim {
            c[k] = f[k] * c_prev[k] + i[k] * g[k];
            h[k] = o[k] * c[k].tanh();
        }
        cache.gates.push([i, f, g, o]);
        cache.cells.push(c.clone());
        cache.hiddens.push(h.clone());
        h_prev = h;
        c_prev = c;
    }
    cache
}

pub struct LstmBackward {
    pub grads: LstmParams,
    pub d_xs: Vec<Vec<f64>>,
    pub d_h0: Vec<f64>,
    pub d_c0: Vec<f64>,
}

/// Backpropagation through time. `d_hiddens[t]` is the loss gradient flowing
/// into `h_t` from outside the recurrence (later layers or readouts).
pub fn lstm_backward(
    params: &LstmParams,
    xs: &[Vec<f64>],
    init: Option<&LstmState>,
    cache: &LstmCache,
    d_hiddens: &[Vec<f64>],
) -> LstmBackward {
    let h_dim = params.hidden_dim;
    let steps = xs.len();
    debug_assert_eq!(d_hiddens.len(), steps);
    let zero_state = LstmState::zeros(h_dim);
    let init = init.unwrap_or(&zero_state);

    let mut grads = LstmParams::zeros(params.input_dim, params.hidden_dim);
    let mut d_xs = vec![vec![0.0; params.input_dim]; steps];
    let mut dh_next = vec![0.0; h_dim];
    let mut dc_next = vec![0.0; h_dim];
    let mut dz = vec![0.0; 4 * h_dim];

    for t in (0..steps).rev() {
        let [i, f, g, o] = &cache.gates[t];
        let c = &cache.cells[t];
        let c_prev = if t == 0 { &init.c } else { &cache.cells[t - 1] };
        let h_prev = if t == 0 { &init.h } else { &cache.hiddens[t - 1] };

        for k in 0..h_dim {
            let dh = d_hiddens[t][k] + dh_next[k];
            let tanh_c = c[k].tanh();
            let d_o = dh * tanh_c;
            let dc = dc_next[k] + dh * o[k] * (1.0 - tanh_c * tanh_c);
            let d_i = dc * g[k];
            let d_f = dc * c_prev[k];
            let d_g = dc * i[k];
            dc_next[k] = dc * f[k];
            dz[k] = d_i * i[k] * (1.0 - i[k]);
            dz[h_dim + k] = d_f * f[k] * (1.0 - f[k]);
            dz[2 * h_dim + k] = d_g * (1.0 - g[k] * g[k]);
            dz[3 * h_dim + k] = d_o * o[k] * (1.0 - o[k]);
        }

        grads.wx.add_outer(&dz, &xs[t]);
        grads.wh.add_outer(&dz, h_prev);
        for (slot, d) in grads.b.iter_mut().zip(&dz) {
            *slot += d;
        }
        params.wx.tr_matvec_acc(&dz, &mut d_xs[t]);
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        params.wh.tr_matvec_acc(&dz, &mut dh_next);
    }

    LstmBackward { grads, d_xs, d_h0: dh_next, d_c0: dc_next }
}
