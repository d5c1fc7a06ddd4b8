//! Dense row-major matrix and affine-map primitives for the autoencoders.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Uniform(-scale, scale) entries drawn row-major.
    pub fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha12Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Vec<f64> {
        &mut self.data
    }

    pub fn shape_is_valid(&self) -> bool {
        self.data.len() == self.rows * self.cols
    }

    /// out = A x
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, slot) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *slot = acc;
        }
    }

    /// out += A x
    pub fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, slot) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *slot += acc;
        }
    }

    /// out += A^T y
    pub fn tr_matvec_acc(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, yr) in y.iter().enumerate() {
            if *yr == 0.0 {
                continue;
            }
            let row = self.row(r);
            for (slot, a) in out.iter_mut().zip(row) {
                *slot += a * yr;
            }
        }
    }

    /// A += y x^T
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (r, yr) in y.iter().enumerate() {
            if *yr == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (slot, xv) in row.iter_mut().zip(x) {
                *slot += yr * xv;
            }
        }
    }
}

/// y = W x + b with gradient helpers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Affine {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self { w: Matrix::zeros(out_dim, in_dim), b: vec![0.0; out_dim] }
    }

    pub fn uniform(out_dim: usize, in_dim: usize, scale: f64, rng: &mut ChaCha12Rng) -> Self {
        Self {
            w: Matrix::uniform(out_dim, in_dim, scale, rng),
            b: (0..out_dim).map(|_| rng.gen_range(-scale..scale)).collect(),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.b.clone();
        self.w.matvec_acc(x, &mut out);
        out
    }

    /// Accumulates parameter gradients for upstream gradient `dy` at input
    /// `x` and adds the input gradient into `dx`.
    pub fn backward_acc(&self, x: &[f64], dy: &[f64], grads: &mut Affine, dx: &mut [f64]) {
        grads.w.add_outer(dy, x);
        for (slot, d) in grads.b.iter_mut().zip(dy) {
            *slot += d;
        }
        self.w.tr_matvec_acc(dy, dx);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn matvec_and_transpose_agree_with_hand_values() {
        let mut m = Matrix::zeros(2, 3);
        m.data_mut().copy_from_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut out = vec![0.0; 2];
        m.matvec_into(&[1.0, 0.5, -1.0], &mut out);
        assert_eq!(out, vec![1.0 + 1.0 - 3.0, 4.0 + 2.5 - 6.0]);

        let mut back = vec![0.0; 3];
        m.tr_matvec_acc(&[1.0, -1.0], &mut back);
        assert_eq!(back, vec![-3.0, -3.0, -3.0]);
    }

    #[test]
    fn outer_product_accumulates() {
        let mut m = Matrix::zeros(2, 2);
        m.add_outer(&[1.0, 2.0], &[3.0, 4.0]);
        m.add_outer(&[1.0, 0.0], &[1.0, 1.0]);
        assert_eq!(m.data(), &[4.0, 5.0, 6.0, 8.0]);
    }

    #[test]
    fn affine_backward_matches_manual_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let affine = Affine::uniform(2, 3, 0.5, &mut rng);
        let x = [0.3, -0.2, 0.9];
        let dy = [1.0, -0.5];
        let mut grads = Affine::zeros(2, 3);
        let mut dx = vec![0.0; 3];
        affine.backward_acc(&x, &dy, &mut grads, &mut dx);
        for r in 0..2 {
            for c in 0..3 {
                assert_eq!(grads.w.row(r)[c], dy[r] * x[c]);
            }
        }
        assert_eq!(grads.b, dy.to_vec());
        for c in 0..3 {
            let expected = affine.w.row(0)[c] * dy[0] + affine.w.row(1)[c] * dy[1];
            assert!((dx[c] - expected).abs() < 1e-15);
        }
    }
}
