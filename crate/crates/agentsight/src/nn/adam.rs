//! Adam optimizer over a flat parameter vector.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self { learning_rate, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig, param_count: usize) -> Self {
        Self { config, step: 0, m: vec![0.0; param_count], v: vec![0.0; param_count] }
    }

    /// One update with bias-corrected first and second moment estimates.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let c = &self.config;
        let bias1 = 1.0 - c.beta1.powi(self.step as i32);
        let bias2 = 1.0 - c.beta2.powi(self.step as i32);
        for k in 0..params.len() {
            let g = grads[k];
            self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * g;
            self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * g * g;
            let m_hat = self.m[k] / bias1;
            let v_hat = self.v[k] / bias2;
            params[k] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_matches_closed_form() {
        // With zero moment state the first bias-corrected update reduces to
        // lr * g / (|g| + eps) regardless of gradient magnitude.
        let config = AdamConfig::with_learning_rate(0.05);
        let mut adam = Adam::new(config, 3);
        let mut params = vec![1.0, -2.0, 0.5];
        let grads = vec![10.0, -0.003, 0.0];
        adam.step(&mut params, &grads);
        let expected = |p: f64, g: f64| {
            if g == 0.0 {
                p
            } else {
                p - 0.05 * g / (g.abs() + 1e-8)
            }
        };
        assert!((params[0] - expected(1.0, 10.0)).abs() < 1e-9);
        assert!((params[1] - expected(-2.0, -0.003)).abs() < 1e-9);
        assert!((params[2] - expected(0.5, 0.0)).abs() < 1e-12);
    }

    #[test]
    fn converges_on_quadratic_bowl() {
        let mut adam = Adam::new(AdamConfig::with_learning_rate(0.1), 2);
        let mut params = vec![3.0, -4.0];
        for _ in 0..500 {
            let grads: Vec<f64> = params.iter().map(|p| 2.0 * p).collect();
            adam.step(&mut params, &grads);
        }
        assert!(params[0].abs() < 1e-2);
        assert!(params[1].abs() < 1e-2);
    }
}
