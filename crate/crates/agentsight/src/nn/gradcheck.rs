//! Central-difference verification of analytic gradients.

use super::linear_ae::LinearAutoencoder;
use super::seq_ae::SeqAutoencoder;

pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Worst relative disagreement between analytic and numeric gradients.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub param_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub params_checked: usize,
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    // Gradients that are both numerically zero carry no signal; comparing
    // them would only amplify floating point noise.
    if analytic.abs() < 1e-8 && numeric.abs() < 1e-8 {
        return 0.0;
    }
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn check_flat<F>(base: &[f64], analytic: &[f64], epsilon: f64, mut loss_at: F) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        param_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        params_checked: base.len(),
    };
    let mut probe = base.to_vec();
    for k in 0..base.len() {
        probe[k] = base[k] + epsilon;
        let plus = loss_at(&probe);
        probe[k] = base[k] - epsilon;
        let minus = loss_at(&probe);
        probe[k] = base[k];
        let numeric = (plus - minus) / (2.0 * epsilon);
        let rel = relative_error(analytic[k], numeric);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.param_index = k;
            report.analytic = analytic[k];
            report.numeric = numeric;
        }
    }
    report
}

/// Checks every parameter of a sequence autoencoder on one sequence.
pub fn grad_check_seq(model: &SeqAutoencoder, xs: &[Vec<f64>], epsilon: f64) -> GradCheckReport {
    let (_, grads) = model.backward(xs);
    let analytic = grads.params_flat();
    let base = model.params_flat();
    let mut scratch = model.clone();
    check_flat(&base, &analytic, epsilon, |flat| {
        scratch.set_params_flat(flat).expect("probe vector has model length");
        scratch.loss(xs)
    })
}

/// Checks every parameter of the feed-forward autoencoder on one vector.
pub fn grad_check_linear(model: &LinearAutoencoder, x: &[f64], epsilon: f64) -> GradCheckReport {
    let (_, grads) = model.backward(x);
    let analytic = grads.params_flat();
    let base = model.params_flat();
    let mut scratch = model.clone();
    check_flat(&base, &analytic, epsilon, |flat| {
        scratch.set_params_flat(flat).expect("probe vector has model length");
        scratch.loss(x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::linear_ae::LinearAeConfig;
    use crate::nn::seq_ae::SeqAeConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn sequence_gradients_match_central_differences_for_all_variants() {
        for bidirectional in [false, true] {
            for num_layers in 1..=3 {
                let config = SeqAeConfig {
                    input_dim: 5,
                    hidden_dim: 8,
                    latent_dim: 4,
                    num_layers,
                    bidirectional,
                };
                let mut rng = ChaCha12Rng::seed_from_u64(100 + num_layers as u64);
                let model = SeqAutoencoder::new(config, &mut rng).unwrap();
                let xs: Vec<Vec<f64>> = (0..3)
                    .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect();
                let report = grad_check_seq(&model, &xs, DEFAULT_EPSILON);
                assert!(
                    report.max_rel_error < 1e-4,
                    "layers={num_layers} bi={bidirectional}: rel {} at {} (analytic {} numeric {})",
                    report.max_rel_error,
                    report.param_index,
                    report.analytic,
                    report.numeric
                );
            }
        }
    }

    #[test]
    fn linear_gradients_match_central_differences() {
        let config = LinearAeConfig { input_dim: 10, hidden_dim: 7, latent_dim: 3 };
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let model = LinearAutoencoder::new(config, &mut rng).unwrap();
        let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let report = grad_check_linear(&model, &x, DEFAULT_EPSILON);
        assert!(
            report.max_rel_error < 1e-6,
            "rel {} at {} (analytic {} numeric {})",
            report.max_rel_error,
            report.param_index,
            report.analytic,
            report.numeric
        );
    }
}
