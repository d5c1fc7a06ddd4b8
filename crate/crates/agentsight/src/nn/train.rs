//! Mini-batch training loops for both autoencoder families.
//!
//! Training is deterministic for a fixed seed: epoch shuffles come from one
//! seeded stream and batch gradients are plain averages.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::linear_ae::LinearAutoencoder;
use super::seq_ae::SeqAutoencoder;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.epochs == 0 {
            return Err(NnError::InvalidInput("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidInput("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NnError::InvalidInput("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-sample loss observed during each epoch, before that epoch's
    /// updates finished, so the curve reflects what the optimizer saw.
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
}

/// One optimizer update from a batch of sequences; returns the mean loss.
pub fn train_step_seq(
    model: &mut SeqAutoencoder,
    adam: &mut Adam,
    params: &mut Vec<f64>,
    batch: &[&Vec<Vec<f64>>],
) -> Result<f64, NnError> {
    let mut grad_acc = vec![0.0; params.len()];
    let mut loss_acc = 0.0;
    for xs in batch {
        let (loss, grads) = model.backward(xs);
        if !loss.is_finite() {
            return Err(NnError::InvalidInput("loss is not finite".into()));
        }
        loss_acc += loss;
        for (slot, g) in grad_acc.iter_mut().zip(grads.params_flat()) {
            *slot += g;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grad_acc {
        *g *= scale;
    }
    adam.step(params, &grad_acc);
    model.set_params_flat(params)?;
    Ok(loss_acc * scale)
}

pub fn train_seq_ae(
    model: &mut SeqAutoencoder,
    sequences: &[Vec<Vec<f64>>],
    config: &TrainConfig,
) -> Result<TrainReport, NnError> {
    config.validate()?;
    if sequences.is_empty() {
        return Err(NnError::InvalidInput("training set is empty".into()));
    }
    for xs in sequences {
        model.check_sequence(xs)?;
    }

    let mut params = model.params_flat();
    let mut adam = Adam::new(AdamConfig::with_learning_rate(config.learning_rate), params.len());
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_index, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Vec<Vec<f64>>> = chunk.iter().map(|&i| &sequences[i]).collect();
            let loss = train_step_seq(model, &mut adam, &mut params, &batch)
                .map_err(|_| NnError::NonFinite { epoch, batch: batch_index })?;
            epoch_loss += loss * chunk.len() as f64;
        }
        epoch_losses.push(epoch_loss / sequences.len() as f64);
    }

    let final_loss = *epoch_losses.last().expect("at least one epoch");
    Ok(TrainReport { epoch_losses, final_loss })
}

/// One optimizer update from a batch of vectors; returns the mean loss.
pub fn train_step_linear(
    model: &mut LinearAutoencoder,
    adam: &mut Adam,
    params: &mut Vec<f64>,
    batch: &[&Vec<f64>],
) -> Result<f64, NnError> {
    let mut grad_acc = vec![0.0; params.len()];
    let mut loss_acc = 0.0;
    for x in batch {
        let (loss, grads) = model.backward(x);
        if !loss.is_finite() {
            return Err(NnError::InvalidInput("loss is not finite".into()));
        }
        loss_acc += loss;
        for (slot, g) in grad_acc.iter_mut().zip(grads.params_flat()) {
            *slot += g;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grad_acc {
        *g *= scale;
    }
    adam.step(params, &grad_acc);
    model.set_params_flat(params)?;
    Ok(loss_acc * scale)
}

pub fn train_linear_ae(
    model: &mut LinearAutoencoder,
    vectors: &[Vec<f64>],
    config: &TrainConfig,
) -> Result<TrainReport, NnError> {
    config.validate()?;
    if vectors.is_empty() {
        return Err(NnError::InvalidInput("training set is empty".into()));
    }
    for x in vectors {
        model.check_input(x)?;
    }

    let mut params = model.params_flat();
    let mut adam = Adam::new(AdamConfig::with_learning_rate(config.learning_rate), params.len());
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_index, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Vec<f64>> = chunk.iter().map(|&i| &vectors[i]).collect();
            let loss = train_step_linear(model, &mut adam, &mut params, &batch)
                .map_err(|_| NnError::NonFinite { epoch, batch: batch_index })?;
            epoch_loss += loss * chunk.len() as f64;
        }
        epoch_losses.push(epoch_loss / vectors.len() as f64);
    }

    let final_loss = *epoch_losses.last().expect("at least one epoch");
    Ok(TrainReport { epoch_losses, final_loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::linear_ae::LinearAeConfig;
    use crate::nn::seq_ae::SeqAeConfig;
    use rand::Rng;

    fn toy_sequences(count: usize, steps: usize, dim: usize) -> Vec<Vec<Vec<f64>>> {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        (0..count)
            .map(|_| {
                let base: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
                (0..steps)
                    .map(|t| base.iter().map(|b| b + 0.05 * t as f64).collect())
                    .collect()
            })
            .collect()
    }

    fn seq_config() -> SeqAeConfig {
        SeqAeConfig {
            input_dim: 6,
            hidden_dim: 12,
            latent_dim: 4,
            num_layers: 1,
            bidirectional: false,
        }
    }

    #[test]
    fn loss_curve_descends_on_toy_data() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut model = SeqAutoencoder::new(seq_config(), &mut rng).unwrap();
        let data = toy_sequences(24, 4, 6);
        let config =
            TrainConfig { epochs: 60, batch_size: 8, learning_rate: 5e-3, seed: 9 };
        let report = train_seq_ae(&mut model, &data, &config).unwrap();
        assert_eq!(report.epoch_losses.len(), 60);
        assert!(
            report.final_loss < report.epoch_losses[0] * 0.2,
            "loss went from {} to {}",
            report.epoch_losses[0],
            report.final_loss
        );
    }

    #[test]
    fn training_is_deterministic_for_a_seed() {
        let data = toy_sequences(10, 3, 6);
        let config = TrainConfig { epochs: 5, batch_size: 4, learning_rate: 1e-3, seed: 3 };
        let run = |init_seed: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(init_seed);
            let mut model = SeqAutoencoder::new(seq_config(), &mut rng).unwrap();
            train_seq_ae(&mut model, &data, &config).unwrap();
            model.params_flat()
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn nan_inputs_surface_as_non_finite_error() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut model = SeqAutoencoder::new(seq_config(), &mut rng).unwrap();
        let mut data = toy_sequences(4, 3, 6);
        data[2][1][0] = f64::NAN;
        let config = TrainConfig { epochs: 2, batch_size: 2, learning_rate: 1e-3, seed: 0 };
        match train_seq_ae(&mut model, &data, &config) {
            Err(NnError::NonFinite { epoch: 0, .. }) => {}
            other => panic!("expected NonFinite at epoch 0, got {other:?}"),
        }
    }

    #[test]
    fn rejects_degenerate_configs_and_empty_data() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut model = SeqAutoencoder::new(seq_config(), &mut rng).unwrap();
        let data = toy_sequences(4, 3, 6);
        let no_epochs = TrainConfig { epochs: 0, batch_size: 2, learning_rate: 1e-3, seed: 0 };
        assert!(train_seq_ae(&mut model, &data, &no_epochs).is_err());
        let ok = TrainConfig { epochs: 1, batch_size: 2, learning_rate: 1e-3, seed: 0 };
        assert!(train_seq_ae(&mut model, &[], &ok).is_err());
        let bad_lr = TrainConfig { epochs: 1, batch_size: 2, learning_rate: 0.0, seed: 0 };
        assert!(train_seq_ae(&mut model, &data, &bad_lr).is_err());
    }

    #[test]
    fn linear_trainer_descends_and_is_deterministic() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let config = LinearAeConfig { input_dim: 8, hidden_dim: 10, latent_dim: 3 };
        let data: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..8).map(|_| rng.gen_range(-0.5..0.5)).collect())
            .collect();
        let train = TrainConfig { epochs: 80, batch_size: 10, learning_rate: 5e-3, seed: 1 };
        let mut model = LinearAutoencoder::new(config, &mut ChaCha12Rng::seed_from_u64(4)).unwrap();
        let report = train_linear_ae(&mut model, &data, &train).unwrap();
        assert!(report.final_loss < report.epoch_losses[0] * 0.5);

        let mut again = LinearAutoencoder::new(config, &mut ChaCha12Rng::seed_from_u64(4)).unwrap();
        train_linear_ae(&mut again, &data, &train).unwrap();
        assert_eq!(model.params_flat(), again.params_flat());
    }
}
