//! From-scratch neural components: LSTM and feed-forward autoencoders,
//! backpropagation through time, Adam, gradient checking and training loops.
//! No external numerics crates are involved, so scoring behaves identically
//! across platforms and checkpoints reload bit for bit.

pub mod adam;
pub mod gradcheck;
pub mod linear_ae;
pub mod lstm;
pub mod matrix;
pub mod seq_ae;
pub mod train;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use thiserror::Error;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check_linear, grad_check_seq, GradCheckReport, DEFAULT_EPSILON};
pub use linear_ae::{LinearAeConfig, LinearAutoencoder};
pub use seq_ae::{SeqAeConfig, SeqAutoencoder};
pub use train::{train_linear_ae, train_seq_ae, TrainConfig, TrainReport};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization failure: {0}")]
    Serde(#[from] serde_json::Error),
}

pub fn save_seq_ae(model: &SeqAutoencoder, path: &Path) -> Result<(), NnError> {
    let file = File::create(path)?;
    serde_json::to_writer(BufWriter::new(file), model)?;
    Ok(())
}

/// Loads and structurally validates a sequence autoencoder checkpoint.
pub fn load_seq_ae(path: &Path) -> Result<SeqAutoencoder, NnError> {
    let file = File::open(path)?;
    let model: SeqAutoencoder = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
    model.validate()?;
    Ok(model)
}

pub fn save_linear_ae(model: &LinearAutoencoder, path: &Path) -> Result<(), NnError> {
    let file = File::create(path)?;
    serde_json::to_writer(BufWriter::new(file), model)?;
    Ok(())
}

pub fn load_linear_ae(path: &Path) -> Result<LinearAutoencoder, NnError> {
    let file = File::open(path)?;
    let model: LinearAutoencoder = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn seq_checkpoint_reloads_bit_exact() {
        let config = SeqAeConfig {
            input_dim: 5,
            hidden_dim: 6,
            latent_dim: 3,
            num_layers: 2,
            bidirectional: true,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let model = SeqAutoencoder::new(config, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.json");
        save_seq_ae(&model, &path).unwrap();
        let loaded = load_seq_ae(&path).unwrap();
        assert_eq!(loaded.params_flat(), model.params_flat());

        let xs: Vec<Vec<f64>> =
            (0..4).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let a = model.reconstruction_error(&xs).unwrap();
        let b = loaded.reconstruction_error(&xs).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn linear_checkpoint_reloads_bit_exact() {
        let config = LinearAeConfig { input_dim: 7, hidden_dim: 5, latent_dim: 2 };
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let model = LinearAutoencoder::new(config, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("linear.json");
        save_linear_ae(&model, &path).unwrap();
        let loaded = load_linear_ae(&path).unwrap();
        assert_eq!(loaded.params_flat(), model.params_flat());
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.json");
        std::fs::write(&path, "{\"config\":{\"input_dim\":3}").unwrap();
        match load_seq_ae(&path) {
            Err(NnError::Checkpoint(msg)) => assert!(msg.contains("broken.json")),
            other => panic!("expected checkpoint error, got {other:?}"),
        }

        // Structurally valid JSON with mismatched shapes must also fail.
        let config = SeqAeConfig {
            input_dim: 4,
            hidden_dim: 4,
            latent_dim: 2,
            num_layers: 1,
            bidirectional: false,
        };
        let model =
            SeqAutoencoder::new(config, &mut ChaCha12Rng::seed_from_u64(1)).unwrap();
        let mut value = serde_json::to_value(&model).unwrap();
        value["config"]["latent_dim"] = serde_json::json!(9);
        let tampered = dir.path().join("tampered.json");
        std::fs::write(&tampered, serde_json::to_string(&value).unwrap()).unwrap();
        assert!(load_seq_ae(&tampered).is_err());
    }
}
