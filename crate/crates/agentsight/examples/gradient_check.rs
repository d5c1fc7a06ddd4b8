//! Verifies every analytic gradient against central finite differences:
//! uni- and bidirectional sequence autoencoders at one and two layers, and
//! the feed-forward autoencoder.
//!
//! Run with: cargo run --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use agentsight::nn::{
    grad_check_linear, grad_check_seq, LinearAeConfig, LinearAutoencoder, SeqAeConfig,
    SeqAutoencoder, DEFAULT_EPSILON,
};

fn main() {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let xs: Vec<Vec<f64>> =
        (0..3).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();

    println!("{:<42} {:>12} {:>8}", "model", "max rel err", "params");
    for (layers, bidirectional) in [(1, false), (1, true), (2, false), (2, true)] {
        let config = SeqAeConfig {
            input_dim: 5,
            hidden_dim: 8,
            latent_dim: 4,
            num_layers: layers,
            bidirectional,
        };
        let model = SeqAutoencoder::new(config, &mut rng).expect("valid config");
        let report = grad_check_seq(&model, &xs, DEFAULT_EPSILON);
        let name = format!(
            "sequence {} layer{} {}",
            layers,
            if layers == 1 { "" } else { "s" },
            if bidirectional { "bidirectional" } else { "unidirectional" }
        );
        println!("{name:<42} {:>12.3e} {:>8}", report.max_rel_error, report.params_checked);
        assert!(report.max_rel_error < 1e-4, "gradient drift in {name}");
    }

    let config = LinearAeConfig { input_dim: 12, hidden_dim: 9, latent_dim: 5 };
    let model = LinearAutoencoder::new(config, &mut rng).expect("valid config");
    let x: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let report = grad_check_linear(&model, &x, DEFAULT_EPSILON);
    println!(
        "{:<42} {:>12.3e} {:>8}",
        "feed-forward", report.max_rel_error, report.params_checked
    );
    assert!(report.max_rel_error < 1e-6, "gradient drift in feed-forward model");

    println!("\nall gradients match finite differences");
}
