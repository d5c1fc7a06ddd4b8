//! Trains a small execution-signal detector, calibrates its threshold on a
//! labeled validation split, and saves the bundle to disk.
//!
//! Run with: cargo run --example train_detector

use agentsight::detector::{train_detector, DetectorConfig, DetectorKind, TrainedDetector};
use agentsight::sim::{generate_dataset, DatasetSpec, FailureClass, SimConfig};

fn main() {
    let sim = SimConfig::default();
    let spec = DatasetSpec {
        train_size: 40,
        val_size: 20,
        test_size: 0,
        failure_mix: vec![(FailureClass::DpiExhaustion, 1.0)],
        intensity: 1.0,
    };
    let dataset = generate_dataset(&sim, &spec).expect("dataset");

    // Shrunk schedule so the example finishes in seconds; the desk preset
    // is the tuned configuration for real corpora.
    let mut config = DetectorConfig::desk(DetectorKind::Epi);
    config.epi.hidden_dim = 24;
    config.epi.latent_dim = 12;
    config.epi.epochs = 30;

    let started = std::time::Instant::now();
    let detector =
        train_detector(&config, &dataset.train, &dataset.validation).expect("training");
    println!(
        "trained on {} benign runs in {:.1}s",
        dataset.train.len(),
        started.elapsed().as_secs_f64()
    );
    println!("threshold        {:.6}", detector.threshold);
    println!("validation f1    {:.3}", detector.metadata.validation.f1);

    let losses = &detector.metadata.loss_curves["epi"];
    println!(
        "loss curve       {:.4} -> {:.4} over {} epochs",
        losses.first().unwrap(),
        losses.last().unwrap(),
        losses.len()
    );

    let dir = std::env::temp_dir().join("agentsight_bundle_example");
    std::fs::create_dir_all(&dir).expect("bundle dir");
    detector.save_bundle(&dir).expect("save");
    let reloaded = TrainedDetector::load_bundle(&dir).expect("load");
    let probe = &dataset.validation[0];
    let a = detector.score_run(probe).expect("score").value;
    let b = reloaded.score_run(probe).expect("score").value;
    assert_eq!(a.to_bits(), b.to_bits(), "reloaded bundle must score identically");
    println!("\nbundle saved to {} (reload verified bit-exact)", dir.display());
}
