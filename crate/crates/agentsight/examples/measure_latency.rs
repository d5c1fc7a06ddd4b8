//! Times per-run scoring for the execution-signal and combined detectors on
//! ten-agent runs. Model dimensions match the desk preset; the training
//! schedule is shortened because latency does not depend on fit quality.
//!
//! Run with: cargo run --example measure_latency

use agentsight::detector::{train_detector, DetectorConfig, DetectorKind};
use agentsight::metrics::measure_latency;
use agentsight::sim::{generate_dataset, DatasetSpec, FailureClass, SimConfig};

fn main() {
    let sim = SimConfig { num_agents: 10, ..SimConfig::default() };
    let spec = DatasetSpec {
        train_size: 12,
        val_size: 8,
        test_size: 40,
        failure_mix: vec![(FailureClass::DpiExhaustion, 1.0)],
        intensity: 1.0,
    };
    let dataset = generate_dataset(&sim, &spec).expect("dataset");

    for kind in [DetectorKind::Epi, DetectorKind::Combined] {
        let mut config = DetectorConfig::desk(kind);
        config.epi.epochs = 2;
        config.semantic.epochs = 2;
        config.combined.epochs = 2;
        let detector =
            train_detector(&config, &dataset.train, &dataset.validation).expect("training");

        let report = measure_latency(&detector, &dataset.test).expect("latency");
        println!(
            "{:<10} mean {:>8.4}s  std {:>8.4}s  max {:>8.4}s  over {} ten-agent runs",
            format!("{kind:?}"),
            report.mean_seconds,
            report.std_dev_seconds,
            report.max_seconds,
            report.per_run_seconds.len()
        );
    }
}
