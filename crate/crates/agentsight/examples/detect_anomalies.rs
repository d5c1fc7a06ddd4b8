//! Full offline detection pass: train on benign runs, then score a labeled
//! test split and compare verdicts against ground truth.
//!
//! Run with: cargo run --example detect_anomalies

use agentsight::detector::{train_detector, DetectorConfig, DetectorKind};
use agentsight::metrics::compute_metrics;
use agentsight::sim::{generate_dataset, DatasetSpec, FailureClass, SimConfig};

fn main() {
    let sim = SimConfig::default();
    let spec = DatasetSpec {
        train_size: 40,
        val_size: 20,
        test_size: 20,
        failure_mix: vec![(FailureClass::DpiExhaustion, 1.0), (FailureClass::IpiLoop, 1.0)],
        intensity: 1.0,
    };
    let dataset = generate_dataset(&sim, &spec).expect("dataset");

    let mut config = DetectorConfig::desk(DetectorKind::Epi);
    config.epi.hidden_dim = 24;
    config.epi.latent_dim = 12;
    config.epi.epochs = 30;
    let detector =
        train_detector(&config, &dataset.train, &dataset.validation).expect("training");

    println!("threshold {:.6}\n", detector.threshold);
    println!("{:<12} {:>10} {:>10}  {:<14} {}", "run", "score", "verdict", "truth", "agree");
    let mut predictions = Vec::new();
    let mut labels = Vec::new();
    for run in &dataset.test {
        let verdict = detector.classify_run(run).expect("score");
        let truth = match run.label.vuln_class {
            Some(class) => format!("{class}"),
            None => "Benign".into(),
        };
        let agree = verdict.is_anomalous() == run.label.is_anomalous;
        println!(
            "{:<12} {:>10.4} {:>10} {:<14} {}",
            run.run_id,
            verdict.score,
            if verdict.is_anomalous() { "anomalous" } else { "benign" },
            format!(" {truth}"),
            if agree { "yes" } else { "NO" },
        );
        predictions.push(verdict.is_anomalous());
        labels.push(run.label.is_anomalous);
    }

    let report = compute_metrics(&predictions, &labels).expect("metrics");
    println!(
        "\naccuracy {:.2}  f1 {}  fpr {}",
        report.accuracy,
        report.f1.map(|v| format!("{v:.2}")).unwrap_or_else(|| "absent".into()),
        report.fpr.map(|v| format!("{v:.2}")).unwrap_or_else(|| "absent".into()),
    );
}
