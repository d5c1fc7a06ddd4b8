//! Measures how a classification pass over detector alerts reduces the
//! false positive rate: once with the ground-truth oracle backend and once
//! with a deliberately imperfect classifier.
//!
//! Run with: cargo run --example filter_study

use agentsight::event::VulnClass;
use agentsight::explain::{classify_anomaly, ChatBackend, MockBackend, OracleBackend};
use agentsight::metrics::{filter_study, render_filter_study_text};
use agentsight::sim::{generate_dataset, uniform_mix, DatasetSpec, SimConfig};

fn main() {
    let sim = SimConfig::default();
    let spec = DatasetSpec {
        train_size: 0,
        val_size: 0,
        test_size: 40,
        failure_mix: uniform_mix(),
        intensity: 1.0,
    };
    let dataset = generate_dataset(&sim, &spec).expect("dataset");
    let runs = &dataset.test;

    // A synthetic detector that catches every anomaly but also fires on
    // every third benign run, so there are false positives to filter.
    let mut benign_seen = 0;
    let detector_verdicts: Vec<bool> = runs
        .iter()
        .map(|run| {
            if run.label.is_anomalous {
                true
            } else {
                benign_seen += 1;
                benign_seen % 3 == 0
            }
        })
        .collect();

    for (name, backend) in [
        ("oracle", Box::new(OracleBackend::from_runs(runs)) as Box<dyn ChatBackend>),
        ("imperfect mock (20% errors)", Box::new(MockBackend::with_error_rate(0.2, 11).unwrap())),
    ] {
        let classifier_verdicts: Vec<Option<bool>> = runs
            .iter()
            .zip(&detector_verdicts)
            .map(|(run, &flagged)| {
                flagged.then(|| {
                    let result = classify_anomaly(run, backend.as_ref()).expect("classify");
                    result.predicted != VulnClass::Benign
                })
            })
            .collect();

        let labels: Vec<bool> = runs.iter().map(|r| r.label.is_anomalous).collect();
        let study =
            filter_study(&detector_verdicts, &classifier_verdicts, &labels).expect("study");
        println!("==== classifier: {name} ====");
        println!("{}\n", render_filter_study_text(&study));
    }
}
