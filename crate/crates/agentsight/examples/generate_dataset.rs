//! Simulates a small labeled corpus and writes it to disk in the JSONL
//! format the rest of the pipeline consumes.
//!
//! Run with: cargo run --example generate_dataset

use agentsight::corpus::{read_corpus, write_corpus};
use agentsight::event::serialize_event;
use agentsight::sim::{generate_dataset, uniform_mix, DatasetSpec, SimConfig};

fn main() {
    let sim = SimConfig::default();
    let spec = DatasetSpec {
        train_size: 20,
        val_size: 10,
        test_size: 10,
        failure_mix: uniform_mix(),
        intensity: 1.0,
    };
    let dataset = generate_dataset(&sim, &spec).expect("generation is seeded and infallible");

    println!(
        "generated {} train / {} validation / {} test runs (seed {})",
        dataset.train.len(),
        dataset.validation.len(),
        dataset.test.len(),
        sim.rng_seed
    );

    let mut by_class: std::collections::BTreeMap<String, usize> = Default::default();
    for run in dataset.validation.iter().chain(&dataset.test) {
        let key = match run.label.vuln_class {
            Some(class) => format!("{class}"),
            None => "Benign".into(),
        };
        *by_class.entry(key).or_default() += 1;
    }
    println!("validation+test label mix:");
    for (class, count) in &by_class {
        println!("  {class:<14} {count}");
    }

    let dir = std::env::temp_dir().join("agentsight_dataset_example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    write_corpus(&dataset.train, &dir.join("train.jsonl")).expect("write train");
    write_corpus(&dataset.validation, &dir.join("validation.jsonl")).expect("write val");
    write_corpus(&dataset.test, &dir.join("test.jsonl")).expect("write test");
    dataset.manifest.write(&dir.join("manifest.json")).expect("write manifest");
    println!("\ncorpora written under {}", dir.display());

    // Round trip: the files read back into the same runs.
    let reread = read_corpus(&dir.join("test.jsonl")).expect("read test");
    assert_eq!(reread.runs, dataset.test);
    assert!(reread.issues.is_empty());
    println!("round trip verified: {} runs, no issues", reread.runs.len());

    let first = &dataset.test[0];
    println!("\nfirst three events of {}:", first.run_id);
    for event in first.events.iter().take(3) {
        println!("  {}", serialize_event(event));
    }
}
