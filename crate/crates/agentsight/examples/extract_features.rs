//! Extracts the 35-feature execution vectors and the semantic texts from a
//! run, fits normalization on a benign batch, and shows how an exhaustion
//! injection shifts the normalized values.
//!
//! Run with: cargo run --example extract_features

use agentsight::features::{extract_epi, extract_semantic, NormStats, FEATURE_NAMES};
use agentsight::sim::{generate_run, inject_failure, FailureClass, FailureSpec, SimConfig};

fn main() {
    let sim = SimConfig::default();
    let benign: Vec<_> = (0..30).map(|i| generate_run(&sim, i).expect("run")).collect();
    let sequences: Vec<_> = benign.iter().map(extract_epi).collect();
    let stats = NormStats::fit(&sequences);

    let probe = generate_run(&sim, 99).expect("run");
    let spec = FailureSpec {
        class: FailureClass::DpiExhaustion,
        target_agent: 1,
        intensity: 1.0,
    };
    let injected = inject_failure(&probe, &spec, sim.rng_seed).expect("inject");

    let clean = stats.apply_sequence(&extract_epi(&probe));
    let dirty = stats.apply_sequence(&extract_epi(&injected));
    println!(
        "agent executions: {} benign, {} injected (agent 1 is the target)\n",
        clean.len(),
        dirty.len()
    );

    // Features of the targeted agent's execution, before and after injection,
    // sorted by how far the injection moved them.
    let mut rows: Vec<(usize, f64, f64)> = FEATURE_NAMES
        .iter()
        .enumerate()
        .map(|(i, _)| (i, clean[0][i], dirty[0][i]))
        .collect();
    rows.sort_by(|a, b| {
        let da = (a.2 - a.1).abs();
        let db = (b.2 - b.1).abs();
        db.partial_cmp(&da).unwrap()
    });

    println!("{:<28} {:>10} {:>10} {:>8}", "feature (normalized)", "benign", "injected", "shift");
    for (i, before, after) in rows.iter().take(12) {
        println!(
            "{:<28} {before:>10.3} {after:>10.3} {:>8.2}",
            FEATURE_NAMES[*i],
            (after - before).abs()
        );
    }

    let texts = extract_semantic(&injected);
    println!("\nsemantic channel: {} texts; first entry:", texts.len());
    let first: String = texts.first().map(|t| t.chars().take(72).collect()).unwrap_or_default();
    println!("  {first}");
}
