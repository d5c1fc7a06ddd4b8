//! Classifies an alert and locates its root-cause agent with the offline
//! rule-based backend, then scores the explanation quality under the rubric.
//!
//! Run with: cargo run --example explain_alerts

use agentsight::explain::{explain_run, score_explanation, MockBackend};
use agentsight::sim::{generate_run, inject_failure, FailureClass, FailureSpec, SimConfig};

fn main() {
    let sim = SimConfig::default();
    let backend = MockBackend::new();

    for (class, target) in [
        (FailureClass::IpiLoop, 2),
        (FailureClass::MemoryPoisoning, 3),
        (FailureClass::Hallucination, 1),
    ] {
        let benign = generate_run(&sim, 7 + target as u64).expect("run");
        let spec = FailureSpec { class, target_agent: target, intensity: 1.0 };
        let run = inject_failure(&benign, &spec, sim.rng_seed).expect("inject");

        let explanation = explain_run(&run, &backend).expect("explain");
        let rubric = score_explanation(&explanation.combined_text(), &run, &run.label);

        println!("run {} (injected {class:?} at agent {target})", run.run_id);
        println!("  predicted class   {}", explanation.classification.predicted);
        println!("  root cause agent  {}", explanation.rca.root_cause_agent);
        println!(
            "  rubric            pattern {}/4, evidence {}/3, completeness {}/3 -> {}/10",
            rubric.pattern_detection,
            rubric.evidence_quality,
            rubric.completeness,
            rubric.total()
        );
        let first_line = explanation
            .classification
            .analysis_text
            .lines()
            .find(|l| l.starts_with("- **Type**"))
            .unwrap_or_default();
        println!("  verdict line      {first_line}\n");
    }

    let benign = generate_run(&sim, 77).expect("run");
    let explanation = explain_run(&benign, &backend).expect("explain");
    println!(
        "benign run {} -> {} (root cause agent {}, no investigation round trip)",
        benign.run_id,
        explanation.classification.predicted,
        explanation.rca.root_cause_agent
    );
}
