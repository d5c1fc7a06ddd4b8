//! Injects each of the seven failure classes into the same benign run and
//! shows what changes: event counts, duration, and the first line of
//! injected content.
//!
//! Run with: cargo run --example inject_failures

use agentsight::event::{validate_run, EventPayload};
use agentsight::sim::{generate_run, inject_failure, FailureClass, FailureSpec, SimConfig};

fn total_duration(run: &agentsight::event::RunLog) -> u64 {
    let first = run.events.first().map(|e| e.timestamp_ms).unwrap_or(0);
    let last = run.events.last().map(|e| e.timestamp_ms).unwrap_or(0);
    last - first
}

fn main() {
    let sim = SimConfig::default();
    let benign = generate_run(&sim, 3).expect("seeded run");
    println!(
        "benign baseline: {} events, {} ms, label {:?}",
        benign.events.len(),
        total_duration(&benign),
        benign.label.is_anomalous
    );

    println!(
        "\n{:<20} {:>7} {:>9}  {}",
        "class", "events", "ms", "sample of injected content"
    );
    for class in FailureClass::ALL {
        let spec = FailureSpec { class, target_agent: 2, intensity: 1.0 };
        let injected = inject_failure(&benign, &spec, sim.rng_seed).expect("injection");
        validate_run(&injected).expect("injected runs stay lifecycle-valid");
        assert_eq!(injected.label.root_cause_agent, Some(2));

        // First LLM or tool text that the benign run does not contain.
        let sample = injected
            .events
            .iter()
            .filter_map(|e| match &e.payload {
                EventPayload::LlmCall { output, .. } => Some(output),
                EventPayload::ToolUsage { output, .. } => Some(output),
                _ => None,
            })
            .find(|text| {
                !benign.events.iter().any(|b| match &b.payload {
                    EventPayload::LlmCall { output, .. } => output == *text,
                    EventPayload::ToolUsage { output, .. } => output == *text,
                    _ => false,
                })
            })
            .map(|text| text.chars().take(48).collect::<String>())
            .unwrap_or_else(|| "(timing/volume change only)".into());

        println!(
            "{:<20} {:>7} {:>9}  {sample}",
            format!("{class:?}"),
            injected.events.len(),
            total_duration(&injected),
        );
    }
}
