//! Deterministic template text for synthetic runs.
//!
//! Benign vocabulary deliberately avoids the literal token `Error` and the
//! marker phrases used by failure injections, so content features and
//! semantic embeddings separate cleanly.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

pub const ROLES: [&str; 10] = [
    "researcher",
    "planner",
    "reviewer",
    "analyst",
    "coordinator",
    "summarizer",
    "validator",
    "archivist",
    "scheduler",
    "editor",
];

pub const TOOL_NAMES: [&str; 4] = ["web_search", "rag_lookup", "calculator", "doc_reader"];

/// The retrieval tool targeted by memory poisoning.
pub const RETRIEVAL_TOOL: &str = "rag_lookup";

const CRITERIA: [&str; 5] = ["cost", "coverage", "freshness", "reliability", "clarity"];
const ASPECTS: [&str; 6] =
    ["opening hours", "pricing tiers", "local reviews", "seasonal availability", "transit options", "vendor records"];
const EXTRA_REQUIREMENTS: [&str; 4] = [
    "Keep the budget modest, flag any weak sources, and list open questions at the end.",
    "Compare at least three alternatives; prefer recent material over older summaries.",
    "Summarize the tradeoffs briefly, then give one clear recommendation!",
    "Note which findings were verified by a second source, and which were not.",
];

pub fn default_topics() -> Vec<String> {
    [
        "coastal trip planning",
        "quarterly market analysis",
        "product launch research",
        "conference logistics",
        "home renovation budgeting",
    ]
    .into_iter()
    .map(str::to_string)
    .collect()
}

pub fn agent_name(index_1based: u32, num_agents: u32) -> String {
    let i = (index_1based - 1) as usize;
    if num_agents as usize <= ROLES.len() {
        ROLES[i % ROLES.len()].to_string()
    } else {
        format!("{}-{}", ROLES[i % ROLES.len()], index_1based)
    }
}

pub fn pick<'a>(rng: &mut ChaCha12Rng, pool: &'a [&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

pub fn user_inputs(rng: &mut ChaCha12Rng, topic: &str) -> String {
    let mut text = format!(
        "Please handle {topic}: gather the relevant facts, weigh the alternatives, and deliver a final recommendation with clear reasoning."
    );
    for _ in 0..rng.gen_range(1..=2usize) {
        text.push(' ');
        text.push_str(pick(rng, &EXTRA_REQUIREMENTS));
    }
    text
}

pub fn llm_input(rng: &mut ChaCha12Rng, topic: &str, role: &str, iteration: u32) -> String {
    format!(
        "Iteration {iteration}: as the {role}, refine the working notes on {topic} and decide whether more {} checks are needed.",
        pick(rng, &ASPECTS)
    )
}

pub fn llm_output(rng: &mut ChaCha12Rng, topic: &str, role: &str) -> String {
    let n = rng.gen_range(2..=6u32);
    match rng.gen_range(0..4u32) {
        0 => format!(
            "For the {topic}, the {role} compiled {n} options and ranked them by {}.",
            pick(rng, &CRITERIA)
        ),
        1 => format!(
            "The {role} cross-checked {n} sources covering {topic} and kept only the consistent findings.",
            ),
        2 => format!(
            "Working through {topic}, the {role} narrowed the shortlist to {n} entries favoring {}.",
            pick(rng, &CRITERIA)
        ),
        _ => format!(
            "The {role} reconciled {n} notes about {topic} and marked the {} gaps for the next pass.",
            pick(rng, &ASPECTS)
        ),
    }
}

pub fn tool_input(rng: &mut ChaCha12Rng, topic: &str) -> String {
    format!("query: {topic} {}", pick(rng, &ASPECTS))
}

pub fn tool_output(rng: &mut ChaCha12Rng, topic: &str) -> String {
    let n = rng.gen_range(2..=5u32);
    format!("{n} results about {topic}, {} included.", pick(rng, &ASPECTS))
}

pub fn task_output(rng: &mut ChaCha12Rng, topic: &str, role: &str) -> String {
    let n = rng.gen_range(1..=3u32);
    format!(
        "The {role} finished the {topic} work with {n} recommendations, ordered by {}.",
        pick(rng, &CRITERIA)
    )
}
