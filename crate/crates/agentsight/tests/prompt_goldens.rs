//! Byte-stability of the prompt templates.
//!
//! Every rendered prompt for a fixed simulator run must match its checked-in
//! golden file exactly. Template edits fail here until the goldens are
//! regenerated with `UPDATE_GOLDENS=1 cargo test --test prompt_goldens`.

use std::path::PathBuf;

use agentsight::event::VulnClass;
use agentsight::explain::{
    build_classifier_prompt, build_judge_prompt, build_rca_prompt, ChatMessage, JudgeVariant,
};
use agentsight::sim::{generate_run, inject_failure, FailureClass, FailureSpec, SimConfig};

fn fixture_run() -> agentsight::event::RunLog {
    let sim = SimConfig::default();
    let run = generate_run(&sim, 42).expect("fixture run");
    let spec =
        FailureSpec { class: FailureClass::IpiLoop, target_agent: 2, intensity: 1.0 };
    inject_failure(&run, &spec, sim.rng_seed).expect("fixture injection")
}

fn render(messages: &[ChatMessage]) -> String {
    let mut out = String::new();
    for message in messages {
        out.push_str("--- role: ");
        out.push_str(&message.role);
        out.push_str(" ---\n");
        out.push_str(&message.content);
        out.push('\n');
    }
    out
}

fn check(name: &str, rendered: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/goldens").join(name);
    if std::env::var_os("UPDATE_GOLDENS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, rendered).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| {
        panic!("missing golden {name} ({e}); regenerate with UPDATE_GOLDENS=1")
    });
    assert_eq!(
        expected, rendered,
        "golden {name} drifted; if the template change is intentional, \
         regenerate with UPDATE_GOLDENS=1"
    );
}

#[test]
fn classifier_prompt_is_byte_stable() {
    check("classifier_prompt.txt", &render(&build_classifier_prompt(&fixture_run())));
}

#[test]
fn rca_prompt_is_byte_stable() {
    check("rca_prompt.txt", &render(&build_rca_prompt(&fixture_run(), VulnClass::Ipi)));
}

#[test]
fn llm_judge_prompt_is_byte_stable() {
    check(
        "judge_llm_prompt.txt",
        &render(&build_judge_prompt(&fixture_run(), JudgeVariant::LlmJudge)),
    );
}

#[test]
fn agent_judge_prompt_is_byte_stable() {
    check(
        "judge_agent_prompt.txt",
        &render(&build_judge_prompt(&fixture_run(), JudgeVariant::AgentJudge)),
    );
}
