//! Synthetic multi-agent run simulator.
//!
//! Generation is a pure function of (config, run index): the same inputs
//! produce byte-identical corpora on any platform. Benign runs follow a
//! sequential pipeline of agents; [`inject_failure`] derives an anomalous
//! run from a benign one.

mod inject;
pub(crate) mod plan;
pub(crate) mod text;

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{GroundTruth, RunLog};
use crate::sim::plan::{AgentPlan, CallPlan, IterationPlan, RunPlan, ToolPlan};

pub use inject::{
    FailureClass, FailureSpec, BACKDOOR_OUTPUT, BACKDOOR_TRIGGER_PREFIX, BIAS_TEXT,
    EXHAUSTION_TRIGGER, FABRICATED_CLAIMS, LURE_INSTRUCTION, LURE_URL, MISINFO_CLAIM,
    MISINFO_TRIGGER, POISON_ECHO, POISON_TEXT,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid failure spec: {0}")]
    InvalidSpec(String),
    #[error("run shape not supported by the simulator: {0}")]
    UnsupportedShape(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Inclusive integer range used for simulator draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: u64,
    pub hi: u64,
}

impl Bounds {
    pub fn new(lo: u64, hi: u64) -> Self {
        Self { lo, hi }
    }

    fn draw(&self, rng: &mut ChaCha12Rng) -> u64 {
        rng.gen_range(self.lo..=self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub num_agents: u32,
    pub iterations_per_agent: Bounds,
    /// Total tool usages per agent, spread over its iterations.
    pub tools_per_agent: Bounds,
    pub prompt_tokens: Bounds,
    pub completion_tokens: Bounds,
    pub llm_duration_ms: Bounds,
    pub vocab_seed_topics: Vec<String>,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_agents: 3,
            iterations_per_agent: Bounds::new(2, 5),
            tools_per_agent: Bounds::new(0, 3),
            prompt_tokens: Bounds::new(80, 400),
            completion_tokens: Bounds::new(30, 200),
            llm_duration_ms: Bounds::new(500, 2500),
            vocab_seed_topics: text::default_topics(),
            rng_seed: 7,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.num_agents == 0 {
            return Err(SimError::InvalidConfig("num_agents must be >= 1".into()));
        }
        if self.iterations_per_agent.lo == 0 {
            return Err(SimError::InvalidConfig("iterations_per_agent.lo must be >= 1".into()));
        }
        for (name, b) in [
            ("iterations_per_agent", self.iterations_per_agent),
            ("tools_per_agent", self.tools_per_agent),
            ("prompt_tokens", self.prompt_tokens),
            ("completion_tokens", self.completion_tokens),
            ("llm_duration_ms", self.llm_duration_ms),
        ] {
            if b.lo > b.hi {
                return Err(SimError::InvalidConfig(format!("{name}: lo {} > hi {}", b.lo, b.hi)));
            }
        }
        if self.llm_duration_ms.lo == 0 {
            return Err(SimError::InvalidConfig("llm_duration_ms.lo must be >= 1".into()));
        }
        if self.vocab_seed_topics.is_empty() {
            return Err(SimError::InvalidConfig("vocab_seed_topics must not be empty".into()));
        }
        Ok(())
    }
}

fn run_rng(seed: u64, run_index: u64) -> ChaCha12Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&run_index.to_le_bytes());
    bytes[16..24].copy_from_slice(&0x5ee_d515_17u64.to_le_bytes());
    ChaCha12Rng::from_seed(bytes)
}

fn fnv64(data: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in data {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

const MODEL_VERSION: &str = "sim-lm-1.0";
const BASE_TS: u64 = 1_735_689_600_000;

/// Generates one benign run. Deterministic in (config, run_index).
pub fn generate_run(config: &SimConfig, run_index: u64) -> Result<RunLog, SimError> {
    config.validate()?;
    let mut rng = run_rng(config.rng_seed, run_index);
    let topic = &config.vocab_seed_topics
        [rng.gen_range(0..config.vocab_seed_topics.len())]
    .clone();

    let mut agents = Vec::new();
    for k in 1..=config.num_agents {
        let role = text::agent_name(k, config.num_agents);
        let iterations_n = config.iterations_per_agent.draw(&mut rng) as usize;
        let tools_n = config.tools_per_agent.draw(&mut rng) as usize;

        let mut tool_slots = vec![0usize; iterations_n];
        for _ in 0..tools_n {
            let slot = rng.gen_range(0..iterations_n);
            tool_slots[slot] += 1;
        }

        let mut iterations = Vec::new();
        for (i, slots) in tool_slots.iter().enumerate() {
            let tools = (0..*slots)
                .map(|_| ToolPlan {
                    tool_name: text::pick(&mut rng, &text::TOOL_NAMES).to_string(),
                    input: text::tool_input(&mut rng, topic),
                    output: text::tool_output(&mut rng, topic),
                    failed: rng.gen_range(0..100) < 4,
                    gap: rng.gen_range(20..=200),
                })
                .collect();
            iterations.push(IterationPlan {
                tools,
                gap_before_call: rng.gen_range(5..=50),
                call: CallPlan {
                    input: text::llm_input(&mut rng, topic, &role, i as u32 + 1),
                    output: text::llm_output(&mut rng, topic, &role),
                    duration_ms: config.llm_duration_ms.draw(&mut rng),
                    prompt_tokens: config.prompt_tokens.draw(&mut rng),
                    completion_tokens: config.completion_tokens.draw(&mut rng),
                    model_version: MODEL_VERSION.into(),
                },
                errors: Vec::new(),
            });
        }

        agents.push(AgentPlan {
            agent_data: format!("role: {role}; order: {k}"),
            start_gap: rng.gen_range(5..=50),
            iterations,
            finish_gap: rng.gen_range(5..=50),
            task_output: text::task_output(&mut rng, topic, &role),
            name: role,
        });
    }

    let plan = RunPlan {
        run_id: format!("run-{run_index:06}"),
        start_ts: BASE_TS + run_index * 3_600_000,
        user_inputs: text::user_inputs(&mut rng, topic),
        application_data: format!("pipeline: {} agents; topic: {topic}", config.num_agents),
        llm_models: vec![MODEL_VERSION.into()],
        system_data: "sim-host linux x86_64".into(),
        agents,
        end_gap: rng.gen_range(5..=50),
        label: GroundTruth::benign(),
    };
    Ok(plan.emit())
}

/// Derives an anomalous run from a benign one. Deterministic in
/// (run, spec, rng_seed); events before the target agent's span keep their
/// content and timestamps. The returned run validates.
pub fn inject_failure(run: &RunLog, spec: &FailureSpec, rng_seed: u64) -> Result<RunLog, SimError> {
    if !(spec.intensity > 0.0 && spec.intensity <= 1.0) {
        return Err(SimError::InvalidSpec(format!("intensity {} outside (0, 1]", spec.intensity)));
    }
    let mut plan = RunPlan::parse(run)?;
    if spec.target_agent == 0 || spec.target_agent as usize > plan.agents.len() {
        return Err(SimError::InvalidSpec(format!(
            "target agent {} outside 1..={}",
            spec.target_agent,
            plan.agents.len()
        )));
    }
    let mut rng = run_rng(rng_seed ^ fnv64(run.run_id.as_bytes()), u64::from(spec.target_agent));
    inject::apply(&mut plan, spec, &mut rng);
    Ok(plan.emit())
}

/// Relative weights over failure classes for anomalous halves of splits.
pub type FailureMix = Vec<(FailureClass, f64)>;

pub fn uniform_mix() -> FailureMix {
    FailureClass::ALL.iter().map(|c| (*c, 1.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub failure_mix: FailureMix,
    pub intensity: f64,
}

impl DatasetSpec {
    /// Small preset sized for interactive work: 500 benign training runs and
    /// 100-run validation/test splits.
    pub fn desk(failure_mix: FailureMix) -> Self {
        Self { train_size: 500, val_size: 100, test_size: 100, failure_mix, intensity: 1.0 }
    }

    /// Full-scale preset: over 2000 benign training runs and 200-run
    /// validation/test splits.
    pub fn full(failure_mix: FailureMix) -> Self {
        Self { train_size: 2048, val_size: 200, test_size: 200, failure_mix, intensity: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config: SimConfig,
    pub spec: DatasetSpec,
    /// Split name ("train", "validation", "test") to run ids, in order.
    pub splits: BTreeMap<String, Vec<String>>,
    pub labels: BTreeMap<String, GroundTruth>,
}

impl DatasetManifest {
    pub fn write(&self, path: &Path) -> Result<(), SimError> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, SimError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<RunLog>,
    pub validation: Vec<RunLog>,
    pub test: Vec<RunLog>,
    pub manifest: DatasetManifest,
}

/// Generates train/validation/test splits with disjoint run ids. Training
/// runs are all benign; validation and test are half benign, half anomalous
/// (odd positions), with classes drawn from the failure mix.
pub fn generate_dataset(config: &SimConfig, spec: &DatasetSpec) -> Result<Dataset, SimError> {
    config.validate()?;
    if spec.failure_mix.is_empty() || spec.failure_mix.iter().all(|(_, w)| *w <= 0.0) {
        return Err(SimError::InvalidSpec("failure_mix has no positive weights".into()));
    }
    if !(spec.intensity > 0.0 && spec.intensity <= 1.0) {
        return Err(SimError::InvalidSpec(format!("intensity {} outside (0, 1]", spec.intensity)));
    }

    let mut mix_rng = run_rng(config.rng_seed ^ 0x9e37_79b9_7f4a_7c15, u64::MAX);
    let total_weight: f64 = spec.failure_mix.iter().map(|(_, w)| w.max(0.0)).sum();
    let draw_class = |rng: &mut ChaCha12Rng| -> FailureClass {
        let mut point = rng.gen_range(0.0..total_weight);
        for (class, weight) in &spec.failure_mix {
            let weight = weight.max(0.0);
            if point < weight {
                return *class;
            }
            point -= weight;
        }
        spec.failure_mix.last().unwrap().0
    };

    let mut next_index = 0u64;
    let mut benign = |n: usize, out: &mut Vec<RunLog>| -> Result<(), SimError> {
        for _ in 0..n {
            out.push(generate_run(config, next_index)?);
            next_index += 1;
        }
        Ok(())
    };

    let mut train = Vec::new();
    benign(spec.train_size, &mut train)?;

    let mut eval_split = |n: usize| -> Result<Vec<RunLog>, SimError> {
        let mut runs = Vec::new();
        for i in 0..n {
            let run = generate_run(config, next_index)?;
            next_index += 1;
            if i % 2 == 1 {
                let failure = FailureSpec {
                    class: draw_class(&mut mix_rng),
                    target_agent: mix_rng.gen_range(1..=config.num_agents),
                    intensity: spec.intensity,
                };
                runs.push(inject_failure(&run, &failure, config.rng_seed)?);
            } else {
                runs.push(run);
            }
        }
        Ok(runs)
    };

    let validation = eval_split(spec.val_size)?;
    let test = eval_split(spec.test_size)?;

    let ids = |runs: &[RunLog]| runs.iter().map(|r| r.run_id.clone()).collect::<Vec<_>>();
    let mut labels = BTreeMap::new();
    for run in train.iter().chain(&validation).chain(&test) {
        labels.insert(run.run_id.clone(), run.label.clone());
    }
    let manifest = DatasetManifest {
        config: config.clone(),
        spec: spec.clone(),
        splits: BTreeMap::from([
            ("train".to_string(), ids(&train)),
            ("validation".to_string(), ids(&validation)),
            ("test".to_string(), ids(&test)),
        ]),
        labels,
    };

    Ok(Dataset { train, validation, test, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::write_corpus;
    use crate::event::{validate_run, EventPayload, VulnClass};

    fn spec(class: FailureClass, target: u32, intensity: f64) -> FailureSpec {
        FailureSpec { class, target_agent: target, intensity }
    }

    fn tool_count(run: &RunLog, agent: u32) -> usize {
        run.events
            .iter()
            .filter(|e| matches!(&e.payload, EventPayload::ToolUsage { agent: a, .. } if a.index == agent))
            .count()
    }

    fn llm_count(run: &RunLog, agent: u32) -> usize {
        run.events
            .iter()
            .filter(|e| matches!(&e.payload, EventPayload::LlmCall { agent: a, .. } if a.index == agent))
            .count()
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let config = SimConfig::default();
        for index in 0..100 {
            let a = generate_run(&config, index).unwrap();
            let b = generate_run(&config, index).unwrap();
            assert_eq!(a, b);
            validate_run(&a).unwrap();
        }
    }

    #[test]
    fn distinct_indices_differ() {
        let config = SimConfig::default();
        let a = generate_run(&config, 1).unwrap();
        let b = generate_run(&config, 2).unwrap();
        assert_ne!(a.events, b.events);
    }

    #[test]
    fn plan_round_trips_through_emit() {
        let config = SimConfig::default();
        for index in 0..20 {
            let run = generate_run(&config, index).unwrap();
            let plan = RunPlan::parse(&run).unwrap();
            assert_eq!(plan.emit(), run);
        }
    }

    #[test]
    fn injections_keep_runs_valid_and_set_labels() {
        let config = SimConfig::default();
        for (i, class) in FailureClass::ALL.into_iter().enumerate() {
            let run = generate_run(&config, i as u64).unwrap();
            let target = (i as u32 % config.num_agents) + 1;
            let injected = inject_failure(&run, &spec(class, target, 1.0), 11).unwrap();
            validate_run(&injected).unwrap();
            assert_eq!(injected.label.vuln_class, Some(class.vuln_class()));
            assert_eq!(injected.label.root_cause_agent, Some(target));
            assert_eq!(injected.run_id, run.run_id);
        }
    }

    #[test]
    fn injection_is_deterministic() {
        let config = SimConfig::default();
        let run = generate_run(&config, 3).unwrap();
        let s = spec(FailureClass::IpiLoop, 2, 0.7);
        assert_eq!(inject_failure(&run, &s, 5).unwrap(), inject_failure(&run, &s, 5).unwrap());
        assert_ne!(
            inject_failure(&run, &s, 5).unwrap().events,
            inject_failure(&run, &s, 6).unwrap().events
        );
    }

    #[test]
    fn injection_leaves_events_before_target_span_unchanged() {
        let config = SimConfig::default();
        let run = generate_run(&config, 4).unwrap();
        let start_of_agent2 = run
            .events
            .iter()
            .position(|e| matches!(&e.payload, EventPayload::AgentStarted { agent, .. } if agent.index == 2))
            .unwrap();
        for class in FailureClass::ALL {
            let injected = inject_failure(&run, &spec(class, 2, 1.0), 9).unwrap();
            for i in 1..start_of_agent2 {
                assert_eq!(injected.events[i], run.events[i], "class {class:?} event {i}");
            }
        }
    }

    #[test]
    fn exhaustion_adds_calls_and_errors() {
        let config = SimConfig::default();
        let run = generate_run(&config, 5).unwrap();
        let injected = inject_failure(&run, &spec(FailureClass::DpiExhaustion, 1, 1.0), 9).unwrap();
        assert!(llm_count(&injected, 1) > llm_count(&run, 1));
        assert!(injected
            .events
            .iter()
            .any(|e| matches!(&e.payload, EventPayload::ErrorEvent { .. })));
    }

    #[test]
    fn backdoor_changes_content_only() {
        let config = SimConfig::default();
        let run = generate_run(&config, 6).unwrap();
        let injected = inject_failure(&run, &spec(FailureClass::DpiBackdoor, 2, 1.0), 9).unwrap();
        assert_eq!(injected.events.len(), run.events.len());
        for (a, b) in run.events.iter().zip(&injected.events) {
            assert_eq!(a.timestamp_ms, b.timestamp_ms);
            assert_eq!(a.payload.kind_name(), b.payload.kind_name());
        }
    }

    #[test]
    fn ipi_loop_inflates_tool_usage_at_least_threefold() {
        let config = SimConfig::default();
        for seed in 0..50u64 {
            let run = generate_run(&config, 200 + seed).unwrap();
            let injected = inject_failure(&run, &spec(FailureClass::IpiLoop, 1, 1.0), seed).unwrap();
            let before = tool_count(&run, 1);
            let after = tool_count(&injected, 1);
            assert!(after >= 3 * before && after >= before + 3, "before {before} after {after}");
        }
    }

    #[test]
    fn dataset_splits_are_sized_and_disjoint() {
        let config = SimConfig::default();
        let spec = DatasetSpec {
            train_size: 30,
            val_size: 10,
            test_size: 10,
            failure_mix: uniform_mix(),
            intensity: 1.0,
        };
        let ds = generate_dataset(&config, &spec).unwrap();
        assert_eq!(ds.train.len(), 30);
        assert_eq!(ds.validation.len(), 10);
        assert_eq!(ds.test.len(), 10);
        assert!(ds.train.iter().all(|r| !r.label.is_anomalous));
        assert_eq!(ds.validation.iter().filter(|r| r.label.is_anomalous).count(), 5);
        assert_eq!(ds.test.iter().filter(|r| r.label.is_anomalous).count(), 5);

        let mut ids: Vec<&str> = ds
            .train
            .iter()
            .chain(&ds.validation)
            .chain(&ds.test)
            .map(|r| r.run_id.as_str())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 50);
        assert_eq!(ds.manifest.labels.len(), 50);
        for run in ds.validation.iter().chain(&ds.test) {
            validate_run(run).unwrap();
        }
    }

    #[test]
    fn dataset_corpora_are_byte_identical_across_generations() {
        let config = SimConfig::default();
        let spec = DatasetSpec {
            train_size: 5,
            val_size: 4,
            test_size: 4,
            failure_mix: uniform_mix(),
            intensity: 1.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = Vec::new();
        for round in 0..2 {
            let ds = generate_dataset(&config, &spec).unwrap();
            let path = dir.path().join(format!("train-{round}.jsonl"));
            write_corpus(&ds.validation, &path).unwrap();
            bytes.push(std::fs::read(&path).unwrap());
        }
        assert_eq!(bytes[0], bytes[1]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let config = SimConfig::default();
        let run = generate_run(&config, 0).unwrap();
        assert!(inject_failure(&run, &spec(FailureClass::Bias, 0, 1.0), 1).is_err());
        assert!(inject_failure(&run, &spec(FailureClass::Bias, 9, 1.0), 1).is_err());
        assert!(inject_failure(&run, &spec(FailureClass::Bias, 1, 0.0), 1).is_err());
        assert!(inject_failure(&run, &spec(FailureClass::Bias, 1, 1.5), 1).is_err());

        let bad = SimConfig { num_agents: 0, ..SimConfig::default() };
        assert!(matches!(generate_run(&bad, 0), Err(SimError::InvalidConfig(_))));
    }

    #[test]
    fn labels_expose_vuln_classes() {
        assert_eq!(FailureClass::DpiBackdoor.vuln_class(), VulnClass::Dpi);
        assert_eq!(FailureClass::IpiLoop.vuln_class(), VulnClass::Ipi);
        assert_eq!(FailureClass::MemoryPoisoning.vuln_class(), VulnClass::Mp);
    }
}
