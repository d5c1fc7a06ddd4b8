//! Structured execution events for multi-agent runs.
//!
//! Every event is one JSON object on the wire (one line in a corpus file),
//! tagged by `kind` and carrying the `run_id` it belongs to. Timestamps are
//! integer milliseconds. [`validate_run`] checks lifecycle and bookkeeping
//! invariants and reports violations as data rather than failing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identity of an agent inside a run. Indices are 1-based; 0 is reserved to
/// mean "no agent" in root-cause labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentId {
    pub index: u32,
    pub name: String,
}

impl AgentId {
    pub fn new(index: u32, name: impl Into<String>) -> Self {
        Self { index, name: name.into() }
    }
}

/// Event payloads, tagged by `kind` on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventPayload {
    ApplicationStarted {
        user_inputs: String,
        application_data: String,
        llm_models: Vec<String>,
        system_data: String,
    },
    AgentStarted {
        agent: AgentId,
        agent_data: String,
    },
    LlmCall {
        agent: AgentId,
        iteration: u32,
        input: String,
        output: String,
        duration_ms: u64,
        prompt_tokens: u64,
        completion_tokens: u64,
        model_version: String,
    },
    ToolUsage {
        agent: AgentId,
        tool_name: String,
        usage_count: u32,
        input: String,
        output: String,
        failed: bool,
    },
    AgentFinished {
        agent: AgentId,
        task_output: String,
        duration_ms: u64,
        tools_used: BTreeMap<String, u32>,
        llm_call_count: u64,
    },
    ApplicationEnded {
        output: String,
        prompt_tokens_total: u64,
        completion_tokens_total: u64,
    },
    ErrorEvent {
        agent: AgentId,
        message: String,
    },
}

impl EventPayload {
    /// Agent the payload refers to, when it is agent-scoped.
    pub fn agent(&self) -> Option<&AgentId> {
        match self {
            EventPayload::AgentStarted { agent, .. }
            | EventPayload::LlmCall { agent, .. }
            | EventPayload::ToolUsage { agent, .. }
            | EventPayload::AgentFinished { agent, .. }
            | EventPayload::ErrorEvent { agent, .. } => Some(agent),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            EventPayload::ApplicationStarted { .. } => "ApplicationStarted",
            EventPayload::AgentStarted { .. } => "AgentStarted",
            EventPayload::LlmCall { .. } => "LlmCall",
            EventPayload::ToolUsage { .. } => "ToolUsage",
            EventPayload::AgentFinished { .. } => "AgentFinished",
            EventPayload::ApplicationEnded { .. } => "ApplicationEnded",
            EventPayload::ErrorEvent { .. } => "ErrorEvent",
        }
    }
}

/// One timestamped event of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub run_id: String,
    pub timestamp_ms: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

/// Failure classes used in labels and classification verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VulnClass {
    Benign,
    Bias,
    Hallucination,
    #[serde(rename = "DPI")]
    Dpi,
    #[serde(rename = "IPI")]
    Ipi,
    #[serde(rename = "MP")]
    Mp,
}

impl VulnClass {
    pub const ALL: [VulnClass; 6] = [
        VulnClass::Benign,
        VulnClass::Bias,
        VulnClass::Hallucination,
        VulnClass::Dpi,
        VulnClass::Ipi,
        VulnClass::Mp,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            VulnClass::Benign => "Benign",
            VulnClass::Bias => "Bias",
            VulnClass::Hallucination => "Hallucination",
            VulnClass::Dpi => "DPI",
            VulnClass::Ipi => "IPI",
            VulnClass::Mp => "MP",
        }
    }
}

impl std::fmt::Display for VulnClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Ground-truth label attached to a run.
///
/// Benign runs carry no class and no root-cause agent (0 is accepted as an
/// explicit "no agent"). Anomalous runs carry a non-benign class and a
/// 1-based root-cause agent index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub is_anomalous: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vuln_class: Option<VulnClass>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub root_cause_agent: Option<u32>,
}

impl GroundTruth {
    pub fn benign() -> Self {
        Self { is_anomalous: false, vuln_class: None, root_cause_agent: None }
    }

    pub fn anomalous(class: VulnClass, root_cause_agent: u32) -> Self {
        Self {
            is_anomalous: true,
            vuln_class: Some(class),
            root_cause_agent: Some(root_cause_agent),
        }
    }
}

impl Default for GroundTruth {
    fn default() -> Self {
        Self::benign()
    }
}

/// A complete run: its events in order plus the ground-truth label.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub run_id: String,
    pub events: Vec<Event>,
    pub label: GroundTruth,
}

impl RunLog {
    pub fn new(run_id: impl Into<String>, events: Vec<Event>, label: GroundTruth) -> Self {
        Self { run_id: run_id.into(), events, label }
    }

    /// Distinct agent indices in order of first appearance.
    pub fn agent_indices(&self) -> Vec<u32> {
        let mut seen = Vec::new();
        for ev in &self.events {
            if let Some(agent) = ev.payload.agent() {
                if !seen.contains(&agent.index) {
                    seen.push(agent.index);
                }
            }
        }
        seen
    }
}

#[derive(Debug, Error)]
pub enum EventError {
    #[error("malformed event line: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A single broken invariant found by [`validate_run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Machine-checkable rule name.
    pub rule: String,
    /// Index into `RunLog::events` when the violation is event-scoped.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub event_index: Option<usize>,
    pub detail: String,
}

impl Violation {
    fn new(rule: &str, event_index: Option<usize>, detail: String) -> Self {
        Self { rule: rule.to_string(), event_index, detail }
    }
}

/// Parses one JSON event line. Unknown `kind` values and missing fields
/// surface as errors naming the offending part.
pub fn parse_event_line(line: &str) -> Result<Event, EventError> {
    Ok(serde_json::from_str(line)?)
}

/// Serializes an event to its canonical single-line JSON form.
/// `parse_event_line(serialize_event(e))` returns an equal event and
/// re-serializes to identical bytes.
pub fn serialize_event(event: &Event) -> String {
    serde_json::to_string(event).expect("event serialization cannot fail")
}

struct SpanState {
    name: String,
    started_index: usize,
    llm_calls: u64,
    tool_counts: BTreeMap<String, u32>,
}

/// Checks lifecycle and bookkeeping invariants of a run.
///
/// Rules:
/// - `run_id`: every event carries the run's id
/// - `application_start` / `unterminated_application`: exactly one
///   ApplicationStarted first and one ApplicationEnded last
/// - `timestamp_order`: timestamps never decrease
/// - `agent_span`: AgentStarted/AgentFinished pairs match, no nesting of the
///   same index, no unclosed spans
/// - `span_containment`: agent-scoped events fall inside their agent's span
/// - `agent_identity`: agent indices are >= 1 and names are consistent
/// - `field_range`: iteration and usage_count are >= 1
/// - `llm_call_count` / `tool_usage_counts`: AgentFinished bookkeeping
///   matches the events observed in the span
/// - `token_totals`: ApplicationEnded totals match the sum over LlmCalls
/// - `label`: ground truth is internally consistent with the run
pub fn validate_run(run: &RunLog) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    let events = &run.events;

    if events.is_empty() {
        violations.push(Violation::new("application_start", None, "run has no events".into()));
        return Err(violations);
    }

    for (i, ev) in events.iter().enumerate() {
        if ev.run_id != run.run_id {
            violations.push(Violation::new(
                "run_id",
                Some(i),
                format!("event run_id {:?} differs from run {:?}", ev.run_id, run.run_id),
            ));
        }
    }

    if !matches!(events[0].payload, EventPayload::ApplicationStarted { .. }) {
        violations.push(Violation::new(
            "application_start",
            Some(0),
            format!("first event is {}, expected ApplicationStarted", events[0].payload.kind_name()),
        ));
    }
    for (i, ev) in events.iter().enumerate().skip(1) {
        if matches!(ev.payload, EventPayload::ApplicationStarted { .. }) {
            violations.push(Violation::new(
                "application_start",
                Some(i),
                "duplicate ApplicationStarted".into(),
            ));
        }
    }
    if !matches!(events.last().unwrap().payload, EventPayload::ApplicationEnded { .. }) {
        violations.push(Violation::new(
            "unterminated_application",
            Some(events.len() - 1),
            "run does not end with ApplicationEnded".into(),
        ));
    }
    for (i, ev) in events.iter().enumerate() {
        if i + 1 != events.len() && matches!(ev.payload, EventPayload::ApplicationEnded { .. }) {
            violations.push(Violation::new(
                "unterminated_application",
                Some(i),
                "ApplicationEnded before the final event".into(),
            ));
        }
    }

    for (i, w) in events.windows(2).enumerate() {
        if w[1].timestamp_ms < w[0].timestamp_ms {
            violations.push(Violation::new(
                "timestamp_order",
                Some(i + 1),
                format!("timestamp {} after {}", w[1].timestamp_ms, w[0].timestamp_ms),
            ));
        }
    }

    let mut open: BTreeMap<u32, SpanState> = BTreeMap::new();
    let mut prompt_sum: u64 = 0;
    let mut completion_sum: u64 = 0;

    for (i, ev) in events.iter().enumerate() {
        if let Some(agent) = ev.payload.agent() {
            if agent.index == 0 {
                violations.push(Violation::new(
                    "agent_identity",
                    Some(i),
                    "agent index 0 is reserved".into(),
                ));
            }
            if agent.name.is_empty() {
                violations.push(Violation::new("agent_identity", Some(i), "empty agent name".into()));
            }
        }
        match &ev.payload {
            EventPayload::AgentStarted { agent, .. } => {
                if open.contains_key(&agent.index) {
                    violations.push(Violation::new(
                        "agent_span",
                        Some(i),
                        format!("agent {} started while already running", agent.index),
                    ));
                } else {
                    open.insert(
                        agent.index,
                        SpanState {
                            name: agent.name.clone(),
                            started_index: i,
                            llm_calls: 0,
                            tool_counts: BTreeMap::new(),
                        },
                    );
                }
            }
            EventPayload::LlmCall { agent, iteration, prompt_tokens, completion_tokens, .. } => {
                prompt_sum += prompt_tokens;
                completion_sum += completion_tokens;
                if *iteration == 0 {
                    violations.push(Violation::new(
                        "field_range",
                        Some(i),
                        "iteration must be >= 1".into(),
                    ));
                }
                match open.get_mut(&agent.index) {
                    Some(span) => span.llm_calls += 1,
                    None => violations.push(Violation::new(
                        "span_containment",
                        Some(i),
                        format!("LlmCall for agent {} outside its span", agent.index),
                    )),
                }
            }
            EventPayload::ToolUsage { agent, tool_name, usage_count, .. } => {
                if *usage_count == 0 {
                    violations.push(Violation::new(
                        "field_range",
                        Some(i),
                        "usage_count must be >= 1".into(),
                    ));
                }
                match open.get_mut(&agent.index) {
                    Some(span) => {
                        let seen = span.tool_counts.entry(tool_name.clone()).or_insert(0);
                        *seen += 1;
                        if usage_count != seen {
                            violations.push(Violation::new(
                                "tool_usage_counts",
                                Some(i),
                                format!(
                                    "tool {:?} usage_count {} but {} usages observed",
                                    tool_name, usage_count, seen
                                ),
                            ));
                        }
                    }
                    None => violations.push(Violation::new(
                        "span_containment",
                        Some(i),
                        format!("ToolUsage for agent {} outside its span", agent.index),
                    )),
                }
            }
            EventPayload::ErrorEvent { agent, .. } => {
                if !open.contains_key(&agent.index) {
                    violations.push(Violation::new(
                        "span_containment",
                        Some(i),
                        format!("ErrorEvent for agent {} outside its span", agent.index),
                    ));
                }
            }
            EventPayload::AgentFinished { agent, tools_used, llm_call_count, .. } => {
                match open.remove(&agent.index) {
                    Some(span) => {
                        if span.name != agent.name {
                            violations.push(Violation::new(
                                "agent_identity",
                                Some(i),
                                format!(
                                    "agent {} finished as {:?} but started as {:?}",
                                    agent.index, agent.name, span.name
                                ),
                            ));
                        }
                        if *llm_call_count != span.llm_calls {
                            violations.push(Violation::new(
                                "llm_call_count",
                                Some(i),
                                format!(
                                    "agent {} reports {} LLM calls, span {}..={} contains {}",
                                    agent.index, llm_call_count, span.started_index, i, span.llm_calls
                                ),
                            ));
                        }
                        if *tools_used != span.tool_counts {
                            violations.push(Violation::new(
                                "tool_usage_counts",
                                Some(i),
                                format!(
                                    "agent {} reports tools {:?}, span contains {:?}",
                                    agent.index, tools_used, span.tool_counts
                                ),
                            ));
                        }
                    }
                    None => violations.push(Violation::new(
                        "agent_span",
                        Some(i),
                        format!("agent {} finished without a start", agent.index),
                    )),
                }
            }
            EventPayload::ApplicationStarted { .. } => {}
            EventPayload::ApplicationEnded { prompt_tokens_total, completion_tokens_total, .. } => {
                if *prompt_tokens_total != prompt_sum || *completion_tokens_total != completion_sum {
                    violations.push(Violation::new(
                        "token_totals",
                        Some(i),
                        format!(
                            "totals ({}, {}) do not match summed LlmCall tokens ({}, {})",
                            prompt_tokens_total, completion_tokens_total, prompt_sum, completion_sum
                        ),
                    ));
                }
            }
        }
    }

    for (index, span) in &open {
        violations.push(Violation::new(
            "agent_span",
            Some(span.started_index),
            format!("agent {index} never finished"),
        ));
    }

    validate_label(run, &mut violations);

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

fn validate_label(run: &RunLog, violations: &mut Vec<Violation>) {
    let label = &run.label;
    let agents = run.agent_indices();
    if label.is_anomalous {
        match label.vuln_class {
            None => violations.push(Violation::new(
                "label",
                None,
                "anomalous run without a vulnerability class".into(),
            )),
            Some(VulnClass::Benign) => violations.push(Violation::new(
                "label",
                None,
                "anomalous run labeled Benign".into(),
            )),
            Some(_) => {}
        }
        match label.root_cause_agent {
            None | Some(0) => violations.push(Violation::new(
                "label",
                None,
                "anomalous run without a root-cause agent".into(),
            )),
            Some(idx) if !agents.contains(&idx) => violations.push(Violation::new(
                "label",
                None,
                format!("root-cause agent {idx} does not appear in the run"),
            )),
            Some(_) => {}
        }
    } else {
        if label.vuln_class.is_some() {
            violations.push(Violation::new(
                "label",
                None,
                "benign run carries a vulnerability class".into(),
            ));
        }
        if matches!(label.root_cause_agent, Some(idx) if idx != 0) {
            violations.push(Violation::new(
                "label",
                None,
                "benign run carries a root-cause agent".into(),
            ));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_run() -> RunLog {
        let rid = "run-0001".to_string();
        let agent = AgentId::new(1, "planner");
        let ev = |timestamp_ms: u64, payload: EventPayload| Event {
            run_id: rid.clone(),
            timestamp_ms,
            payload,
        };
        let events = vec![
            ev(
                1000,
                EventPayload::ApplicationStarted {
                    user_inputs: "Plan a two-day trip.".into(),
                    application_data: "planner-app".into(),
                    llm_models: vec!["m-1".into()],
                    system_data: "linux".into(),
                },
            ),
            ev(1010, EventPayload::AgentStarted { agent: agent.clone(), agent_data: "role: planner".into() }),
            ev(
                1500,
                EventPayload::LlmCall {
                    agent: agent.clone(),
                    iteration: 1,
                    input: "Draft an outline".into(),
                    output: "Day one covers museums.".into(),
                    duration_ms: 480,
                    prompt_tokens: 120,
                    completion_tokens: 60,
                    model_version: "m-1".into(),
                },
            ),
            ev(
                1600,
                EventPayload::ToolUsage {
                    agent: agent.clone(),
                    tool_name: "web_search".into(),
                    usage_count: 1,
                    input: "museum hours".into(),
                    output: "open 9-17".into(),
                    failed: false,
                },
            ),
            ev(
                1700,
                EventPayload::AgentFinished {
                    agent: agent.clone(),
                    task_output: "Here is the outline.".into(),
                    duration_ms: 690,
                    tools_used: BTreeMap::from([("web_search".into(), 1)]),
                    llm_call_count: 1,
                },
            ),
            ev(
                1710,
                EventPayload::ApplicationEnded {
                    output: "Here is the outline.".into(),
                    prompt_tokens_total: 120,
                    completion_tokens_total: 60,
                },
            ),
        ];
        RunLog::new(rid, events, GroundTruth::benign())
    }

    #[test]
    fn serialized_event_round_trips_byte_identically() {
        let run = sample_run();
        for ev in &run.events {
            let line = serialize_event(ev);
            let back = parse_event_line(&line).unwrap();
            assert_eq!(&back, ev);
            assert_eq!(serialize_event(&back), line);
        }
    }

    #[test]
    fn line_layout_is_stable() {
        let run = sample_run();
        let line = serialize_event(&run.events[0]);
        assert!(line.starts_with("{\"run_id\":\"run-0001\",\"timestamp_ms\":1000,\"kind\":\"ApplicationStarted\""));
    }

    #[test]
    fn unknown_kind_is_a_schema_error() {
        let line = r#"{"run_id":"r","timestamp_ms":1,"kind":"Telemetry","data":"x"}"#;
        let err = parse_event_line(line).unwrap_err();
        assert!(err.to_string().contains("Telemetry"), "{err}");
    }

    #[test]
    fn missing_field_names_the_field() {
        let line = r#"{"run_id":"r","timestamp_ms":1,"kind":"AgentStarted","agent_data":"x"}"#;
        let err = parse_event_line(line).unwrap_err();
        assert!(err.to_string().contains("agent"), "{err}");
    }

    #[test]
    fn valid_run_passes_validation() {
        validate_run(&sample_run()).unwrap();
    }

    #[test]
    fn dropped_application_end_is_unterminated() {
        let mut run = sample_run();
        run.events.pop();
        let violations = validate_run(&run).unwrap_err();
        assert!(violations.iter().any(|v| v.rule == "unterminated_application"));
    }

    #[test]
    fn dropped_llm_call_breaks_bookkeeping() {
        let mut run = sample_run();
        run.events.remove(2);
        let violations = validate_run(&run).unwrap_err();
        assert!(violations.iter().any(|v| v.rule == "llm_call_count"));
        assert!(violations.iter().any(|v| v.rule == "token_totals"));
    }

    #[test]
    fn dropped_tool_usage_breaks_bookkeeping() {
        let mut run = sample_run();
        run.events.remove(3);
        let violations = validate_run(&run).unwrap_err();
        assert!(violations.iter().any(|v| v.rule == "tool_usage_counts"));
    }

    #[test]
    fn decreasing_timestamp_is_rejected() {
        let mut run = sample_run();
        run.events[3].timestamp_ms = run.events[2].timestamp_ms - 100;
        let violations = validate_run(&run).unwrap_err();
        assert!(violations.iter().any(|v| v.rule == "timestamp_order"));
    }

    #[test]
    fn call_outside_span_is_rejected() {
        let mut run = sample_run();
        let call = run.events.remove(2);
        run.events.insert(1, call);
        let violations = validate_run(&run).unwrap_err();
        assert!(violations.iter().any(|v| v.rule == "span_containment"));
    }

    #[test]
    fn inconsistent_labels_are_rejected() {
        let mut run = sample_run();
        run.label = GroundTruth {
            is_anomalous: true,
            vuln_class: None,
            root_cause_agent: Some(9),
        };
        let violations = validate_run(&run).unwrap_err();
        assert!(violations.iter().filter(|v| v.rule == "label").count() >= 2);

        let mut benign = sample_run();
        benign.label.vuln_class = Some(VulnClass::Ipi);
        assert!(validate_run(&benign).is_err());
    }

    #[test]
    fn agent_index_zero_is_rejected() {
        let mut run = sample_run();
        if let EventPayload::AgentStarted { agent, .. } = &mut run.events[1].payload {
            agent.index = 0;
        }
        let violations = validate_run(&run).unwrap_err();
        assert!(violations.iter().any(|v| v.rule == "agent_identity"));
    }

    #[test]
    fn vuln_class_labels_are_stable() {
        assert_eq!(serde_json::to_string(&VulnClass::Dpi).unwrap(), "\"DPI\"");
        assert_eq!(serde_json::from_str::<VulnClass>("\"MP\"").unwrap(), VulnClass::Mp);
        for class in VulnClass::ALL {
            let json = serde_json::to_string(&class).unwrap();
            assert_eq!(serde_json::from_str::<VulnClass>(&json).unwrap(), class);
            assert_eq!(json, format!("{:?}", class.label()));
        }
    }
}
