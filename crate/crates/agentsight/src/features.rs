//! Per-agent feature extraction.
//!
//! Each agent execution span yields one 35-dimensional vector grouped into
//! latency, agent, content, and system features. All statistics are
//! population statistics (divide by n), lengths count Unicode scalar
//! values, and empty denominators yield the documented defaults rather
//! than NaN.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{EventPayload, RunLog};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature stats dimension {got} does not match {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub const FEATURE_DIM: usize = 35;

/// Canonical feature order. Grouped: latency (7), agent (14), content (8),
/// system (6).
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "total_duration",
    "avg_time_gap",
    "max_time_gap",
    "time_gap_variance",
    "avg_iteration_duration",
    "max_iteration_duration",
    "iteration_duration_variance",
    "tool_failures",
    "tool_success_rate",
    "total_iterations",
    "unique_tools",
    "avg_prompt_tokens",
    "avg_completion_tokens",
    "avg_total_tokens",
    "max_prompt_tokens",
    "max_completion_tokens",
    "max_total_tokens",
    "total_prompt_tokens_sum",
    "total_completion_tokens_sum",
    "total_total_tokens_sum",
    "prompt_to_completion_ratio",
    "error_count",
    "unique_error_count",
    "final_output_length",
    "avg_output_length",
    "max_output_length",
    "output_length_variance",
    "action_entropy",
    "repetitive_actions",
    "avg_processing_time",
    "max_processing_time",
    "processing_time_variance",
    "model_version_count",
    "input_length",
    "complexity_score",
];

/// One agent execution described by 35 named features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpiVector {
    pub total_duration: f64,
    pub avg_time_gap: f64,
    pub max_time_gap: f64,
    pub time_gap_variance: f64,
    pub avg_iteration_duration: f64,
    pub max_iteration_duration: f64,
    pub iteration_duration_variance: f64,
    pub tool_failures: f64,
    pub tool_success_rate: f64,
    pub total_iterations: f64,
    pub unique_tools: f64,
    pub avg_prompt_tokens: f64,
    pub avg_completion_tokens: f64,
    pub avg_total_tokens: f64,
    pub max_prompt_tokens: f64,
    pub max_completion_tokens: f64,
    pub max_total_tokens: f64,
    pub total_prompt_tokens_sum: f64,
    pub total_completion_tokens_sum: f64,
    pub total_total_tokens_sum: f64,
    pub prompt_to_completion_ratio: f64,
    pub error_count: f64,
    pub unique_error_count: f64,
    pub final_output_length: f64,
    pub avg_output_length: f64,
    pub max_output_length: f64,
    pub output_length_variance: f64,
    pub action_entropy: f64,
    pub repetitive_actions: f64,
    pub avg_processing_time: f64,
    pub max_processing_time: f64,
    pub processing_time_variance: f64,
    pub model_version_count: f64,
    pub input_length: f64,
    pub complexity_score: f64,
}

impl EpiVector {
    pub fn as_array(&self) -> [f64; FEATURE_DIM] {
        [
            self.total_duration,
            self.avg_time_gap,
            self.max_time_gap,
            self.time_gap_variance,
            self.avg_iteration_duration,
            self.max_iteration_duration,
            self.iteration_duration_variance,
            self.tool_failures,
            self.tool_success_rate,
            self.total_iterations,
            self.unique_tools,
            self.avg_prompt_tokens,
            self.avg_completion_tokens,
            self.avg_total_tokens,
            self.max_prompt_tokens,
            self.max_completion_tokens,
            self.max_total_tokens,
            self.total_prompt_tokens_sum,
            self.total_completion_tokens_sum,
            self.total_total_tokens_sum,
            self.prompt_to_completion_ratio,
            self.error_count,
            self.unique_error_count,
            self.final_output_length,
            self.avg_output_length,
            self.max_output_length,
            self.output_length_variance,
            self.action_entropy,
            self.repetitive_actions,
            self.avg_processing_time,
            self.max_processing_time,
            self.processing_time_variance,
            self.model_version_count,
            self.input_length,
            self.complexity_score,
        ]
    }
}

/// One vector per agent execution, in span-finish order.
pub type EpiSequence = Vec<EpiVector>;

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub fn max(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

/// Population variance; 0 for fewer than two samples.
pub fn variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

/// Shannon entropy (base 2) of the empirical distribution over items.
pub fn shannon_entropy(items: &[String]) -> f64 {
    if items.is_empty() {
        return 0.0;
    }
    let mut counts = std::collections::BTreeMap::new();
    for item in items {
        *counts.entry(item.as_str()).or_insert(0usize) += 1;
    }
    let n = items.len() as f64;
    -counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

fn chars(text: &str) -> f64 {
    text.chars().count() as f64
}

fn segments(text: &str, separators: &[char]) -> f64 {
    if text.is_empty() {
        return 0.0;
    }
    text.split(separators).filter(|s| !s.trim().is_empty()).count() as f64
}

/// Mean of five ratios, each clipped to [0, 1]: length/2000, clauses/20,
/// sentences/20, capital letters/100, exclamation marks/10. Clauses split
/// on commas and semicolons, sentences on `.`, `!`, `?`; blank segments do
/// not count. The empty string scores 0.
pub fn complexity_score(text: &str) -> f64 {
    let clip = |v: f64| v.clamp(0.0, 1.0);
    let capitals = text.chars().filter(|c| c.is_uppercase()).count() as f64;
    let exclamations = text.chars().filter(|c| *c == '!').count() as f64;
    let ratios = [
        clip(chars(text) / 2000.0),
        clip(segments(text, &[',', ';']) / 20.0),
        clip(segments(text, &['.', '!', '?']) / 20.0),
        clip(capitals / 100.0),
        clip(exclamations / 10.0),
    ];
    ratios.iter().sum::<f64>() / ratios.len() as f64
}

struct SpanAccumulator {
    call_ts: Vec<f64>,
    call_durations: Vec<f64>,
    prompt_tokens: Vec<f64>,
    completion_tokens: Vec<f64>,
    total_tokens: Vec<f64>,
    output_lengths: Vec<f64>,
    error_hits: f64,
    processing_times: Vec<f64>,
    model_versions: Vec<String>,
    tool_names: Vec<String>,
    tool_failures: f64,
    error_messages: Vec<String>,
}

impl SpanAccumulator {
    fn new() -> Self {
        Self {
            call_ts: Vec::new(),
            call_durations: Vec::new(),
            prompt_tokens: Vec::new(),
            completion_tokens: Vec::new(),
            total_tokens: Vec::new(),
            output_lengths: Vec::new(),
            error_hits: 0.0,
            processing_times: Vec::new(),
            model_versions: Vec::new(),
            tool_names: Vec::new(),
            tool_failures: 0.0,
            error_messages: Vec::new(),
        }
    }

    fn finish(self, duration_ms: u64, task_output: &str, user_inputs: &str) -> EpiVector {
        let gaps: Vec<f64> = self.call_ts.windows(2).map(|w| w[1] - w[0]).collect();
        let unique = |items: &[String]| {
            let mut sorted: Vec<&String> = items.iter().collect();
            sorted.sort_unstable();
            sorted.dedup();
            sorted.len() as f64
        };
        let tool_count = self.tool_names.len() as f64;
        let success_rate =
            if tool_count == 0.0 { 1.0 } else { 1.0 - self.tool_failures / tool_count };
        let prompt_sum: f64 = self.prompt_tokens.iter().sum();
        let completion_sum: f64 = self.completion_tokens.iter().sum();
        let repetitive = self
            .tool_names
            .windows(2)
            .filter(|w| w[0] == w[1])
            .count() as f64;

        EpiVector {
            total_duration: duration_ms as f64,
            avg_time_gap: mean(&gaps),
            max_time_gap: max(&gaps),
            time_gap_variance: variance(&gaps),
            avg_iteration_duration: mean(&self.call_durations),
            max_iteration_duration: max(&self.call_durations),
            iteration_duration_variance: variance(&self.call_durations),
            tool_failures: self.tool_failures,
            tool_success_rate: success_rate,
            total_iterations: self.call_durations.len() as f64,
            unique_tools: unique(&self.tool_names),
            avg_prompt_tokens: mean(&self.prompt_tokens),
            avg_completion_tokens: mean(&self.completion_tokens),
            avg_total_tokens: mean(&self.total_tokens),
            max_prompt_tokens: max(&self.prompt_tokens),
            max_completion_tokens: max(&self.completion_tokens),
            max_total_tokens: max(&self.total_tokens),
            total_prompt_tokens_sum: prompt_sum,
            total_completion_tokens_sum: completion_sum,
            total_total_tokens_sum: prompt_sum + completion_sum,
            prompt_to_completion_ratio: if completion_sum == 0.0 {
                0.0
            } else {
                prompt_sum / completion_sum
            },
            error_count: self.error_hits,
            unique_error_count: unique(&self.error_messages),
            final_output_length: chars(task_output),
            avg_output_length: mean(&self.output_lengths),
            max_output_length: max(&self.output_lengths),
            output_length_variance: variance(&self.output_lengths),
            action_entropy: shannon_entropy(&self.tool_names),
            repetitive_actions: repetitive,
            avg_processing_time: mean(&self.processing_times),
            max_processing_time: max(&self.processing_times),
            processing_time_variance: variance(&self.processing_times),
            model_version_count: unique(&self.model_versions),
            input_length: chars(user_inputs),
            complexity_score: complexity_score(user_inputs),
        }
    }
}

/// Extracts one [`EpiVector`] per agent execution span, ordered by span
/// finish. Expects a validated run; events outside any span are ignored.
pub fn extract_epi(run: &RunLog) -> EpiSequence {
    let mut user_inputs = String::new();
    let mut open: std::collections::BTreeMap<u32, SpanAccumulator> = std::collections::BTreeMap::new();
    let mut sequence = Vec::new();

    for event in &run.events {
        match &event.payload {
            EventPayload::ApplicationStarted { user_inputs: ui, .. } => {
                user_inputs = ui.clone();
            }
            EventPayload::AgentStarted { agent, .. } => {
                open.insert(agent.index, SpanAccumulator::new());
            }
            EventPayload::LlmCall {
                agent,
                output,
                duration_ms,
                prompt_tokens,
                completion_tokens,
                model_version,
                ..
            } => {
                if let Some(span) = open.get_mut(&agent.index) {
                    span.call_ts.push(event.timestamp_ms as f64);
                    span.call_durations.push(*duration_ms as f64);
                    span.prompt_tokens.push(*prompt_tokens as f64);
                    span.completion_tokens.push(*completion_tokens as f64);
                    span.total_tokens.push((*prompt_tokens + *completion_tokens) as f64);
                    span.output_lengths.push(chars(output));
                    span.error_hits += output.matches("Error").count() as f64;
                    if *completion_tokens > 0 {
                        span.processing_times.push(*duration_ms as f64 / *completion_tokens as f64);
                    }
                    span.model_versions.push(model_version.clone());
                }
            }
            EventPayload::ToolUsage { agent, tool_name, failed, .. } => {
                if let Some(span) = open.get_mut(&agent.index) {
                    span.tool_names.push(tool_name.clone());
                    if *failed {
                        span.tool_failures += 1.0;
                    }
                }
            }
            EventPayload::ErrorEvent { agent, message } => {
                if let Some(span) = open.get_mut(&agent.index) {
                    span.error_messages.push(message.clone());
                }
            }
            EventPayload::AgentFinished { agent, task_output, duration_ms, .. } => {
                if let Some(span) = open.remove(&agent.index) {
                    sequence.push(span.finish(*duration_ms, task_output, &user_inputs));
                }
            }
            EventPayload::ApplicationEnded { .. } => {}
        }
    }
    sequence
}

/// LLM call outputs in timestamp order, one text per call.
pub fn extract_semantic(run: &RunLog) -> Vec<String> {
    let mut calls: Vec<(u64, &str)> = run
        .events
        .iter()
        .filter_map(|e| match &e.payload {
            EventPayload::LlmCall { output, .. } => Some((e.timestamp_ms, output.as_str())),
            _ => None,
        })
        .collect();
    calls.sort_by_key(|(ts, _)| *ts);
    calls.into_iter().map(|(_, text)| text.to_string()).collect()
}

/// Per-feature z-score statistics fit on benign training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Fits population mean and standard deviation over every vector in the
    /// given sequences.
    pub fn fit(sequences: &[EpiSequence]) -> NormStats {
        let mut mean = vec![0.0; FEATURE_DIM];
        let mut count = 0.0;
        for seq in sequences {
            for vector in seq {
                for (m, v) in mean.iter_mut().zip(vector.as_array()) {
                    *m += v;
                }
                count += 1.0;
            }
        }
        if count > 0.0 {
            for m in &mut mean {
                *m /= count;
            }
        }
        let mut var = vec![0.0; FEATURE_DIM];
        for seq in sequences {
            for vector in seq {
                for ((s, m), v) in var.iter_mut().zip(&mean).zip(vector.as_array()) {
                    *s += (v - m) * (v - m);
                }
            }
        }
        if count > 0.0 {
            for s in &mut var {
                *s /= count;
            }
        }
        NormStats { mean, std: var.into_iter().map(f64::sqrt).collect() }
    }

    /// z-scores a vector; features with zero standard deviation map to 0.
    pub fn apply(&self, vector: &EpiVector) -> Vec<f64> {
        vector
            .as_array()
            .iter()
            .enumerate()
            .map(|(i, v)| if self.std[i] == 0.0 { 0.0 } else { (v - self.mean[i]) / self.std[i] })
            .collect()
    }

    pub fn apply_sequence(&self, sequence: &EpiSequence) -> Vec<Vec<f64>> {
        sequence.iter().map(|v| self.apply(v)).collect()
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.mean.len() != FEATURE_DIM || self.std.len() != FEATURE_DIM {
            return Err(FeatureError::Dimension {
                got: self.mean.len().min(self.std.len()),
                expected: FEATURE_DIM,
            });
        }
        Ok(())
    }

    pub fn write(&self, path: &std::path::Path) -> Result<(), FeatureError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &std::path::Path) -> Result<Self, FeatureError> {
        let stats: NormStats = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        stats.validate()?;
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_run, SimConfig};

    #[test]
    fn feature_names_are_complete_and_distinct() {
        let mut names = FEATURE_NAMES.to_vec();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), FEATURE_DIM);
    }

    #[test]
    fn entropy_matches_known_values() {
        assert_eq!(shannon_entropy(&[]), 0.0);
        let two: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        assert!((shannon_entropy(&two) - 1.0).abs() < 1e-12);
        let four: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        assert!((shannon_entropy(&four) - 2.0).abs() < 1e-12);
        let same: Vec<String> = ["a", "a", "a"].iter().map(|s| s.to_string()).collect();
        assert_eq!(shannon_entropy(&same), 0.0);
    }

    #[test]
    fn complexity_score_matches_hand_computation() {
        assert_eq!(complexity_score(""), 0.0);
        // 100 chars, 2 sentences, 1 comma (2 clauses), 5 capitals, 0 exclamations.
        let text =
            "Plan the Trip to Town ab, then check the dates. Verify All facts before the final answer is written.";
        assert_eq!(text.chars().count(), 100);
        assert_eq!(text.chars().filter(|c| c.is_uppercase()).count(), 5);
        let expected = (100.0 / 2000.0 + 2.0 / 20.0 + 2.0 / 20.0 + 5.0 / 100.0 + 0.0) / 5.0;
        assert_eq!(expected, 0.06);
        assert!((complexity_score(text) - expected).abs() < 1e-12);
    }

    #[test]
    fn clipping_caps_each_ratio() {
        let text = format!("{}!!!!!!!!!!!!!!!", "A.B.C,".repeat(500));
        assert!(complexity_score(&text) <= 1.0);
    }

    #[test]
    fn simulator_run_yields_one_vector_per_agent() {
        let config = SimConfig::default();
        let run = generate_run(&config, 0).unwrap();
        let seq = extract_epi(&run);
        assert_eq!(seq.len(), config.num_agents as usize);
        for vector in &seq {
            assert!(vector.total_iterations >= 2.0);
            assert!(vector.tool_success_rate >= 0.0 && vector.tool_success_rate <= 1.0);
            assert_eq!(vector.error_count, 0.0);
            assert_eq!(vector.unique_error_count, 0.0);
            for value in vector.as_array() {
                assert!(value.is_finite());
            }
        }
    }

    #[test]
    fn semantic_sequence_is_ordered_llm_outputs() {
        let config = SimConfig::default();
        let run = generate_run(&config, 1).unwrap();
        let texts = extract_semantic(&run);
        let total: f64 = extract_epi(&run).iter().map(|v| v.total_iterations).sum();
        assert_eq!(texts.len(), total as usize);
        assert!(texts.iter().all(|t| !t.is_empty()));
    }

    #[test]
    fn norm_stats_standardize_their_fitting_corpus() {
        let config = SimConfig::default();
        let sequences: Vec<EpiSequence> =
            (0..40).map(|i| extract_epi(&generate_run(&config, i).unwrap())).collect();
        let stats = NormStats::fit(&sequences);
        let normalized: Vec<Vec<f64>> =
            sequences.iter().flat_map(|s| stats.apply_sequence(s)).collect();
        let n = normalized.len() as f64;
        for dim in 0..FEATURE_DIM {
            let mean = normalized.iter().map(|v| v[dim]).sum::<f64>() / n;
            let var = normalized.iter().map(|v| (v[dim] - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9, "dim {dim} mean {mean}");
            if stats.std[dim] > 0.0 {
                assert!((var - 1.0).abs() < 1e-9, "dim {dim} var {var}");
            } else {
                assert_eq!(var, 0.0);
            }
        }
    }

    #[test]
    fn zero_std_features_map_to_zero() {
        let config = SimConfig::default();
        let seq = extract_epi(&generate_run(&config, 2).unwrap());
        let stats = NormStats::fit(&[seq.clone()]);
        let model_version_dim =
            FEATURE_NAMES.iter().position(|n| *n == "model_version_count").unwrap();
        assert_eq!(stats.std[model_version_dim], 0.0);
        let mut shifted = seq[0].clone();
        shifted.model_version_count = 99.0;
        assert_eq!(stats.apply(&shifted)[model_version_dim], 0.0);
    }

    #[test]
    fn norm_stats_round_trip_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("norm.json");
        let config = SimConfig::default();
        let stats = NormStats::fit(&[extract_epi(&generate_run(&config, 0).unwrap())]);
        stats.write(&path).unwrap();
        assert_eq!(NormStats::read(&path).unwrap(), stats);
    }
}
