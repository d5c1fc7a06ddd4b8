//! JSON Lines corpus files.
//!
//! One event per line, runs delimited by their ApplicationStarted and
//! ApplicationEnded events. The ground-truth label rides on the first line
//! of each run so a corpus round-trips losslessly. Lines from different
//! runs may interleave; grouping is by `run_id` in order of first
//! appearance.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::event::{validate_run, Event, EventError, GroundTruth, RunLog, Violation};

#[derive(Serialize, Deserialize)]
struct CorpusLine {
    #[serde(flatten)]
    event: Event,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    label: Option<GroundTruth>,
}

/// A problem found while reading a corpus. Issues never abort the read;
/// the affected line or run is skipped instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIssue {
    /// 1-based line number for malformed lines.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub run_id: Option<String>,
    pub problem: String,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub violations: Vec<Violation>,
}

#[derive(Debug, Default)]
pub struct CorpusReadResult {
    /// Runs that parsed and validated, in order of first appearance.
    pub runs: Vec<RunLog>,
    pub issues: Vec<CorpusIssue>,
}

/// Writes runs as JSON Lines. The label is attached to each run's first line.
pub fn write_corpus(runs: &[RunLog], path: &Path) -> Result<(), EventError> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    for run in runs {
        for (i, event) in run.events.iter().enumerate() {
            let label = (i == 0).then(|| run.label.clone());
            let line = serde_json::to_string(&CorpusLine { event: event.clone(), label })?;
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a corpus, returning valid runs and reporting malformed lines and
/// invalid runs with line numbers.
pub fn read_corpus(path: &Path) -> Result<CorpusReadResult, EventError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut result = CorpusReadResult::default();

    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, (Vec<Event>, Option<GroundTruth>)> = BTreeMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine = match serde_json::from_str(&line) {
            Ok(parsed) => parsed,
            Err(err) => {
                result.issues.push(CorpusIssue {
                    line: Some(idx + 1),
                    run_id: None,
                    problem: format!("malformed line: {err}"),
                    violations: Vec::new(),
                });
                continue;
            }
        };
        let run_id = parsed.event.run_id.clone();
        let entry = groups.entry(run_id.clone()).or_insert_with(|| {
            order.push(run_id.clone());
            (Vec::new(), None)
        });
        entry.0.push(parsed.event);
        if entry.1.is_none() {
            entry.1 = parsed.label;
        }
    }

    for run_id in order {
        let (events, label) = groups.remove(&run_id).unwrap();
        let run = RunLog::new(run_id.clone(), events, label.unwrap_or_default());
        match validate_run(&run) {
            Ok(()) => result.runs.push(run),
            Err(violations) => result.issues.push(CorpusIssue {
                line: None,
                run_id: Some(run_id),
                problem: "run failed validation".into(),
                violations,
            }),
        }
    }

    Ok(result)
}
