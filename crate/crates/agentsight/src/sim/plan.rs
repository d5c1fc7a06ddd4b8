//! Editable intermediate form of a run.
//!
//! A plan stores payload content plus the time gaps between events. Failure
//! injections edit plans; [`RunPlan::emit`] lowers a plan back to events,
//! recomputing timestamps, per-agent bookkeeping, and application totals so
//! emitted runs always validate. `emit(parse(run)) == run` for runs the
//! simulator produced.

use std::collections::BTreeMap;

use crate::event::{AgentId, Event, EventPayload, GroundTruth, RunLog};
use crate::sim::SimError;

#[derive(Debug, Clone)]
pub struct RunPlan {
    pub run_id: String,
    pub start_ts: u64,
    pub user_inputs: String,
    pub application_data: String,
    pub llm_models: Vec<String>,
    pub system_data: String,
    pub agents: Vec<AgentPlan>,
    pub end_gap: u64,
    pub label: GroundTruth,
}

#[derive(Debug, Clone)]
pub struct AgentPlan {
    pub name: String,
    pub agent_data: String,
    pub start_gap: u64,
    pub iterations: Vec<IterationPlan>,
    pub finish_gap: u64,
    pub task_output: String,
}

#[derive(Debug, Clone, Default)]
pub struct IterationPlan {
    pub tools: Vec<ToolPlan>,
    pub gap_before_call: u64,
    pub call: CallPlan,
    pub errors: Vec<ErrorPlan>,
}

#[derive(Debug, Clone)]
pub struct ToolPlan {
    pub tool_name: String,
    pub input: String,
    pub output: String,
    pub failed: bool,
    pub gap: u64,
}

#[derive(Debug, Clone, Default)]
pub struct CallPlan {
    pub input: String,
    pub output: String,
    pub duration_ms: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub model_version: String,
}

#[derive(Debug, Clone)]
pub struct ErrorPlan {
    pub message: String,
    pub gap: u64,
}

impl RunPlan {
    /// Lowers the plan to a validated-by-construction run. Timestamps are
    /// strictly increasing because every gap and call duration is >= 1.
    pub fn emit(&self) -> RunLog {
        let mut events = Vec::new();
        let mut ts = self.start_ts;
        let mut prompt_total = 0u64;
        let mut completion_total = 0u64;

        let push = |events: &mut Vec<Event>, ts: u64, payload: EventPayload| {
            events.push(Event { run_id: self.run_id.clone(), timestamp_ms: ts, payload });
        };

        push(
            &mut events,
            ts,
            EventPayload::ApplicationStarted {
                user_inputs: self.user_inputs.clone(),
                application_data: self.application_data.clone(),
                llm_models: self.llm_models.clone(),
                system_data: self.system_data.clone(),
            },
        );

        for (k, agent) in self.agents.iter().enumerate() {
            let id = AgentId::new(k as u32 + 1, agent.name.clone());
            ts += agent.start_gap.max(1);
            let started_ts = ts;
            push(
                &mut events,
                ts,
                EventPayload::AgentStarted { agent: id.clone(), agent_data: agent.agent_data.clone() },
            );

            let mut tool_counts: BTreeMap<String, u32> = BTreeMap::new();
            let mut llm_calls = 0u64;
            for (i, iteration) in agent.iterations.iter().enumerate() {
                for tool in &iteration.tools {
                    ts += tool.gap.max(1);
                    let count = tool_counts.entry(tool.tool_name.clone()).or_insert(0);
                    *count += 1;
                    push(
                        &mut events,
                        ts,
                        EventPayload::ToolUsage {
                            agent: id.clone(),
                            tool_name: tool.tool_name.clone(),
                            usage_count: *count,
                            input: tool.input.clone(),
                            output: tool.output.clone(),
                            failed: tool.failed,
                        },
                    );
                }
                let call = &iteration.call;
                ts += iteration.gap_before_call + call.duration_ms.max(1);
                llm_calls += 1;
                prompt_total += call.prompt_tokens;
                completion_total += call.completion_tokens;
                push(
                    &mut events,
                    ts,
                    EventPayload::LlmCall {
                        agent: id.clone(),
                        iteration: i as u32 + 1,
                        input: call.input.clone(),
                        output: call.output.clone(),
                        duration_ms: call.duration_ms.max(1),
                        prompt_tokens: call.prompt_tokens,
                        completion_tokens: call.completion_tokens,
                        model_version: call.model_version.clone(),
                    },
                );
                for error in &iteration.errors {
                    ts += error.gap.max(1);
                    push(
                        &mut events,
                        ts,
                        EventPayload::ErrorEvent { agent: id.clone(), message: error.message.clone() },
                    );
                }
            }

            ts += agent.finish_gap.max(1);
            push(
                &mut events,
                ts,
                EventPayload::AgentFinished {
                    agent: id,
                    task_output: agent.task_output.clone(),
                    duration_ms: ts - started_ts,
                    tools_used: tool_counts,
                    llm_call_count: llm_calls,
                },
            );
        }

        ts += self.end_gap.max(1);
        let output = self.agents.last().map(|a| a.task_output.clone()).unwrap_or_default();
        push(
            &mut events,
            ts,
            EventPayload::ApplicationEnded {
                output,
                prompt_tokens_total: prompt_total,
                completion_tokens_total: completion_total,
            },
        );

        RunLog::new(self.run_id.clone(), events, self.label.clone())
    }

    /// Inverse of [`RunPlan::emit`] for simulator-shaped runs: sequential,
    /// non-overlapping agent spans with per-iteration tools before each call.
    pub fn parse(run: &RunLog) -> Result<RunPlan, SimError> {
        let mut events = run.events.iter();
        let first = events.next().ok_or_else(|| structural("run has no events"))?;
        let EventPayload::ApplicationStarted { user_inputs, application_data, llm_models, system_data } =
            &first.payload
        else {
            return Err(structural("first event is not ApplicationStarted"));
        };

        let mut plan = RunPlan {
            run_id: run.run_id.clone(),
            start_ts: first.timestamp_ms,
            user_inputs: user_inputs.clone(),
            application_data: application_data.clone(),
            llm_models: llm_models.clone(),
            system_data: system_data.clone(),
            agents: Vec::new(),
            end_gap: 1,
            label: run.label.clone(),
        };

        let mut prev_ts = first.timestamp_ms;
        let mut current: Option<AgentPlan> = None;
        let mut pending_tools: Vec<ToolPlan> = Vec::new();

        for event in events {
            let gap = event
                .timestamp_ms
                .checked_sub(prev_ts)
                .ok_or_else(|| structural("timestamps decrease"))?;
            match &event.payload {
                EventPayload::AgentStarted { agent, agent_data } => {
                    if current.is_some() {
                        return Err(structural("overlapping agent spans"));
                    }
                    if agent.index as usize != plan.agents.len() + 1 {
                        return Err(structural("agent indices are not sequential"));
                    }
                    current = Some(AgentPlan {
                        name: agent.name.clone(),
                        agent_data: agent_data.clone(),
                        start_gap: gap,
                        iterations: Vec::new(),
                        finish_gap: 1,
                        task_output: String::new(),
                    });
                }
                EventPayload::ToolUsage { tool_name, input, output, failed, .. } => {
                    if current.is_none() {
                        return Err(structural("tool usage outside an agent span"));
                    }
                    pending_tools.push(ToolPlan {
                        tool_name: tool_name.clone(),
                        input: input.clone(),
                        output: output.clone(),
                        failed: *failed,
                        gap,
                    });
                }
                EventPayload::LlmCall {
                    input,
                    output,
                    duration_ms,
                    prompt_tokens,
                    completion_tokens,
                    model_version,
                    ..
                } => {
                    let agent = current.as_mut().ok_or_else(|| structural("call outside an agent span"))?;
                    let gap_before_call = gap
                        .checked_sub(*duration_ms)
                        .ok_or_else(|| structural("call duration exceeds its time gap"))?;
                    agent.iterations.push(IterationPlan {
                        tools: std::mem::take(&mut pending_tools),
                        gap_before_call,
                        call: CallPlan {
                            input: input.clone(),
                            output: output.clone(),
                            duration_ms: *duration_ms,
                            prompt_tokens: *prompt_tokens,
                            completion_tokens: *completion_tokens,
                            model_version: model_version.clone(),
                        },
                        errors: Vec::new(),
                    });
                }
                EventPayload::ErrorEvent { message, .. } => {
                    let agent = current.as_mut().ok_or_else(|| structural("error outside an agent span"))?;
                    let iteration = agent
                        .iterations
                        .last_mut()
                        .ok_or_else(|| structural("error before the first call"))?;
                    iteration.errors.push(ErrorPlan { message: message.clone(), gap });
                }
                EventPayload::AgentFinished { task_output, .. } => {
                    let mut agent = current.take().ok_or_else(|| structural("finish without a start"))?;
                    if !pending_tools.is_empty() {
                        return Err(structural("trailing tool usages without a call"));
                    }
                    agent.finish_gap = gap;
                    agent.task_output = task_output.clone();
                    plan.agents.push(agent);
                }
                EventPayload::ApplicationEnded { .. } => {
                    plan.end_gap = gap;
                }
                EventPayload::ApplicationStarted { .. } => {
                    return Err(structural("duplicate ApplicationStarted"));
                }
            }
            prev_ts = event.timestamp_ms;
        }

        if current.is_some() {
            return Err(structural("unclosed agent span"));
        }
        Ok(plan)
    }
}

fn structural(detail: &str) -> SimError {
    SimError::UnsupportedShape(detail.to_string())
}
