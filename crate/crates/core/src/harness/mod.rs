//! Episode runner, agent interface, summaries and trace files.

mod policies;
pub mod solver;

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::action::{ActionCall, ToolSpec, TASK_DONE};
use crate::config::{ConfigError, EnvKind, EpisodeConfig};
use crate::episode::{Episode, StepOutcome, TrajectoryRecord, RESET_TOOL};
use crate::memory::{MemoryError, MemoryManager, Turn};
use crate::sim::{FailureReason, TerminationStatus, DEFAULT_WINDOW};

pub use policies::{
    scripted_policy, FreelanceGreedy, OperationThreshold, Passive, RandomAgent, VendingRestocker, POLICY_NAMES,
};

/// Tool name recorded when an agent returns no call at all.
pub const NO_CALL: &str = "no_tool_call";

/// Records visible to the agent, newest last.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingWindow {
    k: usize,
    records: VecDeque<TrajectoryRecord>,
}

impl Default for SlidingWindow {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW)
    }
}

impl SlidingWindow {
    pub fn new(k: usize) -> Self {
        Self {
            k: k.max(1),
            records: VecDeque::with_capacity(k.min(1024)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.k
    }

    pub fn push(&mut self, record: TrajectoryRecord) {
        self.records.push_back(record);
        while self.records.len() > self.k {
            self.records.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrajectoryRecord> {
        self.records.iter()
    }

    pub fn last(&self) -> Option<&TrajectoryRecord> {
        self.records.back()
    }
}

/// What an agent sees on its turn.
pub struct AgentContext<'a> {
    pub env: EnvKind,
    pub day: u32,
    pub remaining_budget: u32,
    pub daily_budget: u32,
    /// Result of the last call, or the daily report after a day change.
    pub observation: &'a Value,
    /// The environment's agent-visible state.
    pub state: &'a Value,
    pub window: &'a SlidingWindow,
    pub tools: &'static [ToolSpec],
    /// Assembled memory context when a memory manager is attached.
    pub memory: Option<&'a str>,
}

/// An agent proposes exactly one call per turn. Extra calls are ignored and
/// counted as protocol violations; an empty response wastes the turn.
pub trait AgentPort {
    fn name(&self) -> &str;
    fn decide(&mut self, ctx: &AgentContext<'_>) -> Vec<ActionCall>;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),
    #[error("bad policy parameter: {0}")]
    BadPolicyParam(String),
    #[error("no runs to aggregate")]
    Empty,
    #[error("runs mix environments {0} and {1}")]
    MixedEnvs(EnvKind, EnvKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub env: EnvKind,
    pub seed: u64,
    pub agent: String,
    /// Completed day transitions.
    pub survived_days: u32,
    pub status: TerminationStatus,
    pub failure_reason: Option<FailureReason>,
    pub final_metric: f64,
    /// Metric after each completed day.
    pub metric_series: Vec<f64>,
    /// Calls per tool, one map per day starting at day 1.
    pub tool_counts: Vec<BTreeMap<String, u32>>,
    pub protocol_violations: u32,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub window: usize,
    /// Approximate token budget for assembled memory contexts.
    pub memory_budget: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            memory_budget: 2048,
        }
    }
}

/// Drives one episode to termination.
pub fn run_episode(
    config: EpisodeConfig,
    run_id: &str,
    agent: &mut dyn AgentPort,
    mut memory: Option<&mut MemoryManager>,
    opts: &RunOptions,
) -> Result<(RunSummary, Episode), HarnessError> {
    let mut ep = Episode::new(config, run_id)?;
    let mut window = SlidingWindow::new(opts.window);
    let mut violations = 0u32;
    let mut seen = 0usize;
    let mut sync = |ep: &Episode, window: &mut SlidingWindow, memory: &mut Option<&mut MemoryManager>| -> Result<(), HarnessError> {
        for rec in &ep.records()[seen..] {
            window.push(rec.clone());
            if let Some(m) = memory.as_deref_mut() {
                m.insert_turn(Turn::from_record(rec))?;
            }
        }
        seen = ep.records().len();
        Ok(())
    };
    sync(&ep, &mut window, &mut memory)?;

    while ep.is_running() {
        let state = ep.economy().visible_state();
        let observation = match window.last() {
            Some(TrajectoryRecord { result: Some(r), .. }) => r.clone(),
            Some(TrajectoryRecord { error: Some(e), .. }) => e.to_json(),
            _ => Value::Null,
        };
        let memory_doc = match memory.as_deref() {
            Some(m) => Some(m.assemble_context(&observation.to_string(), opts.memory_budget)?.render()),
            None => None,
        };
        let calls = {
            let ctx = AgentContext {
                env: ep.env(),
                day: ep.day(),
                remaining_budget: ep.remaining_budget(),
                daily_budget: ep.budget().daily_budget,
                observation: &observation,
                state: &state,
                window: &window,
                tools: ep.tools(),
                memory: memory_doc.as_deref(),
            };
            agent.decide(&ctx)
        };
        if calls.len() > 1 {
            log::warn!("{}: {} calls in one turn, only the first is honored", agent.name(), calls.len());
            violations += 1;
        }
        let call = calls.into_iter().next().unwrap_or_else(|| ActionCall::bare(NO_CALL));
        if let StepOutcome::Violation(e) = ep.act(&call) {
            log::debug!("{}: protocol violation on day {}: {}", agent.name(), ep.day(), e.message);
            violations += 1;
        }
        sync(&ep, &mut window, &mut memory)?;
    }
    let summary = summarize(&ep, agent.name(), violations);
    Ok((summary, ep))
}

fn summarize(ep: &Episode, agent: &str, protocol_violations: u32) -> RunSummary {
    let status = ep.status();
    RunSummary {
        run_id: ep.run_id().to_string(),
        env: ep.env(),
        seed: ep.config().seed,
        agent: agent.to_string(),
        survived_days: ep.metric_series().len() as u32,
        status,
        failure_reason: match status {
            TerminationStatus::Failed(r) => Some(r),
            _ => None,
        },
        final_metric: ep.final_metric(),
        metric_series: ep.metric_series().to_vec(),
        tool_counts: count_tools(ep.records(), ep.tools()),
        protocol_violations,
    }
}

/// Per-day call counts; every environment tool and `task_done` appears in
/// every day's map, zero when unused.
pub fn count_tools(records: &[TrajectoryRecord], tools: &[ToolSpec]) -> Vec<BTreeMap<String, u32>> {
    let last_day = records.iter().map(|r| r.day).max().unwrap_or(0) as usize;
    let blank: BTreeMap<String, u32> = tools
        .iter()
        .map(|t| t.name.to_string())
        .chain(std::iter::once(TASK_DONE.to_string()))
        .map(|n| (n, 0))
        .collect();
    let mut days = vec![blank; last_day];
    for r in records.iter().filter(|r| r.tool != RESET_TOOL) {
        *days[r.day as usize - 1].entry(r.tool.clone()).or_insert(0) += 1;
    }
    days
}

fn csv_string(rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
}

/// Wide CSV: one row per day, one column per tool.
pub fn tool_frequency_csv(summary: &RunSummary) -> String {
    let mut cols: Vec<&String> = summary.tool_counts.iter().flat_map(|m| m.keys()).collect();
    cols.sort();
    cols.dedup();
    let header = std::iter::once("day".to_string()).chain(cols.iter().map(|c| c.to_string())).collect();
    let rows = summary.tool_counts.iter().enumerate().map(|(i, m)| {
        std::iter::once((i + 1).to_string())
            .chain(cols.iter().map(|c| m.get(*c).copied().unwrap_or(0).to_string()))
            .collect()
    });
    csv_string(std::iter::once(header).chain(rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub day: u32,
    /// Runs still alive after this day.
    pub runs: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub env: EnvKind,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation; `None` for a single run.
    pub std: Option<f64>,
    pub min: f64,
    pub max: f64,
    pub survival_rate: f64,
    pub curve: Vec<CurvePoint>,
}

pub fn aggregate_runs(summaries: &[RunSummary]) -> Result<AggregateStats, HarnessError> {
    let first = summaries.first().ok_or(HarnessError::Empty)?;
    if let Some(other) = summaries.iter().find(|s| s.env != first.env) {
        return Err(HarnessError::MixedEnvs(first.env, other.env));
    }
    let finals: Vec<f64> = summaries.iter().map(|s| s.final_metric).collect();
    let n = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let std = (finals.len() > 1).then(|| (finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    let longest = summaries.iter().map(|s| s.metric_series.len()).max().unwrap_or(0);
    let curve = (0..longest)
        .map(|d| {
            let vals: Vec<f64> = summaries.iter().filter_map(|s| s.metric_series.get(d).copied()).collect();
            CurvePoint {
                day: d as u32 + 1,
                runs: vals.len(),
                mean: vals.iter().sum::<f64>() / vals.len() as f64,
                min: vals.iter().copied().fold(f64::INFINITY, f64::min),
                max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    let survived = summaries
        .iter()
        .filter(|s| s.status == TerminationStatus::CompletedHorizon)
        .count();
    Ok(AggregateStats {
        env: first.env,
        runs: summaries.len(),
        mean,
        std,
        min: finals.iter().copied().fold(f64::INFINITY, f64::min),
        max: finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        survival_rate: survived as f64 / n,
        curve,
    })
}

pub fn curve_csv(stats: &AggregateStats) -> String {
    let header = ["day", "runs", "mean", "min", "max"].map(String::from).to_vec();
    let rows = stats.curve.iter().map(|p| {
        vec![
            p.day.to_string(),
            p.runs.to_string(),
            p.mean.to_string(),
            p.min.to_string(),
            p.max.to_string(),
        ]
    });
    csv_string(std::iter::once(header).chain(rows))
}

pub fn write_trace(path: &Path, records: &[TrajectoryRecord]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        writeln!(f, "{}", r.to_json_line())?;
    }
    f.flush()
}

pub fn read_trace(path: &Path) -> std::io::Result<Vec<TrajectoryRecord>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?);
    }
    Ok(out)
}

/// Runs one scripted policy over several seeds on worker threads. Results
/// come back in seed order.
pub fn run_batch(
    base: &EpisodeConfig,
    policy: &str,
    seeds: &[u64],
    opts: &RunOptions,
) -> Result<Vec<(RunSummary, Episode)>, HarnessError> {
    let results: Vec<Result<(RunSummary, Episode), HarnessError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let cfg = EpisodeConfig { seed, ..base.clone() };
                scope.spawn(move || {
                    let mut agent = scripted_policy(policy, seed)?;
                    let run_id = format!("{}-{}-{}", cfg.env, agent.name(), seed);
                    run_episode(cfg, &run_id, agent.as_mut(), None, opts)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    results.into_iter().collect()
}
