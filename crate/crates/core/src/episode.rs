//! The turn-based episode state machine shared by the in-process harness and
//! the HTTP gateway.
//!
//! An episode owns one economy, the clock, the daily budget and the random
//! streams. Every state-mutating call appends exactly one
//! [`TrajectoryRecord`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::action::{codes, ActionCall, ActionError, ToolSpec};
use crate::config::{ConfigError, EnvKind, EpisodeConfig};
use crate::freelance::{Auditor, FreelanceEnv, FreelanceParams};
use crate::operation::{OperationEnv, OperationParams};
use crate::rng::RngHub;
use crate::sim::{ActionBudget, Clock, TerminationStatus};
use crate::vending::{VendingEnv, VendingParams};

pub const RESET_TOOL: &str = "reset";

#[derive(Debug, Clone)]
pub enum Economy {
    Vending(Box<VendingEnv>),
    Freelance(Box<FreelanceEnv>),
    Operation(Box<OperationEnv>),
}

impl Economy {
    pub fn build(config: &EpisodeConfig, rng: &mut RngHub) -> Result<Self, ConfigError> {
        let bad = |message: String| ConfigError::BadParams {
            env: config.env,
            message,
        };
        Ok(match config.env {
            EnvKind::Vending => {
                let p: VendingParams = config.parse_params()?;
                p.validate().map_err(bad)?;
                Economy::Vending(Box::new(VendingEnv::new(p, config.seed)))
            }
            EnvKind::Freelance => {
                let p: FreelanceParams = config.parse_params()?;
                p.validate().map_err(bad)?;
                Economy::Freelance(Box::new(FreelanceEnv::new(p, rng)))
            }
            EnvKind::Operation => {
                let p: OperationParams = config.parse_params()?;
                p.validate().map_err(bad)?;
                Economy::Operation(Box::new(OperationEnv::new(p)))
            }
        })
    }

    pub fn kind(&self) -> EnvKind {
        match self {
            Economy::Vending(_) => EnvKind::Vending,
            Economy::Freelance(_) => EnvKind::Freelance,
            Economy::Operation(_) => EnvKind::Operation,
        }
    }

    pub fn tools(&self) -> &'static [ToolSpec] {
        match self {
            Economy::Vending(_) => VendingEnv::tools(),
            Economy::Freelance(_) => FreelanceEnv::tools(),
            Economy::Operation(_) => OperationEnv::tools(),
        }
    }

    fn apply(&mut self, call: &ActionCall, day: u32, rng: &mut RngHub) -> Result<Value, ActionError> {
        match self {
            Economy::Vending(e) => e.apply(call, day),
            Economy::Freelance(e) => e.apply(call, day, rng),
            Economy::Operation(e) => e.apply(call, rng),
        }
    }

    fn end_of_day(&mut self, day: u32, rng: &mut RngHub) -> Value {
        match self {
            Economy::Vending(e) => e.end_of_day(day, rng),
            Economy::Freelance(e) => e.end_of_day(day),
            Economy::Operation(e) => e.end_of_day(day, rng),
        }
    }

    fn failure(&self) -> Option<crate::sim::FailureReason> {
        match self {
            Economy::Vending(e) => e.failure(),
            Economy::Freelance(e) => e.failure(),
            Economy::Operation(e) => e.failure(),
        }
    }

    /// Net worth, income, or current DAU.
    pub fn metric(&self) -> f64 {
        match self {
            Economy::Vending(e) => e.net_worth(),
            Economy::Freelance(e) => e.income(),
            Economy::Operation(e) => e.state.dau,
        }
    }

    fn initial_observation(&self, day: u32) -> Value {
        match self {
            Economy::Vending(e) => e.initial_observation(day),
            Economy::Freelance(e) => e.initial_observation(day),
            Economy::Operation(e) => e.observation(day),
        }
    }

    pub fn visible_state(&self) -> Value {
        match self {
            Economy::Vending(e) => e.visible_state(),
            Economy::Freelance(e) => e.visible_state(),
            Economy::Operation(e) => e.visible_state(),
        }
    }

    /// Full mutable state, hidden parts included, for digests.
    fn state_value(&self) -> Value {
        let v = match self {
            Economy::Vending(e) => serde_json::to_value(&e.state),
            Economy::Freelance(e) => serde_json::to_value(&e.state),
            Economy::Operation(e) => serde_json::to_value(&e.state),
        };
        v.expect("state serializes")
    }
}

/// One line of the trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub run_id: String,
    pub day: u32,
    pub step: u64,
    pub tool: String,
    pub args: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ActionError>,
    pub state_digest: String,
    pub metric_snapshot: Value,
}

impl TrajectoryRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// What happened to one call.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    /// The environment executed the action.
    Applied(Value),
    /// The environment refused the action (e.g. insufficient funds). Budget
    /// slot consumed.
    Rejected(ActionError),
    /// Unknown tool or malformed arguments. Budget slot consumed, state
    /// unchanged.
    Violation(ActionError),
    /// The day ended, either by `task_done` or because the call arrived with
    /// the budget already spent. Carries the daily report.
    DayEnded { report: Value, forced: bool },
    /// The episode is over; nothing changed.
    Terminated,
}

#[derive(Debug, Clone)]
pub struct Episode {
    config: EpisodeConfig,
    run_id: String,
    economy: Economy,
    clock: Clock,
    budget: ActionBudget,
    rng: RngHub,
    status: TerminationStatus,
    step: u64,
    records: Vec<TrajectoryRecord>,
    metric_series: Vec<f64>,
    last_observation: Value,
}

#[derive(Serialize)]
struct DigestView<'a> {
    env: EnvKind,
    clock: &'a Clock,
    budget: &'a ActionBudget,
    status: &'a TerminationStatus,
    rng: &'a RngHub,
    state: Value,
}

impl Episode {
    pub fn new(config: EpisodeConfig, run_id: impl Into<String>) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut rng = RngHub::new(config.seed);
        let economy = Economy::build(&config, &mut rng)?;
        Ok(Self::assemble(config, run_id.into(), economy, rng))
    }

    /// Freelance episode with a custom auditor.
    pub fn with_auditor(
        config: EpisodeConfig,
        run_id: impl Into<String>,
        auditor: Arc<dyn Auditor>,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        if config.env != EnvKind::Freelance {
            return Err(ConfigError::Invalid("auditors apply to freelance only".into()));
        }
        let mut rng = RngHub::new(config.seed);
        let params: FreelanceParams = config.parse_params()?;
        params.validate().map_err(|message| ConfigError::BadParams {
            env: config.env,
            message,
        })?;
        let economy = Economy::Freelance(Box::new(FreelanceEnv::with_auditor(params, &mut rng, auditor)));
        Ok(Self::assemble(config, run_id.into(), economy, rng))
    }

    fn assemble(config: EpisodeConfig, run_id: String, economy: Economy, rng: RngHub) -> Self {
        let clock = Clock::new(config.horizon_days);
        let budget = ActionBudget::new(config.daily_budget);
        let observation = economy.initial_observation(clock.day);
        let mut ep = Self {
            config,
            run_id,
            economy,
            clock,
            budget,
            rng,
            status: TerminationStatus::Running,
            step: 0,
            records: Vec::new(),
            metric_series: Vec::new(),
            last_observation: observation.clone(),
        };
        // configuration minus the env params, which may hold hidden coefficients
        let args = json!({
            "env": ep.config.env,
            "seed": ep.config.seed,
            "horizon_days": ep.config.horizon_days,
            "daily_budget": ep.config.daily_budget,
        });
        ep.push_record(1, RESET_TOOL, args, Ok(observation));
        ep
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn env(&self) -> EnvKind {
        self.config.env
    }

    pub fn economy(&self) -> &Economy {
        &self.economy
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn day(&self) -> u32 {
        self.clock.day
    }

    pub fn budget(&self) -> &ActionBudget {
        &self.budget
    }

    pub fn remaining_budget(&self) -> u32 {
        self.budget.remaining()
    }

    pub fn status(&self) -> TerminationStatus {
        self.status
    }

    pub fn is_running(&self) -> bool {
        self.status.is_running()
    }

    pub fn records(&self) -> &[TrajectoryRecord] {
        &self.records
    }

    /// Metric snapshot after each completed day.
    pub fn metric_series(&self) -> &[f64] {
        &self.metric_series
    }

    pub fn last_observation(&self) -> &Value {
        &self.last_observation
    }

    pub fn metric(&self) -> f64 {
        self.economy.metric()
    }

    /// Objective reported at the end of a run: net worth, income, or mean
    /// DAU over the days survived.
    pub fn final_metric(&self) -> f64 {
        match &self.economy {
            Economy::Operation(e) => e.dau_avg().unwrap_or(0.0),
            other => other.metric(),
        }
    }

    pub fn metric_snapshot(&self) -> Value {
        json!({ self.config.env.metric_name(): self.economy.metric() })
    }

    pub fn tools(&self) -> &'static [ToolSpec] {
        self.economy.tools()
    }

    pub fn tool_schemas(&self) -> Vec<Value> {
        let mut out: Vec<Value> = self.tools().iter().map(ToolSpec::json_schema).collect();
        out.push(json!({
            "name": crate::action::TASK_DONE,
            "description": "Finish the current day.",
            "parameters": {"type": "object", "properties": {}, "required": [], "additionalProperties": false},
        }));
        out
    }

    /// Agent-visible state plus protocol counters.
    pub fn visible_state(&self) -> Value {
        json!({
            "env": self.config.env,
            "day": self.clock.day,
            "remaining_budget": self.budget.remaining(),
            "daily_budget": self.budget.daily_budget,
            "status": self.status,
            "metric": self.metric_snapshot(),
            "state": self.economy.visible_state(),
        })
    }

    /// Stable hash of the complete episode state, hidden parts included.
    pub fn state_digest(&self) -> String {
        let view = DigestView {
            env: self.config.env,
            clock: &self.clock,
            budget: &self.budget,
            status: &self.status,
            rng: &self.rng,
            state: self.economy.state_value(),
        };
        let bytes = serde_json::to_vec(&view).expect("digest view serializes");
        let hash = Sha256::digest(&bytes);
        hash.iter().take(16).map(|b| format!("{b:02x}")).collect()
    }

    fn push_record(&mut self, day: u32, tool: &str, args: Value, outcome: Result<Value, ActionError>) {
        let (result, error) = match outcome {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e)),
        };
        let rec = TrajectoryRecord {
            run_id: self.run_id.clone(),
            day,
            step: self.step,
            tool: tool.to_string(),
            args,
            result,
            error,
            state_digest: self.state_digest(),
            metric_snapshot: self.metric_snapshot(),
        };
        self.step += 1;
        self.records.push(rec);
    }

    fn refresh_status(&mut self) {
        if let Some(reason) = self.economy.failure() {
            self.status = TerminationStatus::Failed(reason);
        }
    }

    /// Submit one tool call. `task_done` ends the day; a call arriving with
    /// the budget already spent ends the day instead of running.
    pub fn act(&mut self, call: &ActionCall) -> StepOutcome {
        if !self.is_running() {
            return StepOutcome::Terminated;
        }
        if call.is_task_done() {
            return self.end_day(false);
        }
        if self.budget.is_exhausted() {
            return self.end_day(true);
        }
        self.budget.consume().expect("budget checked above");
        self.clock.step_in_day = self.budget.consumed;
        let day = self.clock.day;
        let outcome = self.economy.apply(call, day, &mut self.rng);
        self.refresh_status();
        let step = match &outcome {
            Ok(v) => {
                self.last_observation = v.clone();
                StepOutcome::Applied(v.clone())
            }
            Err(e) if is_protocol_error(e) => StepOutcome::Violation(e.clone()),
            Err(e) => StepOutcome::Rejected(e.clone()),
        };
        self.push_record(day, &call.tool, call.args.clone(), outcome);
        step
    }

    /// End the current day, running the environment's transition.
    pub fn task_done(&mut self) -> StepOutcome {
        if !self.is_running() {
            return StepOutcome::Terminated;
        }
        self.end_day(false)
    }

    fn end_day(&mut self, forced: bool) -> StepOutcome {
        let day = self.clock.day;
        let report = self.economy.end_of_day(day, &mut self.rng);
        let horizon = self.clock.advance().expect("running episodes are within the horizon");
        self.budget.reset();
        self.refresh_status();
        if self.status.is_running() {
            self.status = horizon;
        }
        self.metric_series.push(self.economy.metric());
        self.last_observation = report.clone();
        let args = if forced { json!({"forced": true}) } else { json!({}) };
        self.push_record(day, crate::action::TASK_DONE, args, Ok(report.clone()));
        StepOutcome::DayEnded { report, forced }
    }

    /// Rebuild an episode from a trajectory log by re-issuing every recorded
    /// call. Returns the replayed episode and the index of the first record
    /// whose digest disagrees, if any.
    pub fn replay(config: EpisodeConfig, records: &[TrajectoryRecord]) -> Result<(Self, Option<usize>), ConfigError> {
        let run_id = records.first().map(|r| r.run_id.clone()).unwrap_or_default();
        let mut ep = Episode::new(config, run_id)?;
        let mut mismatch = None;
        for (i, rec) in records.iter().enumerate() {
            if rec.tool != RESET_TOOL {
                let call = if rec.tool == crate::action::TASK_DONE {
                    ActionCall::task_done()
                } else {
                    ActionCall::new(rec.tool.clone(), rec.args.clone())
                };
                if matches!(ep.act(&call), StepOutcome::Terminated) {
                    mismatch.get_or_insert(i);
                    break;
                }
            }
            let last = ep.records.last().expect("at least the reset record");
            if mismatch.is_none() && last.state_digest != rec.state_digest {
                mismatch = Some(i);
            }
        }
        Ok((ep, mismatch))
    }
}

fn is_protocol_error(e: &ActionError) -> bool {
    e.code == codes::SCHEMA_VIOLATION || e.code == codes::UNKNOWN_TOOL
}
