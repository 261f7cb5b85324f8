//! Gig-economy survival loop: task market, labor with physiological cost,
//! audited settlement, wellness spending, burnout.

pub mod auditor;
pub mod tasks;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::action::{codes, find_tool, ActionCall, ActionError, ArgType, ToolSpec};
use crate::rng::RngHub;
use crate::sim::FailureReason;

pub use auditor::{Auditor, ExactMatchAuditor};
pub use tasks::{generate_tasks, FreelanceTask};

pub const AUDITOR_STREAM: &str = "auditor";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Restore {
    pub cost: f64,
    pub energy_gain: f64,
    pub stress_drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysioParams {
    pub e_base: f64,
    pub alpha: f64,
    pub lambda_skill: f64,
    pub eps_min: f64,
    pub st_crit: f64,
    pub st_max: f64,
    pub gamma_burnout: f64,
    pub fail_prob_cap: f64,
    pub c_daily: f64,
    pub e_max: f64,
    pub day_regen: f64,
    pub restore_table: BTreeMap<String, Restore>,
}

impl Default for PhysioParams {
    fn default() -> Self {
        let restore_table = [
            ("low", 5.0, 10.0, 5.0),
            ("medium", 15.0, 30.0, 15.0),
            ("high", 40.0, 60.0, 35.0),
        ]
        .into_iter()
        .map(|(k, cost, energy_gain, stress_drop)| {
            (
                k.to_string(),
                Restore {
                    cost,
                    energy_gain,
                    stress_drop,
                },
            )
        })
        .collect();
        Self {
            e_base: 2.0,
            alpha: 0.3,
            lambda_skill: 20.0,
            eps_min: 0.1,
            st_crit: 80.0,
            st_max: 100.0,
            gamma_burnout: 1.2,
            fail_prob_cap: 0.9,
            c_daily: 5.0,
            e_max: 100.0,
            day_regen: 15.0,
            restore_table,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreWeights {
    pub w1: f64,
    pub w2: f64,
    pub lambda_s: f64,
    pub lambda_e: f64,
    pub lambda_r: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            w1: 1.0,
            w2: 1.0,
            lambda_s: 1.0,
            lambda_e: 1.0,
            lambda_r: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreelanceParams {
    pub initial_money: f64,
    pub initial_energy: f64,
    pub initial_stress: f64,
    pub initial_skill: f64,
    pub initial_fail_prob: f64,
    pub initial_pool: usize,
    pub skill_gain: f64,
    pub stress_spike: f64,
    pub success_relief: f64,
    pub q_pass: f64,
    pub decay_rate: f64,
    pub free_refresh_count: usize,
    pub paid_refresh_count: usize,
    pub paid_refresh_cost: f64,
    pub physio: PhysioParams,
    pub weights: ScoreWeights,
}

impl Default for FreelanceParams {
    fn default() -> Self {
        Self {
            initial_money: 100.0,
            initial_energy: 100.0,
            initial_stress: 0.0,
            initial_skill: 10.0,
            initial_fail_prob: 0.05,
            initial_pool: 5,
            skill_gain: 1.0,
            stress_spike: 10.0,
            success_relief: 1.0,
            q_pass: 0.5,
            decay_rate: 0.02,
            free_refresh_count: 3,
            paid_refresh_count: 8,
            paid_refresh_cost: 10.0,
            physio: PhysioParams::default(),
            weights: ScoreWeights::default(),
        }
    }
}

impl FreelanceParams {
    pub fn validate(&self) -> Result<(), String> {
        let p = &self.physio;
        if !(p.gamma_burnout > 1.0) {
            return Err("gamma_burnout must be > 1".into());
        }
        if !(p.eps_min > 0.0) {
            return Err("eps_min must be > 0".into());
        }
        if !(p.lambda_skill > 0.0) {
            return Err("lambda_skill must be > 0".into());
        }
        if !(0.0..=1.0).contains(&p.fail_prob_cap) || !(0.0..=p.fail_prob_cap).contains(&self.initial_fail_prob) {
            return Err("fail probabilities must satisfy 0 <= p0 <= cap <= 1".into());
        }
        for level in ["low", "medium", "high"] {
            if !p.restore_table.contains_key(level) {
                return Err(format!("restore_table missing `{level}`"));
            }
        }
        Ok(())
    }
}

/// Energy spent on a task of difficulty `d` with skill `sk`.
pub fn energy_cost(sk: f64, d: f64, p: &PhysioParams) -> f64 {
    p.e_base + p.alpha * d * p.eps_min.max(1.0 - (sk - d) / p.lambda_skill)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreelancerState {
    pub money: f64,
    pub energy: f64,
    pub stress: f64,
    pub skills: BTreeMap<String, f64>,
    pub fail_prob: f64,
    pub income_total: f64,
    pub spend_daily: f64,
    pub spend_refresh: f64,
    pub spend_relax: f64,
    pub pool: Vec<FreelanceTask>,
    pub next_task_id: u64,
    pub free_refresh_day: Option<u32>,
}

impl FreelancerState {
    pub fn skill_avg(&self) -> f64 {
        if self.skills.is_empty() {
            return 0.0;
        }
        self.skills.values().sum::<f64>() / self.skills.len() as f64
    }
}

pub const TOOLS: &[ToolSpec] = &[
    ToolSpec {
        name: "tasks_browse",
        description: "List the job board.",
        params: &[],
    },
    ToolSpec {
        name: "task_inspect",
        description: "Show the full brief of one task.",
        params: &[("task_id", ArgType::String)],
    },
    ToolSpec {
        name: "tasks_discover",
        description: "Source new tasks, free once per day or paid.",
        params: &[("refresh_type", ArgType::Enum(&["free", "paid"]))],
    },
    ToolSpec {
        name: "solution_submit",
        description: "Do the work and submit it for audit and payment.",
        params: &[("task_id", ArgType::String), ("solution_text", ArgType::String)],
    },
    ToolSpec {
        name: "energy_restore",
        description: "Pay to recover energy and reduce stress.",
        params: &[("level", ArgType::Enum(&["low", "medium", "high"]))],
    },
];

#[derive(Clone)]
pub struct FreelanceEnv {
    pub params: FreelanceParams,
    pub state: FreelancerState,
    auditor: Arc<dyn Auditor>,
}

impl std::fmt::Debug for FreelanceEnv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FreelanceEnv")
            .field("params", &self.params)
            .field("state", &self.state)
            .finish_non_exhaustive()
    }
}

impl FreelanceEnv {
    pub fn new(params: FreelanceParams, rng: &mut RngHub) -> Self {
        Self::with_auditor(params, rng, Arc::new(ExactMatchAuditor))
    }

    pub fn with_auditor(params: FreelanceParams, rng: &mut RngHub, auditor: Arc<dyn Auditor>) -> Self {
        let skills = tasks::CATEGORIES
            .iter()
            .map(|c| (c.to_string(), params.initial_skill))
            .collect();
        let mut state = FreelancerState {
            money: params.initial_money,
            energy: params.initial_energy.min(params.physio.e_max),
            stress: params.initial_stress,
            skills,
            fail_prob: params.initial_fail_prob,
            income_total: 0.0,
            spend_daily: 0.0,
            spend_refresh: 0.0,
            spend_relax: 0.0,
            pool: Vec::new(),
            next_task_id: 1,
            free_refresh_day: None,
        };
        state.pool = tasks::draw_tasks(rng, params.initial_pool, 1, &mut state.next_task_id);
        Self {
            params,
            state,
            auditor,
        }
    }

    pub fn tools() -> &'static [ToolSpec] {
        TOOLS
    }

    fn task_index(&self, task_id: &str) -> Result<usize, ActionError> {
        self.state
            .pool
            .iter()
            .position(|t| t.task_id == task_id)
            .ok_or_else(|| ActionError::new(codes::UNKNOWN_TASK, format!("no open task `{task_id}`")))
    }

    pub fn tasks_browse(&self, today: u32) -> Value {
        let board: Vec<Value> = self
            .state
            .pool
            .iter()
            .map(|t| {
                json!({
                    "task_id": t.task_id,
                    "category": t.category,
                    "complexity": (t.difficulty * 10.0).round() / 10.0,
                    "estimated_payment": t.current_payment,
                    "days_left": t.end_day.saturating_sub(today),
                })
            })
            .collect();
        Value::Array(board)
    }

    pub fn task_inspect(&self, task_id: &str) -> Result<Value, ActionError> {
        let t = &self.state.pool[self.task_index(task_id)?];
        Ok(json!({
            "task_id": t.task_id,
            "question": t.question,
            "init_payment": t.init_payment,
            "init_effort": t.init_effort,
            "end_day": t.end_day,
        }))
    }

    pub fn tasks_discover(&mut self, refresh_type: &str, today: u32, rng: &mut RngHub) -> Result<Value, ActionError> {
        let (count, message) = match refresh_type {
            "free" => {
                if self.state.free_refresh_day == Some(today) {
                    return Err(ActionError::new(
                        codes::FREE_EXHAUSTED,
                        "free sourcing already used today",
                    ));
                }
                self.state.free_refresh_day = Some(today);
                (self.params.free_refresh_count, "free sourcing complete")
            }
            "paid" => {
                let cost = self.params.paid_refresh_cost;
                if self.state.money < cost {
                    return Err(ActionError::new(
                        codes::INSUFFICIENT_FUNDS,
                        format!("paid sourcing costs {cost:.2}"),
                    ));
                }
                self.state.money -= cost;
                self.state.spend_refresh += cost;
                (self.params.paid_refresh_count, "paid sourcing complete")
            }
            other => {
                return Err(ActionError::new(
                    codes::INVALID_ARGUMENT,
                    format!("unknown refresh_type `{other}`"),
                ))
            }
        };
        let new = tasks::draw_tasks(rng, count, today, &mut self.state.next_task_id);
        self.state.pool.extend(new);
        Ok(json!({
            "added_count": count,
            "current_pool_size": self.state.pool.len(),
            "message": message,
        }))
    }

    pub fn solution_submit(&mut self, task_id: &str, solution_text: &str, rng: &mut RngHub) -> Result<Value, ActionError> {
        let idx = self.task_index(task_id)?;
        let task = self.state.pool[idx].clone();
        let skill = self.state.skills.get(&task.category).copied().unwrap_or(0.0);
        let cost = energy_cost(skill, task.difficulty, &self.params.physio);
        if self.state.energy - cost < 0.0 {
            return Err(ActionError::new(
                codes::INSUFFICIENT_ENERGY,
                format!("task needs {cost:.1} energy, {:.1} available", self.state.energy),
            ));
        }
        self.state.energy -= cost;
        let q = self
            .auditor
            .judge(&task.question, &task.reference_answer, solution_text)
            .clamp(0.0, 1.0);
        let fumble = rng.uniform(AUDITOR_STREAM) < self.state.fail_prob;
        let success = q >= self.params.q_pass && !fumble;
        let st_max = self.params.physio.st_max;

        let (payment, message) = if success {
            let payment = (task.current_payment * (0.5 + q)).min(1.5 * task.init_payment);
            self.state.money += payment;
            self.state.income_total += payment;
            *self.state.skills.entry(task.category.clone()).or_insert(0.0) += self.params.skill_gain;
            self.state.stress = (self.state.stress - self.params.success_relief).max(0.0);
            self.state.pool.remove(idx);
            (payment, "work accepted and paid")
        } else {
            self.state.stress = (self.state.stress + self.params.stress_spike).min(st_max);
            let msg = if fumble && q >= self.params.q_pass {
                "delivery botched under pressure; no payment"
            } else {
                "work rejected by the auditor; no payment"
            };
            (0.0, msg)
        };
        Ok(json!({
            "status": "settled",
            "is_success": success,
            "execution_stats": {
                "energy_consumed": cost,
                "current_stress": self.state.stress,
                "skill_avg": self.state.skill_avg(),
            },
            "settlement": {
                "final_payment": payment,
                "current_balance": self.state.money,
            },
            "message": message,
        }))
    }

    pub fn energy_restore(&mut self, level: &str) -> Result<Value, ActionError> {
        let r = *self
            .params
            .physio
            .restore_table
            .get(level)
            .ok_or_else(|| ActionError::new(codes::INVALID_ARGUMENT, format!("unknown level `{level}`")))?;
        if self.state.money < r.cost {
            return Err(ActionError::new(
                codes::INSUFFICIENT_FUNDS,
                format!("{level} restore costs {:.2}", r.cost),
            ));
        }
        let before = (self.state.money, self.state.energy, self.state.stress);
        self.state.money -= r.cost;
        self.state.spend_relax += r.cost;
        self.state.energy = (self.state.energy + r.energy_gain).min(self.params.physio.e_max);
        self.state.stress = (self.state.stress - r.stress_drop).max(0.0);
        Ok(json!({
            "changes": {
                "money": self.state.money - before.0,
                "energy": self.state.energy - before.1,
                "stress": self.state.stress - before.2,
            },
            "current_state": self.somatic(),
        }))
    }

    fn somatic(&self) -> Value {
        json!({
            "money": self.state.money,
            "energy": self.state.energy,
            "stress": self.state.stress,
        })
    }

    pub fn apply(&mut self, call: &ActionCall, day: u32, rng: &mut RngHub) -> Result<Value, ActionError> {
        find_tool(TOOLS, &call.tool)?.validate(&call.args)?;
        let s = |k: &str| call.args[k].as_str().unwrap_or_default();
        match call.tool.as_str() {
            "tasks_browse" => Ok(self.tasks_browse(day)),
            "task_inspect" => self.task_inspect(s("task_id")),
            "tasks_discover" => self.tasks_discover(s("refresh_type"), day, rng),
            "solution_submit" => self.solution_submit(s("task_id"), s("solution_text"), rng),
            "energy_restore" => self.energy_restore(s("level")),
            _ => unreachable!("tool validated above"),
        }
    }

    /// Subsistence cost and overnight recovery.
    pub fn metabolic_settlement(&mut self) {
        let p = &self.params.physio;
        self.state.money -= p.c_daily;
        self.state.spend_daily += p.c_daily;
        self.state.energy = (self.state.energy + p.day_regen).min(p.e_max);
    }

    /// Compounds the failure probability while stress is at or above the
    /// critical level.
    pub fn burnout_update(&mut self) {
        let p = &self.params.physio;
        if self.state.stress >= p.st_crit {
            self.state.fail_prob = (self.state.fail_prob * p.gamma_burnout).min(p.fail_prob_cap);
        }
    }

    /// Drop tasks whose deadline passed before day `t`; decay the rest.
    pub fn evolve_market(&mut self, t: u32) -> usize {
        let before = self.state.pool.len();
        self.state.pool.retain(|task| task.end_day >= t);
        let keep = 1.0 - self.params.decay_rate;
        for task in &mut self.state.pool {
            task.current_payment *= keep;
        }
        before - self.state.pool.len()
    }

    pub fn end_of_day(&mut self, completed_day: u32) -> Value {
        self.metabolic_settlement();
        self.burnout_update();
        let expired = self.evolve_market(completed_day + 1);
        json!({
            "day": completed_day,
            "money": self.state.money,
            "energy": self.state.energy,
            "stress": self.state.stress,
            "skill_avg": self.state.skill_avg(),
            "income": self.income(),
            "pool_size": self.state.pool.len(),
            "expired_tasks": expired,
        })
    }

    pub fn income(&self) -> f64 {
        self.state.income_total
            - (self.state.spend_daily + self.state.spend_refresh + self.state.spend_relax)
    }

    pub fn composite_score(&self, w: &ScoreWeights) -> f64 {
        let s = &self.state;
        let st_max = self.params.physio.st_max;
        w.w1 * s.money
            + w.w2 * (w.lambda_s * s.skill_avg() + w.lambda_e * s.energy + w.lambda_r * (st_max - s.stress))
    }

    pub fn failure(&self) -> Option<FailureReason> {
        let s = &self.state;
        if s.money <= 0.0 {
            Some(FailureReason::OutOfMoney)
        } else if s.energy <= 0.0 {
            Some(FailureReason::Exhaustion)
        } else if s.stress >= self.params.physio.st_max {
            Some(FailureReason::Burnout)
        } else {
            None
        }
    }

    pub fn initial_observation(&self, day: u32) -> Value {
        json!({
            "day": day,
            "money": self.state.money,
            "energy": self.state.energy,
            "stress": self.state.stress,
            "skill_avg": self.state.skill_avg(),
            "pool_size": self.state.pool.len(),
        })
    }

    pub fn visible_state(&self) -> Value {
        json!({
            "money": self.state.money,
            "energy": self.state.energy,
            "stress": self.state.stress,
            "skills": self.state.skills,
            "skill_avg": self.state.skill_avg(),
            "income": self.income(),
            "pool_size": self.state.pool.len(),
        })
    }
}
