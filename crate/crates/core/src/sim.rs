//! Episode clock, daily action budget and termination status shared by all
//! three economies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default simulated horizon in days.
pub const DEFAULT_HORIZON_DAYS: u32 = 365;

/// Default number of trajectory records shown to an agent.
pub const DEFAULT_WINDOW: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ClockError {
    #[error("episode already past its horizon (day {day} > {horizon})")]
    PastHorizon { day: u32, horizon: u32 },
}

/// Simulated calendar. Days are 1-based, steps within a day are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clock {
    pub day: u32,
    pub step_in_day: u32,
    pub horizon: u32,
}

impl Clock {
    pub fn new(horizon: u32) -> Self {
        Self {
            day: 1,
            step_in_day: 0,
            horizon,
        }
    }

    pub fn past_horizon(&self) -> bool {
        self.day > self.horizon
    }

    /// Move to the next day. Returns `CompletedHorizon` once the new day lies
    /// beyond the horizon and `Running` otherwise.
    pub fn advance(&mut self) -> Result<TerminationStatus, ClockError> {
        if self.past_horizon() {
            return Err(ClockError::PastHorizon {
                day: self.day,
                horizon: self.horizon,
            });
        }
        self.day += 1;
        self.step_in_day = 0;
        Ok(if self.past_horizon() {
            TerminationStatus::CompletedHorizon
        } else {
            TerminationStatus::Running
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("daily action budget of {daily_budget} exhausted")]
pub struct BudgetExhausted {
    pub daily_budget: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionBudget {
    pub daily_budget: u32,
    pub consumed: u32,
}

impl ActionBudget {
    pub fn new(daily_budget: u32) -> Self {
        assert!(daily_budget >= 1, "daily budget must be at least 1");
        Self {
            daily_budget,
            consumed: 0,
        }
    }

    pub fn remaining(&self) -> u32 {
        self.daily_budget - self.consumed
    }

    pub fn is_exhausted(&self) -> bool {
        self.consumed >= self.daily_budget
    }

    pub fn consume(&mut self) -> Result<(), BudgetExhausted> {
        if self.is_exhausted() {
            return Err(BudgetExhausted {
                daily_budget: self.daily_budget,
            });
        }
        self.consumed += 1;
        Ok(())
    }

    /// Unused actions do not carry over.
    pub fn reset(&mut self) {
        self.consumed = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// Vending: no cash and no sales for the stagnation limit.
    Bankruptcy,
    /// Freelance: money at or below zero.
    OutOfMoney,
    /// Freelance: energy at or below zero.
    Exhaustion,
    /// Freelance: stress reached the burnout ceiling.
    Burnout,
    /// Operation: DAU fell below the collapse threshold.
    Collapse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "reason", rename_all = "snake_case")]
pub enum TerminationStatus {
    Running,
    CompletedHorizon,
    Failed(FailureReason),
}

impl TerminationStatus {
    pub fn is_running(&self) -> bool {
        matches!(self, TerminationStatus::Running)
    }

    pub fn label(&self) -> &'static str {
        match self {
            TerminationStatus::Running => "running",
            TerminationStatus::CompletedHorizon => "completed_horizon",
            TerminationStatus::Failed(_) => "failed",
        }
    }
}
