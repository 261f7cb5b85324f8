//! Content-platform growth model with zero-attractor decay.
//!
//! One day transition reads only the day-`t` state and writes day `t+1`:
//! retention from content scale, quality and engagement; DAU from retention
//! plus organic growth; supply from creator activity; creator churn; and
//! quality relaxation toward equilibrium under engagement pressure.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::action::{find_tool, ActionCall, ActionError, ToolSpec};
use crate::rng::RngHub;
use crate::sim::FailureReason;

pub const ACTION_NOISE_STREAM: &str = "ops-noise";
pub const DYNAMICS_STREAM: &str = "ops-dynamics";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemCoefficients {
    pub r_base: f64,
    pub w_c: f64,
    pub w_q: f64,
    pub w_e: f64,
    pub r_lo: f64,
    pub r_hi: f64,
    pub sigma_r: f64,
    pub sigma_g: f64,
    pub g_base: f64,
    pub alpha_q: f64,
    pub alpha_c: f64,
    pub lambda_decay: f64,
    pub gamma_supply: f64,
    pub beta_supply: f64,
    pub kappa: f64,
    pub rho: f64,
    pub qual_eq: f64,
    pub eta_eng: f64,
    pub tau_collapse: f64,
}

impl Default for SystemCoefficients {
    fn default() -> Self {
        Self {
            r_base: 0.35,
            w_c: 0.04,
            w_q: 0.25,
            w_e: 0.15,
            r_lo: 0.0,
            r_hi: 0.98,
            sigma_r: 0.01,
            sigma_g: 0.05,
            g_base: 8.0,
            alpha_q: 20.0,
            alpha_c: 30.0,
            lambda_decay: 0.01,
            gamma_supply: 40.0,
            beta_supply: 0.3,
            kappa: 0.06,
            rho: 0.08,
            qual_eq: 0.45,
            eta_eng: 0.04,
            tau_collapse: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterventionEffects {
    pub boost_users: f64,
    pub eng_step: f64,
    pub act_step: f64,
    pub qual_step: f64,
    pub act_penalty: f64,
    pub removal_frac: f64,
    pub action_noise_sigma: f64,
}

impl Default for InterventionEffects {
    fn default() -> Self {
        Self {
            boost_users: 150.0,
            eng_step: 0.10,
            act_step: 0.20,
            qual_step: 0.08,
            act_penalty: 0.05,
            removal_frac: 0.02,
            action_noise_sigma: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperationParams {
    pub initial_dau: f64,
    pub initial_volume: f64,
    pub initial_quality: f64,
    pub initial_activity: f64,
    pub initial_engagement: f64,
    pub coefficients: SystemCoefficients,
    pub effects: InterventionEffects,
}

impl Default for OperationParams {
    fn default() -> Self {
        Self {
            initial_dau: 1000.0,
            initial_volume: 500.0,
            initial_quality: 0.6,
            initial_activity: 0.5,
            initial_engagement: 0.3,
            coefficients: SystemCoefficients::default(),
            effects: InterventionEffects::default(),
        }
    }
}

impl OperationParams {
    pub fn validate(&self) -> Result<(), String> {
        let c = &self.coefficients;
        if !(c.kappa > 0.0 && c.kappa < 1.0) {
            return Err("kappa must lie in (0, 1)".into());
        }
        if !(0.0 <= c.r_lo && c.r_lo < c.r_hi && c.r_hi < 1.0) {
            return Err("retention bounds must satisfy 0 <= r_lo < r_hi < 1".into());
        }
        if c.sigma_r < 0.0 || c.sigma_g < 0.0 || self.effects.action_noise_sigma < 0.0 {
            return Err("noise scales must be >= 0".into());
        }
        let e = &self.effects;
        let all = [e.boost_users, e.eng_step, e.act_step, e.qual_step, e.act_penalty, e.removal_frac];
        if all.iter().any(|v| *v < 0.0) {
            return Err("intervention effects must be >= 0".into());
        }
        if self.initial_volume < 1.0 || self.initial_dau < 0.0 {
            return Err("initial volume must be >= 1 and DAU >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformState {
    pub dau: f64,
    pub volume: f64,
    pub quality: f64,
    pub activity: f64,
    pub engagement: f64,
    pub dau_history: Vec<f64>,
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

pub fn retention(s: &PlatformState, c: &SystemCoefficients, eps_r: f64) -> f64 {
    let raw = c.r_base + c.w_c * s.volume.ln() + c.w_q * s.quality + c.w_e * s.engagement + eps_r;
    raw.clamp(c.r_lo, c.r_hi)
}

pub fn dau_update(s: &PlatformState, c: &SystemCoefficients, r: f64, eps_g: f64) -> f64 {
    let growth = c.g_base + c.alpha_q * s.quality + c.alpha_c * s.activity;
    (s.dau * r + growth * (1.0 + eps_g)).max(0.0)
}

pub fn supply_update(s: &PlatformState, c: &SystemCoefficients) -> f64 {
    let v = s.volume * (1.0 - c.lambda_decay)
        + c.gamma_supply * s.activity * (1.0 + c.beta_supply * s.quality);
    v.max(1.0)
}

pub fn activity_decay(s: &PlatformState, c: &SystemCoefficients) -> f64 {
    s.activity * (1.0 - c.kappa)
}

pub fn quality_update(s: &PlatformState, c: &SystemCoefficients) -> f64 {
    clamp01(s.quality - c.rho * (s.quality - c.qual_eq) - c.eta_eng * s.engagement)
}

pub const TOOLS: &[ToolSpec] = &[
    ToolSpec {
        name: "acquisition_boost",
        description: "Spend on user acquisition.",
        params: &[],
    },
    ToolSpec {
        name: "engagement_tune",
        description: "Turn up algorithmic engagement.",
        params: &[],
    },
    ToolSpec {
        name: "creator_incentive",
        description: "Subsidize content creators.",
        params: &[],
    },
    ToolSpec {
        name: "moderation_tighten",
        description: "Tighten content moderation.",
        params: &[],
    },
];

#[derive(Debug, Clone)]
pub struct OperationEnv {
    pub params: OperationParams,
    pub state: PlatformState,
}

impl OperationEnv {
    pub fn new(params: OperationParams) -> Self {
        let state = PlatformState {
            dau: params.initial_dau,
            volume: params.initial_volume.max(1.0),
            quality: clamp01(params.initial_quality),
            activity: clamp01(params.initial_activity),
            engagement: clamp01(params.initial_engagement),
            dau_history: Vec::new(),
        };
        Self { params, state }
    }

    pub fn tools() -> &'static [ToolSpec] {
        TOOLS
    }

    fn action_noise(&self, rng: &mut RngHub) -> f64 {
        1.0 + rng.gaussian(ACTION_NOISE_STREAM, 0.0, self.params.effects.action_noise_sigma)
    }

    pub fn apply_intervention(&mut self, tool: &str, rng: &mut RngHub) -> Result<Value, ActionError> {
        find_tool(TOOLS, tool)?;
        let e = self.params.effects.clone();
        let gamma = self.params.coefficients.gamma_supply;
        let noise = self.action_noise(rng);
        let s = &mut self.state;
        let out = match tool {
            "acquisition_boost" => {
                let added = (e.boost_users * noise).max(0.0);
                s.dau += added;
                json!({"new_users_acquired": added})
            }
            "engagement_tune" => {
                s.engagement = clamp01(s.engagement + e.eng_step * noise);
                json!({"engagement_level": s.engagement, "content_quality": s.quality})
            }
            "creator_incentive" => {
                s.activity = clamp01(s.activity + e.act_step * noise);
                let added = gamma * e.act_step;
                s.volume += added;
                json!({
                    "creator_activity": s.activity,
                    "content_added": added,
                    "total_content": s.volume,
                })
            }
            "moderation_tighten" => {
                s.quality = clamp01(s.quality + e.qual_step * noise);
                s.activity = clamp01(s.activity - e.act_penalty);
                let before = s.volume;
                s.volume = (s.volume - e.removal_frac * s.volume).max(1.0);
                json!({
                    "content_quality": s.quality,
                    "content_removed": before - s.volume,
                    "creator_activity": s.activity,
                })
            }
            _ => unreachable!("tool validated above"),
        };
        Ok(out)
    }

    pub fn apply(&mut self, call: &ActionCall, rng: &mut RngHub) -> Result<Value, ActionError> {
        find_tool(TOOLS, &call.tool)?.validate(&call.args)?;
        self.apply_intervention(&call.tool, rng)
    }

    /// Synchronous update of all five state variables from day-`t` values.
    pub fn day_transition(&mut self, rng: &mut RngHub) {
        let c = &self.params.coefficients;
        let eps_r = rng.gaussian(DYNAMICS_STREAM, 0.0, c.sigma_r);
        let eps_g = rng.gaussian(DYNAMICS_STREAM, 0.0, c.sigma_g);
        let s = &self.state;
        let r = retention(s, c, eps_r);
        let next = PlatformState {
            dau: dau_update(s, c, r, eps_g),
            volume: supply_update(s, c),
            quality: quality_update(s, c),
            activity: activity_decay(s, c),
            engagement: s.engagement,
            dau_history: Vec::new(),
        };
        let mut history = std::mem::take(&mut self.state.dau_history);
        history.push(next.dau);
        self.state = PlatformState {
            dau_history: history,
            ..next
        };
    }

    pub fn end_of_day(&mut self, completed_day: u32, rng: &mut RngHub) -> Value {
        self.day_transition(rng);
        self.observation(completed_day)
    }

    pub fn observation(&self, day: u32) -> Value {
        let s = &self.state;
        json!({
            "day": day,
            "dau": s.dau,
            "volume": s.volume,
            "quality": s.quality,
            "activity": s.activity,
            "engagement": s.engagement,
        })
    }

    pub fn failure(&self) -> Option<FailureReason> {
        (self.state.dau < self.params.coefficients.tau_collapse).then_some(FailureReason::Collapse)
    }

    /// Mean DAU over recorded days.
    pub fn dau_avg(&self) -> Option<f64> {
        let h = &self.state.dau_history;
        (!h.is_empty()).then(|| h.iter().sum::<f64>() / h.len() as f64)
    }

    pub fn visible_state(&self) -> Value {
        let s = &self.state;
        json!({
            "dau": s.dau,
            "volume": s.volume,
            "quality": s.quality,
            "activity": s.activity,
            "engagement": s.engagement,
            "days_recorded": s.dau_history.len(),
        })
    }
}
