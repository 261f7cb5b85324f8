use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::sim::DEFAULT_HORIZON_DAYS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Vending,
    Freelance,
    Operation,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::Vending, EnvKind::Freelance, EnvKind::Operation];

    /// Actions allowed per simulated day.
    pub fn default_daily_budget(self) -> u32 {
        match self {
            EnvKind::Vending => 4,
            EnvKind::Freelance => 5,
            EnvKind::Operation => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::Vending => "vending",
            EnvKind::Freelance => "freelance",
            EnvKind::Operation => "operation",
        }
    }

    /// Name of the per-day metric snapshot key.
    pub fn metric_name(self) -> &'static str {
        match self {
            EnvKind::Vending => "net_worth",
            EnvKind::Freelance => "income",
            EnvKind::Operation => "dau",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown environment `{0}`")]
    UnknownEnv(String),
    #[error("invalid params for {env}: {message}")]
    BadParams { env: EnvKind, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl FromStr for EnvKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vending" => Ok(EnvKind::Vending),
            "freelance" => Ok(EnvKind::Freelance),
            "operation" => Ok(EnvKind::Operation),
            other => Err(ConfigError::UnknownEnv(other.to_string())),
        }
    }
}

/// Everything that determines a run apart from the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    pub env: EnvKind,
    pub seed: u64,
    pub horizon_days: u32,
    pub daily_budget: u32,
    /// Environment-specific overrides; missing keys take defaults.
    #[serde(default = "empty_params")]
    pub params: Value,
}

fn empty_params() -> Value {
    Value::Object(Map::new())
}

impl EpisodeConfig {
    pub fn new(env: EnvKind, seed: u64) -> Self {
        Self {
            env,
            seed,
            horizon_days: DEFAULT_HORIZON_DAYS,
            daily_budget: env.default_daily_budget(),
            params: empty_params(),
        }
    }

    pub fn with_horizon(mut self, days: u32) -> Self {
        self.horizon_days = days;
        self
    }

    pub fn with_budget(mut self, budget: u32) -> Self {
        self.daily_budget = budget;
        self
    }

    pub fn with_params(mut self, params: Value) -> Self {
        self.params = params;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon_days == 0 {
            return Err(ConfigError::Invalid("horizon_days must be >= 1".into()));
        }
        if self.daily_budget == 0 {
            return Err(ConfigError::Invalid("daily_budget must be >= 1".into()));
        }
        if !self.params.is_object() && !self.params.is_null() {
            return Err(ConfigError::BadParams {
                env: self.env,
                message: "params must be an object".into(),
            });
        }
        Ok(())
    }

    /// Decode `params` into an environment's parameter struct.
    pub fn parse_params<T: serde::de::DeserializeOwned>(&self) -> Result<T, ConfigError> {
        let v = if self.params.is_null() {
            empty_params()
        } else {
            self.params.clone()
        };
        serde_json::from_value(v).map_err(|e| ConfigError::BadParams {
            env: self.env,
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_defaults() {
        assert_eq!(EnvKind::Vending.default_daily_budget(), 4);
        assert_eq!(EnvKind::Freelance.default_daily_budget(), 5);
        assert_eq!(EnvKind::Operation.default_daily_budget(), 1);
        let c = EpisodeConfig::new(EnvKind::Operation, 7);
        assert_eq!(c.horizon_days, 365);
        assert_eq!(c.daily_budget, 1);
    }

    #[test]
    fn json_field_names_are_normative() {
        let c = EpisodeConfig::new(EnvKind::Vending, 3);
        let v = serde_json::to_value(&c).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["daily_budget", "env", "horizon_days", "params", "seed"]);
        assert_eq!(v["env"], "vending");

        let parsed: EpisodeConfig = serde_json::from_str(
            r#"{"env":"freelance","seed":9,"horizon_days":30,"daily_budget":5,"params":{}}"#,
        )
        .unwrap();
        assert_eq!(parsed.env, EnvKind::Freelance);
        assert!(serde_json::from_str::<EpisodeConfig>(
            r#"{"env":"casino","seed":9,"horizon_days":30,"daily_budget":5}"#
        )
        .is_err());
    }

    #[test]
    fn zero_budget_rejected() {
        let c = EpisodeConfig::new(EnvKind::Vending, 1).with_budget(0);
        assert!(c.validate().is_err());
    }
}
