//! Python bindings. Structured values cross the boundary as JSON and come
//! out as plain dicts and lists.

use econsim::harness::{self, RunOptions, RunSummary};
use econsim::memory::{MemoryConfig, MemoryManager, Turn};
use econsim::{ActionCall, EnvKind, EpisodeConfig, StepOutcome, TrajectoryRecord};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde_json::{json, Value};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    PyModule::import(py, "json")?.call_method1("loads", (v.to_string(),))
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = PyModule::import(obj.py(), "json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

fn opt_value(obj: Option<&Bound<'_, PyAny>>) -> PyResult<Value> {
    match obj {
        Some(o) if !o.is_none() => from_py(o),
        _ => Ok(json!({})),
    }
}

fn build_config(
    env: &str,
    seed: u64,
    horizon_days: Option<u32>,
    daily_budget: Option<u32>,
    params: Option<&Bound<'_, PyAny>>,
) -> PyResult<EpisodeConfig> {
    let env: EnvKind = env.parse().map_err(value_err)?;
    let mut cfg = EpisodeConfig::new(env, seed).with_params(opt_value(params)?);
    if let Some(h) = horizon_days {
        cfg = cfg.with_horizon(h);
    }
    if let Some(b) = daily_budget {
        cfg = cfg.with_budget(b);
    }
    Ok(cfg)
}

fn outcome_json(ep: &econsim::Episode, outcome: StepOutcome) -> Value {
    let mut v = match outcome {
        StepOutcome::Applied(r) => json!({"outcome": "applied", "result": r}),
        StepOutcome::Rejected(e) => json!({"outcome": "rejected", "error": e.code, "message": e.message}),
        StepOutcome::Violation(e) => json!({"outcome": "violation", "error": e.code, "message": e.message}),
        StepOutcome::DayEnded { report, forced } => {
            json!({"outcome": "day_ended", "daily_report": report, "forced": forced})
        }
        StepOutcome::Terminated => json!({"outcome": "terminated", "error": "terminated"}),
    };
    v["day"] = json!(ep.day());
    v["remaining_budget"] = json!(ep.remaining_budget());
    v["terminated"] = json!(!ep.is_running());
    v["metric"] = ep.metric_snapshot();
    v
}

/// One episode driven call by call.
#[pyclass(name = "Episode", module = "econsim_py")]
struct PyEpisode {
    inner: econsim::Episode,
}

#[pymethods]
impl PyEpisode {
    #[new]
    #[pyo3(signature = (env, seed, horizon_days=None, daily_budget=None, params=None, run_id="py"))]
    fn new(
        env: &str,
        seed: u64,
        horizon_days: Option<u32>,
        daily_budget: Option<u32>,
        params: Option<&Bound<'_, PyAny>>,
        run_id: &str,
    ) -> PyResult<Self> {
        let cfg = build_config(env, seed, horizon_days, daily_budget, params)?;
        let inner = econsim::Episode::new(cfg, run_id).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Submit one tool call. Returns a dict with an `outcome` key.
    #[pyo3(signature = (tool, args=None))]
    fn act<'py>(&mut self, py: Python<'py>, tool: &str, args: Option<&Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
        let call = ActionCall::new(tool, opt_value(args)?);
        let out = self.inner.act(&call);
        to_py(py, &outcome_json(&self.inner, out))
    }

    fn task_done<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let out = self.inner.task_done();
        to_py(py, &outcome_json(&self.inner, out))
    }

    fn state<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.visible_state())
    }

    fn tools<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &json!(self.inner.tool_schemas()))
    }

    fn trace<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &json!(self.inner.records()))
    }

    fn trace_jsonl(&self) -> String {
        self.inner.records().iter().map(|r| r.to_json_line() + "\n").collect()
    }

    fn digest(&self) -> String {
        self.inner.state_digest()
    }

    #[getter]
    fn day(&self) -> u32 {
        self.inner.day()
    }

    #[getter]
    fn remaining_budget(&self) -> u32 {
        self.inner.remaining_budget()
    }

    #[getter]
    fn running(&self) -> bool {
        self.inner.is_running()
    }

    #[getter]
    fn status(&self) -> &'static str {
        self.inner.status().label()
    }

    #[getter]
    fn metric(&self) -> f64 {
        self.inner.metric()
    }

    #[getter]
    fn final_metric(&self) -> f64 {
        self.inner.final_metric()
    }

    fn __repr__(&self) -> String {
        format!(
            "Episode(env={}, day={}, remaining_budget={}, status={})",
            self.inner.env(),
            self.inner.day(),
            self.inner.remaining_budget(),
            self.inner.status().label()
        )
    }
}

/// Three-tier agent memory.
#[pyclass(name = "Memory", module = "econsim_py", unsendable)]
struct PyMemory {
    inner: MemoryManager,
}

#[pymethods]
impl PyMemory {
    #[new]
    #[pyo3(signature = (config=None))]
    fn new(config: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let cfg: MemoryConfig = serde_json::from_value(opt_value(config)?).map_err(value_err)?;
        Ok(Self {
            inner: MemoryManager::new(cfg),
        })
    }

    #[pyo3(signature = (step, text, tool_result=None))]
    fn insert(&mut self, step: u64, text: String, tool_result: Option<&Bound<'_, PyAny>>) -> PyResult<()> {
        let tool_result = match tool_result {
            Some(o) if !o.is_none() => Some(from_py(o)?),
            _ => None,
        };
        self.inner
            .insert_turn(Turn { step, text, tool_result })
            .map_err(value_err)
    }

    /// `(text, score, created_step)` triples, best first.
    fn retrieve(&self, query: &str, k: usize) -> Vec<(String, f64, u64)> {
        self.inner
            .retrieve(query, k)
            .into_iter()
            .map(|s| (s.item.text.clone(), s.score, s.item.created_step))
            .collect()
    }

    fn assemble(&self, query: &str, budget: usize) -> PyResult<String> {
        self.inner
            .assemble_context(query, budget)
            .map(|d| d.render())
            .map_err(value_err)
    }

    fn symbolic<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &json!(self.inner.symbolic))
    }

    fn dump<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.dump())
    }

    #[staticmethod]
    fn load(doc: &Bound<'_, PyAny>) -> PyResult<Self> {
        let inner = MemoryManager::load(&from_py(doc)?).map_err(value_err)?;
        Ok(Self { inner })
    }
}

/// Run a scripted policy to the end and return `(summary, trace)`.
#[pyfunction]
#[pyo3(signature = (env, agent, seed=0, horizon_days=None, daily_budget=None, params=None, window=128))]
fn run_episode<'py>(
    py: Python<'py>,
    env: &str,
    agent: &str,
    seed: u64,
    horizon_days: Option<u32>,
    daily_budget: Option<u32>,
    params: Option<&Bound<'py, PyAny>>,
    window: usize,
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let cfg = build_config(env, seed, horizon_days, daily_budget, params)?;
    let mut policy = harness::scripted_policy(agent, seed).map_err(value_err)?;
    let run_id = format!("{}-{}-{}", cfg.env, policy.name(), seed);
    let opts = RunOptions {
        window,
        ..RunOptions::default()
    };
    let (summary, ep) = py
        .detach(|| harness::run_episode(cfg, &run_id, policy.as_mut(), None, &opts))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((to_py(py, &json!(summary))?, to_py(py, &json!(ep.records()))?))
}

/// Mean, sample std, min, max, survival rate and curve over run summaries.
#[pyfunction]
fn aggregate<'py>(py: Python<'py>, summaries: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let runs: Vec<RunSummary> = serde_json::from_value(from_py(summaries)?).map_err(value_err)?;
    let stats = harness::aggregate_runs(&runs).map_err(value_err)?;
    to_py(py, &json!(stats))
}

/// Replay a trace against a fresh episode; returns the index of the first
/// record whose digest differs, or `None`.
#[pyfunction]
#[pyo3(signature = (env, seed, records, horizon_days=None, daily_budget=None, params=None))]
fn replay(
    env: &str,
    seed: u64,
    records: &Bound<'_, PyAny>,
    horizon_days: Option<u32>,
    daily_budget: Option<u32>,
    params: Option<&Bound<'_, PyAny>>,
) -> PyResult<Option<usize>> {
    let cfg = build_config(env, seed, horizon_days, daily_budget, params)?;
    let records: Vec<TrajectoryRecord> = serde_json::from_value(from_py(records)?).map_err(value_err)?;
    let (_, mismatch) = econsim::Episode::replay(cfg, &records).map_err(value_err)?;
    Ok(mismatch)
}

/// `(products, demand_structure)` for a synthetic market.
#[pyfunction]
#[pyo3(signature = (seed, categories=37, skus_per_category=17))]
fn generate_catalog<'py>(
    py: Python<'py>,
    seed: u64,
    categories: usize,
    skus_per_category: usize,
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    if categories == 0 || skus_per_category == 0 {
        return Err(PyValueError::new_err("categories and skus_per_category must be >= 1"));
    }
    let (catalog, structure) = econsim::vending::generate_catalog(seed, categories, skus_per_category);
    Ok((to_py(py, &json!(catalog.products))?, to_py(py, &json!(structure))?))
}

#[pyfunction]
fn policies() -> Vec<&'static str> {
    harness::POLICY_NAMES.to_vec()
}

#[pymodule]
fn econsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEpisode>()?;
    m.add_class::<PyMemory>()?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(generate_catalog, m)?)?;
    m.add_function(wrap_pyfunction!(policies, m)?)?;
    m.add("DEFAULT_HORIZON_DAYS", econsim::sim::DEFAULT_HORIZON_DAYS)?;
    m.add("DEFAULT_WINDOW", econsim::sim::DEFAULT_WINDOW)?;
    Ok(())
}
