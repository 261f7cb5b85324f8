//! Scripted baseline agents.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use super::{solver, AgentContext, AgentPort, HarnessError};
use crate::action::{ActionCall, ArgType};
use crate::episode::TrajectoryRecord;
use crate::freelance::{energy_cost, PhysioParams};
use crate::rng::RngHub;

pub const POLICY_NAMES: &[&str] = &[
    "vending_restocker",
    "freelance_greedy",
    "operation_threshold",
    "random",
    "passive",
];

/// Builds a policy from `name` or `name:key=value,key=value`.
pub fn scripted_policy(spec: &str, seed: u64) -> Result<Box<dyn AgentPort + Send>, HarnessError> {
    let (name, raw) = spec.split_once(':').unwrap_or((spec, ""));
    let mut params = BTreeMap::new();
    for pair in raw.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| HarnessError::BadPolicyParam(format!("expected key=value, got `{pair}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| HarnessError::BadPolicyParam(format!("`{k}` needs a number")))?;
        params.insert(k.trim().to_string(), v);
    }
    let mut take = |key: &str, default: f64| params.remove(key).unwrap_or(default);
    let agent: Box<dyn AgentPort + Send> = match name {
        "vending_restocker" => {
            let d = VendingRestocker::default();
            Box::new(VendingRestocker {
                markup: take("markup", d.markup),
                per_category: take("per_category", d.per_category as f64) as usize,
                max_products: take("max_products", d.max_products as f64) as usize,
                reorder_point: take("reorder_point", f64::from(d.reorder_point)) as u32,
                target_level: take("target_level", f64::from(d.target_level)) as u32,
                ..d
            })
        }
        "freelance_greedy" => {
            let d = FreelanceGreedy::default();
            Box::new(FreelanceGreedy {
                energy_floor: take("energy_floor", d.energy_floor),
                stress_ceiling: take("stress_ceiling", d.stress_ceiling),
                cash_reserve: take("cash_reserve", d.cash_reserve),
                ..d
            })
        }
        "operation_threshold" => {
            let d = OperationThreshold::default();
            Box::new(OperationThreshold {
                dau_floor: take("dau_floor", d.dau_floor),
                activity_floor: take("activity_floor", d.activity_floor),
                quality_floor: take("quality_floor", d.quality_floor),
            })
        }
        "random" => Box::new(RandomAgent::new(seed)),
        "passive" => Box::new(Passive),
        other => return Err(HarnessError::UnknownPolicy(other.to_string())),
    };
    if let Some(k) = params.keys().next() {
        return Err(HarnessError::BadPolicyParam(format!("`{k}` is not a parameter of {name}")));
    }
    Ok(agent)
}

fn num(v: &Value, key: &str) -> f64 {
    v.get(key).and_then(Value::as_f64).unwrap_or(0.0)
}

fn last_ok<'a>(ctx: &AgentContext<'a>) -> Option<(&'a TrajectoryRecord, &'a Value)> {
    let rec = ctx.window.last()?;
    rec.result.as_ref().map(|r| (rec, r))
}

/// Only ever ends the day.
#[derive(Debug, Clone, Copy, Default)]
pub struct Passive;

impl AgentPort for Passive {
    fn name(&self) -> &str {
        "passive"
    }

    fn decide(&mut self, _ctx: &AgentContext<'_>) -> Vec<ActionCall> {
        vec![ActionCall::task_done()]
    }
}

/// Researches one category at a time, prices the cheapest products of each
/// at a fixed markup over wholesale and keeps them stocked.
#[derive(Debug, Clone)]
pub struct VendingRestocker {
    pub markup: f64,
    pub per_category: usize,
    pub max_products: usize,
    pub reorder_point: u32,
    pub target_level: u32,
    categories: Vec<String>,
    next_category: usize,
    /// Chosen products with their wholesale prices.
    targets: BTreeMap<String, f64>,
}

impl Default for VendingRestocker {
    fn default() -> Self {
        Self {
            markup: 1.3,
            per_category: 2,
            max_products: 24,
            reorder_point: 15,
            target_level: 40,
            categories: Vec::new(),
            next_category: 0,
            targets: BTreeMap::new(),
        }
    }
}

impl VendingRestocker {
    fn observe(&mut self, ctx: &AgentContext<'_>) {
        let Some((rec, result)) = last_ok(ctx) else { return };
        if let Some(cats) = result.get("categories").and_then(Value::as_array) {
            self.categories = cats.iter().filter_map(|c| c.as_str().map(String::from)).collect();
        }
        if rec.tool == "products_research" {
            let mut found: Vec<(String, f64)> = result["products"]
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(|p| Some((p["name"].as_str()?.to_string(), p["wholesale_price"].as_f64()?)))
                .collect();
            found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            for (name, cost) in found.into_iter().take(self.per_category) {
                if self.targets.len() < self.max_products {
                    self.targets.insert(name, cost);
                }
            }
        }
    }

    fn restock_order(&self, state: &Value) -> Option<Value> {
        let mut on_hand: BTreeMap<&str, u64> = BTreeMap::new();
        for (name, qty) in state["inventory"].as_object().into_iter().flatten() {
            *on_hand.entry(name.as_str()).or_default() += qty.as_u64().unwrap_or(0);
        }
        for order in state["pending_orders"].as_array().into_iter().flatten() {
            for line in order["items"].as_array().into_iter().flatten() {
                if let Some(name) = line["name"].as_str() {
                    *on_hand.entry(name).or_default() += line["quantity"].as_u64().unwrap_or(0);
                }
            }
        }
        let mut cash = num(state, "cash");
        let mut items = Vec::new();
        for (name, &cost) in &self.targets {
            let have = on_hand.get(name.as_str()).copied().unwrap_or(0);
            if have >= u64::from(self.reorder_point) {
                continue;
            }
            let want = u64::from(self.target_level) - have;
            let affordable = (cash / cost).floor().max(0.0) as u64;
            let qty = want.min(affordable);
            if qty > 0 {
                cash -= qty as f64 * cost;
                items.push(json!({"name": name, "quantity": qty}));
            }
        }
        (!items.is_empty()).then(|| json!({ "items": items }))
    }
}

impl AgentPort for VendingRestocker {
    fn name(&self) -> &str {
        "vending_restocker"
    }

    fn decide(&mut self, ctx: &AgentContext<'_>) -> Vec<ActionCall> {
        self.observe(ctx);
        if ctx.remaining_budget == 0 {
            return vec![ActionCall::task_done()];
        }
        let prices = ctx.state["prices"].as_object();
        let unpriced = self
            .targets
            .iter()
            .find(|(name, _)| prices.is_none_or(|p| !p.contains_key(name.as_str())));
        if let Some((name, cost)) = unpriced {
            let price = (cost * self.markup * 100.0).round() / 100.0;
            return vec![ActionCall::new("price_set", json!({"product_name": name, "price": price}))];
        }
        if let Some(args) = self.restock_order(ctx.state) {
            return vec![ActionCall::new("order_place", args)];
        }
        if self.targets.len() < self.max_products && self.next_category < self.categories.len() {
            let query = self.categories[self.next_category].clone();
            self.next_category += 1;
            return vec![ActionCall::new("products_research", json!({ "query": query }))];
        }
        vec![ActionCall::task_done()]
    }
}

#[derive(Debug, Clone)]
struct Posting {
    payment: f64,
    category: String,
    complexity: f64,
}

/// Works the best-paying task it can afford in energy, resting when tired
/// or stressed and sourcing new work when the board runs dry.
#[derive(Debug, Clone)]
pub struct FreelanceGreedy {
    pub energy_floor: f64,
    pub stress_ceiling: f64,
    /// Money kept back when paying for rest or paid sourcing.
    pub cash_reserve: f64,
    physio: PhysioParams,
    board: BTreeMap<String, Posting>,
    board_day: Option<u32>,
    questions: BTreeMap<String, String>,
    attempts: BTreeMap<String, u32>,
    given_up: BTreeSet<String>,
    free_used_day: Option<u32>,
}

impl Default for FreelanceGreedy {
    fn default() -> Self {
        Self {
            energy_floor: 30.0,
            stress_ceiling: 60.0,
            cash_reserve: 20.0,
            physio: PhysioParams::default(),
            board: BTreeMap::new(),
            board_day: None,
            questions: BTreeMap::new(),
            attempts: BTreeMap::new(),
            given_up: BTreeSet::new(),
            free_used_day: None,
        }
    }
}

impl FreelanceGreedy {
    fn observe(&mut self, ctx: &AgentContext<'_>) {
        let Some(rec) = ctx.window.last() else { return };
        let task_id = rec.args.get("task_id").and_then(Value::as_str).map(String::from);
        if let Some(err) = &rec.error {
            if let Some(id) = task_id {
                if err.code == crate::action::codes::UNKNOWN_TASK {
                    self.board.remove(&id);
                }
            }
            if rec.tool == "tasks_discover" && err.code == crate::action::codes::FREE_EXHAUSTED {
                self.free_used_day = Some(ctx.day);
            }
            return;
        }
        let Some(result) = &rec.result else { return };
        match rec.tool.as_str() {
            "tasks_browse" => {
                self.board = result
                    .as_array()
                    .into_iter()
                    .flatten()
                    .filter_map(|t| {
                        let id = t["task_id"].as_str()?.to_string();
                        let posting = Posting {
                            payment: t["estimated_payment"].as_f64()?,
                            category: t["category"].as_str()?.to_string(),
                            complexity: t["complexity"].as_f64()?,
                        };
                        Some((id, posting))
                    })
                    .collect();
                self.board_day = Some(ctx.day);
            }
            "task_inspect" => {
                if let (Some(id), Some(q)) = (task_id, result["question"].as_str()) {
                    self.questions.insert(id, q.to_string());
                }
            }
            "solution_submit" => {
                let id = task_id.unwrap_or_default();
                if result["is_success"].as_bool() == Some(true) {
                    self.board.remove(&id);
                    self.questions.remove(&id);
                } else {
                    let n = self.attempts.entry(id.clone()).or_insert(0);
                    *n += 1;
                    if *n >= 2 {
                        self.given_up.insert(id);
                    }
                }
            }
            "tasks_discover" => {
                if rec.args["refresh_type"] == "free" {
                    self.free_used_day = Some(ctx.day);
                }
                self.board_day = None;
            }
            _ => {}
        }
    }

    fn restore_level(&self, money: f64) -> Option<&'static str> {
        ["high", "medium", "low"]
            .into_iter()
            .find(|l| self.physio.restore_table.get(*l).is_some_and(|r| money - r.cost >= self.cash_reserve))
    }

    fn best_task(&self, state: &Value) -> Option<String> {
        let energy = num(state, "energy");
        let skills = &state["skills"];
        self.board
            .iter()
            .filter(|(id, _)| !self.given_up.contains(*id))
            .filter(|(_, p)| {
                let skill = skills.get(&p.category).and_then(Value::as_f64).unwrap_or(0.0);
                // small margin for the rounding in the listed complexity
                energy_cost(skill, p.complexity + 0.1, &self.physio) < energy - 1.0
            })
            .max_by(|a, b| a.1.payment.total_cmp(&b.1.payment).then(b.0.cmp(a.0)))
            .map(|(id, _)| id.clone())
    }
}

impl AgentPort for FreelanceGreedy {
    fn name(&self) -> &str {
        "freelance_greedy"
    }

    fn decide(&mut self, ctx: &AgentContext<'_>) -> Vec<ActionCall> {
        self.observe(ctx);
        if ctx.remaining_budget == 0 {
            return vec![ActionCall::task_done()];
        }
        let money = num(ctx.state, "money");
        let energy = num(ctx.state, "energy");
        let stress = num(ctx.state, "stress");
        if energy < self.energy_floor || stress > self.stress_ceiling {
            if let Some(level) = self.restore_level(money) {
                return vec![ActionCall::new("energy_restore", json!({ "level": level }))];
            }
        }
        if self.board_day != Some(ctx.day) {
            return vec![ActionCall::bare("tasks_browse")];
        }
        while let Some(id) = self.best_task(ctx.state) {
            let Some(question) = self.questions.get(&id) else {
                return vec![ActionCall::new("task_inspect", json!({ "task_id": id }))];
            };
            match solver::solve(question) {
                Some(answer) => {
                    return vec![ActionCall::new(
                        "solution_submit",
                        json!({"task_id": id, "solution_text": answer}),
                    )]
                }
                None => {
                    self.given_up.insert(id);
                }
            }
        }
        if self.free_used_day != Some(ctx.day) {
            return vec![ActionCall::new("tasks_discover", json!({"refresh_type": "free"}))];
        }
        let open = self.board.keys().filter(|id| !self.given_up.contains(*id)).count();
        if open == 0 && money - 10.0 >= 2.0 * self.cash_reserve {
            return vec![ActionCall::new("tasks_discover", json!({"refresh_type": "paid"}))];
        }
        vec![ActionCall::task_done()]
    }
}

/// Rule ladder over platform health: users, then creators, then quality,
/// otherwise engagement.
#[derive(Debug, Clone, Copy)]
pub struct OperationThreshold {
    pub dau_floor: f64,
    pub activity_floor: f64,
    pub quality_floor: f64,
}

impl Default for OperationThreshold {
    fn default() -> Self {
        Self {
            dau_floor: 300.0,
            activity_floor: 0.3,
            quality_floor: 0.45,
        }
    }
}

impl OperationThreshold {
    pub fn choose(&self, state: &Value) -> &'static str {
        if num(state, "dau") < self.dau_floor {
            "acquisition_boost"
        } else if num(state, "activity") < self.activity_floor {
            "creator_incentive"
        } else if num(state, "quality") < self.quality_floor {
            "moderation_tighten"
        } else {
            "engagement_tune"
        }
    }
}

impl AgentPort for OperationThreshold {
    fn name(&self) -> &str {
        "operation_threshold"
    }

    fn decide(&mut self, ctx: &AgentContext<'_>) -> Vec<ActionCall> {
        if ctx.remaining_budget == 0 {
            return vec![ActionCall::task_done()];
        }
        vec![ActionCall::bare(self.choose(ctx.state))]
    }
}

const AGENT_STREAM: &str = "agent";

/// Picks uniformly among well-formed calls it can build from what it has
/// seen, `task_done` included.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    rng: RngHub,
    /// Identifier-like strings harvested from observations.
    seen: BTreeSet<String>,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: RngHub::new(seed),
            seen: BTreeSet::new(),
        }
    }

    fn harvest(&mut self, v: &Value) {
        match v {
            Value::Object(m) => {
                for (k, child) in m {
                    if matches!(k.as_str(), "name" | "task_id" | "product_name" | "category") {
                        if let Some(s) = child.as_str() {
                            self.seen.insert(s.to_string());
                        }
                    }
                    self.harvest(child);
                }
            }
            Value::Array(items) => {
                for item in items {
                    if let Some(s) = item.as_str() {
                        self.seen.insert(s.to_string());
                    }
                    self.harvest(item);
                }
            }
            _ => {}
        }
    }

    fn pick<'a>(&mut self, options: &'a [&'a str]) -> &'a str {
        options[self.rng.int_inclusive(AGENT_STREAM, 0, options.len() as i64 - 1) as usize]
    }

    fn random_value(&mut self, ty: &ArgType) -> Value {
        match ty {
            ArgType::String => {
                if self.seen.is_empty() {
                    json!("a")
                } else {
                    let idx = self.rng.int_inclusive(AGENT_STREAM, 0, self.seen.len() as i64 - 1) as usize;
                    json!(self.seen.iter().nth(idx).expect("index in range"))
                }
            }
            ArgType::Number => json!((self.rng.uniform_range(AGENT_STREAM, 0.5, 20.0) * 100.0).round() / 100.0),
            ArgType::Integer => json!(self.rng.int_inclusive(AGENT_STREAM, 1, 20)),
            ArgType::Enum(options) => json!(self.pick(options)),
            ArgType::ObjectList(fields) => {
                let obj: serde_json::Map<String, Value> =
                    fields.iter().map(|(k, t)| (k.to_string(), self.random_value(t))).collect();
                json!([obj])
            }
        }
    }
}

impl AgentPort for RandomAgent {
    fn name(&self) -> &str {
        "random"
    }

    fn decide(&mut self, ctx: &AgentContext<'_>) -> Vec<ActionCall> {
        self.harvest(ctx.observation);
        let n = ctx.tools.len() as i64;
        let choice = self.rng.int_inclusive(AGENT_STREAM, 0, n) as usize;
        if ctx.remaining_budget == 0 || choice == ctx.tools.len() {
            return vec![ActionCall::task_done()];
        }
        let tool = &ctx.tools[choice];
        let args: serde_json::Map<String, Value> = tool
            .params
            .iter()
            .map(|(k, t)| (k.to_string(), self.random_value(t)))
            .collect();
        vec![ActionCall::new(tool.name, Value::Object(args))]
    }
}
