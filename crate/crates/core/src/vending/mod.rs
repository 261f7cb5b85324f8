//! Retail economy: procurement with lead time, pricing, hidden seasonal and
//! price-elastic demand, net-worth accounting.

pub mod catalog;
pub mod demand;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::action::{codes, find_tool, ActionCall, ActionError, ArgType, ToolSpec};
use crate::rng::RngHub;
use crate::sim::FailureReason;

pub use catalog::{generate_catalog, Catalog, DemandGroup, DemandStructure, Product};
use demand::Offer;

pub const DEMAND_STREAM: &str = "demand";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VendingParams {
    pub initial_cash: f64,
    pub lead_time: u32,
    pub stagnation_limit: u32,
    pub demand_noise_sigma: f64,
    pub max_research_results: usize,
    pub n_categories: usize,
    pub skus_per_category: usize,
}

impl Default for VendingParams {
    fn default() -> Self {
        Self {
            initial_cash: 500.0,
            lead_time: 3,
            stagnation_limit: 10,
            demand_noise_sigma: 1.0,
            max_research_results: 10,
            n_categories: catalog::TIER_LARGE,
            skus_per_category: 17,
        }
    }
}

impl VendingParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.lead_time < 1 {
            return Err("lead_time must be >= 1".into());
        }
        if self.stagnation_limit < 1 {
            return Err("stagnation_limit must be >= 1".into());
        }
        if self.demand_noise_sigma < 0.0 || !self.demand_noise_sigma.is_finite() {
            return Err("demand_noise_sigma must be >= 0".into());
        }
        if self.n_categories < 1 || self.skus_per_category < 1 {
            return Err("catalog needs at least one category and one sku".into());
        }
        if !(self.initial_cash.is_finite()) {
            return Err("initial_cash must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderLine {
    pub name: String,
    pub quantity: u32,
    pub unit_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingOrder {
    pub items: Vec<OrderLine>,
    pub total_cost: f64,
    pub delivery_day: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VendingState {
    pub cash: f64,
    pub inventory: BTreeMap<String, u32>,
    pub prices: BTreeMap<String, f64>,
    pub pending_orders: Vec<PendingOrder>,
    pub no_sales_streak: u32,
    pub discovered: BTreeSet<String>,
}

impl VendingState {
    pub fn new(initial_cash: f64) -> Self {
        Self {
            cash: initial_cash,
            inventory: BTreeMap::new(),
            prices: BTreeMap::new(),
            pending_orders: Vec::new(),
            no_sales_streak: 0,
            discovered: BTreeSet::new(),
        }
    }

    pub fn stock(&self, name: &str) -> u32 {
        self.inventory.get(name).copied().unwrap_or(0)
    }
}

/// Outcome of one day's demand realization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SalesOutcome {
    pub units_sold: BTreeMap<String, u32>,
    pub revenue: f64,
    /// Wholesale value of the units that left inventory.
    pub cost_of_goods: f64,
}

pub const TOOLS: &[ToolSpec] = &[
    ToolSpec {
        name: "products_research",
        description: "Search the supplier catalog by product name or category keyword.",
        params: &[("query", ArgType::String)],
    },
    ToolSpec {
        name: "order_place",
        description: "Buy stock at wholesale. Paid immediately, delivered after the lead time.",
        params: &[(
            "items",
            ArgType::ObjectList(&[("name", ArgType::String), ("quantity", ArgType::Integer)]),
        )],
    },
    ToolSpec {
        name: "price_set",
        description: "Set the retail price of a product.",
        params: &[("product_name", ArgType::String), ("price", ArgType::Number)],
    },
    ToolSpec {
        name: "price_query",
        description: "Read the current retail price of a product.",
        params: &[("product_name", ArgType::String)],
    },
];

#[derive(Debug, Clone)]
pub struct VendingEnv {
    pub params: VendingParams,
    pub catalog: Arc<Catalog>,
    pub physics: Arc<DemandStructure>,
    pub state: VendingState,
    wholesale: BTreeMap<String, f64>,
}

impl VendingEnv {
    pub fn new(params: VendingParams, seed: u64) -> Self {
        let (catalog, physics) =
            generate_catalog(seed, params.n_categories, params.skus_per_category);
        Self::with_market(params, Arc::new(catalog), Arc::new(physics))
    }

    pub fn with_market(
        params: VendingParams,
        catalog: Arc<Catalog>,
        physics: Arc<DemandStructure>,
    ) -> Self {
        let wholesale = catalog
            .products
            .iter()
            .map(|p| (p.name.clone(), p.wholesale_price))
            .collect();
        let state = VendingState::new(params.initial_cash);
        Self {
            params,
            catalog,
            physics,
            state,
            wholesale,
        }
    }

    pub fn tools() -> &'static [ToolSpec] {
        TOOLS
    }

    fn product(&self, name: &str) -> Result<&Product, ActionError> {
        self.catalog
            .find(name)
            .ok_or_else(|| ActionError::new(codes::UNKNOWN_PRODUCT, format!("no product named `{name}`")))
    }

    pub fn products_research(&mut self, query: &str) -> Result<Value, ActionError> {
        let q = query.trim().to_lowercase();
        if q.is_empty() {
            return Err(ActionError::new(codes::QUERY_REQUIRED, "query must not be empty"));
        }
        let hits: Vec<&Product> = self
            .catalog
            .products
            .iter()
            .filter(|p| p.name.to_lowercase().contains(&q) || p.category.to_lowercase().contains(&q))
            .take(self.params.max_research_results)
            .collect();
        for p in &hits {
            self.state.discovered.insert(p.name.clone());
        }
        let products: Vec<Value> = hits
            .iter()
            .map(|p| json!({"name": p.name, "category": p.category, "wholesale_price": p.wholesale_price}))
            .collect();
        Ok(json!({"query": query, "products": products}))
    }

    /// Pay now, receive `lead_time` days later. Rejected orders leave the
    /// state untouched.
    pub fn order_place(&mut self, items: &[(String, i64)], day: u32) -> Result<Value, ActionError> {
        if items.is_empty() {
            return Err(ActionError::new(codes::INVALID_QUANTITY, "order has no items"));
        }
        let mut lines = Vec::with_capacity(items.len());
        for (name, qty) in items {
            let product = self.product(name)?;
            if *qty <= 0 || *qty > i64::from(u32::MAX) {
                return Err(ActionError::new(
                    codes::INVALID_QUANTITY,
                    format!("quantity for `{name}` must be a positive integer"),
                ));
            }
            lines.push(OrderLine {
                name: product.name.clone(),
                quantity: *qty as u32,
                unit_cost: product.wholesale_price,
            });
        }
        let total_cost: f64 = lines.iter().map(|l| f64::from(l.quantity) * l.unit_cost).sum();
        if self.state.cash < total_cost {
            return Err(ActionError::new(
                codes::INSUFFICIENT_FUNDS,
                format!("order costs {total_cost:.2} but cash is {:.2}", self.state.cash),
            ));
        }
        self.state.cash -= total_cost;
        let order = PendingOrder {
            items: lines,
            total_cost,
            delivery_day: day + self.params.lead_time,
        };
        let response = json!({
            "status": "ok",
            "order": {
                "total_cost": order.total_cost,
                "delivery_day": order.delivery_day,
                "items": order.items,
            },
            "cash": self.state.cash,
        });
        self.state.pending_orders.push(order);
        Ok(response)
    }

    pub fn price_set(&mut self, name: &str, price: f64) -> Result<Value, ActionError> {
        let product = self.product(name)?.name.clone();
        if !(price > 0.0) || !price.is_finite() {
            return Err(ActionError::new(codes::INVALID_PRICE, "price must be a positive number"));
        }
        self.state.prices.insert(product.clone(), price);
        Ok(json!({"status": "ok", "product_name": product, "price": price}))
    }

    pub fn price_query(&self, name: &str) -> Result<Value, ActionError> {
        let product = &self.product(name)?.name;
        Ok(json!({"product_name": product, "price": self.state.prices.get(product)}))
    }

    pub fn apply(&mut self, call: &ActionCall, day: u32) -> Result<Value, ActionError> {
        find_tool(TOOLS, &call.tool)?.validate(&call.args)?;
        let args = &call.args;
        match call.tool.as_str() {
            "products_research" => self.products_research(args["query"].as_str().unwrap_or_default()),
            "order_place" => {
                let items: Vec<(String, i64)> = args["items"]
                    .as_array()
                    .map(|a| {
                        a.iter()
                            .map(|it| {
                                (
                                    it["name"].as_str().unwrap_or_default().to_string(),
                                    it["quantity"].as_i64().unwrap_or(0),
                                )
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                self.order_place(&items, day)
            }
            "price_set" => self.price_set(
                args["product_name"].as_str().unwrap_or_default(),
                args["price"].as_f64().unwrap_or(f64::NAN),
            ),
            "price_query" => self.price_query(args["product_name"].as_str().unwrap_or_default()),
            _ => unreachable!("tool validated above"),
        }
    }

    fn wholesale(&self, name: &str) -> f64 {
        self.wholesale.get(name).copied().unwrap_or(0.0)
    }

    fn group_offers(&self, group: &DemandGroup) -> Vec<(String, Offer)> {
        let markup = group.price_sensitivity.reference_markup;
        self.catalog
            .products
            .iter()
            .filter(|p| group.contains_category(&p.category))
            .map(|p| {
                (
                    p.name.clone(),
                    Offer {
                        price: self.state.prices.get(&p.name).copied(),
                        reference_price: p.wholesale_price * markup,
                        stock: self.state.stock(&p.name),
                    },
                )
            })
            .collect()
    }

    /// Realize day `t` demand against current prices and stock.
    pub fn realize_sales(&mut self, t: u32, rng: &mut RngHub) -> SalesOutcome {
        let mut out = SalesOutcome::default();
        let sigma = self.params.demand_noise_sigma;
        let physics = Arc::clone(&self.physics);
        for group in &physics.groups {
            let named = self.group_offers(group);
            let offers: Vec<Offer> = named.iter().map(|(_, o)| *o).collect();
            let ps = &group.price_sensitivity;
            let expected = demand::expected_group_sales(
                group.base_demand,
                &group.seasonality,
                ps.beta,
                ps.epsilon,
                ps.reference_markup,
                &offers,
                t,
            );
            for ((name, offer), exp) in named.iter().zip(expected) {
                if !offer.in_market() {
                    continue;
                }
                let noise = rng.gaussian(DEMAND_STREAM, 0.0, sigma);
                let sold = demand::realize_units(exp, noise, offer.stock);
                if sold == 0 {
                    continue;
                }
                let price = offer.price.expect("in-market offers are priced");
                *self.state.inventory.get_mut(name).expect("in-stock item") -= sold;
                out.revenue += f64::from(sold) * price;
                out.cost_of_goods += f64::from(sold) * self.wholesale(name);
                out.units_sold.insert(name.clone(), sold);
            }
        }
        self.state.inventory.retain(|_, q| *q > 0);
        self.state.cash += out.revenue;
        if out.units_sold.is_empty() {
            self.state.no_sales_streak += 1;
        } else {
            self.state.no_sales_streak = 0;
        }
        out
    }

    /// Move orders due on day `t` into inventory.
    pub fn settle_logistics(&mut self, t: u32) -> Vec<PendingOrder> {
        let (due, waiting): (Vec<_>, Vec<_>) = std::mem::take(&mut self.state.pending_orders)
            .into_iter()
            .partition(|o| o.delivery_day == t);
        self.state.pending_orders = waiting;
        for order in &due {
            for line in &order.items {
                *self.state.inventory.entry(line.name.clone()).or_insert(0) += line.quantity;
            }
        }
        due
    }

    /// Cash plus inventory at wholesale plus undelivered orders at cost.
    pub fn net_worth(&self) -> f64 {
        let inventory: f64 = self
            .state
            .inventory
            .iter()
            .map(|(name, q)| f64::from(*q) * self.wholesale(name))
            .sum();
        let pending: f64 = self.state.pending_orders.iter().map(|o| o.total_cost).sum();
        self.state.cash + inventory + pending
    }

    pub fn failure(&self) -> Option<FailureReason> {
        (self.state.cash <= 0.0 && self.state.no_sales_streak >= self.params.stagnation_limit)
            .then_some(FailureReason::Bankruptcy)
    }

    /// Sales for the day that just ended, then deliveries due on the next day.
    pub fn end_of_day(&mut self, completed_day: u32, rng: &mut RngHub) -> Value {
        let sales = self.realize_sales(completed_day, rng);
        let deliveries = self.settle_logistics(completed_day + 1);
        self.daily_report(completed_day, &sales, &deliveries)
    }

    pub fn daily_report(&self, day: u32, sales: &SalesOutcome, deliveries: &[PendingOrder]) -> Value {
        json!({
            "day": day,
            "cash": self.state.cash,
            "net_worth": self.net_worth(),
            "units_sold": sales.units_sold,
            "revenue": sales.revenue,
            "deliveries": deliveries,
            "inventory": self.state.inventory,
            "no_sales_streak": self.state.no_sales_streak,
        })
    }

    pub fn initial_observation(&self, day: u32) -> Value {
        json!({
            "day": day,
            "cash": self.state.cash,
            "net_worth": self.net_worth(),
            "categories": self.catalog.categories(),
            "lead_time_days": self.params.lead_time,
        })
    }

    /// Everything an agent is allowed to see.
    pub fn visible_state(&self) -> Value {
        json!({
            "cash": self.state.cash,
            "net_worth": self.net_worth(),
            "inventory": self.state.inventory,
            "prices": self.state.prices,
            "pending_orders": self.state.pending_orders,
            "no_sales_streak": self.state.no_sales_streak,
            "discovered_count": self.state.discovered.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vending::catalog::{MemberRule, PriceSensitivity, Seasonality};

    fn tiny_market(sigma: f64) -> VendingEnv {
        let catalog = Catalog {
            products: vec![
                Product {
                    name: "Cola Can".into(),
                    category: "beverages".into(),
                    wholesale_price: 2.0,
                },
                Product {
                    name: "Lemon Soda".into(),
                    category: "beverages".into(),
                    wholesale_price: 2.0,
                },
            ],
        };
        let physics = DemandStructure {
            version: "1.0".into(),
            notes: String::new(),
            groups: vec![DemandGroup {
                id: "g00".into(),
                name: "beverages".into(),
                members: MemberRule {
                    match_on: "category".into(),
                    values: vec!["beverages".into()],
                },
                base_demand: 10.0,
                seasonality: Seasonality {
                    period: 30,
                    phi: 0.0,
                    amp: 0.0,
                },
                price_sensitivity: PriceSensitivity {
                    beta: 5.0,
                    epsilon: -1.0,
                    reference_markup: 1.0,
                },
            }],
            relations: vec![],
        };
        let params = VendingParams {
            initial_cash: 100.0,
            demand_noise_sigma: sigma,
            ..VendingParams::default()
        };
        VendingEnv::with_market(params, Arc::new(catalog), Arc::new(physics))
    }

    #[test]
    fn research_matches_substring_oracle() {
        let mut env = VendingEnv::new(VendingParams::default(), 4);
        let out = env.products_research("cola").unwrap();
        let oracle: Vec<&Product> = env
            .catalog
            .products
            .iter()
            .filter(|p| {
                p.name.to_lowercase().find("cola").is_some()
                    || p.category.to_lowercase().find("cola").is_some()
            })
            .take(10)
            .collect();
        let got = out["products"].as_array().unwrap();
        assert_eq!(got.len(), oracle.len());
        assert!(got.iter().any(|p| p["name"] == "Cola Can" && p["category"] == "beverages"));
        for (g, o) in got.iter().zip(oracle) {
            assert_eq!(g["name"], o.name.as_str());
            assert_eq!(g["wholesale_price"], o.wholesale_price);
        }
        assert!(env.state.discovered.contains("Cola Can"));

        assert_eq!(env.products_research("zzz-no-match").unwrap()["products"], json!([]));
        assert_eq!(env.products_research("").unwrap_err().code, codes::QUERY_REQUIRED);
    }

    #[test]
    fn order_deducts_cash_and_schedules_delivery() {
        let mut env = tiny_market(0.0);
        let r = env.order_place(&[("Cola Can".into(), 10)], 5).unwrap();
        assert_eq!(env.state.cash, 80.0);
        assert_eq!(r["order"]["delivery_day"], 8);
        assert_eq!(r["order"]["total_cost"], 20.0);
        assert_eq!(env.net_worth(), 100.0);
    }

    #[test]
    fn rejected_orders_leave_state_identical() {
        let mut env = tiny_market(0.0);
        env.state.cash = 10.0;
        let before = env.state.clone();
        let e = env.order_place(&[("Cola Can".into(), 10)], 1).unwrap_err();
        assert_eq!(e.code, codes::INSUFFICIENT_FUNDS);
        assert_eq!(env.state, before);
        assert_eq!(
            env.order_place(&[("Cola Can".into(), 0)], 1).unwrap_err().code,
            codes::INVALID_QUANTITY
        );
        assert_eq!(
            env.order_place(&[("Moon Rock".into(), 1)], 1).unwrap_err().code,
            codes::UNKNOWN_PRODUCT
        );
        assert_eq!(env.state, before);
    }

    #[test]
    fn pricing_last_write_wins() {
        let mut env = tiny_market(0.0);
        assert_eq!(env.price_query("Cola Can").unwrap()["price"], Value::Null);
        let r = env.price_set("Cola Can", 1.5).unwrap();
        assert_eq!(r, json!({"status": "ok", "product_name": "Cola Can", "price": 1.5}));
        env.price_set("Cola Can", 2.0).unwrap();
        assert_eq!(env.price_query("Cola Can").unwrap()["price"], 2.0);
        assert_eq!(env.price_set("Cola Can", -1.0).unwrap_err().code, codes::INVALID_PRICE);
        assert_eq!(env.price_query("Nope").unwrap_err().code, codes::UNKNOWN_PRODUCT);
    }

    #[test]
    fn sales_round_half_away_and_clamp_to_stock() {
        // one member in market: share 1, total = 10 * (4/2)^-1 = 5
        let mut env = tiny_market(0.0);
        env.state.inventory.insert("Cola Can".into(), 10);
        env.state.prices.insert("Cola Can".into(), 4.0);
        let mut rng = RngHub::new(0);
        let out = env.realize_sales(1, &mut rng);
        assert_eq!(out.units_sold["Cola Can"], 5);
        assert_eq!(out.revenue, 20.0);

        // two equal members: share 0.5 each of total 5 -> round(2.5) = 3
        let mut env = tiny_market(0.0);
        for n in ["Cola Can", "Lemon Soda"] {
            env.state.inventory.insert(n.into(), 10);
            env.state.prices.insert(n.into(), 4.0);
        }
        let out = env.realize_sales(1, &mut rng);
        assert_eq!(out.units_sold["Cola Can"], 3);
        assert_eq!(out.units_sold["Lemon Soda"], 3);
        assert_eq!(env.state.stock("Cola Can"), 7);

        let mut env = tiny_market(0.0);
        env.state.inventory.insert("Cola Can".into(), 1);
        env.state.prices.insert("Cola Can".into(), 4.0);
        let out = env.realize_sales(1, &mut rng);
        assert_eq!(out.units_sold["Cola Can"], 1);
        assert!(env.state.inventory.get("Cola Can").is_none());
    }

    #[test]
    fn unpriced_items_do_not_sell() {
        let mut env = tiny_market(0.0);
        env.state.inventory.insert("Cola Can".into(), 10);
        let out = env.realize_sales(1, &mut RngHub::new(0));
        assert!(out.units_sold.is_empty());
        assert_eq!(env.state.no_sales_streak, 1);
    }

    #[test]
    fn logistics_settles_only_due_orders() {
        let mut env = tiny_market(0.0);
        env.order_place(&[("Cola Can".into(), 2)], 1).unwrap();
        env.order_place(&[("Cola Can".into(), 3)], 1).unwrap();
        env.order_place(&[("Lemon Soda".into(), 1)], 2).unwrap();
        assert!(env.settle_logistics(3).is_empty());
        let due = env.settle_logistics(4);
        assert_eq!(due.len(), 2);
        assert_eq!(env.state.stock("Cola Can"), 5);
        assert_eq!(env.state.pending_orders.len(), 1);
    }

    #[test]
    fn net_worth_sums_components() {
        let mut env = tiny_market(0.0);
        env.state.cash = 100.0;
        env.state.inventory.insert("Cola Can".into(), 25);
        env.state.pending_orders.push(PendingOrder {
            items: vec![],
            total_cost: 25.0,
            delivery_day: 9,
        });
        assert_eq!(env.net_worth(), 175.0);

        let mut fresh = VendingEnv::new(VendingParams::default(), 1);
        assert_eq!(fresh.net_worth(), 500.0);
        let name = fresh.catalog.products[0].name.clone();
        let w = fresh.catalog.products[0].wholesale_price;
        let qty = (20.0 / w).floor() as i64;
        fresh.order_place(&[(name, qty)], 1).unwrap();
        assert!((fresh.net_worth() - 500.0).abs() < 1e-9);
    }

    #[test]
    fn termination_needs_both_conditions() {
        let mut env = tiny_market(0.0);
        env.state.cash = 0.0;
        env.state.no_sales_streak = 10;
        assert_eq!(env.failure(), Some(FailureReason::Bankruptcy));
        env.state.no_sales_streak = 9;
        assert_eq!(env.failure(), None);
        env.state.cash = 1.0;
        env.state.no_sales_streak = 10_000;
        assert_eq!(env.failure(), None);
    }

    #[test]
    fn daily_report_is_consistent() {
        let mut env = tiny_market(0.0);
        env.order_place(&[("Cola Can".into(), 4)], 1).unwrap();
        let mut rng = RngHub::new(0);
        let r = env.end_of_day(1, &mut rng);
        assert_eq!(r["revenue"], 0.0);
        assert_eq!(r["no_sales_streak"], 1);
        assert_eq!(r["net_worth"], env.net_worth());
        assert_eq!(r["deliveries"], json!([]));
        env.end_of_day(2, &mut rng);
        let r = env.end_of_day(3, &mut rng);
        assert_eq!(r["deliveries"][0]["items"][0]["name"], "Cola Can");
        assert_eq!(r["inventory"]["Cola Can"], 4);
    }

    #[test]
    fn schema_violations_are_caught_before_dispatch() {
        let mut env = tiny_market(0.0);
        let call = ActionCall::new("price_set", json!({"product_name": "Cola Can", "price": "1.5"}));
        assert_eq!(env.apply(&call, 1).unwrap_err().code, codes::SCHEMA_VIOLATION);
        let call = ActionCall::new("teleport", json!({}));
        assert_eq!(env.apply(&call, 1).unwrap_err().code, codes::UNKNOWN_TOOL);
    }
}
