//! Elastic logit demand: seasonal base demand, group price elasticity,
//! softmax allocation across in-stock members, and noisy integer realization.

use std::f64::consts::TAU;

use super::catalog::Seasonality;

/// Seasonal base demand of a group on day `t`.
///
/// The day is reduced modulo the period before the phase is formed, which
/// makes `base_demand(t) == base_demand(t + T)` hold bit-for-bit.
pub fn base_demand(base: f64, season: &Seasonality, t: u32) -> f64 {
    assert!(season.period > 0, "seasonal period must be positive");
    let phase = TAU * f64::from(t % season.period) / f64::from(season.period) + season.phi;
    base * (1.0 + season.amp * phase.sin())
}

/// Scale base demand by `(avg_price / avg_ref)^eta`.
pub fn elasticity_adjust(base: f64, avg_price: f64, avg_ref: f64, eta: f64) -> f64 {
    debug_assert!(avg_price > 0.0 && avg_ref > 0.0);
    base * (avg_price / avg_ref).powf(eta)
}

/// One member of a group as seen by the share model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offer {
    /// Retail price, `None` while the item has never been priced.
    pub price: Option<f64>,
    pub reference_price: f64,
    pub stock: u32,
}

impl Offer {
    pub fn in_market(&self) -> bool {
        self.price.is_some() && self.stock > 0
    }
}

/// Softmax shares over utility `-beta * price / reference_price`, restricted
/// to priced, in-stock members. Everyone else gets exactly 0. Returns all
/// zeros when nobody is in the market.
pub fn market_share(beta: f64, offers: &[Offer]) -> Vec<f64> {
    let utils: Vec<Option<f64>> = offers
        .iter()
        .map(|o| match o.price {
            Some(p) if o.stock > 0 => Some(-beta * p / o.reference_price),
            _ => None,
        })
        .collect();
    let max = utils
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; offers.len()];
    }
    let weights: Vec<f64> = utils
        .iter()
        .map(|u| u.map_or(0.0, |u| (u - max).exp()))
        .collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

/// Integer units sold: `min(round(max(0, expected + noise)), stock)`, with
/// half-away-from-zero rounding.
pub fn realize_units(expected: f64, noise: f64, stock: u32) -> u32 {
    let raw = (expected + noise).max(0.0).round();
    if raw >= f64::from(stock) {
        stock
    } else {
        raw as u32
    }
}

/// Averages `(price, reference)` over priced members; `None` if none are.
pub fn price_averages(offers: &[Offer], markup: f64) -> Option<(f64, f64)> {
    let priced: Vec<(f64, f64)> = offers
        .iter()
        .filter_map(|o| o.price.map(|p| (p, o.reference_price)))
        .collect();
    if priced.is_empty() {
        return None;
    }
    let n = priced.len() as f64;
    let avg_p = priced.iter().map(|(p, _)| p).sum::<f64>() / n;
    let avg_ref = priced.iter().map(|(_, r)| r).sum::<f64>() / n * markup;
    Some((avg_p, avg_ref))
}

/// Noise-free expected units per member for one group on day `t`.
pub fn expected_group_sales(
    base: f64,
    season: &Seasonality,
    beta: f64,
    eta: f64,
    markup: f64,
    offers: &[Offer],
    t: u32,
) -> Vec<f64> {
    let Some((avg_p, avg_ref)) = price_averages(offers, markup) else {
        return vec![0.0; offers.len()];
    };
    let total = elasticity_adjust(base_demand(base, season, t), avg_p, avg_ref, eta);
    market_share(beta, offers)
        .into_iter()
        .map(|s| s * total)
        .collect()
}
