//! Synthetic product catalog and hidden market physics.
//!
//! The generated physics serialize to the `demand_structure.json` layout:
//! `version`, `notes`, `groups`, `relations`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::rng::RngHub;

/// Catalog tier sizes used for complexity studies.
pub const TIER_LARGE: usize = 37;
pub const TIER_MEDIUM: usize = 16;
pub const TIER_SMALL: usize = 8;

pub const BASE_DEMAND_RANGE: (f64, f64) = (4.0, 20.0);
pub const AMP_RANGE: (f64, f64) = (0.10, 0.80);
pub const PERIODS: [u32; 5] = [30, 45, 60, 75, 90];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Necessity,
    Daily,
    NonEssential,
}

impl Tier {
    pub fn for_index(i: usize) -> Self {
        match i % 3 {
            0 => Tier::Necessity,
            1 => Tier::Daily,
            _ => Tier::NonEssential,
        }
    }

    pub fn elasticity(self) -> f64 {
        match self {
            Tier::Necessity => -1.0,
            Tier::Daily => -2.0,
            Tier::NonEssential => -3.0,
        }
    }

    pub fn beta(self) -> f64 {
        match self {
            Tier::Necessity => 4.0,
            Tier::Daily => 5.3,
            Tier::NonEssential => 6.67,
        }
    }
}

// (category, typical wholesale price, item stems)
const CATEGORIES: &[(&str, f64, &[&str])] = &[
    ("beverages", 0.80, &["Cola Can", "Lemon Soda", "Iced Tea", "Ginger Ale"]),
    ("snacks", 1.10, &["Potato Chips", "Pretzels", "Corn Puffs", "Trail Mix"]),
    ("candy", 0.70, &["Gummy Bears", "Mint Roll", "Caramel Chew", "Lollipop"]),
    ("bread", 1.60, &["White Loaf", "Rye Bread", "Bagel Pack", "Dinner Rolls"]),
    ("dairy", 1.30, &["Whole Milk", "Yogurt Cup", "Cheddar Slice", "Butter Stick"]),
    ("alcohol", 4.50, &["Lager Bottle", "Red Wine", "Cider Can", "Pale Ale"]),
    ("rice", 2.20, &["Jasmine Rice", "Basmati Rice", "Brown Rice", "Sushi Rice"]),
    ("fruits", 1.20, &["Banana Bunch", "Apple Bag", "Orange Net", "Grape Punnet"]),
    ("ice cream", 2.40, &["Vanilla Tub", "Choco Cone", "Mango Bar", "Berry Sorbet"]),
    ("cereal", 2.80, &["Oat Flakes", "Corn Flakes", "Granola Box", "Muesli Mix"]),
    ("meat", 5.20, &["Chicken Breast", "Beef Mince", "Pork Chop", "Lamb Cutlet"]),
    ("chocolate", 1.40, &["Dark Bar", "Milk Chocolate", "Hazelnut Bar", "Truffle Box"]),
    ("household", 2.60, &["Dish Soap", "Paper Towel", "Trash Bags", "Sponge Pack"]),
    ("coffee", 3.90, &["Ground Coffee", "Coffee Beans", "Instant Coffee", "Cold Brew"]),
    ("energy drinks", 1.50, &["Volt Energy", "Taurine Shot", "Sugarfree Boost", "Guarana Can"]),
    ("eggs", 2.10, &["Egg Dozen", "Free Range Eggs", "Quail Eggs", "Egg Half Dozen"]),
    ("vegetables", 1.00, &["Carrot Bag", "Broccoli Head", "Spinach Pack", "Onion Net"]),
    ("cookies", 1.80, &["Oat Cookie", "Choc Chip Cookie", "Shortbread", "Ginger Snap"]),
    ("pasta", 1.30, &["Spaghetti", "Penne", "Fusilli", "Lasagne Sheets"]),
    ("juice", 1.70, &["Orange Juice", "Apple Juice", "Cranberry Juice", "Tomato Juice"]),
    ("frozen meals", 3.40, &["Frozen Pizza", "Fish Fingers", "Veggie Burger", "Frozen Dumplings"]),
    ("personal care", 2.90, &["Toothpaste", "Shampoo", "Hand Soap", "Deodorant"]),
    ("water", 0.40, &["Still Water", "Sparkling Water", "Mineral Water", "Spring Water"]),
    ("nuts", 2.70, &["Salted Peanuts", "Almond Pack", "Cashew Pack", "Pistachio Bag"]),
    ("canned goods", 1.10, &["Canned Beans", "Canned Tuna", "Canned Corn", "Tomato Can"]),
    ("tea", 2.30, &["Green Tea", "Black Tea", "Chamomile Tea", "Earl Grey"]),
    ("pet food", 3.10, &["Dog Kibble", "Cat Pouch", "Bird Seed", "Fish Flakes"]),
    ("baby care", 4.80, &["Baby Wipes", "Diaper Pack", "Baby Formula", "Baby Lotion"]),
    ("condiments", 1.50, &["Ketchup", "Mustard", "Mayonnaise", "Hot Sauce"]),
    ("seafood", 6.10, &["Salmon Fillet", "Shrimp Pack", "Cod Fillet", "Mussel Net"]),
    ("stationery", 1.90, &["Ballpoint Pen", "Notebook", "Sticky Notes", "Pencil Set"]),
    ("cooking oil", 3.30, &["Olive Oil", "Sunflower Oil", "Canola Oil", "Sesame Oil"]),
    ("spices", 1.20, &["Black Pepper", "Sea Salt", "Paprika", "Cinnamon"]),
    ("tobacco alternatives", 5.50, &["Nicotine Gum", "Herbal Pouch", "Nicotine Lozenge", "Vape Pod"]),
    ("batteries", 3.60, &["AA Battery", "AAA Battery", "9V Battery", "Coin Cell"]),
    ("deli", 3.00, &["Ham Slices", "Salami", "Turkey Slices", "Hummus Tub"]),
    ("bakery sweets", 2.00, &["Croissant", "Muffin", "Donut", "Cinnamon Roll"]),
];

const BRANDS: &[&str] = &[
    "", "Sunny", "Acme", "Prime", "Golden", "Valley", "Urban", "Nordic", "Royal", "Coastal",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub name: String,
    pub category: String,
    pub wholesale_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seasonality {
    #[serde(rename = "T")]
    pub period: u32,
    pub phi: f64,
    pub amp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSensitivity {
    pub beta: f64,
    pub epsilon: f64,
    pub reference_markup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRule {
    #[serde(rename = "match")]
    pub match_on: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandGroup {
    pub id: String,
    pub name: String,
    pub members: MemberRule,
    pub base_demand: f64,
    pub seasonality: Seasonality,
    pub price_sensitivity: PriceSensitivity,
}

impl DemandGroup {
    pub fn contains_category(&self, category: &str) -> bool {
        self.members.values.iter().any(|c| c == category)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Complement,
    Competition,
    Independent,
}

/// Cross-group relation. Stored for completeness; no demand equation uses it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub a: String,
    pub b: String,
    #[serde(rename = "type")]
    pub kind: RelationKind,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandStructure {
    pub version: String,
    pub notes: String,
    pub groups: Vec<DemandGroup>,
    pub relations: Vec<Relation>,
}

impl DemandStructure {
    pub fn group_for_category(&self, category: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.contains_category(category))
    }

    /// Checks every group parameter against the synthesis ranges.
    pub fn validate_ranges(&self) -> Result<(), String> {
        for g in &self.groups {
            let b = g.base_demand;
            if !(BASE_DEMAND_RANGE.0..=BASE_DEMAND_RANGE.1).contains(&b) {
                return Err(format!("{}: base_demand {b} out of range", g.id));
            }
            let ps = &g.price_sensitivity;
            if !(4.0..=6.67).contains(&ps.beta) {
                return Err(format!("{}: beta {} out of range", g.id, ps.beta));
            }
            if ![-1.0, -2.0, -3.0].contains(&ps.epsilon) {
                return Err(format!("{}: epsilon {} not a tier value", g.id, ps.epsilon));
            }
            if ps.reference_markup != 1.0 {
                return Err(format!("{}: reference_markup must be 1.0", g.id));
            }
            let s = &g.seasonality;
            if !(30..=90).contains(&s.period) {
                return Err(format!("{}: T {} out of range", g.id, s.period));
            }
            if !(0.0..=TAU).contains(&s.phi) {
                return Err(format!("{}: phi {} out of range", g.id, s.phi));
            }
            if !(AMP_RANGE.0..=AMP_RANGE.1).contains(&s.amp) {
                return Err(format!("{}: amp {} out of range", g.id, s.amp));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub products: Vec<Product>,
}

impl Catalog {
    pub fn categories(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for p in &self.products {
            if !out.contains(&p.category) {
                out.push(p.category.clone());
            }
        }
        out
    }

    pub fn find(&self, name: &str) -> Option<&Product> {
        self.products
            .iter()
            .find(|p| p.name == name)
            .or_else(|| self.products.iter().find(|p| p.name.eq_ignore_ascii_case(name)))
    }
}

fn category_name(i: usize) -> String {
    let (name, _, _) = CATEGORIES[i % CATEGORIES.len()];
    let round = i / CATEGORIES.len();
    if round == 0 {
        name.to_string()
    } else {
        format!("{name} {}", round + 1)
    }
}

fn product_name(stem: &str, variant: usize, stems: usize) -> String {
    let brand_idx = variant / stems;
    let base = if brand_idx < BRANDS.len() {
        let brand = BRANDS[brand_idx];
        if brand.is_empty() {
            stem.to_string()
        } else {
            format!("{brand} {stem}")
        }
    } else {
        format!("{stem} No.{}", brand_idx)
    };
    base
}

fn round_cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

const STREAM: &str = "catalog";

/// Build a catalog with one demand group per category.
///
/// Group parameters are drawn uniformly inside the synthesis ranges; the
/// tier (and with it elasticity and within-group competition) rotates by
/// category index.
pub fn generate_catalog(
    seed: u64,
    n_categories: usize,
    skus_per_category: usize,
) -> (Catalog, DemandStructure) {
    assert!(n_categories >= 1, "need at least one category");
    assert!(skus_per_category >= 1, "need at least one sku per category");
    let mut rng = RngHub::new(seed);
    let mut products = Vec::with_capacity(n_categories * skus_per_category);
    let mut groups = Vec::with_capacity(n_categories);

    for ci in 0..n_categories {
        let (_, typical_price, stems) = CATEGORIES[ci % CATEGORIES.len()];
        let category = category_name(ci);
        let suffix = if ci >= CATEGORIES.len() {
            format!(" ({category})")
        } else {
            String::new()
        };
        for k in 0..skus_per_category {
            let stem = stems[k % stems.len()];
            let price = round_cents(typical_price * rng.uniform_range(STREAM, 0.6, 1.6)).max(0.05);
            products.push(Product {
                name: format!("{}{suffix}", product_name(stem, k, stems.len())),
                category: category.clone(),
                wholesale_price: price,
            });
        }

        let tier = Tier::for_index(ci);
        let period_idx = rng.int_inclusive(STREAM, 0, PERIODS.len() as i64 - 1) as usize;
        groups.push(DemandGroup {
            id: format!("g{ci:02}"),
            name: category.clone(),
            members: MemberRule {
                match_on: "category".into(),
                values: vec![category],
            },
            base_demand: rng.uniform_range(STREAM, BASE_DEMAND_RANGE.0, BASE_DEMAND_RANGE.1),
            seasonality: Seasonality {
                period: PERIODS[period_idx],
                phi: rng.uniform_range(STREAM, 0.0, TAU),
                amp: rng.uniform_range(STREAM, AMP_RANGE.0, AMP_RANGE.1),
            },
            price_sensitivity: PriceSensitivity {
                beta: tier.beta(),
                epsilon: tier.elasticity(),
                reference_markup: 1.0,
            },
        });
    }

    let mut relations = Vec::new();
    for _ in 0..n_categories / 4 {
        let a = rng.int_inclusive(STREAM, 0, n_categories as i64 - 1) as usize;
        let b = rng.int_inclusive(STREAM, 0, n_categories as i64 - 1) as usize;
        if a == b {
            continue;
        }
        let kind = match rng.int_inclusive(STREAM, 0, 2) {
            0 => RelationKind::Complement,
            1 => RelationKind::Competition,
            _ => RelationKind::Independent,
        };
        relations.push(Relation {
            a: groups[a].id.clone(),
            b: groups[b].id.clone(),
            kind,
            strength: rng.uniform(STREAM),
        });
    }

    let structure = DemandStructure {
        version: "1.0".into(),
        notes: format!(
            "synthetic market: {n_categories} categories x {skus_per_category} skus, seed {seed}"
        ),
        groups,
        relations,
    };
    (Catalog { products }, structure)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tier_sizes() {
        for n in [TIER_LARGE, TIER_MEDIUM, TIER_SMALL] {
            let (cat, ds) = generate_catalog(1, n, 5);
            assert_eq!(ds.groups.len(), n);
            assert_eq!(cat.categories().len(), n);
            ds.validate_ranges().unwrap();
        }
    }

    #[test]
    fn deterministic_json() {
        let a = generate_catalog(99, 8, 6);
        let b = generate_catalog(99, 8, 6);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = generate_catalog(100, 8, 6);
        assert_ne!(a, c);
    }

    #[test]
    fn names_are_unique_and_every_sku_has_one_group() {
        let (cat, ds) = generate_catalog(5, 40, 17);
        let mut names: Vec<&str> = cat.products.iter().map(|p| p.name.as_str()).collect();
        names.sort();
        let before = names.len();
        names.dedup();
        assert_eq!(before, names.len());
        for p in &cat.products {
            let hits = ds.groups.iter().filter(|g| g.contains_category(&p.category)).count();
            assert_eq!(hits, 1, "{}", p.name);
        }
    }

    #[test]
    fn tiers_rotate() {
        let (_, ds) = generate_catalog(2, 6, 1);
        let eps: Vec<f64> = ds.groups.iter().map(|g| g.price_sensitivity.epsilon).collect();
        assert_eq!(eps, [-1.0, -2.0, -3.0, -1.0, -2.0, -3.0]);
        let betas: Vec<f64> = ds.groups.iter().map(|g| g.price_sensitivity.beta).collect();
        assert_eq!(betas, [4.0, 5.3, 6.67, 4.0, 5.3, 6.67]);
    }

    #[test]
    fn demand_structure_keys() {
        let (_, ds) = generate_catalog(3, 8, 2);
        let v = serde_json::to_value(&ds).unwrap();
        let top: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(top, ["groups", "notes", "relations", "version"]);
        let g = &v["groups"][0];
        for key in ["id", "name", "members", "base_demand", "seasonality", "price_sensitivity"] {
            assert!(g.get(key).is_some(), "{key}");
        }
        for key in ["T", "phi", "amp"] {
            assert!(g["seasonality"].get(key).is_some(), "{key}");
        }
        for key in ["beta", "epsilon", "reference_markup"] {
            assert!(g["price_sensitivity"].get(key).is_some(), "{key}");
        }
        let back: DemandStructure = serde_json::from_value(v).unwrap();
        assert_eq!(back, ds);
    }
}
