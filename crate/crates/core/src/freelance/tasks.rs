//! Templated, machine-checkable freelance tasks.

use serde::{Deserialize, Serialize};

use crate::rng::RngHub;

pub const TASK_STREAM: &str = "tasks";
pub const CATEGORIES: [&str; 4] = ["quant", "coding", "stem", "legal"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreelanceTask {
    pub task_id: String,
    pub category: String,
    pub difficulty: f64,
    pub question: String,
    pub reference_answer: String,
    pub init_payment: f64,
    pub current_payment: f64,
    pub end_day: u32,
    pub init_effort: String,
}

pub fn init_payment(difficulty: f64) -> f64 {
    5.0 + 0.4 * difficulty
}

pub fn effort_label(difficulty: f64) -> &'static str {
    if difficulty < 34.0 {
        "low"
    } else if difficulty < 67.0 {
        "medium"
    } else {
        "high"
    }
}

/// Draws `n` tasks from `rng`'s task stream, numbering them from `next_id`.
pub fn draw_tasks(rng: &mut RngHub, n: usize, day: u32, next_id: &mut u64) -> Vec<FreelanceTask> {
    (0..n)
        .map(|_| {
            let id = *next_id;
            *next_id += 1;
            draw_task(rng, day, id)
        })
        .collect()
}

fn int(rng: &mut RngHub, lo: i64, hi: i64) -> i64 {
    rng.int_inclusive(TASK_STREAM, lo, hi)
}

fn draw_task(rng: &mut RngHub, day: u32, id: u64) -> FreelanceTask {
    let difficulty = rng.uniform_range(TASK_STREAM, 1.0, 100.0);
    let cat_idx = int(rng, 0, CATEGORIES.len() as i64 - 1) as usize;
    let variant = int(rng, 0, 1);
    // operand magnitude grows with difficulty
    let scale = 1 + (difficulty / 10.0) as i64;
    let (question, answer) = match (CATEGORIES[cat_idx], variant) {
        ("quant", 0) => {
            let p = 100 * int(rng, 1, 10 * scale);
            let r = int(rng, 1, 12);
            let n = int(rng, 1, 2 + scale);
            (
                format!(
                    "An account holds {p} dollars earning {r}% simple interest per year. \
                     How many dollars of interest accrue after {n} years?"
                ),
                (p * r * n / 100).to_string(),
            )
        }
        ("quant", _) => {
            let a = int(rng, 10, 500 * scale);
            let b = int(rng, 10, 500 * scale);
            (
                format!("A position is bought for {a} dollars and sold for {b} dollars. What is the profit in dollars?"),
                (b - a).to_string(),
            )
        }
        ("coding", 0) => {
            let n = int(rng, 2, 20 * scale);
            (
                format!("Given def f(n): return sum(i for i in range(n)), what does f({n}) return?"),
                (n * (n - 1) / 2).to_string(),
            )
        }
        ("coding", _) => {
            let a = int(rng, 0, 10 * scale);
            let b = a + int(rng, 1, 50 * scale);
            let s = int(rng, 1, 1 + scale);
            (
                format!("How many times does the body of the loop for i in range({a}, {b}, {s}) execute?"),
                ((b - a + s - 1) / s).to_string(),
            )
        }
        ("stem", 0) => {
            let v = int(rng, 10, 20 * scale);
            let h = int(rng, 1, 2 + scale);
            let d = v * h;
            (
                format!("A train covers {d} km in {h} hours. What is its average speed in km per hour?"),
                v.to_string(),
            )
        }
        ("stem", _) => {
            let w = int(rng, 2, 10 * scale);
            let h = int(rng, 2, 10 * scale);
            (
                format!("A rectangular plot measures {w} m by {h} m. What is its area in square meters?"),
                (w * h).to_string(),
            )
        }
        ("legal", 0) => {
            let a = int(rng, 1, 300);
            let b = int(rng, 7, 30 * scale);
            (
                format!(
                    "A lease is terminated by notice served on day {a} with a notice period of {b} days. \
                     On which day does the notice period end?"
                ),
                (a + b).to_string(),
            )
        }
        _ => {
            let f = 20 * int(rng, 1, 10 * scale);
            let p = 5 * int(rng, 1, 10);
            (
                format!(
                    "A statutory fine of {f} dollars is reduced by {p}% for early payment. \
                     How many dollars are paid?"
                ),
                (f * (100 - p) / 100).to_string(),
            )
        }
    };
    let window = int(rng, 3, 10) as u32;
    let pay = init_payment(difficulty);
    FreelanceTask {
        task_id: format!("T{id:05}"),
        category: CATEGORIES[cat_idx].to_string(),
        difficulty,
        question,
        reference_answer: answer,
        init_payment: pay,
        current_payment: pay,
        end_day: day + window,
        init_effort: effort_label(difficulty).to_string(),
    }
}

/// Standalone generator: `n` tasks for day `t` from a fresh seed.
pub fn generate_tasks(seed: u64, n: usize, t: u32) -> Result<Vec<FreelanceTask>, String> {
    if n == 0 {
        return Err("n must be >= 1".into());
    }
    let mut rng = RngHub::new(seed);
    let mut next = 1;
    Ok(draw_tasks(&mut rng, n, t, &mut next))
}
