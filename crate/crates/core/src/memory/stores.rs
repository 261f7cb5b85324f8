use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::embed::cosine;

/// One raw interaction turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub step: u64,
    pub text: String,
    /// Structured tool output, when the turn carried one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_result: Option<Value>,
}

impl Turn {
    pub fn text(step: u64, text: impl Into<String>) -> Self {
        Self {
            step,
            text: text.into(),
            tool_result: None,
        }
    }

    pub fn from_record(rec: &crate::episode::TrajectoryRecord) -> Self {
        let outcome = match (&rec.result, &rec.error) {
            (Some(r), _) => r.to_string(),
            (None, Some(e)) => e.to_json().to_string(),
            (None, None) => String::new(),
        };
        Self {
            step: rec.step,
            text: format!("day {} step {}: {}({}) -> {}", rec.day, rec.step, rec.tool, rec.args, outcome),
            tool_result: rec.result.clone(),
        }
    }

    /// Rough token count, four characters per token.
    pub fn tokens(&self) -> usize {
        approx_tokens(&self.text)
    }
}

pub fn approx_tokens(s: &str) -> usize {
    s.chars().count().div_ceil(4)
}

/// Oldest-first queue bounded by turn count and approximate tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingMemory {
    pub capacity: usize,
    pub token_budget: usize,
    pub queue: VecDeque<Turn>,
}

impl WorkingMemory {
    pub fn new(capacity: usize, token_budget: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            token_budget,
            queue: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn tokens(&self) -> usize {
        self.queue.iter().map(Turn::tokens).sum()
    }

    /// Appends and returns whatever had to be evicted, oldest first. The
    /// newest turn is always kept even if it alone exceeds the token budget.
    pub fn push(&mut self, turn: Turn) -> Vec<Turn> {
        self.queue.push_back(turn);
        let mut evicted = Vec::new();
        while self.queue.len() > self.capacity || (self.queue.len() > 1 && self.tokens() > self.token_budget) {
            evicted.extend(self.queue.pop_front());
        }
        evicted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicEntry {
    pub value: Value,
    pub updated_step: u64,
}

/// Key-value scratchpad of current facts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SymbolicStore {
    pub entries: BTreeMap<String, SymbolicEntry>,
}

impl SymbolicStore {
    /// Writes `value` unless the stored entry is newer. Returns whether it
    /// was written.
    pub fn upsert(&mut self, key: &str, value: Value, step: u64) -> bool {
        match self.entries.get_mut(key) {
            Some(e) if e.updated_step > step => false,
            Some(e) => {
                e.value = value;
                e.updated_step = step;
                true
            }
            None => {
                self.entries.insert(key.to_string(), SymbolicEntry { value, updated_step: step });
                true
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key).map(|e| &e.value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodicItem {
    pub embedding: Vec<f64>,
    pub text: String,
    pub created_step: u64,
}

/// `cos * exp(-lambda * dt)`.
pub fn decayed_score(cos: f64, lambda: f64, dt: u64) -> f64 {
    cos * (-lambda * dt as f64).exp()
}

/// Time-decayed relevance of `item` to a query embedding at `now_step`.
/// Items from the future are treated as age zero.
pub fn episodic_score(query: &[f64], item: &EpisodicItem, now_step: u64, lambda: f64) -> f64 {
    let dt = now_step.saturating_sub(item.created_step);
    decayed_score(cosine(query, &item.embedding), lambda, dt)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EpisodicError {
    #[error("embedding has dimension {got}, store expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodicStore {
    pub dim: usize,
    pub lambda: f64,
    pub items: Vec<EpisodicItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scored<'a> {
    pub item: &'a EpisodicItem,
    pub score: f64,
}

impl EpisodicStore {
    pub fn new(dim: usize, lambda: f64) -> Self {
        Self {
            dim,
            lambda,
            items: Vec::new(),
        }
    }

    pub fn insert(&mut self, mut embedding: Vec<f64>, text: String, created_step: u64) -> Result<(), EpisodicError> {
        if embedding.len() != self.dim {
            return Err(EpisodicError::DimensionMismatch {
                expected: self.dim,
                got: embedding.len(),
            });
        }
        super::embed::normalize(&mut embedding);
        self.items.push(EpisodicItem {
            embedding,
            text,
            created_step,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Top `k` items by score; ties go to the newer item.
    pub fn retrieve(&self, query: &[f64], k: usize, now_step: u64) -> Vec<Scored<'_>> {
        let mut scored: Vec<Scored<'_>> = self
            .items
            .iter()
            .map(|item| Scored {
                item,
                score: episodic_score(query, item, now_step, self.lambda),
            })
            .collect();
        scored.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(b.item.created_step.cmp(&a.item.created_step))
        });
        scored.truncate(k);
        scored
    }
}
