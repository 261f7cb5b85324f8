//! Three-tier agent memory: a bounded working queue, a symbolic fact table
//! and a time-decayed episodic store.
//!
//! When the three disagree the symbolic table is trusted first, then
//! working memory, then episodic recall.

mod embed;
mod stores;

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use embed::{cosine, norm, Embedder, HeadSummarizer, Summarizer, TrigramEmbedder, DEFAULT_DIM};
pub use stores::{
    approx_tokens, decayed_score, episodic_score, EpisodicError, EpisodicItem, EpisodicStore, Scored, SymbolicEntry,
    SymbolicStore, Turn, WorkingMemory,
};

pub const DEFAULT_LAMBDA: f64 = 0.05;

/// Tool-result keys copied into the symbolic table.
pub const TRACKED_KEYS: &[&str] = &[
    "activity",
    "cash",
    "current_balance",
    "current_pool_size",
    "current_stress",
    "dau",
    "day",
    "energy",
    "engagement",
    "income",
    "money",
    "net_worth",
    "no_sales_streak",
    "pool_size",
    "quality",
    "revenue",
    "skill_avg",
    "stress",
    "units_sold",
    "volume",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryConfig {
    pub working_capacity: usize,
    pub working_token_budget: usize,
    pub lambda: f64,
    pub retrieve_k: usize,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            working_capacity: 16,
            working_token_budget: 4096,
            lambda: DEFAULT_LAMBDA,
            retrieve_k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MemoryError {
    #[error("budget_too_small: symbolic table needs {needed} tokens, budget is {budget}")]
    BudgetTooSmall { needed: usize, budget: usize },
    #[error(transparent)]
    Episodic(#[from] EpisodicError),
    #[error("bad memory dump: {0}")]
    BadDump(String),
}

impl MemoryError {
    pub fn code(&self) -> &'static str {
        match self {
            MemoryError::BudgetTooSmall { .. } => "budget_too_small",
            MemoryError::Episodic(_) => "dimension_mismatch",
            MemoryError::BadDump(_) => "bad_dump",
        }
    }
}

/// Subtrees holding deltas rather than levels.
const SKIPPED_SUBTREES: &[&str] = &["changes"];

/// Rule-based extractor: collects tracked scalar fields from a tool result.
/// Shallower occurrences win over nested ones. Turns without a structured
/// object produce an empty delta.
pub fn extract_state(turn: &Turn) -> BTreeMap<String, Value> {
    let mut delta = BTreeMap::new();
    let Some(root) = turn.tool_result.as_ref().filter(|v| v.is_object()) else {
        log::debug!("no structured payload at step {}; nothing extracted", turn.step);
        return delta;
    };
    let mut frontier: VecDeque<&Value> = VecDeque::from([root]);
    while let Some(v) = frontier.pop_front() {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let scalar = matches!(child, Value::Number(_) | Value::String(_) | Value::Bool(_));
                    if scalar && TRACKED_KEYS.contains(&k.as_str()) {
                        delta.entry(k.clone()).or_insert_with(|| child.clone());
                    } else if child.is_object() && !SKIPPED_SUBTREES.contains(&k.as_str()) {
                        frontier.push_back(child);
                    }
                }
            }
            _ => unreachable!("only objects are queued"),
        }
    }
    delta
}

/// One recalled memory in an assembled context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snippet {
    pub text: String,
    pub score: f64,
    pub created_step: u64,
    /// Symbolic keys this snippet mentions; the table's values override it.
    pub authoritative_keys: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextDocument {
    pub symbolic: Vec<(String, Value)>,
    pub working: Vec<String>,
    pub episodic: Vec<Snippet>,
}

const SYMBOLIC_HEADER: &str = "## Current state (authoritative)";
const WORKING_HEADER: &str = "## Recent turns";
const EPISODIC_HEADER: &str = "## Recalled experience (subordinate to current state)";

fn fact_line(key: &str, value: &Value) -> String {
    format!("| {key} | {value} |")
}

fn snippet_line(s: &Snippet, facts: &[(String, Value)]) -> String {
    if s.authoritative_keys.is_empty() {
        return format!("- {}", s.text);
    }
    let notes: Vec<String> = s
        .authoritative_keys
        .iter()
        .filter_map(|k| facts.iter().find(|(fk, _)| fk == k).map(|(_, v)| format!("{k}={v}")))
        .collect();
    format!("- {} [authoritative: {}]", s.text, notes.join(", "))
}

impl ContextDocument {
    pub fn render(&self) -> String {
        let mut out = vec![SYMBOLIC_HEADER.to_string(), "| key | value |".to_string()];
        out.extend(self.symbolic.iter().map(|(k, v)| fact_line(k, v)));
        out.push(WORKING_HEADER.to_string());
        out.extend(self.working.iter().cloned());
        out.push(EPISODIC_HEADER.to_string());
        out.extend(self.episodic.iter().map(|s| snippet_line(s, &self.symbolic)));
        out.join("\n")
    }

    pub fn tokens(&self) -> usize {
        approx_tokens(&self.render())
    }
}

fn mentions(text: &str, key: &str) -> bool {
    let text = text.to_lowercase();
    let key = key.to_lowercase();
    text.match_indices(&key).any(|(i, _)| {
        let before = text[..i].chars().next_back();
        let after = text[i + key.len()..].chars().next();
        let boundary = |c: Option<char>| c.is_none_or(|c| !(c.is_alphanumeric() || c == '_'));
        boundary(before) && boundary(after)
    })
}

/// Owns the three stores plus the embedder and summarizer.
pub struct MemoryManager {
    pub config: MemoryConfig,
    pub working: WorkingMemory,
    pub symbolic: SymbolicStore,
    pub episodic: EpisodicStore,
    embedder: Box<dyn Embedder>,
    summarizer: Box<dyn Summarizer>,
    now_step: u64,
}

impl std::fmt::Debug for MemoryManager {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MemoryManager")
            .field("config", &self.config)
            .field("working", &self.working.len())
            .field("symbolic", &self.symbolic.len())
            .field("episodic", &self.episodic.len())
            .field("now_step", &self.now_step)
            .finish()
    }
}

#[derive(Serialize, Deserialize)]
struct Dump {
    config: MemoryConfig,
    now_step: u64,
    working: WorkingMemory,
    symbolic: SymbolicStore,
    episodic: EpisodicStore,
}

impl Default for MemoryManager {
    fn default() -> Self {
        Self::new(MemoryConfig::default())
    }
}

impl MemoryManager {
    pub fn new(config: MemoryConfig) -> Self {
        Self::with_plugins(config, Box::new(TrigramEmbedder::default()), Box::new(HeadSummarizer::default()))
    }

    pub fn with_plugins(config: MemoryConfig, embedder: Box<dyn Embedder>, summarizer: Box<dyn Summarizer>) -> Self {
        Self {
            working: WorkingMemory::new(config.working_capacity, config.working_token_budget),
            symbolic: SymbolicStore::default(),
            episodic: EpisodicStore::new(embedder.dim(), config.lambda),
            config,
            embedder,
            summarizer,
            now_step: 0,
        }
    }

    pub fn now_step(&self) -> u64 {
        self.now_step
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        self.embedder.embed(text)
    }

    /// Records a turn: updates the symbolic table, appends to working memory
    /// and consolidates anything evicted into episodic storage before
    /// returning.
    pub fn insert_turn(&mut self, turn: Turn) -> Result<(), MemoryError> {
        self.now_step = self.now_step.max(turn.step);
        for (k, v) in extract_state(&turn) {
            self.symbolic.upsert(&k, v, turn.step);
        }
        for old in self.working.push(turn) {
            let summary = self.summarizer.summarize(&old.text);
            let embedding = self.embedder.embed(&summary);
            self.episodic.insert(embedding, summary, old.step)?;
        }
        Ok(())
    }

    pub fn retrieve(&self, query: &str, k: usize) -> Vec<Scored<'_>> {
        let q = self.embedder.embed(query);
        self.episodic.retrieve(&q, k, self.now_step)
    }

    /// Builds a context within `budget` approximate tokens. The symbolic table
    /// is always complete; recalled snippets are dropped before working turns,
    /// and working turns are dropped oldest first.
    pub fn assemble_context(&self, query: &str, budget: usize) -> Result<ContextDocument, MemoryError> {
        let symbolic: Vec<(String, Value)> = self
            .symbolic
            .entries
            .iter()
            .map(|(k, e)| (k.clone(), e.value.clone()))
            .collect();
        let mut doc = ContextDocument {
            symbolic,
            working: Vec::new(),
            episodic: Vec::new(),
        };
        let needed = doc.tokens();
        if needed > budget {
            return Err(MemoryError::BudgetTooSmall { needed, budget });
        }
        // character accounting: the rendered document joins lines with '\n'
        let cap = budget * 4;
        let mut used = doc.render().chars().count();
        let mut kept = Vec::new();
        for turn in self.working.queue.iter().rev() {
            let extra = turn.text.chars().count() + 1;
            if used + extra > cap {
                break;
            }
            used += extra;
            kept.push(turn.text.clone());
        }
        kept.reverse();
        doc.working = kept;
        for hit in self.retrieve(query, self.config.retrieve_k) {
            let keys: Vec<String> = doc
                .symbolic
                .iter()
                .filter(|(k, _)| mentions(&hit.item.text, k))
                .map(|(k, _)| k.clone())
                .collect();
            let snippet = Snippet {
                text: hit.item.text.clone(),
                score: hit.score,
                created_step: hit.item.created_step,
                authoritative_keys: keys,
            };
            let extra = snippet_line(&snippet, &doc.symbolic).chars().count() + 1;
            if used + extra > cap {
                break;
            }
            used += extra;
            doc.episodic.push(snippet);
        }
        Ok(doc)
    }

    pub fn dump(&self) -> Value {
        serde_json::to_value(Dump {
            config: self.config.clone(),
            now_step: self.now_step,
            working: self.working.clone(),
            symbolic: self.symbolic.clone(),
            episodic: self.episodic.clone(),
        })
        .expect("memory serializes")
    }

    /// Restores a dump with the default embedder and summarizer.
    pub fn load(doc: &Value) -> Result<Self, MemoryError> {
        Self::load_with(doc, Box::new(TrigramEmbedder::default()), Box::new(HeadSummarizer::default()))
    }

    pub fn load_with(doc: &Value, embedder: Box<dyn Embedder>, summarizer: Box<dyn Summarizer>) -> Result<Self, MemoryError> {
        let d: Dump = serde_json::from_value(doc.clone()).map_err(|e| MemoryError::BadDump(e.to_string()))?;
        if d.episodic.dim != embedder.dim() {
            return Err(EpisodicError::DimensionMismatch {
                expected: embedder.dim(),
                got: d.episodic.dim,
            }
            .into());
        }
        Ok(Self {
            config: d.config,
            working: d.working,
            symbolic: d.symbolic,
            episodic: d.episodic,
            embedder,
            summarizer,
            now_step: d.now_step,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn small() -> MemoryManager {
        MemoryManager::new(MemoryConfig {
            working_capacity: 3,
            ..MemoryConfig::default()
        })
    }

    #[test]
    fn overflow_lands_in_episodic() {
        let mut m = small();
        for i in 0..3 {
            m.insert_turn(Turn::text(i, format!("turn number {i}"))).unwrap();
        }
        assert!(m.episodic.is_empty());
        m.insert_turn(Turn::text(3, "turn number 3")).unwrap();
        assert_eq!(m.episodic.len(), 1);
        assert_eq!(m.episodic.items[0].text, "turn number 0");
        let top = m.retrieve("turn number 0", 1);
        assert_eq!(top[0].item.text, "turn number 0");
    }

    #[test]
    fn extracts_daily_report_fields() {
        let t = Turn {
            step: 9,
            text: String::new(),
            tool_result: Some(json!({"day": 3, "cash": 410.5, "net_worth": 600.0, "inventory": {"Cola Can": 4}})),
        };
        let d = extract_state(&t);
        assert_eq!(d.keys().collect::<Vec<_>>(), ["cash", "day", "net_worth"]);
        assert!(extract_state(&Turn::text(1, "thinking about cash")).is_empty());
    }

    #[test]
    fn shallow_value_beats_nested() {
        let t = Turn {
            step: 1,
            text: String::new(),
            tool_result: Some(json!({"order": {"cash": 1}, "cash": 2})),
        };
        assert_eq!(extract_state(&t)["cash"], json!(2));
    }

    #[test]
    fn symbolic_overrides_conflicting_recall() {
        let mut m = small();
        for i in 0..4 {
            m.insert_turn(Turn::text(i, "we have plenty of funds, cash is fine")).unwrap();
        }
        m.insert_turn(Turn {
            step: 10,
            text: "report".into(),
            tool_result: Some(json!({"cash": 0})),
        })
        .unwrap();
        let doc = m.assemble_context("cash funds", 10_000).unwrap();
        assert_eq!(doc.symbolic, vec![("cash".to_string(), json!(0))]);
        assert!(!doc.episodic.is_empty());
        assert_eq!(doc.episodic[0].authoritative_keys, ["cash"]);
        let text = doc.render();
        assert!(text.find(SYMBOLIC_HEADER) < text.find(EPISODIC_HEADER));
        assert!(text.contains("[authoritative: cash=0]"));
    }

    #[test]
    fn tight_budget_drops_episodic_first() {
        let mut m = small();
        for i in 0..6 {
            m.insert_turn(Turn {
                step: i,
                text: format!("turn {i} with some padding text"),
                tool_result: Some(json!({"day": i})),
            })
            .unwrap();
        }
        let full = m.assemble_context("turn", 10_000).unwrap();
        assert_eq!(full.working.len(), 3);
        assert!(!full.episodic.is_empty());
        let base = ContextDocument {
            symbolic: full.symbolic.clone(),
            working: full.working.clone(),
            episodic: vec![],
        };
        let tight = m.assemble_context("turn", base.tokens()).unwrap();
        assert!(tight.episodic.is_empty());
        assert_eq!(tight.working, full.working);
        let err = m.assemble_context("turn", 1).unwrap_err();
        assert_eq!(err.code(), "budget_too_small");
    }

    #[test]
    fn dump_round_trip() {
        let mut m = small();
        for i in 0..5 {
            m.insert_turn(Turn {
                step: i,
                text: format!("t{i}"),
                tool_result: Some(json!({"dau": i})),
            })
            .unwrap();
        }
        let d = m.dump();
        let back = MemoryManager::load(&d).unwrap();
        assert_eq!(back.dump(), d);
        assert!(MemoryManager::load(&json!({"nope": 1})).is_err());
    }

    #[test]
    fn deltas_are_not_levels() {
        let t = Turn {
            step: 1,
            text: String::new(),
            tool_result: Some(json!({"changes": {"money": -15}, "current_state": {"money": 85}})),
        };
        assert_eq!(extract_state(&t)["money"], json!(85));
    }

    #[test]
    fn key_mentions_need_word_boundaries() {
        assert!(mentions("Cash was low", "cash"));
        assert!(!mentions("cashier", "cash"));
        assert!(mentions("net_worth: 5", "net_worth"));
        assert!(!mentions("the day_count", "day"));
    }
}
