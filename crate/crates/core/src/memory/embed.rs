//! Injection points for text embedding and summarization.

pub const DEFAULT_DIM: usize = 256;
pub const DEFAULT_SUMMARY_CHARS: usize = 400;

/// Maps text to a fixed-size vector. Must be a pure function.
pub trait Embedder: Send {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Condenses an evicted working-memory turn. Must be a pure function.
pub trait Summarizer: Send {
    fn summarize(&self, text: &str) -> String;
}

/// Feature-hashed character trigrams, L2-normalized.
#[derive(Debug, Clone, Copy)]
pub struct TrigramEmbedder {
    pub dim: usize,
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl Embedder for TrigramEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let chars: Vec<char> = text.chars().collect();
        if chars.is_empty() {
            return v;
        }
        let mut buf = String::new();
        // strings shorter than a trigram hash as a single gram
        let width = chars.len().min(3);
        for gram in chars.windows(width) {
            buf.clear();
            buf.extend(gram);
            let slot = (fnv1a(buf.as_bytes()) % self.dim as u64) as usize;
            v[slot] += 1.0;
        }
        normalize(&mut v);
        v
    }
}

/// Keeps the first `max_chars` characters.
#[derive(Debug, Clone, Copy)]
pub struct HeadSummarizer {
    pub max_chars: usize,
}

impl Default for HeadSummarizer {
    fn default() -> Self {
        Self {
            max_chars: DEFAULT_SUMMARY_CHARS,
        }
    }
}

impl Summarizer for HeadSummarizer {
    fn summarize(&self, text: &str) -> String {
        text.chars().take(self.max_chars).collect()
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales to unit length in place; zero vectors are left alone.
pub fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Cosine similarity, 0 when either side has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (na * nb)
}
