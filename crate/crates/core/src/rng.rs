//! Named, independent random streams derived from one root seed.
//!
//! Each stream is a ChaCha12 keystream keyed by `sha256(root_seed || label)`.
//! Draw `n` of a stream is the `n`-th 64-bit word pair of that keystream, so a
//! value depends only on `(root_seed, label, n)`. Adding a new noise source
//! never shifts the draws of an existing one.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    /// Uniform on `[0, 1)`.
    Uniform,
    Gaussian { mu: f64, sigma: f64 },
}

#[derive(Debug, Clone)]
struct Stream {
    rng: ChaCha12Rng,
    counter: u64,
}

impl Stream {
    fn open(root_seed: u64, label: &str, counter: u64) -> Self {
        let mut rng = ChaCha12Rng::from_seed(stream_key(root_seed, label));
        // one u64 = two 32-bit keystream words
        rng.set_word_pos(u128::from(counter) * 2);
        Self { rng, counter }
    }

    fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        self.rng.next_u64()
    }
}

fn stream_key(root_seed: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(root_seed.to_le_bytes());
    h.update(label.as_bytes());
    let out = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&out);
    key
}

fn to_unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Collection of named deterministic streams. Serializes to its root seed and
/// per-stream counters, which is all that is needed to resume it.
#[derive(Debug, Clone)]
pub struct RngHub {
    root_seed: u64,
    streams: BTreeMap<String, Stream>,
}

#[derive(Serialize, Deserialize)]
struct HubSnapshot {
    root_seed: u64,
    counters: BTreeMap<String, u64>,
}

impl Serialize for RngHub {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        HubSnapshot {
            root_seed: self.root_seed,
            counters: self.counters(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RngHub {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let snap = HubSnapshot::deserialize(d)?;
        let streams = snap
            .counters
            .into_iter()
            .map(|(label, n)| {
                let s = Stream::open(snap.root_seed, &label, n);
                (label, s)
            })
            .collect();
        Ok(Self {
            root_seed: snap.root_seed,
            streams,
        })
    }
}

impl PartialEq for RngHub {
    fn eq(&self, other: &Self) -> bool {
        self.root_seed == other.root_seed && self.counters() == other.counters()
    }
}

impl RngHub {
    pub fn new(root_seed: u64) -> Self {
        Self {
            root_seed,
            streams: BTreeMap::new(),
        }
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn counters(&self) -> BTreeMap<String, u64> {
        self.streams
            .iter()
            .map(|(k, s)| (k.clone(), s.counter))
            .collect()
    }

    fn stream(&mut self, label: &str) -> &mut Stream {
        if !self.streams.contains_key(label) {
            let s = Stream::open(self.root_seed, label, 0);
            self.streams.insert(label.to_string(), s);
        }
        self.streams.get_mut(label).expect("stream just inserted")
    }

    pub fn next_u64(&mut self, label: &str) -> u64 {
        self.stream(label).next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self, label: &str) -> f64 {
        to_unit(self.next_u64(label))
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_range(&mut self, label: &str, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform(label)
    }

    /// Uniform integer on `lo..=hi`.
    pub fn int_inclusive(&mut self, label: &str, lo: i64, hi: i64) -> i64 {
        assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        lo + (self.next_u64(label) % span) as i64
    }

    /// Gaussian via Box-Muller. A zero sigma returns `mu` without consuming
    /// any draw.
    pub fn gaussian(&mut self, label: &str, mu: f64, sigma: f64) -> f64 {
        assert!(sigma >= 0.0, "sigma must be non-negative");
        if sigma == 0.0 {
            return mu;
        }
        // 1 - u maps [0,1) onto (0,1], keeping ln finite
        let u1 = 1.0 - self.uniform(label);
        let u2 = self.uniform(label);
        mu + sigma * (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }

    pub fn draw(&mut self, label: &str, dist: Dist) -> f64 {
        match dist {
            Dist::Uniform => self.uniform(label),
            Dist::Gaussian { mu, sigma } => self.gaussian(label, mu, sigma),
        }
    }

    /// Raw value of draw `index` on `label`, without touching hub state.
    pub fn peek_u64(&self, label: &str, index: u64) -> u64 {
        Stream::open(self.root_seed, label, index).next_u64()
    }
}
