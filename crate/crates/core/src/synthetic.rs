//! Seeded synthetic datasets shaped like the Advogato certification network
//! and the SIoT relation graph, for tests and demos.
//!
//! Every object has a hidden certification level. Honest raters mostly
//! report it (occasionally one level off); dishonest raters pick levels at
//! random. Timestamps are uniform over `[0, time_span]`.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::Rng;

use crate::graph::{Relation, RelationTriple};
use crate::ingest::{AdvogatoLevel, RawRating};
use crate::rng::{stream, Stream};

const LEVELS: [AdvogatoLevel; 4] = AdvogatoLevel::ALL;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub n_objects: usize,
    pub ratings_per_object: usize,
    pub dishonest_fraction: f64,
    /// Probability that an honest rating is one level off.
    pub honest_noise: f64,
    pub n_siot_objects: usize,
    pub siot_links_per_object: usize,
    pub time_span: u64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_objects: 200,
            ratings_per_object: 8,
            dishonest_fraction: 0.1,
            honest_noise: 0.1,
            n_siot_objects: 300,
            siot_links_per_object: 3,
            time_span: 1000,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub ratings: Vec<RawRating>,
    pub triples: Vec<RelationTriple>,
    /// Hidden level of each rating object, indexed by object id.
    pub levels: Vec<AdvogatoLevel>,
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticData {
    let mut rng = stream(cfg.seed, Stream::Synthetic);
    let n = cfg.n_objects;
    let levels: Vec<AdvogatoLevel> = (0..n)
        .map(|_| {
            // Skewed towards the upper levels, as certification data is.
            let u: f64 = rng.gen();
            LEVELS[if u < 0.15 {
                0
            } else if u < 0.4 {
                1
            } else if u < 0.7 {
                2
            } else {
                3
            }]
        })
        .collect();
    let dishonest: Vec<bool> = (0..n)
        .map(|_| rng.gen_bool(cfg.dishonest_fraction.clamp(0.0, 1.0)))
        .collect();

    let mut ratings = Vec::new();
    if n >= 2 {
        let per = cfg.ratings_per_object.min(n - 1);
        for rater in 0..n {
            let mut targets = BTreeSet::new();
            while targets.len() < per {
                let t = rng.gen_range(0..n);
                if t != rater {
                    targets.insert(t);
                }
            }
            for t in targets {
                let level = if dishonest[rater] {
                    LEVELS[rng.gen_range(0..4)]
                } else if rng.gen_bool(cfg.honest_noise.clamp(0.0, 1.0)) {
                    let i = LEVELS.iter().position(|&l| l == levels[t]).unwrap_or(0);
                    let j = if i == 0 || (i < 3 && rng.gen_bool(0.5)) {
                        i + 1
                    } else {
                        i - 1
                    };
                    LEVELS[j]
                } else {
                    levels[t]
                };
                let time = rng.gen_range(0..=cfg.time_span);
                ratings.push(RawRating::new(rater as u64, t as u64, level.value(), Some(time)));
            }
        }
    }

    // SIoT ids live in their own range so the merge has to relabel them.
    let m = cfg.n_siot_objects;
    let base = 1_000_000u64;
    let mut triples = Vec::new();
    if m >= 2 {
        for a in 0..m {
            for _ in 0..cfg.siot_links_per_object {
                // Squaring the draw biases links towards low ids, giving hubs.
                let u: f64 = rng.gen();
                let b = ((u * u) * m as f64) as usize % m;
                if a == b {
                    continue;
                }
                let relation = Relation::ALL[rng.gen_range(0..Relation::ALL.len())];
                triples.push(RelationTriple::new(base + a as u64, relation, base + b as u64));
            }
        }
    }
    SyntheticData {
        ratings,
        triples,
        levels,
    }
}
