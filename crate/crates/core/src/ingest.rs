//! Rating datasets: level mapping, normalisation, interaction derivation,
//! three-class labelling and the merge with SIoT relation data.
//!
//! Everything here works on in-memory lists; reading files is the companion
//! crate's job.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::graph::{InteractionRecord, ObjectId, Outcome, RelationKG, RelationTriple};
use crate::rng::{stream, Stream};
use crate::{Error, Result};

/// One rating as found in a source dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRating {
    pub rater: ObjectId,
    pub rated: ObjectId,
    pub value: f64,
    pub time: Option<u64>,
}

impl RawRating {
    pub fn new(rater: impl Into<ObjectId>, rated: impl Into<ObjectId>, value: f64, time: Option<u64>) -> Self {
        Self {
            rater: rater.into(),
            rated: rated.into(),
            value,
            time,
        }
    }
}

/// Advogato certification levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvogatoLevel {
    Observer,
    Apprentice,
    Journeyer,
    Master,
}

impl AdvogatoLevel {
    pub const ALL: [AdvogatoLevel; 4] = [
        AdvogatoLevel::Observer,
        AdvogatoLevel::Apprentice,
        AdvogatoLevel::Journeyer,
        AdvogatoLevel::Master,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AdvogatoLevel::Observer => "Observer",
            AdvogatoLevel::Apprentice => "Apprentice",
            AdvogatoLevel::Journeyer => "Journeyer",
            AdvogatoLevel::Master => "Master",
        }
    }

    pub fn value(self) -> f64 {
        match self {
            AdvogatoLevel::Observer => 0.1,
            AdvogatoLevel::Apprentice => 0.5,
            AdvogatoLevel::Journeyer => 0.7,
            AdvogatoLevel::Master => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownLevel;

impl fmt::Display for UnknownLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("level must be Observer, Apprentice, Journeyer or Master")
    }
}

impl FromStr for AdvogatoLevel {
    type Err = UnknownLevel;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        const LEVELS: [(&str, AdvogatoLevel); 4] = [
            ("observer", AdvogatoLevel::Observer),
            ("apprentice", AdvogatoLevel::Apprentice),
            ("journeyer", AdvogatoLevel::Journeyer),
            ("master", AdvogatoLevel::Master),
        ];
        LEVELS
            .iter()
            .find(|(name, _)| s.eq_ignore_ascii_case(name))
            .map(|&(_, l)| l)
            .ok_or(UnknownLevel)
    }
}

/// Ground-truth trust class. Ordered `Untrustworthy < Neutral < Trustworthy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrustLabel {
    Untrustworthy,
    Neutral,
    Trustworthy,
}

impl TrustLabel {
    pub const ALL: [TrustLabel; 3] = [TrustLabel::Untrustworthy, TrustLabel::Neutral, TrustLabel::Trustworthy];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Numeric encoding used by MAE/MSE.
    pub fn score(self) -> f64 {
        match self {
            TrustLabel::Untrustworthy => 0.0,
            TrustLabel::Neutral => 0.5,
            TrustLabel::Trustworthy => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrustLabel::Untrustworthy => "untrustworthy",
            TrustLabel::Neutral => "neutral",
            TrustLabel::Trustworthy => "trustworthy",
        }
    }
}

impl fmt::Display for TrustLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrustLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| s.eq_ignore_ascii_case(l.as_str()))
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown trust label {s:?}")))
    }
}

/// Cut points mapping a normalised rating onto three classes:
/// `[0, neutral_from)` untrustworthy, `[neutral_from, trustworthy_from)`
/// neutral, `[trustworthy_from, 1]` trustworthy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelThresholds {
    pub neutral_from: f64,
    pub trustworthy_from: f64,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        Self {
            neutral_from: 1.0 / 3.0,
            trustworthy_from: 2.0 / 3.0,
        }
    }
}

impl LabelThresholds {
    pub fn label(&self, value: f64) -> Result<TrustLabel> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::RatingOutOfRange(value));
        }
        Ok(if value < self.neutral_from {
            TrustLabel::Untrustworthy
        } else if value < self.trustworthy_from {
            TrustLabel::Neutral
        } else {
            TrustLabel::Trustworthy
        })
    }
}

/// Keeps the last rating for each `(rater, rated)` pair, at the position of
/// its first occurrence. Returns the number of overwritten lines.
pub fn dedupe_ratings(ratings: &[RawRating]) -> (Vec<RawRating>, usize) {
    let mut slot: BTreeMap<(ObjectId, ObjectId), usize> = BTreeMap::new();
    let mut out: Vec<RawRating> = Vec::with_capacity(ratings.len());
    let mut overwritten = 0;
    for r in ratings {
        match slot.get(&(r.rater, r.rated)) {
            Some(&i) => {
                out[i] = *r;
                overwritten += 1;
            }
            None => {
                slot.insert((r.rater, r.rated), out.len());
                out.push(*r);
            }
        }
    }
    (out, overwritten)
}

/// Min-max normalises rating values in place using their observed range and
/// returns that range. A constant dataset maps to 0.5.
pub fn normalize_min_max(ratings: &mut [RawRating]) -> Result<(f64, f64)> {
    let first = ratings.first().ok_or(Error::NoRatings)?.value;
    let (lo, hi) = ratings
        .iter()
        .fold((first, first), |(lo, hi), r| (lo.min(r.value), hi.max(r.value)));
    for r in ratings.iter_mut() {
        r.value = min_max(r.value, lo, hi);
    }
    Ok((lo, hi))
}

pub fn min_max(value: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

/// One interaction per rating: positive when `value >= positive_threshold`.
/// Missing timestamps become 0.
pub fn ratings_to_interactions(ratings: &[RawRating], positive_threshold: f64) -> Vec<InteractionRecord> {
    ratings
        .iter()
        .map(|r| InteractionRecord {
            trustor: r.rater,
            trustee: r.rated,
            time: r.time.unwrap_or(0),
            outcome: if r.value >= positive_threshold {
                Outcome::Positive
            } else {
                Outcome::Negative
            },
        })
        .collect()
}

/// Ground-truth class per rated pair. Repeated pairs keep the last rating.
pub fn label_pairs(
    ratings: &[RawRating],
    thresholds: &LabelThresholds,
) -> Result<BTreeMap<(ObjectId, ObjectId), TrustLabel>> {
    ratings
        .iter()
        .map(|r| Ok(((r.rater, r.rated), thresholds.label(r.value)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeConfig {
    pub seed: u64,
    pub positive_threshold: f64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            positive_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Merged {
    pub interactions: Vec<InteractionRecord>,
    pub kg: RelationKG,
    /// `(siot_object, rating_object)` pairs in mapping order.
    pub mapping: Vec<(ObjectId, ObjectId)>,
}

/// Distinct objects appearing in the ratings, ascending.
pub fn rating_objects(ratings: &[RawRating]) -> Vec<ObjectId> {
    let set: BTreeSet<ObjectId> = ratings.iter().flat_map(|r| [r.rater, r.rated]).collect();
    set.into_iter().collect()
}

/// Merges SIoT relations onto a rating dataset.
///
/// The relation triples are read as an undirected graph. A sub-network with
/// as many objects as the rating dataset is grown by breadth-first search
/// from a seeded high-degree start, visiting higher-degree neighbours first
/// and restarting from the best remaining hub when a component runs out.
/// Sampled SIoT objects and rating objects are then paired off in descending
/// degree order, and the triples inside the sample are relabelled onto the
/// rating ids.
pub fn merge_siot_relations(
    ratings: &[RawRating],
    siot_triples: &[RelationTriple],
    cfg: &MergeConfig,
) -> Result<Merged> {
    if ratings.is_empty() {
        return Err(Error::EmptyInput("ratings"));
    }
    if siot_triples.is_empty() {
        return Err(Error::EmptyInput("relation triples"));
    }
    let targets = rating_objects(ratings);
    let n = targets.len();

    let mut siot_adj: BTreeMap<ObjectId, BTreeSet<ObjectId>> = BTreeMap::new();
    for t in siot_triples.iter().filter(|t| t.head != t.tail) {
        siot_adj.entry(t.head).or_default().insert(t.tail);
        siot_adj.entry(t.tail).or_default().insert(t.head);
    }
    if siot_adj.len() < n {
        return Err(Error::InsufficientRelationCoverage {
            needed: n,
            available: siot_adj.len(),
        });
    }
    let degree = |id: &ObjectId| siot_adj[id].len();

    // Hubs first; ties by id.
    let mut by_degree: Vec<ObjectId> = siot_adj.keys().copied().collect();
    by_degree.sort_by(|a, b| degree(b).cmp(&degree(a)).then(a.cmp(b)));

    let mut rng = stream(cfg.seed, Stream::Merge);
    let mut visited: BTreeSet<ObjectId> = BTreeSet::new();
    let mut sample: Vec<ObjectId> = Vec::with_capacity(n);
    while sample.len() < n {
        let remaining: Vec<ObjectId> = by_degree.iter().copied().filter(|id| !visited.contains(id)).collect();
        // Seeded pick among the top 5% (at least one) of remaining hubs.
        let pool = (remaining.len() / 20).max(1);
        let start = remaining[rng.gen_range(0..pool)];
        visited.insert(start);
        sample.push(start);
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            if sample.len() == n {
                break;
            }
            let mut next: Vec<ObjectId> = siot_adj[&node]
                .iter()
                .copied()
                .filter(|m| !visited.contains(m))
                .collect();
            next.sort_by(|a, b| degree(b).cmp(&degree(a)).then(a.cmp(b)));
            for m in next {
                if sample.len() == n {
                    break;
                }
                visited.insert(m);
                sample.push(m);
                queue.push_back(m);
            }
        }
    }

    let sampled: BTreeSet<ObjectId> = sample.iter().copied().collect();
    let induced_degree = |id: &ObjectId| siot_adj[id].iter().filter(|m| sampled.contains(m)).count();
    sample.sort_by(|a, b| induced_degree(b).cmp(&induced_degree(a)).then(a.cmp(b)));

    let mut rating_adj: BTreeMap<ObjectId, BTreeSet<ObjectId>> = BTreeMap::new();
    for r in ratings.iter().filter(|r| r.rater != r.rated) {
        rating_adj.entry(r.rater).or_default().insert(r.rated);
        rating_adj.entry(r.rated).or_default().insert(r.rater);
    }
    let rating_degree = |id: &ObjectId| rating_adj.get(id).map_or(0, BTreeSet::len);
    let mut targets = targets;
    targets.sort_by(|a, b| rating_degree(b).cmp(&rating_degree(a)).then(a.cmp(b)));

    let mapping: Vec<(ObjectId, ObjectId)> = sample.into_iter().zip(targets).collect();
    let relabel: BTreeMap<ObjectId, ObjectId> = mapping.iter().copied().collect();
    let relabelled = siot_triples.iter().filter_map(|t| {
        Some(RelationTriple {
            head: *relabel.get(&t.head)?,
            relation: t.relation,
            tail: *relabel.get(&t.tail)?,
        })
    });
    let (kg, _, _) = RelationKG::from_triples(relabelled);

    Ok(Merged {
        interactions: ratings_to_interactions(ratings, cfg.positive_threshold),
        kg,
        mapping,
    })
}
