//! Trust evaluation for Social Internet of Things (SIoT) networks.
//!
//! The crate computes five trust metrics for every ordered pair of objects in
//! a directed interaction graph and aggregates them with a small neural
//! classifier into three trust levels:
//!
//! 1. direct trust ([`direct`]) from decayed positive/negative interaction counts,
//! 2. reliability and benevolence ([`credibility`]) iterated to a fixed point,
//! 3. recommendation trust ([`recommendation`]) from credible neighbours,
//!    falling back to global reputation,
//! 4. degree of relationship ([`kge`]) as the cosine similarity of RotL
//!    knowledge-graph embeddings trained on the five SIoT relation types,
//! 5. the trustee's own reliability and benevolence.
//!
//! The crate is `no_std` (with `alloc`). IO and the command line live in
//! the `trust-siot` companion crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod classifier;
pub mod credibility;
pub mod direct;
mod error;
pub mod experiment;
pub mod features;
pub mod graph;
pub mod ingest;
pub mod kge;
pub(crate) mod math;
pub mod metrics;
pub mod optim;
pub mod recommendation;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
pub use graph::{Direction, ObjectId, Relation, RelationKG, RelationTriple, TrustGraph};
pub use ingest::TrustLabel;
