//! Graph data model shared by every stage: objects, directed trust edges,
//! interaction logs and the multi-relational SIoT knowledge graph.
//!
//! Object ids are remapped to dense indices `0..n` in ascending id order, so
//! iterating indices and iterating ids give the same order. Adjacency lists
//! are kept sorted, which makes every downstream fold deterministic.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId(pub u64);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for ObjectId {
    fn from(v: u64) -> Self {
        ObjectId(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Positive,
    Negative,
}

/// One timestamped interaction from `trustor` towards `trustee`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InteractionRecord {
    pub trustor: ObjectId,
    pub trustee: ObjectId,
    pub time: u64,
    pub outcome: Outcome,
}

impl InteractionRecord {
    pub fn new(trustor: impl Into<ObjectId>, trustee: impl Into<ObjectId>, time: u64, outcome: Outcome) -> Self {
        Self {
            trustor: trustor.into(),
            trustee: trustee.into(),
            time,
            outcome,
        }
    }
}

/// The five SIoT relationship types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    /// Co-location.
    Clor,
    /// Parental (same manufacturer and period).
    Por,
    /// Ownership.
    Oor,
    /// Social, between private devices.
    Sor,
    /// Social, between public and private devices.
    Sor2,
}

impl Relation {
    pub const ALL: [Relation; 5] = [
        Relation::Clor,
        Relation::Por,
        Relation::Oor,
        Relation::Sor,
        Relation::Sor2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Clor => "CLOR",
            Relation::Por => "POR",
            Relation::Oor => "OOR",
            Relation::Sor => "SOR",
            Relation::Sor2 => "SOR2",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownRelation;

impl fmt::Display for UnknownRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("relation must be one of CLOR, POR, OOR, SOR, SOR2")
    }
}

impl FromStr for Relation {
    type Err = UnknownRelation;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s {
            "CLOR" => Ok(Relation::Clor),
            "POR" => Ok(Relation::Por),
            "OOR" => Ok(Relation::Oor),
            "SOR" => Ok(Relation::Sor),
            "SOR2" => Ok(Relation::Sor2),
            _ => Err(UnknownRelation),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationTriple {
    pub head: ObjectId,
    pub relation: Relation,
    pub tail: ObjectId,
}

impl RelationTriple {
    pub fn new(head: impl Into<ObjectId>, relation: Relation, tail: impl Into<ObjectId>) -> Self {
        Self {
            head: head.into(),
            relation,
            tail: tail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

/// A directed edge between dense node indices, weighted by direct trust.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub dtm: f64,
}

/// Directed trust graph. Immutable once built; re-weighting produces a new
/// graph via [`TrustGraph::with_weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrustGraph {
    ids: Vec<ObjectId>,
    edges: Vec<Edge>,
    // (neighbour, edge index), sorted by neighbour.
    out_adj: Vec<Vec<(usize, usize)>>,
    in_adj: Vec<Vec<(usize, usize)>>,
}

impl TrustGraph {
    /// Builds a graph from explicit nodes and weighted edges. Endpoints of
    /// edges are added to the node set. Weights are clamped to [0, 1]; a
    /// repeated `(source, target)` keeps the last weight.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = ObjectId>,
        edges: impl IntoIterator<Item = (ObjectId, ObjectId, f64)>,
    ) -> Result<Self> {
        let edges: Vec<_> = edges.into_iter().collect();
        let mut ids: BTreeSet<ObjectId> = nodes.into_iter().collect();
        for &(u, v, w) in &edges {
            if u == v {
                return Err(Error::InvalidParameter(alloc::format!("self-loop edge on {u}")));
            }
            if !w.is_finite() {
                return Err(Error::InvalidParameter(alloc::format!("non-finite weight on {u}->{v}")));
            }
            ids.insert(u);
            ids.insert(v);
        }
        let ids: Vec<ObjectId> = ids.into_iter().collect();
        let index = |id: ObjectId| ids.binary_search(&id).expect("endpoint registered above");
        let mut dense: alloc::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for (u, v, w) in edges {
            dense.insert((index(u), index(v)), w.clamp(0.0, 1.0));
        }
        let edges = dense
            .into_iter()
            .map(|((source, target), dtm)| Edge { source, target, dtm })
            .collect();
        Ok(Self::assemble(ids, edges))
    }

    // `edges` must be sorted by (source, target) without duplicates.
    fn assemble(ids: Vec<ObjectId>, edges: Vec<Edge>) -> Self {
        let n = ids.len();
        let mut out_adj = alloc::vec![Vec::new(); n];
        let mut in_adj = alloc::vec![Vec::new(); n];
        for (e, edge) in edges.iter().enumerate() {
            out_adj[edge.source].push((edge.target, e));
            in_adj[edge.target].push((edge.source, e));
        }
        // out lists are already sorted because edges are; in lists are filled
        // in ascending source order for the same reason.
        Self {
            ids,
            edges,
            out_adj,
            in_adj,
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Object ids in dense-index order (ascending).
    pub fn ids(&self) -> &[ObjectId] {
        &self.ids
    }

    pub fn id(&self, index: usize) -> ObjectId {
        self.ids[index]
    }

    pub fn index_of(&self, id: ObjectId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn require(&self, id: ObjectId) -> Result<usize> {
        self.index_of(id).ok_or(Error::ObjectNotFound(id))
    }

    /// Edges sorted by `(source, target)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_index(&self, source: usize, target: usize) -> Option<usize> {
        let adj = &self.out_adj[source];
        adj.binary_search_by_key(&target, |&(t, _)| t).ok().map(|p| adj[p].1)
    }

    /// Direct trust of the edge `source -> target`, if present.
    pub fn dtm(&self, source: usize, target: usize) -> Option<f64> {
        self.edge_index(source, target).map(|e| self.edges[e].dtm)
    }

    pub fn dtm_by_id(&self, source: ObjectId, target: ObjectId) -> Option<f64> {
        self.dtm(self.index_of(source)?, self.index_of(target)?)
    }

    /// Outgoing `(target, dtm)` pairs of a node, ascending by target.
    pub fn out_edges(&self, node: usize) -> impl ExactSizeIterator<Item = (usize, f64)> + '_ {
        self.out_adj[node].iter().map(move |&(t, e)| (t, self.edges[e].dtm))
    }

    /// Incoming `(source, dtm)` pairs of a node, ascending by source.
    pub fn in_edges(&self, node: usize) -> impl ExactSizeIterator<Item = (usize, f64)> + '_ {
        self.in_adj[node].iter().map(move |&(s, e)| (s, self.edges[e].dtm))
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.out_adj[node].len()
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.in_adj[node].len()
    }

    /// Neighbours of `id` in ascending id order: sources of incoming edges
    /// for [`Direction::In`], targets of outgoing edges for [`Direction::Out`].
    pub fn neighbors(&self, id: ObjectId, direction: Direction) -> Result<Vec<ObjectId>> {
        let node = self.require(id)?;
        let adj = match direction {
            Direction::In => &self.in_adj[node],
            Direction::Out => &self.out_adj[node],
        };
        Ok(adj.iter().map(|&(n, _)| self.ids[n]).collect())
    }

    /// Returns a copy of the graph with edge weights replaced, in
    /// [`TrustGraph::edges`] order. Weights are clamped to [0, 1].
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.edges.len() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} weights for {} edges",
                weights.len(),
                self.edges.len()
            )));
        }
        let mut g = self.clone();
        for (edge, &w) in g.edges.iter_mut().zip(weights) {
            edge.dtm = w.clamp(0.0, 1.0);
        }
        Ok(g)
    }
}

/// Interaction records grouped by graph edge. Entry `e` holds the
/// `(time, outcome)` records of `graph.edges()[e]`, in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionLog {
    per_edge: Vec<Vec<(u64, Outcome)>>,
}

impl InteractionLog {
    pub fn edge_records(&self, edge: usize) -> &[(u64, Outcome)] {
        &self.per_edge[edge]
    }

    pub fn len(&self) -> usize {
        self.per_edge.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_edge.is_empty()
    }

    /// Number of interactions recorded per edge.
    pub fn interaction_counts(&self) -> Vec<usize> {
        self.per_edge.iter().map(Vec::len).collect()
    }

    /// Earliest and latest timestamps over all records.
    pub fn time_range(&self) -> Option<(u64, u64)> {
        let mut it = self.per_edge.iter().flatten().map(|&(t, _)| t);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), t| (lo.min(t), hi.max(t))))
    }
}

/// Multi-relational triple store over objects.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelationKG {
    triples: Vec<RelationTriple>,
    entities: Vec<ObjectId>,
    relations: Vec<Relation>,
}

impl RelationKG {
    /// Indexes triples, dropping exact duplicates (first occurrence wins) and
    /// self-relations. Returns the store and the number of dropped triples
    /// as `(duplicates, self_relations)`.
    pub fn from_triples(triples: impl IntoIterator<Item = RelationTriple>) -> (Self, usize, usize) {
        let mut seen = BTreeSet::new();
        let mut kept = Vec::new();
        let (mut dups, mut loops) = (0, 0);
        let mut entities = BTreeSet::new();
        let mut relations = BTreeSet::new();
        for t in triples {
            if t.head == t.tail {
                loops += 1;
                continue;
            }
            if !seen.insert(t) {
                dups += 1;
                continue;
            }
            entities.insert(t.head);
            entities.insert(t.tail);
            relations.insert(t.relation);
            kept.push(t);
        }
        let kg = Self {
            triples: kept,
            entities: entities.into_iter().collect(),
            relations: relations.into_iter().collect(),
        };
        (kg, dups, loops)
    }

    pub fn triples(&self) -> &[RelationTriple] {
        &self.triples
    }

    /// Entities in ascending id order; position is the entity's dense index.
    pub fn entities(&self) -> &[ObjectId] {
        &self.entities
    }

    /// Relations present, in [`Relation::ALL`] order.
    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn entity_index(&self, id: ObjectId) -> Option<usize> {
        self.entities.binary_search(&id).ok()
    }

    pub fn relation_index(&self, r: Relation) -> Option<usize> {
        self.relations.binary_search(&r).ok()
    }

    pub fn n_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildDiagnostics {
    pub self_loop_interactions: usize,
    pub duplicate_triples: usize,
    pub self_loop_triples: usize,
}

#[derive(Debug, Clone)]
pub struct BuiltGraph {
    pub graph: TrustGraph,
    pub kg: RelationKG,
    pub log: InteractionLog,
    pub diagnostics: BuildDiagnostics,
}

/// Builds the trust graph with its interaction log, plus the knowledge graph.
///
/// One edge is created per ordered pair with at least one interaction, with
/// the uninformative weight 0.5 until direct trust is computed. The node set
/// is the union of every id in both inputs. Self-loop interactions are
/// rejected and counted; duplicate triples are dropped silently.
pub fn build_graph(interactions: &[InteractionRecord], triples: &[RelationTriple]) -> BuiltGraph {
    let mut diagnostics = BuildDiagnostics::default();
    let mut ids = BTreeSet::new();
    let mut pairs: alloc::collections::BTreeMap<(ObjectId, ObjectId), Vec<(u64, Outcome)>> = Default::default();
    for r in interactions {
        if r.trustor == r.trustee {
            diagnostics.self_loop_interactions += 1;
            continue;
        }
        ids.insert(r.trustor);
        ids.insert(r.trustee);
        pairs
            .entry((r.trustor, r.trustee))
            .or_default()
            .push((r.time, r.outcome));
    }
    let (kg, dups, loops) = RelationKG::from_triples(triples.iter().copied());
    diagnostics.duplicate_triples = dups;
    diagnostics.self_loop_triples = loops;
    ids.extend(kg.entities().iter().copied());

    let ids: Vec<ObjectId> = ids.into_iter().collect();
    let index = |id: ObjectId| ids.binary_search(&id).expect("id collected above");
    let mut edges = Vec::with_capacity(pairs.len());
    let mut per_edge = Vec::with_capacity(pairs.len());
    // BTreeMap order on ids equals order on dense indices.
    for ((u, v), records) in pairs {
        edges.push(Edge {
            source: index(u),
            target: index(v),
            dtm: 0.5,
        });
        per_edge.push(records);
    }
    BuiltGraph {
        graph: TrustGraph::assemble(ids, edges),
        kg,
        log: InteractionLog { per_edge },
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(a: u64, b: u64, o: Outcome) -> InteractionRecord {
        InteractionRecord::new(a, b, 0, o)
    }

    #[test]
    fn empty_build() {
        let built = build_graph(&[], &[]);
        assert_eq!(built.graph.node_count(), 0);
        assert_eq!(built.graph.edge_count(), 0);
        assert!(built.kg.is_empty());
        assert_eq!(built.kg.n_entities(), 0);
    }

    #[test]
    fn minimal_pair_aggregates_into_one_edge() {
        let built = build_graph(&[rec(1, 2, Outcome::Positive), rec(1, 2, Outcome::Negative)], &[]);
        assert_eq!(built.graph.edge_count(), 1);
        assert_eq!(built.graph.ids(), &[ObjectId(1), ObjectId(2)]);
        assert_eq!(built.log.edge_records(0).len(), 2);
    }

    #[test]
    fn kg_counts() {
        let triples = [
            RelationTriple::new(1, Relation::Clor, 2),
            RelationTriple::new(2, Relation::Clor, 3),
            RelationTriple::new(1, Relation::Oor, 3),
        ];
        let built = build_graph(&[], &triples);
        assert_eq!(built.kg.n_triples(), 3);
        assert_eq!(built.kg.n_relations(), 2);
        assert_eq!(built.kg.n_entities(), 3);
        // KG-only ids still join the node set.
        assert_eq!(built.graph.node_count(), 3);
    }

    #[test]
    fn duplicate_triples_are_dropped() {
        let t = RelationTriple::new(1, Relation::Sor, 2);
        let built = build_graph(&[], &[t, t]);
        assert_eq!(built.kg.n_triples(), 1);
        assert_eq!(built.diagnostics.duplicate_triples, 1);
    }

    #[test]
    fn self_loops_rejected_and_counted() {
        let built = build_graph(&[rec(3, 3, Outcome::Positive), rec(3, 4, Outcome::Positive)], &[]);
        assert_eq!(built.diagnostics.self_loop_interactions, 1);
        assert_eq!(built.graph.edge_count(), 1);
    }

    #[test]
    fn neighbor_queries() {
        let built = build_graph(
            &[
                rec(7, 5, Outcome::Positive),
                rec(3, 5, Outcome::Positive),
                rec(5, 9, Outcome::Negative),
            ],
            &[RelationTriple::new(100, Relation::Por, 101)],
        );
        let g = &built.graph;
        assert_eq!(
            g.neighbors(ObjectId(5), Direction::In).unwrap(),
            vec![ObjectId(3), ObjectId(7)]
        );
        assert_eq!(g.neighbors(ObjectId(5), Direction::Out).unwrap(), vec![ObjectId(9)]);
        assert_eq!(g.neighbors(ObjectId(9), Direction::Out).unwrap(), vec![]);
        assert!(g.neighbors(ObjectId(100), Direction::In).unwrap().is_empty());
        assert_eq!(
            g.neighbors(ObjectId(42), Direction::In),
            Err(Error::ObjectNotFound(ObjectId(42)))
        );
    }

    #[test]
    fn relation_parsing_is_exact() {
        for r in Relation::ALL {
            assert_eq!(r.as_str().parse::<Relation>(), Ok(r));
        }
        assert!("sor".parse::<Relation>().is_err());
        assert!("SOR_2".parse::<Relation>().is_err());
    }

    #[test]
    fn with_weights_checks_length() {
        let built = build_graph(&[rec(1, 2, Outcome::Positive)], &[]);
        assert!(built.graph.with_weights(&[]).is_err());
        let g = built.graph.with_weights(&[0.9]).unwrap();
        assert_eq!(g.dtm_by_id(ObjectId(1), ObjectId(2)), Some(0.9));
    }
}
