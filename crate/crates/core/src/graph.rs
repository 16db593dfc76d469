//! Assembled, immutable triple store with existence and adjacency indices.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::schema::{RelationId, Schema};
use crate::triple::{Edge, Polarity, TripleKey, TripleLookup};
use crate::vocab::{EntityId, NodeTypeId, Vocabulary};
use crate::HashMap;

/// Compressed adjacency: `targets[offsets[i]..offsets[i + 1]]` are the edge
/// indices attached to bucket `i`.
#[derive(Debug, Clone, Default)]
struct Csr {
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl Csr {
    fn build(buckets: usize, edges: &[Edge], bucket_of: impl Fn(&Edge) -> usize) -> Self {
        let mut offsets = vec![0u32; buckets + 1];
        for e in edges {
            offsets[bucket_of(e) + 1] += 1;
        }
        for i in 0..buckets {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0u32; edges.len()];
        for (i, e) in edges.iter().enumerate() {
            let b = bucket_of(e);
            targets[fill[b] as usize] = i as u32;
            fill[b] += 1;
        }
        Csr { offsets, targets }
    }

    fn get(&self, bucket: usize) -> &[u32] {
        match (self.offsets.get(bucket), self.offsets.get(bucket + 1)) {
            (Some(&a), Some(&b)) => &self.targets[a as usize..b as usize],
            _ => &[],
        }
    }
}

/// A deduplicated set of typed edges. Positives come first, each polarity
/// sorted by key.
#[derive(Debug, Clone)]
pub struct Graph {
    schema: Arc<Schema>,
    vocab: Arc<Vocabulary>,
    edges: Vec<Edge>,
    positive_count: usize,
    existence: HashMap<(TripleKey, Polarity), u32>,
    by_head: Csr,
    by_tail: Csr,
    by_relation: Csr,
    by_type: Vec<Vec<EntityId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GraphStats {
    /// `(node type, entity count)` in schema order.
    pub entities_per_type: Vec<(String, usize)>,
    /// `(relation, positive count, negative count)` in schema order.
    pub triples_per_relation: Vec<(String, usize, usize)>,
    pub entity_count: usize,
    pub positive_count: usize,
    pub negative_count: usize,
    /// Node types with at least one entity.
    pub node_type_count: usize,
    /// Relations with at least one positive edge.
    pub edge_type_count: usize,
}

impl Graph {
    /// Builds indices over `edges`, which must already be deduplicated on
    /// `(key, polarity)` and type-checked.
    pub(crate) fn from_clean_edges(schema: Arc<Schema>, vocab: Arc<Vocabulary>, mut edges: Vec<Edge>) -> Self {
        edges.sort_unstable_by_key(|a| (a.polarity, a.key));
        let positive_count = edges.partition_point(|e| e.is_positive());
        let mut existence = HashMap::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            let fresh = existence.insert((e.key, e.polarity), i as u32).is_none();
            debug_assert!(fresh, "duplicate edge reached Graph::from_clean_edges");
        }
        let n = vocab.len();
        let by_head = Csr::build(n, &edges, |e| e.key.head.index());
        let by_tail = Csr::build(n, &edges, |e| e.key.tail.index());
        let by_relation = Csr::build(schema.len(), &edges, |e| e.key.relation.index());

        let mut present = vec![false; n];
        for e in &edges {
            present[e.key.head.index()] = true;
            present[e.key.tail.index()] = true;
        }
        let mut by_type = vec![Vec::new(); schema.node_type_count()];
        for id in vocab.ids().filter(|id| present[id.index()]) {
            by_type[vocab.node_type(id).index()].push(id);
        }
        Graph { schema, vocab, edges, positive_count, existence, by_head, by_tail, by_relation, by_type }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_arc(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn positives(&self) -> &[Edge] {
        &self.edges[..self.positive_count]
    }

    pub fn negatives(&self) -> &[Edge] {
        &self.edges[self.positive_count..]
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn get(&self, key: &TripleKey, polarity: Polarity) -> Option<&Edge> {
        self.existence.get(&(*key, polarity)).map(|&i| &self.edges[i as usize])
    }

    pub fn contains(&self, key: &TripleKey, polarity: Polarity) -> bool {
        self.existence.contains_key(&(*key, polarity))
    }

    pub fn edges_from(&self, head: EntityId) -> impl Iterator<Item = &Edge> {
        self.by_head.get(head.index()).iter().map(|&i| &self.edges[i as usize])
    }

    pub fn edges_to(&self, tail: EntityId) -> impl Iterator<Item = &Edge> {
        self.by_tail.get(tail.index()).iter().map(|&i| &self.edges[i as usize])
    }

    pub fn edges_with(&self, relation: RelationId) -> impl Iterator<Item = &Edge> {
        self.by_relation.get(relation.index()).iter().map(|&i| &self.edges[i as usize])
    }

    /// Entities of `node_type` that occur in at least one edge, ascending.
    pub fn entities_of_type(&self, node_type: NodeTypeId) -> &[EntityId] {
        self.by_type.get(node_type.index()).map_or(&[], Vec::as_slice)
    }

    pub fn stats(&self) -> GraphStats {
        let schema = &self.schema;
        let mut per_rel = vec![(0usize, 0usize); schema.len()];
        for e in &self.edges {
            let slot = &mut per_rel[e.key.relation.index()];
            match e.polarity {
                Polarity::Positive => slot.0 += 1,
                Polarity::Negative => slot.1 += 1,
            }
        }
        let entities_per_type: Vec<(String, usize)> =
            schema.node_types().zip(&self.by_type).map(|(name, ids)| (name.into(), ids.len())).collect();
        GraphStats {
            entity_count: entities_per_type.iter().map(|(_, n)| n).sum(),
            node_type_count: entities_per_type.iter().filter(|(_, n)| *n > 0).count(),
            edge_type_count: per_rel.iter().filter(|(p, _)| *p > 0).count(),
            positive_count: self.positive_count,
            negative_count: self.edges.len() - self.positive_count,
            triples_per_relation: schema
                .relation_ids()
                .map(|r| (schema.name(r).into(), per_rel[r.index()].0, per_rel[r.index()].1))
                .collect(),
            entities_per_type,
        }
    }
}

/// Membership among the positive edges.
impl TripleLookup for Graph {
    fn contains_triple(&self, key: &TripleKey) -> bool {
        self.contains(key, Polarity::Positive)
    }
}
