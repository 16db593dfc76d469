use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::date::Date;
use crate::schema::RelationId;
use crate::vocab::EntityId;
use crate::HashSet;

/// The `(head, relation, tail)` identity of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TripleKey {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl TripleKey {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        TripleKey { head, relation, tail }
    }

    /// Same relation, head and tail swapped.
    pub fn reversed(self) -> Self {
        TripleKey { head: self.tail, relation: self.relation, tail: self.head }
    }

    pub fn with_relation(self, relation: RelationId) -> Self {
        TripleKey { relation, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

/// Where a stored edge came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeOrigin {
    /// Asserted by an input file.
    Source,
    /// Negative derived from the positive `(head, from, tail)` through a
    /// disjoint relation pair.
    Inferred { from: RelationId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub key: TripleKey,
    pub polarity: Polarity,
    pub quality: Option<f64>,
    pub source: Arc<str>,
    pub date: Option<Date>,
    pub origin: EdgeOrigin,
}

impl Edge {
    pub fn positive(key: TripleKey, source: Arc<str>) -> Self {
        Edge {
            key,
            polarity: Polarity::Positive,
            quality: None,
            source,
            date: None,
            origin: EdgeOrigin::Source,
        }
    }

    pub fn negative(key: TripleKey, source: Arc<str>) -> Self {
        Edge { polarity: Polarity::Negative, ..Edge::positive(key, source) }
    }

    pub fn with_quality(mut self, quality: f64) -> Self {
        self.quality = Some(quality);
        self
    }

    pub fn is_positive(&self) -> bool {
        self.polarity == Polarity::Positive
    }

    /// Folds a duplicate of the same `(key, polarity)` into `self`: highest
    /// quality, smallest source label, earliest date, and a source-asserted
    /// origin over an inferred one.
    pub fn merge(&mut self, other: &Edge) {
        debug_assert_eq!((self.key, self.polarity), (other.key, other.polarity));
        self.quality = match (self.quality, other.quality) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        if other.source < self.source {
            self.source = other.source.clone();
        }
        self.date = match (self.date, other.date) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.origin = self.origin.min(other.origin);
    }
}

/// Anything that can answer "is this triple present?".
pub trait TripleLookup {
    fn contains_triple(&self, key: &TripleKey) -> bool;
}

/// Hash set of triple keys used as an existence index.
#[derive(Debug, Clone, Default)]
pub struct TripleSet {
    keys: HashSet<TripleKey>,
}

impl TripleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        TripleSet { keys: HashSet::with_capacity(n) }
    }

    pub fn insert(&mut self, key: TripleKey) -> bool {
        self.keys.insert(key)
    }

    pub fn remove(&mut self, key: &TripleKey) -> bool {
        self.keys.remove(key)
    }

    pub fn contains(&self, key: &TripleKey) -> bool {
        self.keys.contains(key)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Keys in sorted order.
    pub fn sorted(&self) -> Vec<TripleKey> {
        let mut v: Vec<_> = self.keys.iter().copied().collect();
        v.sort_unstable();
        v
    }
}

impl FromIterator<TripleKey> for TripleSet {
    fn from_iter<I: IntoIterator<Item = TripleKey>>(iter: I) -> Self {
        TripleSet { keys: iter.into_iter().collect() }
    }
}

impl Extend<TripleKey> for TripleSet {
    fn extend<I: IntoIterator<Item = TripleKey>>(&mut self, iter: I) {
        self.keys.extend(iter)
    }
}

impl TripleLookup for TripleSet {
    fn contains_triple(&self, key: &TripleKey) -> bool {
        self.keys.contains(key)
    }
}

impl<T: TripleLookup + ?Sized> TripleLookup for &T {
    fn contains_triple(&self, key: &TripleKey) -> bool {
        (**self).contains_triple(key)
    }
}

/// Union of two lookups.
pub struct Either<A, B>(pub A, pub B);

impl<A: TripleLookup, B: TripleLookup> TripleLookup for Either<A, B> {
    fn contains_triple(&self, key: &TripleKey) -> bool {
        self.0.contains_triple(key) || self.1.contains_triple(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(h: u32, r: u16, t: u32) -> TripleKey {
        TripleKey::new(EntityId(h), RelationId(r), EntityId(t))
    }

    #[test]
    fn merge_keeps_max_quality_and_smallest_source() {
        let mut a = Edge::positive(key(0, 0, 1), "srcB".into()).with_quality(0.4);
        let b = Edge::positive(key(0, 0, 1), "srcA".into()).with_quality(0.9);
        a.merge(&b);
        assert_eq!(a.quality, Some(0.9));
        assert_eq!(&*a.source, "srcA");

        let mut c = Edge::positive(key(0, 0, 1), "s".into());
        c.merge(&Edge::positive(key(0, 0, 1), "s".into()).with_quality(0.2));
        assert_eq!(c.quality, Some(0.2));
    }

    #[test]
    fn merge_prefers_asserted_origin() {
        let mut inferred = Edge::negative(key(0, 1, 1), "s".into());
        inferred.origin = EdgeOrigin::Inferred { from: RelationId(0) };
        inferred.merge(&Edge::negative(key(0, 1, 1), "s".into()));
        assert_eq!(inferred.origin, EdgeOrigin::Source);
    }
}
