//! Relation schema: node types, relation typing, symmetry, inverses,
//! hierarchy and disjointness.
//!
//! [`RelationSchema`] is the raw, name-based form read from a schema file;
//! [`RelationSchema::validate`] checks every relation invariant and turns it
//! into an index-based [`Schema`] with the ancestor closure precomputed.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::triple::{TripleKey, TripleLookup};
use crate::vocab::NodeTypeId;
use crate::HashMap;

/// Index of a relation in its [`Schema`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationId(pub u16);

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One relation as declared in a schema file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RelationDef {
    pub name: String,
    pub domain: String,
    pub range: String,
    pub symmetric: bool,
    pub inverse_of: Option<String>,
    pub parents: Vec<String>,
    pub disjoint_with: Vec<String>,
}

impl RelationDef {
    pub fn new(name: &str, domain: &str, range: &str) -> Self {
        RelationDef { name: name.into(), domain: domain.into(), range: range.into(), ..Default::default() }
    }

    pub fn symmetric(mut self) -> Self {
        self.symmetric = true;
        self
    }

    pub fn inverse_of(mut self, other: &str) -> Self {
        self.inverse_of = Some(other.into());
        self
    }

    pub fn child_of(mut self, parent: &str) -> Self {
        self.parents.push(parent.into());
        self
    }

    pub fn disjoint_with(mut self, other: &str) -> Self {
        self.disjoint_with.push(other.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RelationSchema {
    pub relations: Vec<RelationDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("duplicate relation name {0:?}")]
    DuplicateRelation(String),
    #[error("invalid node type name {0:?}")]
    InvalidNodeType(String),
    #[error("invalid relation name {0:?}")]
    InvalidRelationName(String),
    #[error("relation {relation:?} references unknown relation {referenced:?}")]
    UnknownRelation { relation: String, referenced: String },
    #[error("non-mutual inverse: {relation:?} names {inverse:?} as inverse but not vice versa")]
    NonMutualInverse { relation: String, inverse: String },
    #[error("relation {0:?} is declared as its own inverse; mark it symmetric instead")]
    SelfInverse(String),
    #[error("inverse relations {relation:?} and {inverse:?} have incompatible domain/range")]
    InverseTypeMismatch { relation: String, inverse: String },
    #[error("symmetric relation {0:?} has domain != range")]
    SymmetricTypeMismatch(String),
    #[error("cyclic hierarchy: {0}")]
    CyclicHierarchy(String),
    #[error("relation {child:?} and its parent {parent:?} have different domain/range")]
    HierarchyTypeMismatch { child: String, parent: String },
    #[error("relation {0:?} is disjoint with itself")]
    SelfDisjoint(String),
    #[error("relation {relation:?} is disjoint with its ancestor {ancestor:?}")]
    DisjointWithAncestor { relation: String, ancestor: String },
    #[error("disjoint relations {relation:?} and {other:?} have different domain/range")]
    DisjointTypeMismatch { relation: String, other: String },
    #[error("relation id {0} is not in the schema")]
    UnknownRelationId(u16),
    #[error("schema has more than {} relations", u16::MAX)]
    TooManyRelations,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct RelationInfo {
    domain: NodeTypeId,
    range: NodeTypeId,
    symmetric: bool,
    inverse: Option<RelationId>,
    parents: Vec<RelationId>,
    ancestors: Vec<RelationId>,
    descendants: Vec<RelationId>,
    disjoint: Vec<RelationId>,
}

/// A validated schema. Immutable; safe to share between threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    node_types: Vec<String>,
    defs: Vec<RelationDef>,
    info: Vec<RelationInfo>,
    by_name: HashMap<String, RelationId>,
}

/// Why a candidate edge can be derived from training edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Inferability {
    None,
    ReverseSymmetric,
    Inverse,
    SuperRelation,
}

impl Inferability {
    pub fn as_str(self) -> &'static str {
        match self {
            Inferability::None => "none",
            Inferability::ReverseSymmetric => "reverse_symmetric",
            Inferability::Inverse => "inverse",
            Inferability::SuperRelation => "super_relation",
        }
    }
}

fn valid_node_type(name: &str) -> bool {
    !name.is_empty() && name != "-" && !name.contains(':') && !name.chars().any(char::is_whitespace)
}

fn valid_relation_name(name: &str) -> bool {
    !name.is_empty() && name != "-" && !name.contains(',') && !name.chars().any(char::is_whitespace)
}

impl RelationSchema {
    pub fn new(relations: Vec<RelationDef>) -> Self {
        RelationSchema { relations }
    }

    pub fn validate(self) -> Result<Schema, SchemaError> {
        Schema::from_defs(self.relations)
    }
}

impl Schema {
    fn from_defs(defs: Vec<RelationDef>) -> Result<Schema, SchemaError> {
        if defs.len() > u16::MAX as usize {
            return Err(SchemaError::TooManyRelations);
        }
        let mut node_types: Vec<String> = Vec::new();
        let mut by_name: HashMap<String, RelationId> = HashMap::default();
        let mut type_id = |name: &str| -> Result<NodeTypeId, SchemaError> {
            if !valid_node_type(name) {
                return Err(SchemaError::InvalidNodeType(name.into()));
            }
            let idx = match node_types.iter().position(|t| t == name) {
                Some(i) => i,
                None => {
                    node_types.push(name.into());
                    node_types.len() - 1
                }
            };
            Ok(NodeTypeId(idx as u16))
        };

        let mut typing = Vec::with_capacity(defs.len());
        for (i, def) in defs.iter().enumerate() {
            if !valid_relation_name(&def.name) {
                return Err(SchemaError::InvalidRelationName(def.name.clone()));
            }
            if by_name.insert(def.name.clone(), RelationId(i as u16)).is_some() {
                return Err(SchemaError::DuplicateRelation(def.name.clone()));
            }
            typing.push((type_id(&def.domain)?, type_id(&def.range)?));
        }

        let resolve = |from: &RelationDef, name: &String| -> Result<RelationId, SchemaError> {
            by_name.get(name).copied().ok_or_else(|| SchemaError::UnknownRelation {
                relation: from.name.clone(),
                referenced: name.clone(),
            })
        };

        let n = defs.len();
        let mut inverse = vec![None; n];
        let mut parents = vec![Vec::new(); n];
        let mut disjoint = vec![Vec::new(); n];
        for (i, def) in defs.iter().enumerate() {
            if let Some(inv) = &def.inverse_of {
                inverse[i] = Some(resolve(def, inv)?);
            }
            for p in &def.parents {
                parents[i].push(resolve(def, p)?);
            }
            for d in &def.disjoint_with {
                disjoint[i].push(resolve(def, d)?);
            }
        }

        for (i, def) in defs.iter().enumerate() {
            let (dom, ran) = typing[i];
            if def.symmetric && dom != ran {
                return Err(SchemaError::SymmetricTypeMismatch(def.name.clone()));
            }
            if let Some(s) = inverse[i] {
                let s = s.index();
                if s == i {
                    return Err(SchemaError::SelfInverse(def.name.clone()));
                }
                if inverse[s] != Some(RelationId(i as u16)) {
                    return Err(SchemaError::NonMutualInverse {
                        relation: def.name.clone(),
                        inverse: defs[s].name.clone(),
                    });
                }
                if typing[s] != (ran, dom) {
                    return Err(SchemaError::InverseTypeMismatch {
                        relation: def.name.clone(),
                        inverse: defs[s].name.clone(),
                    });
                }
            }
            for p in &parents[i] {
                if typing[p.index()] != (dom, ran) {
                    return Err(SchemaError::HierarchyTypeMismatch {
                        child: def.name.clone(),
                        parent: defs[p.index()].name.clone(),
                    });
                }
            }
        }

        if let Some(cycle) = find_cycle(&parents) {
            let path: Vec<&str> = cycle.iter().map(|r| defs[r.index()].name.as_str()).collect();
            return Err(SchemaError::CyclicHierarchy(path.join(" -> ")));
        }

        let ancestors: Vec<Vec<RelationId>> = (0..n).map(|i| closure(i, &parents)).collect();
        let mut descendants = vec![Vec::new(); n];
        for (i, anc) in ancestors.iter().enumerate() {
            for a in anc {
                descendants[a.index()].push(RelationId(i as u16));
            }
        }

        // declaring a disjoint pair on either side is enough
        let mut sym_disjoint = vec![Vec::new(); n];
        for (i, ds) in disjoint.iter().enumerate() {
            for d in ds {
                sym_disjoint[i].push(*d);
                sym_disjoint[d.index()].push(RelationId(i as u16));
            }
        }
        for (i, ds) in sym_disjoint.iter_mut().enumerate() {
            ds.sort_unstable();
            ds.dedup();
            for d in ds.iter() {
                let j = d.index();
                if j == i {
                    return Err(SchemaError::SelfDisjoint(defs[i].name.clone()));
                }
                if ancestors[i].contains(d) {
                    return Err(SchemaError::DisjointWithAncestor {
                        relation: defs[i].name.clone(),
                        ancestor: defs[j].name.clone(),
                    });
                }
                if typing[i] != typing[j] {
                    return Err(SchemaError::DisjointTypeMismatch {
                        relation: defs[i].name.clone(),
                        other: defs[j].name.clone(),
                    });
                }
            }
        }

        let info = (0..n)
            .map(|i| RelationInfo {
                domain: typing[i].0,
                range: typing[i].1,
                symmetric: defs[i].symmetric,
                inverse: inverse[i],
                parents: parents[i].clone(),
                ancestors: ancestors[i].clone(),
                descendants: descendants[i].clone(),
                disjoint: sym_disjoint[i].clone(),
            })
            .collect();
        Ok(Schema { node_types, defs, info, by_name })
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn node_type_count(&self) -> usize {
        self.node_types.len()
    }

    pub fn node_types(&self) -> impl Iterator<Item = &str> {
        self.node_types.iter().map(String::as_str)
    }

    pub fn node_type_id(&self, name: &str) -> Option<NodeTypeId> {
        self.node_types.iter().position(|t| t == name).map(|i| NodeTypeId(i as u16))
    }

    pub fn node_type_name(&self, id: NodeTypeId) -> &str {
        &self.node_types[id.index()]
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> {
        (0..self.defs.len() as u16).map(RelationId)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.by_name.get(name).copied()
    }

    pub fn contains(&self, id: RelationId) -> bool {
        id.index() < self.defs.len()
    }

    pub fn def(&self, id: RelationId) -> &RelationDef {
        &self.defs[id.index()]
    }

    pub fn defs(&self) -> &[RelationDef] {
        &self.defs
    }

    pub fn name(&self, id: RelationId) -> &str {
        &self.defs[id.index()].name
    }

    pub fn domain(&self, id: RelationId) -> NodeTypeId {
        self.info[id.index()].domain
    }

    pub fn range(&self, id: RelationId) -> NodeTypeId {
        self.info[id.index()].range
    }

    pub fn is_symmetric(&self, id: RelationId) -> bool {
        self.info[id.index()].symmetric
    }

    pub fn inverse(&self, id: RelationId) -> Option<RelationId> {
        self.info[id.index()].inverse
    }

    pub fn parents(&self, id: RelationId) -> &[RelationId] {
        &self.info[id.index()].parents
    }

    /// Strict transitive ancestors, sorted.
    pub fn ancestors(&self, id: RelationId) -> &[RelationId] {
        &self.info[id.index()].ancestors
    }

    /// Strict transitive descendants, sorted.
    pub fn descendants(&self, id: RelationId) -> &[RelationId] {
        &self.info[id.index()].descendants
    }

    /// Relations disjoint with `id` (symmetric closure of the declarations), sorted.
    pub fn disjoint_with(&self, id: RelationId) -> &[RelationId] {
        &self.info[id.index()].disjoint
    }

    /// Checks whether `candidate` follows from `train` by symmetry, inversion
    /// or generalisation of a more specific relation, in that order.
    pub fn is_trivially_inferable<L: TripleLookup + ?Sized>(
        &self,
        candidate: &TripleKey,
        train: &L,
    ) -> Result<Inferability, SchemaError> {
        let r = candidate.relation;
        if !self.contains(r) {
            return Err(SchemaError::UnknownRelationId(r.0));
        }
        let info = &self.info[r.index()];
        if info.symmetric && train.contains_triple(&candidate.reversed()) {
            return Ok(Inferability::ReverseSymmetric);
        }
        if let Some(s) = info.inverse {
            if train.contains_triple(&candidate.reversed().with_relation(s)) {
                return Ok(Inferability::Inverse);
            }
        }
        if info.descendants.iter().any(|&child| train.contains_triple(&candidate.with_relation(child))) {
            return Ok(Inferability::SuperRelation);
        }
        Ok(Inferability::None)
    }

    /// Orders the endpoints of a symmetric-relation triple by entity index.
    pub fn canonical_form(&self, key: TripleKey) -> TripleKey {
        if self.is_symmetric(key.relation) && key.head > key.tail {
            key.reversed()
        } else {
            key
        }
    }

    /// Checks `key` against the relation's domain and range.
    pub fn type_check(&self, key: &TripleKey, vocab: &crate::Vocabulary) -> bool {
        self.contains(key.relation)
            && vocab.node_type(key.head) == self.domain(key.relation)
            && vocab.node_type(key.tail) == self.range(key.relation)
    }
}

fn find_cycle(parents: &[Vec<RelationId>]) -> Option<Vec<RelationId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(
        i: usize,
        parents: &[Vec<RelationId>],
        marks: &mut [Mark],
        stack: &mut Vec<RelationId>,
    ) -> Option<Vec<RelationId>> {
        marks[i] = Mark::Active;
        stack.push(RelationId(i as u16));
        for p in &parents[i] {
            match marks[p.index()] {
                Mark::Active => {
                    let start = stack.iter().position(|r| r == p).unwrap_or(0);
                    let mut cycle = stack[start..].to_vec();
                    cycle.push(*p);
                    return Some(cycle);
                }
                Mark::New => {
                    if let Some(c) = visit(p.index(), parents, marks, stack) {
                        return Some(c);
                    }
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        marks[i] = Mark::Done;
        None
    }
    let mut marks = vec![Mark::New; parents.len()];
    let mut stack = Vec::new();
    for i in 0..parents.len() {
        if marks[i] == Mark::New {
            if let Some(c) = visit(i, parents, &mut marks, &mut stack) {
                return Some(c);
            }
        }
    }
    None
}

fn closure(start: usize, parents: &[Vec<RelationId>]) -> Vec<RelationId> {
    let mut seen = vec![false; parents.len()];
    let mut todo: Vec<RelationId> = parents[start].clone();
    let mut out = Vec::new();
    while let Some(r) = todo.pop() {
        if core::mem::replace(&mut seen[r.index()], true) {
            continue;
        }
        out.push(r);
        todo.extend_from_slice(&parents[r.index()]);
    }
    out.sort_unstable();
    out
}

impl core::fmt::Display for Inferability {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Describes the schema for diagnostics, e.g. `"7 node types, 30 relations"`.
pub fn summary(schema: &Schema) -> String {
    format!("{} node types, {} relations", schema.node_type_count(), schema.len())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::triple::TripleSet;
    use crate::vocab::EntityId;
    use alloc::string::ToString;
    use proptest::prelude::*;

    /// Small schema used across the crate's unit tests.
    pub(crate) fn toy_schema() -> Schema {
        RelationSchema::new(vec![
            RelationDef::new("interacts", "GENE", "GENE").symmetric(),
            RelationDef::new("targets", "DRUG", "GENE").inverse_of("targeted_by"),
            RelationDef::new("targeted_by", "GENE", "DRUG").inverse_of("targets"),
            RelationDef::new("has_part", "GENE", "GENE").inverse_of("part_of"),
            RelationDef::new("part_of", "GENE", "GENE").inverse_of("has_part"),
            RelationDef::new("expressed_in", "GENE", "ANATOMY"),
            RelationDef::new("over_expressed_in", "GENE", "ANATOMY").child_of("expressed_in"),
            RelationDef::new("under_expressed_in", "GENE", "ANATOMY")
                .child_of("expressed_in")
                .disjoint_with("over_expressed_in"),
            RelationDef::new("assoc", "GENE", "DIS"),
        ])
        .validate()
        .unwrap_or_else(|e| panic!("{e}"))
    }

    fn rel(s: &Schema, name: &str) -> RelationId {
        s.relation_id(name).unwrap()
    }

    fn k(h: u32, r: RelationId, t: u32) -> TripleKey {
        TripleKey::new(EntityId(h), r, EntityId(t))
    }

    #[test]
    fn targets_needs_mutual_inverse() {
        let err = RelationSchema::new(vec![
            RelationDef::new("targets", "DRUG", "GENE"),
            RelationDef::new("targeted_by", "GENE", "DRUG").inverse_of("targets"),
        ])
        .validate()
        .unwrap_err();
        assert!(err.to_string().contains("non-mutual inverse"), "{err}");
    }

    #[test]
    fn rejects_hierarchy_cycle() {
        let err = RelationSchema::new(vec![
            RelationDef::new("a", "X", "X").child_of("b"),
            RelationDef::new("b", "X", "X").child_of("a"),
        ])
        .validate()
        .unwrap_err();
        assert!(err.to_string().contains("cyclic hierarchy"), "{err}");
        let err = RelationSchema::new(vec![RelationDef::new("a", "X", "X").child_of("a")])
            .validate()
            .unwrap_err();
        assert!(matches!(err, SchemaError::CyclicHierarchy(_)));
    }

    #[test]
    fn rejects_bad_definitions() {
        let cases = [
            (vec![RelationDef::new("r", "A", "B").symmetric()], "domain != range"),
            (vec![RelationDef::new("r", "A", "B"), RelationDef::new("r", "A", "B")], "duplicate"),
            (
                vec![
                    RelationDef::new("p", "A", "A"),
                    RelationDef::new("c", "A", "A").child_of("p").disjoint_with("p"),
                ],
                "ancestor",
            ),
            (
                vec![
                    RelationDef::new("p", "A", "A").disjoint_with("c"),
                    RelationDef::new("c", "A", "A").child_of("p"),
                ],
                "ancestor",
            ),
            (vec![RelationDef::new("r", "A", "A").disjoint_with("r")], "itself"),
            (vec![RelationDef::new("r", "A", "A").inverse_of("r")], "own inverse"),
            (
                vec![RelationDef::new("r", "A", "B").inverse_of("s"), RelationDef::new("s", "A", "B").inverse_of("r")],
                "incompatible",
            ),
            (vec![RelationDef::new("r", "A", "B").child_of("nope")], "unknown relation"),
            (vec![RelationDef::new("r", "GE NE", "B")], "node type"),
            (vec![RelationDef::new("r", "GENE:x", "B")], "node type"),
            (vec![RelationDef::new("a,b", "A", "B")], "relation name"),
            (
                vec![RelationDef::new("p", "A", "A"), RelationDef::new("c", "A", "B").child_of("p")],
                "different domain/range",
            ),
        ];
        for (defs, needle) in cases {
            let err = RelationSchema::new(defs.clone()).validate().unwrap_err();
            assert!(err.to_string().contains(needle), "{defs:?}: {err}");
        }
    }

    #[test]
    fn closure_is_precomputed() {
        let s = RelationSchema::new(vec![
            RelationDef::new("top", "A", "A"),
            RelationDef::new("mid", "A", "A").child_of("top"),
            RelationDef::new("leaf", "A", "A").child_of("mid"),
        ])
        .validate()
        .unwrap();
        let (top, mid, leaf) = (rel(&s, "top"), rel(&s, "mid"), rel(&s, "leaf"));
        assert_eq!(s.ancestors(leaf), &[top, mid]);
        assert_eq!(s.descendants(top), &[mid, leaf]);
        assert!(s.ancestors(top).is_empty());
    }

    #[test]
    fn disjointness_is_symmetrised() {
        let s = toy_schema();
        let over = rel(&s, "over_expressed_in");
        let under = rel(&s, "under_expressed_in");
        assert_eq!(s.disjoint_with(over), &[under]);
        assert_eq!(s.disjoint_with(under), &[over]);
        assert_eq!(s.node_type_count(), 4);
        assert_eq!(summary(&s), "4 node types, 9 relations");
    }

    #[test]
    fn inferability_cases() {
        let s = toy_schema();
        let interacts = rel(&s, "interacts");
        let train: TripleSet = [k(0, interacts, 1)].into_iter().collect();
        assert_eq!(s.is_trivially_inferable(&k(1, interacts, 0), &train), Ok(Inferability::ReverseSymmetric));
        assert_eq!(s.is_trivially_inferable(&k(0, interacts, 2), &train), Ok(Inferability::None));

        let (has_part, part_of) = (rel(&s, "has_part"), rel(&s, "part_of"));
        let train: TripleSet = [k(5, has_part, 6)].into_iter().collect();
        assert_eq!(s.is_trivially_inferable(&k(6, part_of, 5), &train), Ok(Inferability::Inverse));
        assert_eq!(s.is_trivially_inferable(&k(5, part_of, 6), &train), Ok(Inferability::None));

        let (expr, over) = (rel(&s, "expressed_in"), rel(&s, "over_expressed_in"));
        let train: TripleSet = [k(0, over, 9)].into_iter().collect();
        assert_eq!(s.is_trivially_inferable(&k(0, expr, 9), &train), Ok(Inferability::SuperRelation));
        // the specific edge does not follow from the general one
        let train: TripleSet = [k(0, expr, 9)].into_iter().collect();
        assert_eq!(s.is_trivially_inferable(&k(0, over, 9), &train), Ok(Inferability::None));

        assert_eq!(
            s.is_trivially_inferable(&k(0, RelationId(99), 1), &train),
            Err(SchemaError::UnknownRelationId(99))
        );
    }

    #[test]
    fn canonical_form_cases() {
        let s = toy_schema();
        let interacts = rel(&s, "interacts");
        let targets = rel(&s, "targets");
        assert_eq!(s.canonical_form(k(1, interacts, 0)), k(0, interacts, 1));
        assert_eq!(s.canonical_form(k(0, interacts, 1)), k(0, interacts, 1));
        assert_eq!(s.canonical_form(k(1, targets, 0)), k(1, targets, 0));
    }

    /// Symmetric relation over <= 6 entities: every reversed edge is flagged.
    #[test]
    fn reverse_symmetric_exhaustive() {
        let s = toy_schema();
        let r = rel(&s, "interacts");
        let pairs: Vec<(u32, u32)> = (0..6).flat_map(|a| (0..6).map(move |b| (a, b))).collect();
        // every subset of a 9-pair window, sliding over all pairs
        for window in pairs.windows(9) {
            for mask in 0u32..(1 << window.len()) {
                let train: TripleSet = window
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, &(a, b))| k(a, r, b))
                    .collect();
                for &(a, b) in window {
                    if train.contains(&k(a, r, b)) {
                        assert_eq!(s.is_trivially_inferable(&k(b, r, a), &train), Ok(Inferability::ReverseSymmetric));
                    }
                }
            }
        }
    }

    /// Independent pairwise checker for random raw schemas.
    fn brute_force_accepts(defs: &[RelationDef]) -> bool {
        let n = defs.len();
        let find = |name: &str| defs.iter().position(|d| d.name == name);
        for i in 0..n {
            for j in 0..n {
                if i != j && defs[i].name == defs[j].name {
                    return false;
                }
            }
        }
        for d in defs {
            let refs = d.inverse_of.iter().chain(&d.parents).chain(&d.disjoint_with);
            if refs.clone().any(|r| find(r).is_none()) {
                return false;
            }
        }
        // ancestor[i][j]: j is a strict ancestor of i, by repeated relaxation
        let mut anc = vec![vec![false; n]; n];
        for (i, d) in defs.iter().enumerate() {
            for p in &d.parents {
                anc[i][find(p).unwrap()] = true;
            }
        }
        for _ in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if anc[i][j] {
                        for m in 0..n {
                            if anc[j][m] {
                                anc[i][m] = true;
                            }
                        }
                    }
                }
            }
        }
        let disjoint = |i: usize, j: usize| {
            defs[i].disjoint_with.contains(&defs[j].name) || defs[j].disjoint_with.contains(&defs[i].name)
        };
        for i in 0..n {
            let d = &defs[i];
            if anc[i][i] {
                return false;
            }
            if d.symmetric && d.domain != d.range {
                return false;
            }
            if let Some(inv) = &d.inverse_of {
                let j = find(inv).unwrap();
                if j == i || defs[j].inverse_of.as_deref() != Some(&d.name) {
                    return false;
                }
                if defs[j].domain != d.range || defs[j].range != d.domain {
                    return false;
                }
            }
            for p in &d.parents {
                let j = find(p).unwrap();
                if defs[j].domain != d.domain || defs[j].range != d.range {
                    return false;
                }
            }
            for j in 0..n {
                if disjoint(i, j) && (i == j || anc[i][j] || anc[j][i]) {
                    return false;
                }
                if disjoint(i, j) && (defs[j].domain != d.domain || defs[j].range != d.range) {
                    return false;
                }
            }
        }
        true
    }

    fn arb_defs() -> impl Strategy<Value = Vec<RelationDef>> {
        let names = ["a", "b", "c", "d", "e"];
        let ty = prop::sample::select(vec!["X", "Y"]);
        let name = prop::sample::select(names.to_vec());
        let one = (
            name.clone(),
            ty.clone(),
            ty,
            any::<bool>(),
            prop::option::weighted(0.4, name.clone()),
            prop::collection::vec(name.clone(), 0..2),
            prop::collection::vec(name, 0..2),
        )
            .prop_map(|(n, d, r, sym, inv, parents, disj)| RelationDef {
                name: n.into(),
                domain: d.into(),
                range: r.into(),
                symmetric: sym,
                inverse_of: inv.map(Into::into),
                parents: parents.into_iter().map(Into::into).collect(),
                disjoint_with: disj.into_iter().map(Into::into).collect(),
            });
        prop::collection::vec(one, 1..5)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn validation_matches_brute_force(defs in arb_defs()) {
            let expected = brute_force_accepts(&defs);
            let got = RelationSchema::new(defs.clone()).validate();
            prop_assert_eq!(got.is_ok(), expected, "{:?} -> {:?}", defs, got.err());
        }

        #[test]
        fn canonical_form_idempotent(h in 0u32..20, t in 0u32..20, r in 0u16..9) {
            let s = toy_schema();
            let key = k(h, RelationId(r), t);
            let once = s.canonical_form(key);
            prop_assert_eq!(s.canonical_form(once), once);
        }
    }
}
