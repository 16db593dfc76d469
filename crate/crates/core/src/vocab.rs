//! Entity interning.
//!
//! An entity is identified by its node type plus a local label, so
//! `GENE:1` and `DRUG:1` are different entities. Interning hands out dense
//! indices in first-seen order.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::HashMap;

/// Index of a node type in its [`crate::Schema`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeTypeId(pub u16);

impl NodeTypeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Dense entity index, `0..vocabulary.len()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    type_names: Vec<String>,
    entities: Vec<(NodeTypeId, Box<str>)>,
    lookup: Vec<HashMap<Box<str>, EntityId>>,
}

impl Vocabulary {
    /// Empty vocabulary over the node types of `schema`.
    pub fn new(schema: &crate::Schema) -> Self {
        let type_names: Vec<String> = schema.node_types().map(String::from).collect();
        let lookup = type_names.iter().map(|_| HashMap::default()).collect();
        Vocabulary { type_names, entities: Vec::new(), lookup }
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn intern(&mut self, node_type: NodeTypeId, local_id: &str) -> EntityId {
        let table = &mut self.lookup[node_type.index()];
        if let Some(&id) = table.get(local_id) {
            return id;
        }
        let id = EntityId(u32::try_from(self.entities.len()).expect("more than u32::MAX entities"));
        table.insert(local_id.into(), id);
        self.entities.push((node_type, local_id.into()));
        id
    }

    pub fn get(&self, node_type: NodeTypeId, local_id: &str) -> Option<EntityId> {
        self.lookup.get(node_type.index())?.get(local_id).copied()
    }

    pub fn node_type(&self, id: EntityId) -> NodeTypeId {
        self.entities[id.index()].0
    }

    pub fn local_id(&self, id: EntityId) -> &str {
        &self.entities[id.index()].1
    }

    pub fn type_name(&self, node_type: NodeTypeId) -> &str {
        &self.type_names[node_type.index()]
    }

    /// `TYPE:local` rendering of an entity.
    pub fn label(&self, id: EntityId) -> EntityLabel<'_> {
        EntityLabel { vocab: self, id }
    }

    /// Looks up a `TYPE:local` label.
    pub fn find_label(&self, label: &str) -> Option<EntityId> {
        let (ty, local) = label.split_once(':')?;
        let ty = self.type_names.iter().position(|t| t == ty)?;
        self.get(NodeTypeId(ty as u16), local)
    }

    /// True when every entity of `older` has the same index here.
    pub fn extends(&self, older: &Vocabulary) -> bool {
        self.type_names == older.type_names
            && older.entities.len() <= self.entities.len()
            && older.entities.iter().zip(&self.entities).all(|(a, b)| a == b)
    }

    pub fn ids(&self) -> impl Iterator<Item = EntityId> {
        (0..self.entities.len() as u32).map(EntityId)
    }
}

pub struct EntityLabel<'a> {
    vocab: &'a Vocabulary,
    id: EntityId,
}

impl fmt::Display for EntityLabel<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (ty, local) = &self.vocab.entities[self.id.index()];
        write!(f, "{}:{}", self.vocab.type_name(*ty), local)
    }
}
