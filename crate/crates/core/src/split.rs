//! Train/valid/test splitting without leakage, plus negatives per part.
//!
//! A split never lets a valid or test edge mention an entity unseen in
//! train, and never keeps a valid or test edge that follows from train by
//! symmetry, inversion or generalisation. In random mode offending edges
//! move to train until a fixpoint is reached; in time-slice mode train is a
//! fixed snapshot, so they are dropped.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::Graph;
use crate::rng::{self, StreamRng};
use crate::schema::{Inferability, Schema};
use crate::triple::{Edge, EdgeOrigin, Either, TripleKey, TripleLookup, TripleSet};
use crate::vocab::{EntityId, NodeTypeId, Vocabulary};
use crate::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitMode {
    Random,
    TimeSlice,
}

impl SplitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitMode::Random => "random",
            SplitMode::TimeSlice => "time_slice",
        }
    }
}

impl FromStr for SplitMode {
    type Err = SplitError;
    fn from_str(s: &str) -> Result<Self, SplitError> {
        match s {
            "random" => Ok(SplitMode::Random),
            "time_slice" => Ok(SplitMode::TimeSlice),
            other => Err(SplitError::InvalidSpec(format!("unknown split mode {other:?}"))),
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    /// `[train, valid, test]`, summing to 1.
    pub ratios: [f64; 3],
    /// Negatives per positive in each part.
    pub negative_ratio: f64,
    pub seed: u64,
    pub max_corruption_attempts: u32,
}

impl Default for SplitSpec {
    fn default() -> Self {
        // arbitrary defaults; nothing canonical to reproduce
        SplitSpec {
            mode: SplitMode::Random,
            ratios: [0.9, 0.05, 0.05],
            negative_ratio: 1.0,
            seed: 0,
            max_corruption_attempts: 100,
        }
    }
}

impl SplitSpec {
    /// Checks the spec; returns warnings for usable-but-odd settings.
    pub fn validate(&self) -> Result<Vec<String>, SplitError> {
        let bad = |m: &str| Err(SplitError::InvalidSpec(m.into()));
        if self.ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return bad("ratios must be finite and non-negative");
        }
        if libm::fabs(self.ratios.iter().sum::<f64>() - 1.0) > 1e-9 {
            return bad("ratios must sum to 1");
        }
        if !(self.negative_ratio.is_finite() && self.negative_ratio > 0.0) {
            return bad("negative_ratio must be positive");
        }
        if self.max_corruption_attempts == 0 {
            return bad("max_corruption_attempts must be positive");
        }
        if self.mode == SplitMode::TimeSlice && self.ratios[1] + self.ratios[2] <= 0.0 {
            return bad("time-slice splits need a positive valid or test ratio");
        }
        let mut warnings = Vec::new();
        if self.ratios[2] == 0.0 {
            warnings.push(String::from("test ratio is 0; the test part will be empty"));
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Part {
    Train,
    Valid,
    Test,
}

impl Part {
    pub const ALL: [Part; 3] = [Part::Train, Part::Valid, Part::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Valid => "valid",
            Part::Test => "test",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("invalid split settings: {0}")]
    InvalidSpec(String),
    #[error("split mode {expected} requested through the {got} entry point")]
    ModeMismatch { expected: SplitMode, got: SplitMode },
    #[error("graph has no positive edges")]
    EmptyGraph,
    #[error("the older snapshot has no positive edges")]
    EmptyOldGraph,
    #[error("snapshots use different schemas")]
    SchemaMismatch,
    #[error("the newer snapshot's entity vocabulary does not extend the older one's")]
    VocabularyMismatch,
}

/// Counts per leakage reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReasonCounts {
    pub unseen_entity: u64,
    pub reverse_symmetric: u64,
    pub inverse: u64,
    pub super_relation: u64,
}

impl ReasonCounts {
    fn bump(&mut self, reason: Inferability) {
        match reason {
            Inferability::None => {}
            Inferability::ReverseSymmetric => self.reverse_symmetric += 1,
            Inferability::Inverse => self.inverse += 1,
            Inferability::SuperRelation => self.super_relation += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.unseen_entity + self.reverse_symmetric + self.inverse + self.super_relation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PartNegatives {
    pub target: u64,
    pub true_negatives: u64,
    pub sampled: u64,
    /// Corruption attempts that gave up on a positive.
    pub skipped_positives: u64,
    /// Target minus what was produced, when sampling ran dry.
    pub shortfall: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NegativeReport {
    pub parts: [PartNegatives; 3],
    /// True negatives not attached to any part: their generating positive is
    /// in no part, or the triple is a known positive.
    pub true_unassigned: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitReport {
    pub mode: Option<SplitMode>,
    pub seed: u64,
    pub input_positives: u64,
    pub initial_sizes: [u64; 3],
    pub moved_to_train: ReasonCounts,
    pub dropped: ReasonCounts,
    pub repair_iterations: u64,
    pub negatives: NegativeReport,
    pub warnings: Vec<String>,
}

/// Disjoint positive parts and their negatives, each sorted by key.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub train: Vec<TripleKey>,
    pub valid: Vec<TripleKey>,
    pub test: Vec<TripleKey>,
    pub train_neg: Vec<TripleKey>,
    pub valid_neg: Vec<TripleKey>,
    pub test_neg: Vec<TripleKey>,
    pub report: SplitReport,
}

impl Split {
    pub fn part(&self, part: Part) -> &[TripleKey] {
        match part {
            Part::Train => &self.train,
            Part::Valid => &self.valid,
            Part::Test => &self.test,
        }
    }

    pub fn negatives(&self, part: Part) -> &[TripleKey] {
        match part {
            Part::Train => &self.train_neg,
            Part::Valid => &self.valid_neg,
            Part::Test => &self.test_neg,
        }
    }

    fn part_mut(&mut self, part: Part) -> &mut Vec<TripleKey> {
        match part {
            Part::Train => &mut self.train,
            Part::Valid => &mut self.valid,
            Part::Test => &mut self.test,
        }
    }

    fn negatives_mut(&mut self, part: Part) -> &mut Vec<TripleKey> {
        match part {
            Part::Train => &mut self.train_neg,
            Part::Valid => &mut self.valid_neg,
            Part::Test => &mut self.test_neg,
        }
    }

    /// All positives of the three parts.
    pub fn positive_set(&self) -> TripleSet {
        self.train.iter().chain(&self.valid).chain(&self.test).copied().collect()
    }
}

impl SplitReport {
    /// `key, value` listing in a fixed order, as written to `split_report.tsv`.
    pub fn entries(&self, split: &Split) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.into(), v));
        put("mode", self.mode.map_or("-", SplitMode::as_str).into());
        put("seed", format!("{}", self.seed));
        put("input_positives", format!("{}", self.input_positives));
        for part in Part::ALL {
            put(&format!("initial_{}", part.as_str()), format!("{}", self.initial_sizes[part.index()]));
        }
        for part in Part::ALL {
            put(&format!("final_{}", part.as_str()), format!("{}", split.part(part).len()));
        }
        for (prefix, c) in [("moved_to_train", &self.moved_to_train), ("dropped", &self.dropped)] {
            put(&format!("{prefix}_unseen_entity"), format!("{}", c.unseen_entity));
            put(&format!("{prefix}_reverse_symmetric"), format!("{}", c.reverse_symmetric));
            put(&format!("{prefix}_inverse"), format!("{}", c.inverse));
            put(&format!("{prefix}_super_relation"), format!("{}", c.super_relation));
        }
        put("repair_iterations", format!("{}", self.repair_iterations));
        for part in Part::ALL {
            let n = &self.negatives.parts[part.index()];
            let p = part.as_str();
            put(&format!("{p}_neg_target"), format!("{}", n.target));
            put(&format!("{p}_neg_true"), format!("{}", n.true_negatives));
            put(&format!("{p}_neg_sampled"), format!("{}", n.sampled));
            put(&format!("{p}_neg_skipped_positives"), format!("{}", n.skipped_positives));
            put(&format!("{p}_neg_shortfall"), format!("{}", n.shortfall));
        }
        put("true_negatives_unassigned", format!("{}", self.negatives.true_unassigned));
        for (i, w) in self.warnings.iter().enumerate() {
            put(&format!("warning_{i}"), w.clone());
        }
        out
    }
}

/// Entities available for corruption, per node type, ascending.
#[derive(Debug, Clone, Default)]
pub struct EntityPools {
    by_type: Vec<Vec<EntityId>>,
}

impl EntityPools {
    /// Entities occurring in `triples`.
    pub fn from_triples(triples: &[TripleKey], vocab: &Vocabulary, node_types: usize) -> Self {
        let mut seen = vec![false; vocab.len()];
        for k in triples {
            seen[k.head.index()] = true;
            seen[k.tail.index()] = true;
        }
        let mut by_type = vec![Vec::new(); node_types];
        for id in vocab.ids().filter(|id| seen[id.index()]) {
            by_type[vocab.node_type(id).index()].push(id);
        }
        EntityPools { by_type }
    }

    pub fn of(&self, node_type: NodeTypeId) -> &[EntityId] {
        self.by_type.get(node_type.index()).map_or(&[], Vec::as_slice)
    }
}

/// Type-respecting corruption of one side of a positive edge.
pub struct TypedCorruptor<'a> {
    schema: &'a Schema,
    pools: &'a EntityPools,
    max_attempts: u32,
}

impl<'a> TypedCorruptor<'a> {
    pub fn new(schema: &'a Schema, pools: &'a EntityPools, max_attempts: u32) -> Self {
        TypedCorruptor { schema, pools, max_attempts }
    }

    /// Flips a fair coin for the side, then draws replacement entities of
    /// the side's node type until one is not `rejected`. `None` after
    /// `max_attempts` rejections.
    pub fn corrupt<R: Rng + ?Sized>(
        &self,
        positive: &TripleKey,
        rng: &mut R,
        mut rejected: impl FnMut(&TripleKey) -> bool,
    ) -> Option<TripleKey> {
        let corrupt_head = rng.random_bool(0.5);
        let node_type =
            if corrupt_head { self.schema.domain(positive.relation) } else { self.schema.range(positive.relation) };
        let pool = self.pools.of(node_type);
        if pool.is_empty() {
            return None;
        }
        for _ in 0..self.max_attempts {
            let e = pool[rng.random_range(0..pool.len())];
            let candidate = if corrupt_head { TripleKey { head: e, ..*positive } } else { TripleKey { tail: e, ..*positive } };
            if !rejected(&candidate) {
                return Some(candidate);
            }
        }
        None
    }
}

fn check_mode(spec: &SplitSpec, expected: SplitMode) -> Result<Vec<String>, SplitError> {
    if spec.mode != expected {
        return Err(SplitError::ModeMismatch { expected: spec.mode, got: expected });
    }
    spec.validate()
}

fn shuffled(keys: &mut [TripleKey], seed: u64, op: &str) {
    let mut r = rng::stream(seed, &[op.into(), "shuffle".into()]);
    keys.shuffle(&mut r);
}

/// Seeded random split with move-to-train repair, then negatives.
pub fn random_split(g: &Graph, spec: &SplitSpec) -> Result<Split, SplitError> {
    let warnings = check_mode(spec, SplitMode::Random)?;
    if g.positives().is_empty() {
        return Err(SplitError::EmptyGraph);
    }
    let mut keys: Vec<TripleKey> = g.positives().iter().map(|e| e.key).collect();
    shuffled(&mut keys, spec.seed, "random_split");
    let n = keys.len();
    let n_valid = libm::floor(spec.ratios[1] * n as f64) as usize;
    let n_test = libm::floor(spec.ratios[2] * n as f64) as usize;
    let n_train = n - n_valid - n_test;
    let mut test = keys.split_off(n_train + n_valid);
    let valid = keys.split_off(n_train);
    let train = keys;

    let mut split = Split {
        report: SplitReport {
            mode: Some(SplitMode::Random),
            seed: spec.seed,
            input_positives: n as u64,
            initial_sizes: [train.len() as u64, valid.len() as u64, test.len() as u64],
            warnings,
            ..Default::default()
        },
        train,
        valid,
        ..Default::default()
    };
    core::mem::swap(&mut split.test, &mut test);
    repair(&mut split, g.schema(), g.vocab().len());
    for part in Part::ALL {
        split.part_mut(part).sort_unstable();
    }

    let pools = EntityPools::from_triples(&split.train, g.vocab(), g.schema().node_type_count());
    let true_negatives: Vec<&Edge> = g.negatives().iter().collect();
    sample_negatives(&mut split, &NegativeSource { known_positives: g, true_negatives: &true_negatives, pools: &pools }, g.schema(), spec);
    Ok(split)
}

/// Moves valid/test edges into train until no edge has an unseen entity
/// or is trivially inferable from train.
fn repair(split: &mut Split, schema: &Schema, n_entities: usize) {
    let mut train_index: TripleSet = split.train.iter().copied().collect();
    let mut seen = vec![false; n_entities];
    for k in &split.train {
        seen[k.head.index()] = true;
        seen[k.tail.index()] = true;
    }
    loop {
        let mut moved = 0u64;
        for part in [Part::Valid, Part::Test] {
            let candidates = core::mem::take(split.part_mut(part));
            let mut kept = Vec::with_capacity(candidates.len());
            for key in candidates {
                if seen[key.head.index()] && seen[key.tail.index()] {
                    kept.push(key);
                    continue;
                }
                seen[key.head.index()] = true;
                seen[key.tail.index()] = true;
                train_index.insert(key);
                split.train.push(key);
                split.report.moved_to_train.unseen_entity += 1;
                moved += 1;
            }
            *split.part_mut(part) = kept;
        }
        for part in [Part::Valid, Part::Test] {
            let candidates = core::mem::take(split.part_mut(part));
            let mut kept = Vec::with_capacity(candidates.len());
            for key in candidates {
                let reason = schema.is_trivially_inferable(&key, &train_index).expect("graph relations are in the schema");
                if reason == Inferability::None {
                    kept.push(key);
                    continue;
                }
                train_index.insert(key);
                split.train.push(key);
                split.report.moved_to_train.bump(reason);
                moved += 1;
            }
            *split.part_mut(part) = kept;
        }
        if moved == 0 {
            break;
        }
        split.report.repair_iterations += 1;
    }
}

/// Train is the older snapshot; valid and test are drawn from edges new in
/// the later one. Leaky or uncovered new edges are dropped.
pub fn time_slice_split(g_old: &Graph, g_new: &Graph, spec: &SplitSpec) -> Result<Split, SplitError> {
    let warnings = check_mode(spec, SplitMode::TimeSlice)?;
    if g_old.positives().is_empty() {
        return Err(SplitError::EmptyOldGraph);
    }
    if g_old.schema() != g_new.schema() {
        return Err(SplitError::SchemaMismatch);
    }
    if !g_new.vocab().extends(g_old.vocab()) {
        return Err(SplitError::VocabularyMismatch);
    }
    let train: Vec<TripleKey> = g_old.positives().iter().map(|e| e.key).collect();
    let train_index: TripleSet = train.iter().copied().collect();
    let mut seen = vec![false; g_new.vocab().len()];
    for k in &train {
        seen[k.head.index()] = true;
        seen[k.tail.index()] = true;
    }
    let mut report = SplitReport {
        mode: Some(SplitMode::TimeSlice),
        seed: spec.seed,
        input_positives: g_new.positives().len() as u64,
        warnings,
        ..Default::default()
    };
    let mut survivors = Vec::new();
    for key in g_new.positives().iter().map(|e| e.key).filter(|k| !train_index.contains(k)) {
        if !seen[key.head.index()] || !seen[key.tail.index()] {
            report.dropped.unseen_entity += 1;
            continue;
        }
        match g_new.schema().is_trivially_inferable(&key, &train_index).expect("graph relations are in the schema") {
            Inferability::None => survivors.push(key),
            reason => report.dropped.bump(reason),
        }
    }
    shuffled(&mut survivors, spec.seed, "time_slice_split");
    let share = spec.ratios[1] / (spec.ratios[1] + spec.ratios[2]);
    let n_valid = libm::floor(share * survivors.len() as f64) as usize;
    let mut test = survivors.split_off(n_valid);
    let mut valid = survivors;
    valid.sort_unstable();
    test.sort_unstable();
    report.initial_sizes = [train.len() as u64, valid.len() as u64, test.len() as u64];

    let mut split = Split { train, valid, test, report, ..Default::default() };
    let pools = EntityPools::from_triples(&split.train, g_new.vocab(), g_new.schema().node_type_count());
    let mut true_negatives: Vec<&Edge> = g_new.negatives().iter().collect();
    true_negatives.extend(g_old.negatives().iter().filter(|e| !g_new.contains(&e.key, e.polarity)));
    let known = Either(g_old, g_new);
    sample_negatives(&mut split, &NegativeSource { known_positives: &known, true_negatives: &true_negatives, pools: &pools }, g_new.schema(), spec);
    Ok(split)
}

/// What negative sampling may draw on.
pub struct NegativeSource<'a, L: TripleLookup + ?Sized> {
    /// Every positive in the graph(s); never emitted as a negative.
    pub known_positives: &'a L,
    /// Source-provided and disjointness-inferred negatives.
    pub true_negatives: &'a [&'a Edge],
    pub pools: &'a EntityPools,
}

/// Fills each part's negative set: true negatives first (inferred ones go
/// to the part of their generating positive, asserted ones to train), then
/// typed corruption up to `ceil(negative_ratio * |part|)`.
pub fn sample_negatives<L: TripleLookup + ?Sized>(
    split: &mut Split,
    source: &NegativeSource<'_, L>,
    schema: &Schema,
    spec: &SplitSpec,
) {
    let mut part_of: HashMap<TripleKey, Part> = HashMap::default();
    for part in Part::ALL {
        for k in split.part(part) {
            part_of.insert(*k, part);
        }
    }
    let mut accepted = TripleSet::new();
    let mut lists: [Vec<TripleKey>; 3] = Default::default();
    let mut report = NegativeReport::default();

    let mut true_negs: Vec<&Edge> = source.true_negatives.to_vec();
    true_negs.sort_unstable_by_key(|e| e.key);
    for e in true_negs {
        if source.known_positives.contains_triple(&e.key) || accepted.contains(&e.key) {
            report.true_unassigned += 1;
            continue;
        }
        let part = match e.origin {
            EdgeOrigin::Source => Some(Part::Train),
            EdgeOrigin::Inferred { from } => part_of.get(&e.key.with_relation(from)).copied(),
        };
        match part {
            Some(p) => {
                accepted.insert(e.key);
                lists[p.index()].push(e.key);
                report.parts[p.index()].true_negatives += 1;
            }
            None => report.true_unassigned += 1,
        }
    }

    let corruptor = TypedCorruptor::new(schema, source.pools, spec.max_corruption_attempts);
    for part in Part::ALL {
        let positives = split.part(part);
        let stats = &mut report.parts[part.index()];
        stats.target = libm::ceil(spec.negative_ratio * positives.len() as f64) as u64;
        let mut remaining = stats.target.saturating_sub(stats.true_negatives);
        if remaining == 0 || positives.is_empty() {
            continue;
        }
        let mut rng: StreamRng = rng::stream(spec.seed, &["sample_negatives".into(), part.as_str().into()]);
        let mut order: Vec<TripleKey> = positives.to_vec();
        order.shuffle(&mut rng);
        'rounds: loop {
            let mut produced = 0u64;
            for positive in &order {
                if remaining == 0 {
                    break 'rounds;
                }
                let drawn = corruptor.corrupt(positive, &mut rng, |c| {
                    source.known_positives.contains_triple(c) || accepted.contains(c)
                });
                match drawn {
                    Some(neg) => {
                        accepted.insert(neg);
                        lists[part.index()].push(neg);
                        stats.sampled += 1;
                        produced += 1;
                        remaining -= 1;
                    }
                    None => stats.skipped_positives += 1,
                }
            }
            if produced == 0 {
                break;
            }
        }
        stats.shortfall = remaining;
    }

    for part in Part::ALL {
        let mut list = core::mem::take(&mut lists[part.index()]);
        list.sort_unstable();
        *split.negatives_mut(part) = list;
    }
    split.report.negatives = report;
}
