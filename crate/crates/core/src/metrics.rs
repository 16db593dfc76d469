//! Link-prediction evaluation.
//!
//! Ranking: each test edge is ranked against corruptions of its head and of
//! its tail (typed candidates, known positives filtered out by default).
//! Ties count as the expected rank over random tie orders, so a constant
//! scorer gets `(n + 1) / 2` rather than 1. Classification: ROC AUC and
//! average precision over test positives against test negatives.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::Graph;
use crate::rng;
use crate::schema::{RelationId, Schema};
use crate::split::Split;
use crate::triple::{TripleKey, TripleLookup, TripleSet};
use crate::vocab::EntityId;

/// Failure reported by a scorer.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ScorerError(pub String);

/// Anything that maps triples to plausibility scores (higher is more
/// plausible). `out` is cleared and refilled with one score per triple, in
/// order.
pub trait Scorer {
    fn score_batch(&mut self, triples: &[TripleKey], out: &mut Vec<f64>) -> Result<(), ScorerError>;
}

impl<S: Scorer + ?Sized> Scorer for &mut S {
    fn score_batch(&mut self, triples: &[TripleKey], out: &mut Vec<f64>) -> Result<(), ScorerError> {
        (**self).score_batch(triples, out)
    }
}

/// Scores every triple the same.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn score_batch(&mut self, triples: &[TripleKey], out: &mut Vec<f64>) -> Result<(), ScorerError> {
        out.clear();
        out.resize(triples.len(), self.0);
        Ok(())
    }
}

/// Uniform pseudo-random score in `[0, 1)`, fixed per `(seed, triple)` so it
/// is independent of batching and evaluation order.
#[derive(Debug, Clone, Copy)]
pub struct UniformRandomScorer {
    pub seed: u64,
}

impl Scorer for UniformRandomScorer {
    fn score_batch(&mut self, triples: &[TripleKey], out: &mut Vec<f64>) -> Result<(), ScorerError> {
        out.clear();
        out.extend(triples.iter().map(|k| {
            rng::unit_hash(rng::stream_key(
                self.seed,
                &[(k.head.0 as u64).into(), (k.relation.0 as u64).into(), (k.tail.0 as u64).into()],
            ))
        }));
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("rank list is empty")]
    EmptyRanks,
    #[error("k must be positive")]
    ZeroK,
    #[error("labeled scores need at least one positive and one negative")]
    SingleClass,
    #[error("labeled scores contain no positive")]
    NoPositives,
    #[error("non-finite score {score} for triple {triple:?}")]
    NonFiniteScore { triple: TripleKey, score: f64 },
    #[error("scorer returned {got} scores for {expected} triples")]
    ScoreCount { expected: usize, got: usize },
    #[error("true entity {entity:?} is not among the candidates of the required node type")]
    NotACandidate { entity: EntityId },
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("scorer failed: {0}")]
    Scorer(#[from] ScorerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Head,
    Tail,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Head => "head",
            Side::Tail => "tail",
        }
    }
}

/// Rank of one true triple among its candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankOutcome {
    /// Expected rank under random tie-breaking.
    pub rank: f64,
    /// Rank if every tie broke in the true triple's favour.
    pub optimistic: f64,
    /// Rank if every tie broke against it.
    pub pessimistic: f64,
    /// Candidates scored, the true entity included.
    pub candidates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankRecord {
    pub triple: TripleKey,
    pub head: RankOutcome,
    pub tail: RankOutcome,
}

fn score_checked<S: Scorer + ?Sized>(scorer: &mut S, batch: &[TripleKey], out: &mut Vec<f64>) -> Result<(), EvalError> {
    scorer.score_batch(batch, out)?;
    if out.len() != batch.len() {
        return Err(EvalError::ScoreCount { expected: batch.len(), got: out.len() });
    }
    if let Some(i) = out.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore { triple: batch[i], score: out[i] });
    }
    Ok(())
}

/// Ranks `truth` against replacing its `side` with every entity in
/// `candidates`. With a `filter`, corruptions found in it are skipped.
pub fn rank_entity<S: Scorer + ?Sized>(
    scorer: &mut S,
    truth: &TripleKey,
    side: Side,
    candidates: &[EntityId],
    filter: Option<&dyn TripleLookup>,
) -> Result<RankOutcome, EvalError> {
    let true_entity = match side {
        Side::Head => truth.head,
        Side::Tail => truth.tail,
    };
    if !candidates.contains(&true_entity) {
        return Err(EvalError::NotACandidate { entity: true_entity });
    }
    let mut batch = Vec::with_capacity(candidates.len());
    batch.push(*truth);
    for &c in candidates {
        if c == true_entity {
            continue;
        }
        let corrupted = match side {
            Side::Head => TripleKey { head: c, ..*truth },
            Side::Tail => TripleKey { tail: c, ..*truth },
        };
        if filter.is_some_and(|f| f.contains_triple(&corrupted)) {
            continue;
        }
        batch.push(corrupted);
    }
    let mut scores = Vec::with_capacity(batch.len());
    score_checked(scorer, &batch, &mut scores)?;
    let truth_score = scores[0];
    let (mut greater, mut equal) = (0usize, 0usize);
    for &s in &scores[1..] {
        if s > truth_score {
            greater += 1;
        } else if s == truth_score {
            equal += 1;
        }
    }
    Ok(RankOutcome {
        rank: 1.0 + greater as f64 + equal as f64 / 2.0,
        optimistic: 1.0 + greater as f64,
        pessimistic: 1.0 + (greater + equal) as f64,
        candidates: batch.len(),
    })
}

/// Fraction of ranks at most `k`.
pub fn hits_at_k(ranks: &[f64], k: u32) -> Result<f64, EvalError> {
    if ranks.is_empty() {
        return Err(EvalError::EmptyRanks);
    }
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    let hits = ranks.iter().filter(|&&r| r <= k as f64).count();
    Ok(hits as f64 / ranks.len() as f64)
}

pub fn mean_reciprocal_rank(ranks: &[f64]) -> Result<f64, EvalError> {
    if ranks.is_empty() {
        return Err(EvalError::EmptyRanks);
    }
    Ok(ranks.iter().map(|r| 1.0 / r).sum::<f64>() / ranks.len() as f64)
}

fn check_scores(labeled: &[(bool, f64)]) -> Result<(), EvalError> {
    match labeled.iter().find(|(_, s)| !s.is_finite()) {
        Some(&(_, score)) => Err(EvalError::NonFiniteScore {
            triple: TripleKey::new(EntityId(0), RelationId(0), EntityId(0)),
            score,
        }),
        None => Ok(()),
    }
}

/// Groups of equal score, in the order given by `sorted`.
fn tie_groups(sorted: &[(bool, f64)]) -> impl Iterator<Item = (u64, u64)> + '_ {
    let mut i = 0;
    core::iter::from_fn(move || {
        if i >= sorted.len() {
            return None;
        }
        let s = sorted[i].1;
        let (mut pos, mut neg) = (0, 0);
        while i < sorted.len() && sorted[i].1 == s {
            if sorted[i].0 {
                pos += 1;
            } else {
                neg += 1;
            }
            i += 1;
        }
        Some((pos, neg))
    })
}

/// ROC AUC as the pairwise concordance probability (ties count one half),
/// computed by sorting.
pub fn roc_auc(labeled: &[(bool, f64)]) -> Result<f64, EvalError> {
    check_scores(labeled)?;
    let positives = labeled.iter().filter(|(p, _)| *p).count() as u64;
    let negatives = labeled.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut sorted = labeled.to_vec();
    sorted.sort_unstable_by(|a, b| a.1.total_cmp(&b.1));
    // twice the concordant count, so ties stay integral
    let mut doubled: u128 = 0;
    let mut neg_below: u128 = 0;
    for (pos, neg) in tie_groups(&sorted) {
        doubled += pos as u128 * (2 * neg_below + neg as u128);
        neg_below += neg as u128;
    }
    Ok(doubled as f64 / (2.0 * positives as f64 * negatives as f64))
}

/// Average precision. Items sharing a score form one block: every positive
/// in the block gets the precision measured at the block's end.
pub fn pr_auc(labeled: &[(bool, f64)]) -> Result<f64, EvalError> {
    check_scores(labeled)?;
    let positives = labeled.iter().filter(|(p, _)| *p).count() as u64;
    if positives == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut sorted = labeled.to_vec();
    sorted.sort_unstable_by(|a, b| b.1.total_cmp(&a.1));
    let (mut tp, mut seen, mut sum) = (0u64, 0u64, 0.0f64);
    for (pos, neg) in tie_groups(&sorted) {
        tp += pos;
        seen += pos + neg;
        if pos > 0 {
            sum += pos as f64 * (tp as f64 / seen as f64);
        }
    }
    Ok(sum / positives as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub ks: Vec<u32>,
    /// Skip corruptions that are known positives of any split part.
    pub filtered: bool,
    /// Restrict candidates to the node type the relation requires.
    pub typed_candidates: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { ks: vec![1, 3, 10], filtered: true, typed_candidates: true }
    }
}

/// Everything needed to answer rank queries for one split. Shareable
/// between threads.
pub struct RankContext<'a> {
    schema: &'a Schema,
    graph: &'a Graph,
    filter: Option<TripleSet>,
    all_entities: Vec<EntityId>,
    typed: bool,
}

impl<'a> RankContext<'a> {
    pub fn new(split: &Split, graph: &'a Graph, config: &EvalConfig) -> Self {
        let filter = config.filtered.then(|| split.positive_set());
        let all_entities = if config.typed_candidates {
            Vec::new()
        } else {
            let mut all: Vec<EntityId> =
                (0..graph.schema().node_type_count()).flat_map(|t| graph.entities_of_type(crate::NodeTypeId(t as u16)).iter().copied()).collect();
            all.sort_unstable();
            all
        };
        RankContext { schema: graph.schema(), graph, filter, all_entities, typed: config.typed_candidates }
    }

    pub fn candidates(&self, key: &TripleKey, side: Side) -> &[EntityId] {
        if !self.typed {
            return &self.all_entities;
        }
        let ty = match side {
            Side::Head => self.schema.domain(key.relation),
            Side::Tail => self.schema.range(key.relation),
        };
        self.graph.entities_of_type(ty)
    }

    pub fn rank_record<S: Scorer + ?Sized>(&self, scorer: &mut S, key: &TripleKey) -> Result<RankRecord, EvalError> {
        let filter = self.filter.as_ref().map(|f| f as &dyn TripleLookup);
        let head = rank_entity(scorer, key, Side::Head, self.candidates(key, Side::Head), filter)?;
        let tail = rank_entity(scorer, key, Side::Tail, self.candidates(key, Side::Tail), filter)?;
        Ok(RankRecord { triple: *key, head, tail })
    }
}

/// Score of one test triple for classification metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledScore {
    pub triple: TripleKey,
    pub positive: bool,
    pub score: f64,
}

const CLASSIFY_BATCH: usize = 4096;

/// Scores test positives and test negatives.
pub fn classification_scores<S: Scorer + ?Sized>(scorer: &mut S, split: &Split) -> Result<Vec<LabeledScore>, EvalError> {
    let items: Vec<(TripleKey, bool)> =
        split.test.iter().map(|k| (*k, true)).chain(split.test_neg.iter().map(|k| (*k, false))).collect();
    let mut out = Vec::with_capacity(items.len());
    let mut scores = Vec::new();
    for chunk in items.chunks(CLASSIFY_BATCH) {
        let batch: Vec<TripleKey> = chunk.iter().map(|(k, _)| *k).collect();
        score_checked(scorer, &batch, &mut scores)?;
        out.extend(chunk.iter().zip(&scores).map(|(&(triple, positive), &score)| LabeledScore { triple, positive, score }));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankSummary {
    pub queries: u64,
    /// `(k, hits@k)` in configured order.
    pub hits: Vec<(u32, f64)>,
    pub mrr: f64,
}

impl RankSummary {
    fn from_ranks(ranks: &[f64], ks: &[u32]) -> Option<Self> {
        let mrr = mean_reciprocal_rank(ranks).ok()?;
        let hits = ks.iter().map(|&k| (k, hits_at_k(ranks, k).unwrap_or(0.0))).collect();
        Some(RankSummary { queries: ranks.len() as u64, hits, mrr })
    }

    pub fn hits_at(&self, k: u32) -> Option<f64> {
        self.hits.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }
}

/// Metrics over one subset of test triples.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    /// Head and tail ranks pooled.
    pub pooled: Option<RankSummary>,
    pub head: Option<RankSummary>,
    pub tail: Option<RankSummary>,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub triples: u64,
    pub negatives: u64,
}

impl Section {
    fn compute(records: &[&RankRecord], labeled: &[&LabeledScore], ks: &[u32]) -> Section {
        let head: Vec<f64> = records.iter().map(|r| r.head.rank).collect();
        let tail: Vec<f64> = records.iter().map(|r| r.tail.rank).collect();
        let pooled: Vec<f64> = records.iter().flat_map(|r| [r.head.rank, r.tail.rank]).collect();
        let pairs: Vec<(bool, f64)> = labeled.iter().map(|l| (l.positive, l.score)).collect();
        Section {
            pooled: RankSummary::from_ranks(&pooled, ks),
            head: RankSummary::from_ranks(&head, ks),
            tail: RankSummary::from_ranks(&tail, ks),
            roc_auc: roc_auc(&pairs).ok(),
            pr_auc: pr_auc(&pairs).ok().filter(|_| pairs.iter().any(|p| !p.0)),
            triples: records.len() as u64,
            negatives: pairs.iter().filter(|p| !p.0).count() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ks: Vec<u32>,
    pub filtered: bool,
    pub typed_candidates: bool,
    pub overall: Section,
    /// Relations present in the test set, in schema order.
    pub per_relation: Vec<(RelationId, Section)>,
    /// One record per test triple, in test order.
    pub records: Vec<RankRecord>,
    pub labeled: Vec<LabeledScore>,
    /// Set when the test part has no negatives; ROC/PR AUC are then absent.
    pub classification_skipped: bool,
}

impl EvalReport {
    /// Aggregates stored per-triple records.
    pub fn summarize(records: Vec<RankRecord>, labeled: Vec<LabeledScore>, config: &EvalConfig) -> EvalReport {
        let ks = config.ks.clone();
        let all_records: Vec<&RankRecord> = records.iter().collect();
        let all_labeled: Vec<&LabeledScore> = labeled.iter().collect();
        let overall = Section::compute(&all_records, &all_labeled, &ks);
        let mut relations: Vec<RelationId> = records.iter().map(|r| r.triple.relation).collect();
        relations.sort_unstable();
        relations.dedup();
        let per_relation = relations
            .into_iter()
            .map(|rel| {
                let recs: Vec<&RankRecord> = records.iter().filter(|r| r.triple.relation == rel).collect();
                let labs: Vec<&LabeledScore> = labeled.iter().filter(|l| l.triple.relation == rel).collect();
                (rel, Section::compute(&recs, &labs, &ks))
            })
            .collect();
        let classification_skipped = !labeled.iter().any(|l| !l.positive);
        EvalReport {
            ks,
            filtered: config.filtered,
            typed_candidates: config.typed_candidates,
            overall,
            per_relation,
            records,
            labeled,
            classification_skipped,
        }
    }
}

/// Ranks every test triple on both sides and scores test positives against
/// test negatives.
pub fn evaluate<S: Scorer + ?Sized>(
    scorer: &mut S,
    split: &Split,
    graph: &Graph,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    if split.test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let ctx = RankContext::new(split, graph, config);
    let records = split.test.iter().map(|k| ctx.rank_record(scorer, k)).collect::<Result<Vec<_>, _>>()?;
    let labeled = classification_scores(scorer, split)?;
    Ok(EvalReport::summarize(records, labeled, config))
}

/// Filtered MRR over `triples`, pooled over both sides.
pub fn filtered_mrr<S: Scorer + ?Sized>(
    scorer: &mut S,
    triples: &[TripleKey],
    known: &TripleSet,
    graph: &Graph,
) -> Result<f64, EvalError> {
    let schema = graph.schema();
    let mut ranks = Vec::with_capacity(triples.len() * 2);
    for key in triples {
        for (side, ty) in [(Side::Head, schema.domain(key.relation)), (Side::Tail, schema.range(key.relation))] {
            ranks.push(rank_entity(scorer, key, side, graph.entities_of_type(ty), Some(known))?.rank);
        }
    }
    mean_reciprocal_rank(&ranks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::assemble_graph;
    use crate::schema::tests::toy_schema;
    use crate::split::{random_split, SplitSpec};
    use crate::triple::Edge;
    use crate::vocab::Vocabulary;
    use alloc::sync::Arc;
    use alloc::format;
    use proptest::prelude::*;

    /// Scores from a fixed table keyed by triple; anything else gets `default`.
    struct TableScorer {
        table: Vec<(TripleKey, f64)>,
        default: f64,
    }

    impl Scorer for TableScorer {
        fn score_batch(&mut self, triples: &[TripleKey], out: &mut Vec<f64>) -> Result<(), ScorerError> {
            out.clear();
            out.extend(triples.iter().map(|k| {
                self.table.iter().find(|(t, _)| t == k).map_or(self.default, |(_, s)| *s)
            }));
            Ok(())
        }
    }

    fn k(h: u32, t: u32) -> TripleKey {
        TripleKey::new(EntityId(h), RelationId(0), EntityId(t))
    }

    fn ents(ids: &[u32]) -> Vec<EntityId> {
        ids.iter().map(|&i| EntityId(i)).collect()
    }

    #[test]
    fn rank_examples() {
        let truth = k(0, 1);
        let mut s = TableScorer { table: vec![(k(0, 1), 0.9), (k(0, 2), 0.5), (k(0, 3), 0.1)], default: 0.0 };
        let r = rank_entity(&mut s, &truth, Side::Tail, &ents(&[1, 2, 3]), None).unwrap();
        assert_eq!((r.rank, r.candidates), (1.0, 3));

        let mut s = TableScorer { table: vec![], default: 0.5 };
        let r = rank_entity(&mut s, &truth, Side::Tail, &ents(&[1, 2, 3]), None).unwrap();
        assert_eq!((r.rank, r.optimistic, r.pessimistic), (2.0, 1.0, 3.0));

        // candidate 2 outranks the truth but is a known positive
        let mut s = TableScorer { table: vec![(k(0, 1), 0.5), (k(0, 2), 0.9), (k(0, 3), 0.1)], default: 0.0 };
        let raw = rank_entity(&mut s, &truth, Side::Tail, &ents(&[1, 2, 3]), None).unwrap();
        let known: TripleSet = [k(0, 2)].into_iter().collect();
        let filtered = rank_entity(&mut s, &truth, Side::Tail, &ents(&[1, 2, 3]), Some(&known)).unwrap();
        assert_eq!((raw.rank, filtered.rank, filtered.candidates), (2.0, 1.0, 2));

        assert!(matches!(
            rank_entity(&mut s, &truth, Side::Head, &ents(&[1, 2]), None),
            Err(EvalError::NotACandidate { .. })
        ));
        let mut nan = ConstantScorer(f64::NAN);
        assert!(matches!(
            rank_entity(&mut nan, &truth, Side::Tail, &ents(&[1, 2]), None),
            Err(EvalError::NonFiniteScore { .. })
        ));
    }

    #[test]
    fn hits_and_mrr_examples() {
        assert_eq!(hits_at_k(&[1.0, 5.0, 12.0, 3.0], 10), Ok(0.75));
        assert_eq!(hits_at_k(&[1.0, 1.0], 1), Ok(1.0));
        assert_eq!(hits_at_k(&[4.0, 7.0], 3), Ok(0.0));
        assert_eq!(hits_at_k(&[], 3), Err(EvalError::EmptyRanks));
        assert_eq!(mean_reciprocal_rank(&[1.0, 1.0, 1.0]), Ok(1.0));
        assert!((mean_reciprocal_rank(&[1.0, 2.0, 4.0]).unwrap() - 1.75 / 3.0).abs() < 1e-15);
        assert_eq!(mean_reciprocal_rank(&[10.0]), Ok(0.1));
        assert_eq!(mean_reciprocal_rank(&[]), Err(EvalError::EmptyRanks));
    }

    #[test]
    fn auc_examples() {
        let lab = |p: &[f64], n: &[f64]| -> Vec<(bool, f64)> {
            p.iter().map(|&s| (true, s)).chain(n.iter().map(|&s| (false, s))).collect()
        };
        assert_eq!(roc_auc(&lab(&[0.9, 0.8], &[0.7, 0.1])), Ok(1.0));
        assert_eq!(roc_auc(&lab(&[0.8, 0.4], &[0.6, 0.2])), Ok(0.75));
        assert_eq!(roc_auc(&lab(&[0.3, 0.3], &[0.3])), Ok(0.5));
        assert_eq!(roc_auc(&lab(&[0.3], &[])), Err(EvalError::SingleClass));

        assert_eq!(pr_auc(&lab(&[0.9], &[0.1])), Ok(1.0));
        assert_eq!(pr_auc(&lab(&[0.1], &[0.9])), Ok(0.5));
        let ap = pr_auc(&lab(&[0.9, 0.5], &[0.7, 0.1])).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(pr_auc(&lab(&[], &[0.5])), Err(EvalError::NoPositives));
    }

    fn star_graph(n: u32) -> (Graph, Split) {
        // relation "assoc" GENE -> DIS; every gene links to one disease
        let schema = Arc::new(toy_schema());
        let gene = schema.node_type_id("GENE").unwrap();
        let dis = schema.node_type_id("DIS").unwrap();
        let assoc = schema.relation_id("assoc").unwrap();
        let mut vocab = Vocabulary::new(&schema);
        let genes: Vec<_> = (0..n).map(|i| vocab.intern(gene, &format!("g{i}"))).collect();
        let diseases: Vec<_> = (0..n).map(|i| vocab.intern(dis, &format!("d{i}"))).collect();
        let edges: Vec<Edge> = (0..n as usize)
            .flat_map(|i| {
                [
                    Edge::positive(TripleKey::new(genes[i], assoc, diseases[i]), "s".into()),
                    Edge::positive(TripleKey::new(genes[i], assoc, diseases[(i + 1) % n as usize]), "s".into()),
                ]
            })
            .collect();
        let (g, _) = assemble_graph(schema, Arc::new(vocab), edges);
        let split = random_split(&g, &SplitSpec { ratios: [0.5, 0.0, 0.5], seed: 5, ..Default::default() }).unwrap();
        (g, split)
    }

    /// Scores the test triples 1 and everything else 0.
    struct Oracle(TripleSet);

    impl Scorer for Oracle {
        fn score_batch(&mut self, triples: &[TripleKey], out: &mut Vec<f64>) -> Result<(), ScorerError> {
            out.clear();
            out.extend(triples.iter().map(|k| if self.0.contains(k) { 1.0 } else { 0.0 }));
            Ok(())
        }
    }

    #[test]
    fn perfect_scorer_is_perfect() {
        let (g, split) = star_graph(40);
        assert!(!split.test.is_empty());
        let mut oracle = Oracle(split.test.iter().copied().collect());
        let report = evaluate(&mut oracle, &split, &g, &EvalConfig::default()).unwrap();
        let pooled = report.overall.pooled.as_ref().unwrap();
        assert_eq!(pooled.hits_at(1), Some(1.0));
        assert_eq!(pooled.mrr, 1.0);
        assert_eq!(report.overall.roc_auc, Some(1.0));
        // a single relation: overall equals its section
        assert_eq!(report.per_relation.len(), 1);
        assert_eq!(report.per_relation[0].1, report.overall);
    }

    #[test]
    fn missing_negatives_skip_classification() {
        let (g, mut split) = star_graph(20);
        split.test_neg.clear();
        let report = evaluate(&mut ConstantScorer(0.0), &split, &g, &EvalConfig::default()).unwrap();
        assert!(report.classification_skipped);
        assert_eq!(report.overall.roc_auc, None);
        assert!(report.overall.pooled.is_some());
        split.test.clear();
        assert_eq!(
            evaluate(&mut ConstantScorer(0.0), &split, &g, &EvalConfig::default()),
            Err(EvalError::EmptyTestSet)
        );
    }

    #[test]
    fn uniform_random_scorer_mrr_is_harmonic() {
        // raw typed ranking over n candidates per query
        let n = 50u32;
        let (g, split) = star_graph(n);
        let config = EvalConfig { filtered: false, ..Default::default() };
        let mut total = 0.0;
        let mut queries = 0u64;
        for seed in 0..40 {
            let report = evaluate(&mut UniformRandomScorer { seed }, &split, &g, &config).unwrap();
            let pooled = report.overall.pooled.unwrap();
            total += pooled.mrr * pooled.queries as f64;
            queries += pooled.queries;
        }
        let harmonic: f64 = (1..=n).map(|i| 1.0 / i as f64).sum();
        let expected = harmonic / n as f64;
        // per-query reciprocal-rank sd is about 0.2; 3 sigma over `queries` draws
        let tolerance = 3.0 * 0.2 / libm::sqrt(queries as f64);
        let got = total / queries as f64;
        assert!((got - expected).abs() < tolerance, "{got} vs {expected} (tol {tolerance})");
    }

    /// O(n^2) concordance oracle.
    fn roc_oracle(v: &[(bool, f64)]) -> f64 {
        let mut sum = 0.0;
        let mut pairs = 0.0;
        for a in v.iter().filter(|x| x.0) {
            for b in v.iter().filter(|x| !x.0) {
                pairs += 1.0;
                if a.1 > b.1 {
                    sum += 1.0;
                } else if a.1 == b.1 {
                    sum += 0.5;
                }
            }
        }
        sum / pairs
    }

    fn labeled_strategy() -> impl Strategy<Value = Vec<(bool, f64)>> {
        prop::collection::vec((any::<bool>(), 0u8..12), 2..120)
            .prop_map(|v| v.into_iter().map(|(p, s)| (p, s as f64 / 4.0)).collect())
    }

    proptest! {
        #[test]
        fn monotone_transform_invariance(v in labeled_strategy()) {
            prop_assume!(v.iter().any(|x| x.0) && v.iter().any(|x| !x.0));
            let t: Vec<(bool, f64)> = v.iter().map(|&(p, s)| (p, libm::exp(3.0 * s) - 7.0)).collect();
            prop_assert_eq!(roc_auc(&v).unwrap(), roc_auc(&t).unwrap());
            prop_assert_eq!(pr_auc(&v).unwrap(), pr_auc(&t).unwrap());
            prop_assert!((roc_auc(&v).unwrap() - roc_oracle(&v)).abs() < 1e-12);
        }

        #[test]
        fn label_swap_complements_without_ties(scores in prop::collection::hash_set(0u32..100_000, 2..60), split_at in 1usize..59) {
            let mut scores: Vec<u32> = scores.into_iter().collect();
            scores.sort();
            let split_at = split_at.min(scores.len() - 1);
            let v: Vec<(bool, f64)> = scores.iter().enumerate().map(|(i, &s)| ((i * 7919 + split_at) % 3 == 0 || i == 0, s as f64)).collect();
            prop_assume!(v.iter().any(|x| !x.0));
            let swapped: Vec<(bool, f64)> = v.iter().map(|&(p, s)| (!p, s)).collect();
            prop_assert!((roc_auc(&swapped).unwrap() - (1.0 - roc_auc(&v).unwrap())).abs() < 1e-12);
        }

        #[test]
        fn hits_monotone_in_k(ranks in prop::collection::vec(1u32..500, 1..50)) {
            let r: Vec<f64> = ranks.iter().map(|&x| x as f64 / 2.0 + 1.0).collect();
            let mut last = 0.0;
            for k in 1..300 {
                let h = hits_at_k(&r, k).unwrap();
                prop_assert!(h >= last);
                last = h;
            }
            prop_assert_eq!(hits_at_k(&r, u32::MAX).unwrap(), 1.0);
        }
    }
}
