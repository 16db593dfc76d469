//! Synthetic corpora with planted translational structure.
//!
//! Every entity gets a Gaussian latent vector and every relation a latent
//! translation `r` (zero for symmetric relations). A relation's planted
//! edges are its top-scoring typed pairs under `-‖h + r − t‖₂`; a `noise`
//! fraction of each relation's count is replaced by uniform typed pairs.
//! An inverse relation receives the exact reverses of its partner's edges,
//! and a relation never reuses a pair already taken by a relation it is
//! disjoint with.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use kgbench_core::ingest::{self, Cutoffs};
use kgbench_core::rng;
use kgbench_core::{Edge, Graph, NodeTypeId, RelationDef, RelationId, RelationSchema, Schema, TripleKey, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub schema: Schema,
    /// Entities per node type, in schema node-type order.
    pub entities: Vec<usize>,
    /// Edges per relation, in schema order.
    pub edges: Vec<usize>,
    pub latent_dim: usize,
    /// Fraction of each relation's edges drawn uniformly, in `[0, 1]`.
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("relation {relation} asks for {requested} edges but only {available} typed pairs are free")]
    Infeasible { relation: String, requested: usize, available: usize },
    #[error("inverse relations {a} and {b} need equal edge counts")]
    InverseCountMismatch { a: String, b: String },
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
}

/// One generated edge. `planted` is false for noise edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthEdge {
    pub head: (usize, u32),
    pub relation: RelationId,
    pub tail: (usize, u32),
    pub quality: f64,
    pub planted: bool,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub schema: Schema,
    pub edges: Vec<SynthEdge>,
    pub thresholds: BTreeMap<String, Cutoffs>,
    /// Row-major latent vectors per node type.
    pub entity_latent: Vec<Vec<f64>>,
    /// Latent translation per relation.
    pub relation_latent: Vec<Vec<f64>>,
}

pub const SOURCE: &str = "synth";

/// Single `GENE` type with six relations covering every schema feature:
/// `interacts` (symmetric), `activates`/`activated_by` (inverse pair),
/// `regulates` with children `up_regulates` and `down_regulates`, which are
/// disjoint.
pub fn gene_schema() -> Schema {
    RelationSchema::new(vec![
        RelationDef::new("interacts", "GENE", "GENE").symmetric(),
        RelationDef::new("activates", "GENE", "GENE").inverse_of("activated_by"),
        RelationDef::new("activated_by", "GENE", "GENE").inverse_of("activates"),
        RelationDef::new("regulates", "GENE", "GENE"),
        RelationDef::new("up_regulates", "GENE", "GENE").child_of("regulates"),
        RelationDef::new("down_regulates", "GENE", "GENE").child_of("regulates").disjoint_with("up_regulates"),
    ])
    .validate()
    .expect("built-in schema is valid")
}

impl SyntheticSpec {
    /// The built-in schema with `entities` genes and `edges` edges spread
    /// evenly over its relations.
    pub fn genes(entities: usize, edges: usize, noise: f64, seed: u64) -> Self {
        let schema = gene_schema();
        let n = schema.len();
        let per = (0..n).map(|i| edges / n + usize::from(i < edges % n)).collect::<Vec<_>>();
        // the inverse pair must match
        let mut per = per;
        per[2] = per[1];
        SyntheticSpec { schema, entities: vec![entities], edges: per, latent_dim: 8, noise, seed }
    }

    pub fn total_edges(&self) -> usize {
        self.edges.iter().sum()
    }
}

fn entity_name(e: (usize, u32)) -> String {
    format!("e{}", e.1)
}

impl SyntheticCorpus {
    pub fn label(&self, e: (usize, u32)) -> String {
        format!("{}:{}", self.schema.node_type_name(kgbench_core::NodeTypeId(e.0 as u16)), entity_name(e))
    }

    /// Edge lines in the ingest format, one per edge, in generation order.
    pub fn edge_file(&self) -> String {
        let mut out = String::with_capacity(self.edges.len() * 40);
        out.push_str("# head\trelation\ttail\tquality\tsource\n");
        for e in &self.edges {
            out.push_str(&self.label(e.head));
            out.push('\t');
            out.push_str(self.schema.name(e.relation));
            out.push('\t');
            out.push_str(&self.label(e.tail));
            out.push('\t');
            out.push_str(&e.quality.to_string());
            out.push('\t');
            out.push_str(SOURCE);
            out.push('\n');
        }
        out
    }
}

impl SyntheticCorpus {
    /// The corpus assembled directly into a graph, without quality filtering
    /// or direction handling. Entities are interned in generation order.
    pub fn graph(&self) -> Graph {
        let schema = Arc::new(self.schema.clone());
        let mut vocab = Vocabulary::new(&schema);
        let source: Arc<str> = Arc::from(SOURCE);
        let intern = |vocab: &mut Vocabulary, e: (usize, u32)| vocab.intern(NodeTypeId(e.0 as u16), &entity_name(e));
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| {
                let key = TripleKey::new(intern(&mut vocab, e.head), e.relation, intern(&mut vocab, e.tail));
                Edge::positive(key, source.clone()).with_quality(e.quality)
            })
            .collect();
        ingest::assemble_graph(schema, Arc::new(vocab), edges).0
    }
}

/// Free `(head, tail)` pairs of a relation, excluding self-loops, pairs in
/// `taken`, and for symmetric relations keeping only `head < tail`.
fn candidate_pairs(
    n_head: u32,
    n_tail: u32,
    same_type: bool,
    symmetric: bool,
    taken: &HashSet<(u32, u32)>,
) -> impl Iterator<Item = (u32, u32)> + '_ {
    (0..n_head).flat_map(move |h| {
        (0..n_tail).filter_map(move |t| {
            let skip = (same_type && h == t) || (symmetric && h > t) || taken.contains(&(h, t));
            (!skip).then_some((h, t))
        })
    })
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus, SynthError> {
    let schema = &spec.schema;
    if spec.entities.len() != schema.node_type_count() {
        return Err(SynthError::Invalid(format!(
            "{} entity counts for {} node types",
            spec.entities.len(),
            schema.node_type_count()
        )));
    }
    if spec.edges.len() != schema.len() {
        return Err(SynthError::Invalid(format!("{} edge counts for {} relations", spec.edges.len(), schema.len())));
    }
    if !(0.0..=1.0).contains(&spec.noise) || spec.latent_dim == 0 {
        return Err(SynthError::Invalid("noise must be in [0, 1] and latent_dim positive".into()));
    }
    let d = spec.latent_dim;
    let mut latent_rng = rng::stream(spec.seed, &["synthetic".into(), "latent".into()]);
    let mut gaussian = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut latent_rng)).collect() };
    let vectors: Vec<Vec<f64>> = spec.entities.iter().map(|&n| gaussian(n * d)).collect();
    let translations: Vec<Vec<f64>> = schema
        .relation_ids()
        .map(|r| if schema.is_symmetric(r) { vec![0.0; d] } else { gaussian(d) })
        .collect();

    let mut per_relation: Vec<Vec<(u32, u32, bool)>> = vec![Vec::new(); schema.len()];
    for r in schema.relation_ids() {
        let count = spec.edges[r.index()];
        if let Some(inv) = schema.inverse(r).filter(|inv| inv < &r) {
            if spec.edges[inv.index()] != count {
                return Err(SynthError::InverseCountMismatch { a: schema.name(inv).into(), b: schema.name(r).into() });
            }
            per_relation[r.index()] = per_relation[inv.index()].iter().map(|&(h, t, p)| (t, h, p)).collect();
            continue;
        }
        let (dom, ran) = (schema.domain(r).index(), schema.range(r).index());
        let (n_head, n_tail) = (spec.entities[dom] as u32, spec.entities[ran] as u32);
        let taken: HashSet<(u32, u32)> = schema
            .disjoint_with(r)
            .iter()
            .flat_map(|s| per_relation[s.index()].iter().map(|&(h, t, _)| (h, t)))
            .collect();
        let symmetric = schema.is_symmetric(r);
        let mut rr = rng::stream(spec.seed, &["synthetic".into(), "relation".into(), schema.name(r).into()]);

        let noise_count = (spec.noise * count as f64).round() as usize;
        let planted_count = count - noise_count;
        let mut chosen: Vec<(u32, u32, bool)> = Vec::with_capacity(count);
        if planted_count > 0 {
            let (hv, tv, rv) = (&vectors[dom], &vectors[ran], &translations[r.index()]);
            let mut scored: Vec<(f64, u32, u32)> = candidate_pairs(n_head, n_tail, dom == ran, symmetric, &taken)
                .map(|(h, t)| {
                    let (h_row, t_row) = (&hv[h as usize * d..][..d], &tv[t as usize * d..][..d]);
                    let dist: f64 = (0..d).map(|i| (h_row[i] + rv[i] - t_row[i]).powi(2)).sum();
                    (dist, h, t)
                })
                .collect();
            if scored.len() < count {
                return Err(SynthError::Infeasible {
                    relation: schema.name(r).into(),
                    requested: count,
                    available: scored.len(),
                });
            }
            scored.select_nth_unstable_by(planted_count - 1, |a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
            scored.truncate(planted_count);
            scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
            chosen.extend(scored.into_iter().map(|(_, h, t)| (h, t, true)));
        }
        let mut used: HashSet<(u32, u32)> = chosen.iter().map(|&(h, t, _)| (h, t)).collect();
        let available = {
            let same = u64::from(dom == ran);
            let all = n_head as u64 * n_tail as u64 - same * n_head.min(n_tail) as u64;
            let all = if symmetric { all / 2 } else { all };
            all.saturating_sub(taken.len() as u64) as usize
        };
        if count > available {
            return Err(SynthError::Infeasible { relation: schema.name(r).into(), requested: count, available });
        }
        while chosen.len() < count {
            let (mut h, mut t) = (rr.random_range(0..n_head), rr.random_range(0..n_tail));
            if symmetric && h > t {
                std::mem::swap(&mut h, &mut t);
            }
            if (dom == ran && h == t) || taken.contains(&(h, t)) || !used.insert((h, t)) {
                continue;
            }
            chosen.push((h, t, false));
        }
        per_relation[r.index()] = chosen;
    }

    let mut qrng = rng::stream(spec.seed, &["synthetic".into(), "quality".into()]);
    let mut edges = Vec::with_capacity(spec.total_edges());
    for r in schema.relation_ids() {
        let (dom, ran) = (schema.domain(r).index(), schema.range(r).index());
        for &(h, t, planted) in &per_relation[r.index()] {
            let quality = (qrng.random_range(0..1000u32) as f64) / 1000.0;
            edges.push(SynthEdge { head: (dom, h), relation: r, tail: (ran, t), quality, planted });
        }
    }
    edges.shuffle(&mut qrng);
    let thresholds = BTreeMap::from([(SOURCE.to_string(), Cutoffs { high: 0.7, medium: 0.4, low: 0.1 })]);
    Ok(SyntheticCorpus {
        schema: spec.schema.clone(),
        edges,
        thresholds,
        entity_latent: vectors,
        relation_latent: translations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats;
    use proptest::prelude::*;

    #[test]
    fn counts_are_exact_and_zero_noise_is_all_planted() {
        let spec = SyntheticSpec::genes(60, 600, 0.0, 3);
        let corpus = generate(&spec).unwrap();
        for r in spec.schema.relation_ids() {
            let n = corpus.edges.iter().filter(|e| e.relation == r).count();
            assert_eq!(n, spec.edges[r.index()]);
        }
        assert!(corpus.edges.iter().all(|e| e.planted));
        let noisy = generate(&SyntheticSpec::genes(60, 600, 0.25, 3)).unwrap();
        assert_eq!(noisy.edges.iter().filter(|e| !e.planted).count(), 6 * 25);
    }

    #[test]
    fn planted_edges_are_the_top_pairs() {
        let spec = SyntheticSpec::genes(30, 120, 0.0, 9);
        let corpus = generate(&spec).unwrap();
        assert_eq!(corpus.edges, generate(&spec).unwrap().edges);
        let d = spec.latent_dim;
        let lat = &corpus.entity_latent[0];
        for name in ["regulates", "activates"] {
            let r = spec.schema.relation_id(name).unwrap();
            let rv = &corpus.relation_latent[r.index()];
            let dist = |h: u32, t: u32| -> f64 {
                (0..d).map(|i| (lat[h as usize * d + i] + rv[i] - lat[t as usize * d + i]).powi(2)).sum()
            };
            let mine: HashSet<(u32, u32)> =
                corpus.edges.iter().filter(|e| e.relation == r).map(|e| (e.head.1, e.tail.1)).collect();
            let worst_planted = mine.iter().map(|&(h, t)| dist(h, t)).fold(0.0, f64::max);
            let best_other = (0..30u32)
                .flat_map(|h| (0..30u32).map(move |t| (h, t)))
                .filter(|&(h, t)| h != t && !mine.contains(&(h, t)))
                .map(|(h, t)| dist(h, t))
                .fold(f64::INFINITY, f64::min);
            assert!(worst_planted <= best_other, "{name}: {worst_planted} > {best_other}");
        }
    }

    #[test]
    fn inverse_and_disjoint_structure() {
        let spec = SyntheticSpec::genes(40, 900, 0.1, 1);
        let c = generate(&spec).unwrap();
        let s = &spec.schema;
        let pairs = |name: &str| -> HashSet<(u32, u32)> {
            let r = s.relation_id(name).unwrap();
            c.edges.iter().filter(|e| e.relation == r).map(|e| (e.head.1, e.tail.1)).collect()
        };
        let act: HashSet<(u32, u32)> = pairs("activates");
        let by: HashSet<(u32, u32)> = pairs("activated_by").into_iter().map(|(h, t)| (t, h)).collect();
        assert_eq!(act, by);
        assert!(pairs("up_regulates").is_disjoint(&pairs("down_regulates")));
        assert!(pairs("interacts").iter().all(|(h, t)| h < t));
    }

    #[test]
    fn infeasible_spec_is_an_error() {
        let spec = SyntheticSpec::genes(5, 600, 0.0, 1);
        assert!(matches!(generate(&spec), Err(SynthError::Infeasible { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn corpora_ingest_without_errors(seed in any::<u64>(), n in 12usize..40, edges in 6usize..120, noise in 0.0f64..=1.0) {
            let spec = SyntheticSpec::genes(n, edges, noise, seed);
            let corpus = generate(&spec).unwrap();
            let text = corpus.edge_file();
            let mut vocab = Vocabulary::new(&corpus.schema);
            let (parsed, stats) = ingest::parse_edges(text.trim_end().as_bytes().split(|b| *b == b'\n'), &corpus.schema, &mut vocab);
            prop_assert!(stats.errors.is_empty());
            prop_assert_eq!(parsed.len(), spec.total_edges());
            let schema_text = formats::format_schema(&corpus.schema);
            prop_assert!(formats::parse_schema(&schema_text, std::path::Path::new("s")).is_ok());
        }
    }
}
