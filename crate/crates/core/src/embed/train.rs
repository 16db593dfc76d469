use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{EmbedError, EmbeddingModel, Hyperparams, ModelKind, Norm};
use crate::graph::Graph;
use crate::metrics;
use crate::rng;
use crate::schema::RelationId;
use crate::split::{EntityPools, Split, TypedCorruptor};
use crate::triple::{TripleKey, TripleLookup, TripleSet};
use crate::vocab::EntityId;

/// `(positive, corrupted)`.
pub type TrainingPair = (TripleKey, TripleKey);

/// Sparse gradient of a batch loss; rows absent from a map are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradient {
    pub entities: BTreeMap<EntityId, Vec<f64>>,
    pub relations: BTreeMap<RelationId, Vec<f64>>,
    pub projections: BTreeMap<RelationId, Vec<f64>>,
}

fn row<K: Ord>(map: &mut BTreeMap<K, Vec<f64>>, key: K, len: usize) -> &mut Vec<f64> {
    map.entry(key).or_insert_with(|| vec![0.0; len])
}

impl Gradient {
    /// One SGD step: `θ ← θ − lr · ∇`.
    pub fn apply(&self, model: &mut EmbeddingModel, lr: f64) {
        for (&e, g) in &self.entities {
            model.entity_mut(e).iter_mut().zip(g).for_each(|(x, g)| *x -= lr * g);
        }
        for (&r, g) in &self.relations {
            model.relation_mut(r).iter_mut().zip(g).for_each(|(x, g)| *x -= lr * g);
        }
        for (&r, g) in &self.projections {
            model.projection_mut(r).iter_mut().zip(g).for_each(|(x, g)| *x -= lr * g);
        }
    }
}

fn mat_vec(m: &[f64], x: &[f64], d: usize) -> Vec<f64> {
    (0..d).map(|i| m[i * d..][..d].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// `clip(x) = x / max(1, ‖x‖)`; returns the clipped vector and the norm
/// used, if clipping was active.
fn clip(x: &[f64], norm: Norm) -> (Vec<f64>, Option<f64>) {
    let n = norm.of(x);
    if n > 1.0 {
        (x.iter().map(|v| v / n).collect(), Some(n))
    } else {
        (x.to_vec(), None)
    }
}

/// `J_clip(x)ᵀ g` where `J = I/n − x ∇nᵀ / n²` when clipping is active.
fn clip_vjp(x: &[f64], g: &[f64], n: Option<f64>, norm: Norm) -> Vec<f64> {
    let Some(n) = n else { return g.to_vec() };
    let mut grad_n = vec![0.0; x.len()];
    norm.gradient(x, &mut grad_n);
    let xg: f64 = x.iter().zip(g).map(|(a, b)| a * b).sum();
    g.iter().zip(&grad_n).map(|(gi, dn)| gi / n - dn * xg / (n * n)).collect()
}

/// Training distance of `key`. TransR clips projected entities to the unit
/// ball first. With `grad`, adds `sign · ∂distance/∂θ` to it.
fn distance(model: &EmbeddingModel, key: &TripleKey, sign: f64, grad: Option<&mut Gradient>) -> f64 {
    let (d, norm) = (model.dim(), model.norm());
    let (h, r, t) = (model.entity(key.head), model.relation(key.relation), model.entity(key.tail));
    match model.kind() {
        ModelKind::TransE => {
            let v: Vec<f64> = (0..d).map(|i| h[i] + r[i] - t[i]).collect();
            let dist = norm.of(&v);
            if let Some(grad) = grad {
                let mut g = vec![0.0; d];
                norm.gradient(&v, &mut g);
                add(row(&mut grad.entities, key.head, d), &g, sign);
                add(row(&mut grad.entities, key.tail, d), &g, -sign);
                add(row(&mut grad.relations, key.relation, d), &g, sign);
            }
            dist
        }
        ModelKind::TransR => {
            let m = model.projection(key.relation);
            let (x, y) = (mat_vec(m, h, d), mat_vec(m, t, d));
            let ((a, na), (b, nb)) = (clip(&x, norm), clip(&y, norm));
            let v: Vec<f64> = (0..d).map(|i| a[i] + r[i] - b[i]).collect();
            let dist = norm.of(&v);
            if let Some(grad) = grad {
                let mut g = vec![0.0; d];
                norm.gradient(&v, &mut g);
                let ua = clip_vjp(&x, &g, na, norm);
                let ub = clip_vjp(&y, &g, nb, norm);
                // Mᵀ u
                let mt = |u: &[f64]| -> Vec<f64> { (0..d).map(|j| (0..d).map(|i| m[i * d + j] * u[i]).sum()).collect() };
                add(row(&mut grad.entities, key.head, d), &mt(&ua), sign);
                add(row(&mut grad.entities, key.tail, d), &mt(&ub), -sign);
                add(row(&mut grad.relations, key.relation, d), &g, sign);
                let gm = row(&mut grad.projections, key.relation, d * d);
                for i in 0..d {
                    for j in 0..d {
                        gm[i * d + j] += sign * (ua[i] * h[j] - ub[i] * t[j]);
                    }
                }
            }
            dist
        }
    }
}

fn add(acc: &mut [f64], g: &[f64], scale: f64) {
    acc.iter_mut().zip(g).for_each(|(a, g)| *a += scale * g);
}

/// `Σ max(0, margin + dist(pos) − dist(neg))` over `pairs`, using training
/// distances.
pub fn batch_loss(model: &EmbeddingModel, pairs: &[TrainingPair], margin: f64) -> f64 {
    pairs
        .iter()
        .map(|(p, n)| {
            let z = margin + distance(model, p, 1.0, None) - distance(model, n, 1.0, None);
            // NaN passes through so divergence is visible
            if z <= 0.0 {
                0.0
            } else {
                z
            }
        })
        .sum()
}

/// Batch loss and its (sub)gradient. A pair at exactly zero hinge
/// contributes nothing.
pub fn batch_gradient(model: &EmbeddingModel, pairs: &[TrainingPair], margin: f64) -> (f64, Gradient) {
    let mut grad = Gradient::default();
    let mut loss = 0.0;
    for (p, n) in pairs {
        let z = margin + distance(model, p, 1.0, None) - distance(model, n, 1.0, None);
        if !(z <= 0.0) {
            loss += z;
            distance(model, p, 1.0, Some(&mut grad));
            distance(model, n, -1.0, Some(&mut grad));
        }
    }
    (loss, grad)
}

/// One pass over `positives` in minibatches. Each positive gets one typed
/// corruption not found in `known`; positives whose corruption fails are
/// skipped. Returns the mean loss per training pair.
pub fn train_epoch<L: TripleLookup + ?Sized>(
    model: &mut EmbeddingModel,
    positives: &[TripleKey],
    corruptor: &TypedCorruptor<'_>,
    known: &L,
    hp: &Hyperparams,
    epoch: u32,
) -> Result<f64, EmbedError> {
    if positives.is_empty() {
        return Err(EmbedError::EmptyTrain);
    }
    model.project_entities();
    let mut order = positives.to_vec();
    let mut r = rng::stream(hp.seed, &["train_epoch".into(), (epoch as u64).into()]);
    order.shuffle(&mut r);
    let (mut total, mut count) = (0.0, 0usize);
    let mut batch = Vec::with_capacity(hp.batch_size);
    for (b, chunk) in order.chunks(hp.batch_size).enumerate() {
        batch.clear();
        for p in chunk {
            if let Some(n) = corruptor.corrupt(p, &mut r, |c| known.contains_triple(c)) {
                batch.push((*p, n));
            }
        }
        let (loss, grad) = batch_gradient(model, &batch, hp.margin);
        if !loss.is_finite() {
            return Err(EmbedError::Divergence { epoch, batch: b });
        }
        total += loss;
        count += batch.len();
        grad.apply(model, hp.learning_rate);
        for &e in grad.entities.keys() {
            model.project_entity(e);
        }
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Validation schedule and sampler limits for [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStop {
    /// Validate every this many epochs; 0 disables validation.
    pub every: u32,
    /// Stop after this many checks without improvement; 0 never stops.
    pub patience: u32,
    pub max_corruption_attempts: u32,
}

impl Default for EarlyStop {
    fn default() -> Self {
        EarlyStop { every: 10, patience: 3, max_corruption_attempts: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Best validation checkpoint, or the last model without validation.
    pub model: EmbeddingModel,
    /// Mean loss of every epoch run.
    pub losses: Vec<f64>,
    /// `(epoch, filtered valid MRR)` per check.
    pub validation: Vec<(u32, f64)>,
    pub best_epoch: Option<u32>,
    pub stopped_early: bool,
}

/// Trains a fresh model on `split.train`. Validation MRR filters train and
/// valid positives; test edges are never consulted.
pub fn train(
    kind: ModelKind,
    split: &Split,
    graph: &Graph,
    hp: &Hyperparams,
    early: &EarlyStop,
) -> Result<TrainOutcome, EmbedError> {
    let mut model = EmbeddingModel::init(kind, graph.vocab().len(), graph.schema().len(), hp)?;
    let mut outcome =
        TrainOutcome { model: model.clone(), losses: Vec::new(), validation: Vec::new(), best_epoch: None, stopped_early: false };
    if hp.epochs == 0 {
        return Ok(outcome);
    }
    let train_set: TripleSet = split.train.iter().copied().collect();
    let known: TripleSet = split.train.iter().chain(&split.valid).copied().collect();
    let pools = EntityPools::from_triples(&split.train, graph.vocab(), graph.schema().node_type_count());
    let corruptor = TypedCorruptor::new(graph.schema(), &pools, early.max_corruption_attempts);
    let validating = early.every > 0 && !split.valid.is_empty();
    let mut best: Option<(f64, u32, EmbeddingModel)> = None;
    let mut stale = 0;
    for epoch in 1..=hp.epochs {
        outcome.losses.push(train_epoch(&mut model, &split.train, &corruptor, &train_set, hp, epoch)?);
        if validating && (epoch % early.every == 0 || epoch == hp.epochs) {
            let mrr = metrics::filtered_mrr(&mut &model, &split.valid, &known, graph)
                .map_err(|e| EmbedError::Shape(format!("validation: {e}")))?;
            outcome.validation.push((epoch, mrr));
            if best.as_ref().is_none_or(|b| mrr > b.0) {
                best = Some((mrr, epoch, model.clone()));
                stale = 0;
            } else {
                stale += 1;
                if early.patience > 0 && stale >= early.patience {
                    outcome.stopped_early = true;
                    break;
                }
            }
        }
    }
    match best {
        Some((_, epoch, m)) => {
            outcome.model = m;
            outcome.best_epoch = Some(epoch);
        }
        None => outcome.model = model,
    }
    Ok(outcome)
}
