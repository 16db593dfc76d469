use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{EmbedError, Hyperparams, ModelKind, Norm};
use crate::metrics::{Scorer, ScorerError};
use crate::rng;
use crate::schema::RelationId;
use crate::triple::TripleKey;
use crate::vocab::EntityId;

/// Parameters of a TransE or TransR model, stored row-major in flat buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    kind: ModelKind,
    norm: Norm,
    dim: usize,
    entities: Vec<f64>,
    relations: Vec<f64>,
    /// `d × d` per relation, TransR only.
    projections: Vec<f64>,
}

impl EmbeddingModel {
    /// Uniform init in `[-6/√d, 6/√d]`, relation rows scaled to unit norm,
    /// identity projections.
    pub fn init(kind: ModelKind, n_entities: usize, n_relations: usize, hp: &Hyperparams) -> Result<Self, EmbedError> {
        hp.validate()?;
        if n_entities == 0 || n_relations == 0 {
            return Err(EmbedError::EmptyModel);
        }
        let d = hp.dim;
        let bound = 6.0 / libm::sqrt(d as f64);
        let mut r = rng::stream(hp.seed, &["init_model".into(), kind.as_str().into()]);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| r.random_range(-bound..=bound)).collect() };
        let entities = draw(n_entities * d);
        let mut relations = draw(n_relations * d);
        for row in relations.chunks_mut(d) {
            let n = hp.norm.of(row);
            if n > 0.0 {
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
        let projections = match kind {
            ModelKind::TransE => Vec::new(),
            ModelKind::TransR => {
                let mut m = vec![0.0; n_relations * d * d];
                for block in m.chunks_mut(d * d) {
                    for i in 0..d {
                        block[i * d + i] = 1.0;
                    }
                }
                m
            }
        };
        Ok(EmbeddingModel { kind, norm: hp.norm, dim: d, entities, relations, projections })
    }

    /// Builds a model from raw buffers, checking shapes and finiteness.
    pub fn from_parts(
        kind: ModelKind,
        norm: Norm,
        dim: usize,
        entities: Vec<f64>,
        relations: Vec<f64>,
        projections: Vec<f64>,
    ) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::Shape("dimension is zero".into()));
        }
        if entities.is_empty() || relations.is_empty() {
            return Err(EmbedError::EmptyModel);
        }
        if !entities.len().is_multiple_of(dim) || !relations.len().is_multiple_of(dim) {
            return Err(EmbedError::Shape(format!("buffer lengths are not multiples of d={dim}")));
        }
        let expected_proj = match kind {
            ModelKind::TransE => 0,
            ModelKind::TransR => relations.len() / dim * dim * dim,
        };
        if projections.len() != expected_proj {
            return Err(EmbedError::Shape(format!(
                "expected {expected_proj} projection values, got {}",
                projections.len()
            )));
        }
        for (name, buf) in [("entities", &entities), ("relations", &relations), ("projections", &projections)] {
            if buf.iter().any(|x| !x.is_finite()) {
                return Err(EmbedError::NonFinite(name.into()));
            }
        }
        Ok(EmbeddingModel { kind, norm, dim, entities, relations, projections })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len() / self.dim
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len() / self.dim
    }

    pub fn entity(&self, e: EntityId) -> &[f64] {
        &self.entities[e.index() * self.dim..][..self.dim]
    }

    pub fn entity_mut(&mut self, e: EntityId) -> &mut [f64] {
        &mut self.entities[e.index() * self.dim..][..self.dim]
    }

    pub fn relation(&self, r: RelationId) -> &[f64] {
        &self.relations[r.index() * self.dim..][..self.dim]
    }

    pub fn relation_mut(&mut self, r: RelationId) -> &mut [f64] {
        &mut self.relations[r.index() * self.dim..][..self.dim]
    }

    /// Row-major `d × d` matrix of `r`; empty for TransE.
    pub fn projection(&self, r: RelationId) -> &[f64] {
        match self.kind {
            ModelKind::TransE => &[],
            ModelKind::TransR => &self.projections[r.index() * self.dim * self.dim..][..self.dim * self.dim],
        }
    }

    pub fn projection_mut(&mut self, r: RelationId) -> &mut [f64] {
        match self.kind {
            ModelKind::TransE => &mut [],
            ModelKind::TransR => {
                let dd = self.dim * self.dim;
                &mut self.projections[r.index() * dd..][..dd]
            }
        }
    }

    /// All parameters as `(entities, relations, projections)`.
    pub fn parameters_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64]) {
        (&mut self.entities, &mut self.relations, &mut self.projections)
    }

    pub fn parameters(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.entities, &self.relations, &self.projections)
    }

    pub fn contains(&self, key: &TripleKey) -> bool {
        key.head.index() < self.entity_count()
            && key.tail.index() < self.entity_count()
            && key.relation.index() < self.relation_count()
    }

    /// The vector whose norm is the distance: `h + r − t`, or
    /// `M h + r − M t` for TransR.
    pub fn residual(&self, key: &TripleKey, out: &mut Vec<f64>) {
        let (h, r, t) = (self.entity(key.head), self.relation(key.relation), self.entity(key.tail));
        out.clear();
        match self.kind {
            ModelKind::TransE => out.extend((0..self.dim).map(|i| h[i] + r[i] - t[i])),
            ModelKind::TransR => {
                let m = self.projection(key.relation);
                out.extend((0..self.dim).map(|i| {
                    let row = &m[i * self.dim..][..self.dim];
                    let mh: f64 = row.iter().zip(h).map(|(a, b)| a * b).sum();
                    let mt: f64 = row.iter().zip(t).map(|(a, b)| a * b).sum();
                    mh + r[i] - mt
                }));
            }
        }
    }

    /// Plausibility of `key`; at most 0. Panics if `key` is out of range.
    pub fn score(&self, key: &TripleKey) -> f64 {
        let mut v = Vec::with_capacity(self.dim);
        self.residual(key, &mut v);
        -self.norm.of(&v)
    }

    /// Scales every entity row with norm above 1 back onto the unit sphere.
    pub fn project_entities(&mut self) {
        let (d, norm) = (self.dim, self.norm);
        for row in self.entities.chunks_mut(d) {
            project_row(row, norm);
        }
    }

    pub(crate) fn project_entity(&mut self, e: EntityId) {
        let norm = self.norm;
        project_row(self.entity_mut(e), norm);
    }

    pub fn max_entity_norm(&self) -> f64 {
        self.entities.chunks(self.dim).map(|row| self.norm.of(row)).fold(0.0, f64::max)
    }
}

fn project_row(row: &mut [f64], norm: Norm) {
    let n = norm.of(row);
    if n > 1.0 {
        row.iter_mut().for_each(|x| *x /= n);
    }
}

impl Scorer for EmbeddingModel {
    fn score_batch(&mut self, triples: &[TripleKey], out: &mut Vec<f64>) -> Result<(), ScorerError> {
        (&*self).score_batch(triples, out)
    }
}

impl Scorer for &EmbeddingModel {
    fn score_batch(&mut self, triples: &[TripleKey], out: &mut Vec<f64>) -> Result<(), ScorerError> {
        out.clear();
        let mut v = Vec::with_capacity(self.dim);
        for key in triples {
            if !self.contains(key) {
                return Err(ScorerError(format!("{}", EmbedError::OutOfRange)));
            }
            self.residual(key, &mut v);
            out.push(-self.norm.of(&v));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hp(dim: usize, norm: Norm) -> Hyperparams {
        Hyperparams { dim, norm, seed: 7, ..Default::default() }
    }

    fn key(h: u32, r: u16, t: u32) -> TripleKey {
        TripleKey::new(EntityId(h), RelationId(r), EntityId(t))
    }

    #[test]
    fn init_shapes_and_determinism() {
        for kind in [ModelKind::TransE, ModelKind::TransR] {
            let m = EmbeddingModel::init(kind, 10, 3, &hp(8, Norm::L2)).unwrap();
            assert_eq!((m.entity_count(), m.relation_count(), m.dim()), (10, 3, 8));
            let (e, r, p) = m.parameters();
            assert_eq!((e.len(), r.len()), (80, 24));
            assert_eq!(p.len(), if kind == ModelKind::TransR { 3 * 64 } else { 0 });
            assert_eq!(m, EmbeddingModel::init(kind, 10, 3, &hp(8, Norm::L2)).unwrap());
            let bound = 6.0 / libm::sqrt(8.0);
            assert!(e.iter().all(|x| x.abs() <= bound));
        }
        for norm in [Norm::L1, Norm::L2] {
            let m = EmbeddingModel::init(ModelKind::TransE, 4, 5, &hp(8, norm)).unwrap();
            for r in 0..5 {
                assert!((norm.of(m.relation(RelationId(r))) - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(EmbeddingModel::init(ModelKind::TransE, 0, 1, &hp(8, Norm::L1)), Err(EmbedError::EmptyModel));
        let tr = EmbeddingModel::init(ModelKind::TransR, 2, 2, &hp(3, Norm::L1)).unwrap();
        assert_eq!(tr.projection(RelationId(1)), &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn hand_computed_scores() {
        let m = EmbeddingModel::from_parts(
            ModelKind::TransE,
            Norm::L2,
            2,
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0],
            vec![],
        )
        .unwrap();
        assert!((m.score(&key(0, 0, 1)) + core::f64::consts::SQRT_2).abs() < 1e-15);

        let perfect =
            EmbeddingModel::from_parts(ModelKind::TransE, Norm::L1, 2, vec![0.1, 0.2, 0.4, 0.6], vec![0.3, 0.4], vec![])
                .unwrap();
        assert!(perfect.score(&key(0, 0, 1)).abs() < 1e-15);

        let swap = EmbeddingModel::from_parts(
            ModelKind::TransR,
            Norm::L2,
            2,
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 1.0, 1.0, 0.0],
        )
        .unwrap();
        assert_eq!(swap.score(&key(0, 0, 1)), -1.0);

        let zero = EmbeddingModel::from_parts(
            ModelKind::TransR,
            Norm::L1,
            2,
            vec![0.3, -0.2, 0.9, 0.1],
            vec![0.5, -0.25],
            vec![0.0; 4],
        )
        .unwrap();
        assert_eq!(zero.score(&key(0, 0, 1)), -0.75);
    }

    #[test]
    fn from_parts_validation() {
        let e = vec![0.0; 8];
        assert!(matches!(
            EmbeddingModel::from_parts(ModelKind::TransE, Norm::L1, 3, e.clone(), vec![0.0; 3], vec![]),
            Err(EmbedError::Shape(_))
        ));
        assert!(matches!(
            EmbeddingModel::from_parts(ModelKind::TransR, Norm::L1, 4, e.clone(), vec![0.0; 4], vec![0.0; 15]),
            Err(EmbedError::Shape(_))
        ));
        assert!(matches!(
            EmbeddingModel::from_parts(ModelKind::TransE, Norm::L1, 4, vec![f64::NAN; 4], vec![0.0; 4], vec![]),
            Err(EmbedError::NonFinite(_))
        ));
    }

    #[test]
    fn out_of_range_is_a_scorer_error() {
        let mut m = EmbeddingModel::init(ModelKind::TransE, 3, 1, &hp(4, Norm::L1)).unwrap();
        let mut out = Vec::new();
        assert!(m.score_batch(&[key(0, 0, 3)], &mut out).is_err());
        assert!(m.score_batch(&[key(0, 0, 2)], &mut out).is_ok());
    }

    proptest! {
        #[test]
        fn transe_translation_invariance(seed in any::<u64>(), shift in prop::collection::vec(-3.0f64..3.0, 6), norm in prop::bool::ANY) {
            let norm = if norm { Norm::L2 } else { Norm::L1 };
            let h = Hyperparams { dim: 6, norm, seed, ..Default::default() };
            let m = EmbeddingModel::init(ModelKind::TransE, 8, 3, &h).unwrap();
            let mut shifted = m.clone();
            for e in 0..8 {
                shifted.entity_mut(EntityId(e)).iter_mut().zip(&shift).for_each(|(x, c)| *x += c);
            }
            for (hh, r, t) in [(0, 0, 1), (2, 1, 7), (5, 2, 5), (3, 0, 6)] {
                prop_assert!((m.score(&key(hh, r, t)) - shifted.score(&key(hh, r, t))).abs() < 1e-9);
            }
        }

        #[test]
        fn identity_transr_equals_transe(seed in any::<u64>(), norm in prop::bool::ANY) {
            let norm = if norm { Norm::L2 } else { Norm::L1 };
            let h = Hyperparams { dim: 5, norm, seed, ..Default::default() };
            let te = EmbeddingModel::init(ModelKind::TransE, 6, 2, &h).unwrap();
            let tr = EmbeddingModel::init(ModelKind::TransR, 6, 2, &h).unwrap();
            let (e, r, _) = te.parameters();
            let tr = EmbeddingModel::from_parts(ModelKind::TransR, norm, 5, e.to_vec(), r.to_vec(), tr.parameters().2.to_vec()).unwrap();
            for hh in 0..6 {
                for t in 0..6 {
                    for rel in 0..2 {
                        prop_assert_eq!(te.score(&key(hh, rel, t)), tr.score(&key(hh, rel, t)));
                    }
                }
            }
        }
    }
}
