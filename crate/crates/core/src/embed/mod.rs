//! Translational embedding baselines.
//!
//! TransE scores `-‖h + r − t‖_p`; TransR first maps both entities through a
//! per-relation square matrix, `-‖M h + r − M t‖_p`. Both train with a
//! margin-ranking hinge and plain SGD, corrupting with the typed sampler
//! used for split negatives.

mod model;
mod train;

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

pub use model::EmbeddingModel;
pub use train::{
    batch_gradient, batch_loss, train, train_epoch, EarlyStop, Gradient, TrainOutcome, TrainingPair,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    TransE,
    TransR,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::TransE => "TransE",
            ModelKind::TransR => "TransR",
        }
    }
}

impl FromStr for ModelKind {
    type Err = EmbedError;
    fn from_str(s: &str) -> Result<Self, EmbedError> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(ModelKind::TransE),
            "transr" => Ok(ModelKind::TransR),
            _ => Err(EmbedError::InvalidHyperparams(alloc::format!("unknown model kind {s:?}"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The `p` of the distance norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::L2 => libm::sqrt(v.iter().map(|x| x * x).sum()),
        }
    }

    /// A subgradient of the norm at `v`, written into `out`. Zero wherever
    /// the norm is not differentiable.
    pub(crate) fn gradient(self, v: &[f64], out: &mut [f64]) {
        match self {
            Norm::L1 => {
                for (o, &x) in out.iter_mut().zip(v) {
                    *o = if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                }
            }
            Norm::L2 => {
                let n = self.of(v);
                for (o, &x) in out.iter_mut().zip(v) {
                    *o = if n > 0.0 { x / n } else { 0.0 };
                }
            }
        }
    }

    pub fn p(self) -> u8 {
        match self {
            Norm::L1 => 1,
            Norm::L2 => 2,
        }
    }
}

impl FromStr for Norm {
    type Err = EmbedError;
    fn from_str(s: &str) -> Result<Self, EmbedError> {
        match s {
            "1" | "L1" | "l1" => Ok(Norm::L1),
            "2" | "L2" | "l2" => Ok(Norm::L2),
            _ => Err(EmbedError::InvalidHyperparams(alloc::format!("norm must be 1 or 2, got {s:?}"))),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.p())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub dim: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub norm: Norm,
    pub epochs: u32,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams { dim: 100, margin: 1.0, learning_rate: 0.01, norm: Norm::L1, epochs: 100, batch_size: 128, seed: 0 }
    }
}

impl Hyperparams {
    /// `epochs` may be zero; everything else must be strictly positive.
    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |what: &str| Err(EmbedError::InvalidHyperparams(alloc::format!("{what} must be positive")));
        if self.dim == 0 {
            return bad("dim");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate");
        }
        if self.batch_size == 0 {
            return bad("batch_size");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("model needs at least one entity and one relation")]
    EmptyModel,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite parameter in {0}")]
    NonFinite(String),
    #[error("no training positives")]
    EmptyTrain,
    #[error("training diverged: non-finite loss in epoch {epoch}, batch {batch}")]
    Divergence { epoch: u32, batch: usize },
    #[error("triple refers to entity or relation outside the model")]
    OutOfRange,
}
