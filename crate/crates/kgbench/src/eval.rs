//! Multi-threaded evaluation of in-process scorers.

use rayon::prelude::*;

use kgbench_core::metrics::{classification_scores, EvalConfig, EvalError, EvalReport, RankContext, Scorer};
use kgbench_core::split::Split;
use kgbench_core::Graph;

use crate::{Error, Result};

pub const THREADS_VAR: &str = "KGBENCH_THREADS";

/// Worker count: `requested` (or all cores), capped by `KGBENCH_THREADS`.
pub fn resolve_threads(requested: Option<usize>) -> Result<usize> {
    let cap = match std::env::var(THREADS_VAR) {
        Ok(v) => Some(parse_threads(&v).ok_or_else(|| Error::Usage(format!("{THREADS_VAR}={v:?} is not a positive integer")))?),
        Err(std::env::VarError::NotPresent) => None,
        Err(e) => return Err(Error::Usage(format!("{THREADS_VAR}: {e}"))),
    };
    let base = requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    Ok(cap.map_or(base, |c| base.min(c)).max(1))
}

fn parse_threads(v: &str) -> Option<usize> {
    v.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Runtime(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Same result as [`kgbench_core::metrics::evaluate`], with rank queries
/// spread over the current rayon pool. Records come back in test order, so
/// the report does not depend on the thread count.
pub fn evaluate_parallel<S>(scorer: &S, split: &Split, graph: &Graph, config: &EvalConfig) -> Result<EvalReport, EvalError>
where
    S: Sync,
    for<'s> &'s S: Scorer,
{
    if split.test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let ctx = RankContext::new(split, graph, config);
    let records = split
        .test
        .par_iter()
        .map(|k| {
            let mut s = scorer;
            ctx.rank_record(&mut s, k)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut s = scorer;
    let labeled = classification_scores(&mut s, split)?;
    Ok(EvalReport::summarize(records, labeled, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use kgbench_core::embed::{EmbeddingModel, Hyperparams, ModelKind};
    use kgbench_core::metrics::evaluate;
    use kgbench_core::split::{random_split, SplitSpec};

    #[test]
    fn thread_values() {
        assert_eq!(parse_threads(" 4 "), Some(4));
        assert_eq!(parse_threads("0"), None);
        assert_eq!(parse_threads("x"), None);
    }

    #[test]
    fn parallel_matches_sequential_at_any_width() {
        let corpus = crate::synth::generate(&crate::synth::SyntheticSpec::genes(60, 600, 0.2, 3)).unwrap();
        let graph = corpus.graph();
        let split = random_split(&graph, &SplitSpec { seed: 1, ..SplitSpec::default() }).unwrap();
        let hp = Hyperparams { dim: 8, ..Hyperparams::default() };
        let model = EmbeddingModel::init(ModelKind::TransE, graph.vocab().len(), graph.schema().len(), &hp).unwrap();
        let config = EvalConfig::default();
        let mut m = &model;
        let reference = evaluate(&mut m, &split, &graph, &config).unwrap();
        for threads in [1, 3] {
            let report = with_threads(threads, || evaluate_parallel(&model, &split, &graph, &config)).unwrap().unwrap();
            assert_eq!(report, reference);
        }
    }
}
