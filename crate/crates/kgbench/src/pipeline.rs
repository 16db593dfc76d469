//! The four stages and the synthetic-corpus writer.
//!
//! Layout under the output directory:
//!
//! ```text
//! resolved_config.txt
//! graph/  edges.tsv [edges_new.tsv] schema.tsv ingest_report.tsv
//!         [ingest_report_new.tsv] parse_errors.tsv stats.tsv
//! split/  train.tsv valid.tsv test.tsv *_neg.tsv split_report.tsv
//! model/  model.tsv loss.tsv validation.tsv train_report.tsv
//! eval/   report.tsv [ranks.tsv]
//! ```
//!
//! Each stage reads only files of earlier stages and publishes its own
//! directory in one rename, so a failed stage leaves the previous output
//! untouched.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use kgbench_core::embed::{self, EmbedError};
use kgbench_core::ingest::{self, IngestReport, QualitySetting};
use kgbench_core::metrics::{self, EvalError, EvalReport};
use kgbench_core::split::{self, Split, SplitError, SplitMode};
use kgbench_core::{Edge, Graph, Schema, Vocabulary};

use crate::config::{Directionality, PipelineConfig, Stage};
use crate::error::{Error, Result};
use crate::eval::{evaluate_parallel, with_threads};
use crate::formats::{self, SPLIT_FILES};
use crate::protocol::ExternalScorer;
use crate::synth::SyntheticCorpus;

pub const GRAPH_DIR: &str = "graph";
pub const SPLIT_DIR: &str = "split";
pub const MODEL_DIR: &str = "model";
pub const EVAL_DIR: &str = "eval";
pub const RESOLVED_CONFIG: &str = "resolved_config.txt";

/// Writes `files` into `out/name` through a temporary sibling directory.
fn publish(out: &Path, name: &str, files: &[(&str, String)]) -> Result<PathBuf> {
    fs::create_dir_all(out).map_err(Error::io(out))?;
    let tmp = out.join(format!(".{name}.tmp"));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(Error::io(&tmp))?;
    }
    fs::create_dir(&tmp).map_err(Error::io(&tmp))?;
    for (file, content) in files {
        let p = tmp.join(file);
        fs::write(&p, content).map_err(Error::io(&p))?;
    }
    let dst = out.join(name);
    if dst.exists() {
        fs::remove_dir_all(&dst).map_err(Error::io(&dst))?;
    }
    fs::rename(&tmp, &dst).map_err(Error::io(&dst))?;
    Ok(dst)
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content).map_err(Error::io(&tmp))?;
    fs::rename(&tmp, path).map_err(Error::io(path))
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Usage(format!("{what} file not found: {}", path.display())))
    }
}

fn configured<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Usage(format!("no {key} file configured (set `{key}`)")))
}

/// Checks that every input the selected stages read from outside the output
/// directory exists.
pub fn check_inputs(cfg: &PipelineConfig, stages: &[Stage]) -> Result<()> {
    cfg.out_dir()?;
    if stages.contains(&Stage::CreateGraph) {
        require(configured(&cfg.schema, "schema")?, "schema")?;
        require(configured(&cfg.edges, "edges")?, "edges")?;
        if let Some(p) = &cfg.edges_new {
            require(p, "edges_new")?;
        }
        if let Some(p) = &cfg.thresholds {
            require(p, "thresholds")?;
        }
    }
    if stages.contains(&Stage::Split) && cfg.split.mode == SplitMode::TimeSlice && cfg.edges_new.is_none() {
        return Err(Error::Usage("split_mode = time_slice needs an `edges_new` snapshot".into()));
    }
    Ok(())
}

/// Writes the resolved configuration, then runs `stages` in canonical order.
pub fn run(cfg: &PipelineConfig, stages: &[Stage], threads: usize) -> Result<()> {
    check_inputs(cfg, stages)?;
    let out = cfg.out_dir()?;
    write_atomic(&out.join(RESOLVED_CONFIG), &cfg.resolved())?;
    for stage in Stage::ALL.into_iter().filter(|s| stages.contains(s)) {
        match stage {
            Stage::CreateGraph => create_graph(cfg, out)?,
            Stage::Split => split_stage(cfg, out)?,
            Stage::Train => train_stage(cfg, out)?,
            Stage::Evaluate => evaluate_stage(cfg, out, threads)?,
        }
    }
    Ok(())
}

fn ingest_setting(cfg: &PipelineConfig) -> Result<QualitySetting> {
    let thresholds = match &cfg.thresholds {
        Some(p) => formats::read_thresholds(p)?,
        None => Default::default(),
    };
    QualitySetting::new(cfg.quality, thresholds).map_err(|e| match &cfg.thresholds {
        Some(p) => Error::data(p, None, e.to_string()),
        None => Error::Usage(e.to_string()),
    })
}

/// Parsed and filtered edges of one input file, before assembly.
struct Ingested {
    edges: Vec<Edge>,
    report: IngestReport,
}

fn ingest_file(path: &Path, schema: &Schema, vocab: &mut Vocabulary, setting: &QualitySetting, cfg: &PipelineConfig) -> Result<Ingested> {
    let mut report = IngestReport::default();
    let (edges, parse) = formats::read_edges(path, schema, vocab)?;
    report.parse = parse;
    let (edges, quality) = ingest::apply_quality_filter(edges, setting).map_err(|e| Error::data(path, None, e.to_string()))?;
    report.quality = quality;
    let (edges, exclusion) = ingest::filter_sources_and_relations(edges, &cfg.exclude_sources, &cfg.exclude_relations, schema);
    report.exclusion = exclusion;
    let (positives, mut negatives): (Vec<Edge>, Vec<Edge>) = edges.into_iter().partition(Edge::is_positive);
    let (positives, direction) = match cfg.directionality {
        Directionality::Directed => ingest::make_directed(positives, schema),
        Directionality::Undirected => ingest::make_undirected(positives, schema),
    };
    report.direction = direction;
    let (inferred, neg) = ingest::infer_true_negatives(&positives, schema);
    report.negatives = neg;
    negatives.extend(inferred);
    let mut edges = positives;
    edges.append(&mut negatives);
    Ok(Ingested { edges, report })
}

fn parse_error_rows(out: &mut String, file: &str, report: &IngestReport) {
    for e in &report.parse.errors {
        out.push_str(&format!("{file}\t{}\t{}\n", e.line, e.reason));
    }
}

fn warn_parse_errors(path: &Path, report: &IngestReport) {
    const SHOWN: usize = 5;
    let errors = &report.parse.errors;
    for e in errors.iter().take(SHOWN) {
        eprintln!("warning: {}:{}: {}", path.display(), e.line, e.reason);
    }
    if errors.len() > SHOWN {
        eprintln!("warning: {}: {} more malformed lines skipped", path.display(), errors.len() - SHOWN);
    }
}

fn stats_entries(g: &Graph) -> Vec<(String, String)> {
    let s = g.stats();
    let mut out = vec![
        ("entities".to_string(), s.entity_count.to_string()),
        ("positives".into(), s.positive_count.to_string()),
        ("negatives".into(), s.negative_count.to_string()),
        ("node_types".into(), s.node_type_count.to_string()),
        ("edge_types".into(), s.edge_type_count.to_string()),
    ];
    for (t, n) in s.entities_per_type {
        out.push((format!("entities:{t}"), n.to_string()));
    }
    for (r, p, n) in s.triples_per_relation {
        out.push((format!("positives:{r}"), p.to_string()));
        out.push((format!("negatives:{r}"), n.to_string()));
    }
    out
}

/// Builds the graph (and the newer snapshot, if configured) from the
/// configured inputs.
pub fn create_graph(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let schema_path = configured(&cfg.schema, "schema")?;
    let edges_path = configured(&cfg.edges, "edges")?;
    let schema = Arc::new(formats::read_schema(schema_path)?);
    let setting = ingest_setting(cfg)?;
    let mut vocab = Vocabulary::new(&schema);
    let old = ingest_file(edges_path, &schema, &mut vocab, &setting, cfg)?;
    let new = match &cfg.edges_new {
        Some(p) => Some((p, ingest_file(p, &schema, &mut vocab, &setting, cfg)?)),
        None => None,
    };
    let vocab = Arc::new(vocab);

    let mut files: Vec<(&str, String)> = vec![("schema.tsv", formats::format_schema(&schema))];
    let mut errors = String::from("# file\tline\treason\n");
    let mut summary = Vec::new();
    let mut snapshots = vec![(edges_path, old, "edges.tsv", "ingest_report.tsv")];
    if let Some((p, n)) = new {
        snapshots.push((p, n, "edges_new.tsv", "ingest_report_new.tsv"));
    }
    for (path, Ingested { edges, mut report }, edges_file, report_file) in snapshots {
        warn_parse_errors(path, &report);
        let (graph, assembly) = ingest::assemble_graph(schema.clone(), vocab.clone(), edges);
        report.assembly = assembly;
        debug_assert!(report.accounting_holds());
        parse_error_rows(&mut errors, edges_file, &report);
        files.push((edges_file, formats::format_edges(graph.edges(), &schema, &vocab)));
        files.push((report_file, formats::format_kv(report.entries())));
        summary.push(format!("{edges_file}: {} positives, {} negatives", graph.positives().len(), graph.negatives().len()));
        if edges_file == "edges.tsv" {
            files.push(("stats.tsv", formats::format_kv(stats_entries(&graph))));
        }
    }
    files.push(("parse_errors.tsv", errors));
    let dir = publish(out, GRAPH_DIR, &files)?;
    eprintln!("create-graph: {} -> {}", summary.join("; "), dir.display());
    Ok(())
}

/// The graph directory's snapshots, re-assembled over one vocabulary:
/// `edges.tsv` and, when present, `edges_new.tsv`.
pub struct Graphs {
    pub primary: Graph,
    pub newer: Option<Graph>,
}

impl Graphs {
    /// The graph rank queries draw candidates from.
    pub fn for_mode(&self, mode: SplitMode) -> &Graph {
        match (mode, &self.newer) {
            (SplitMode::TimeSlice, Some(g)) => g,
            _ => &self.primary,
        }
    }
}

fn read_stage_edges(path: &Path, schema: &Schema, vocab: &mut Vocabulary) -> Result<Vec<Edge>> {
    let (edges, stats) = formats::read_edges(path, schema, vocab)?;
    match stats.errors.first() {
        Some(e) => Err(Error::data(path, Some(e.line), e.reason.clone())),
        None => Ok(edges),
    }
}

pub fn load_graphs(out: &Path) -> Result<Graphs> {
    let dir = out.join(GRAPH_DIR);
    let schema_path = dir.join("schema.tsv");
    if !schema_path.is_file() {
        return Err(Error::Usage(format!("no graph in {}: run create-graph first", out.display())));
    }
    let schema = Arc::new(formats::read_schema(&schema_path)?);
    let mut vocab = Vocabulary::new(&schema);
    let old = read_stage_edges(&dir.join("edges.tsv"), &schema, &mut vocab)?;
    let new_path = dir.join("edges_new.tsv");
    let new = if new_path.is_file() { Some(read_stage_edges(&new_path, &schema, &mut vocab)?) } else { None };
    let vocab = Arc::new(vocab);
    let primary = ingest::assemble_graph(schema.clone(), vocab.clone(), old).0;
    let newer = new.map(|e| ingest::assemble_graph(schema, vocab, e).0);
    Ok(Graphs { primary, newer })
}

fn split_error(e: SplitError) -> Error {
    match e {
        SplitError::InvalidSpec(_) | SplitError::ModeMismatch { .. } => Error::Usage(e.to_string()),
        _ => Error::Runtime(e.to_string()),
    }
}

pub fn split_stage(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let graphs = load_graphs(out)?;
    let split = match (cfg.split.mode, &graphs.newer) {
        (SplitMode::Random, _) => split::random_split(&graphs.primary, &cfg.split),
        (SplitMode::TimeSlice, Some(new)) => split::time_slice_split(&graphs.primary, new, &cfg.split),
        (SplitMode::TimeSlice, None) => {
            return Err(Error::Usage(format!("time-slice split needs {}/edges_new.tsv", GRAPH_DIR)))
        }
    }
    .map_err(split_error)?;
    let g = graphs.for_mode(cfg.split.mode);
    let (schema, vocab) = (g.schema(), g.vocab());
    let parts = [&split.train, &split.valid, &split.test, &split.train_neg, &split.valid_neg, &split.test_neg];
    let mut files: Vec<(&str, String)> =
        SPLIT_FILES.iter().zip(parts).map(|(f, p)| (*f, formats::format_triples(p, schema, vocab))).collect();
    files.push(("split_report.tsv", formats::format_kv(split.report.entries(&split))));
    for w in &split.report.warnings {
        eprintln!("warning: {w}");
    }
    let dir = publish(out, SPLIT_DIR, &files)?;
    eprintln!(
        "split: {} train, {} valid, {} test -> {}",
        split.train.len(),
        split.valid.len(),
        split.test.len(),
        dir.display()
    );
    Ok(())
}

fn load_split(out: &Path, g: &Graph) -> Result<Split> {
    let dir = out.join(SPLIT_DIR);
    if !dir.join(SPLIT_FILES[0]).is_file() {
        return Err(Error::Usage(format!("no split in {}: run split first", out.display())));
    }
    formats::read_split(&dir, g.schema(), g.vocab())
}

fn embed_error(e: EmbedError) -> Error {
    match e {
        EmbedError::InvalidHyperparams(_) => Error::Usage(e.to_string()),
        _ => Error::Runtime(format!("training failed: {e}")),
    }
}

pub fn train_stage(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let graphs = load_graphs(out)?;
    let g = graphs.for_mode(cfg.split.mode);
    let split = load_split(out, g)?;
    let outcome = embed::train(cfg.model, &split, g, &cfg.hyperparams, &cfg.early_stop).map_err(embed_error)?;
    let losses = formats::format_kv(outcome.losses.iter().enumerate().map(|(i, l)| ((i + 1).to_string(), l)));
    let validation = formats::format_kv(outcome.validation.iter().map(|(e, m)| (e.to_string(), m)));
    let report = formats::format_kv([
        ("model", outcome.model.kind().to_string()),
        ("epochs_run", outcome.losses.len().to_string()),
        ("best_epoch", outcome.best_epoch.map_or("-".into(), |e| e.to_string())),
        ("stopped_early", outcome.stopped_early.to_string()),
    ]);
    let files = [
        ("model.tsv", formats::format_model(&outcome.model, g.schema(), g.vocab())),
        ("loss.tsv", format!("# epoch\tmean_loss\n{losses}")),
        ("validation.tsv", format!("# epoch\tfiltered_valid_mrr\n{validation}")),
        ("train_report.tsv", report),
    ];
    let dir = publish(out, MODEL_DIR, &files)?;
    eprintln!("train: {} epochs -> {}", outcome.losses.len(), dir.display());
    Ok(())
}

fn eval_error(e: EvalError, out: &Path) -> Error {
    match e {
        EvalError::EmptyTestSet => Error::data(out.join(SPLIT_DIR).join("test.tsv"), None, "test set is empty"),
        other => Error::Runtime(format!("evaluation failed: {other}")),
    }
}

/// Evaluates with the configured external scorer, or else with the trained
/// model on `threads` workers.
pub fn evaluate_stage(cfg: &PipelineConfig, out: &Path, threads: usize) -> Result<()> {
    let graphs = load_graphs(out)?;
    let g = graphs.for_mode(cfg.split.mode);
    let split = load_split(out, g)?;
    let report = match &cfg.scorer_command {
        Some(cmd) => evaluate_external(cmd, cfg, &split, g)?,
        None => {
            let path = out.join(MODEL_DIR).join("model.tsv");
            if !path.is_file() {
                return Err(Error::Usage(format!("no model in {}: run train first or set scorer_command", out.display())));
            }
            let model = formats::read_model(&path)?.aligned(g.schema(), g.vocab(), &path)?;
            with_threads(threads, || evaluate_parallel(&model, &split, g, &cfg.eval))?.map_err(|e| eval_error(e, out))?
        }
    };
    let mut files = vec![("report.tsv", formats::format_report(&report, g.schema()))];
    if cfg.write_ranks {
        files.push(("ranks.tsv", formats::format_ranks(&report, g.schema(), g.vocab())));
    }
    let dir = publish(out, EVAL_DIR, &files)?;
    let headline = report.overall.pooled.as_ref().map_or(String::new(), |s| format!("mrr {:.4}", s.mrr));
    eprintln!("evaluate: {headline} -> {}", dir.display());
    Ok(())
}

/// Runs one evaluation through a scorer subprocess.
pub fn evaluate_external(command: &str, cfg: &PipelineConfig, split: &Split, g: &Graph) -> Result<EvalReport> {
    if !(cfg.scorer_timeout_secs.is_finite() && cfg.scorer_timeout_secs > 0.0) {
        return Err(Error::Usage("scorer_timeout_secs must be positive".into()));
    }
    let timeout = Duration::from_secs_f64(cfg.scorer_timeout_secs);
    let mut scorer =
        ExternalScorer::spawn(command, g.schema(), g.vocab(), timeout).map_err(|e| Error::Runtime(e.to_string()))?;
    let report = metrics::evaluate(&mut scorer, split, g, &cfg.eval).map_err(|e| match e {
        EvalError::EmptyTestSet => Error::Usage("test set is empty".into()),
        other => Error::Runtime(format!("external scorer: {other}")),
    })?;
    scorer.finish().map_err(|e| Error::Runtime(format!("external scorer: {e}")))?;
    Ok(report)
}

/// Writes `edges.tsv`, `schema.tsv` and `thresholds.tsv` for a corpus.
pub fn write_corpus(corpus: &SyntheticCorpus, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(Error::io(out))?;
    write_atomic(&out.join("schema.tsv"), &formats::format_schema(&corpus.schema))?;
    write_atomic(&out.join("thresholds.tsv"), &formats::format_thresholds(&corpus.thresholds))?;
    write_atomic(&out.join("edges.tsv"), &corpus.edge_file())
}
