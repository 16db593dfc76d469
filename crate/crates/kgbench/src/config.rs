//! Flat `key = value` pipeline configuration.
//!
//! One pair per line, `#` starts a comment line, unknown or repeated keys
//! are errors. Relative paths resolve against the config file's directory.
//! [`PipelineConfig::resolved`] prints every key, defaults included, in a
//! fixed order; feeding that text back yields the same configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kgbench_core::embed::{EarlyStop, Hyperparams, ModelKind, Norm};
use kgbench_core::ingest::QualityLevel;
use kgbench_core::metrics::EvalConfig;
use kgbench_core::split::SplitSpec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    CreateGraph,
    Split,
    Train,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::CreateGraph, Stage::Split, Stage::Train, Stage::Evaluate];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::CreateGraph => "create-graph",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL.into_iter().find(|st| st.as_str() == s).ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Directionality {
    Directed,
    Undirected,
}

impl Directionality {
    pub fn as_str(self) -> &'static str {
        match self {
            Directionality::Directed => "directed",
            Directionality::Undirected => "undirected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Stages run by `pipeline`, kept in canonical order.
    pub stages: Vec<Stage>,
    pub edges: Option<PathBuf>,
    /// Later snapshot for time-slice splits.
    pub edges_new: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub thresholds: Option<PathBuf>,
    pub quality: QualityLevel,
    pub directionality: Directionality,
    pub exclude_sources: Vec<String>,
    pub exclude_relations: Vec<String>,
    /// Its seed is shared with training.
    pub split: SplitSpec,
    pub model: ModelKind,
    pub hyperparams: Hyperparams,
    pub early_stop: EarlyStop,
    pub eval: EvalConfig,
    /// Evaluate through this external scorer instead of the trained model.
    pub scorer_command: Option<String>,
    pub scorer_timeout_secs: f64,
    pub write_ranks: bool,
    pub out: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stages: Stage::ALL.to_vec(),
            edges: None,
            edges_new: None,
            schema: None,
            thresholds: None,
            quality: QualityLevel::All,
            directionality: Directionality::Directed,
            exclude_sources: Vec::new(),
            exclude_relations: Vec::new(),
            split: SplitSpec::default(),
            model: ModelKind::TransE,
            hyperparams: Hyperparams::default(),
            early_stop: EarlyStop::default(),
            eval: EvalConfig::default(),
            scorer_command: None,
            scorer_timeout_secs: 60.0,
            write_ranks: true,
            out: None,
        }
    }
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("{key}: {v:?} is not a valid number"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {v:?}")),
    }
}

fn optional(v: &str) -> Option<&str> {
    (!v.is_empty() && v != "-").then_some(v)
}

impl PipelineConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Usage(m) => Error::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::Usage(format!("line {}: {m}", i + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key:?}")));
            }
            cfg.set(key, value, base).map_err(err)?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<(), String> {
        let path = |v: &str| optional(v).map(|p| base.join(p));
        match key {
            "stages" => {
                let mut stages = list(v).iter().map(|s| s.parse()).collect::<Result<Vec<Stage>, _>>()?;
                stages.sort();
                stages.dedup();
                self.stages = stages;
            }
            "edges" => self.edges = path(v),
            "edges_new" => self.edges_new = path(v),
            "schema" => self.schema = path(v),
            "thresholds" => self.thresholds = path(v),
            "quality" => self.quality = v.parse().map_err(|e| format!("{e}"))?,
            "directionality" => {
                self.directionality = match v {
                    "directed" => Directionality::Directed,
                    "undirected" => Directionality::Undirected,
                    _ => return Err(format!("directionality must be directed or undirected, got {v:?}")),
                }
            }
            "exclude_sources" => self.exclude_sources = list(v),
            "exclude_relations" => self.exclude_relations = list(v),
            "split_mode" => self.split.mode = v.parse().map_err(|e| format!("{e}"))?,
            "ratios" => {
                let r = list(v).iter().map(|x| parse_num::<f64>(key, x)).collect::<Result<Vec<_>, _>>()?;
                self.split.ratios = r.try_into().map_err(|_| "ratios needs three values: train,valid,test".to_string())?;
            }
            "negative_ratio" => self.split.negative_ratio = parse_num(key, v)?,
            "seed" => {
                let seed = parse_num(key, v)?;
                self.split.seed = seed;
                self.hyperparams.seed = seed;
            }
            "max_corruption_attempts" => {
                let n = parse_num(key, v)?;
                self.split.max_corruption_attempts = n;
                self.early_stop.max_corruption_attempts = n;
            }
            "model" => self.model = v.parse().map_err(|e| format!("{e}"))?,
            "dim" => self.hyperparams.dim = parse_num(key, v)?,
            "margin" => self.hyperparams.margin = parse_num(key, v)?,
            "learning_rate" => self.hyperparams.learning_rate = parse_num(key, v)?,
            "norm" => self.hyperparams.norm = v.parse::<Norm>().map_err(|e| format!("{e}"))?,
            "epochs" => self.hyperparams.epochs = parse_num(key, v)?,
            "batch_size" => self.hyperparams.batch_size = parse_num(key, v)?,
            "eval_every" => self.early_stop.every = parse_num(key, v)?,
            "patience" => self.early_stop.patience = parse_num(key, v)?,
            "ks" => {
                let ks = list(v).iter().map(|x| parse_num::<u32>(key, x)).collect::<Result<Vec<_>, _>>()?;
                if ks.is_empty() || ks.contains(&0) {
                    return Err("ks must list positive integers".into());
                }
                self.eval.ks = ks;
            }
            "filtered" => self.eval.filtered = parse_bool(key, v)?,
            "typed_candidates" => self.eval.typed_candidates = parse_bool(key, v)?,
            "scorer_command" => self.scorer_command = optional(v).map(String::from),
            "scorer_timeout_secs" => {
                let t: f64 = parse_num(key, v)?;
                if !(t > 0.0 && t.is_finite()) {
                    return Err("scorer_timeout_secs must be positive".into());
                }
                self.scorer_timeout_secs = t;
            }
            "write_ranks" => self.write_ranks = parse_bool(key, v)?,
            "out" => self.out = path(v),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Every key with its effective value.
    pub fn resolved(&self) -> String {
        let p = |p: &Option<PathBuf>| p.as_ref().map_or("-".to_string(), |p| p.display().to_string());
        let hp = &self.hyperparams;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("stages", self.stages.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","));
        kv("edges", p(&self.edges));
        kv("edges_new", p(&self.edges_new));
        kv("schema", p(&self.schema));
        kv("thresholds", p(&self.thresholds));
        kv("quality", self.quality.to_string());
        kv("directionality", self.directionality.as_str().into());
        kv("exclude_sources", self.exclude_sources.join(","));
        kv("exclude_relations", self.exclude_relations.join(","));
        kv("split_mode", self.split.mode.to_string());
        kv("ratios", self.split.ratios.map(|r| r.to_string()).join(","));
        kv("negative_ratio", self.split.negative_ratio.to_string());
        kv("seed", self.split.seed.to_string());
        kv("max_corruption_attempts", self.split.max_corruption_attempts.to_string());
        kv("model", self.model.to_string());
        kv("dim", hp.dim.to_string());
        kv("margin", hp.margin.to_string());
        kv("learning_rate", hp.learning_rate.to_string());
        kv("norm", hp.norm.p().to_string());
        kv("epochs", hp.epochs.to_string());
        kv("batch_size", hp.batch_size.to_string());
        kv("eval_every", self.early_stop.every.to_string());
        kv("patience", self.early_stop.patience.to_string());
        kv("ks", self.eval.ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","));
        kv("filtered", self.eval.filtered.to_string());
        kv("typed_candidates", self.eval.typed_candidates.to_string());
        kv("scorer_command", self.scorer_command.clone().unwrap_or_else(|| "-".into()));
        kv("scorer_timeout_secs", self.scorer_timeout_secs.to_string());
        kv("write_ranks", self.write_ranks.to_string());
        kv("out", p(&self.out));
        out
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| Error::Usage("no output directory: set `out` or pass --out".into()))
    }
}
