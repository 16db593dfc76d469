//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use kgbench_core::ingest::QualityLevel;

use crate::config::{Directionality, PipelineConfig, Stage};
use crate::error::{Error, Result};
use crate::eval::resolve_threads;
use crate::pipeline;
use crate::synth::{generate, SyntheticSpec};

#[derive(Debug, Parser)]
#[command(name = "kgbench", version, about = "Leakage-free link-prediction benchmarks for typed knowledge graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus (edges, schema and thresholds files).
    Generate(GenerateArgs),
    /// Ingest edges into `OUT/graph`.
    CreateGraph(Common),
    /// Split the graph into `OUT/split`.
    Split(Common),
    /// Train the baseline model into `OUT/model`.
    Train(Common),
    /// Evaluate the model or an external scorer into `OUT/eval`.
    Evaluate(Common),
    /// Run the stages listed in the config (all four by default).
    Pipeline(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for splitting and training; overrides the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Quality level: high, medium, low or all.
    #[arg(long, value_name = "LEVEL")]
    quality: Option<QualityLevel>,
    #[arg(long, conflicts_with = "undirected")]
    directed: bool,
    #[arg(long)]
    undirected: bool,
    /// Worker threads for evaluation (capped by KGBENCH_THREADS).
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Directory receiving edges.tsv, schema.tsv and thresholds.tsv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    entities: usize,
    #[arg(long, default_value_t = 3000)]
    edges: usize,
    /// Fraction of each relation's edges drawn uniformly at random.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, value_name = "D", default_value_t = 8)]
    latent_dim: usize,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::read(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.split.seed = seed;
            cfg.hyperparams.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let Some(q) = self.quality {
            cfg.quality = q;
        }
        if self.directed {
            cfg.directionality = Directionality::Directed;
        }
        if self.undirected {
            cfg.directionality = Directionality::Undirected;
        }
        Ok(cfg)
    }

    fn run(&self, stages: Option<&[Stage]>) -> Result<()> {
        let cfg = self.config()?;
        let threads = resolve_threads(self.threads.map(|t| t as usize))?;
        let stages = stages.map_or_else(|| cfg.stages.clone(), <[Stage]>::to_vec);
        pipeline::run(&cfg, &stages, threads)
    }
}

fn run_generate(a: &GenerateArgs) -> Result<()> {
    let mut spec = SyntheticSpec::genes(a.entities, a.edges, a.noise, a.seed);
    spec.latent_dim = a.latent_dim;
    let corpus = generate(&spec).map_err(|e| Error::Usage(e.to_string()))?;
    pipeline::write_corpus(&corpus, &a.out)?;
    eprintln!("generate: {} edges -> {}", corpus.edges.len(), a.out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => run_generate(a),
        Command::CreateGraph(c) => c.run(Some(&[Stage::CreateGraph])),
        Command::Split(c) => c.run(Some(&[Stage::Split])),
        Command::Train(c) => c.run(Some(&[Stage::Train])),
        Command::Evaluate(c) => c.run(Some(&[Stage::Evaluate])),
        Command::Pipeline(c) => c.run(None),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
