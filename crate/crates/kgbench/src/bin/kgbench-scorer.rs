//! Reference scorer speaking the line protocol on stdin/stdout.
//!
//! `kgbench-scorer --constant 0` scores every triple 0;
//! `kgbench-scorer --model model.tsv` scores with a saved embedding model.

use std::collections::HashMap;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use kgbench::formats;
use kgbench::protocol::serve;
use kgbench_core::{EntityId, RelationId, TripleKey};

#[derive(Debug, Parser)]
#[command(name = "kgbench-scorer", version, about = "Reference scorer for the kgbench line protocol")]
struct Args {
    /// Score every triple with this value.
    #[arg(long, conflicts_with = "model", required_unless_present = "model", allow_hyphen_values = true)]
    constant: Option<f64>,
    /// Score with a model file written by `kgbench train`.
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let stdin = io::stdin().lock();
    let stdout = io::stdout().lock();
    let result = match (&args.constant, &args.model) {
        (Some(c), _) => serve(stdin, stdout, |batch| Ok(vec![*c; batch.len()])),
        (None, Some(path)) => {
            let loaded = match formats::read_model(path) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("kgbench-scorer: {e}");
                    return ExitCode::from(2);
                }
            };
            let entities: HashMap<&str, EntityId> =
                loaded.entities.iter().enumerate().map(|(i, n)| (n.as_str(), EntityId(i as u32))).collect();
            let relations: HashMap<&str, RelationId> =
                loaded.relations.iter().enumerate().map(|(i, n)| (n.as_str(), RelationId(i as u16))).collect();
            let model = &loaded.model;
            serve(stdin, stdout, |batch| {
                batch
                    .iter()
                    .map(|[h, r, t]| {
                        let e = |n: &str| entities.get(n).copied().ok_or_else(|| format!("unknown entity {n:?}"));
                        let rel = relations.get(r).copied().ok_or_else(|| format!("unknown relation {r:?}"))?;
                        Ok(model.score(&TripleKey::new(e(h)?, rel, e(t)?)))
                    })
                    .collect()
            })
        }
        (None, None) => unreachable!("clap requires one scorer"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kgbench-scorer: {e}");
            ExitCode::from(3)
        }
    }
}
