//! Tab-separated file formats.
//!
//! | file | columns |
//! |------|---------|
//! | schema | `name domain range symmetric(0/1) inverse_of parents disjoint_with` |
//! | edges | `head relation tail quality source [date] [polarity] [origin]` |
//! | thresholds | `source high medium low` |
//! | triples (`train.tsv`, ...) | `head relation tail` |
//! | key/value reports | `key value` |
//! | `report.tsv` | `metric relation side value` |
//! | model | header `KIND/Lp d |E| |R|`, then `E`, `R` and `M` rows |
//!
//! Empty optional fields are `-`, multi-valued fields are comma separated
//! and lines starting with `#` are ignored on input.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use kgbench_core::embed::{EmbeddingModel, ModelKind, Norm};
use kgbench_core::ingest::{self, Cutoffs, ParseStats};
use kgbench_core::metrics::{EvalReport, RankSummary, Section};
use kgbench_core::split::Split;
use kgbench_core::{Edge, EdgeOrigin, Polarity, RelationDef, RelationSchema, Schema, TripleKey, Vocabulary};

use crate::error::{Error, Result};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(Error::io(path))
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_bytes(path)?).map_err(|_| Error::data(path, None, "file is not valid UTF-8"))
}

/// `(1-based line number, line)` for every non-comment, non-blank line.
fn data_lines(text: &str) -> impl Iterator<Item = (u64, &str)> {
    text.split('\n').enumerate().filter_map(|(i, l)| {
        let l = l.strip_suffix('\r').unwrap_or(l);
        (!l.is_empty() && !l.starts_with('#')).then_some((i as u64 + 1, l))
    })
}

fn list(field: &str) -> Vec<String> {
    match field {
        "-" | "" => Vec::new(),
        f => f.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
    }
}

fn joined(items: &[String]) -> String {
    if items.is_empty() {
        "-".into()
    } else {
        items.join(",")
    }
}

pub fn parse_schema(text: &str, path: &Path) -> Result<Schema> {
    let mut relations = Vec::new();
    for (line, l) in data_lines(text) {
        let cols: Vec<&str> = l.split('\t').collect();
        if cols.len() != 7 {
            return Err(Error::data(path, Some(line), format!("expected 7 columns, found {}", cols.len())));
        }
        let symmetric = match cols[3] {
            "0" => false,
            "1" => true,
            other => return Err(Error::data(path, Some(line), format!("symmetric must be 0 or 1, got {other:?}"))),
        };
        relations.push(RelationDef {
            name: cols[0].into(),
            domain: cols[1].into(),
            range: cols[2].into(),
            symmetric,
            inverse_of: list(cols[4]).into_iter().next(),
            parents: list(cols[5]),
            disjoint_with: list(cols[6]),
        });
    }
    RelationSchema { relations }.validate().map_err(|e| Error::data(path, None, e.to_string()))
}

pub fn read_schema(path: &Path) -> Result<Schema> {
    parse_schema(&read_text(path)?, path)
}

pub fn format_schema(schema: &Schema) -> String {
    let mut out = String::from("# name\tdomain\trange\tsymmetric\tinverse_of\tparents\tdisjoint_with\n");
    for d in schema.defs() {
        let inverse = d.inverse_of.clone().unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            d.name,
            d.domain,
            d.range,
            u8::from(d.symmetric),
            inverse,
            joined(&d.parents),
            joined(&d.disjoint_with)
        );
    }
    out
}

pub fn read_thresholds(path: &Path) -> Result<BTreeMap<String, Cutoffs>> {
    let text = read_text(path)?;
    let mut out = BTreeMap::new();
    for (line, l) in data_lines(&text) {
        let cols: Vec<&str> = l.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::data(path, Some(line), format!("expected 4 columns, found {}", cols.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::data(path, Some(line), format!("{s:?} is not a number")));
        let c = Cutoffs { high: num(cols[1])?, medium: num(cols[2])?, low: num(cols[3])? };
        if out.insert(cols[0].to_string(), c).is_some() {
            return Err(Error::data(path, Some(line), format!("duplicate source {:?}", cols[0])));
        }
    }
    Ok(out)
}

pub fn format_thresholds(thresholds: &BTreeMap<String, Cutoffs>) -> String {
    let mut out = String::from("# source\thigh\tmedium\tlow\n");
    for (s, c) in thresholds {
        let _ = writeln!(out, "{s}\t{}\t{}\t{}", c.high, c.medium, c.low);
    }
    out
}

/// Parses an edge file, interning entities into `vocab`.
pub fn read_edges(path: &Path, schema: &Schema, vocab: &mut Vocabulary) -> Result<(Vec<Edge>, ParseStats)> {
    let bytes = read_bytes(path)?;
    let body = bytes.strip_suffix(b"\n").unwrap_or(&bytes);
    let lines = if body.is_empty() { Vec::new() } else { body.split(|b| *b == b'\n').collect() };
    Ok(ingest::parse_edges(lines, schema, vocab))
}

pub fn format_edges(edges: &[Edge], schema: &Schema, vocab: &Vocabulary) -> String {
    let mut out = String::with_capacity(edges.len() * 48);
    out.push_str("# head\trelation\ttail\tquality\tsource\tdate\tpolarity\torigin\n");
    for e in edges {
        let k = &e.key;
        let _ = write!(out, "{}\t{}\t{}\t", vocab.label(k.head), schema.name(k.relation), vocab.label(k.tail));
        match e.quality {
            Some(q) => write!(out, "{q}"),
            None => write!(out, "-"),
        }
        .ok();
        let _ = write!(out, "\t{}\t", e.source);
        match e.date {
            Some(d) => write!(out, "{d}"),
            None => write!(out, "-"),
        }
        .ok();
        out.push_str(if e.polarity == Polarity::Positive { "\t+\t" } else { "\t-\t" });
        match e.origin {
            EdgeOrigin::Source => out.push('-'),
            EdgeOrigin::Inferred { from } => out.push_str(schema.name(from)),
        }
        out.push('\n');
    }
    out
}

/// Reads `head relation tail` lines over known entities.
pub fn read_triples(path: &Path, schema: &Schema, vocab: &Vocabulary) -> Result<Vec<TripleKey>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (line, l) in data_lines(&text) {
        let cols: Vec<&str> = l.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::data(path, Some(line), format!("expected 3 columns, found {}", cols.len())));
        }
        let entity = |s: &str| vocab.find_label(s).ok_or_else(|| Error::data(path, Some(line), format!("unknown entity {s:?}")));
        let relation = schema
            .relation_id(cols[1])
            .ok_or_else(|| Error::data(path, Some(line), format!("unknown relation {:?}", cols[1])))?;
        out.push(TripleKey::new(entity(cols[0])?, relation, entity(cols[2])?));
    }
    Ok(out)
}

pub fn format_triples(triples: &[TripleKey], schema: &Schema, vocab: &Vocabulary) -> String {
    let mut out = String::with_capacity(triples.len() * 32);
    for k in triples {
        let _ = writeln!(out, "{}\t{}\t{}", vocab.label(k.head), schema.name(k.relation), vocab.label(k.tail));
    }
    out
}

pub const SPLIT_FILES: [&str; 6] = ["train.tsv", "valid.tsv", "test.tsv", "train_neg.tsv", "valid_neg.tsv", "test_neg.tsv"];

/// Reads the six part files of a split directory. The report is not
/// restored.
pub fn read_split(dir: &Path, schema: &Schema, vocab: &Vocabulary) -> Result<Split> {
    let mut parts = SPLIT_FILES.iter().map(|f| read_triples(&dir.join(f), schema, vocab)).collect::<Result<Vec<_>>>()?;
    let mut take = || std::mem::take(&mut parts.remove(0));
    Ok(Split {
        train: take(),
        valid: take(),
        test: take(),
        train_neg: take(),
        valid_neg: take(),
        test_neg: take(),
        report: Default::default(),
    })
}

pub fn format_kv<K: AsRef<str>, V: std::fmt::Display>(entries: impl IntoIterator<Item = (K, V)>) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        let _ = writeln!(out, "{}\t{v}", k.as_ref());
    }
    out
}

fn summary_rows(out: &mut String, relation: &str, side: &str, s: &RankSummary) {
    for (k, v) in &s.hits {
        let _ = writeln!(out, "hits@{k}\t{relation}\t{side}\t{v}");
    }
    let _ = writeln!(out, "mrr\t{relation}\t{side}\t{}", s.mrr);
    let _ = writeln!(out, "rank_queries\t{relation}\t{side}\t{}", s.queries);
}

fn section_rows(out: &mut String, relation: &str, s: &Section) {
    for (side, summary) in [("ALL", &s.pooled), ("head", &s.head), ("tail", &s.tail)] {
        if let Some(summary) = summary {
            summary_rows(out, relation, side, summary);
        }
    }
    if let Some(v) = s.roc_auc {
        let _ = writeln!(out, "roc_auc\t{relation}\tALL\t{v}");
    }
    if let Some(v) = s.pr_auc {
        let _ = writeln!(out, "pr_auc\t{relation}\tALL\t{v}");
    }
    let _ = writeln!(out, "test_triples\t{relation}\tALL\t{}", s.triples);
    let _ = writeln!(out, "test_negatives\t{relation}\tALL\t{}", s.negatives);
}

/// `metric relation side value` rows: overall first, then each relation in
/// schema order.
pub fn format_report(report: &EvalReport, schema: &Schema) -> String {
    let mut out = String::from("metric\trelation\tside\tvalue\n");
    let _ = writeln!(out, "filtered\tALL\tALL\t{}", u8::from(report.filtered));
    let _ = writeln!(out, "typed_candidates\tALL\tALL\t{}", u8::from(report.typed_candidates));
    let _ = writeln!(out, "classification_skipped\tALL\tALL\t{}", u8::from(report.classification_skipped));
    section_rows(&mut out, "ALL", &report.overall);
    for (r, s) in &report.per_relation {
        section_rows(&mut out, schema.name(*r), s);
    }
    out
}

/// Parses `report.tsv` back into `(metric, relation, side) -> value`.
pub fn parse_report(text: &str) -> BTreeMap<(String, String, String), f64> {
    let mut out = BTreeMap::new();
    for (_, l) in data_lines(text).skip(1) {
        let cols: Vec<&str> = l.split('\t').collect();
        if let [m, r, side, v] = cols[..] {
            if let Ok(v) = v.parse() {
                out.insert((m.into(), r.into(), side.into()), v);
            }
        }
    }
    out
}

pub fn format_ranks(report: &EvalReport, schema: &Schema, vocab: &Vocabulary) -> String {
    let mut out = String::from("head\trelation\ttail\thead_rank\ttail_rank\thead_candidates\ttail_candidates\n");
    for r in &report.records {
        let k = &r.triple;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            vocab.label(k.head),
            schema.name(k.relation),
            vocab.label(k.tail),
            r.head.rank,
            r.tail.rank,
            r.head.candidates,
            r.tail.candidates
        );
    }
    out
}

fn push_row(out: &mut String, tag: &str, name: &str, values: &[f64]) {
    out.push_str(tag);
    out.push('\t');
    out.push_str(name);
    for v in values {
        // 17 significant digits round-trip every f64
        let _ = write!(out, "\t{v:.16e}");
    }
    out.push('\n');
}

/// Serialises a model whose rows follow `vocab` and `schema` ids.
pub fn format_model(model: &EmbeddingModel, schema: &Schema, vocab: &Vocabulary) -> String {
    let d = model.dim();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}/{}\t{d}\t{}\t{}",
        model.kind(),
        model.norm(),
        model.entity_count(),
        model.relation_count()
    );
    for id in vocab.ids() {
        push_row(&mut out, "E", &vocab.label(id).to_string(), model.entity(id));
    }
    for r in schema.relation_ids() {
        push_row(&mut out, "R", schema.name(r), model.relation(r));
    }
    if model.kind() == ModelKind::TransR {
        for r in schema.relation_ids() {
            push_row(&mut out, "M", schema.name(r), model.projection(r));
        }
    }
    out
}

/// A model file with the names of its rows.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: EmbeddingModel,
    pub entities: Vec<String>,
    pub relations: Vec<String>,
}

pub fn parse_model(text: &str, path: &Path) -> Result<LoadedModel> {
    let err = |line: u64, msg: String| Error::data(path, Some(line), msg);
    let mut lines = text.split('\n').enumerate().map(|(i, l)| (i as u64 + 1, l.strip_suffix('\r').unwrap_or(l)));
    let (_, header) = lines.next().filter(|(_, l)| !l.is_empty()).ok_or_else(|| err(1, "missing header".into()))?;
    let h: Vec<&str> = header.split('\t').collect();
    if h.len() != 4 {
        return Err(err(1, format!("header needs 4 columns, found {}", h.len())));
    }
    let (kind, norm) = h[0].split_once('/').ok_or_else(|| err(1, format!("model kind {:?} is not KIND/Lp", h[0])))?;
    let kind: ModelKind = kind.parse().map_err(|e| err(1, format!("{e}")))?;
    let norm: Norm = norm.parse().map_err(|e| err(1, format!("{e}")))?;
    let count = |s: &str| s.parse::<usize>().map_err(|_| err(1, format!("{s:?} is not a count")));
    let (d, ne, nr) = (count(h[1])?, count(h[2])?, count(h[3])?);
    if d == 0 {
        return Err(err(1, "dimension is zero".into()));
    }
    let mut expected: Vec<(&str, usize, usize)> = vec![("E", ne, d), ("R", nr, d)];
    if kind == ModelKind::TransR {
        expected.push(("M", nr, d * d));
    }
    let mut buffers: Vec<Vec<f64>> = Vec::new();
    let mut names: Vec<Vec<String>> = Vec::new();
    let mut last_line = 1;
    for (tag, rows, width) in expected {
        let mut buf = Vec::with_capacity(rows * width);
        let mut row_names = Vec::with_capacity(rows);
        for _ in 0..rows {
            let (line, l) = lines
                .next()
                .filter(|(_, l)| !l.is_empty())
                .ok_or_else(|| err(last_line + 1, format!("file ends where an {tag} row was expected")))?;
            last_line = line;
            let mut cols = l.split('\t');
            if cols.next() != Some(tag) {
                return Err(err(line, format!("expected an {tag} row")));
            }
            let name = cols.next().ok_or_else(|| err(line, "missing row name".into()))?;
            let before = buf.len();
            for c in cols {
                buf.push(c.parse::<f64>().map_err(|_| err(line, format!("{c:?} is not a number")))?);
            }
            if buf.len() - before != width {
                return Err(err(line, format!("shape mismatch: expected {width} values, found {}", buf.len() - before)));
            }
            row_names.push(name.to_string());
        }
        buffers.push(buf);
        names.push(row_names);
    }
    if let Some((line, _)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(err(line, "unexpected extra row".into()));
    }
    let projections = if kind == ModelKind::TransR { buffers.pop().unwrap_or_default() } else { Vec::new() };
    let relations = buffers.pop().unwrap_or_default();
    let entities = buffers.pop().unwrap_or_default();
    let model = EmbeddingModel::from_parts(kind, norm, d, entities, relations, projections)
        .map_err(|e| Error::data(path, None, e.to_string()))?;
    let relation_names = names.swap_remove(1);
    let entity_names = names.swap_remove(0);
    Ok(LoadedModel { model, entities: entity_names, relations: relation_names })
}

pub fn read_model(path: &Path) -> Result<LoadedModel> {
    parse_model(&read_text(path)?, path)
}

impl LoadedModel {
    /// Reorders rows to follow `vocab` and `schema` ids. Every entity and
    /// relation must have a row.
    pub fn aligned(&self, schema: &Schema, vocab: &Vocabulary, path: &Path) -> Result<EmbeddingModel> {
        let d = self.model.dim();
        let erow: HashMap<&str, usize> = self.entities.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let rrow: HashMap<&str, usize> = self.relations.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let (e, r, m) = self.model.parameters();
        let mut entities = Vec::with_capacity(vocab.len() * d);
        for id in vocab.ids() {
            let label = vocab.label(id).to_string();
            let i = *erow.get(label.as_str()).ok_or_else(|| Error::data(path, None, format!("no row for entity {label}")))?;
            entities.extend_from_slice(&e[i * d..][..d]);
        }
        let (mut relations, mut projections) = (Vec::new(), Vec::new());
        for rel in schema.relation_ids() {
            let name = schema.name(rel);
            let i = *rrow.get(name).ok_or_else(|| Error::data(path, None, format!("no row for relation {name}")))?;
            relations.extend_from_slice(&r[i * d..][..d]);
            if self.model.kind() == ModelKind::TransR {
                projections.extend_from_slice(&m[i * d * d..][..d * d]);
            }
        }
        EmbeddingModel::from_parts(self.model.kind(), self.model.norm(), d, entities, relations, projections)
            .map_err(|e| Error::data(path, None, e.to_string()))
    }
}
