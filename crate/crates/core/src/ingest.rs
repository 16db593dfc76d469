//! Graph creation: quality cut-offs, source/relation exclusion, directed and
//! undirected variants, true negatives from disjoint relations, assembly.
//!
//! Each step takes and returns plain edge lists plus a small stats record,
//! so steps can be combined in any order. [`IngestReport`] collects the
//! stats of a full run.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::graph::Graph;
use crate::schema::Schema;
use crate::triple::{Edge, EdgeOrigin, Polarity, TripleKey};
use crate::date::Date;
use crate::vocab::{NodeTypeId, Vocabulary};
use crate::{HashMap, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QualityLevel {
    High,
    Medium,
    Low,
    All,
}

impl QualityLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            QualityLevel::High => "high",
            QualityLevel::Medium => "medium",
            QualityLevel::Low => "low",
            QualityLevel::All => "all",
        }
    }
}

impl fmt::Display for QualityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QualityLevel {
    type Err = IngestError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "high" => Ok(QualityLevel::High),
            "medium" => Ok(QualityLevel::Medium),
            "low" => Ok(QualityLevel::Low),
            "all" => Ok(QualityLevel::All),
            other => Err(IngestError::UnknownLevel(other.into())),
        }
    }
}

/// Per-source cut-offs for the three scored levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoffs {
    pub high: f64,
    pub medium: f64,
    pub low: f64,
}

impl Cutoffs {
    pub fn for_level(&self, level: QualityLevel) -> Option<f64> {
        match level {
            QualityLevel::High => Some(self.high),
            QualityLevel::Medium => Some(self.medium),
            QualityLevel::Low => Some(self.low),
            QualityLevel::All => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualitySetting {
    level: QualityLevel,
    thresholds: BTreeMap<String, Cutoffs>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("unknown quality level {0:?} (expected high, medium, low or all)")]
    UnknownLevel(String),
    #[error("cut-offs for source {source_label:?} must satisfy 1 >= high >= medium >= low >= 0")]
    BadCutoffs { source_label: String },
    #[error("source {0:?} has scored edges but no quality thresholds")]
    MissingThreshold(String),
}

impl QualitySetting {
    pub fn new(level: QualityLevel, thresholds: BTreeMap<String, Cutoffs>) -> Result<Self, IngestError> {
        for (source, c) in &thresholds {
            let ordered = c.high >= c.medium && c.medium >= c.low;
            let in_range = [c.high, c.medium, c.low].iter().all(|v| (0.0..=1.0).contains(v));
            if !ordered || !in_range {
                return Err(IngestError::BadCutoffs { source_label: source.clone() });
            }
        }
        Ok(QualitySetting { level, thresholds })
    }

    /// Level `all` with no thresholds.
    pub fn all() -> Self {
        QualitySetting { level: QualityLevel::All, thresholds: BTreeMap::new() }
    }

    pub fn level(&self) -> QualityLevel {
        self.level
    }

    pub fn with_level(&self, level: QualityLevel) -> Self {
        QualitySetting { level, thresholds: self.thresholds.clone() }
    }

    pub fn thresholds(&self) -> &BTreeMap<String, Cutoffs> {
        &self.thresholds
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LineError {
    pub line: u64,
    pub reason: String,
}

/// Filled by edge-file parsers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParseStats {
    /// Data lines, i.e. excluding blank and `#` comment lines.
    pub lines_read: u64,
    pub parsed: u64,
    pub comment_lines: u64,
    pub errors: Vec<LineError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QualityStats {
    pub input: u64,
    pub kept_scored: u64,
    pub kept_unscored: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExclusionStats {
    pub input: u64,
    pub dropped_source: u64,
    pub dropped_relation: u64,
    /// Excluded names that matched nothing.
    pub unknown_sources: Vec<String>,
    pub unknown_relations: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DirectionStats {
    pub input: u64,
    pub reverses_added: u64,
    pub duplicates_merged: u64,
    pub output: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NegativeStats {
    pub inferred: u64,
    /// `(positive, contradicting positive)` pairs over disjoint relations.
    pub conflicts: Vec<(TripleKey, TripleKey)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AssemblyStats {
    pub input: u64,
    pub rejected_type: Vec<TripleKey>,
    pub duplicates_merged: u64,
    /// Keys supplied with both polarities; the negative was dropped.
    pub polarity_conflicts: Vec<TripleKey>,
    pub positives: u64,
    pub negatives: u64,
}

/// Everything a graph-creation run did to its input.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IngestReport {
    pub parse: ParseStats,
    pub quality: QualityStats,
    pub exclusion: ExclusionStats,
    pub direction: DirectionStats,
    pub negatives: NegativeStats,
    pub assembly: AssemblyStats,
}

impl IngestReport {
    /// Flat `key, value` listing in a fixed order.
    pub fn entries(&self) -> Vec<(String, u64)> {
        let p = &self.parse;
        let q = &self.quality;
        let x = &self.exclusion;
        let d = &self.direction;
        let a = &self.assembly;
        let mut out: Vec<(String, u64)> = [
            ("lines_read", p.lines_read),
            ("comment_lines", p.comment_lines),
            ("triples_parsed", p.parsed),
            ("parse_errors", p.errors.len() as u64),
            ("quality_input", q.input),
            ("quality_kept_scored", q.kept_scored),
            ("quality_kept_unscored", q.kept_unscored),
            ("quality_dropped", q.dropped),
            ("exclusion_input", x.input),
            ("dropped_excluded_source", x.dropped_source),
            ("dropped_excluded_relation", x.dropped_relation),
            ("direction_input", d.input),
            ("reverse_edges_added", d.reverses_added),
            ("direction_duplicates_merged", d.duplicates_merged),
            ("direction_output", d.output),
            ("true_negatives_inferred", self.negatives.inferred),
            ("disjointness_conflicts", self.negatives.conflicts.len() as u64),
            ("assembly_input", a.input),
            ("rejected_domain_range", a.rejected_type.len() as u64),
            ("duplicates_merged", a.duplicates_merged),
            ("polarity_conflicts", a.polarity_conflicts.len() as u64),
            ("graph_positives", a.positives),
            ("graph_negatives", a.negatives),
        ]
        .into_iter()
        .map(|(k, v)| (String::from(k), v))
        .collect();
        for name in &x.unknown_sources {
            out.push((format!("unknown_excluded_source:{name}"), 0));
        }
        for name in &x.unknown_relations {
            out.push((format!("unknown_excluded_relation:{name}"), 0));
        }
        out
    }

    /// The accounting identities between consecutive steps.
    pub fn accounting_holds(&self) -> bool {
        let p = &self.parse;
        let q = &self.quality;
        let x = &self.exclusion;
        let d = &self.direction;
        let a = &self.assembly;
        p.lines_read == p.parsed + p.errors.len() as u64
            && q.input == q.kept_scored + q.kept_unscored + q.dropped
            && d.output + d.duplicates_merged == d.input + d.reverses_added
            && a.input == a.positives + a.negatives + a.rejected_type.len() as u64 + a.duplicates_merged
                + a.polarity_conflicts.len() as u64
            && x.input >= x.dropped_source + x.dropped_relation
    }
}

fn parse_entity<'a>(field: &'a str, schema: &Schema) -> Result<(NodeTypeId, &'a str), String> {
    let (ty, id) = field.split_once(':').ok_or_else(|| format!("entity {field:?} is not TYPE:id"))?;
    let ty_id = schema.node_type_id(ty).ok_or_else(|| format!("unknown node type {ty:?}"))?;
    if id.is_empty() {
        return Err(format!("entity {field:?} has an empty id"));
    }
    Ok((ty_id, id))
}

fn parse_line(
    line: &str,
    schema: &Schema,
    vocab: &mut Vocabulary,
    sources: &mut HashMap<String, Arc<str>>,
) -> Result<Edge, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if !(5..=8).contains(&cols.len()) {
        return Err(format!("expected 5 to 8 tab-separated columns, found {}", cols.len()));
    }
    let (head_ty, head) = parse_entity(cols[0], schema)?;
    let relation = schema.relation_id(cols[1]).ok_or_else(|| format!("unknown relation {:?}", cols[1]))?;
    let (tail_ty, tail) = parse_entity(cols[2], schema)?;
    if head_ty != schema.domain(relation) || tail_ty != schema.range(relation) {
        return Err(format!(
            "{} expects {} -> {}, got {} -> {}",
            cols[1],
            schema.node_type_name(schema.domain(relation)),
            schema.node_type_name(schema.range(relation)),
            schema.node_type_name(head_ty),
            schema.node_type_name(tail_ty),
        ));
    }
    let quality = match cols[3] {
        "-" => None,
        q => {
            let v: f64 = q.parse().map_err(|_| format!("quality {q:?} is not a number"))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("quality {q} outside [0, 1]"));
            }
            Some(v)
        }
    };
    if cols[4].is_empty() {
        return Err("empty source label".into());
    }
    let date = match cols.get(5).copied() {
        None | Some("-") => None,
        Some(d) => Some(d.parse::<Date>().map_err(|_| format!("date {d:?} is not YYYY-MM-DD"))?),
    };
    let polarity = match cols.get(6).copied() {
        None | Some("+") => Polarity::Positive,
        Some("-") => Polarity::Negative,
        Some(p) => return Err(format!("polarity {p:?} is neither + nor -")),
    };
    let origin = match cols.get(7).copied() {
        None | Some("-") => EdgeOrigin::Source,
        Some(r) => {
            let from = schema.relation_id(r).ok_or_else(|| format!("unknown origin relation {r:?}"))?;
            if polarity != Polarity::Negative || !schema.disjoint_with(relation).contains(&from) {
                return Err(format!("origin {r:?} is not a relation disjoint with {:?} on a negative edge", cols[1]));
            }
            EdgeOrigin::Inferred { from }
        }
    };
    let source = match sources.get(cols[4]) {
        Some(s) => s.clone(),
        None => {
            let s: Arc<str> = cols[4].into();
            sources.insert(cols[4].into(), s.clone());
            s
        }
    };
    let key = TripleKey::new(vocab.intern(head_ty, head), relation, vocab.intern(tail_ty, tail));
    Ok(Edge { key, polarity, quality, source, date, origin })
}

/// Parses one data line:
/// `head  relation  tail  quality|-  source  [date|-]  [+|-]  [origin|-]`.
/// Entities are `TYPE:id` and are interned only when the whole line is
/// valid. `origin` names the positive relation an inferred negative was
/// derived from.
pub fn parse_edge_line(line: &str, schema: &Schema, vocab: &mut Vocabulary) -> Result<Edge, String> {
    parse_line(line, schema, vocab, &mut HashMap::new())
}

/// Parses raw lines (without their `\n`) of an edge file. A trailing `\r`
/// is stripped; blank lines and lines starting with `#` count as comments.
/// Malformed lines are recorded with their 1-based number and skipped.
pub fn parse_edges<'a, I>(lines: I, schema: &Schema, vocab: &mut Vocabulary) -> (Vec<Edge>, ParseStats)
where
    I: IntoIterator<Item = &'a [u8]>,
{
    let mut stats = ParseStats::default();
    let mut sources = HashMap::new();
    let mut edges = Vec::new();
    for (i, raw) in lines.into_iter().enumerate() {
        let line_no = i as u64 + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        if raw.is_empty() || raw.starts_with(b"#") {
            stats.comment_lines += 1;
            continue;
        }
        stats.lines_read += 1;
        let parsed = core::str::from_utf8(raw)
            .map_err(|_| String::from("line is not valid UTF-8"))
            .and_then(|line| parse_line(line, schema, vocab, &mut sources));
        match parsed {
            Ok(e) => {
                stats.parsed += 1;
                edges.push(e);
            }
            Err(reason) => stats.errors.push(LineError { line: line_no, reason }),
        }
    }
    (edges, stats)
}

/// Keeps an edge when the level is `all`, when it carries no score, or when
/// its score reaches the source's cut-off for the level.
pub fn apply_quality_filter(
    edges: Vec<Edge>,
    setting: &QualitySetting,
) -> Result<(Vec<Edge>, QualityStats), IngestError> {
    let mut stats = QualityStats { input: edges.len() as u64, ..Default::default() };
    let mut kept = Vec::with_capacity(edges.len());
    for e in edges {
        let keep = match (setting.level, e.quality) {
            (_, None) => {
                stats.kept_unscored += 1;
                kept.push(e);
                continue;
            }
            (QualityLevel::All, Some(_)) => true,
            (level, Some(q)) => {
                let cut = setting
                    .thresholds
                    .get(&*e.source)
                    .and_then(|c| c.for_level(level))
                    .ok_or_else(|| IngestError::MissingThreshold((*e.source).into()))?;
                q >= cut
            }
        };
        if keep {
            stats.kept_scored += 1;
            kept.push(e);
        } else {
            stats.dropped += 1;
        }
    }
    Ok((kept, stats))
}

/// Drops edges whose source label or relation name is excluded. Names that
/// match nothing are reported, not rejected.
pub fn filter_sources_and_relations(
    edges: Vec<Edge>,
    excluded_sources: &[String],
    excluded_relations: &[String],
    schema: &Schema,
) -> (Vec<Edge>, ExclusionStats) {
    let mut stats = ExclusionStats { input: edges.len() as u64, ..Default::default() };
    let sources: HashSet<&str> = excluded_sources.iter().map(String::as_str).collect();
    let relations: HashSet<_> = excluded_relations.iter().filter_map(|n| schema.relation_id(n)).collect();
    stats.unknown_relations =
        excluded_relations.iter().filter(|n| schema.relation_id(n).is_none()).cloned().collect();
    let mut seen_sources: HashSet<&str> = HashSet::default();
    for e in &edges {
        if sources.contains(&*e.source) {
            seen_sources.insert(&*e.source);
        }
    }
    stats.unknown_sources = excluded_sources.iter().filter(|s| !seen_sources.contains(s.as_str())).cloned().collect();
    drop(seen_sources);

    let mut kept = Vec::with_capacity(edges.len());
    for e in edges {
        if sources.contains(&*e.source) {
            stats.dropped_source += 1;
        } else if relations.contains(&e.key.relation) {
            stats.dropped_relation += 1;
        } else {
            kept.push(e);
        }
    }
    (kept, stats)
}

/// Merges edges sharing `(key, polarity)`, keeping first-seen order.
fn dedup(edges: Vec<Edge>) -> (Vec<Edge>, u64) {
    let mut slot: HashMap<(TripleKey, Polarity), usize> = HashMap::with_capacity(edges.len());
    let mut out: Vec<Edge> = Vec::with_capacity(edges.len());
    let mut merged = 0;
    for e in edges {
        match slot.get(&(e.key, e.polarity)) {
            Some(&i) => {
                out[i].merge(&e);
                merged += 1;
            }
            None => {
                slot.insert((e.key, e.polarity), out.len());
                out.push(e);
            }
        }
    }
    (out, merged)
}

/// One edge per symmetric pair, in canonical orientation.
pub fn make_undirected(edges: Vec<Edge>, schema: &Schema) -> (Vec<Edge>, DirectionStats) {
    let input = edges.len() as u64;
    let canon = edges
        .into_iter()
        .map(|mut e| {
            e.key = schema.canonical_form(e.key);
            e
        })
        .collect();
    let (out, merged) = dedup(canon);
    let stats = DirectionStats { input, reverses_added: 0, duplicates_merged: merged, output: out.len() as u64 };
    (out, stats)
}

/// Adds the explicit reverse of every symmetric-relation edge.
pub fn make_directed(edges: Vec<Edge>, schema: &Schema) -> (Vec<Edge>, DirectionStats) {
    let input = edges.len() as u64;
    let mut all = Vec::with_capacity(edges.len() * 2);
    let mut added = 0;
    for e in edges {
        let reverse = (schema.is_symmetric(e.key.relation) && e.key.head != e.key.tail).then(|| {
            let mut r = e.clone();
            r.key = e.key.reversed();
            r
        });
        all.push(e);
        if let Some(r) = reverse {
            all.push(r);
            added += 1;
        }
    }
    let (out, merged) = dedup(all);
    let stats = DirectionStats { input, reverses_added: added, duplicates_merged: merged, output: out.len() as u64 };
    (out, stats)
}

/// For every positive `(h, r, t)` and every `s` disjoint with `r`, emits the
/// negative `(h, s, t)` unless that triple is itself positive, which is
/// recorded as a conflict instead. Non-positive input edges are ignored.
pub fn infer_true_negatives(edges: &[Edge], schema: &Schema) -> (Vec<Edge>, NegativeStats) {
    let positives: HashSet<TripleKey> = edges.iter().filter(|e| e.is_positive()).map(|e| e.key).collect();
    let mut stats = NegativeStats::default();
    let mut out = Vec::new();
    for e in edges.iter().filter(|e| e.is_positive()) {
        for &s in schema.disjoint_with(e.key.relation) {
            let key = e.key.with_relation(s);
            if positives.contains(&key) {
                // each contradicting pair is seen from both sides; record it once
                if e.key.relation < s {
                    stats.conflicts.push((e.key, key));
                }
                continue;
            }
            out.push(Edge {
                key,
                polarity: Polarity::Negative,
                quality: None,
                source: e.source.clone(),
                date: e.date,
                origin: EdgeOrigin::Inferred { from: e.key.relation },
            });
        }
    }
    let (out, _) = dedup(out);
    stats.inferred = out.len() as u64;
    (out, stats)
}

/// Type-checks, merges duplicates and resolves polarity conflicts in favour
/// of the positive, then indexes the result.
pub fn assemble_graph(schema: Arc<Schema>, vocab: Arc<Vocabulary>, edges: Vec<Edge>) -> (Graph, AssemblyStats) {
    let mut stats = AssemblyStats { input: edges.len() as u64, ..Default::default() };
    let mut typed = Vec::with_capacity(edges.len());
    for e in edges {
        if schema.type_check(&e.key, &vocab) {
            typed.push(e);
        } else {
            stats.rejected_type.push(e.key);
        }
    }
    let (merged, dups) = dedup(typed);
    stats.duplicates_merged = dups;
    let positive: HashSet<TripleKey> = merged.iter().filter(|e| e.is_positive()).map(|e| e.key).collect();
    let mut clean = Vec::with_capacity(merged.len());
    for e in merged {
        if !e.is_positive() && positive.contains(&e.key) {
            stats.polarity_conflicts.push(e.key);
        } else {
            clean.push(e);
        }
    }
    stats.polarity_conflicts.sort_unstable();
    stats.positives = positive.len() as u64;
    stats.negatives = (clean.len() - positive.len()) as u64;
    (Graph::from_clean_edges(schema, vocab, clean), stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::tests::toy_schema;
    use crate::schema::RelationId;
    use crate::vocab::EntityId;
    use alloc::vec;
    use proptest::prelude::*;

    fn k(h: u32, r: RelationId, t: u32) -> TripleKey {
        TripleKey::new(EntityId(h), r, EntityId(t))
    }

    fn pos(key: TripleKey, src: &str, q: Option<f64>) -> Edge {
        let mut e = Edge::positive(key, src.into());
        e.quality = q;
        e
    }

    fn thresholds(entries: &[(&str, f64, f64, f64)]) -> BTreeMap<String, Cutoffs> {
        entries.iter().map(|&(s, high, medium, low)| (s.into(), Cutoffs { high, medium, low })).collect()
    }

    fn parse(text: &str) -> (Vec<Edge>, ParseStats, Vocabulary) {
        let schema = toy_schema();
        let mut vocab = Vocabulary::new(&schema);
        let (edges, stats) = parse_edges(text.as_bytes().split(|b| *b == b'\n'), &schema, &mut vocab);
        (edges, stats, vocab)
    }

    #[test]
    fn parse_well_formed_line() {
        let (edges, stats, vocab) = parse("GENE:7157\tassoc\tDIS:0050686\t0.9\tsrcA");
        assert_eq!((edges.len(), stats.parsed, stats.lines_read), (1, 1, 1));
        let e = &edges[0];
        assert_eq!((e.quality, &*e.source, e.polarity), (Some(0.9), "srcA", Polarity::Positive));
        assert_eq!(alloc::format!("{}", vocab.label(e.key.tail)), "DIS:0050686");
    }

    #[test]
    fn parse_errors_name_lines_and_continue() {
        let text = "# header\nGENE:1\tassoc\n\nGENE:1\tassoc\tDIS:2\t-\ts\t2020-01-31\t-\r\nDRUG:1\tassoc\tDIS:2\t-\ts\n\
                    GENE:1\tnope\tDIS:2\t-\ts\nGENE:1\tassoc\tDIS:2\t1.5\ts\nGENE:1\tassoc\tDIS:2\t-\ts\t2020-02-30";
        let (edges, stats, vocab) = parse(text);
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].polarity, Polarity::Negative);
        assert_eq!(edges[0].date, Date::new(2020, 1, 31));
        assert_eq!(stats.errors.iter().map(|e| e.line).collect::<Vec<_>>(), vec![2, 5, 6, 7, 8]);
        assert_eq!(stats.comment_lines, 2);
        assert_eq!(stats.lines_read, stats.parsed + stats.errors.len() as u64);
        // the rejected DRUG:1 line interned nothing
        assert_eq!(vocab.len(), 2);
    }

    #[test]
    fn parse_keeps_duplicate_lines() {
        let line = "GENE:1\tassoc\tDIS:2\t0.3\ts\n";
        let (edges, _, vocab) = parse(&line.repeat(2));
        assert_eq!((edges.len(), vocab.len()), (2, 2));
        assert_eq!(edges[0].key, edges[1].key);
    }

    #[test]
    fn parse_origin_column() {
        let (edges, stats, _) =
            parse("GENE:1\tunder_expressed_in\tANATOMY:2\t-\ts\t-\t-\tover_expressed_in\nGENE:1\tassoc\tDIS:2\t-\ts\t-\t+\tassoc");
        assert_eq!(stats.errors.len(), 1);
        assert!(matches!(edges[0].origin, EdgeOrigin::Inferred { .. }));
    }

    #[test]
    fn quality_level_all_is_identity() {
        let r = RelationId(0);
        let edges = vec![pos(k(0, r, 1), "a", Some(0.1)), pos(k(1, r, 2), "zzz", None)];
        let (out, stats) = apply_quality_filter(edges.clone(), &QualitySetting::all()).unwrap();
        assert_eq!(out, edges);
        assert_eq!(stats.dropped, 0);
    }

    #[test]
    fn quality_per_source_cutoffs() {
        let r = RelationId(0);
        let setting =
            QualitySetting::new(QualityLevel::High, thresholds(&[("srcA", 0.7, 0.5, 0.1), ("srcB", 0.4, 0.3, 0.1)]))
                .unwrap();
        let edges = vec![
            pos(k(0, r, 1), "srcA", Some(0.9)),
            pos(k(0, r, 2), "srcA", Some(0.5)),
            pos(k(0, r, 3), "srcB", Some(0.5)),
            pos(k(0, r, 4), "srcA", None),
        ];
        let (out, stats) = apply_quality_filter(edges, &setting).unwrap();
        let kept: Vec<u32> = out.iter().map(|e| e.key.tail.0).collect();
        assert_eq!(kept, vec![1, 3, 4]);
        assert_eq!(stats, QualityStats { input: 4, kept_scored: 2, kept_unscored: 1, dropped: 1 });
    }

    #[test]
    fn quality_missing_source_is_error() {
        let setting = QualitySetting::new(QualityLevel::Low, thresholds(&[("srcA", 0.7, 0.5, 0.1)])).unwrap();
        let edges = vec![pos(k(0, RelationId(0), 1), "other", Some(0.9))];
        assert_eq!(
            apply_quality_filter(edges, &setting).unwrap_err(),
            IngestError::MissingThreshold("other".into())
        );
        assert!(QualitySetting::new(QualityLevel::Low, thresholds(&[("s", 0.3, 0.5, 0.1)])).is_err());
        assert!(QualitySetting::new(QualityLevel::Low, thresholds(&[("s", 1.3, 0.5, 0.1)])).is_err());
        assert!("bogus".parse::<QualityLevel>().is_err());
    }

    #[test]
    fn exclusion_filters() {
        let s = toy_schema();
        let interacts = s.relation_id("interacts").unwrap();
        let targets = s.relation_id("targets").unwrap();
        let edges = vec![
            pos(k(0, targets, 1), "srcA", None),
            pos(k(0, interacts, 1), "srcA", None),
            pos(k(2, targets, 1), "srcB", None),
            pos(k(0, interacts, 2), "srcB", None),
            pos(k(1, interacts, 2), "srcB", None),
        ];
        let (same, _) = filter_sources_and_relations(edges.clone(), &[], &[], &s);
        assert_eq!(same, edges);

        let (out, stats) = filter_sources_and_relations(edges.clone(), &["srcA".into()], &[], &s);
        assert!(out.iter().all(|e| &*e.source != "srcA"));
        assert_eq!(stats.dropped_source, 2);

        let (out, stats) =
            filter_sources_and_relations(edges, &["nope".into()], &["targets".into(), "bogus".into()], &s);
        assert_eq!(out.len(), 3);
        assert_eq!(stats.unknown_sources, vec![String::from("nope")]);
        assert_eq!(stats.unknown_relations, vec![String::from("bogus")]);
    }

    #[test]
    fn undirected_and_directed_variants() {
        let s = toy_schema();
        let i = s.relation_id("interacts").unwrap();
        let t = s.relation_id("targets").unwrap();
        let (out, _) = make_undirected(vec![pos(k(0, i, 1), "s", None), pos(k(1, i, 0), "s", None)], &s);
        assert_eq!(out.iter().map(|e| e.key).collect::<Vec<_>>(), vec![k(0, i, 1)]);
        let (out, _) = make_undirected(vec![pos(k(1, i, 0), "s", None)], &s);
        assert_eq!(out[0].key, k(0, i, 1));
        let (out, _) = make_undirected(vec![pos(k(1, t, 0), "s", None)], &s);
        assert_eq!(out[0].key, k(1, t, 0));

        let (out, stats) = make_directed(vec![pos(k(0, i, 1), "s", Some(0.3))], &s);
        assert_eq!(out.iter().map(|e| e.key).collect::<Vec<_>>(), vec![k(0, i, 1), k(1, i, 0)]);
        assert_eq!(out[1].quality, Some(0.3));
        assert_eq!(stats.reverses_added, 1);
        let (out, _) = make_directed(vec![pos(k(0, t, 1), "s", None)], &s);
        assert_eq!(out.len(), 1);
        let (out, _) = make_directed(vec![pos(k(0, i, 0), "s", None)], &s);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn true_negatives_from_disjoint_pairs() {
        let s = toy_schema();
        let over = s.relation_id("over_expressed_in").unwrap();
        let under = s.relation_id("under_expressed_in").unwrap();
        let (neg, stats) = infer_true_negatives(&[pos(k(0, over, 9), "s", None)], &s);
        assert_eq!(neg.len(), 1);
        assert_eq!(neg[0].key, k(0, under, 9));
        assert_eq!(neg[0].polarity, Polarity::Negative);
        assert_eq!(neg[0].origin, EdgeOrigin::Inferred { from: over });
        assert!(stats.conflicts.is_empty());

        let (neg, stats) = infer_true_negatives(&[pos(k(0, over, 9), "s", None), pos(k(0, under, 9), "s", None)], &s);
        assert!(neg.is_empty());
        assert_eq!(stats.conflicts, vec![(k(0, over, 9), k(0, under, 9))]);

        let plain = schema_without_disjoint();
        let (neg, _) = infer_true_negatives(&[pos(k(0, RelationId(0), 1), "s", None)], &plain);
        assert!(neg.is_empty());
    }

    fn schema_without_disjoint() -> Schema {
        crate::RelationSchema::new(vec![crate::RelationDef::new("r", "A", "A")]).validate().unwrap()
    }

    fn vocab_for(s: &Schema) -> Arc<Vocabulary> {
        let mut v = Vocabulary::new(s);
        let gene = s.node_type_id("GENE").unwrap();
        for i in 0..20 {
            v.intern(gene, &format!("{i}"));
        }
        Arc::new(v)
    }

    #[test]
    fn assembly_rules() {
        let s = Arc::new(toy_schema());
        let v = vocab_for(&s);
        let r = s.relation_id("interacts").unwrap();
        let (g, stats) =
            assemble_graph(s.clone(), v.clone(), vec![pos(k(0, r, 1), "b", Some(0.4)), pos(k(0, r, 1), "a", Some(0.9))]);
        assert_eq!(g.len(), 1);
        assert_eq!(g.positives()[0].quality, Some(0.9));
        assert_eq!(stats.duplicates_merged, 1);

        let a = [pos(k(0, r, 1), "s", None), pos(k(1, r, 2), "s", None)];
        let b = vec![pos(k(3, r, 4), "s", None)];
        let (g, _) = assemble_graph(s.clone(), v.clone(), a.iter().chain(&b).cloned().collect());
        assert_eq!(g.len(), a.len() + b.len());

        let (g, stats) = assemble_graph(
            s.clone(),
            v.clone(),
            vec![pos(k(0, r, 1), "s", None), Edge::negative(k(0, r, 1), "s".into())],
        );
        assert_eq!(g.positives().len(), 1);
        assert!(g.negatives().is_empty());
        assert_eq!(stats.polarity_conflicts, vec![k(0, r, 1)]);

        // GENE head on a DRUG -> GENE relation
        let targets = s.relation_id("targets").unwrap();
        let (g, stats) = assemble_graph(s, v, vec![pos(k(0, targets, 1), "s", None)]);
        assert!(g.is_empty());
        assert_eq!(stats.rejected_type.len(), 1);
    }

    fn arb_edges() -> impl Strategy<Value = Vec<Edge>> {
        // toy schema relations 0 (interacts, symmetric), 3, 4 are GENE -> GENE
        prop::collection::vec((0u32..15, prop::sample::select(vec![0u16, 3, 4]), 0u32..15, any::<bool>()), 0..500)
            .prop_map(|v| {
                v.into_iter()
                    .map(|(h, r, t, hi)| pos(k(h, RelationId(r), t), "s", Some(if hi { 0.8 } else { 0.2 })))
                    .collect()
            })
    }

    fn keys(v: &[Edge]) -> HashSet<TripleKey> {
        v.iter().map(|e| e.key).collect()
    }

    proptest! {
        #[test]
        fn undirected_of_directed_is_undirected(edges in arb_edges()) {
            let s = toy_schema();
            let (direct, _) = make_directed(edges.clone(), &s);
            let (a, _) = make_undirected(direct.clone(), &s);
            let (b, _) = make_undirected(edges, &s);
            prop_assert_eq!(keys(&a), keys(&b));
            let d = keys(&direct);
            for key in &d {
                if s.is_symmetric(key.relation) {
                    prop_assert!(d.contains(&key.reversed()));
                }
            }
        }

        #[test]
        fn quality_filter_is_monotone(edges in arb_edges(), hi in 0.5f64..1.0, mid in 0.2f64..0.5, lo in 0.0f64..0.2) {
            let setting = QualitySetting::new(QualityLevel::All, thresholds(&[("s", hi, mid, lo)])).unwrap();
            let run = |l| keys(&apply_quality_filter(edges.clone(), &setting.with_level(l)).unwrap().0);
            let (h, m, l, a) = (run(QualityLevel::High), run(QualityLevel::Medium), run(QualityLevel::Low), run(QualityLevel::All));
            prop_assert!(h.is_subset(&m) && m.is_subset(&l) && l.is_subset(&a));
        }

        #[test]
        fn inferred_negatives_never_positive(pairs in prop::collection::vec((0u32..6, any::<bool>(), 0u32..4), 0..60)) {
            let s = toy_schema();
            let over = s.relation_id("over_expressed_in").unwrap();
            let under = s.relation_id("under_expressed_in").unwrap();
            let edges: Vec<Edge> = pairs.iter()
                .map(|&(h, o, t)| pos(k(h, if o { over } else { under }, t), "s", None))
                .collect();
            let (neg, _) = infer_true_negatives(&edges, &s);
            let p = keys(&edges);
            prop_assert!(neg.iter().all(|n| !p.contains(&n.key)));
        }

        #[test]
        fn report_accounting(edges in arb_edges(), drop_src in any::<bool>()) {
            let s = Arc::new(toy_schema());
            let v = vocab_for(&s);
            let mut report = IngestReport::default();
            report.parse = ParseStats { lines_read: edges.len() as u64, parsed: edges.len() as u64, ..Default::default() };
            let setting = QualitySetting::new(QualityLevel::Medium, thresholds(&[("s", 0.9, 0.5, 0.1)])).unwrap();
            let (e, q) = apply_quality_filter(edges, &setting).unwrap();
            report.quality = q;
            let excl: Vec<String> = if drop_src { vec!["x".into()] } else { vec![] };
            let (e, x) = filter_sources_and_relations(e, &excl, &["part_of".into()], &s);
            report.exclusion = x;
            let (e, d) = make_directed(e, &s);
            report.direction = d;
            let (mut neg, n) = infer_true_negatives(&e, &s);
            report.negatives = n;
            let mut all = e;
            all.append(&mut neg);
            let (_, a) = assemble_graph(s, v, all);
            report.assembly = a;
            prop_assert!(report.accounting_holds());
        }
    }
}
