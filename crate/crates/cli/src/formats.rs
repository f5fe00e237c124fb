//! Plain-text dataset and artifact formats.
//!
//! Data files are line oriented. Blank lines and lines starting with `#` or
//! `%` are ignored. Fields may be separated by tabs, commas or runs of
//! spaces, so delimited and whitespace edge lists load the same way.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use trust_siot_core::credibility::CredibilityScores;
use trust_siot_core::features::{TrustSample, FEATURE_NAMES, N_FEATURES};
use trust_siot_core::graph::{InteractionRecord, Outcome};
use trust_siot_core::ingest::{normalize_min_max, AdvogatoLevel, RawRating};
use trust_siot_core::metrics::EvalReport;
use trust_siot_core::{ObjectId, Relation, RelationTriple, TrustGraph, TrustLabel};

use crate::error::FormatError;

type FResult<T> = Result<T, FormatError>;

/// At most this many malformed lines are logged individually per file.
const MAX_LOGGED_BAD_LINES: usize = 10;

pub fn read_text(path: &Path) -> FResult<String> {
    fs::read_to_string(path).map_err(|e| FormatError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> FResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| FormatError::io(path, e))
}

/// Data lines with their 1-based line numbers.
pub fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim();
        (!l.is_empty() && !l.starts_with('#') && !l.starts_with('%')).then_some((i + 1, l))
    })
}

pub fn fields(line: &str) -> Vec<&str> {
    line.split(['\t', ',', ' ']).filter(|f| !f.is_empty()).collect()
}

/// Counts of what a loader accepted and rejected.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadDiagnostics {
    pub lines: usize,
    pub bad_lines: usize,
    /// Observed `(min, max)` before normalisation, for rescaled datasets.
    pub raw_range: Option<(f64, f64)>,
}

impl LoadDiagnostics {
    fn reject(&mut self, path: &Path, line: usize, why: &str) {
        self.bad_lines += 1;
        if self.bad_lines <= MAX_LOGGED_BAD_LINES {
            warn!("{}:{line}: skipped: {why}", path.display());
        }
    }
}

/// Ratings loaded from disk. `names` lists `(id, original name)` when the
/// file used non-numeric object names that had to be interned.
#[derive(Debug, Clone, Default)]
pub struct RatingsFile {
    pub ratings: Vec<RawRating>,
    pub names: Vec<(ObjectId, String)>,
    pub diagnostics: LoadDiagnostics,
}

/// Maps object names to ids: numeric names are used verbatim when every
/// name in the file is numeric, otherwise names are numbered in order of
/// first appearance.
struct Interner {
    numeric: bool,
    ids: HashMap<String, ObjectId>,
    names: Vec<(ObjectId, String)>,
}

impl Interner {
    fn new<'a>(all: impl IntoIterator<Item = &'a str>) -> Self {
        let mut numeric = true;
        let mut ids = HashMap::new();
        let mut names = Vec::new();
        for name in all {
            numeric &= name.parse::<u64>().is_ok();
            if !ids.contains_key(name) {
                let id = ObjectId(names.len() as u64);
                ids.insert(name.to_string(), id);
                names.push((id, name.to_string()));
            }
        }
        if numeric {
            names.clear();
        }
        Self { numeric, ids, names }
    }

    fn id(&self, name: &str) -> ObjectId {
        if self.numeric {
            ObjectId(name.parse().expect("checked numeric"))
        } else {
            self.ids[name]
        }
    }
}

fn parse_time(s: &str) -> Option<u64> {
    s.parse::<u64>().ok().or_else(|| {
        let t: f64 = s.parse().ok()?;
        (t.is_finite() && t >= 0.0).then(|| t.floor() as u64)
    })
}

/// One accepted rating line before ids are assigned.
struct RawLine<'a> {
    rater: &'a str,
    rated: &'a str,
    value: f64,
    time: Option<u64>,
}

fn finish(path: &Path, rows: Vec<RawLine<'_>>, diagnostics: LoadDiagnostics) -> RatingsFile {
    let interner = Interner::new(rows.iter().flat_map(|r| [r.rater, r.rated]));
    let ratings = rows
        .iter()
        .map(|r| RawRating::new(interner.id(r.rater), interner.id(r.rated), r.value, r.time))
        .collect();
    if diagnostics.bad_lines > 0 {
        warn!(
            "{}: {} malformed line(s) skipped",
            path.display(),
            diagnostics.bad_lines
        );
    }
    RatingsFile {
        ratings,
        names: interner.names,
        diagnostics,
    }
}

/// Parses `"a" -> "b" [level="Master"]` edge statements.
fn parse_dot_edge(line: &str) -> Option<(&str, &str, &str)> {
    let (lhs, rest) = line.split_once("->")?;
    let rater = lhs.trim().trim_matches('"');
    let (rated, attrs) = match rest.split_once('[') {
        Some((r, a)) => (r, a),
        None => (rest, ""),
    };
    let rated = rated.trim().trim_end_matches(';').trim().trim_matches('"');
    let level = attrs.split_once("level")?.1.trim_start().strip_prefix('=')?;
    let level = level.trim_start().trim_start_matches('"');
    let end = level.find(|c: char| c == '"' || c == ']' || c == ',' || c == ';' || c.is_whitespace())?;
    Some((rater, rated, &level[..end])).filter(|(a, b, _)| !a.is_empty() && !b.is_empty())
}

/// Certification data: `rater rated level [time]` lines, or Graphviz edge
/// statements carrying a `level` attribute. Levels map to 0.1, 0.5, 0.7
/// and 1.0; unknown levels and malformed lines are skipped and counted.
pub fn load_advogato_str(path: &Path, text: &str) -> RatingsFile {
    let mut diag = LoadDiagnostics::default();
    let mut rows = Vec::new();
    for (n, line) in data_lines(text) {
        if line.contains("->") {
            diag.lines += 1;
            match parse_dot_edge(line) {
                Some((a, b, level)) => match level.parse::<AdvogatoLevel>() {
                    Ok(l) => rows.push(RawLine {
                        rater: a,
                        rated: b,
                        value: l.value(),
                        time: None,
                    }),
                    Err(_) => diag.reject(path, n, "unknown certification level"),
                },
                None => diag.reject(path, n, "unreadable edge statement"),
            }
            continue;
        }
        // Graph structure lines of a Graphviz file carry no ratings.
        if line.starts_with("digraph") || line.starts_with('}') || line.starts_with('{') || line.contains('[') {
            continue;
        }
        diag.lines += 1;
        let f = fields(line);
        if !(3..=4).contains(&f.len()) {
            diag.reject(path, n, "expected `rater rated level [time]`");
            continue;
        }
        let Ok(level) = f[2].parse::<AdvogatoLevel>() else {
            diag.reject(path, n, "unknown certification level");
            continue;
        };
        let time = match f.get(3) {
            Some(t) => match parse_time(t) {
                Some(t) => Some(t),
                None => {
                    diag.reject(path, n, "bad timestamp");
                    continue;
                }
            },
            None => None,
        };
        rows.push(RawLine {
            rater: f[0],
            rated: f[1],
            value: level.value(),
            time,
        });
    }
    finish(path, rows, diag)
}

pub fn load_advogato(path: &Path) -> FResult<RatingsFile> {
    Ok(load_advogato_str(path, &read_text(path)?))
}

fn load_numeric_str(path: &Path, text: &str, unit_range: bool) -> RatingsFile {
    let mut diag = LoadDiagnostics::default();
    let mut rows = Vec::new();
    for (n, line) in data_lines(text) {
        diag.lines += 1;
        let f = fields(line);
        if !(3..=4).contains(&f.len()) {
            diag.reject(path, n, "expected `rater rated rating [time]`");
            continue;
        }
        let value = match f[2].parse::<f64>() {
            Ok(v) if v.is_finite() && (!unit_range || (0.0..=1.0).contains(&v)) => v,
            _ => {
                diag.reject(path, n, "bad rating value");
                continue;
            }
        };
        let time = match f.get(3).map(|t| parse_time(t)) {
            Some(None) => {
                diag.reject(path, n, "bad timestamp");
                continue;
            }
            Some(t) => t,
            None => None,
        };
        rows.push(RawLine {
            rater: f[0],
            rated: f[1],
            value,
            time,
        });
    }
    finish(path, rows, diag)
}

/// Signed ratings such as `source,target,rating,time`, min-max rescaled
/// onto [0, 1] using the observed range.
pub fn load_btc_str(path: &Path, text: &str) -> FResult<RatingsFile> {
    let mut file = load_numeric_str(path, text, false);
    let range = normalize_min_max(&mut file.ratings).map_err(|source| FormatError::Core {
        path: path.to_path_buf(),
        source,
    })?;
    file.diagnostics.raw_range = Some(range);
    Ok(file)
}

pub fn load_btc(path: &Path) -> FResult<RatingsFile> {
    load_btc_str(path, &read_text(path)?)
}

/// Edge list whose ratings already lie in [0, 1].
pub fn load_unit_ratings_str(path: &Path, text: &str) -> RatingsFile {
    load_numeric_str(path, text, true)
}

pub fn load_unit_ratings(path: &Path) -> FResult<RatingsFile> {
    Ok(load_unit_ratings_str(path, &read_text(path)?))
}

pub fn ratings_tsv(ratings: &[RawRating]) -> String {
    let mut out = String::from("# trustor\ttrustee\trating\ttime\n");
    for r in ratings {
        let _ = write!(out, "{}\t{}\t{}", r.rater, r.rated, r.value);
        if let Some(t) = r.time {
            let _ = write!(out, "\t{t}");
        }
        out.push('\n');
    }
    out
}

/// Interactions as an edge list with rating 1 for positive and 0 for
/// negative outcomes.
pub fn interactions_tsv(records: &[InteractionRecord]) -> String {
    let mut out = String::from("# trustor\ttrustee\trating\ttime\n");
    for r in records {
        let rating = u8::from(r.outcome == Outcome::Positive);
        let _ = writeln!(out, "{}\t{}\t{rating}\t{}", r.trustor, r.trustee, r.time);
    }
    out
}

fn parse_id(path: &Path, line: usize, s: &str) -> FResult<ObjectId> {
    s.parse::<u64>()
        .map(ObjectId)
        .map_err(|_| FormatError::parse(path, line, format!("bad object id `{s}`")))
}

fn parse_f64(path: &Path, line: usize, s: &str) -> FResult<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(FormatError::parse(path, line, format!("bad number `{s}`"))),
    }
}

fn expect_fields<'a>(path: &Path, line: usize, text: &'a str, n: usize) -> FResult<Vec<&'a str>> {
    let f = fields(text);
    if f.len() != n {
        return Err(FormatError::parse(
            path,
            line,
            format!("expected {n} fields, found {}", f.len()),
        ));
    }
    Ok(f)
}

pub fn read_interactions_str(path: &Path, text: &str) -> FResult<Vec<InteractionRecord>> {
    data_lines(text)
        .map(|(n, line)| {
            let f = expect_fields(path, n, line, 4)?;
            let outcome = match f[2] {
                "1" => Outcome::Positive,
                "0" => Outcome::Negative,
                other => {
                    return Err(FormatError::parse(
                        path,
                        n,
                        format!("outcome must be 0 or 1, got `{other}`"),
                    ))
                }
            };
            let time = parse_time(f[3]).ok_or_else(|| FormatError::parse(path, n, "bad timestamp"))?;
            Ok(InteractionRecord::new(
                parse_id(path, n, f[0])?,
                parse_id(path, n, f[1])?,
                time,
                outcome,
            ))
        })
        .collect()
}

pub fn read_interactions(path: &Path) -> FResult<Vec<InteractionRecord>> {
    read_interactions_str(path, &read_text(path)?)
}

/// Relation triples `head relation tail`. Relation names must be spelled
/// exactly; malformed lines are skipped and counted.
pub fn load_triples_str(path: &Path, text: &str) -> (Vec<RelationTriple>, LoadDiagnostics) {
    let mut diag = LoadDiagnostics::default();
    let mut out = Vec::new();
    for (n, line) in data_lines(text) {
        diag.lines += 1;
        let f = fields(line);
        let parsed = (f.len() == 3)
            .then(|| {
                Some(RelationTriple::new(
                    f[0].parse::<u64>().ok()?,
                    f[1].parse::<Relation>().ok()?,
                    f[2].parse::<u64>().ok()?,
                ))
            })
            .flatten();
        match parsed {
            Some(t) => out.push(t),
            None => diag.reject(
                path,
                n,
                "expected `head relation tail` with numeric ids and CLOR|POR|OOR|SOR|SOR2",
            ),
        }
    }
    (out, diag)
}

pub fn load_triples(path: &Path) -> FResult<(Vec<RelationTriple>, LoadDiagnostics)> {
    Ok(load_triples_str(path, &read_text(path)?))
}

pub fn triples_tsv(triples: &[RelationTriple]) -> String {
    let mut out = String::from("# head\trelation\ttail\n");
    for t in triples {
        let _ = writeln!(out, "{}\t{}\t{}", t.head, t.relation.as_str(), t.tail);
    }
    out
}

pub fn labels_tsv(labels: &[(ObjectId, ObjectId, TrustLabel)]) -> String {
    let mut out = String::from("# trustor\ttrustee\tlabel\n");
    for (a, b, l) in labels {
        let _ = writeln!(out, "{a}\t{b}\t{l}");
    }
    out
}

pub fn read_labels_str(path: &Path, text: &str) -> FResult<Vec<(ObjectId, ObjectId, TrustLabel)>> {
    data_lines(text)
        .map(|(n, line)| {
            let f = expect_fields(path, n, line, 3)?;
            let label = f[2]
                .parse::<TrustLabel>()
                .map_err(|_| FormatError::parse(path, n, format!("unknown label `{}`", f[2])))?;
            Ok((parse_id(path, n, f[0])?, parse_id(path, n, f[1])?, label))
        })
        .collect()
}

pub fn read_labels(path: &Path) -> FResult<Vec<(ObjectId, ObjectId, TrustLabel)>> {
    read_labels_str(path, &read_text(path)?)
}

pub fn mapping_tsv(mapping: &[(ObjectId, ObjectId)]) -> String {
    let mut out = String::from("# siot_object\trating_object\n");
    for (s, r) in mapping {
        let _ = writeln!(out, "{s}\t{r}");
    }
    out
}

pub fn names_tsv(names: &[(ObjectId, String)]) -> String {
    let mut out = String::from("# id\tname\n");
    for (id, name) in names {
        let _ = writeln!(out, "{id}\t{name}");
    }
    out
}

/// Weighted graph as `node` and `edge` records, so isolated nodes survive
/// a round trip.
pub fn graph_tsv(g: &TrustGraph) -> String {
    let mut out = format!("# trust graph: {} nodes, {} edges\n", g.node_count(), g.edge_count());
    for id in g.ids() {
        let _ = writeln!(out, "node\t{id}");
    }
    for e in g.edges() {
        let _ = writeln!(out, "edge\t{}\t{}\t{}", g.id(e.source), g.id(e.target), e.dtm);
    }
    out
}

pub fn read_graph_str(path: &Path, text: &str) -> FResult<TrustGraph> {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for (n, line) in data_lines(text) {
        let f = fields(line);
        match (f.first().copied(), f.len()) {
            (Some("node"), 2) => nodes.push(parse_id(path, n, f[1])?),
            (Some("edge"), 4) => edges.push((
                parse_id(path, n, f[1])?,
                parse_id(path, n, f[2])?,
                parse_f64(path, n, f[3])?,
            )),
            _ => {
                return Err(FormatError::parse(
                    path,
                    n,
                    "expected `node id` or `edge source target dtm`",
                ))
            }
        }
    }
    TrustGraph::from_parts(nodes, edges).map_err(|source| FormatError::Core {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_graph(path: &Path) -> FResult<TrustGraph> {
    read_graph_str(path, &read_text(path)?)
}

pub fn scores_csv(g: &TrustGraph, s: &CredibilityScores) -> String {
    let mut out = String::from("id,reliability,benevolence,credibility\n");
    for (i, id) in g.ids().iter().enumerate() {
        let _ = writeln!(
            out,
            "{id},{},{},{}",
            s.reliability[i], s.benevolence[i], s.credibility[i]
        );
    }
    out
}

/// Reads scores and aligns them with `g`'s node order. Every node must
/// have a row; credibility is recomputed from reliability and benevolence.
pub fn read_scores_str(path: &Path, text: &str, g: &TrustGraph) -> FResult<CredibilityScores> {
    let mut rows: BTreeMap<ObjectId, (f64, f64)> = BTreeMap::new();
    for (n, line) in data_lines(text).filter(|(_, l)| !l.starts_with("id,")) {
        let f = expect_fields(path, n, line, 4)?;
        let (r, b) = (parse_f64(path, n, f[1])?, parse_f64(path, n, f[2])?);
        if !(0.0..=1.0).contains(&r) || !(0.0..=1.0).contains(&b) {
            return Err(FormatError::parse(path, n, "scores must lie in [0, 1]"));
        }
        rows.insert(parse_id(path, n, f[0])?, (r, b));
    }
    let mut reliability = Vec::with_capacity(g.node_count());
    let mut benevolence = Vec::with_capacity(g.node_count());
    for id in g.ids() {
        let (r, b) = rows
            .get(id)
            .ok_or_else(|| FormatError::shape(path, format!("no scores for object {id}")))?;
        reliability.push(*r);
        benevolence.push(*b);
    }
    CredibilityScores::from_parts(reliability, benevolence).map_err(|source| FormatError::Core {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_scores(path: &Path, g: &TrustGraph) -> FResult<CredibilityScores> {
    read_scores_str(path, &read_text(path)?, g)
}

pub fn features_tsv(samples: &[TrustSample]) -> String {
    let mut out = format!("# trustor\ttrustee\t{}\tlabel\n", FEATURE_NAMES.join("\t"));
    for s in samples {
        let _ = write!(out, "{}\t{}", s.trustor, s.trustee);
        for v in s.features {
            let _ = write!(out, "\t{v}");
        }
        let _ = writeln!(out, "\t{}", s.label);
    }
    out
}

pub fn read_features_str(path: &Path, text: &str) -> FResult<Vec<TrustSample>> {
    data_lines(text)
        .map(|(n, line)| {
            let f = expect_fields(path, n, line, N_FEATURES + 3)?;
            let mut features = [0.0; N_FEATURES];
            for (k, v) in features.iter_mut().enumerate() {
                *v = parse_f64(path, n, f[2 + k])?;
            }
            let label = f[N_FEATURES + 2]
                .parse::<TrustLabel>()
                .map_err(|_| FormatError::parse(path, n, "unknown label"))?;
            Ok(TrustSample {
                trustor: parse_id(path, n, f[0])?,
                trustee: parse_id(path, n, f[1])?,
                features,
                label,
            })
        })
        .collect()
}

pub fn read_features(path: &Path) -> FResult<Vec<TrustSample>> {
    read_features_str(path, &read_text(path)?)
}

pub const METRICS_HEADER: &str = "dataset,train_frac,f1,mae,mse";

/// One `dataset,train_frac,f1,mae,mse` row, fixed to six decimals so the
/// file is stable across platforms.
pub fn metrics_row(dataset: &str, train_fraction: f64, r: &EvalReport) -> String {
    format!("{dataset},{train_fraction},{:.6},{:.6},{:.6}", r.f1_micro, r.mae, r.mse)
}

pub fn metrics_csv<'a>(rows: impl IntoIterator<Item = (&'a str, f64, &'a EvalReport)>) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for (d, frac, r) in rows {
        out.push_str(&metrics_row(d, frac, r));
        out.push('\n');
    }
    out
}

pub fn loss_csv(trace: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in trace.iter().enumerate() {
        let _ = writeln!(out, "{i},{l}");
    }
    out
}
