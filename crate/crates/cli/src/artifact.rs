//! Checksummed model artifacts and the run manifest.
//!
//! Embedding and model files start with a header line
//! `# trust-siot <kind> key=value ... sha256=<hex>` whose digest covers every
//! byte after the header. Readers verify the digest before parsing and then
//! check every row against the shape declared in the header.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use trust_siot_core::classifier::{MlpModel, N_CLASSES};
use trust_siot_core::features::N_FEATURES;
use trust_siot_core::kge::EmbeddingTable;
use trust_siot_core::{ObjectId, Relation};

use crate::error::FormatError;
use crate::formats::{read_text, write_text};

type FResult<T> = Result<T, FormatError>;

const MAGIC: &str = "# trust-siot";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Git-style object id of a blob: the digest of `blob <len>\0` followed by
/// the content, using SHA-256 as git's sha256 object format does.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Prepends a `# trust-siot <kind>` header carrying `fields` and the body checksum.
pub fn with_header(kind: &str, fields: &[(&str, String)], body: &str) -> String {
    let mut header = format!("{MAGIC} {kind}");
    for (k, v) in fields {
        let _ = write!(header, " {k}={v}");
    }
    format!("{header} sha256={}\n{body}", sha256_hex(body.as_bytes()))
}

/// Splits a checksummed file into its header fields and verified body.
fn open_checked<'a>(path: &Path, text: &'a str, kind: &str) -> FResult<(BTreeMap<&'a str, &'a str>, &'a str)> {
    let (header, body) = text.split_once('\n').unwrap_or((text, ""));
    let rest = header
        .strip_prefix(MAGIC)
        .and_then(|r| r.trim_start().strip_prefix(kind))
        .ok_or_else(|| FormatError::shape(path, format!("missing `{MAGIC} {kind}` header")))?;
    let fields: BTreeMap<&str, &str> = rest.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
    let expected = fields
        .get("sha256")
        .ok_or_else(|| FormatError::shape(path, "header has no sha256 field"))?;
    let actual = sha256_hex(body.as_bytes());
    if *expected != actual {
        return Err(FormatError::Checksum {
            path: path.to_path_buf(),
            expected: expected.to_string(),
            actual,
        });
    }
    Ok((fields, body))
}

fn header_usize(path: &Path, fields: &BTreeMap<&str, &str>, key: &str) -> FResult<usize> {
    fields
        .get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| FormatError::shape(path, format!("header field `{key}` missing or not a count")))
}

fn numbers(path: &Path, line: usize, cells: &[&str]) -> FResult<Vec<f64>> {
    cells
        .iter()
        .map(|c| match c.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(FormatError::parse(path, line, format!("bad number `{c}`"))),
        })
        .collect()
}

pub fn embeddings_tsv(t: &EmbeddingTable) -> String {
    let mut body = String::new();
    for (i, id) in t.entities.iter().enumerate() {
        let _ = write!(body, "{id}");
        for v in t.entity(i) {
            let _ = write!(body, "\t{v}");
        }
        let _ = writeln!(body, "\t{}", t.entity_bias[i]);
    }
    with_header(
        "embeddings",
        &[("dim", t.dim.to_string()), ("entities", t.entities.len().to_string())],
        &body,
    )
}

pub fn relations_tsv(t: &EmbeddingTable) -> String {
    let mut body = String::new();
    for (j, r) in t.relations.iter().enumerate() {
        let _ = write!(body, "{}", r.as_str());
        for a in t.angles(j) {
            let _ = write!(body, "\t{a}");
        }
        let _ = writeln!(body, "\t{}", t.relation_alpha[j]);
    }
    with_header(
        "relations",
        &[("dim", t.dim.to_string()), ("relations", t.relations.len().to_string())],
        &body,
    )
}

/// Rows of a verified body: `(line number, tab-separated cells)`. Line
/// numbers count the header as line 1.
fn rows(body: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    body.lines().enumerate().map(|(i, l)| (i + 2, l.split('\t').collect()))
}

pub fn read_embeddings_str(emb_path: &Path, emb: &str, rel_path: &Path, rel: &str) -> FResult<EmbeddingTable> {
    let (ef, ebody) = open_checked(emb_path, emb, "embeddings")?;
    let (rf, rbody) = open_checked(rel_path, rel, "relations")?;
    let dim = header_usize(emb_path, &ef, "dim")?;
    if header_usize(rel_path, &rf, "dim")? != dim {
        return Err(FormatError::shape(rel_path, "dimension differs from the entity file"));
    }
    let n_entities = header_usize(emb_path, &ef, "entities")?;
    let n_relations = header_usize(rel_path, &rf, "relations")?;

    let mut t = EmbeddingTable {
        dim,
        entities: Vec::with_capacity(n_entities),
        relations: Vec::with_capacity(n_relations),
        entity_vecs: Vec::with_capacity(n_entities * dim),
        entity_bias: Vec::with_capacity(n_entities),
        relation_angles: Vec::with_capacity(n_relations * dim / 2),
        relation_alpha: Vec::with_capacity(n_relations),
    };
    for (n, cells) in rows(ebody) {
        if cells.len() != dim + 2 {
            return Err(FormatError::shape(
                emb_path,
                format!("line {n}: {} fields, expected {}", cells.len(), dim + 2),
            ));
        }
        let id = cells[0]
            .parse::<u64>()
            .map_err(|_| FormatError::parse(emb_path, n, "bad entity id"))?;
        let v = numbers(emb_path, n, &cells[1..])?;
        t.entities.push(ObjectId(id));
        t.entity_vecs.extend_from_slice(&v[..dim]);
        t.entity_bias.push(v[dim]);
    }
    for (n, cells) in rows(rbody) {
        if cells.len() != dim / 2 + 2 {
            return Err(FormatError::shape(
                rel_path,
                format!("line {n}: {} fields, expected {}", cells.len(), dim / 2 + 2),
            ));
        }
        let r = cells[0]
            .parse::<Relation>()
            .map_err(|_| FormatError::parse(rel_path, n, "unknown relation"))?;
        let v = numbers(rel_path, n, &cells[1..])?;
        t.relations.push(r);
        t.relation_angles.extend_from_slice(&v[..dim / 2]);
        t.relation_alpha.push(v[dim / 2]);
    }
    if t.entities.len() != n_entities {
        return Err(FormatError::shape(
            emb_path,
            format!("{} rows, header declares {n_entities}", t.entities.len()),
        ));
    }
    if t.relations.len() != n_relations {
        return Err(FormatError::shape(
            rel_path,
            format!("{} rows, header declares {n_relations}", t.relations.len()),
        ));
    }
    t.validate().map_err(|e| FormatError::shape(emb_path, e.to_string()))?;
    Ok(t)
}

pub fn read_embeddings(emb_path: &Path, rel_path: &Path) -> FResult<EmbeddingTable> {
    read_embeddings_str(emb_path, &read_text(emb_path)?, rel_path, &read_text(rel_path)?)
}

pub fn write_embeddings(emb_path: &Path, rel_path: &Path, t: &EmbeddingTable) -> FResult<()> {
    write_text(emb_path, &embeddings_tsv(t))?;
    write_text(rel_path, &relations_tsv(t))
}

/// Parameter blocks as `name rows cols values...`.
pub fn model_tsv(m: &MlpModel) -> String {
    let h = m.hidden_size;
    let blocks: [(&str, usize, usize, &[f64]); 5] = [
        ("l2_penalty", 1, 1, std::slice::from_ref(&m.l2_penalty)),
        ("hidden_weights", N_FEATURES, h, &m.hidden_weights),
        ("hidden_bias", 1, h, &m.hidden_bias),
        ("output_weights", h, N_CLASSES, &m.output_weights),
        ("output_bias", 1, N_CLASSES, &m.output_bias),
    ];
    let mut body = String::new();
    for (name, r, c, values) in blocks {
        let _ = write!(body, "{name}\t{r}\t{c}");
        for v in values {
            let _ = write!(body, "\t{v}");
        }
        body.push('\n');
    }
    with_header(
        "mlp",
        &[
            ("inputs", N_FEATURES.to_string()),
            ("hidden", h.to_string()),
            ("classes", N_CLASSES.to_string()),
        ],
        &body,
    )
}

pub fn read_model_str(path: &Path, text: &str) -> FResult<MlpModel> {
    let (fields, body) = open_checked(path, text, "mlp")?;
    let h = header_usize(path, &fields, "hidden")?;
    if header_usize(path, &fields, "inputs")? != N_FEATURES || header_usize(path, &fields, "classes")? != N_CLASSES {
        return Err(FormatError::shape(
            path,
            format!("model must map {N_FEATURES} inputs to {N_CLASSES} classes"),
        ));
    }
    let mut m = MlpModel::zeros(h, 0.0);
    let mut seen = Vec::new();
    for (n, cells) in rows(body) {
        if cells.len() < 3 {
            return Err(FormatError::shape(path, format!("line {n}: truncated block")));
        }
        let (name, r, c) = (cells[0], cells[1], cells[2]);
        let want: (usize, usize) = match name {
            "l2_penalty" => (1, 1),
            "hidden_weights" => (N_FEATURES, h),
            "hidden_bias" => (1, h),
            "output_weights" => (h, N_CLASSES),
            "output_bias" => (1, N_CLASSES),
            other => return Err(FormatError::shape(path, format!("line {n}: unknown block `{other}`"))),
        };
        let declared = (r.parse().unwrap_or(usize::MAX), c.parse().unwrap_or(usize::MAX));
        if declared != want || cells.len() != 3 + want.0 * want.1 {
            return Err(FormatError::shape(
                path,
                format!(
                    "block `{name}` is {r}x{c} with {} values, expected {}x{}",
                    cells.len() - 3,
                    want.0,
                    want.1
                ),
            ));
        }
        let v = numbers(path, n, &cells[3..])?;
        match name {
            "l2_penalty" => m.l2_penalty = v[0],
            "hidden_weights" => m.hidden_weights = v,
            "hidden_bias" => m.hidden_bias = v,
            "output_weights" => m.output_weights = v,
            _ => m.output_bias = v,
        }
        seen.push(name);
    }
    for block in [
        "l2_penalty",
        "hidden_weights",
        "hidden_bias",
        "output_weights",
        "output_bias",
    ] {
        if !seen.contains(&block) {
            return Err(FormatError::shape(path, format!("block `{block}` missing")));
        }
    }
    m.validate().map_err(|e| FormatError::shape(path, e.to_string()))?;
    Ok(m)
}

pub fn read_model(path: &Path) -> FResult<MlpModel> {
    read_model_str(path, &read_text(path)?)
}

/// Ordered `key = value` record of a run: resolved configuration, input
/// and artifact hashes, and diagnostics.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    entries: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Records a file's git-style blob hash under `<prefix>.blob`.
    pub fn hash_file(&mut self, prefix: &str, path: &Path) -> FResult<()> {
        let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
        self.set(format!("{prefix}.path"), path.display());
        self.set(format!("{prefix}.blob"), format!("sha256:{}", blob_hash(&bytes)));
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = format!("{MAGIC} run manifest\n");
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
