//! Dataset manifests: `ratings=…`, `triples=…`, `format=…` and an optional
//! `name=…`, one per line. Relative paths are resolved against the
//! manifest's directory.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use log::info;
use trust_siot_core::RelationTriple;

use crate::formats::{self, read_text, LoadDiagnostics, RatingsFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatingFormat {
    /// Certification levels (Observer, Apprentice, Journeyer, Master).
    Advogato,
    /// Signed numeric ratings, rescaled to [0, 1].
    Btc,
    /// Numeric ratings already in [0, 1].
    Unit,
}

impl FromStr for RatingFormat {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "advogato" => Ok(Self::Advogato),
            "btc" => Ok(Self::Btc),
            "unit" => Ok(Self::Unit),
            other => bail!("unknown rating format `{other}` (expected advogato, btc or unit)"),
        }
    }
}

impl RatingFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Advogato => "advogato",
            Self::Btc => "btc",
            Self::Unit => "unit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub ratings: PathBuf,
    pub triples: Option<PathBuf>,
    pub format: RatingFormat,
}

impl DatasetManifest {
    /// Parses manifest text. `fallback_name` is used when there is no
    /// `name=` line.
    pub fn parse(text: &str, base: &Path, fallback_name: &str) -> Result<Self> {
        let (mut name, mut ratings, mut triples, mut format) = (None, None, None, None);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key=value`", i + 1))?;
            let v = v.trim();
            let path = || {
                if Path::new(v).is_relative() {
                    base.join(v)
                } else {
                    PathBuf::from(v)
                }
            };
            match k.trim() {
                "name" => name = Some(v.to_string()),
                "ratings" => ratings = Some(path()),
                "triples" => triples = Some(path()),
                "format" => format = Some(v.parse()?),
                other => bail!("line {}: unknown manifest key `{other}`", i + 1),
            }
        }
        Ok(Self {
            name: name.unwrap_or_else(|| fallback_name.to_string()),
            ratings: ratings.ok_or_else(|| anyhow!("manifest has no `ratings=` line"))?,
            triples,
            format: format.ok_or_else(|| anyhow!("manifest has no `format=` line"))?,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")), stem)
            .with_context(|| format!("dataset manifest {}", path.display()))
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "name={}\nformat={}\nratings={}\n",
            self.name,
            self.format.as_str(),
            self.ratings.display()
        );
        if let Some(t) = &self.triples {
            out.push_str(&format!("triples={}\n", t.display()));
        }
        out
    }
}

/// Ratings and relation triples read from a manifest.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub manifest: DatasetManifest,
    pub ratings: RatingsFile,
    pub triples: Vec<RelationTriple>,
    pub triple_diagnostics: LoadDiagnostics,
}

pub fn load(manifest: &DatasetManifest) -> Result<LoadedDataset> {
    let ratings = match manifest.format {
        RatingFormat::Advogato => formats::load_advogato(&manifest.ratings)?,
        RatingFormat::Btc => formats::load_btc(&manifest.ratings)?,
        RatingFormat::Unit => formats::load_unit_ratings(&manifest.ratings)?,
    };
    let (triples, triple_diagnostics) = match &manifest.triples {
        Some(p) => formats::load_triples(p)?,
        None => (Vec::new(), LoadDiagnostics::default()),
    };
    info!(
        "loaded {} ratings ({} bad lines) and {} triples ({} bad lines)",
        ratings.ratings.len(),
        ratings.diagnostics.bad_lines,
        triples.len(),
        triple_diagnostics.bad_lines
    );
    Ok(LoadedDataset {
        manifest: manifest.clone(),
        ratings,
        triples,
        triple_diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves_paths() {
        let m = DatasetManifest::parse(
            "# demo\nratings=r.tsv\ntriples = /data/t.tsv\nformat=btc\n",
            Path::new("/d"),
            "demo",
        )
        .unwrap();
        assert_eq!(m.ratings, PathBuf::from("/d/r.tsv"));
        assert_eq!(m.triples, Some(PathBuf::from("/data/t.tsv")));
        assert_eq!(m.format, RatingFormat::Btc);
        assert_eq!(m.name, "demo");
        let again = DatasetManifest::parse(&m.render(), Path::new("/elsewhere"), "x").unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_incomplete_manifests() {
        assert!(DatasetManifest::parse("ratings=r\n", Path::new("."), "x").is_err());
        assert!(DatasetManifest::parse("ratings=r\nformat=csv\n", Path::new("."), "x").is_err());
        assert!(DatasetManifest::parse("ratings=r\nformat=btc\ncolour=blue\n", Path::new("."), "x").is_err());
    }
}
