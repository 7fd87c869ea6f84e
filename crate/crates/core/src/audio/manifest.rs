use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audio::clip::Label;
use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 4] = ["utterance_id", "path", "label", "split"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub utterance_id: String,
    /// Resolved path (relative entries are joined onto the manifest directory).
    pub path: PathBuf,
    pub label: Label,
    pub split: Split,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn count(&self, label: Label, split: Split) -> usize {
        self.entries
            .iter()
            .filter(|e| e.label == label && e.split == split)
            .count()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Writes the manifest with paths made relative to `path`'s directory when possible.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        let mut out = String::new();
        out.push_str(&MANIFEST_HEADER.join(","));
        out.push('\n');
        for e in &self.entries {
            let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.utterance_id,
                rel.display(),
                e.label,
                e.split
            ));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_manifest(&text, base)
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Manifest> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let bad = |line: usize, message: String| Error::Manifest { line, message };

    let header = records
        .next()
        .ok_or_else(|| bad(1, "empty manifest".into()))?
        .map_err(|e| bad(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(bad(
            1,
            format!("header must be `{}`", MANIFEST_HEADER.join(",")),
        ));
    }

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for record in records {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            bad(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 4 {
            return Err(bad(line, format!("expected 4 fields, found {}", record.len())));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(bad(line, "empty utterance_id".into()));
        }
        let label: Label = record[2]
            .parse()
            .map_err(|_| bad(line, format!("unknown label `{}`", &record[2])))?;
        let split: Split = record[3]
            .parse()
            .map_err(|_| bad(line, format!("unknown split `{}`", &record[3])))?;
        if !seen.insert(id.clone()) {
            return Err(bad(line, format!("duplicate utterance_id `{id}`")));
        }
        let raw = Path::new(&record[1]);
        let path = if raw.is_absolute() {
            raw.to_path_buf()
        } else {
            base.join(raw)
        };
        if !path.is_file() {
            return Err(bad(line, format!("file not found: {}", path.display())));
        }
        entries.push(ManifestEntry {
            utterance_id: id,
            path,
            label,
            split,
        });
    }
    let manifest = Manifest { entries };
    for label in Label::ALL {
        if manifest.count(label, Split::Train) == 0 {
            return Err(bad(0, format!("train split has no `{label}` utterances")));
        }
    }
    Ok(manifest)
}
