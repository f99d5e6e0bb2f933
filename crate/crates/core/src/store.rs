//! Content-addressed artifact store and append-only run ledger.
//!
//! Layout under the root:
//! `<kind>/<first two digest chars>/<digest>` holds the payload, a sibling
//! `<digest>.meta` holds `key=value` metadata, and `ledger.csv` holds one
//! row per recorded run.

use std::fmt;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::formats::{format_kv, parse_kv, Metadata};

const LEDGER: &str = "ledger.csv";
const LEDGER_HEADER: [&str; 8] = ["run_id", "stage", "started_ms", "finished_ms", "seed", "config", "inputs", "outputs"];

/// Lower-case hex SHA-256 of `bytes`.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    Ok(digest(&fs::read(path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArtifactKind {
    Spectrogram,
    Model,
    Embeddings,
    Scores,
    Roc,
    Split,
    Plot,
    Table,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 8] = [
        ArtifactKind::Spectrogram,
        ArtifactKind::Model,
        ArtifactKind::Embeddings,
        ArtifactKind::Scores,
        ArtifactKind::Roc,
        ArtifactKind::Split,
        ArtifactKind::Plot,
        ArtifactKind::Table,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Spectrogram => "spectrogram",
            ArtifactKind::Model => "model",
            ArtifactKind::Embeddings => "embeddings",
            ArtifactKind::Scores => "scores",
            ArtifactKind::Roc => "roc",
            ArtifactKind::Split => "split",
            ArtifactKind::Plot => "plot",
            ArtifactKind::Table => "table",
        }
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArtifactKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// `<kind>/<digest>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArtifactId {
    pub kind: ArtifactKind,
    pub digest: String,
}

impl fmt::Display for ArtifactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.kind, self.digest)
    }
}

impl FromStr for ArtifactId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, digest) = s
            .split_once('/')
            .ok_or_else(|| Error::parse(format!("artifact id `{s}` is not <kind>/<digest>")))?;
        if digest.len() != 64 || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::parse(format!("bad digest in artifact id `{s}`")));
        }
        Ok(Self {
            kind: kind.parse()?,
            digest: digest.to_ascii_lowercase(),
        })
    }
}

/// A file consumed or produced by a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileRef {
    pub path: String,
    pub digest: String,
}

impl FileRef {
    pub fn of(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Ok(Self {
            path: path.display().to_string(),
            digest: file_digest(path)?,
        })
    }
}

fn join_refs(refs: &[FileRef]) -> String {
    refs.iter().map(|r| format!("{}#{}", r.path, r.digest)).collect::<Vec<_>>().join("|")
}

fn split_refs(raw: &str) -> Result<Vec<FileRef>> {
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split('|')
        .map(|item| {
            let (path, digest) = item
                .rsplit_once('#')
                .ok_or_else(|| Error::parse(format!("ledger file entry `{item}` lacks a digest")))?;
            Ok(FileRef {
                path: path.to_string(),
                digest: digest.to_string(),
            })
        })
        .collect()
}

/// One ledger row. `config` is the full resolved parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: String,
    pub stage: String,
    pub started_ms: u128,
    pub finished_ms: u128,
    pub seed: Option<u64>,
    pub config: Metadata,
    pub inputs: Vec<FileRef>,
    pub outputs: Vec<FileRef>,
}

pub fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

impl RunRecord {
    /// A record with empty id; [`Store::record_run`] assigns one.
    pub fn new(stage: impl Into<String>, config: Metadata, seed: Option<u64>) -> Self {
        let now = now_ms();
        Self {
            run_id: String::new(),
            stage: stage.into(),
            started_ms: now,
            finished_ms: now,
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Checks every referenced file still has its recorded digest.
    pub fn verify(&self) -> Result<()> {
        for r in self.inputs.iter().chain(&self.outputs) {
            if file_digest(&r.path)? != r.digest {
                return Err(Error::Corruption { id: r.path.clone() });
            }
        }
        Ok(())
    }

    fn to_row(&self) -> Vec<String> {
        let config = self
            .config
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        vec![
            self.run_id.clone(),
            self.stage.clone(),
            self.started_ms.to_string(),
            self.finished_ms.to_string(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            config,
            join_refs(&self.inputs),
            join_refs(&self.outputs),
        ]
    }

    fn from_row(row: &csv::StringRecord) -> Result<Self> {
        if row.len() != LEDGER_HEADER.len() {
            return Err(Error::parse(format!("ledger row has {} fields", row.len())));
        }
        let num = |i: usize| -> Result<u128> { row[i].parse().map_err(|_| Error::parse(format!("bad number `{}`", &row[i]))) };
        let seed = match &row[4] {
            "" => None,
            s => Some(s.parse().map_err(|_| Error::parse(format!("bad seed `{s}`")))?),
        };
        let mut config = Metadata::new();
        for pair in row[5].split(';').filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::parse(format!("bad config entry `{pair}`")))?;
            config.insert(k.to_string(), v.to_string());
        }
        Ok(Self {
            run_id: row[0].to_string(),
            stage: row[1].to_string(),
            started_ms: num(2)?,
            finished_ms: num(3)?,
            seed,
            config,
            inputs: split_refs(&row[6])?,
            outputs: split_refs(&row[7])?,
        })
    }
}

/// Single writer per root; readers may run concurrently.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, id: &ArtifactId) -> PathBuf {
        self.root.join(id.kind.as_str()).join(&id.digest[..2]).join(&id.digest)
    }

    fn meta_path(&self, id: &ArtifactId) -> PathBuf {
        self.path_of(id).with_extension("meta")
    }

    /// Stores `payload` under its digest. Storing identical bytes again is a
    /// no-op apart from refreshing the metadata.
    pub fn put_artifact(&self, kind: ArtifactKind, payload: &[u8], metadata: &Metadata) -> Result<ArtifactId> {
        let id = ArtifactId {
            kind,
            digest: digest(payload),
        };
        let path = self.path_of(&id);
        fs::create_dir_all(path.parent().expect("artifact path has a parent"))?;
        if !path.exists() {
            let tmp = path.with_extension("partial");
            fs::write(&tmp, payload)?;
            fs::rename(&tmp, &path)?;
        }
        fs::write(self.meta_path(&id), format_kv(metadata))?;
        Ok(id)
    }

    pub fn get_artifact(&self, id: &ArtifactId) -> Result<(Vec<u8>, Metadata)> {
        let payload = fs::read(self.path_of(id))?;
        if digest(&payload) != id.digest {
            return Err(Error::Corruption { id: id.to_string() });
        }
        let meta = match fs::read_to_string(self.meta_path(id)) {
            Ok(text) => parse_kv(&text)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Metadata::new(),
            Err(e) => return Err(e.into()),
        };
        Ok((payload, meta))
    }

    pub fn ledger_path(&self) -> PathBuf {
        self.root.join(LEDGER)
    }

    /// Appends `record`, assigning a sequential run id when it has none.
    pub fn record_run(&self, mut record: RunRecord) -> Result<RunRecord> {
        let existing = self.list_runs()?.len();
        if record.run_id.is_empty() {
            record.run_id = format!("{:05}-{}", existing + 1, record.stage);
        }
        let path = self.ledger_path();
        let fresh = !path.exists();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut w = csv::Writer::from_writer(file);
        if fresh {
            w.write_record(LEDGER_HEADER)?;
        }
        w.write_record(record.to_row())?;
        w.flush()?;
        Ok(record)
    }

    /// Runs in insertion order.
    pub fn list_runs(&self) -> Result<Vec<RunRecord>> {
        let path = self.ledger_path();
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut r = csv::Reader::from_path(&path)?;
        if r.headers()?.iter().ne(LEDGER_HEADER) {
            return Err(Error::parse("ledger header does not match"));
        }
        r.records().map(|row| RunRecord::from_row(&row?)).collect()
    }
}
