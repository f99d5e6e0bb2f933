use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::embedding::Label;
use crate::error::{Error, Result};
use crate::neural::seeded;

pub const TEST_FRACTION: f64 = 0.25;
/// Fraction of the post-test remainder held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MachineType {
    Fan,
    Pump,
    Valve,
    Slide,
}

impl fmt::Display for MachineType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MachineType::Fan => "fan",
            MachineType::Pump => "pump",
            MachineType::Valve => "valve",
            MachineType::Slide => "slide",
        })
    }
}

impl FromStr for MachineType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fan" => Ok(Self::Fan),
            "pump" => Ok(Self::Pump),
            "valve" => Ok(Self::Valve),
            "slide" | "slider" => Ok(Self::Slide),
            other => Err(Error::parse(format!("unknown machine type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub clip_id: String,
    pub path: PathBuf,
    pub machine_type: MachineType,
    pub machine_id: String,
    /// Normal or anomalous; never unlabeled.
    pub label: Label,
}

/// Dataset listing, read from `clip_id,path,machine_type,machine_id,label`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn new(records: Vec<ManifestRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.clip_id.as_str()) {
                return Err(Error::parse(format!("duplicate clip_id `{}`", r.clip_id)));
            }
            if r.label == Label::Unlabeled {
                return Err(Error::parse(format!("clip `{}` has no label", r.clip_id)));
            }
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, clip_id: &str) -> Option<&ManifestRecord> {
        self.records.iter().find(|r| r.clip_id == clip_id)
    }

    pub fn labels(&self) -> BTreeMap<&str, Label> {
        self.records
            .iter()
            .map(|r| (r.clip_id.as_str(), r.label))
            .collect()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != ["clip_id", "path", "machine_type", "machine_id", "label"] {
            return Err(Error::parse(
                "manifest header must be clip_id,path,machine_type,machine_id,label",
            ));
        }
        let mut records = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            records.push(ManifestRecord {
                clip_id: rec[0].to_string(),
                path: PathBuf::from(&rec[1]),
                machine_type: rec[2].parse()?,
                machine_id: rec[3].to_string(),
                label: rec[4].parse()?,
            });
        }
        Self::new(records)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["clip_id", "path", "machine_type", "machine_id", "label"])?;
        for r in &self.records {
            let label = match r.label {
                Label::Anomalous => "anomalous",
                _ => "normal",
            };
            w.write_record([
                r.clip_id.as_str(),
                &r.path.to_string_lossy(),
                &r.machine_type.to_string(),
                &r.machine_id,
                label,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    Supervised,
    /// Anomalous clips are dropped from train and validation.
    Unsupervised,
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "supervised" => Ok(Self::Supervised),
            "unsupervised" => Ok(Self::Unsupervised),
            other => Err(Error::Config(format!("unknown split mode `{other}`"))),
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Supervised => "supervised",
            Self::Unsupervised => "unsupervised",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Partition {
    Train,
    Validation,
    Test,
    Discarded,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Train => "train",
            Partition::Validation => "validation",
            Partition::Test => "test",
            Partition::Discarded => "discarded",
        })
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "validation" | "val" => Ok(Self::Validation),
            "test" => Ok(Self::Test),
            "discarded" => Ok(Self::Discarded),
            other => Err(Error::parse(format!("unknown partition `{other}`"))),
        }
    }
}

/// Disjoint id lists whose union is the manifest. Anomalous clips removed
/// from train/validation in unsupervised mode land in `discarded`.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub discarded: Vec<String>,
    pub mode: SplitMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub seed: u64,
    pub mode: SplitMode,
    /// Split each (label, machine_id) group separately.
    pub stratified: bool,
}

fn round_count(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction).round() as usize
}

/// 25% test, then 10% of the remainder for validation, the rest train.
pub fn split(manifest: &Manifest, cfg: &SplitConfig) -> Result<Split> {
    if manifest.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 clips to split, got {}",
            manifest.len()
        )));
    }
    let mut strata: BTreeMap<(bool, &str), Vec<&ManifestRecord>> = BTreeMap::new();
    for r in &manifest.records {
        let key = if cfg.stratified {
            (r.label.is_anomalous(), r.machine_id.as_str())
        } else {
            (false, "")
        };
        strata.entry(key).or_default().push(r);
    }

    let mut rng = seeded(cfg.seed);
    let mut out = Split {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        discarded: Vec::new(),
        mode: cfg.mode,
    };
    for (_, mut members) in strata {
        members.shuffle(&mut rng);
        let n_test = round_count(members.len(), TEST_FRACTION);
        let n_val = round_count(members.len() - n_test, VALIDATION_FRACTION);
        for (i, r) in members.into_iter().enumerate() {
            let id = r.clip_id.clone();
            if i < n_test {
                out.test.push(id);
            } else if cfg.mode == SplitMode::Unsupervised && r.label.is_anomalous() {
                out.discarded.push(id);
            } else if i < n_test + n_val {
                out.validation.push(id);
            } else {
                out.train.push(id);
            }
        }
    }
    Ok(out)
}

impl Split {
    pub fn partition_of(&self, clip_id: &str) -> Option<Partition> {
        [
            (&self.train, Partition::Train),
            (&self.validation, Partition::Validation),
            (&self.test, Partition::Test),
            (&self.discarded, Partition::Discarded),
        ]
        .into_iter()
        .find(|(ids, _)| ids.iter().any(|i| i == clip_id))
        .map(|(_, p)| p)
    }

    pub fn ids(&self, partition: Partition) -> &[String] {
        match partition {
            Partition::Train => &self.train,
            Partition::Validation => &self.validation,
            Partition::Test => &self.test,
            Partition::Discarded => &self.discarded,
        }
    }

    /// `clip_id,partition` rows, partitions in train/validation/test/discarded
    /// order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["clip_id", "partition"])?;
        for p in [Partition::Train, Partition::Validation, Partition::Test, Partition::Discarded] {
            for id in self.ids(p) {
                w.write_record([id.as_str(), &p.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, mode: SplitMode) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut out = Split {
            train: Vec::new(),
            validation: Vec::new(),
            test: Vec::new(),
            discarded: Vec::new(),
            mode,
        };
        for rec in r.records() {
            let rec = rec?;
            let id = rec[0].to_string();
            match rec
                .get(1)
                .ok_or_else(|| Error::parse("split row needs a partition"))?
                .parse()?
            {
                Partition::Train => out.train.push(id),
                Partition::Validation => out.validation.push(id),
                Partition::Test => out.test.push(id),
                Partition::Discarded => out.discarded.push(id),
            }
        }
        Ok(out)
    }
}
