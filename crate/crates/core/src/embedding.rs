//! Clip embeddings and their CSV interchange format.
//!
//! ```text
//! clip_id,label,e0,e1,...,e{D-1}
//! fan_00_0001,normal,0.12,-3.4,...
//! ```
//!
//! Labels are `normal`, `anomaly` or `unlabeled`. This is how embeddings
//! produced by external backbones enter the pipeline.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    Anomalous,
    Unlabeled,
}

impl Label {
    /// 1.0 for anomalous, 0.0 for normal; `None` when unlabeled.
    pub fn target(self) -> Option<f64> {
        match self {
            Label::Normal => Some(0.0),
            Label::Anomalous => Some(1.0),
            Label::Unlabeled => None,
        }
    }

    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Normal => "normal",
            Label::Anomalous => "anomaly",
            Label::Unlabeled => "unlabeled",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "0" => Ok(Label::Normal),
            "anomaly" | "anomalous" | "abnormal" | "1" => Ok(Label::Anomalous),
            "unlabeled" | "" => Ok(Label::Unlabeled),
            other => Err(Error::parse(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    /// `[N × D]`.
    pub vectors: Array2<f64>,
    pub clip_ids: Vec<String>,
    pub labels: Vec<Label>,
    pub source_tag: String,
}

impl EmbeddingSet {
    pub fn new(
        vectors: Array2<f64>,
        clip_ids: Vec<String>,
        labels: Vec<Label>,
        source_tag: impl Into<String>,
    ) -> Result<Self> {
        let set = Self {
            vectors,
            clip_ids,
            labels,
            source_tag: source_tag.into(),
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vectors.nrows();
        if self.clip_ids.len() != n || self.labels.len() != n {
            return Err(Error::Shape(format!(
                "{n} vectors, {} ids, {} labels",
                self.clip_ids.len(),
                self.labels.len()
            )));
        }
        if let Some(i) = self
            .vectors
            .rows()
            .into_iter()
            .position(|r| r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite(format!("embedding `{}`", self.clip_ids[i])));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Rows whose index satisfies `keep`, in order.
    pub fn filter(&self, mut keep: impl FnMut(usize, &str, Label) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| keep(i, &self.clip_ids[i], self.labels[i]))
            .collect();
        Self {
            vectors: self.vectors.select(ndarray::Axis(0), &idx),
            clip_ids: idx.iter().map(|&i| self.clip_ids[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            source_tag: self.source_tag.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["clip_id".to_string(), "label".to_string()];
        header.extend((0..self.dim()).map(|j| format!("e{j}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.clip_ids[i].clone(), self.labels[i].to_string()];
            rec.extend(self.vectors.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, source_tag: impl Into<String>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 3 || &header[0] != "clip_id" || &header[1] != "label" {
            return Err(Error::parse("embedding header must start with clip_id,label,e0"));
        }
        let dim = header.len() - 2;
        for (j, name) in header.iter().skip(2).enumerate() {
            if name != format!("e{j}") {
                return Err(Error::parse(format!("expected column e{j}, found `{name}`")));
            }
        }
        let mut values = Vec::new();
        let mut clip_ids = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != dim + 2 {
                return Err(Error::parse(format!(
                    "row {} has {} fields, expected {}",
                    line + 2,
                    rec.len(),
                    dim + 2
                )));
            }
            clip_ids.push(rec[0].to_string());
            labels.push(rec[1].parse()?);
            for field in rec.iter().skip(2) {
                values.push(field.trim().parse::<f64>().map_err(|_| {
                    Error::parse(format!("row {}: bad number `{field}`", line + 2))
                })?);
            }
        }
        let vectors = Array2::from_shape_vec((clip_ids.len(), dim), values)
            .map_err(|e| Error::parse(e.to_string()))?;
        Self::new(vectors, clip_ids, labels, source_tag)
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let tag = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::read_csv(std::fs::File::open(path)?, tag)
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}
