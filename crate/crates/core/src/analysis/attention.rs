//! Mean attention distance of transformer heads over a patch grid.

use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, Array4, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::formats::{format_kv, kv_get, parse_kv, BinReader, BinWriter, Metadata};
use crate::plot::{SvgPlot, PALETTE};

const ROW_SUM_TOLERANCE: f64 = 1e-6;
const MIN_PATCH_MASS: f64 = 1e-12;
const MAGIC: &[u8; 4] = b"ATTN";
const VERSION: u8 = 1;

/// Special tokens of an audio spectrogram transformer (class + distillation).
pub const AST_SPECIAL_TOKENS: usize = 2;

/// One layer's attention maps, `[heads × tokens × tokens]`. Each row is the
/// distribution of one query over all keys; the first `n_special` tokens
/// are not patches.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTensor {
    pub weights: Array3<f64>,
    pub grid: (usize, usize),
    /// Distance between adjacent patch centers, (vertical, horizontal).
    pub patch_pitch: (f64, f64),
    pub n_special: usize,
}

impl AttentionTensor {
    pub fn new(weights: Array3<f64>, grid: (usize, usize), patch_pitch: (f64, f64), n_special: usize) -> Result<Self> {
        let t = Self {
            weights,
            grid,
            patch_pitch,
            n_special,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn n_heads(&self) -> usize {
        self.weights.len_of(Axis(0))
    }

    pub fn n_patches(&self) -> usize {
        self.grid.0 * self.grid.1
    }

    pub fn validate(&self) -> Result<()> {
        let (_, rows, cols) = self.weights.dim();
        let tokens = self.n_special + self.n_patches();
        if rows != cols || rows != tokens {
            return Err(Error::Shape(format!(
                "attention is {rows}x{cols} tokens but grid {}x{} plus {} special tokens needs {tokens}",
                self.grid.0, self.grid.1, self.n_special
            )));
        }
        if self.n_patches() == 0 {
            return Err(Error::Shape("patch grid is empty".into()));
        }
        if !(self.patch_pitch.0 >= 0.0 && self.patch_pitch.1 >= 0.0) || !self.patch_pitch.0.is_finite() || !self.patch_pitch.1.is_finite() {
            return Err(Error::Config(format!("invalid patch pitch {:?}", self.patch_pitch)));
        }
        for (h, head) in self.weights.outer_iter().enumerate() {
            for (q, row) in head.outer_iter().enumerate() {
                if row.iter().any(|&w| !w.is_finite() || w < 0.0) {
                    return Err(Error::Normalization(format!(
                        "head {h} query {q} has a negative or non-finite weight"
                    )));
                }
                let sum = row.sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::Normalization(format!("head {h} query {q} sums to {sum}")));
                }
            }
        }
        Ok(())
    }

    /// Euclidean distance between every pair of patch centers.
    pub fn center_distances(&self) -> Array2<f64> {
        let (_, cols) = self.grid;
        let (pv, ph) = self.patch_pitch;
        let center = |i: usize| ((i / cols) as f64 * pv, (i % cols) as f64 * ph);
        let n = self.n_patches();
        Array2::from_shape_fn((n, n), |(a, b)| {
            let (ya, xa) = center(a);
            let (yb, xb) = center(b);
            (ya - yb).hypot(xa - xb)
        })
    }
}

fn head_distance(head: ArrayView2<f64>, n_special: usize, dist: &Array2<f64>) -> Result<f64> {
    let mut total = 0.0;
    let mut queries = 0usize;
    for (q, row) in head.outer_iter().skip(n_special).enumerate() {
        let patch_row = row.slice(ndarray::s![n_special..]);
        let mass = patch_row.sum();
        // queries that attend only to special tokens have no patch distance
        if mass < MIN_PATCH_MASS {
            continue;
        }
        let weighted: f64 = patch_row.iter().zip(dist.row(q)).map(|(w, d)| w * d).sum();
        total += weighted / mass;
        queries += 1;
    }
    if queries == 0 {
        return Err(Error::Normalization("no query puts weight on patch tokens".into()));
    }
    Ok(total / queries as f64)
}

/// Per-head mean over patch queries of the attention-weighted distance to
/// the attended patches, after dropping special tokens and renormalizing.
pub fn mean_attention_distance(attn: &AttentionTensor) -> Result<Vec<f64>> {
    attn.validate()?;
    let dist = attn.center_distances();
    attn.weights
        .outer_iter()
        .map(|head| head_distance(head, attn.n_special, &dist))
        .collect()
}

/// A stack of layers as stored on disk, with display labels.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionStack {
    pub layers: Vec<AttentionTensor>,
    pub layer_labels: Vec<String>,
    pub head_labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadDistance {
    pub layer: String,
    pub head: String,
    pub layer_index: usize,
    pub mean_distance_px: f64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn split_labels(raw: Option<&String>, n: usize) -> Result<Vec<String>> {
    match raw {
        None => Ok((0..n).map(|i| i.to_string()).collect()),
        Some(s) => {
            let labels: Vec<String> = s.split(',').map(|l| l.trim().to_string()).collect();
            if labels.len() != n {
                return Err(Error::Shape(format!("{} labels for {n} entries", labels.len())));
            }
            Ok(labels)
        }
    }
}

impl AttentionStack {
    pub fn distances(&self) -> Result<Vec<HeadDistance>> {
        let mut out = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            for (hi, d) in mean_attention_distance(layer)?.into_iter().enumerate() {
                out.push(HeadDistance {
                    layer: self.layer_labels[li].clone(),
                    head: self.head_labels[hi].clone(),
                    layer_index: li,
                    mean_distance_px: d,
                });
            }
        }
        Ok(out)
    }

    /// Binary body: magic, version, rank (3 or 4), dims as u32, then
    /// row-major f32 weights.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let first = self.layers.first().ok_or_else(|| Error::Empty("no attention layers".into()))?;
        let (h, t, _) = first.weights.dim();
        let mut w = BinWriter::new();
        w.bytes(MAGIC).u8(VERSION).u8(4);
        for d in [self.layers.len(), h, t, t] {
            w.u32(d as u32);
        }
        for layer in &self.layers {
            if layer.weights.dim() != (h, t, t) {
                return Err(Error::Shape("layers differ in shape".into()));
            }
            for &v in layer.weights.iter() {
                w.f32(v as f32);
            }
        }
        Ok(w.finish())
    }

    pub fn metadata(&self) -> Metadata {
        let first = &self.layers[0];
        let mut m = Metadata::new();
        m.insert("grid_rows".into(), first.grid.0.to_string());
        m.insert("grid_cols".into(), first.grid.1.to_string());
        m.insert("pitch_vertical".into(), first.patch_pitch.0.to_string());
        m.insert("pitch_horizontal".into(), first.patch_pitch.1.to_string());
        m.insert("n_special".into(), first.n_special.to_string());
        m.insert("layers".into(), self.layer_labels.join(","));
        m.insert("heads".into(), self.head_labels.join(","));
        m
    }

    /// Decodes the binary body using layout from a parsed sidecar. Weights
    /// are widened from f32, so rows are validated at the 1e-6 tolerance.
    pub fn from_parts(bytes: &[u8], meta: &Metadata) -> Result<Self> {
        let mut r = BinReader::new(bytes);
        r.expect_magic(MAGIC)?;
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::parse(format!("unsupported attention version {version}")));
        }
        let rank = r.u8()? as usize;
        if !(rank == 3 || rank == 4) {
            return Err(Error::parse(format!("attention rank must be 3 or 4, got {rank}")));
        }
        let dims: Vec<usize> = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_>>()?;
        let (l, h, t, t2) = if rank == 4 {
            (dims[0], dims[1], dims[2], dims[3])
        } else {
            (1, dims[0], dims[1], dims[2])
        };
        let data: Vec<f64> = r.f32_vec(l * h * t * t2)?.into_iter().map(f64::from).collect();
        r.finish()?;
        let all = Array4::from_shape_vec((l, h, t, t2), data).map_err(|e| Error::parse(e.to_string()))?;

        let grid = (kv_get(meta, "grid_rows")?, kv_get(meta, "grid_cols")?);
        let pitch = (kv_get(meta, "pitch_vertical")?, kv_get(meta, "pitch_horizontal")?);
        let n_special = match meta.get("n_special") {
            Some(_) => kv_get(meta, "n_special")?,
            None => AST_SPECIAL_TOKENS,
        };
        let layers = all
            .outer_iter()
            .map(|w| AttentionTensor::new(w.to_owned(), grid, pitch, n_special))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layers,
            layer_labels: split_labels(meta.get("layers"), l)?,
            head_labels: split_labels(meta.get("heads"), h)?,
        })
    }

    /// Reads `path` and its `<path>.meta` sidecar.
    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        let meta = parse_kv(&std::fs::read_to_string(sidecar_path(path))?)?;
        Self::from_parts(&bytes, &meta)
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?)?;
        std::fs::write(sidecar_path(path), format_kv(&self.metadata()))?;
        Ok(())
    }
}

pub fn write_distances_csv<W: Write>(rows: &[HeadDistance], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["layer", "head", "mean_distance_px"])?;
    for r in rows {
        w.write_record([r.layer.clone(), r.head.clone(), format!("{}", r.mean_distance_px)])?;
    }
    w.flush()?;
    Ok(())
}

/// Distance against layer depth, one point per head.
pub fn distances_svg(rows: &[HeadDistance]) -> String {
    let mut plot = SvgPlot::new("Mean attention distance", "layer", "distance (px)");
    for r in rows {
        plot.point(r.layer_index as f64, r.mean_distance_px, PALETTE[0]);
    }
    plot.render()
}
