use std::io::Write;

use crate::error::{Error, Result};

/// ROC curve (anomalous = positive, higher score = more anomalous) and its
/// trapezoidal area.
#[derive(Debug, Clone, PartialEq)]
pub struct RocResult {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<(f64, f64)>,
    /// Score threshold at which each point (after the origin) is reached.
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

/// Sweeps every distinct score as a threshold. Tied scores move both
/// rates in a single step, which gives ties half credit.
pub fn roc_auc(scores: &[f64], is_anomalous: &[bool]) -> Result<RocResult> {
    if scores.len() != is_anomalous.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            is_anomalous.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    let n_pos = is_anomalous.iter().filter(|&&a| a).count();
    let n_neg = is_anomalous.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc(format!(
            "need both classes, got {n_pos} anomalous and {n_neg} normal"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc2 = 0.0; // twice the area, in count units
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == threshold {
            if is_anomalous[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        auc2 += ((fp - fp0) * (tp + tp0)) as f64;
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        thresholds.push(threshold);
    }
    let auc = auc2 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(RocResult {
        points,
        thresholds,
        auc,
    })
}

impl RocResult {
    /// `fpr,tpr` rows followed by an `auc,<value>` summary line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "fpr,tpr")?;
        for (fpr, tpr) in &self.points {
            writeln!(w, "{fpr},{tpr}")?;
        }
        writeln!(w, "auc,{}", self.auc)?;
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("fpr,tpr") {
            return Err(Error::parse("ROC file must start with `fpr,tpr`"));
        }
        let mut points = Vec::new();
        let mut auc = None;
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(format!("bad ROC line `{line}`")))?;
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(format!("bad number `{s}`")))
            };
            if a == "auc" {
                auc = Some(num(b)?);
            } else {
                points.push((num(a)?, num(b)?));
            }
        }
        Ok(Self {
            points,
            thresholds: Vec::new(),
            auc: auc.ok_or_else(|| Error::parse("missing auc line"))?,
        })
    }

    pub fn to_svg(&self, title: &str) -> String {
        let mut plot = crate::plot::SvgPlot::new(title, "false positive rate", "true positive rate")
            .with_bounds(0.0, 1.0, 0.0, 1.0);
        plot.line(&[(0.0, 0.0), (1.0, 1.0)], "#bbbbbb");
        plot.line(&self.points, "#1f77b4");
        plot.label(0.55, 0.1, &format!("AUC = {:.4}", self.auc));
        plot.render()
    }
}
