//! Exact t-SNE: O(N²) affinities and gradients, no tree approximations.

use ndarray::Array2;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::neural::seeded;
use crate::plot::{SvgPlot, PALETTE};

const ENTROPY_TOLERANCE: f64 = 1e-5;
const MAX_BISECTION_STEPS: usize = 200;
const MIN_GAIN: f64 = 0.01;
const INIT_STD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n_points: usize) -> Result<()> {
        if n_points < 4 {
            return Err(Error::InsufficientData(format!("t-SNE needs at least 4 points, got {n_points}")));
        }
        if !(self.perplexity > 1.0 && self.perplexity < n_points as f64) {
            return Err(Error::Config(format!(
                "perplexity {} must lie in (1, {n_points})",
                self.perplexity
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Config("t-SNE needs at least one iteration".into()));
        }
        if !(self.learning_rate > 0.0 && self.early_exaggeration >= 1.0) {
            return Err(Error::Config("learning rate must be positive and exaggeration >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of the bandwidth search for one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthFit {
    /// Gaussian precision `1 / (2σ²)`.
    pub beta: f64,
    /// `|H(P_i) − ln(perplexity)|` in nats.
    pub entropy_error: f64,
    pub steps: usize,
}

impl BandwidthFit {
    pub fn converged(&self) -> bool {
        self.entropy_error < ENTROPY_TOLERANCE
    }
}

#[derive(Debug, Clone)]
pub struct TsneResult {
    pub embedding: Array2<f64>,
    /// KL(P‖Q) after each iteration, always against the unexaggerated P.
    pub kl_trace: Vec<f64>,
    pub bandwidths: Vec<BandwidthFit>,
}

impl TsneResult {
    /// KL at the last exaggerated iteration, if that phase ran.
    pub fn kl_after_exaggeration(&self, cfg: &TsneConfig) -> Option<f64> {
        let n = cfg.exaggeration_iterations.min(self.kl_trace.len());
        n.checked_sub(1).map(|i| self.kl_trace[i])
    }

    pub fn final_kl(&self) -> f64 {
        *self.kl_trace.last().expect("at least one iteration")
    }
}

fn squared_distances(points: &Array2<f64>) -> Array2<f64> {
    let n = points.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Conditional distribution of one row at precision `beta`, and its entropy.
/// Distances are shifted by their minimum, which leaves both unchanged but
/// keeps the exponentials from underflowing.
fn conditional_row(dist: &[f64], beta: f64, out: &mut [f64]) -> f64 {
    let min = dist.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut z = 0.0;
    for (o, &d) in out.iter_mut().zip(dist) {
        *o = (-beta * (d - min)).exp();
        z += *o;
    }
    let mut weighted = 0.0;
    for (o, &d) in out.iter_mut().zip(dist) {
        *o /= z;
        weighted += *o * (d - min);
    }
    z.ln() + beta * weighted
}

fn fit_bandwidth(dist: &[f64], target: f64, out: &mut [f64]) -> BandwidthFit {
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut beta = 1.0;
    let mut best = BandwidthFit {
        beta,
        entropy_error: f64::INFINITY,
        steps: 0,
    };
    for step in 1..=MAX_BISECTION_STEPS {
        let h = conditional_row(dist, beta, out);
        let err = (h - target).abs();
        if err < best.entropy_error {
            best = BandwidthFit { beta, entropy_error: err, steps: step };
        }
        if err < ENTROPY_TOLERANCE {
            break;
        }
        // entropy falls as the precision rises
        if h > target {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    conditional_row(dist, best.beta, out);
    best
}

/// Symmetrized joint affinities `(P_{j|i} + P_{i|j}) / 2N` with the
/// per-point bandwidth fits.
pub fn joint_affinities(points: &Array2<f64>, perplexity: f64) -> Result<(Array2<f64>, Vec<BandwidthFit>)> {
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-SNE input contains NaN or infinity".into()));
    }
    let n = points.nrows();
    let sq = squared_distances(points);
    let target = perplexity.ln();
    let mut cond = Array2::zeros((n, n));
    let mut fits = Vec::with_capacity(n);
    let mut dist = vec![0.0; n - 1];
    let mut row = vec![0.0; n - 1];
    for i in 0..n {
        for (slot, j) in (0..n).filter(|&j| j != i).enumerate() {
            dist[slot] = sq[[i, j]];
        }
        fits.push(fit_bandwidth(&dist, target, &mut row));
        for (slot, j) in (0..n).filter(|&j| j != i).enumerate() {
            cond[[i, j]] = row[slot];
        }
    }
    let p = Array2::from_shape_fn((n, n), |(i, j)| (cond[[i, j]] + cond[[j, i]]) / (2 * n) as f64);
    Ok((p, fits))
}

fn kl_divergence(p: &Array2<f64>, q_num: &Array2<f64>, q_sum: f64) -> f64 {
    let mut kl = 0.0;
    for (&pij, &num) in p.iter().zip(q_num.iter()) {
        if pij > 0.0 {
            let qij = (num / q_sum).max(f64::MIN_POSITIVE);
            kl += pij * (pij / qij).ln();
        }
    }
    kl
}

/// Embeds `points` in 2-D. Deterministic for a given seed.
pub fn tsne(points: &Array2<f64>, cfg: &TsneConfig) -> Result<TsneResult> {
    let n = points.nrows();
    cfg.validate(n)?;
    let (p, bandwidths) = joint_affinities(points, cfg.perplexity)?;

    let mut rng = seeded(cfg.seed);
    let init = Normal::new(0.0, INIT_STD).expect("valid std");
    let mut y = Array2::from_shape_simple_fn((n, 2), || init.sample(&mut rng));
    let mut update = Array2::<f64>::zeros((n, 2));
    let mut gains = Array2::<f64>::ones((n, 2));
    let mut num = Array2::<f64>::zeros((n, n));
    let mut grad = Array2::<f64>::zeros((n, 2));
    let mut kl_trace = Vec::with_capacity(cfg.iterations);

    for iter in 0..cfg.iterations {
        let exaggeration = if iter < cfg.exaggeration_iterations { cfg.early_exaggeration } else { 1.0 };
        let momentum = if iter < cfg.momentum_switch { cfg.initial_momentum } else { cfg.final_momentum };

        let mut q_sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dy0 = y[[i, 0]] - y[[j, 0]];
                let dy1 = y[[i, 1]] - y[[j, 1]];
                let v = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
                num[[i, j]] = v;
                num[[j, i]] = v;
                q_sum += 2.0 * v;
            }
        }

        grad.fill(0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let coeff = 4.0 * (exaggeration * p[[i, j]] - num[[i, j]] / q_sum) * num[[i, j]];
                grad[[i, 0]] += coeff * (y[[i, 0]] - y[[j, 0]]);
                grad[[i, 1]] += coeff * (y[[i, 1]] - y[[j, 1]]);
            }
        }

        for ((g, u), gain) in grad.iter().zip(update.iter_mut()).zip(gains.iter_mut()) {
            *gain = if (*g > 0.0) != (*u > 0.0) { *gain + 0.2 } else { *gain * 0.8 };
            *gain = gain.max(MIN_GAIN);
            *u = momentum * *u - cfg.learning_rate * *gain * g;
        }
        y += &update;
        let mean = y.mean_axis(ndarray::Axis(0)).expect("non-empty");
        y -= &mean;

        // KL of the positions that produced this gradient
        kl_trace.push(kl_divergence(&p, &num, q_sum));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-SNE diverged".into()));
    }
    Ok(TsneResult {
        embedding: y,
        kl_trace,
        bandwidths,
    })
}

/// Scatter of a 2-D embedding colored by group label.
pub fn embedding_svg(embedding: &Array2<f64>, groups: &[String], title: &str) -> String {
    let mut plot = SvgPlot::new(title, "t-SNE 1", "t-SNE 2");
    let mut names: Vec<&String> = Vec::new();
    for g in groups {
        if !names.contains(&g) {
            names.push(g);
        }
    }
    for (row, g) in embedding.rows().into_iter().zip(groups) {
        let idx = names.iter().position(|n| *n == g).unwrap_or(0);
        plot.point(row[0], row[1], PALETTE[idx % PALETTE.len()]);
    }
    for (idx, name) in names.iter().enumerate() {
        plot.legend_entry(name, PALETTE[idx % PALETTE.len()]);
    }
    plot.render()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn blobs(per: usize, dim: usize, spread: f64, sep: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = seeded(seed);
        let unit = Normal::new(0.0, 1.0).unwrap();
        let centers: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| sep * unit.sample(&mut rng)).collect()).collect();
        let mut pts = Array2::zeros((3 * per, dim));
        let mut labels = Vec::new();
        for c in 0..3 {
            for k in 0..per {
                for d in 0..dim {
                    pts[[c * per + k, d]] = centers[c][d] + spread * unit.sample(&mut rng);
                }
                labels.push(c);
            }
        }
        (pts, labels)
    }

    fn nearest_centroid_recovery(y: &Array2<f64>, labels: &[usize]) -> f64 {
        let mut centroids = [[0.0f64; 2]; 3];
        let mut counts = [0usize; 3];
        for (row, &l) in y.rows().into_iter().zip(labels) {
            centroids[l][0] += row[0];
            centroids[l][1] += row[1];
            counts[l] += 1;
        }
        for (c, n) in centroids.iter_mut().zip(counts) {
            c[0] /= n as f64;
            c[1] /= n as f64;
        }
        let hits = y
            .rows()
            .into_iter()
            .zip(labels)
            .filter(|(row, &l)| {
                let d = |c: &[f64; 2]| (row[0] - c[0]).powi(2) + (row[1] - c[1]).powi(2);
                (0..3).min_by(|&a, &b| d(&centroids[a]).total_cmp(&d(&centroids[b]))).unwrap() == l
            })
            .count();
        hits as f64 / labels.len() as f64
    }

    /// Entropy straight from the definition, independent of the shifted form.
    fn row_entropy(p: &[f64]) -> f64 {
        -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
    }

    #[test]
    fn bandwidths_hit_perplexity() {
        let (pts, _) = blobs(20, 10, 1.0, 5.0, 1);
        let (_, fits) = joint_affinities(&pts, 15.0).unwrap();
        assert!(fits.iter().all(BandwidthFit::converged));
        // recompute row 0 directly
        let sq = squared_distances(&pts);
        let w: Vec<f64> = (1..pts.nrows()).map(|j| (-fits[0].beta * sq[[0, j]]).exp()).collect();
        let z: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|v| v / z).collect();
        assert!((row_entropy(&p) - 15f64.ln()).abs() < 1e-5);
    }

    #[test]
    fn joint_affinities_are_a_symmetric_distribution() {
        let (pts, _) = blobs(10, 4, 1.0, 3.0, 2);
        let (p, _) = joint_affinities(&pts, 5.0).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert_eq!(p, p.t());
        assert!(p.diag().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recovers_three_clusters() {
        let (pts, labels) = blobs(50, 64, 1.0, 3.0, 7);
        let cfg = TsneConfig { seed: 3, ..Default::default() };
        let res = tsne(&pts, &cfg).unwrap();
        assert!(nearest_centroid_recovery(&res.embedding, &labels) >= 0.95);
        assert!(res.final_kl() < res.kl_after_exaggeration(&cfg).unwrap());
        assert_eq!(res.kl_trace.len(), 1000);
    }

    #[test]
    fn identical_points_do_not_crash() {
        let pts = Array2::from_elem((10, 3), 2.0);
        let (p, fits) = joint_affinities(&pts, 5.0).unwrap();
        let off = 1.0 / (10.0 * 9.0);
        for ((i, j), &v) in p.indexed_iter() {
            assert!(if i == j { v == 0.0 } else { (v - off).abs() < 1e-15 });
        }
        // entropy is ln(9) for every bandwidth, so perplexity 5 is unreachable
        assert!(!fits[0].converged());
        let res = tsne(&pts, &TsneConfig { perplexity: 5.0, iterations: 50, ..Default::default() }).unwrap();
        assert!(res.kl_trace.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn config_errors() {
        let pts = Array2::from_shape_fn((10, 2), |(i, j)| (i * 2 + j) as f64);
        let bad = |cfg: TsneConfig| tsne(&pts, &cfg).unwrap_err();
        assert!(matches!(bad(TsneConfig { perplexity: 10.0, ..Default::default() }), Error::Config(_)));
        assert!(matches!(bad(TsneConfig { perplexity: 1.0, ..Default::default() }), Error::Config(_)));
        assert!(matches!(bad(TsneConfig { perplexity: 3.0, iterations: 0, ..Default::default() }), Error::Config(_)));
        let few = Array2::zeros((3, 2));
        assert!(matches!(tsne(&few, &TsneConfig { perplexity: 2.0, ..Default::default() }), Err(Error::InsufficientData(_))));
        let mut nan = pts.clone();
        nan[[0, 0]] = f64::NAN;
        assert!(matches!(tsne(&nan, &TsneConfig { perplexity: 3.0, ..Default::default() }), Err(Error::NonFinite(_))));
    }

    #[test]
    fn deterministic_per_seed() {
        let (pts, _) = blobs(8, 5, 1.0, 4.0, 4);
        let cfg = TsneConfig { perplexity: 5.0, iterations: 100, seed: 11, ..Default::default() };
        assert_eq!(tsne(&pts, &cfg).unwrap().embedding, tsne(&pts, &cfg).unwrap().embedding);
    }

    #[test]
    fn scatter_has_a_point_per_row() {
        let y = Array2::from_shape_fn((6, 2), |(i, j)| (i + j) as f64);
        let groups: Vec<String> = ["fan", "pump", "fan", "valve", "pump", "fan"].iter().map(|s| s.to_string()).collect();
        let svg = embedding_svg(&y, &groups, "embeddings");
        // six points plus three legend markers
        assert_eq!(svg.matches("<circle").count(), 9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn rotation_leaves_affinities_unchanged(seed in 0u64..1000, angle in 0.0f64..std::f64::consts::TAU) {
            let mut rng = seeded(seed);
            let pts = Array2::from_shape_simple_fn((12, 3), || rng.random_range(-2.0..2.0));
            let (s, c) = angle.sin_cos();
            let rotated = Array2::from_shape_fn((12, 3), |(i, j)| match j {
                0 => c * pts[[i, 0]] - s * pts[[i, 1]],
                1 => s * pts[[i, 0]] + c * pts[[i, 1]],
                _ => pts[[i, 2]],
            });
            let (a, fits) = joint_affinities(&pts, 4.0).unwrap();
            let (b, _) = joint_affinities(&rotated, 4.0).unwrap();
            prop_assert!(fits.iter().all(BandwidthFit::converged));
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
