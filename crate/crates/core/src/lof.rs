//! Local Outlier Factor in novelty mode.
//!
//! Fitting stores every training point's neighborhood, k-distance and local
//! reachability density (lrd). Queries are scored against the training set
//! only, as `mean(lrd(neighbor)) / lrd(query)`: about 1 inside a cluster and
//! much larger for isolated points.
//!
//! Neighborhoods include every point tied at the k-distance, so they can
//! hold more than `k` members. Reachability sums are floored at `1e-12` so
//! duplicated points give large but finite densities.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::formats::{BinReader, BinWriter};

pub const DEFAULT_NEIGHBORS: usize = 4;
pub const DEFAULT_CONTAMINATION: [f64; 4] = [0.1, 0.2, 0.3, 0.4];
const REACH_FLOOR: f64 = 1e-12;

const MAGIC: &[u8; 4] = b"FLOF";
const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LofModel {
    points: Array2<f64>,
    k: usize,
    p: f64,
    neighbors: Vec<Vec<usize>>,
    k_distance: Vec<f64>,
    lrd: Vec<f64>,
}

/// Minkowski distance of order `p`.
pub fn minkowski(a: ArrayView1<f64>, b: ArrayView1<f64>, p: f64) -> f64 {
    let diffs = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs());
    if p == 2.0 {
        diffs.map(|d| d * d).sum::<f64>().sqrt()
    } else if p == 1.0 {
        diffs.sum()
    } else {
        diffs.map(|d| d.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

struct Neighborhood {
    members: Vec<usize>,
    distances: Vec<f64>,
    k_distance: f64,
}

/// k nearest training points of `query`, skipping index `exclude`, plus
/// any further points tied with the k-th distance.
fn neighborhood(points: &Array2<f64>, query: ArrayView1<f64>, k: usize, p: f64, exclude: Option<usize>) -> Neighborhood {
    let mut all: Vec<(f64, usize)> = (0..points.nrows())
        .filter(|&j| Some(j) != exclude)
        .map(|j| (minkowski(query, points.row(j), p), j))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let k_distance = all[k - 1].0;
    let cut = all.partition_point(|&(d, _)| d <= k_distance);
    Neighborhood {
        members: all[..cut].iter().map(|&(_, j)| j).collect(),
        distances: all[..cut].iter().map(|&(d, _)| d).collect(),
        k_distance,
    }
}

fn local_density(n: &Neighborhood, k_distance: &[f64]) -> f64 {
    let reach: f64 = n
        .members
        .iter()
        .zip(&n.distances)
        .map(|(&b, &d)| d.max(k_distance[b]))
        .sum::<f64>()
        / n.members.len() as f64;
    1.0 / reach.max(REACH_FLOOR)
}

fn validate_points(points: &Array2<f64>) -> Result<()> {
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LOF input contains NaN or infinity".into()));
    }
    Ok(())
}

pub fn fit_lof(train_points: &Array2<f64>, k: usize, p: f64) -> Result<LofModel> {
    if k == 0 {
        return Err(Error::Config("n_neighbors must be at least 1".into()));
    }
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::Config(format!("Minkowski order must be >= 1, got {p}")));
    }
    let n = train_points.nrows();
    if n <= k {
        return Err(Error::InsufficientData(format!(
            "LOF with k={k} needs more than {k} training points, got {n}"
        )));
    }
    validate_points(train_points)?;

    let hoods: Vec<Neighborhood> = (0..n)
        .map(|i| neighborhood(train_points, train_points.row(i), k, p, Some(i)))
        .collect();
    let k_distance: Vec<f64> = hoods.iter().map(|h| h.k_distance).collect();
    let lrd: Vec<f64> = hoods.iter().map(|h| local_density(h, &k_distance)).collect();
    Ok(LofModel {
        points: train_points.clone(),
        k,
        p,
        neighbors: hoods.into_iter().map(|h| h.members).collect(),
        k_distance,
        lrd,
    })
}

impl LofModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn n_train(&self) -> usize {
        self.points.nrows()
    }

    pub fn k_distance(&self) -> &[f64] {
        &self.k_distance
    }

    pub fn lrd(&self) -> &[f64] {
        &self.lrd
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// LOF of each training point against the rest of the training set.
    pub fn training_scores(&self) -> Vec<f64> {
        (0..self.n_train())
            .map(|i| {
                let mean: f64 = self.neighbors[i].iter().map(|&b| self.lrd[b]).sum::<f64>()
                    / self.neighbors[i].len() as f64;
                mean / self.lrd[i]
            })
            .collect()
    }

    /// Container: magic, version, k, p, then the training matrix. Derived
    /// quantities are recomputed on load.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BinWriter::new();
        w.bytes(MAGIC)
            .u8(VERSION)
            .u32(self.k as u32)
            .f64(self.p)
            .u32(self.n_train() as u32)
            .u32(self.dim() as u32);
        for &v in self.points.iter() {
            w.f64(v);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = BinReader::new(bytes);
        r.expect_magic(MAGIC)?;
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::parse(format!("unsupported LOF version {version}")));
        }
        let k = r.u32()? as usize;
        let p = r.f64()?;
        let n = r.u32()? as usize;
        let d = r.u32()? as usize;
        let points = Array2::from_shape_vec((n, d), r.f64_vec(n * d)?)
            .map_err(|e| Error::parse(e.to_string()))?;
        r.finish()?;
        fit_lof(&points, k, p)
    }
}

/// Novelty scores for `queries`; training points are never excluded, so a
/// query equal to a training point has that point as a neighbor.
pub fn score_lof(model: &LofModel, queries: &Array2<f64>) -> Result<Vec<f64>> {
    if queries.ncols() != model.dim() {
        return Err(Error::Shape(format!(
            "query dim {} does not match training dim {}",
            queries.ncols(),
            model.dim()
        )));
    }
    validate_points(queries)?;
    Ok(queries
        .rows()
        .into_iter()
        .map(|q| {
            let hood = neighborhood(&model.points, q, model.k, model.p, None);
            let lrd_q = local_density(&hood, &model.k_distance);
            let mean: f64 = hood.members.iter().map(|&b| model.lrd[b]).sum::<f64>()
                / hood.members.len() as f64;
            mean / lrd_q
        })
        .collect())
}

/// Contamination levels voted over at inference.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteConfig {
    pub levels: Vec<f64>,
}

impl Default for VoteConfig {
    fn default() -> Self {
        Self {
            levels: DEFAULT_CONTAMINATION.to_vec(),
        }
    }
}

impl VoteConfig {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        let cfg = Self { levels };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Config("need at least one contamination level".into()));
        }
        if let Some(c) = self.levels.iter().find(|&&c| !(c > 0.0 && c <= 0.5)) {
            return Err(Error::Config(format!("contamination {c} outside (0, 0.5]")));
        }
        Ok(())
    }
}

/// Linear-interpolation quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// For each level `c`, a query is flagged when its score exceeds the
/// `(1 - c)` quantile of the training scores. The majority across levels
/// decides; a tie counts as anomalous.
pub fn predict_vote(train_scores: &[f64], query_scores: &[f64], votes: &VoteConfig) -> Result<Vec<bool>> {
    votes.validate()?;
    if train_scores.is_empty() {
        return Err(Error::Empty("no training scores to threshold against".into()));
    }
    let thresholds: Vec<f64> = votes
        .levels
        .iter()
        .map(|c| quantile(train_scores, 1.0 - c))
        .collect();
    Ok(query_scores
        .iter()
        .map(|&s| {
            let flags = thresholds.iter().filter(|&&t| s > t).count();
            2 * flags >= thresholds.len()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::seeded;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand_distr::{Distribution, Normal};

    /// Direct transcription of the definitions over a full distance matrix.
    fn oracle(train: &Array2<f64>, queries: &Array2<f64>, k: usize) -> Vec<f64> {
        let n = train.nrows();
        let d = |a: ArrayView1<f64>, b: ArrayView1<f64>| {
            a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
        };
        let dist = Array2::from_shape_fn((n, n), |(i, j)| d(train.row(i), train.row(j)));
        let kdist_of = |row: &[f64]| {
            let mut s = row.to_vec();
            s.sort_by(f64::total_cmp);
            s[k - 1]
        };
        let others = |i: usize| -> Vec<f64> { (0..n).filter(|&j| j != i).map(|j| dist[[i, j]]).collect() };
        let kdist: Vec<f64> = (0..n).map(|i| kdist_of(&others(i))).collect();
        let lrd_train: Vec<f64> = (0..n)
            .map(|i| {
                let hood: Vec<usize> = (0..n).filter(|&j| j != i && dist[[i, j]] <= kdist[i]).collect();
                let reach: f64 = hood.iter().map(|&j| kdist[j].max(dist[[i, j]])).sum::<f64>() / hood.len() as f64;
                1.0 / reach.max(1e-12)
            })
            .collect();
        queries
            .rows()
            .into_iter()
            .map(|q| {
                let dq: Vec<f64> = (0..n).map(|j| d(q, train.row(j))).collect();
                let kq = kdist_of(&dq);
                let hood: Vec<usize> = (0..n).filter(|&j| dq[j] <= kq).collect();
                let reach: f64 = hood.iter().map(|&j| kdist[j].max(dq[j])).sum::<f64>() / hood.len() as f64;
                let lrd_q = 1.0 / reach.max(1e-12);
                hood.iter().map(|&j| lrd_train[j]).sum::<f64>() / hood.len() as f64 / lrd_q
            })
            .collect()
    }

    fn grid(side: usize) -> Array2<f64> {
        Array2::from_shape_fn((side * side, 2), |(i, j)| if j == 0 { (i / side) as f64 } else { (i % side) as f64 })
    }

    #[test]
    fn grid_interior_is_inlier() {
        let pts = grid(5);
        let model = fit_lof(&pts, 4, 2.0).unwrap();
        let scores = model.training_scores();
        for i in 0..25 {
            let (r, c) = (i / 5, i % 5);
            if (1..4).contains(&r) && (1..4).contains(&c) {
                assert!((0.9..=1.2).contains(&scores[i]), "point {i}: {}", scores[i]);
            }
        }
        // interior points tie four neighbors at distance 1
        assert_eq!(model.neighbors(12).len(), 4);
    }

    #[test]
    fn identical_points_are_finite_and_equal() {
        let pts = Array2::from_elem((8, 3), 1.5);
        let model = fit_lof(&pts, 4, 2.0).unwrap();
        let s = model.training_scores();
        assert!(s.iter().all(|&v| v == s[0] && v.is_finite()));
        let q = score_lof(&model, &Array2::from_elem((1, 3), 1.5)).unwrap();
        assert!(q[0].is_finite());
        assert!(model.neighbors(0).len() == 7);
    }

    fn cluster(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = seeded(seed);
        let unit = Normal::new(0.0, 1.0).unwrap();
        Array2::from_shape_simple_fn((n, 2), || unit.sample(&mut rng))
    }

    #[test]
    fn far_outlier_has_largest_score() {
        let mut pts = cluster(20, 3);
        pts.push_row(array![25.0, -30.0].view()).unwrap();
        let model = fit_lof(&pts, 4, 2.0).unwrap();
        let s = model.training_scores();
        let (argmax, _) = s.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!(argmax, 20);
    }

    #[test]
    fn queries_inside_and_far_outside() {
        let train = cluster(40, 5);
        let model = fit_lof(&train, 4, 2.0).unwrap();
        let member = train.slice(ndarray::s![3..4, ..]).to_owned();
        let inside = score_lof(&model, &member).unwrap()[0];
        let oracle_inside = oracle(&train, &member, 4)[0];
        assert!((inside - oracle_inside).abs() < 1e-9 * oracle_inside);
        assert!((0.7..1.5).contains(&inside), "{inside}");
        let far = score_lof(&model, &array![[300.0, 0.0]]).unwrap()[0];
        let in_cluster = score_lof(&model, &train).unwrap();
        assert!(far > 10.0);
        assert!(in_cluster.iter().all(|&s| s < far));
    }

    #[test]
    fn symmetric_cross_queries_score_equally() {
        let mut train = Array2::zeros((0, 2));
        for (x, y) in [(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (2.0, 0.0), (-2.0, 0.0), (0.0, 2.0), (0.0, -2.0)] {
            train.push_row(array![x, y].view()).unwrap();
        }
        let model = fit_lof(&train, 4, 2.0).unwrap();
        let q = array![[5.0, 0.0], [-5.0, 0.0], [0.0, 5.0], [0.0, -5.0]];
        let s = score_lof(&model, &q).unwrap();
        assert!(s.iter().all(|&v| (v - s[0]).abs() < 1e-12 * s[0]));
    }

    #[test]
    fn errors() {
        let pts = cluster(4, 0);
        assert!(matches!(fit_lof(&pts, 4, 2.0), Err(Error::InsufficientData(_))));
        assert!(fit_lof(&pts, 0, 2.0).is_err());
        assert!(fit_lof(&pts, 2, 0.5).is_err());
        let model = fit_lof(&pts, 2, 2.0).unwrap();
        assert!(matches!(score_lof(&model, &Array2::zeros((1, 3))), Err(Error::Shape(_))));
        let mut bad = pts.clone();
        bad[[0, 0]] = f64::NAN;
        assert!(fit_lof(&bad, 2, 2.0).is_err());
    }

    #[test]
    fn manhattan_metric() {
        assert_eq!(minkowski(array![0.0, 0.0].view(), array![3.0, 4.0].view(), 1.0), 7.0);
        assert_eq!(minkowski(array![0.0, 0.0].view(), array![3.0, 4.0].view(), 2.0), 5.0);
        let d3 = minkowski(array![0.0, 0.0].view(), array![3.0, 4.0].view(), 3.0);
        assert!((d3 - (27.0f64 + 64.0).cbrt()).abs() < 1e-12);
    }

    #[test]
    fn container_round_trip() {
        let model = fit_lof(&cluster(12, 9), 4, 2.0).unwrap();
        assert_eq!(LofModel::from_bytes(&model.to_bytes()).unwrap(), model);
    }

    #[test]
    fn vote_dominance_and_tie() {
        let train: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect(); // quantile q == q
        let votes = VoteConfig::default();
        // above max -> every level flags; below min -> none
        assert_eq!(predict_vote(&train, &[2.0, -1.0], &votes).unwrap(), vec![true, false]);
        // 0.75 lies between the 0.7 and 0.8 quantiles: flagged at c=0.3 and 0.4
        let thresholds: Vec<f64> = votes.levels.iter().map(|c| quantile(&train, 1.0 - c)).collect();
        let flags: Vec<bool> = thresholds.iter().map(|&t| 0.75 > t).collect();
        assert_eq!(flags, vec![false, false, true, true]);
        assert_eq!(predict_vote(&train, &[0.75], &votes).unwrap(), vec![true]);
        // 0.65 is flagged only at c=0.4: 1 of 4
        assert_eq!(predict_vote(&train, &[0.65], &votes).unwrap(), vec![false]);
    }

    #[test]
    fn vote_config_validation() {
        assert!(VoteConfig::new(vec![]).is_err());
        assert!(VoteConfig::new(vec![0.6]).is_err());
        assert!(VoteConfig::new(vec![0.0]).is_err());
        assert!(VoteConfig::new(vec![0.5, 0.05]).is_ok());
        assert!(predict_vote(&[], &[1.0], &VoteConfig::default()).is_err());
    }

    #[test]
    fn random_instances_match_oracle() {
        let mut rng = seeded(31);
        for _ in 0..50 {
            let n = rng.random_range(6..40);
            let d = rng.random_range(1..5);
            let train = Array2::from_shape_simple_fn((n, d), || rng.random_range(-3.0..3.0));
            let queries = Array2::from_shape_simple_fn((5, d), || rng.random_range(-5.0..5.0));
            let model = fit_lof(&train, 4, 2.0).unwrap();
            let got = score_lof(&model, &queries).unwrap();
            for (g, o) in got.iter().zip(oracle(&train, &queries, 4)) {
                assert!((g - o).abs() <= 1e-9 * o.abs());
            }
        }
    }

    proptest! {
        #[test]
        fn rigid_motion_and_scaling(
            seed in 0u64..500,
            angle in 0.0f64..std::f64::consts::TAU,
            shift in -10.0f64..10.0,
            scale in 0.1f64..10.0,
        ) {
            let train = cluster(15, seed);
            let queries = cluster(6, seed + 1000) * 2.0;
            let rotate = |m: &Array2<f64>| {
                let (s, c) = angle.sin_cos();
                Array2::from_shape_fn(m.raw_dim(), |(i, j)| {
                    let (x, y) = (m[[i, 0]], m[[i, 1]]);
                    (if j == 0 { c * x - s * y } else { s * x + c * y }) + shift
                })
            };
            let base = score_lof(&fit_lof(&train, 4, 2.0).unwrap(), &queries).unwrap();
            let moved = score_lof(&fit_lof(&rotate(&train), 4, 2.0).unwrap(), &rotate(&queries)).unwrap();
            for (a, b) in base.iter().zip(&moved) {
                prop_assert!((a - b).abs() <= 1e-6 * a);
            }
            let scaled = score_lof(&fit_lof(&(&train * scale), 4, 2.0).unwrap(), &(&queries * scale)).unwrap();
            // LOF is scale-free, so ranks (and values up to rounding) survive
            for (a, b) in base.iter().zip(&scaled) {
                prop_assert!((a - b).abs() <= 1e-9 * a);
            }
        }
    }
}
