//! K-means variants and the spectral clustering pipeline.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;
use crate::laplacian::{laplacian_operator, Variant};
use crate::linalg::{eig_leading_op, Matrix};
use crate::par::Exec;
use crate::rng::sub_rng;

/// Distance differences at or below this are ties, resolved to the smallest index.
pub const TIE_TOL: f64 = 1e-12;
/// Rows with a smaller norm are left at zero by [`row_normalize`].
pub const ZERO_ROW_TOL: f64 = 1e-12;
const WEISZFELD_TOL: f64 = 1e-10;
const WEISZFELD_MAX_ITER: usize = 1000;

/// `n` points in `R^dim`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not form points of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(dim, rows.concat())
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        Self::new(m.cols(), m.as_slice().to_vec())
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Applies `x ↦ x M` to every point.
    pub fn transform(&self, m: &Matrix) -> Result<PointSet> {
        let pts = Matrix::from_vec(self.n(), self.dim, self.data.clone())?;
        PointSet::from_matrix(&pts.matmul(m)?)
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Center selection for the K-means family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KMeansMode {
    /// Lloyd iterations with free centroids.
    #[default]
    Mean,
    /// Centroids restricted to data points, improved by PAM swaps.
    Medoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub mode: KMeansMode,
    pub exec: Exec,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 50,
            max_iter: 300,
            mode: KMeansMode::Mean,
            exec: Exec::default(),
        }
    }
}

/// Clustering algorithm applied to an embedding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Algorithm {
    /// Squared-distance objective.
    KMeans,
    /// Distance objective with geometric-median centers.
    #[default]
    Modified,
    /// Squared-distance objective with medoid centers.
    Medoid,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::KMeans, Algorithm::Modified, Algorithm::Medoid];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::Modified => "modified",
            Algorithm::Medoid => "medoid",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown clustering algorithm `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusteringResult {
    /// Labels in `0..K`.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Mean squared distance (K-means, medoid) or mean distance (modified).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after initialization and after every iteration of the winning run.
    pub objective_trace: Vec<f64>,
    /// Rows that were zero before row normalization.
    pub degenerate_rows: Vec<usize>,
}

/// Nearest centroid per point; ties within [`TIE_TOL`] go to the smallest index.
pub fn assign_labels(points: &PointSet, centroids: &[Vec<f64>]) -> Vec<usize> {
    (0..points.n())
        .map(|i| nearest(points.point(i), centroids).0)
        .collect()
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = dist(x, &centroids[0]);
    for (l, c) in centroids.iter().enumerate().skip(1) {
        let d = dist(x, c);
        if d < best_d - TIE_TOL {
            best = l;
            best_d = d;
        }
    }
    (best, best_d)
}

/// Mean of `d(x_i, c_{g_i})^power`.
pub fn objective(points: &PointSet, labels: &[usize], centroids: &[Vec<f64>], squared: bool) -> f64 {
    let n = points.n();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = (0..n)
        .map(|i| {
            let d2 = sq_dist(points.point(i), &centroids[labels[i]]);
            if squared {
                d2
            } else {
                d2.sqrt()
            }
        })
        .sum();
    total / n as f64
}

/// Scales each row to unit length; rows with norm below [`ZERO_ROW_TOL`] stay
/// zero and are reported.
pub fn row_normalize(u: &Matrix) -> (PointSet, Vec<usize>) {
    let k = u.cols().max(1);
    let mut data = Vec::with_capacity(u.rows() * k);
    let mut degenerate = Vec::new();
    for i in 0..u.rows() {
        let row = u.row(i);
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < ZERO_ROW_TOL {
            degenerate.push(i);
            data.extend(std::iter::repeat_n(0.0, k));
        } else {
            data.extend(row.iter().map(|x| x / norm));
        }
    }
    (PointSet { dim: k, data }, degenerate)
}

/// Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let directed = |x: &[Vec<f64>], y: &[Vec<f64>]| {
        x.iter()
            .map(|p| y.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}

/// Standard K-means (mode `Mean`) or PAM medoids (mode `Medoid`), best of
/// `config.restarts` runs.
pub fn kmeans(points: &PointSet, k: usize, config: &KMeansConfig, seed: u64) -> Result<ClusteringResult> {
    check_points(points, k)?;
    match config.mode {
        KMeansMode::Mean => best_of_restarts(config, seed, |rng| {
            let init = seed_centers(points, k, true, rng);
            lloyd(points, init, config.max_iter, true)
        }),
        KMeansMode::Medoid => {
            let dmat = pairwise_sq(points);
            best_of_restarts(config, seed, |rng| pam(points, &dmat, k, config.max_iter, rng))
        }
    }
}

/// K-means with the mean-distance objective and geometric-median centers.
pub fn kmedians_modified(
    points: &PointSet,
    k: usize,
    config: &KMeansConfig,
    seed: u64,
) -> Result<ClusteringResult> {
    check_points(points, k)?;
    best_of_restarts(config, seed, |rng| {
        let init = seed_centers(points, k, false, rng);
        lloyd(points, init, config.max_iter, false)
    })
}

pub fn cluster_points(
    points: &PointSet,
    k: usize,
    algorithm: Algorithm,
    config: &KMeansConfig,
    seed: u64,
) -> Result<ClusteringResult> {
    match algorithm {
        Algorithm::KMeans => kmeans(points, k, &KMeansConfig { mode: KMeansMode::Mean, ..*config }, seed),
        Algorithm::Medoid => kmeans(points, k, &KMeansConfig { mode: KMeansMode::Medoid, ..*config }, seed),
        Algorithm::Modified => kmedians_modified(points, k, config, seed),
    }
}

fn check_points(points: &PointSet, k: usize) -> Result<()> {
    if k == 0 || points.n() < k {
        return Err(Error::TooFewPoints { n: points.n(), k });
    }
    Ok(())
}

fn best_of_restarts<F>(config: &KMeansConfig, seed: u64, run: F) -> Result<ClusteringResult>
where
    F: Fn(&mut ChaCha8Rng) -> ClusteringResult + Sync + Send,
{
    let runs = config.restarts.max(1);
    let results = config.exec.map(runs, |r| run(&mut sub_rng(seed, r as u64)));
    let mut best: Option<ClusteringResult> = None;
    for res in results {
        if best.as_ref().is_none_or(|b| res.objective < b.objective) {
            best = Some(res);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// k-means++ seeding with `D²` (squared) or `D¹` weights.
fn seed_centers(points: &PointSet, k: usize, squared: bool, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    seed_indices(points, k, squared, rng)
        .into_iter()
        .map(|i| points.point(i).to_vec())
        .collect()
}

fn seed_indices(points: &PointSet, k: usize, squared: bool, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.n();
    let mut chosen = vec![rng.gen_range(0..n)];
    let weight = |d2: f64| if squared { d2 } else { d2.sqrt() };
    let mut w: Vec<f64> = (0..n)
        .map(|i| weight(sq_dist(points.point(i), points.point(chosen[0]))))
        .collect();
    while chosen.len() < k {
        let total: f64 = w.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &wi) in w.iter().enumerate() {
                acc += wi;
                if wi > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave the target past the last positive weight.
            pick.unwrap_or_else(|| w.iter().rposition(|&x| x > 0.0).expect("positive total"))
        } else {
            rng.gen_range(0..n)
        };
        chosen.push(next);
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = wi.min(weight(sq_dist(points.point(i), points.point(next))));
        }
    }
    chosen
}

fn lloyd(points: &PointSet, mut centers: Vec<Vec<f64>>, max_iter: usize, squared: bool) -> ClusteringResult {
    let mut labels = assign_labels(points, &centers);
    let mut obj = objective(points, &labels, &centers, squared);
    let mut trace = vec![obj];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let new_centers = update_centers(points, &labels, &centers, squared);
        let new_labels = assign_labels(points, &new_centers);
        let new_obj = objective(points, &new_labels, &new_centers, squared);
        debug_assert!(new_obj <= obj + 1e-9 * (1.0 + obj), "objective increased");
        trace.push(new_obj);
        let stable = new_labels == labels;
        centers = new_centers;
        labels = new_labels;
        obj = new_obj;
        if stable {
            converged = true;
            break;
        }
    }
    ClusteringResult {
        labels,
        centroids: centers,
        objective: obj,
        iterations,
        converged,
        objective_trace: trace,
        degenerate_rows: Vec::new(),
    }
}

fn update_centers(points: &PointSet, labels: &[usize], old: &[Vec<f64>], squared: bool) -> Vec<Vec<f64>> {
    let k = old.len();
    let dim = points.dim();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &g) in labels.iter().enumerate() {
        members[g].push(i);
    }
    let mut centers: Vec<Vec<f64>> = members
        .iter()
        .enumerate()
        .map(|(c, idx)| {
            if idx.is_empty() {
                return old[c].clone();
            }
            let mut mean = vec![0.0; dim];
            for &i in idx {
                for (m, x) in mean.iter_mut().zip(points.point(i)) {
                    *m += x;
                }
            }
            mean.iter_mut().for_each(|m| *m /= idx.len() as f64);
            if squared {
                return mean;
            }
            let pts: Vec<&[f64]> = idx.iter().map(|&i| points.point(i)).collect();
            // Warm start from the current center; the cluster mean is the fallback.
            let start = if idx.len() > 2 { old[c].clone() } else { mean };
            let med = geometric_median(&pts, start);
            let cost = |c: &[f64]| pts.iter().map(|p| dist(p, c)).sum::<f64>();
            if cost(&med) <= cost(&old[c]) {
                med
            } else {
                old[c].clone()
            }
        })
        .collect();
    // Empty clusters take over the point farthest from its current center.
    let empty: Vec<usize> = (0..k).filter(|&c| members[c].is_empty()).collect();
    if !empty.is_empty() {
        let mut taken = vec![false; points.n()];
        for c in empty {
            let far = (0..points.n())
                .filter(|&i| !taken[i])
                .map(|i| (i, sq_dist(points.point(i), &centers[labels[i]])))
                .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                });
            if let Some((i, _)) = far {
                taken[i] = true;
                centers[c] = points.point(i).to_vec();
            }
        }
    }
    centers
}

/// Geometric median by Weiszfeld iterations started at `start`.
///
/// When an iterate coincides with a data point the step follows the
/// Vardi-Zhang modification, which either certifies that point as the median
/// or moves off it. Two-point sets return their midpoint.
pub fn geometric_median(pts: &[&[f64]], start: Vec<f64>) -> Vec<f64> {
    match pts.len() {
        0 => return start,
        1 => return pts[0].to_vec(),
        2 => return pts[0].iter().zip(pts[1]).map(|(a, b)| 0.5 * (a + b)).collect(),
        _ => {}
    }
    let dim = start.len();
    let mut y = start;
    let scale = pts.iter().map(|p| dist(p, &y)).fold(0.0, f64::max).max(1e-300);
    for _ in 0..WEISZFELD_MAX_ITER {
        let mut num = vec![0.0; dim];
        let mut den = 0.0;
        let mut pull = vec![0.0; dim];
        let mut coincident = 0usize;
        for p in pts {
            let d = dist(p, &y);
            if d <= 1e-14 * scale {
                coincident += 1;
                continue;
            }
            let w = 1.0 / d;
            den += w;
            for j in 0..dim {
                num[j] += w * p[j];
                pull[j] += w * (p[j] - y[j]);
            }
        }
        if den == 0.0 {
            return y;
        }
        let t: Vec<f64> = num.iter().map(|v| v / den).collect();
        let next = if coincident == 0 {
            t
        } else {
            let r = pull.iter().map(|v| v * v).sum::<f64>().sqrt();
            let eta = coincident as f64;
            if r <= eta {
                return y;
            }
            let g = eta / r;
            t.iter().zip(&y).map(|(ti, yi)| (1.0 - g) * ti + g * yi).collect()
        };
        let step = dist(&next, &y);
        y = next;
        if step <= WEISZFELD_TOL * scale.max(1.0) {
            break;
        }
    }
    y
}

fn pairwise_sq(points: &PointSet) -> Vec<f64> {
    let n = points.n();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let v = sq_dist(points.point(i), points.point(j));
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// PAM: k-means++ initial medoids, then best-improvement swaps.
fn pam(points: &PointSet, dmat: &[f64], k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> ClusteringResult {
    let n = points.n();
    let mut medoids = seed_indices(points, k, true, rng);
    let cost_of = |meds: &[usize]| -> f64 {
        (0..n)
            .map(|j| meds.iter().map(|&m| dmat[j * n + m]).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / n as f64
    };
    let mut cost = cost_of(&medoids);
    let mut trace = vec![cost];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        // Nearest and second-nearest medoid distances for every point.
        let mut near = vec![(usize::MAX, f64::INFINITY); n];
        let mut second = vec![f64::INFINITY; n];
        for j in 0..n {
            for (slot, &m) in medoids.iter().enumerate() {
                let d = dmat[j * n + m];
                if d < near[j].1 {
                    second[j] = near[j].1;
                    near[j] = (slot, d);
                } else if d < second[j] {
                    second[j] = d;
                }
            }
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for slot in 0..k {
            for o in 0..n {
                if medoids.contains(&o) {
                    continue;
                }
                let total: f64 = (0..n)
                    .map(|j| {
                        let via_o = dmat[j * n + o];
                        let rest = if near[j].0 == slot { second[j] } else { near[j].1 };
                        rest.min(via_o)
                    })
                    .sum::<f64>()
                    / n as f64;
                if best.is_none_or(|(c, _, _)| total < c) {
                    best = Some((total, slot, o));
                }
            }
        }
        match best {
            Some((c, slot, o)) if c < cost - 1e-12 * (1.0 + cost) => {
                medoids[slot] = o;
                cost = c;
                trace.push(cost);
            }
            _ => {
                converged = true;
                break;
            }
        }
    }
    let centroids: Vec<Vec<f64>> = medoids.iter().map(|&m| points.point(m).to_vec()).collect();
    let labels = assign_labels(points, &centroids);
    let objective = objective(points, &labels, &centroids, true);
    ClusteringResult {
        labels,
        centroids,
        objective,
        iterations,
        converged,
        objective_trace: trace,
        degenerate_rows: Vec::new(),
    }
}

/// Settings of the end-to-end pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralConfig {
    pub variant: Variant,
    pub tau: f64,
    pub algorithm: Algorithm,
    pub kmeans: KMeansConfig,
}

/// Leading eigenpairs of a Laplacian and the rows handed to the clustering step.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
    /// `n × K` leading eigenvectors.
    pub vectors: Matrix,
    pub points: PointSet,
    pub degenerate_rows: Vec<usize>,
}

/// Eigenvectors of the `K` largest `|λ|`, scaled by `(n/K)^{1/2}` (plain, tau)
/// or row-normalized (degree-corrected variants).
pub fn spectral_embedding(
    a: &AdjacencyMatrix,
    k: usize,
    variant: Variant,
    tau: f64,
    theta_hat: Option<&[f64]>,
) -> Result<Embedding> {
    let n = a.n();
    if k == 0 || n < k {
        return Err(Error::TooFewPoints { n, k });
    }
    let l = laplacian_operator(a, variant, tau, theta_hat)?;
    let dec = eig_leading_op(&l, k)?;
    let (points, degenerate_rows) = if variant.degree_corrected() {
        row_normalize(&dec.vectors)
    } else {
        let s = (n as f64 / k as f64).sqrt();
        let data = dec.vectors.as_slice().iter().map(|x| x * s).collect();
        (PointSet::new(k, data)?, Vec::new())
    };
    Ok(Embedding {
        values: dec.values,
        vectors: dec.vectors,
        points,
        degenerate_rows,
    })
}

pub fn spectral_cluster(
    a: &AdjacencyMatrix,
    k: usize,
    config: &SpectralConfig,
    theta_hat: Option<&[f64]>,
    seed: u64,
) -> Result<ClusteringResult> {
    let emb = spectral_embedding(a, k, config.variant, config.tau, theta_hat)?;
    let mut res = cluster_points(&emb.points, k, config.algorithm, &config.kmeans, seed)?;
    res.degenerate_rows = emb.degenerate_rows;
    Ok(res)
}
