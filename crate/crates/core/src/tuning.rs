//! Data-driven choice of the regularizer `τ`.
//!
//! For each grid value the graph is clustered, a block model is fitted to the
//! resulting labels, and the distance between the sample Laplacian and the
//! fitted model's Laplacian is measured relative to the fitted `K`-th
//! eigenvalue. The grid value with the smallest ratio wins.

use crate::clustering::{spectral_cluster, Algorithm, ClusteringResult, KMeansConfig, SpectralConfig};
use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;
use crate::laplacian::{degrees, laplacian_operator, Variant};
use crate::linalg::{eig_sym, spectral_norm_op, Difference, Matrix, SymMatrix, SymOperator};
use crate::model::Membership;
use crate::par::Exec;

pub const GRID_POINTS: usize = 20;
/// `|σ̂_K|` below this makes the criterion undefined.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// `1e-4, 1, τ_max^{1/18}, …, τ_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct TauGrid {
    pub values: Vec<f64>,
    pub tau_max: f64,
}

pub fn tau_grid(d_bar: f64) -> Result<TauGrid> {
    if !(d_bar.is_finite() && d_bar > 1.0) {
        return Err(Error::DegenerateGrid(d_bar));
    }
    let mut values = vec![1e-4, 1.0];
    values.extend((1..=18).map(|j| d_bar.powf(j as f64 / 18.0)));
    Ok(TauGrid {
        values,
        tau_max: d_bar,
    })
}

fn community_sizes(labels: &[usize], k: usize) -> Result<Vec<usize>> {
    let mut sizes = vec![0usize; k];
    for &g in labels {
        if g >= k {
            return Err(Error::InvalidModel(format!("label {g} out of range for K={k}")));
        }
        sizes[g] += 1;
    }
    if let Some(c) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster(c));
    }
    Ok(sizes)
}

/// `B̂_kl = Σ_{g_i = k, g_j = l} A_ij / (n̂_k n̂_l)` over ordered pairs.
pub fn estimate_block_matrix(a: &AdjacencyMatrix, labels: &[usize], k: usize) -> Result<Matrix> {
    if labels.len() != a.n() {
        return Err(Error::LengthMismatch(labels.len(), a.n()));
    }
    let sizes = community_sizes(labels, k)?;
    let mut counts = vec![0usize; k * k];
    for i in 0..a.n() {
        let gi = labels[i];
        for (j, &x) in a.row(i).iter().enumerate() {
            if x != 0 {
                counts[gi * k + labels[j]] += 1;
            }
        }
    }
    Ok(Matrix::from_fn(k, k, |p, q| {
        counts[p * k + q] as f64 / (sizes[p] as f64 * sizes[q] as f64)
    }))
}

/// `θ̂_i = n̂_{g_i} d̂_i / Σ_{g_j = g_i} d̂_j`.
pub fn estimate_theta(a: &AdjacencyMatrix, labels: &[usize], k: usize) -> Result<Vec<f64>> {
    if labels.len() != a.n() {
        return Err(Error::LengthMismatch(labels.len(), a.n()));
    }
    let sizes = community_sizes(labels, k)?;
    let d = degrees(a).d_hat;
    let mut sums = vec![0usize; k];
    for (i, &g) in labels.iter().enumerate() {
        sums[g] += d[i];
    }
    if let Some(c) = sums.iter().position(|&s| s == 0) {
        return Err(Error::ZeroCommunityDegree(c));
    }
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &g)| sizes[g] as f64 * d[i] as f64 / sums[g] as f64)
        .collect())
}

/// Block model fitted to estimated labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PlugInModel {
    pub membership: Membership,
    pub b_hat: Matrix,
    pub theta_hat: Option<Vec<f64>>,
}

impl PlugInModel {
    /// Fits `B̂` and, with `with_theta`, `θ̂` from `labels`.
    pub fn fit(a: &AdjacencyMatrix, labels: &[usize], k: usize, with_theta: bool) -> Result<Self> {
        let b_hat = estimate_block_matrix(a, labels, k)?;
        let theta_hat = if with_theta {
            Some(estimate_theta(a, labels, k)?)
        } else {
            None
        };
        Ok(Self {
            membership: Membership::new(labels.to_vec(), k)?,
            b_hat,
            theta_hat,
        })
    }
}

/// Entry scaling of a fitted Laplacian: `𝓛̂_ij = s_i s_j B̃_{g_i g_j}`.
#[derive(Clone, Debug)]
struct PlugInFactors {
    b_tilde: Matrix,
    s: Vec<f64>,
}

fn plug_in_factors(plug: &PlugInModel, tau: f64, variant: Variant) -> Result<PlugInFactors> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Config(format!("tau must be finite and non-negative, got {tau}")));
    }
    let g = plug.membership.labels();
    let n = g.len();
    let nf = n as f64;
    let k = plug.membership.k();
    let w: Vec<f64> = match (&plug.theta_hat, variant) {
        (Some(t), Variant::Plain | Variant::TauPrime | Variant::TauDoublePrime) => t.clone(),
        _ => vec![1.0; n],
    };
    if w.len() != n {
        return Err(Error::LengthMismatch(w.len(), n));
    }
    let shift = match variant {
        Variant::Tau | Variant::TauDoublePrime => tau / nf,
        Variant::Plain | Variant::TauPrime => 0.0,
    };
    let b_tilde = Matrix::from_fn(k, k, |p, q| plug.b_hat[(p, q)] + shift);
    // Weighted community mass Σ_{g_j = l} w_j, so row sums are w_i Σ_l B̃_{g_i l} mass_l.
    let mut mass = vec![0.0; k];
    for (j, &gj) in g.iter().enumerate() {
        mass[gj] += w[j];
    }
    let block_deg: Vec<f64> = (0..k)
        .map(|p| (0..k).map(|q| b_tilde[(p, q)] * mass[q]).sum())
        .collect();
    let mut s = Vec::with_capacity(n);
    for i in 0..n {
        let mut d = w[i] * block_deg[g[i]];
        if variant == Variant::TauPrime {
            d += tau;
        }
        if d > 0.0 {
            s.push(w[i] / d.sqrt());
        } else if variant == Variant::TauDoublePrime {
            s.push(0.0);
        } else {
            return Err(Error::SingularDegree { node: i });
        }
    }
    Ok(PlugInFactors { b_tilde, s })
}

/// Laplacian of the fitted model: `P̂ = Θ̂ẐB̂ẐᵀΘ̂` (Θ̂ = I without `θ̂`, and
/// always for the `Tau` variant) passed through the variant's normalization.
pub fn plug_in_laplacian(plug: &PlugInModel, tau: f64, variant: Variant) -> Result<SymMatrix> {
    Ok(plug_in_operator(plug, tau, variant)?.to_dense())
}

/// The plug-in Laplacian as the block-constant factorization `S Z B̃ Zᵀ S`.
#[derive(Clone, Debug)]
pub struct PlugInOperator {
    labels: Vec<usize>,
    factors: PlugInFactors,
}

pub fn plug_in_operator(plug: &PlugInModel, tau: f64, variant: Variant) -> Result<PlugInOperator> {
    Ok(PlugInOperator {
        labels: plug.membership.labels().to_vec(),
        factors: plug_in_factors(plug, tau, variant)?,
    })
}

impl SymOperator for PlugInOperator {
    fn dim(&self) -> usize {
        self.labels.len()
    }

    fn apply_block(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (g, s, bt) = (&self.labels, &self.factors.s, &self.factors.b_tilde);
        let k = bt.rows();
        xs.iter()
            .map(|x| {
                let mut t = vec![0.0; k];
                for ((&gi, &si), &xi) in g.iter().zip(s).zip(x) {
                    t[gi] += si * xi;
                }
                let u: Vec<f64> = (0..k).map(|p| (0..k).map(|q| bt[(p, q)] * t[q]).sum()).collect();
                g.iter().zip(s).map(|(&gi, &si)| si * u[gi]).collect()
            })
            .collect()
    }

    fn to_dense(&self) -> SymMatrix {
        let (g, s, bt) = (&self.labels, &self.factors.s, &self.factors.b_tilde);
        SymMatrix::from_lower(g.len(), |i, j| s[i] * s[j] * bt[(g[i], g[j])])
    }
}

/// Nonzero eigenvalues of [`plug_in_laplacian`], by descending `|λ|`, computed
/// from the `K × K` reduction.
pub fn plug_in_spectrum(plug: &PlugInModel, tau: f64, variant: Variant) -> Result<Vec<f64>> {
    let f = plug_in_factors(plug, tau, variant)?;
    let k = plug.membership.k();
    let mut gram = vec![0.0; k];
    for (i, &gi) in plug.membership.labels().iter().enumerate() {
        gram[gi] += f.s[i] * f.s[i];
    }
    let core = SymMatrix::from_lower(k, |p, q| gram[p].sqrt() * f.b_tilde[(p, q)] * gram[q].sqrt());
    Ok(eig_sym(&core)?.values)
}

/// Clustering settings used inside the criterion.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct TuneConfig {
    pub algorithm: Algorithm,
    pub kmeans: KMeansConfig,
}

/// One grid evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct QEvaluation {
    pub tau: f64,
    /// `+∞` when the fitted model is degenerate.
    pub q: f64,
    pub clustering: ClusteringResult,
}

/// `‖L_τ − 𝓛̂_τ‖ / |σ̂_K|` at one `τ`.
///
/// For `TauPrime`, `θ̂` is re-estimated from the labels found at this `τ`. For
/// `TauDoublePrime`, the supplied `theta_hat` enters both the sample and the
/// fitted Laplacian.
pub fn q_criterion(
    a: &AdjacencyMatrix,
    k: usize,
    tau: f64,
    variant: Variant,
    theta_hat: Option<&[f64]>,
    config: &TuneConfig,
    seed: u64,
) -> Result<QEvaluation> {
    let spectral = SpectralConfig {
        variant,
        tau,
        algorithm: config.algorithm,
        kmeans: config.kmeans,
    };
    let clustering = spectral_cluster(a, k, &spectral, theta_hat, seed)?;
    let q = criterion_value(a, k, tau, variant, theta_hat, &clustering.labels)?;
    Ok(QEvaluation { tau, q, clustering })
}

fn criterion_value(
    a: &AdjacencyMatrix,
    k: usize,
    tau: f64,
    variant: Variant,
    theta_hat: Option<&[f64]>,
    labels: &[usize],
) -> Result<f64> {
    let fitted = match variant {
        Variant::Plain | Variant::Tau => PlugInModel::fit(a, labels, k, false),
        Variant::TauPrime => PlugInModel::fit(a, labels, k, true),
        Variant::TauDoublePrime => PlugInModel::fit(a, labels, k, false).map(|mut p| {
            p.theta_hat = theta_hat.map(<[f64]>::to_vec);
            p
        }),
    };
    let plug = match fitted {
        Ok(p) => p,
        Err(Error::EmptyCluster(_) | Error::ZeroCommunityDegree(_)) => return Ok(f64::INFINITY),
        Err(e) => return Err(e),
    };
    let sigma = plug_in_spectrum(&plug, tau, variant)?;
    let sigma_k = sigma.get(k - 1).map_or(0.0, |s| s.abs());
    if sigma_k < SIGMA_FLOOR {
        return Ok(f64::INFINITY);
    }
    let sample = laplacian_operator(a, variant, tau, theta_hat)?;
    let fitted = plug_in_operator(&plug, tau, variant)?;
    Ok(spectral_norm_op(&Difference::new(&sample, &fitted)?)? / sigma_k)
}

/// Grid search result.
#[derive(Clone, Debug, PartialEq)]
pub struct TauSelection {
    pub grid: TauGrid,
    pub tau_star: f64,
    pub best_index: usize,
    /// Evaluations in grid order.
    pub trace: Vec<QEvaluation>,
}

impl TauSelection {
    pub fn result(&self) -> &ClusteringResult {
        &self.trace[self.best_index].clustering
    }

    /// `(τ, Q)` pairs in grid order.
    pub fn curve(&self) -> Vec<(f64, f64)> {
        self.trace.iter().map(|e| (e.tau, e.q)).collect()
    }
}

/// Minimizes the criterion over the grid built from the sample average
/// degree. Ties go to the smaller `τ`.
#[allow(clippy::too_many_arguments)]
pub fn select_tau(
    a: &AdjacencyMatrix,
    k: usize,
    variant: Variant,
    theta_hat: Option<&[f64]>,
    config: &TuneConfig,
    seed: u64,
    exec: Exec,
) -> Result<TauSelection> {
    let grid = tau_grid(degrees(a).mean())?;
    let evals = exec.map(grid.values.len(), |idx| {
        q_criterion(a, k, grid.values[idx], variant, theta_hat, config, seed)
    });
    let trace = evals.into_iter().collect::<Result<Vec<_>>>()?;
    let best_index = argmin_finite(trace.iter().map(|e| e.q))?;
    Ok(TauSelection {
        tau_star: grid.values[best_index],
        grid,
        best_index,
        trace,
    })
}

/// First index of the smallest finite value.
fn argmin_finite(qs: impl IntoIterator<Item = f64>) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, q) in qs.into_iter().enumerate() {
        if q.is_finite() && best.is_none_or(|(_, b)| q < b) {
            best = Some((idx, q));
        }
    }
    best.map(|(idx, _)| idx).ok_or(Error::AllInfinite)
}

/// Two-stage degree-corrected procedure.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveResult {
    /// Selection on the degree-shift Laplacian.
    pub first: TauSelection,
    /// `θ̂` estimated from the first-stage labels.
    pub theta_hat: Vec<f64>,
    /// Selection on the `θ̂`-weighted Laplacian.
    pub second: TauSelection,
}

impl AdaptiveResult {
    pub fn result(&self) -> &ClusteringResult {
        self.second.result()
    }

    pub fn first_labels(&self) -> &[usize] {
        &self.first.result().labels
    }
}

pub fn adaptive_cluster(
    a: &AdjacencyMatrix,
    k: usize,
    config: &TuneConfig,
    seed: u64,
    exec: Exec,
) -> Result<AdaptiveResult> {
    let first = select_tau(a, k, Variant::TauPrime, None, config, seed, exec)?;
    adaptive_from_first_stage(a, k, first, config, seed, exec)
}

/// Completes the adaptive procedure from an existing first-stage selection.
pub fn adaptive_from_first_stage(
    a: &AdjacencyMatrix,
    k: usize,
    first: TauSelection,
    config: &TuneConfig,
    seed: u64,
    exec: Exec,
) -> Result<AdaptiveResult> {
    let theta_hat = estimate_theta(a, &first.result().labels, k)?;
    let second = select_tau(a, k, Variant::TauDoublePrime, Some(&theta_hat), config, seed, exec)?;
    Ok(AdaptiveResult {
        first,
        theta_hat,
        second,
    })
}
