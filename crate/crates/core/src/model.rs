//! Block models, memberships and their population quantities.

use crate::error::{Error, Result};
use crate::laplacian::Variant;
use crate::linalg::{eig_sym, eig_sym_leading, Matrix, SymMatrix};

/// Relative tolerance for the per-community `θ` normalization.
const THETA_NORM_TOL: f64 = 1e-9;

/// Community assignment `g_i ∈ {0, …, K−1}` with every community non-empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Membership {
    labels: Vec<usize>,
    k: usize,
}

impl Membership {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        let mut counts = vec![0usize; k];
        for &g in &labels {
            if g >= k {
                return Err(Error::InvalidModel(format!("label {g} out of range for K={k}")));
            }
            counts[g] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyCluster(empty));
        }
        Ok(Self { labels, k })
    }

    /// Nodes `0..sizes[0]` in community 0, the next `sizes[1]` in community 1, and so on.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(g, &s)| std::iter::repeat_n(g, s))
            .collect();
        Self::new(labels, sizes.len())
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.k];
        for &g in &self.labels {
            counts[g] += 1;
        }
        counts
    }
}

/// `K × K` block probability matrix with community sizes and optional degree
/// parameters `θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockModel {
    b: Matrix,
    sizes: Vec<usize>,
    theta: Option<Vec<f64>>,
}

impl BlockModel {
    pub fn new(b: Matrix, sizes: Vec<usize>, theta: Option<Vec<f64>>) -> Result<Self> {
        let k = b.rows();
        if k == 0 || b.cols() != k {
            return Err(Error::InvalidModel("block matrix must be square and non-empty".into()));
        }
        if sizes.len() != k {
            return Err(Error::InvalidModel(format!("{} sizes for K={k}", sizes.len())));
        }
        if let Some(c) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::EmptyCluster(c));
        }
        for i in 0..k {
            for j in 0..k {
                let v = b[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::ProbOutOfRange { row: i, col: j, value: v });
                }
                if (v - b[(j, i)]).abs() > 0.0 {
                    return Err(Error::InvalidModel("block matrix is not symmetric".into()));
                }
            }
        }
        let n: usize = sizes.iter().sum();
        if let Some(t) = &theta {
            if t.len() != n {
                return Err(Error::InvalidModel(format!("{} theta values for n={n}", t.len())));
            }
            if t.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(Error::InvalidModel("theta must be positive".into()));
            }
        }
        Ok(Self { b, sizes, theta })
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn theta(&self) -> Option<&[f64]> {
        self.theta.as_deref()
    }

    /// `θ_i`, or 1 without degree correction.
    fn theta_at(&self, i: usize) -> f64 {
        self.theta.as_ref().map_or(1.0, |t| t[i])
    }

    /// The membership implied by the sizes, with nodes grouped contiguously.
    pub fn contiguous_membership(&self) -> Membership {
        Membership::contiguous(&self.sizes).expect("sizes validated at construction")
    }
}

/// Checks that `membership` matches `model` and that `θ` sums to `n_k` in every community.
pub fn check_pair(model: &BlockModel, membership: &Membership) -> Result<()> {
    if membership.k() != model.k() || membership.n() != model.n() {
        return Err(Error::DimensionMismatch(format!(
            "membership (n={}, K={}) vs model (n={}, K={})",
            membership.n(),
            membership.k(),
            model.n(),
            model.k()
        )));
    }
    if membership.sizes() != model.sizes() {
        return Err(Error::InvalidModel("community sizes disagree with the membership".into()));
    }
    if let Some(theta) = model.theta() {
        let mut sums = vec![0.0; model.k()];
        for (i, &g) in membership.labels().iter().enumerate() {
            sums[g] += theta[i];
        }
        for (g, (&s, &nk)) in sums.iter().zip(model.sizes()).enumerate() {
            if (s - nk as f64).abs() > THETA_NORM_TOL * nk as f64 {
                return Err(Error::InvalidModel(format!(
                    "theta sums to {s} in community {g}, expected {nk}"
                )));
            }
        }
    }
    Ok(())
}

/// `P = Θ Z B Zᵀ Θ` (Θ = I without degree correction), diagonal included.
pub fn edge_prob_matrix(model: &BlockModel, membership: &Membership) -> Result<SymMatrix> {
    check_pair(model, membership)?;
    let g = membership.labels();
    let n = g.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let ti = model.theta_at(i);
        for j in 0..=i {
            let p = ti * model.theta_at(j) * model.b[(g[i], g[j])];
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbOutOfRange { row: i, col: j, value: p });
            }
            data[i * n + j] = p;
            data[j * n + i] = p;
        }
    }
    SymMatrix::new(n, data)
}

/// Degree-normalized block structure: `W_k = Σ_l B_kl π_l`,
/// `B0 = D_B^{-1/2} B D_B^{-1/2}` and `π_k = n_k / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockNormalization {
    pub w: Vec<f64>,
    pub b0: Matrix,
    pub pi: Vec<f64>,
}

pub fn normalized_block_matrix(model: &BlockModel) -> Result<BlockNormalization> {
    normalize_blocks(model.b(), model.sizes())
}

fn normalize_blocks(b: &Matrix, sizes: &[usize]) -> Result<BlockNormalization> {
    let k = sizes.len();
    let n: usize = sizes.iter().sum();
    let pi: Vec<f64> = sizes.iter().map(|&s| s as f64 / n as f64).collect();
    let w: Vec<f64> = (0..k).map(|a| (0..k).map(|l| b[(a, l)] * pi[l]).sum()).collect();
    if let Some(c) = w.iter().position(|&x| x <= 0.0) {
        return Err(Error::DegenerateBlock(c));
    }
    let b0 = Matrix::from_fn(k, k, |a, l| b[(a, l)] / (w[a] * w[l]).sqrt());
    Ok(BlockNormalization { w, b0, pi })
}

/// Population Laplacian of the given variant.
///
/// Expected degrees `d_i = Σ_j P_ij` include the diagonal term.
pub fn population_laplacian(
    model: &BlockModel,
    membership: &Membership,
    tau: f64,
    variant: Variant,
) -> Result<SymMatrix> {
    check_tau(tau)?;
    let p = edge_prob_matrix(model, membership)?;
    let n = p.n();
    let nf = n as f64;
    let (adj, deg) = match variant {
        Variant::Plain => {
            let d = p.row_sums();
            (p, d)
        }
        Variant::Tau | Variant::TauDoublePrime => {
            let weights: Vec<f64> = match variant {
                Variant::Tau => vec![1.0; n],
                _ => (0..n).map(|i| model.theta_at(i)).collect(),
            };
            let reg = SymMatrix::from_lower(n, |i, j| p.get(i, j) + tau * weights[i] * weights[j] / nf);
            let d = reg.row_sums();
            (reg, d)
        }
        Variant::TauPrime => {
            let d = p.row_sums().into_iter().map(|d| d + tau).collect();
            (p, d)
        }
    };
    if let Some(node) = deg.iter().position(|&d| d <= 0.0) {
        return Err(Error::SingularDegree { node });
    }
    let s: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    Ok(SymMatrix::from_lower(n, |i, j| adj.get(i, j) * s[i] * s[j]))
}

/// Block reduction of a population Laplacian: `𝓛 = n⁻¹ Θ_e^{1/2} Z B0 Zᵀ Θ_e^{1/2}`.
struct Reduction {
    b0: Matrix,
    /// Effective degree weight per node.
    node_weight: Vec<f64>,
    /// `Σ_{i ∈ C_k} node_weight_i / n`.
    mass: Vec<f64>,
}

fn reduction(
    model: &BlockModel,
    membership: &Membership,
    tau: f64,
    variant: Variant,
) -> Result<Option<Reduction>> {
    check_pair(model, membership)?;
    check_tau(tau)?;
    let n = model.n();
    let nf = n as f64;
    let k = model.k();
    let shift = match variant {
        Variant::Tau | Variant::TauDoublePrime => tau / nf,
        Variant::Plain | Variant::TauPrime => 0.0,
    };
    if variant == Variant::Tau && model.theta().is_some_and(|t| t.iter().any(|&x| x != 1.0)) {
        // A flat ridge on a degree-corrected model breaks the block structure.
        return Ok(None);
    }
    let b_eff = Matrix::from_fn(k, k, |a, l| model.b[(a, l)] + shift);
    let norm = normalize_blocks(&b_eff, model.sizes())?;
    let g = membership.labels();
    let node_weight: Vec<f64> = (0..n)
        .map(|i| {
            let theta = model.theta_at(i);
            if variant == Variant::TauPrime {
                let d = nf * theta * theta_free_degree(&norm, g[i]);
                theta * d / (d + tau)
            } else {
                theta
            }
        })
        .collect();
    let mut mass = vec![0.0; k];
    for (i, &gi) in g.iter().enumerate() {
        mass[gi] += node_weight[i] / nf;
    }
    Ok(Some(Reduction { b0: norm.b0, node_weight, mass }))
}

fn theta_free_degree(norm: &BlockNormalization, community: usize) -> f64 {
    norm.w[community]
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Config(format!("tau must be finite and non-negative, got {tau}")));
    }
    Ok(())
}

impl Reduction {
    fn core(&self) -> SymMatrix {
        let k = self.mass.len();
        SymMatrix::from_lower(k, |a, l| self.mass[a].sqrt() * self.b0[(a, l)] * self.mass[l].sqrt())
    }
}

/// The `K` nonzero eigenvalues of the population Laplacian, by descending `|λ|`.
pub fn population_spectrum(
    model: &BlockModel,
    membership: &Membership,
    tau: f64,
    variant: Variant,
) -> Result<Vec<f64>> {
    match reduction(model, membership, tau, variant)? {
        Some(r) => Ok(eig_sym(&r.core())?.values),
        None => {
            let l = population_laplacian(model, membership, tau, variant)?;
            Ok(eig_sym_leading(&l, model.k())?.values)
        }
    }
}

/// Leading `K` population eigenvectors (`n × K`, columns ordered like
/// [`population_spectrum`]).
///
/// With block structure they are `Θ_e^{1/2} Z (Zᵀ Θ_e Z)^{-1/2} S` where `S`
/// diagonalizes the `K × K` core.
pub fn population_eigenvectors(
    model: &BlockModel,
    membership: &Membership,
    tau: f64,
    variant: Variant,
) -> Result<(Vec<f64>, Matrix)> {
    match reduction(model, membership, tau, variant)? {
        Some(r) => {
            let dec = eig_sym(&r.core())?;
            let n = model.n();
            let nf = n as f64;
            let g = membership.labels();
            let k = model.k();
            let u = Matrix::from_fn(n, k, |i, j| {
                (r.node_weight[i] / (nf * r.mass[g[i]])).sqrt() * dec.vectors[(g[i], j)]
            });
            Ok((dec.values, u))
        }
        None => {
            let l = population_laplacian(model, membership, tau, variant)?;
            let dec = eig_sym_leading(&l, model.k())?;
            Ok((dec.values, dec.vectors))
        }
    }
}

/// Population quantities for one variant and `τ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationSummary {
    /// Block normalization of the effective block matrix (`B`, or `B + τ/n`
    /// for the ridge variants).
    pub normalization: BlockNormalization,
    /// Nonzero eigenvalues, descending `|λ|`.
    pub sigma: Vec<f64>,
    /// Expected degrees `d_i` (diagonal included, unregularized).
    pub degrees: Vec<f64>,
    /// `θ_i^τ = θ_i d_i / (d_i + τ)` for the degree-shift variant.
    pub theta_tau: Option<Vec<f64>>,
    /// `n_k^τ = Σ_{i∈C_k} θ_i^τ` for the degree-shift variant.
    pub n_tau: Option<Vec<f64>>,
}

pub fn population_summary(
    model: &BlockModel,
    membership: &Membership,
    tau: f64,
    variant: Variant,
) -> Result<PopulationSummary> {
    let p = edge_prob_matrix(model, membership)?;
    let shift = match variant {
        Variant::Tau | Variant::TauDoublePrime => tau / model.n() as f64,
        _ => 0.0,
    };
    let k = model.k();
    let b_eff = Matrix::from_fn(k, k, |a, l| model.b[(a, l)] + shift);
    let normalization = normalize_blocks(&b_eff, model.sizes())?;
    let sigma = population_spectrum(model, membership, tau, variant)?;
    let degrees = p.row_sums();
    let (theta_tau, n_tau) = if variant == Variant::TauPrime {
        let tt: Vec<f64> = degrees
            .iter()
            .enumerate()
            .map(|(i, &d)| model.theta_at(i) * d / (d + tau))
            .collect();
        let mut nt = vec![0.0; k];
        for (i, &g) in membership.labels().iter().enumerate() {
            nt[g] += tt[i];
        }
        (Some(tt), Some(nt))
    } else {
        (None, None)
    };
    Ok(PopulationSummary {
        normalization,
        sigma,
        degrees,
        theta_tau,
        n_tau,
    })
}

/// Quantities entering the consistency conditions.
///
/// The balance and degree-growth conditions involve unspecified constants, so
/// they are reported rather than judged. `full_rank` is a structural verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    /// Smallest expected degree excluding the self-loop term, plus the
    /// variant's regularization.
    pub mu_n: f64,
    /// `max(max_kl B0_kl, 1)` of the effective normalized block matrix.
    pub rho_n: f64,
    /// `|σ_K|`.
    pub sigma_k: f64,
    /// Error-rate bound; `None` when `σ_K = 0`.
    pub eta_n: Option<f64>,
    /// `min_k n_k⁻¹ Σ_{i∈C_k} d_i`.
    pub m_bar_min: f64,
    /// `min_k n_k K / n` and `max_k n_k K / n`.
    pub balance_min: f64,
    pub balance_max: f64,
    pub full_rank: bool,
}

pub fn assumption_report(
    model: &BlockModel,
    membership: &Membership,
    tau: f64,
    variant: Variant,
) -> Result<AssumptionReport> {
    let summary = population_summary(model, membership, tau, variant)?;
    let p = edge_prob_matrix(model, membership)?;
    let n = model.n();
    let k = model.k();
    let nf = n as f64;
    let mu_n = (0..n)
        .map(|i| {
            let base = summary.degrees[i] - p.get(i, i);
            base + match variant {
                Variant::Plain => 0.0,
                Variant::Tau | Variant::TauPrime => tau,
                Variant::TauDoublePrime => tau * model.theta_at(i),
            }
        })
        .fold(f64::INFINITY, f64::min);
    let b0 = &summary.normalization.b0;
    let rho_n = b0.as_slice().iter().copied().fold(1.0, f64::max);
    let sigma_k = summary.sigma.last().map_or(0.0, |s| s.abs());
    let b0_vals = eig_sym(&SymMatrix::from_lower(k, |a, l| b0[(a, l)]))?.values;
    let top = b0_vals.first().map_or(0.0, |v| v.abs());
    let full_rank = b0_vals.iter().all(|v| v.abs() > 1e-10 * top) && top > 0.0;
    let (t_min, t_max) = model.theta().map_or((1.0, 1.0), |t| {
        t.iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    });
    let eta_n = (full_rank && sigma_k > 0.0).then(|| {
        let ln = nf.ln();
        let lead = rho_n * ln.sqrt() / (mu_n.sqrt() * sigma_k * sigma_k);
        let inner = (1.0 / k as f64 + 5f64.ln() / ln).sqrt() * rho_n.sqrt() * (t_max / t_min).powf(0.25);
        lead * (inner + rho_n + 1.0)
    });
    let mut deg_sum = vec![0.0; k];
    for (i, &g) in membership.labels().iter().enumerate() {
        deg_sum[g] += summary.degrees[i];
    }
    let m_bar_min = deg_sum
        .iter()
        .zip(model.sizes())
        .map(|(s, &nk)| s / nk as f64)
        .fold(f64::INFINITY, f64::min);
    let balance: Vec<f64> = model.sizes().iter().map(|&s| s as f64 * k as f64 / nf).collect();
    Ok(AssumptionReport {
        mu_n,
        rho_n,
        sigma_k,
        eta_n,
        m_bar_min,
        balance_min: balance.iter().copied().fold(f64::INFINITY, f64::min),
        balance_max: balance.iter().copied().fold(0.0, f64::max),
        full_rank,
    })
}
