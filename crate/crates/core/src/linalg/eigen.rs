//! Dense symmetric eigensolvers.
//!
//! Matrices up to [`JACOBI_MAX_N`] use cyclic Jacobi rotations. Larger ones are
//! reduced to tridiagonal form with Householder reflections and diagonalized
//! with the implicit-shift QL iteration. When only a few leading eigenvectors
//! are needed, [`eig_sym_leading`] skips the full accumulation and recovers
//! them by inverse iteration on the tridiagonal matrix followed by a
//! back-transformation through the stored reflectors.
//!
//! Every routine returns eigenpairs ordered by descending `|λ|`, ties broken by
//! descending signed value and then by original position, and flips each
//! eigenvector so that its entry of largest magnitude (first one on ties) is
//! positive.

use super::matrix::{Matrix, SymMatrix};
use crate::error::{Error, Result};

/// Largest dimension handled by the Jacobi path in [`EigenMethod::Auto`].
pub const JACOBI_MAX_N: usize = 16;

/// Smallest order at which [`spectral_norm`] switches to Lanczos.
pub(crate) const LANCZOS_MIN_N: usize = 64;
pub(crate) const BLOCK_LANCZOS_MIN_N: usize = 200;

/// Relative off-diagonal threshold for the Jacobi sweeps.
const JACOBI_TOL: f64 = 1e-12;

/// Inverse-iteration solves per eigenvector.
const INVERSE_ITERATIONS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EigenMethod {
    /// Jacobi for `n <= 16`, tridiagonal QL otherwise.
    #[default]
    Auto,
    Jacobi,
    TridiagonalQl,
}

/// Eigenpairs of a symmetric matrix, ordered by descending `|λ|`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// `n × m` matrix; column `j` is paired with `values[j]`.
    pub vectors: Matrix,
}

impl EigenDecomposition {
    /// `V Λ Vᵀ`, only meaningful for a full decomposition.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.vectors.rows();
        let m = self.values.len();
        Matrix::from_fn(n, n, |i, j| {
            (0..m)
                .map(|k| self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)])
                .sum()
        })
    }

    /// The `k` leading eigenpairs.
    pub fn leading(&self, k: usize) -> EigenDecomposition {
        EigenDecomposition {
            values: self.values[..k.min(self.values.len())].to_vec(),
            vectors: self.vectors.leading_columns(k),
        }
    }
}

pub fn eig_sym(m: &SymMatrix) -> Result<EigenDecomposition> {
    eig_sym_with(m, EigenMethod::Auto)
}

pub fn eig_sym_with(m: &SymMatrix, method: EigenMethod) -> Result<EigenDecomposition> {
    check_finite(m)?;
    let n = m.n();
    if n == 0 {
        return Ok(EigenDecomposition {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    let use_jacobi = match method {
        EigenMethod::Auto => n <= JACOBI_MAX_N,
        EigenMethod::Jacobi => true,
        EigenMethod::TridiagonalQl => false,
    };
    // Unordered eigenvalues plus eigenvectors stored as rows.
    let (values, rows) = if use_jacobi {
        jacobi(m)?
    } else {
        let tri = tridiagonalize(m);
        let mut vt = tri.q_transpose();
        let mut d = tri.diag.clone();
        let mut e = tri.off.clone();
        tql2(&mut d, &mut e, Some(&mut vt))?;
        (d, vt)
    };
    let order = spectral_order(&values);
    let mut vectors = Matrix::zeros(n, n);
    let mut sorted = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        sorted.push(values[src]);
        let mut v = rows.row(src).to_vec();
        fix_sign(&mut v);
        for (i, x) in v.into_iter().enumerate() {
            vectors[(i, col)] = x;
        }
    }
    Ok(EigenDecomposition {
        values: sorted,
        vectors,
    })
}

/// The `k` eigenpairs of largest `|λ|`.
pub fn eig_sym_leading(m: &SymMatrix, k: usize) -> Result<EigenDecomposition> {
    check_finite(m)?;
    let n = m.n();
    let k = k.min(n);
    if n <= JACOBI_MAX_N || 4 * k >= n {
        return Ok(eig_sym(m)?.leading(k));
    }
    if n >= BLOCK_LANCZOS_MIN_N {
        if let Some((values, vectors)) = super::lanczos::block_leading(m, k)? {
            return Ok(EigenDecomposition { values, vectors });
        }
    }
    let tri = tridiagonalize(m);
    let mut d = tri.diag.clone();
    let mut e = tri.off.clone();
    tql2(&mut d, &mut e, None)?;
    let order = spectral_order(&d);
    let chosen: Vec<usize> = order[..k].to_vec();

    // Inverse iteration in ascending order of the chosen eigenvalues so that
    // near-degenerate groups are handled together.
    let mut by_value = chosen.clone();
    by_value.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let t_norm = tri.norm_inf();
    let ortho_tol = 1e-3 * t_norm;
    let perturb = 10.0 * f64::EPSILON * t_norm.max(f64::MIN_POSITIVE);
    let mut tri_vectors: Vec<(usize, Vec<f64>)> = Vec::with_capacity(k);
    let mut cluster_start = 0usize;
    let mut prev_shift = f64::NEG_INFINITY;
    let mut prev_value = f64::NEG_INFINITY;
    for (pos, &idx) in by_value.iter().enumerate() {
        let value = d[idx];
        if pos == 0 || value - prev_value > ortho_tol {
            cluster_start = pos;
        }
        let mut shift = value;
        if pos > 0 && shift - prev_shift < perturb {
            shift = prev_shift + perturb;
        }
        let cluster: Vec<&[f64]> = tri_vectors[cluster_start..]
            .iter()
            .map(|(_, v)| v.as_slice())
            .collect();
        let y = tridiagonal_inverse_iteration(&tri.diag, &tri.off, shift, &cluster, pos as u64, t_norm);
        tri_vectors.push((idx, y));
        prev_shift = shift;
        prev_value = value;
    }

    let mut vectors = Matrix::zeros(n, k);
    let mut values = Vec::with_capacity(k);
    for (col, &idx) in chosen.iter().enumerate() {
        values.push(d[idx]);
        let y = &tri_vectors
            .iter()
            .find(|(i, _)| *i == idx)
            .expect("every chosen eigenvalue has a vector")
            .1;
        let mut x = tri.apply_q(y);
        fix_sign(&mut x);
        for (i, v) in x.into_iter().enumerate() {
            vectors[(i, col)] = v;
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

/// All eigenvalues, ordered by descending `|λ|`.
pub fn eigenvalues_sym(m: &SymMatrix) -> Result<Vec<f64>> {
    check_finite(m)?;
    let n = m.n();
    if n == 0 {
        return Ok(Vec::new());
    }
    let values = if n <= JACOBI_MAX_N {
        jacobi(m)?.0
    } else {
        let tri = tridiagonalize(m);
        let mut d = tri.diag;
        let mut e = tri.off;
        tql2(&mut d, &mut e, None)?;
        d
    };
    Ok(spectral_order(&values).into_iter().map(|i| values[i]).collect())
}

/// Operator 2-norm, `max_j |λ_j|`.
///
/// Large matrices use Lanczos with full reorthogonalization and fall back to
/// the dense eigenvalue solver if it has not converged.
pub fn spectral_norm(m: &SymMatrix) -> Result<f64> {
    check_finite(m)?;
    if m.n() > LANCZOS_MIN_N {
        if let Some(v) = super::lanczos::extreme_magnitude(m)? {
            return Ok(v);
        }
    }
    spectral_norm_dense(m)
}

/// [`spectral_norm`] through the full eigenvalue solver.
pub fn spectral_norm_dense(m: &SymMatrix) -> Result<f64> {
    Ok(eigenvalues_sym(m)?.first().map_or(0.0, |v| v.abs()))
}

pub(crate) fn check_finite(m: &SymMatrix) -> Result<()> {
    let n = m.n();
    match m.as_slice().iter().position(|v| !v.is_finite()) {
        Some(pos) => Err(Error::NonFinite {
            row: pos / n,
            col: pos % n,
        }),
        None => Ok(()),
    }
}

/// Indices sorted by descending `|λ|`, then descending `λ`, then index.
pub(crate) fn spectral_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (values[a], values[b]);
        y.abs()
            .total_cmp(&x.abs())
            .then_with(|| y.total_cmp(&x))
            .then_with(|| a.cmp(&b))
    });
    idx
}

/// Makes the entry of largest magnitude positive; the first one wins ties.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

// ---------------------------------------------------------------------------
// Jacobi

/// Returns eigenvalues and eigenvectors as rows.
fn jacobi(m: &SymMatrix) -> Result<(Vec<f64>, Matrix)> {
    let n = m.n();
    let mut a = m.to_matrix();
    let mut v = Matrix::identity(n);
    let frob = a.frobenius_norm();
    let threshold = (JACOBI_TOL * frob).powi(2);
    let cap = 64 * n * n;
    let mut rotations = 0usize;
    loop {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)] * a[(p, q)])
            .sum();
        if off <= threshold || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                rotations += 1;
                if rotations > cap {
                    return Err(Error::NoConvergence(cap));
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[(i, i)]).collect();
    Ok((values, v.transpose()))
}

// ---------------------------------------------------------------------------
// Householder tridiagonalization

struct Reflector {
    start: usize,
    beta: f64,
    v: Vec<f64>,
}

impl Reflector {
    /// `x ← (I − β v vᵀ) x` on the trailing block.
    #[inline]
    fn apply(&self, x: &mut [f64]) {
        let tail = &mut x[self.start..];
        let s = self.beta * dot(&self.v, tail);
        axpy(tail, -s, &self.v);
    }
}

pub(crate) struct Tridiagonal {
    diag: Vec<f64>,
    /// `off[i] = T[i+1][i]`; the last entry is zero.
    off: Vec<f64>,
    reflectors: Vec<Reflector>,
}

impl Tridiagonal {
    fn norm_inf(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let below = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                self.diag[i].abs() + self.off[i].abs() + below
            })
            .fold(0.0, f64::max)
    }

    /// `Q y` for the orthogonal `Q` with `A = Q T Qᵀ`.
    fn apply_q(&self, y: &[f64]) -> Vec<f64> {
        let mut x = y.to_vec();
        for r in self.reflectors.iter().rev() {
            r.apply(&mut x);
        }
        x
    }

    /// `Qᵀ` as a dense matrix (rows are the columns of `Q`).
    fn q_transpose(&self) -> Matrix {
        let n = self.diag.len();
        let mut z = Matrix::identity(n);
        // Qᵀ = H_m ⋯ H_0, built by right-multiplying from H_m down to H_0.
        for r in self.reflectors.iter().rev() {
            for row in r.start..n {
                let tail = &mut z.row_mut(row)[r.start..];
                let s = r.beta * dot(tail, &r.v);
                if s != 0.0 {
                    axpy(tail, -s, &r.v);
                }
            }
        }
        z
    }
}

pub(crate) fn tridiagonalize(m: &SymMatrix) -> Tridiagonal {
    let n = m.n();
    let mut a = m.as_slice().to_vec();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let s = k + 1;
        let len = n - s;
        diag[k] = a[k * n + k];
        let mut v: Vec<f64> = (0..len).map(|i| a[(s + i) * n + k]).collect();
        let sigma: f64 = v[1..].iter().map(|x| x * x).sum();
        if sigma == 0.0 {
            off[k] = v[0];
            continue;
        }
        let x0 = v[0];
        let norm = (x0 * x0 + sigma).sqrt();
        let alpha = if x0 > 0.0 { -norm } else { norm };
        v[0] = x0 - alpha;
        let beta = 2.0 / (v[0] * v[0] + sigma);
        off[k] = alpha;

        // p = β A₂₂ v using the lower triangle only.
        let p = &mut p[..len];
        p.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..len {
            let base = (s + i) * n + s;
            let row = &a[base..base + i + 1];
            let vi = v[i];
            let acc = dot(&row[..i], &v[..i]) + row[i] * vi;
            axpy(&mut p[..i], vi, &row[..i]);
            p[i] += acc;
        }
        p.iter_mut().for_each(|x| *x *= beta);
        let kappa = 0.5 * beta * dot(p, &v);
        // w = p − κ v, stored in p.
        axpy(p, -kappa, &v);

        // A₂₂ ← A₂₂ − v wᵀ − w vᵀ on the lower triangle.
        for i in 0..len {
            let base = (s + i) * n + s;
            let row = &mut a[base..base + i + 1];
            let (vi, wi) = (v[i], p[i]);
            for ((r, &vj), &wj) in row.iter_mut().zip(&v[..=i]).zip(&p[..=i]) {
                *r -= vi * wj + wi * vj;
            }
        }
        reflectors.push(Reflector { start: s, beta, v });
    }
    match n {
        0 => {}
        1 => diag[0] = a[0],
        _ => {
            diag[n - 2] = a[(n - 2) * n + (n - 2)];
            diag[n - 1] = a[(n - 1) * n + (n - 1)];
            off[n - 2] = a[(n - 1) * n + (n - 2)];
        }
    }
    Tridiagonal {
        diag,
        off,
        reflectors,
    }
}

// ---------------------------------------------------------------------------
// Implicit QL

/// Symmetric tridiagonal QL with implicit shifts (EISPACK `tql2`).
///
/// `e[i]` couples `d[i]` and `d[i+1]`; `e[n-1]` must be zero. When `vt` is
/// given its rows are rotated alongside, so passing `Qᵀ` yields the
/// eigenvectors of the original matrix as rows.
pub(crate) fn tql2(d: &mut [f64], e: &mut [f64], mut vt: Option<&mut Matrix>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let cap = 64 * n * n;
    let mut total = 0usize;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                total += 1;
                if total > cap {
                    return Err(Error::NoConvergence(cap));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = vt.as_deref_mut() {
                        rotate_rows(v, i, c, s);
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// `(row_i, row_{i+1}) ← (c row_i − s row_{i+1}, s row_i + c row_{i+1})`.
#[inline]
fn rotate_rows(v: &mut Matrix, i: usize, c: f64, s: f64) {
    let (upper, lower) = v.adjacent_rows_mut(i);
    for (a, b) in upper.iter_mut().zip(lower.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

// ---------------------------------------------------------------------------
// Inverse iteration on a tridiagonal matrix

/// LU factorization of `T − λI` with partial pivoting (LAPACK `dlagtf` layout).
struct TridiagonalLu {
    u1: Vec<f64>,
    u2: Vec<f64>,
    u3: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(diag: &[f64], off: &[f64], shift: f64, tiny: f64) -> Self {
        let n = diag.len();
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut u3 = vec![0.0; n];
        let mut mult = vec![0.0; n];
        let mut swapped = vec![false; n];
        let mut cur_diag = diag[0] - shift;
        let mut cur_sup = if n > 1 { off[0] } else { 0.0 };
        for i in 0..n.saturating_sub(1) {
            let below = off[i];
            let next_diag = diag[i + 1] - shift;
            let next_sup = if i + 2 < n { off[i + 1] } else { 0.0 };
            if cur_diag.abs() >= below.abs() {
                let m = if cur_diag == 0.0 { 0.0 } else { below / cur_diag };
                u1[i] = cur_diag;
                u2[i] = cur_sup;
                u3[i] = 0.0;
                mult[i] = m;
                cur_diag = next_diag - m * cur_sup;
                cur_sup = next_sup;
            } else {
                let m = cur_diag / below;
                swapped[i] = true;
                u1[i] = below;
                u2[i] = next_diag;
                u3[i] = next_sup;
                mult[i] = m;
                cur_diag = cur_sup - m * next_diag;
                cur_sup = -m * next_sup;
            }
        }
        u1[n - 1] = cur_diag;
        for u in &mut u1 {
            if u.abs() < tiny {
                *u = if *u < 0.0 { -tiny } else { tiny };
            }
        }
        Self {
            u1,
            u2,
            u3,
            mult,
            swapped,
        }
    }

    fn solve(&self, y: &mut [f64]) {
        let n = y.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let top = y[i];
                y[i] = y[i + 1];
                y[i + 1] = top - self.mult[i] * y[i];
            } else {
                y[i + 1] -= self.mult[i] * y[i];
            }
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            if i + 1 < n {
                acc -= self.u2[i] * y[i + 1];
            }
            if i + 2 < n {
                acc -= self.u3[i] * y[i + 2];
            }
            y[i] = acc / self.u1[i];
        }
    }
}

fn tridiagonal_inverse_iteration(
    diag: &[f64],
    off: &[f64],
    shift: f64,
    cluster: &[&[f64]],
    salt: u64,
    t_norm: f64,
) -> Vec<f64> {
    let n = diag.len();
    let tiny = f64::EPSILON * t_norm.max(f64::MIN_POSITIVE);
    let lu = TridiagonalLu::factor(diag, off, shift, tiny);
    // Deterministic pseudo-random start vector.
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ salt.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let mut x: Vec<f64> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    normalize(&mut x);
    for _ in 0..INVERSE_ITERATIONS {
        lu.solve(&mut x);
        for q in cluster {
            let s = dot(&x, q);
            axpy(&mut x, -s, q);
        }
        if !normalize(&mut x) {
            // Degenerate solve; restart from a unit vector.
            x.iter_mut().for_each(|v| *v = 0.0);
            x[(salt as usize) % n] = 1.0;
        }
    }
    x
}

fn normalize(x: &mut [f64]) -> bool {
    let norm = dot(x, x).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    true
}

// ---------------------------------------------------------------------------
// Kernels

/// Dot product with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y ← y + alpha x`.
#[inline]
pub(crate) fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
