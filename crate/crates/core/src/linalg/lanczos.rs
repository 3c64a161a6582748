//! Lanczos iterations: largest eigenvalue magnitude and leading eigenpairs.

use super::eigen::{axpy, dot, tql2};
use super::matrix::{Matrix, SymMatrix};
use super::operator::SymOperator;
use crate::error::Result;

/// Ritz residual bound, relative to the estimate, accepted as converged.
const RESIDUAL_TOL: f64 = 1e-10;
const CHECK_EVERY: usize = 4;
const MAX_STEPS: usize = 160;

/// `max |λ|` of `m`, or `None` when Lanczos does not converge within its step
/// budget. The start vector is deterministic.
pub(crate) fn extreme_magnitude<M: SymOperator + ?Sized>(m: &M) -> Result<Option<f64>> {
    let n = m.dim();
    let steps = MAX_STEPS.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut q = start_vector(n);
    for j in 0..steps {
        let mut w = m.apply_block(std::slice::from_ref(&q)).pop().expect("one image");
        let a = dot(&w, &q);
        alpha.push(a);
        // Full reorthogonalization, applied twice for stability.
        basis.push(q.clone());
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                axpy(&mut w, -c, v);
            }
        }
        let b = dot(&w, &w).sqrt();
        let last = j + 1 == steps;
        if (j + 1) % CHECK_EVERY == 0 || last || b == 0.0 {
            if let Some(v) = ritz_estimate(&alpha, &beta, b, b == 0.0 || j + 1 == n)? {
                return Ok(Some(v));
            }
        }
        if b == 0.0 {
            // Invariant subspace exhausted; the Ritz values are exact.
            return ritz_estimate(&alpha, &beta, 0.0, true);
        }
        beta.push(b);
        q = w.iter().map(|x| x / b).collect();
    }
    Ok(None)
}

/// Largest Ritz magnitude if its residual bound `b |s_last|` is small enough.
fn ritz_estimate(alpha: &[f64], beta: &[f64], b: f64, exact: bool) -> Result<Option<f64>> {
    let j = alpha.len();
    let mut d = alpha.to_vec();
    let mut e: Vec<f64> = beta.iter().copied().chain(std::iter::once(0.0)).collect();
    e.truncate(j);
    let mut vt = Matrix::identity(j);
    tql2(&mut d, &mut e, Some(&mut vt))?;
    let (idx, val) = d
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .map(|(i, v)| (i, v.abs()))
        .expect("non-empty");
    if exact {
        return Ok(Some(val));
    }
    let residual = b * vt[(idx, j - 1)].abs();
    Ok((residual <= RESIDUAL_TOL * val.max(f64::MIN_POSITIVE)).then_some(val))
}

fn start_vector(n: usize) -> Vec<f64> {
    let mut state = 0x2545_F491_4F6C_DD1Du64;
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// Block size beyond `k`; the block must be at least as large as any
/// eigenvalue multiplicity that has to be resolved among the leading pairs.
const BLOCK_EXTRA: usize = 2;
/// Residual `‖A y − θ y‖` accepted relative to the largest `|θ|`.
const BLOCK_RESIDUAL_TOL: f64 = 1e-10;
const BLOCK_MAX_BASIS: usize = 360;

/// Leading `k` eigenpairs by block Lanczos with full reorthogonalization and
/// explicit Rayleigh-Ritz. Returns `None` when the residuals have not dropped
/// below tolerance before the basis budget is exhausted.
pub(crate) fn block_leading<M: SymOperator + ?Sized>(m: &M, k: usize) -> Result<Option<(Vec<f64>, Matrix)>> {
    let n = m.dim();
    let b = (k + BLOCK_EXTRA).min(n);
    let cap = BLOCK_MAX_BASIS.min(n / 2);
    if b == 0 || cap < 3 * b {
        return Ok(None);
    }
    let mut gen = XorShift::new(0x9E37_79B9_7F4A_7C15 ^ n as u64);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(cap + b);
    let mut w: Vec<Vec<f64>> = Vec::with_capacity(cap + b);
    let mut block: Vec<Vec<f64>> = Vec::with_capacity(b);
    while block.len() < b {
        if let Some(v) = orthonormal_against(gen.vector(n), &q, &block) {
            block.push(v);
        }
    }
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut next_check = 3 * b;
    loop {
        // Extend the basis with the current block and its image.
        let images = m.apply_block(&block);
        for (v, av) in block.drain(..).zip(images) {
            let col: Vec<f64> = q.iter().map(|qi| dot(qi, &av)).chain(std::iter::once(dot(&v, &av))).collect();
            for (row, &c) in h.iter_mut().zip(&col) {
                row.push(c);
            }
            h.push(col);
            q.push(v);
            w.push(av);
        }
        let size = q.len();
        if size >= next_check {
            next_check = size + (size / 4).max(b);
            if let Some(found) = ritz_pairs(&h, &q, &w, k)? {
                return Ok(Some(found));
            }
        }
        if size + b > cap {
            return Ok(None);
        }
        // Next block: images of the newest block, orthogonalized against the basis.
        let newest: Vec<Vec<f64>> = w[size - b..].to_vec();
        for cand in newest {
            let v = orthonormal_against(cand, &q, &block).or_else(|| {
                // Krylov breakdown: continue with a fresh direction.
                orthonormal_against(gen.vector(n), &q, &block)
            });
            if let Some(v) = v {
                block.push(v);
            }
        }
        if block.is_empty() {
            return Ok(None);
        }
    }
}

/// Rayleigh-Ritz on the basis; `Some` when the `k` leading Ritz pairs have converged.
fn ritz_pairs(h: &[Vec<f64>], q: &[Vec<f64>], w: &[Vec<f64>], k: usize) -> Result<Option<(Vec<f64>, Matrix)>> {
    let size = q.len();
    let n = q[0].len();
    // Symmetrize against rounding in the projected matrix.
    let hm = SymMatrix::from_lower(size, |i, j| 0.5 * (h[i][j] + h[j][i]));
    let dec = super::eigen::eig_sym(&hm)?;
    let scale = dec.values.first().map_or(0.0, |v| v.abs()).max(f64::MIN_POSITIVE);
    let mut vectors = Matrix::zeros(n, k);
    for j in 0..k {
        let theta = dec.values[j];
        let mut y = vec![0.0; n];
        let mut r = vec![0.0; n];
        for (t, (qt, wt)) in q.iter().zip(w).enumerate() {
            let s = dec.vectors[(t, j)];
            if s != 0.0 {
                axpy(&mut y, s, qt);
                axpy(&mut r, s, wt);
            }
        }
        axpy(&mut r, -theta, &y);
        if dot(&r, &r).sqrt() > BLOCK_RESIDUAL_TOL * scale {
            return Ok(None);
        }
        let norm = dot(&y, &y).sqrt();
        y.iter_mut().for_each(|x| *x /= norm);
        super::eigen::fix_sign(&mut y);
        for (i, x) in y.into_iter().enumerate() {
            vectors[(i, j)] = x;
        }
    }
    Ok(Some((dec.values[..k].to_vec(), vectors)))
}

/// Two passes of Gram-Schmidt against `basis` and `extra`; `None` if little is left.
fn orthonormal_against(mut v: Vec<f64>, basis: &[Vec<f64>], extra: &[Vec<f64>]) -> Option<Vec<f64>> {
    let before = dot(&v, &v).sqrt();
    if before == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for u in basis.iter().chain(extra) {
            let c = dot(&v, u);
            axpy(&mut v, -c, u);
        }
    }
    let after = dot(&v, &v).sqrt();
    if after <= 1e-8 * before {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= after);
    Some(v)
}

struct XorShift(u64);

impl XorShift {
    fn new(seed: u64) -> Self {
        Self(seed | 1)
    }

    fn vector(&mut self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                self.0 ^= self.0 << 13;
                self.0 ^= self.0 >> 7;
                self.0 ^= self.0 << 17;
                (self.0 >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }
}
