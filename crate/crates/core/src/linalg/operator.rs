//! Symmetric linear operators applied without forming the matrix.

use super::eigen::{check_finite, eig_sym_leading, spectral_norm_dense, EigenDecomposition, BLOCK_LANCZOS_MIN_N, LANCZOS_MIN_N};
use super::matrix::SymMatrix;
use crate::error::{Error, Result};

/// A real symmetric operator on `R^n`.
pub trait SymOperator {
    fn dim(&self) -> usize;

    /// `ys[j] = M xs[j]` for every vector of the block.
    fn apply_block(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>>;

    fn to_dense(&self) -> SymMatrix;
}

impl SymOperator for SymMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply_block(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut ys = vec![vec![0.0; n]; xs.len()];
        // One pass over the rows for the whole block.
        for i in 0..n {
            let row = self.row(i);
            for (y, x) in ys.iter_mut().zip(xs) {
                y[i] = super::eigen::dot(row, x);
            }
        }
        ys
    }

    fn to_dense(&self) -> SymMatrix {
        self.clone()
    }
}

/// `A − B` for two operators of the same dimension.
pub struct Difference<'a, A: ?Sized, B: ?Sized> {
    a: &'a A,
    b: &'a B,
}

impl<'a, A: SymOperator + ?Sized, B: SymOperator + ?Sized> Difference<'a, A, B> {
    pub fn new(a: &'a A, b: &'a B) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch(format!("{} vs {}", a.dim(), b.dim())));
        }
        Ok(Self { a, b })
    }
}

impl<A: SymOperator + ?Sized, B: SymOperator + ?Sized> SymOperator for Difference<'_, A, B> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply_block(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut ys = self.a.apply_block(xs);
        for (y, z) in ys.iter_mut().zip(self.b.apply_block(xs)) {
            y.iter_mut().zip(z).for_each(|(u, v)| *u -= v);
        }
        ys
    }

    fn to_dense(&self) -> SymMatrix {
        let (a, b) = (self.a.to_dense(), self.b.to_dense());
        SymMatrix::from_lower(a.n(), |i, j| a.get(i, j) - b.get(i, j))
    }
}

fn check_values(values: &[f64]) -> Result<()> {
    match values.iter().position(|x| !x.is_finite()) {
        Some(row) => Err(Error::NonFinite { row, col: 0 }),
        None => Ok(()),
    }
}

/// Leading `k` eigenpairs (largest `|λ|`) of an operator. Iterative for
/// large operators, with a dense solve when the iteration does not settle.
pub fn eig_leading_op<M: SymOperator + ?Sized>(m: &M, k: usize) -> Result<EigenDecomposition> {
    let n = m.dim();
    let k = k.min(n);
    if n >= BLOCK_LANCZOS_MIN_N && 4 * k < n {
        if let Some((values, vectors)) = super::lanczos::block_leading(m, k)? {
            check_values(&values)?;
            return Ok(EigenDecomposition { values, vectors });
        }
    }
    eig_sym_leading(&m.to_dense(), k)
}

/// `max |λ|` of an operator.
pub fn spectral_norm_op<M: SymOperator + ?Sized>(m: &M) -> Result<f64> {
    if m.dim() > LANCZOS_MIN_N {
        if let Some(v) = super::lanczos::extreme_magnitude(m)? {
            check_values(&[v])?;
            return Ok(v);
        }
    }
    let dense = m.to_dense();
    check_finite(&dense)?;
    spectral_norm_dense(&dense)
}
