use super::matrix::Matrix;
use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-8;
const RANK_TOL: f64 = 1e-12;

/// Orthogonal `k × k` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthogonalMatrix(Matrix);

impl OrthogonalMatrix {
    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn k(&self) -> usize {
        self.0.rows()
    }
}

/// Thin singular value decomposition `M = U Σ Vᵀ` of a square matrix.
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

/// One-sided Jacobi SVD for small square matrices.
pub fn svd_small(m: &Matrix) -> Result<Svd> {
    let k = m.rows();
    if m.cols() != k {
        return Err(Error::DimensionMismatch("svd_small expects a square matrix".into()));
    }
    // Work on columns: W = M V converges to U Σ.
    let mut w = m.transpose(); // rows of `w` are columns of M
    let mut v = Matrix::identity(k); // rows of `v` are columns of V
    let cap = 64 * k * k.max(1);
    for _sweep in 0..cap {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let alpha: f64 = w.row(p).iter().map(|x| x * x).sum();
                let beta: f64 = w.row(q).iter().map(|x| x * x).sum();
                let gamma: f64 = w.row(p).iter().zip(w.row(q)).map(|(a, b)| a * b).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for j in 0..k {
                        let a = mat[(p, j)];
                        let b = mat[(q, j)];
                        mat[(p, j)] = c * a - s * b;
                        mat[(q, j)] = s * a + c * b;
                    }
                }
            }
        }
        if !rotated {
            let mut u = Matrix::zeros(k, k);
            let mut singular_values = vec![0.0; k];
            for j in 0..k {
                let norm = w.row(j).iter().map(|x| x * x).sum::<f64>().sqrt();
                singular_values[j] = norm;
                for i in 0..k {
                    u[(i, j)] = if norm > 0.0 { w[(j, i)] / norm } else { 0.0 };
                }
            }
            return Ok(Svd {
                u,
                singular_values,
                v: v.transpose(),
            });
        }
    }
    Err(Error::NoConvergence(cap))
}

/// Rotation aligning `u_hat` with `u`: with `Û ᵀU = Ū Σ̄ V̄ᵀ`, returns `Ō = Ū V̄ᵀ`,
/// so that `Û Ō ≈ U`.
pub fn orthogonal_align(u_hat: &Matrix, u: &Matrix) -> Result<OrthogonalMatrix> {
    if u_hat.rows() != u.rows() || u_hat.cols() != u.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            u_hat.rows(),
            u_hat.cols(),
            u.rows(),
            u.cols()
        )));
    }
    for m in [u_hat, u] {
        let defect = m.orthonormality_defect();
        if defect > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(defect));
        }
    }
    let cross = u_hat.transpose().matmul(u)?;
    let svd = svd_small(&cross)?;
    if let Some(&smallest) = svd
        .singular_values
        .iter()
        .min_by(|a, b| a.total_cmp(b))
    {
        if smallest < RANK_TOL {
            return Err(Error::RankDeficient(smallest));
        }
    }
    Ok(OrthogonalMatrix(svd.u.matmul(&svd.v.transpose())?))
}
