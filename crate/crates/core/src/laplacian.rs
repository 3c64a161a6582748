//! Sample degrees and the four graph Laplacian variants.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;
use crate::linalg::{SymMatrix, SymOperator};

/// Laplacian variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `D^{-1/2} A D^{-1/2}`.
    Plain,
    /// `A_τ = A + τ J_n`, `J_n = ιιᵀ/n`, normalized by its own row sums.
    Tau,
    /// `D_τ^{-1/2} A D_τ^{-1/2}` with `D_τ = D + τ I`.
    TauPrime,
    /// `A + τ n⁻¹ Θ̂ιιᵀΘ̂`, normalized by its own row sums.
    TauDoublePrime,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Plain,
        Variant::Tau,
        Variant::TauPrime,
        Variant::TauDoublePrime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Tau => "tau",
            Variant::TauPrime => "tau_prime",
            Variant::TauDoublePrime => "tau_dprime",
        }
    }

    /// Whether embeddings are row-normalized before clustering.
    pub fn degree_corrected(self) -> bool {
        matches!(self, Variant::TauPrime | Variant::TauDoublePrime)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown Laplacian variant `{s}`")))
    }
}

/// Observed node degrees.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeVector {
    pub d_hat: Vec<usize>,
}

impl DegreeVector {
    pub fn min(&self) -> usize {
        self.d_hat.iter().copied().min().unwrap_or(0)
    }

    pub fn max(&self) -> usize {
        self.d_hat.iter().copied().max().unwrap_or(0)
    }

    /// Average degree `d̄`.
    pub fn mean(&self) -> f64 {
        if self.d_hat.is_empty() {
            return 0.0;
        }
        self.d_hat.iter().sum::<usize>() as f64 / self.d_hat.len() as f64
    }

    pub fn first_isolated(&self) -> Option<usize> {
        self.d_hat.iter().position(|&d| d == 0)
    }
}

pub fn degrees(a: &AdjacencyMatrix) -> DegreeVector {
    DegreeVector {
        d_hat: (0..a.n()).map(|i| a.degree(i)).collect(),
    }
}

/// Builds the sample Laplacian.
///
/// For `TauDoublePrime`, a node with `θ̂_i = 0` (an isolated node under the
/// usual estimator) receives no regularization; if its regularized degree is
/// zero its row and column are set to zero rather than failing.
pub fn build_laplacian(
    a: &AdjacencyMatrix,
    variant: Variant,
    tau: f64,
    theta_hat: Option<&[f64]>,
) -> Result<SymMatrix> {
    Ok(laplacian_operator(a, variant, tau, theta_hat)?.to_dense())
}

/// The same Laplacian kept in factored form `S (A + c w wᵀ) S`, so that a
/// product costs one pass over the edges.
#[derive(Clone, Debug)]
pub struct LaplacianOperator {
    neighbors: Vec<Vec<usize>>,
    scale: Vec<f64>,
    ridge: Option<(f64, Vec<f64>)>,
}

pub fn laplacian_operator(
    a: &AdjacencyMatrix,
    variant: Variant,
    tau: f64,
    theta_hat: Option<&[f64]>,
) -> Result<LaplacianOperator> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Config(format!("tau must be finite and non-negative, got {tau}")));
    }
    let n = a.n();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).iter().enumerate().filter(|(_, &x)| x != 0).map(|(j, _)| j).collect())
        .collect();
    let deg: Vec<f64> = neighbors.iter().map(|r| r.len() as f64).collect();
    let (ridge, allow_zero) = match variant {
        Variant::Plain | Variant::TauPrime => (None, false),
        Variant::Tau => (Some(vec![1.0; n]), false),
        Variant::TauDoublePrime => {
            let theta = theta_hat.ok_or(Error::MissingTheta)?;
            if theta.len() != n {
                return Err(Error::LengthMismatch(theta.len(), n));
            }
            if theta.iter().any(|&t| !(t.is_finite() && t >= 0.0)) {
                return Err(Error::MissingTheta);
            }
            (Some(theta.to_vec()), true)
        }
    };
    let c = tau / n as f64;
    let total: f64 = ridge.as_ref().map_or(0.0, |w| w.iter().sum());
    let mut scale = Vec::with_capacity(n);
    for (node, &d) in deg.iter().enumerate() {
        let reg = match (&ridge, variant) {
            (Some(w), _) => d + c * w[node] * total,
            (None, Variant::TauPrime) => d + tau,
            (None, _) => d,
        };
        if reg > 0.0 {
            scale.push(1.0 / reg.sqrt());
        } else if allow_zero {
            scale.push(0.0);
        } else {
            return Err(Error::SingularDegree { node });
        }
    }
    Ok(LaplacianOperator {
        neighbors,
        scale,
        ridge: ridge.map(|w| (c, w)),
    })
}

impl SymOperator for LaplacianOperator {
    fn dim(&self) -> usize {
        self.scale.len()
    }

    fn apply_block(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let s = &self.scale;
        xs.iter()
            .map(|x| {
                let sx: Vec<f64> = x.iter().zip(s).map(|(a, b)| a * b).collect();
                let shift = self
                    .ridge
                    .as_ref()
                    .map(|(c, w)| c * w.iter().zip(&sx).map(|(a, b)| a * b).sum::<f64>());
                self.neighbors
                    .iter()
                    .enumerate()
                    .map(|(i, nb)| {
                        let mut acc: f64 = nb.iter().map(|&j| sx[j]).sum();
                        if let (Some(t), Some((_, w))) = (shift, &self.ridge) {
                            acc += t * w[i];
                        }
                        s[i] * acc
                    })
                    .collect()
            })
            .collect()
    }

    fn to_dense(&self) -> SymMatrix {
        let n = self.dim();
        let s = &self.scale;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            let out = &mut data[i * n..(i + 1) * n];
            if let Some((c, w)) = &self.ridge {
                for j in 0..n {
                    out[j] = s[i] * s[j] * c * w[i] * w[j];
                }
            }
            for &j in &self.neighbors[i] {
                out[j] += s[i] * s[j];
            }
        }
        SymMatrix::from_raw(n, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge() -> AdjacencyMatrix {
        AdjacencyMatrix::from_edges(2, &[(0, 1)]).unwrap()
    }

    #[test]
    fn degree_examples() {
        let d = degrees(&edge());
        assert_eq!((d.d_hat.clone(), d.mean()), (vec![1, 1], 1.0));
        assert_eq!(degrees(&AdjacencyMatrix::empty(4)).d_hat, vec![0; 4]);
        let edges: Vec<_> = (0..5).flat_map(|i| ((i + 1)..5).map(move |j| (i, j))).collect();
        let k5 = AdjacencyMatrix::from_edges(5, &edges).unwrap();
        assert_eq!(degrees(&k5).d_hat, vec![4; 5]);
    }

    #[test]
    fn laplacian_examples() {
        let l = build_laplacian(&edge(), Variant::Plain, 0.0, None).unwrap();
        assert_eq!(l.as_slice(), &[0.0, 1.0, 1.0, 0.0]);
        let l = build_laplacian(&edge(), Variant::Tau, 2.0, None).unwrap();
        let want = [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0];
        for (x, w) in l.as_slice().iter().zip(want) {
            assert!((x - w).abs() < 1e-15);
        }
        let l = build_laplacian(&AdjacencyMatrix::empty(2), Variant::TauPrime, 1.0, None).unwrap();
        assert!(l.as_slice().iter().all(|&x| x == 0.0));
        let tau = build_laplacian(&edge(), Variant::Tau, 0.7, None).unwrap();
        let dp = build_laplacian(&edge(), Variant::TauDoublePrime, 0.7, Some(&[1.0, 1.0])).unwrap();
        assert_eq!(tau, dp);
    }

    #[test]
    fn errors() {
        let a = AdjacencyMatrix::empty(3);
        assert!(matches!(
            build_laplacian(&a, Variant::Plain, 0.0, None),
            Err(Error::SingularDegree { node: 0 })
        ));
        assert!(matches!(
            build_laplacian(&a, Variant::TauPrime, 0.0, None),
            Err(Error::SingularDegree { .. })
        ));
        assert!(matches!(
            build_laplacian(&a, Variant::TauDoublePrime, 1.0, None),
            Err(Error::MissingTheta)
        ));
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
    }
}
