//! Adjacency matrices, random graph generation and the simulation presets.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix};
use crate::model::{BlockModel, Membership};
use crate::rng::{Domain, RngSeed};

/// Symmetric 0/1 adjacency matrix with zero diagonal, stored densely.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    data: Vec<u8>,
}

impl AdjacencyMatrix {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            data: vec![0; n * n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut a = Self::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Parse(format!("edge ({i}, {j}) out of range for n={n}")));
            }
            if i == j {
                return Err(Error::Parse(format!("self-loop at node {i}")));
            }
            a.set(i, j);
        }
        Ok(a)
    }

    fn set(&mut self, i: usize, j: usize) {
        self.data[i * self.n + j] = 1;
        self.data[j * self.n + i] = 1;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.n + j] != 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|&x| x as usize).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.data.iter().map(|&x| x as usize).sum::<usize>() / 2
    }

    /// Edges `(i, j)` with `i < j` in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.get(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn to_sym_matrix(&self) -> SymMatrix {
        SymMatrix::from_lower(self.n, |i, j| f64::from(self.data[i * self.n + j]))
    }

    /// Edge-list export: a `# n=<n>` header followed by one `i j` line per edge.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# n={}", self.n)?;
        for (i, j) in self.edges() {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut n = None;
        let mut edges = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("n=") {
                    n = Some(v.trim().parse::<usize>().map_err(|e| {
                        Error::Parse(format!("line {}: bad node count: {e}", lineno + 1))
                    })?);
                }
                continue;
            }
            let mut it = t.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(i)), Some(Ok(j)), None) => edges.push((i, j)),
                _ => return Err(Error::Parse(format!("line {}: expected `i j`", lineno + 1))),
            }
        }
        let n = n.ok_or_else(|| Error::Parse("missing `# n=<n>` header".into()))?;
        Self::from_edges(n, &edges)
    }
}

/// Draws `A_ij ~ Bernoulli(P_ij)` independently for `i < j`.
///
/// One uniform is consumed per pair regardless of `P_ij`, so the stream
/// position depends only on `n`.
pub fn sample_adjacency(p: &SymMatrix, seed: RngSeed) -> Result<AdjacencyMatrix> {
    let n = p.n();
    for i in 0..n {
        for j in i..n {
            let v = p.get(i, j);
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ProbOutOfRange { row: i, col: j, value: v });
            }
        }
    }
    let mut rng = seed.rng(Domain::Graph);
    let mut a = AdjacencyMatrix::empty(n);
    for i in 0..n {
        for (j, &pij) in p.row(i).iter().enumerate().skip(i + 1) {
            let u: f64 = rng.gen();
            if u < pij {
                a.set(i, j);
            }
        }
    }
    Ok(a)
}

/// A simulation design: model, membership and the degree parameters as drawn
/// before per-community rescaling.
#[derive(Clone, Debug, PartialEq)]
pub struct DgpInstance {
    pub model: BlockModel,
    pub membership: Membership,
    pub raw_theta: Option<Vec<f64>>,
}

/// Block matrices of the four simulation designs (natural logarithms).
pub fn dgp_block_matrix(id: u8, n: usize) -> Result<Matrix> {
    let nf = n as f64;
    let l = nf.ln();
    match id {
        1 | 3 => {
            let c = 2.0 / nf;
            Matrix::from_rows(&[
                vec![c * l * l, c * 0.2 * l],
                vec![c * 0.2 * l, c * 0.8 * l],
            ])
        }
        2 | 4 => {
            let c = 3.0 / nf;
            let off = c * 0.1 * l.powf(5.0 / 6.0);
            Matrix::from_rows(&[
                vec![c * nf.sqrt(), off, off],
                vec![off, c * l.powf(1.5), off],
                vec![off, off, c * 0.8 * l.powf(5.0 / 6.0)],
            ])
        }
        _ => Err(Error::Config(format!("unknown design {id}, expected 1-4"))),
    }
}

pub fn dgp_community_count(id: u8) -> Result<usize> {
    match id {
        1 | 3 => Ok(2),
        2 | 4 => Ok(3),
        _ => Err(Error::Config(format!("unknown design {id}, expected 1-4"))),
    }
}

/// Designs 1-4 with `n_per_community` nodes in each community. Designs 3 and 4
/// draw `θ_i` uniformly from `{0.5, 1.5}` and rescale so each community's
/// parameters sum to its size.
pub fn dgp_preset(id: u8, n_per_community: usize, seed: RngSeed) -> Result<DgpInstance> {
    let k = dgp_community_count(id)?;
    if n_per_community < 2 {
        return Err(Error::Config("need at least 2 nodes per community".into()));
    }
    let n = k * n_per_community;
    let b = dgp_block_matrix(id, n)?;
    let sizes = vec![n_per_community; k];
    let membership = Membership::contiguous(&sizes)?;
    let (theta, raw_theta) = if id >= 3 {
        let mut rng = seed.rng(Domain::Theta);
        let raw: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.5) { 1.5 } else { 0.5 })
            .collect();
        let mut theta = raw.clone();
        for c in 0..k {
            let block = &mut theta[c * n_per_community..(c + 1) * n_per_community];
            let scale = n_per_community as f64 / block.iter().sum::<f64>();
            block.iter_mut().for_each(|t| *t *= scale);
        }
        (Some(theta), Some(raw))
    } else {
        (None, None)
    };
    let model = BlockModel::new(b, sizes, theta)?;
    Ok(DgpInstance {
        model,
        membership,
        raw_theta,
    })
}

/// `K` communities of `s` nodes with `B_kk = r + p` and `B_kl = r`.
pub fn four_param_sbm(k: usize, s: usize, r: f64, p: f64) -> Result<(BlockModel, Membership)> {
    if k == 0 || s < 2 {
        return Err(Error::Config("need K >= 1 and s >= 2".into()));
    }
    let b = Matrix::from_fn(k, k, |a, l| if a == l { r + p } else { r });
    let model = BlockModel::new(b, vec![s; k], None)?;
    let membership = model.contiguous_membership();
    Ok((model, membership))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::edge_prob_matrix;

    #[test]
    fn extreme_probabilities() {
        let seed = RngSeed::new(1, 0);
        let zero = sample_adjacency(&SymMatrix::zeros(5), seed).unwrap();
        assert_eq!(zero, AdjacencyMatrix::empty(5));
        let one = sample_adjacency(&SymMatrix::from_lower(5, |_, _| 1.0), seed).unwrap();
        assert_eq!(one.edge_count(), 10);
        assert!((0..5).all(|i| !one.get(i, i)));
        let bad = SymMatrix::from_lower(3, |i, j| if i == j { 1.2 } else { 0.1 });
        assert!(matches!(sample_adjacency(&bad, seed), Err(Error::ProbOutOfRange { .. })));
    }

    #[test]
    fn preset_block_values() {
        let d1 = dgp_preset(1, 50, RngSeed::new(0, 0)).unwrap();
        let b = d1.model.b();
        assert!((b[(0, 0)] - 0.42415).abs() < 5e-6);
        assert!((b[(0, 1)] - 0.018421).abs() < 5e-7);
        assert!((b[(1, 1)] - 0.073683).abs() < 5e-7);
        let d2 = dgp_preset(2, 200, RngSeed::new(0, 0)).unwrap();
        assert!((d2.model.b()[(0, 0)] - 0.12247).abs() < 5e-6);
        let d3 = dgp_preset(3, 50, RngSeed::new(0, 0)).unwrap();
        assert_eq!(d3.model.b(), d1.model.b());
        let theta = d3.model.theta().unwrap();
        for c in 0..2 {
            let mean: f64 = theta[c * 50..(c + 1) * 50].iter().sum::<f64>() / 50.0;
            assert!((mean - 1.0).abs() < 1e-12);
        }
        assert!(d3.raw_theta.unwrap().iter().all(|&t| t == 0.5 || t == 1.5));
        edge_prob_matrix(&d3.model, &d3.membership).unwrap();
    }

    #[test]
    fn four_param_blocks() {
        let (m, _) = four_param_sbm(3, 50, 0.1, 0.3).unwrap();
        assert!((m.b()[(0, 0)] - 0.4).abs() < 1e-15 && m.b()[(0, 1)] == 0.1);
        let (m, g) = four_param_sbm(2, 3, 0.0, 1.0).unwrap();
        let p = edge_prob_matrix(&m, &g).unwrap();
        assert_eq!(p.get(0, 2), 1.0);
        assert_eq!(p.get(0, 3), 0.0);
        assert!(four_param_sbm(2, 3, 0.5, 0.7).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let a = AdjacencyMatrix::from_edges(4, &[(0, 1), (2, 3), (1, 3)]).unwrap();
        let mut buf = Vec::new();
        a.write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "# n=4\n0 1\n1 3\n2 3\n");
        assert_eq!(AdjacencyMatrix::read_edge_list(&buf[..]).unwrap(), a);
    }
}
