//! Brute-force oracles shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbm_spectral::laplacian::Variant;
use sbm_spectral::linalg::{eig_sym, Matrix};
use sbm_spectral::model::{population_laplacian, BlockModel, Membership};

/// Labelings of `n` points into `k` nonempty groups, with point 0 in group 0.
pub fn labelings(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let total = k.pow((n - 1) as u32);
    for code in 0..total {
        let mut labels = vec![0];
        let mut c = code;
        for _ in 1..n {
            labels.push(c % k);
            c /= k;
        }
        if (0..k).all(|g| labels.contains(&g)) {
            out.push(labels);
        }
    }
    out
}

fn members<'a>(pts: &'a [Vec<f64>], labels: &[usize], g: usize) -> Vec<&'a [f64]> {
    pts.iter()
        .zip(labels)
        .filter(|(_, &l)| l == g)
        .map(|(p, _)| p.as_slice())
        .collect()
}

/// Global minimum of the mean squared distance to cluster means.
pub fn kmeans_min(pts: &[Vec<f64>], k: usize) -> f64 {
    let n = pts.len();
    labelings(n, k)
        .iter()
        .map(|labels| {
            (0..k)
                .map(|g| {
                    let m = members(pts, labels, g);
                    let dim = m[0].len();
                    let mean: Vec<f64> = (0..dim).map(|d| m.iter().map(|p| p[d]).sum::<f64>() / m.len() as f64).collect();
                    m.iter().map(|p| p.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sum::<f64>()
                })
                .sum::<f64>()
                / n as f64
        })
        .fold(f64::INFINITY, f64::min)
}

fn golden(lo: f64, hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    f(0.5 * (a + b))
}

/// Minimum total distance from a planar point set to a single center, by
/// nested golden-section search over the bounding box (the cost is convex).
pub fn planar_median_cost(m: &[&[f64]]) -> f64 {
    let cost = |x: f64, y: f64| m.iter().map(|p| ((p[0] - x).powi(2) + (p[1] - y).powi(2)).sqrt()).sum::<f64>();
    match m.len() {
        1 => 0.0,
        2 => cost(m[0][0], m[0][1]),
        _ => {
            let (x0, x1) = m.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[0]), b.max(p[0])));
            let (y0, y1) = m.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[1]), b.max(p[1])));
            golden(x0, x1, 70, |x| golden(y0, y1, 70, |y| cost(x, y)))
        }
    }
}

/// Global minimum of the mean distance to geometric-median centers, planar points.
pub fn kmedians_min(pts: &[Vec<f64>], k: usize) -> f64 {
    let n = pts.len();
    labelings(n, k)
        .iter()
        .map(|labels| (0..k).map(|g| planar_median_cost(&members(pts, labels, g))).sum::<f64>() / n as f64)
        .fold(f64::INFINITY, f64::min)
}

/// Global minimum of the mean squared distance to the nearest of `k` medoids.
pub fn medoid_min(pts: &[Vec<f64>], k: usize) -> f64 {
    let n = pts.len();
    let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let cost: f64 = pts
            .iter()
            .map(|p| idx.iter().map(|&m| d2(p, &pts[m])).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / n as f64;
        best = best.min(cost);
        // Next k-combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in (i + 1)..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// All permutations of `0..k`.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Best fraction of agreements over all relabelings of `pred`.
pub fn ccp_brute(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    permutations(k)
        .iter()
        .map(|perm| pred.iter().zip(truth).filter(|(&p, &t)| perm[p] == t).count())
        .max()
        .unwrap() as f64
        / pred.len() as f64
}

/// A seeded full-rank block model with uneven community sizes, optionally
/// degree-corrected with per-community normalized θ. Labels are shuffled.
pub fn random_model(seed: u64, degree_corrected: bool) -> (BlockModel, Membership) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(2..=4);
    let sizes: Vec<usize> = (0..k).map(|_| rng.gen_range(4..=20)).collect();
    let mut b = Matrix::zeros(k, k);
    for a in 0..k {
        b[(a, a)] = rng.gen_range(0.2..0.3);
        for l in 0..a {
            let v = rng.gen_range(0.01..0.1);
            b[(a, l)] = v;
            b[(l, a)] = v;
        }
    }
    let mut labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(g, &s)| std::iter::repeat_n(g, s)).collect();
    for i in (1..labels.len()).rev() {
        labels.swap(i, rng.gen_range(0..=i));
    }
    let theta = degree_corrected.then(|| {
        let mut t: Vec<f64> = labels.iter().map(|_| rng.gen_range(0.6..1.4)).collect();
        for g in 0..k {
            let sum: f64 = t.iter().zip(&labels).filter(|(_, &l)| l == g).map(|(x, _)| x).sum();
            for (x, &l) in t.iter_mut().zip(&labels) {
                if l == g {
                    *x *= sizes[g] as f64 / sum;
                }
            }
        }
        t
    });
    let model = BlockModel::new(b, sizes, theta).unwrap();
    (model, Membership::new(labels, k).unwrap())
}

pub struct Identification {
    /// Largest difference between eigenvector rows of nodes in the same community.
    pub within: f64,
    /// Largest deviation of a cross-community row distance from its exact value.
    pub across: f64,
}

/// Leading-K eigenvectors of a dense population Laplacian, checked row by row.
/// With `normalize`, rows are scaled to unit length and the cross-community
/// distance must be √2; otherwise it must be √(1/n_k + 1/n_l).
pub fn identification(model: &BlockModel, memb: &Membership, tau: f64, variant: Variant, normalize: bool) -> Identification {
    let l = population_laplacian(model, memb, tau, variant).unwrap();
    let dec = eig_sym(&l).unwrap().leading(model.k());
    let n = model.n();
    let k = model.k();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let r: Vec<f64> = (0..k).map(|j| dec.vectors[(i, j)]).collect();
            if normalize {
                let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                r.iter().map(|x| x / norm).collect()
            } else {
                r
            }
        })
        .collect();
    let g = memb.labels();
    let sizes = memb.sizes();
    let (mut within, mut across) = (0.0f64, 0.0f64);
    for i in 0..n {
        for j in 0..i {
            let d = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if g[i] == g[j] {
                within = within.max(d);
            } else {
                let want = if normalize {
                    2f64.sqrt()
                } else {
                    (1.0 / sizes[g[i]] as f64 + 1.0 / sizes[g[j]] as f64).sqrt()
                };
                across = across.max((d - want).abs());
            }
        }
    }
    Identification { within, across }
}

/// Classical Jacobi with largest-pivot selection. Returns (values, vectors as columns).
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..(200 * n * n + 10) {
        let (mut p, mut q, mut big) = (0, 1, 0.0f64);
        for i in 0..n {
            for j in (i + 1)..n {
                if a[i][j].abs() > big {
                    big = a[i][j].abs();
                    p = i;
                    q = j;
                }
            }
        }
        if n < 2 || big < 1e-15 {
            break;
        }
        let theta = 0.5 * (2.0 * a[p][q]).atan2(a[q][q] - a[p][p]);
        let (s, c) = theta.sin_cos();
        for k in 0..n {
            let (akp, akq) = (a[k][p], a[k][q]);
            a[k][p] = c * akp - s * akq;
            a[k][q] = s * akp + c * akq;
        }
        for k in 0..n {
            let (apk, aqk) = (a[p][k], a[q][k]);
            a[p][k] = c * apk - s * aqk;
            a[q][k] = s * apk + c * aqk;
        }
        for row in v.iter_mut() {
            let (vp, vq) = (row[p], row[q]);
            row[p] = c * vp - s * vq;
            row[q] = s * vp + c * vq;
        }
    }
    let values = (0..n).map(|i| a[i][i]).collect();
    let cols = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    (values, cols)
}

pub fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let x: f64 = rng.gen_range(-1.0..1.0);
            a[i][j] = x;
            a[j][i] = x;
        }
    }
    a
}
