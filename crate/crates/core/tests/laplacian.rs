use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbm_spectral::graph::AdjacencyMatrix;
use sbm_spectral::laplacian::{build_laplacian, laplacian_operator, Variant};
use sbm_spectral::linalg::{spectral_norm_dense, SymOperator};

fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> AdjacencyMatrix {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    AdjacencyMatrix::from_edges(n, &edges).unwrap()
}

/// Textbook construction: regularized adjacency, its row sums, symmetric scaling.
fn oracle(a: &AdjacencyMatrix, variant: Variant, tau: f64, theta: &[f64]) -> Vec<Vec<f64>> {
    let n = a.n();
    let nf = n as f64;
    let adj: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if a.get(i, j) { 1.0 } else { 0.0 }).collect())
        .collect();
    let reg: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match variant {
                    Variant::Plain | Variant::TauPrime => adj[i][j],
                    Variant::Tau => adj[i][j] + tau / nf,
                    Variant::TauDoublePrime => adj[i][j] + tau * theta[i] * theta[j] / nf,
                })
                .collect()
        })
        .collect();
    let deg: Vec<f64> = reg
        .iter()
        .map(|r| r.iter().sum::<f64>() + if variant == Variant::TauPrime { tau } else { 0.0 })
        .collect();
    let inv: Vec<f64> = deg.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
    (0..n)
        .map(|i| (0..n).map(|j| reg[i][j] * inv[i] * inv[j]).collect())
        .collect()
}

fn theta_for(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.2..2.0)).collect()
}

#[test]
fn matches_textbook_construction() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..20 {
        let n = 5 + trial * 3;
        let a = random_graph(&mut rng, n, 0.3);
        let theta = theta_for(&mut rng, n);
        for variant in [Variant::Tau, Variant::TauPrime, Variant::TauDoublePrime] {
            let tau = rng.gen_range(0.1..5.0);
            let l = build_laplacian(&a, variant, tau, Some(&theta)).unwrap();
            let want = oracle(&a, variant, tau, &theta);
            let op = laplacian_operator(&a, variant, tau, Some(&theta)).unwrap();
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).sin()).collect();
            let y = op.apply_block(std::slice::from_ref(&x)).pop().unwrap();
            for (i, row) in want.iter().enumerate() {
                for (j, w) in row.iter().enumerate() {
                    assert!((l.get(i, j) - w).abs() < 1e-14, "{variant:?}");
                }
                let yi: f64 = row.iter().zip(&x).map(|(w, xj)| w * xj).sum();
                assert!((y[i] - yi).abs() < 1e-12, "{variant:?}");
            }
        }
    }
}

#[test]
fn zero_tau_reduces_to_plain() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let edges: Vec<(usize, usize)> = (0..29).map(|i| (i, i + 1)).collect();
    let mut a = AdjacencyMatrix::from_edges(30, &edges).unwrap();
    // Ring plus random chords keeps every degree positive.
    let extra = random_graph(&mut rng, 30, 0.2);
    let mut all = a.edges();
    all.extend(extra.edges());
    all.sort_unstable();
    all.dedup();
    a = AdjacencyMatrix::from_edges(30, &all).unwrap();
    let plain = build_laplacian(&a, Variant::Plain, 0.0, None).unwrap();
    let tau = build_laplacian(&a, Variant::Tau, 0.0, None).unwrap();
    assert!(plain.max_abs_diff(&tau) < 1e-15);
}

#[test]
fn zero_theta_entries_give_zero_rows() {
    let a = AdjacencyMatrix::from_edges(4, &[(0, 1), (1, 2)]).unwrap();
    let l = build_laplacian(&a, Variant::TauDoublePrime, 1.0, Some(&[1.0, 1.0, 1.0, 0.0])).unwrap();
    for j in 0..4 {
        assert_eq!(l.get(3, j), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectral_norm_at_most_one(seed in any::<u64>(), n in 2usize..40, p in 0.05f64..0.9, tau in 0.01f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_graph(&mut rng, n, p);
        let theta = theta_for(&mut rng, n);
        for variant in Variant::ALL {
            let l = match build_laplacian(&a, variant, tau, Some(&theta)) {
                Ok(l) => l,
                Err(_) => { prop_assert_eq!(variant, Variant::Plain); continue; }
            };
            prop_assert!(spectral_norm_dense(&l).unwrap() <= 1.0 + 1e-10);
            for i in 0..n {
                for j in 0..i {
                    prop_assert!((l.get(i, j) - l.get(j, i)).abs() <= 1e-14);
                }
            }
        }
    }
}
