//! Agreement between an estimated and a true partition.

use crate::error::{Error, Result};

/// Largest `K` solved by enumerating permutations.
const BRUTE_FORCE_MAX_K: usize = 8;

/// `K × K` contingency counts, `K` = larger label range of the two inputs.
fn confusion(pred: &[usize], truth: &[usize]) -> Result<(Vec<Vec<usize>>, usize)> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    let k = pred.iter().chain(truth).map(|&g| g + 1).max().unwrap_or(0);
    let mut c = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        c[p][t] += 1;
    }
    Ok((c, k))
}

/// Correct classification proportion: agreement maximized over relabelings of
/// the prediction.
pub fn ccp(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let (c, k) = confusion(pred, truth)?;
    let n = pred.len();
    if n == 0 {
        return Ok(1.0);
    }
    let best = if k <= BRUTE_FORCE_MAX_K {
        best_matching_brute(&c)
    } else {
        best_matching_hungarian(&c)
    };
    Ok(best as f64 / n as f64)
}

fn best_matching_brute(c: &[Vec<usize>]) -> usize {
    fn go(c: &[Vec<usize>], row: usize, used: &mut [bool], acc: usize, best: &mut usize) {
        if row == c.len() {
            *best = (*best).max(acc);
            return;
        }
        for col in 0..c.len() {
            if !used[col] {
                used[col] = true;
                go(c, row + 1, used, acc + c[row][col], best);
                used[col] = false;
            }
        }
    }
    let mut best = 0;
    go(c, 0, &mut vec![false; c.len()], 0, &mut best);
    best
}

/// Maximum-weight perfect matching by the Hungarian algorithm (potentials form).
pub(crate) fn best_matching_hungarian(c: &[Vec<usize>]) -> usize {
    let k = c.len();
    if k == 0 {
        return 0;
    }
    let max = c.iter().flatten().copied().max().unwrap_or(0) as i64;
    // Minimize max - c.
    let cost = |i: usize, j: usize| max - c[i][j] as i64;
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; k + 1];
    let mut v = vec![0i64; k + 1];
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=k).map(|j| c[p[j] - 1][j - 1]).sum()
}

/// Normalized mutual information `I / √(H_pred H_truth)` with natural logs.
///
/// Two single-cluster partitions give 1; otherwise a zero entropy gives 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let (c, k) = confusion(pred, truth)?;
    let n = pred.len() as f64;
    if pred.is_empty() {
        return Ok(1.0);
    }
    let rows: Vec<f64> = (0..k).map(|i| c[i].iter().sum::<usize>() as f64).collect();
    let cols: Vec<f64> = (0..k).map(|j| (0..k).map(|i| c[i][j]).sum::<usize>() as f64).collect();
    let entropy = |m: &[f64]| -> f64 {
        m.iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| {
                let p = x / n;
                -p * p.ln()
            })
            .sum()
    };
    let (hp, ht) = (entropy(&rows), entropy(&cols));
    if hp == 0.0 && ht == 0.0 {
        return Ok(1.0);
    }
    if hp == 0.0 || ht == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for i in 0..k {
        for j in 0..k {
            let nij = c[i][j] as f64;
            if nij > 0.0 {
                mi += nij / n * (n * nij / (rows[i] * cols[j])).ln();
            }
        }
    }
    Ok((mi / (hp * ht).sqrt()).clamp(0.0, 1.0))
}
