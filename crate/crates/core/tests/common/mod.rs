//! Independent reference implementations used as test oracles. None of these
//! call into the library's numerical code.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

/// Directed edge list → a_ij = 1/k_j for every linked ordered pair, where k_j
/// counts j's distinct in- and out-links.
pub struct GraphOracle {
    pub n: usize,
    pub weight: Vec<Vec<f64>>,
}

impl GraphOracle {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut arcs: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &(i, j) in edges {
            if i != j {
                arcs.insert((i, j));
            }
        }
        let mut degree = vec![0usize; n];
        let mut linked = vec![vec![false; n]; n];
        for &(i, j) in &arcs {
            degree[i] += 1;
            degree[j] += 1;
            linked[i][j] = true;
            linked[j][i] = true;
        }
        let weight = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if linked[i][j] { 1.0 / degree[j] as f64 } else { 0.0 })
                    .collect()
            })
            .collect();
        GraphOracle { n, weight }
    }

    /// Σ over ordered pairs i ≠ j in the same group of (a_ij − γ).
    /// `None` labels count as singletons.
    pub fn quality(&self, labels: &[Option<usize>], gamma: f64) -> f64 {
        let mut q = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && labels[i].is_some() && labels[i] == labels[j] {
                    q += self.weight[i][j] - gamma;
                }
            }
        }
        q
    }

    /// Best quality over every set partition (restricted growth strings).
    pub fn exhaustive_optimum(&self, gamma: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut rgs = vec![0usize; self.n];
        loop {
            let labels: Vec<Option<usize>> = rgs.iter().map(|&g| Some(g)).collect();
            best = best.max(self.quality(&labels, gamma));
            // next restricted growth string
            let mut i = self.n;
            loop {
                if i <= 1 {
                    return best;
                }
                i -= 1;
                let max_prefix = rgs[..i].iter().copied().max().unwrap_or(0);
                if rgs[i] <= max_prefix {
                    rgs[i] += 1;
                    for x in rgs.iter_mut().skip(i + 1) {
                        *x = 0;
                    }
                    break;
                }
            }
        }
    }
}

/// Scores a binary query against topic term counts by recomputing every BM25
/// quantity from scratch.
pub fn naive_bm25(topics: &[BTreeMap<String, u64>], query: &[String], k1: f64, b: f64) -> Vec<f64> {
    let n = topics.len() as f64;
    let lengths: Vec<f64> = topics.iter().map(|t| t.values().sum::<u64>() as f64).collect();
    let avg = lengths.iter().sum::<f64>() / n;
    let distinct: BTreeSet<&String> = query.iter().collect();
    topics
        .iter()
        .enumerate()
        .map(|(i, counts)| {
            let mut score = 0.0;
            for term in &distinct {
                let df = topics.iter().filter(|t| t.get(*term).copied().unwrap_or(0) > 0).count() as f64;
                let tf = counts.get(*term).copied().unwrap_or(0) as f64;
                if tf == 0.0 {
                    continue;
                }
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                let norm = if avg > 0.0 { lengths[i] / avg } else { 0.0 };
                score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
            }
            score
        })
        .collect()
}

/// Indices ordered by descending score, ties by lower index.
pub fn naive_ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    order
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Two-pass Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Population standard deviation.
pub fn pop_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// OLS with intercept via the normal equations `(XᵀX) β = Xᵀy`.
/// Returns `(intercept, slopes, r²)`.
pub fn normal_equations(y: &[f64], xs: &[Vec<f64>]) -> (f64, Vec<f64>, f64) {
    let n = y.len();
    let k = xs.len() + 1;
    let row = |i: usize| -> Vec<f64> {
        std::iter::once(1.0).chain(xs.iter().map(|x| x[i])).collect()
    };
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for i in 0..n {
        let r = row(i);
        for a in 0..k {
            xty[a] += r[a] * y[i];
            for b in 0..k {
                xtx[a][b] += r[a] * r[b];
            }
        }
    }
    let beta = solve(xtx, xty);
    let my = mean(y);
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..n {
        let fit: f64 = row(i).iter().zip(&beta).map(|(a, b)| a * b).sum();
        ss_res += (y[i] - fit).powi(2);
        ss_tot += (y[i] - my).powi(2);
    }
    (beta[0], beta[1..].to_vec(), 1.0 - ss_res / ss_tot)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns eigenvalues
/// in descending order and matching unit eigenvectors (as columns: `vecs[i][k]`
/// is component `i` of eigenvector `k`).
pub fn jacobi_eigen(m: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.len();
    let mut a = m.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].partial_cmp(&a[x][x]).unwrap());
    let values = order.iter().map(|&k| a[k][k]).collect();
    let vectors = (0..n).map(|i| order.iter().map(|&k| v[i][k]).collect()).collect();
    (values, vectors)
}

/// Pearson correlation matrix of column vectors.
pub fn correlation_matrix(columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    columns
        .iter()
        .map(|a| columns.iter().map(|b| pearson(a, b)).collect())
        .collect()
}

/// Each topic keeps its `n` strongest partners (ties → lower id); union of kept pairs.
pub fn brute_top_n(sims: &BTreeMap<(u32, u32), f64>, topics: &[u32], n: usize) -> BTreeSet<(u32, u32)> {
    let mut kept = BTreeSet::new();
    for &t in topics {
        let mut partners: Vec<(f64, u32)> = sims
            .iter()
            .filter_map(|(&(a, b), &s)| {
                if a == t {
                    Some((s, b))
                } else if b == t {
                    Some((s, a))
                } else {
                    None
                }
            })
            .collect();
        partners.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
        for &(_, other) in partners.iter().take(n) {
            kept.insert((t.min(other), t.max(other)));
        }
    }
    kept
}

pub fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}
