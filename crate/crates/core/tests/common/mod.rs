//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Calls `visit` with every `h`-subset of `0..n` in lexicographic order.
pub fn for_each_subset(n: usize, h: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(
        start: usize,
        n: usize,
        h: usize,
        cur: &mut Vec<usize>,
        visit: &mut impl FnMut(&[usize]),
    ) {
        if cur.len() == h {
            visit(cur);
            return;
        }
        for i in start..=n - (h - cur.len()) {
            cur.push(i);
            rec(i + 1, n, h, cur, visit);
            cur.pop();
        }
    }
    rec(0, n, h, &mut Vec::with_capacity(h), visit);
}

/// Mean and maximum-likelihood covariance determinant of `rows[subset]`.
pub fn subset_det(rows: &[Vec<f64>], subset: &[usize]) -> (Vec<f64>, f64) {
    let dim = rows[0].len();
    let h = subset.len() as f64;
    let mut mean = vec![0.0; dim];
    for &i in subset {
        for d in 0..dim {
            mean[d] += rows[i][d] / h;
        }
    }
    let mut cov = vec![0.0; dim * dim];
    for &i in subset {
        for a in 0..dim {
            for b in 0..dim {
                cov[a * dim + b] += (rows[i][a] - mean[a]) * (rows[i][b] - mean[b]) / h;
            }
        }
    }
    let det = if dim == 1 {
        cov[0]
    } else {
        cov[0] * cov[3] - cov[1] * cov[2]
    };
    (mean, det)
}

pub struct BruteMcd {
    pub min_det: f64,
    /// Every subset whose determinant ties the minimum (relative 1e-9).
    pub optimal: Vec<Vec<usize>>,
}

/// Exhaustive minimum-determinant search over all `h`-subsets.
pub fn brute_force_mcd(rows: &[Vec<f64>], h: usize) -> BruteMcd {
    let mut all: Vec<(f64, Vec<usize>)> = Vec::new();
    for_each_subset(rows.len(), h, &mut |s| {
        all.push((subset_det(rows, s).1, s.to_vec()));
    });
    let min_det = all.iter().map(|(d, _)| *d).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * min_det.abs().max(1e-300);
    let optimal = all
        .into_iter()
        .filter(|(d, _)| *d <= min_det + tol)
        .map(|(_, s)| s)
        .collect();
    BruteMcd { min_det, optimal }
}

/// Squared Mahalanobis distances of every row under the mean and scaled
/// covariance of `subset`.
pub fn sq_distances(rows: &[Vec<f64>], subset: &[usize], scale: f64) -> Vec<f64> {
    let (mean, _) = subset_det(rows, subset);
    let dim = rows[0].len();
    let h = subset.len() as f64;
    let mut cov = vec![0.0; dim * dim];
    for &i in subset {
        for a in 0..dim {
            for b in 0..dim {
                cov[a * dim + b] += (rows[i][a] - mean[a]) * (rows[i][b] - mean[b]) / h * scale;
            }
        }
    }
    rows.iter()
        .map(|r| {
            if dim == 1 {
                (r[0] - mean[0]).powi(2) / cov[0]
            } else {
                let (dx, dy) = (r[0] - mean[0], r[1] - mean[1]);
                let det = cov[0] * cov[3] - cov[1] * cov[2];
                (cov[3] * dx * dx - 2.0 * cov[1] * dx * dy + cov[0] * dy * dy) / det
            }
        })
        .collect()
}

/// Constrained least squares for degree 1 or 2 solved by accelerated projected
/// gradient. Constraints: `f'(0) <= les`, `f'(1) <= les` (for degree <= 2 the
/// derivative is affine, so these two imply the whole interval) and
/// `f(1) >= epsilon`. Returns the coefficients and the objective
/// `sum (y - f(x))^2 + ridge |beta|^2`.
pub fn projected_gradient_fit(
    points: &[(f64, f64)],
    les: f64,
    epsilon: f64,
    ridge: f64,
    degree: usize,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    assert!(degree == 1 || degree == 2);
    let p = degree + 1;
    // Quadratic form: beta' A beta - 2 b' beta + c
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for &(x, y) in points {
        let phi: Vec<f64> = (0..p).map(|k| x.powi(k as i32)).collect();
        for i in 0..p {
            b[i] += phi[i] * y;
            for j in 0..p {
                a[i][j] += phi[i] * phi[j];
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += ridge;
    }
    let lipschitz = 2.0 * max_eigen(&a);
    let step = 1.0 / lipschitz;

    // Halfspaces g . beta <= r.
    let mut cons: Vec<(Vec<f64>, f64)> = vec![];
    let mut d0 = vec![0.0; p];
    d0[1] = 1.0;
    cons.push((d0, les));
    if degree == 2 {
        cons.push((vec![0.0, 1.0, 2.0], les));
    }
    cons.push((vec![-1.0; p], -epsilon));

    let objective = |beta: &[f64]| {
        let sse: f64 = points
            .iter()
            .map(|&(x, y)| {
                let f: f64 = beta
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * x.powi(k as i32))
                    .sum();
                (y - f).powi(2)
            })
            .sum();
        sse + ridge * beta.iter().map(|c| c * c).sum::<f64>()
    };
    let grad = |beta: &[f64]| -> Vec<f64> {
        (0..p)
            .map(|i| 2.0 * ((0..p).map(|j| a[i][j] * beta[j]).sum::<f64>() - b[i]))
            .collect()
    };

    let mut x = project(&vec![0.0; p], &cons);
    let mut yk = x.clone();
    let mut t = 1.0f64;
    let mut best = objective(&x);
    for _ in 0..max_iter {
        let g = grad(&yk);
        let z: Vec<f64> = yk.iter().zip(&g).map(|(v, gi)| v - step * gi).collect();
        let next = project(&z, &cons);
        // Gradient-mapping step: zero exactly at a KKT point.
        let mapped: f64 = next
            .iter()
            .zip(&yk)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        let obj = objective(&next);
        if obj > best {
            if t == 1.0 {
                // A plain projected step from x no longer descends: converged
                // up to rounding.
                break;
            }
            // Adaptive restart.
            t = 1.0;
            yk = x.clone();
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_next;
        yk = next
            .iter()
            .zip(&x)
            .map(|(n, o)| n + momentum * (n - o))
            .collect();
        x = next;
        t = t_next;
        best = obj;
        if mapped < 1e-12 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            break;
        }
    }
    let obj = objective(&x);
    (x, obj)
}

fn max_eigen(a: &[Vec<f64>]) -> f64 {
    let p = a.len();
    let mut v = vec![1.0; p];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..p)
            .map(|i| (0..p).map(|j| a[i][j] * v[j]).sum())
            .collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        lambda = norm;
        v = w.iter().map(|x| x / norm).collect();
    }
    lambda * 1.0001
}

/// Euclidean projection onto `{beta : g_i . beta <= r_i}` for a handful of
/// halfspaces: try every active set, keep the closest feasible candidate whose
/// multipliers are non-negative.
fn project(z: &[f64], cons: &[(Vec<f64>, f64)]) -> Vec<f64> {
    let feasible = |x: &[f64]| cons.iter().all(|(g, r)| dot(g, x) <= r + 1e-14);
    if feasible(z) {
        return z.to_vec();
    }
    let m = cons.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << m) {
        let act: Vec<&(Vec<f64>, f64)> = (0..m)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &cons[i])
            .collect();
        // Solve (G G') lambda = G z - r, x = z - G' lambda.
        let k = act.len();
        let mut gram = vec![vec![0.0; k]; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            rhs[i] = dot(&act[i].0, z) - act[i].1;
            for j in 0..k {
                gram[i][j] = dot(&act[i].0, &act[j].0);
            }
        }
        let Some(lambda) = solve_small(gram, rhs) else {
            continue;
        };
        if lambda.iter().any(|&l| l < -1e-14) {
            continue;
        }
        let mut x = z.to_vec();
        for (l, (g, _)) in lambda.iter().zip(&act) {
            for (xi, gi) in x.iter_mut().zip(g) {
                *xi -= l * gi;
            }
        }
        if !feasible(&x) {
            continue;
        }
        let dist: f64 = x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, x));
        }
    }
    best.expect("feasible set is non-empty").1
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let pivot = a[col].clone();
            for (x, p) in a[row][col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (b[i] - (i + 1..n).map(|k| a[i][k] * x[k]).sum::<f64>()) / a[i][i];
    }
    Some(x)
}

/// Share of `draws` chi-square(2) variates (sum of two squared Box-Muller
/// normals) at or below `q`.
pub fn chi2_2_monte_carlo_cdf(q: f64, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut below = 0usize;
    for _ in 0..draws {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        let (z1, z2) = (r * theta.cos(), r * theta.sin());
        if z1 * z1 + z2 * z2 <= q {
            below += 1;
        }
    }
    below as f64 / draws as f64
}

/// Random points in the unit square.
pub fn random_cloud(rng: &mut impl Rng, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| (rng.gen::<f64>(), rng.gen::<f64>()))
        .collect()
}
