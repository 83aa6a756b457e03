//! Dense strictly convex quadratic programming by the Goldfarb-Idnani dual
//! active-set method.
//!
//! ```text
//!     minimize     1/2 x' G x + a' x
//!     subject to   C x >= b
//! ```
//!
//! The solver keeps `J = L^-T Q` and the upper-triangular `R` with
//! `J' N = [R; 0]`, where `G = L L'` and `N` holds the active constraint
//! normals. Constraints are added and dropped with Givens rotations.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Active constraint indices and their multipliers.
    pub active: Vec<(usize, f64)>,
    pub iterations: usize,
}

/// Solves the QP with `hessian` (row-major `n x n`, symmetric positive definite),
/// `linear`, and inequality rows `constraints[j] . x >= bounds[j]`.
pub fn solve(
    hessian: &[f64],
    linear: &[f64],
    constraints: &[Vec<f64>],
    bounds: &[f64],
) -> Result<QpSolution> {
    let n = linear.len();
    assert_eq!(hessian.len(), n * n, "hessian must be n x n");
    assert_eq!(
        constraints.len(),
        bounds.len(),
        "one bound per constraint row"
    );
    debug_assert!(constraints.iter().all(|c| c.len() == n));

    let lower = cholesky(hessian, n)?;
    // J = L^-T, upper triangular.
    let mut j = invert_lower_transpose(&lower, n);

    // Unconstrained minimum x = -G^-1 a = -J J' a.
    let mut x = vec![0.0; n];
    let jt_a = mat_t_vec(&j, linear, n);
    for (row, xi) in x.iter_mut().enumerate() {
        *xi = -(0..n).map(|k| j[row * n + k] * jt_a[k]).sum::<f64>();
    }

    let norms: Vec<f64> = constraints
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300))
        .collect();
    let mut r = vec![0.0; n * n];
    let mut active: Vec<usize> = Vec::with_capacity(n);
    let mut u: Vec<f64> = Vec::with_capacity(n);
    let max_iter = 50 * (constraints.len() + n) + 100;
    let mut iterations = 0;

    loop {
        // Step 1: most violated constraint, scaled by its norm.
        let mut chosen: Option<(usize, f64)> = None;
        for (idx, (row, &b)) in constraints.iter().zip(bounds).enumerate() {
            if active.contains(&idx) {
                continue;
            }
            let slack = dot(row, &x) - b;
            let scaled = slack / norms[idx];
            if scaled < -1e-13 * (1.0 + b.abs() / norms[idx])
                && chosen.is_none_or(|(_, best)| scaled < best)
            {
                chosen = Some((idx, scaled));
            }
        }
        let Some((p, _)) = chosen else {
            let active = active.into_iter().zip(u).collect();
            return Ok(QpSolution {
                x,
                active,
                iterations,
            });
        };
        let normal = &constraints[p];
        let mut u_new = 0.0;

        // Step 2: move until p becomes active, dropping blocking constraints.
        loop {
            iterations += 1;
            if iterations > max_iter {
                let max_violation = constraints
                    .iter()
                    .zip(bounds)
                    .map(|(c, b)| (b - dot(c, &x)).max(0.0))
                    .fold(0.0, f64::max);
                return Err(Error::SolverFailure {
                    iterations,
                    max_violation,
                });
            }
            let q = active.len();
            let d = mat_t_vec(&j, normal, n);
            // Primal direction z = J2 d2.
            let mut z = vec![0.0; n];
            for k in q..n {
                for row in 0..n {
                    z[row] += j[row * n + k] * d[k];
                }
            }
            // Dual direction r = R^-1 d1.
            let rdir = back_substitute(&r, &d[..q], n);

            let mut partial: Option<(usize, f64)> = None;
            for (k, &rk) in rdir.iter().enumerate() {
                if rk > 0.0 {
                    let t = u[k] / rk;
                    if partial.is_none_or(|(_, best)| t < best) {
                        partial = Some((k, t));
                    }
                }
            }
            let zn = dot(&z, normal);
            let znorm = z.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let full = if znorm > 1e-14 && zn > 0.0 {
                Some((bounds[p] - dot(normal, &x)) / zn)
            } else {
                None
            };

            match (partial, full) {
                (None, None) => {
                    return Err(Error::Validation("quadratic program is infeasible".into()));
                }
                (Some((l, t1)), full) if full.is_none_or(|t2| t1 < t2) => {
                    // Partial step: constraint l leaves the active set.
                    if full.is_some() {
                        for (xi, zi) in x.iter_mut().zip(&z) {
                            *xi += t1 * zi;
                        }
                    }
                    for (uk, rk) in u.iter_mut().zip(&rdir) {
                        *uk -= t1 * rk;
                    }
                    u_new += t1;
                    active.remove(l);
                    u.remove(l);
                    drop_column(&mut r, &mut j, l, q, n);
                }
                (_, Some(t2)) => {
                    for (xi, zi) in x.iter_mut().zip(&z) {
                        *xi += t2 * zi;
                    }
                    for (uk, rk) in u.iter_mut().zip(&rdir) {
                        *uk -= t2 * rk;
                    }
                    u_new += t2;
                    add_column(&mut r, &mut j, &d, q, n);
                    active.push(p);
                    u.push(u_new);
                    break;
                }
                (Some(_), None) => unreachable!("covered by the partial-step arm"),
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `J' v` for row-major `J`.
fn mat_t_vec(j: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|col| (0..n).map(|row| j[row * n + col] * v[row]).sum())
        .collect()
}

fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..=i {
            let mut sum = a[i * n + k];
            for m in 0..k {
                sum -= l[i * n + m] * l[k * n + m];
            }
            if i == k {
                if !(sum > 0.0) {
                    return Err(Error::Contract(
                        "QP hessian is not positive definite".into(),
                    ));
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + k] = sum / l[k * n + k];
            }
        }
    }
    Ok(l)
}

/// `L^-T` for lower-triangular `L`.
fn invert_lower_transpose(l: &[f64], n: usize) -> Vec<f64> {
    // Solve L Y = I column by column, Y = L^-1 (lower), then transpose.
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        for row in col..n {
            let mut sum = if row == col { 1.0 } else { 0.0 };
            for m in col..row {
                sum -= l[row * n + m] * inv[m * n + col];
            }
            inv[row * n + col] = sum / l[row * n + row];
        }
    }
    let mut t = vec![0.0; n * n];
    for row in 0..n {
        for col in 0..n {
            t[row * n + col] = inv[col * n + row];
        }
    }
    t
}

/// Solves `R r = d` for the leading `q x q` block of upper-triangular `R`.
fn back_substitute(r: &[f64], d: &[f64], n: usize) -> Vec<f64> {
    let q = d.len();
    let mut out = d.to_vec();
    for i in (0..q).rev() {
        let mut sum = out[i];
        for k in i + 1..q {
            sum -= r[i * n + k] * out[k];
        }
        out[i] = sum / r[i * n + i];
    }
    out
}

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let rho = a.hypot(b);
    if rho == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / rho, b / rho, rho)
    }
}

fn rotate_columns(j: &mut [f64], c1: usize, c2: usize, cos: f64, sin: f64, n: usize) {
    for row in 0..n {
        let a = j[row * n + c1];
        let b = j[row * n + c2];
        j[row * n + c1] = cos * a + sin * b;
        j[row * n + c2] = -sin * a + cos * b;
    }
}

/// Makes `d[q+1..]` vanish by rotating columns of `J`, then stores `d[..=q]` as column `q` of `R`.
fn add_column(r: &mut [f64], j: &mut [f64], d: &[f64], q: usize, n: usize) {
    let mut d = d.to_vec();
    for k in (q + 1..n).rev() {
        if d[k] == 0.0 {
            continue;
        }
        let (cos, sin, rho) = givens(d[k - 1], d[k]);
        d[k - 1] = rho;
        d[k] = 0.0;
        rotate_columns(j, k - 1, k, cos, sin, n);
    }
    for (i, &di) in d.iter().enumerate().take(q + 1) {
        r[i * n + q] = di;
    }
}

/// Removes column `l` from the leading `q` columns of `R` and restores the
/// triangular form, rotating the matching columns of `J`.
fn drop_column(r: &mut [f64], j: &mut [f64], l: usize, q: usize, n: usize) {
    for col in l..q - 1 {
        for row in 0..n {
            r[row * n + col] = r[row * n + col + 1];
        }
    }
    for row in 0..n {
        r[row * n + q - 1] = 0.0;
    }
    for k in l..q - 1 {
        let a = r[k * n + k];
        let b = r[(k + 1) * n + k];
        if b == 0.0 {
            continue;
        }
        let (cos, sin, rho) = givens(a, b);
        r[k * n + k] = rho;
        r[(k + 1) * n + k] = 0.0;
        for col in k + 1..q - 1 {
            let top = r[k * n + col];
            let bottom = r[(k + 1) * n + col];
            r[k * n + col] = cos * top + sin * bottom;
            r[(k + 1) * n + col] = -sin * top + cos * bottom;
        }
        rotate_columns(j, k, k + 1, cos, sin, n);
    }
}
