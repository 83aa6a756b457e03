//! Least-squares polynomial fit under a derivative ceiling and a positivity floor.
//!
//! The fitted curve `f(x) = sum_k beta_k x^k` minimizes
//! `sum_i (y_i - f(x_i))^2 + ridge * |beta|^2` subject to `f'(g) <= les` at every
//! point `g` of a uniform grid over `[a, b]` and `f(b) >= epsilon`. With
//! `les < 0` the curve is strictly decreasing on the grid, so `f >= epsilon`
//! across it.
//!
//! The quadratic program is solved in a shifted Legendre basis to keep the
//! normal equations well conditioned; coefficients are returned in the monomial
//! basis.

pub mod qp;

use serde::{Deserialize, Serialize};

use crate::diagnostics::Diagnostic;
use crate::error::{Error, Result};

/// Tolerance of the derivative ceiling at grid points.
pub const DERIVATIVE_TOL: f64 = 1e-8;
/// Tolerance of the positivity floor at the right endpoint.
pub const FLOOR_TOL: f64 = 1e-10;
/// Overshoot of the derivative ceiling tolerated between grid points on the
/// 10x denser check grid, relative to `|les|`. Keeps the curve strictly decreasing.
pub const DENSE_REL_TOL: f64 = 1e-3;
const MAX_REFINEMENTS: u32 = 4;

/// Polynomial in the monomial basis, lowest order first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coefficients: Vec<f64>,
}

impl Polynomial {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Argument(
                "a polynomial needs at least one coefficient".into(),
            ));
        }
        Ok(Polynomial { coefficients })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * x + k as f64 * c)
    }
}

pub fn eval_poly(poly: &Polynomial, x: f64) -> f64 {
    poly.eval(x)
}

pub fn eval_poly_derivative(poly: &Polynomial, x: f64) -> f64 {
    poly.derivative(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub degree: usize,
    pub domain: (f64, f64),
    pub grid_size: usize,
    pub epsilon: f64,
    pub ridge: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            degree: 5,
            domain: (0.0, 1.0),
            grid_size: 201,
            epsilon: 0.01,
            ridge: 1e-9,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.domain;
        if self.degree < 1 {
            return Err(Error::Argument(
                "polynomial degree must be at least 1".into(),
            ));
        }
        if self.grid_size < self.degree + 1 || self.grid_size < 2 {
            return Err(Error::Argument(format!(
                "grid size {} must be at least degree + 1 = {}",
                self.grid_size,
                self.degree + 1
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Argument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::Argument(format!(
                "ridge must be non-negative, got {}",
                self.ridge
            )));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Argument(format!("domain [{a}, {b}] is empty")));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.domain, self.grid_size)
    }
}

fn uniform_grid((a, b): (f64, f64), size: usize) -> Vec<f64> {
    let step = (b - a) / (size - 1) as f64;
    (0..size)
        .map(|i| {
            if i == size - 1 {
                b
            } else {
                a + step * i as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fit {
    pub curve: Polynomial,
    /// `sum (y - f(x))^2 + ridge * |beta|^2` at the solution.
    pub objective: f64,
    /// Grid size the constraints were finally enforced on.
    pub grid_size: usize,
    pub active_constraints: usize,
    pub diagnostics: Vec<Diagnostic>,
}

/// Shifted Legendre basis on `[a, b]`.
struct Basis {
    degree: usize,
    scale: f64,
    shift: f64,
}

impl Basis {
    fn new(degree: usize, (a, b): (f64, f64)) -> Self {
        Basis {
            degree,
            scale: 2.0 / (b - a),
            shift: -(a + b) / (b - a),
        }
    }

    /// Basis values and x-derivatives at `x`.
    fn eval(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let t = self.scale * x + self.shift;
        let p = self.degree + 1;
        let mut val = vec![0.0; p];
        let mut der = vec![0.0; p];
        val[0] = 1.0;
        if p > 1 {
            val[1] = t;
            der[1] = 1.0;
        }
        for k in 1..self.degree {
            let kf = k as f64;
            val[k + 1] = ((2.0 * kf + 1.0) * t * val[k] - kf * val[k - 1]) / (kf + 1.0);
            der[k + 1] = der[k - 1] + (2.0 * kf + 1.0) * val[k];
        }
        for d in der.iter_mut() {
            *d *= self.scale;
        }
        (val, der)
    }

    /// Column `k` holds the monomial coefficients of basis polynomial `k`.
    fn to_monomial(&self) -> Vec<Vec<f64>> {
        let p = self.degree + 1;
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
        cols.push({
            let mut v = vec![0.0; p];
            v[0] = 1.0;
            v
        });
        if p > 1 {
            let mut v = vec![0.0; p];
            v[0] = self.shift;
            v[1] = self.scale;
            cols.push(v);
        }
        for k in 1..self.degree {
            let kf = k as f64;
            let mut next = vec![0.0; p];
            // (2k+1) t P_k, with t = scale x + shift
            for i in 0..p {
                let c = cols[k][i];
                if c == 0.0 {
                    continue;
                }
                next[i] += (2.0 * kf + 1.0) * self.shift * c;
                if i + 1 < p {
                    next[i + 1] += (2.0 * kf + 1.0) * self.scale * c;
                }
            }
            for i in 0..p {
                next[i] = (next[i] - kf * cols[k - 1][i]) / (kf + 1.0);
            }
            cols.push(next);
        }
        cols
    }
}

/// Objective of `poly` on `points`: squared residuals plus the ridge penalty.
pub fn fit_objective(poly: &Polynomial, points: &[(f64, f64)], ridge: f64) -> f64 {
    let sse: f64 = points
        .iter()
        .map(|&(x, y)| (y - poly.eval(x)).powi(2))
        .sum();
    sse + ridge * poly.coefficients().iter().map(|c| c * c).sum::<f64>()
}

/// Largest derivative-ceiling violation over `grid` and floor violation at `b`.
pub fn constraint_violation(
    poly: &Polynomial,
    les: f64,
    cfg: &FitConfig,
    grid: &[f64],
) -> (f64, f64) {
    let slope = grid
        .iter()
        .map(|&g| poly.derivative(g) - les)
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = cfg.epsilon - poly.eval(cfg.domain.1);
    (slope, floor)
}

/// Fits the expectation curve. See the module docs for the problem solved.
pub fn fit_monotone_polynomial(points: &[(f64, f64)], les: f64, cfg: &FitConfig) -> Result<Fit> {
    cfg.validate()?;
    if points.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: points.len(),
        });
    }
    if !(les < 0.0) || !les.is_finite() {
        return Err(Error::Argument(format!(
            "least expected slope must be negative, got {les}"
        )));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Validation("fit points must be finite".into()));
    }

    let mut diagnostics = Vec::new();
    let mut grid_size = cfg.grid_size;
    let mut refinements = 0;
    loop {
        let (curve, objective_qp, active) = solve_on_grid(points, les, cfg, grid_size)?;
        let grid = uniform_grid(cfg.domain, grid_size);
        let (slope_violation, floor_violation) = constraint_violation(&curve, les, cfg, &grid);
        if slope_violation > DERIVATIVE_TOL || floor_violation > FLOOR_TOL {
            return Err(Error::SolverFailure {
                iterations: 0,
                max_violation: slope_violation.max(floor_violation),
            });
        }
        let dense = uniform_grid(cfg.domain, (grid_size - 1) * 10 + 1);
        let (dense_violation, _) = constraint_violation(&curve, les, cfg, &dense);
        if dense_violation > DENSE_REL_TOL * les.abs() && refinements < MAX_REFINEMENTS {
            refinements += 1;
            grid_size = (grid_size - 1) * 2 + 1;
            diagnostics.push(Diagnostic::GridRefined { grid_size });
            continue;
        }
        debug_assert!(objective_qp.is_finite());
        let objective = fit_objective(&curve, points, cfg.ridge);
        return Ok(Fit {
            curve,
            objective,
            grid_size,
            active_constraints: active,
            diagnostics,
        });
    }
}

fn solve_on_grid(
    points: &[(f64, f64)],
    les: f64,
    cfg: &FitConfig,
    grid_size: usize,
) -> Result<(Polynomial, f64, usize)> {
    let p = cfg.degree + 1;
    let basis = Basis::new(cfg.degree, cfg.domain);
    let to_mono = basis.to_monomial();

    // Hessian 2 (Phi' Phi + ridge M' M), linear term -2 Phi' y.
    let mut hessian = vec![0.0; p * p];
    let mut linear = vec![0.0; p];
    for &(x, y) in points {
        let (phi, _) = basis.eval(x);
        for i in 0..p {
            linear[i] -= 2.0 * phi[i] * y;
            for k in 0..p {
                hessian[i * p + k] += 2.0 * phi[i] * phi[k];
            }
        }
    }
    for i in 0..p {
        for k in 0..p {
            let mtm: f64 = (0..p).map(|r| to_mono[i][r] * to_mono[k][r]).sum();
            hessian[i * p + k] += 2.0 * cfg.ridge * mtm;
        }
    }

    let grid = uniform_grid(cfg.domain, grid_size);
    let mut constraints = Vec::with_capacity(grid.len() + 1);
    let mut bounds = Vec::with_capacity(grid.len() + 1);
    for &g in &grid {
        let (_, der) = basis.eval(g);
        constraints.push(der.iter().map(|d| -d).collect::<Vec<_>>());
        bounds.push(-les);
    }
    let (at_b, _) = basis.eval(cfg.domain.1);
    constraints.push(at_b);
    bounds.push(cfg.epsilon);

    let sol = qp::solve(&hessian, &linear, &constraints, &bounds)?;
    let mut beta = vec![0.0; p];
    for (k, ck) in sol.x.iter().enumerate() {
        for (i, b) in beta.iter_mut().enumerate() {
            *b += to_mono[k][i] * ck;
        }
    }
    let y_sq: f64 = points.iter().map(|(_, y)| y * y).sum();
    let quad: f64 = (0..p)
        .map(|i| sol.x[i] * (0..p).map(|k| hessian[i * p + k] * sol.x[k]).sum::<f64>())
        .sum();
    let objective = 0.5 * quad + linear.iter().zip(&sol.x).map(|(a, x)| a * x).sum::<f64>() + y_sq;
    Ok((
        Polynomial { coefficients: beta },
        objective,
        sol.active.len(),
    ))
}
