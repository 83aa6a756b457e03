//! Robust statistics: chi-square quantiles, Minimum Covariance Determinant
//! estimation in one and two dimensions, MCD-based outlier masks and the least
//! expected slope used to bound the expectation curve's derivative.
//!
//! Two-dimensional MCD is exact (exhaustive over all h-subsets) for up to
//! [`EXHAUSTIVE_LIMIT`] points and falls back to a seeded concentration-step
//! search above that. One-dimensional MCD is always exact: the optimal subset is
//! a contiguous window of the sorted data.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::diagnostics::Diagnostic;
use crate::error::{Error, Result};
use crate::measurements::NormalizedPoint;

pub const EXHAUSTIVE_LIMIT: usize = 25;
pub const FAST_MCD_STARTS: usize = 500;
const FAST_MCD_KEEP: usize = 10;
const FAST_MCD_MAX_STEPS: usize = 200;

/// Relative determinant below which a scatter estimate is treated as singular.
const SINGULAR_TOL: f64 = 1e-12;

pub fn chi2_cdf(x: f64, dof: u32) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        gamma_lr(f64::from(dof) / 2.0, x / 2.0)
    }
}

/// Upper tail `P(X > x)` of a chi-square variable.
pub fn chi2_sf(x: f64, dof: u32) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        gamma_ur(f64::from(dof) / 2.0, x / 2.0)
    }
}

/// Inverse chi-square CDF by bracketing and bisection on the regularized
/// incomplete gamma function.
pub fn chi2_quantile(p: f64, dof: u32) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Argument(format!(
            "probability must lie in (0, 1), got {p}"
        )));
    }
    if dof < 1 {
        return Err(Error::Argument(
            "chi-square needs at least one degree of freedom".into(),
        ));
    }
    let mut lo = 0.0;
    let mut hi = f64::from(dof).max(1.0) * 2.0;
    while chi2_cdf(hi, dof) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi2_cdf(mid, dof) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Observations handed to [`mcd`].
#[derive(Debug, Clone, Copy)]
pub enum Sample<'a> {
    Univariate(&'a [f64]),
    Bivariate(&'a [[f64; 2]]),
}

impl Sample<'_> {
    pub fn len(&self) -> usize {
        match self {
            Sample::Univariate(v) => v.len(),
            Sample::Bivariate(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            Sample::Univariate(_) => 1,
            Sample::Bivariate(_) => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McdEstimate {
    pub location: Vec<f64>,
    /// Row-major `dim x dim` scatter of the subset, consistency factor applied.
    pub scatter: Vec<f64>,
    /// Determinant of the uncorrected (maximum-likelihood) subset scatter.
    pub raw_determinant: f64,
    pub consistency: f64,
    /// Indices of the selected h-subset, ascending.
    pub subset: Vec<usize>,
    pub robust_sq_distances: Vec<f64>,
}

pub fn default_subset_size(n: usize, dim: usize) -> usize {
    // floor((n + dim + 1) / 2)
    (n + dim).div_ceil(2)
}

/// Factor making the MCD scatter consistent at the normal model:
/// `(h/n) / P(chi2_{dim+2} <= chi2_{dim}^{-1}(h/n))`.
pub fn consistency_factor(h: usize, n: usize, dim: usize) -> f64 {
    let alpha = h as f64 / n as f64;
    if alpha >= 1.0 {
        return 1.0;
    }
    match chi2_quantile(alpha, dim as u32) {
        Ok(q) => alpha / chi2_cdf(q, dim as u32 + 2),
        Err(_) => 1.0,
    }
}

/// Minimum Covariance Determinant estimate with subset size `h`
/// (default `floor((n + dim + 1) / 2)`). `seed` only matters for the
/// randomized search used above [`EXHAUSTIVE_LIMIT`] bivariate points.
pub fn mcd(sample: Sample<'_>, h: Option<usize>, seed: u64) -> Result<McdEstimate> {
    let n = sample.len();
    let dim = sample.dim();
    if n < dim + 2 {
        return Err(Error::InsufficientData {
            needed: dim + 2,
            got: n,
        });
    }
    let h = h.unwrap_or_else(|| default_subset_size(n, dim));
    let min_h = default_subset_size(n, dim);
    if h < min_h || h > n {
        return Err(Error::Argument(format!(
            "subset size {h} outside [{min_h}, {n}] for {n} points"
        )));
    }
    match sample {
        Sample::Univariate(values) => mcd_1d(values, h),
        Sample::Bivariate(points) => mcd_2d(points, h, seed),
    }
}

fn mcd_1d(values: &[f64], h: usize) -> Result<McdEstimate> {
    let n = values.len();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(
            "MCD input contains non-finite values".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let center = values[order[n / 2]];
    let sorted: Vec<f64> = order.iter().map(|&i| values[i] - center).collect();

    let mut prefix = vec![0.0; n + 1];
    let mut prefix_sq = vec![0.0; n + 1];
    for (i, v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
        prefix_sq[i + 1] = prefix_sq[i] + v * v;
    }
    let hf = h as f64;
    let window_var = |start: usize| {
        let s = prefix[start + h] - prefix[start];
        let sq = prefix_sq[start + h] - prefix_sq[start];
        let mean = s / hf;
        ((sq / hf) - mean * mean).max(0.0)
    };

    let mut best_start = 0;
    let mut best_var = window_var(0);
    for start in 1..=(n - h) {
        let var = window_var(start);
        if var < best_var {
            best_var = var;
            best_start = start;
        }
    }

    let total_mean = prefix[n] / n as f64;
    let total_var = (prefix_sq[n] / n as f64 - total_mean * total_mean).max(0.0);
    if best_var <= SINGULAR_TOL * total_var || best_var == 0.0 {
        return Err(Error::DegenerateGeometry(
            "univariate MCD subset has zero variance".into(),
        ));
    }

    let mut subset: Vec<usize> = order[best_start..best_start + h].to_vec();
    subset.sort_unstable();
    // Two-pass moments on the chosen subset for accuracy.
    let location = subset.iter().map(|&i| values[i]).sum::<f64>() / hf;
    let raw_var = subset
        .iter()
        .map(|&i| (values[i] - location).powi(2))
        .sum::<f64>()
        / hf;
    let consistency = consistency_factor(h, n, 1);
    let scatter = raw_var * consistency;
    let robust_sq_distances = values
        .iter()
        .map(|v| (v - location).powi(2) / scatter)
        .collect();
    Ok(McdEstimate {
        location: vec![location],
        scatter: vec![scatter],
        raw_determinant: raw_var,
        consistency,
        subset,
        robust_sq_distances,
    })
}

/// Running sums for a bivariate subset.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Moments {
    fn push(self, p: [f64; 2]) -> Self {
        Moments {
            sx: self.sx + p[0],
            sy: self.sy + p[1],
            sxx: self.sxx + p[0] * p[0],
            syy: self.syy + p[1] * p[1],
            sxy: self.sxy + p[0] * p[1],
        }
    }

    fn determinant(&self, count: f64) -> f64 {
        let mx = self.sx / count;
        let my = self.sy / count;
        let cxx = self.sxx / count - mx * mx;
        let cyy = self.syy / count - my * my;
        let cxy = self.sxy / count - mx * my;
        cxx * cyy - cxy * cxy
    }
}

/// Mean and MLE covariance `[cxx, cxy, cyy]` of a subset, computed in two passes.
fn subset_stats(points: &[[f64; 2]], subset: &[usize]) -> ([f64; 2], [f64; 3]) {
    let h = subset.len() as f64;
    let mut mean = [0.0; 2];
    for &i in subset {
        mean[0] += points[i][0];
        mean[1] += points[i][1];
    }
    mean[0] /= h;
    mean[1] /= h;
    let mut cov = [0.0; 3];
    for &i in subset {
        let dx = points[i][0] - mean[0];
        let dy = points[i][1] - mean[1];
        cov[0] += dx * dx;
        cov[1] += dx * dy;
        cov[2] += dy * dy;
    }
    (mean, [cov[0] / h, cov[1] / h, cov[2] / h])
}

fn det2(cov: &[f64; 3]) -> f64 {
    cov[0] * cov[2] - cov[1] * cov[1]
}

fn sq_mahalanobis(p: [f64; 2], mean: [f64; 2], cov: &[f64; 3]) -> f64 {
    let det = det2(cov);
    let dx = p[0] - mean[0];
    let dy = p[1] - mean[1];
    (cov[2] * dx * dx - 2.0 * cov[1] * dx * dy + cov[0] * dy * dy) / det
}

/// Scale against which determinants are judged singular.
fn determinant_scale(points: &[[f64; 2]]) -> f64 {
    let all: Vec<usize> = (0..points.len()).collect();
    let (_, cov) = subset_stats(points, &all);
    let trace = cov[0] + cov[2];
    trace * trace
}

struct Exhaustive<'a> {
    points: &'a [[f64; 2]],
    h: usize,
    count: f64,
    chosen: Vec<usize>,
    best: Vec<usize>,
    best_det: f64,
}

impl Exhaustive<'_> {
    /// Depth-first enumeration in lexicographic order; strict improvement keeps
    /// the lexicographically smallest subset among exact ties.
    fn visit(&mut self, start: usize, moments: Moments) {
        let depth = self.chosen.len();
        if depth == self.h {
            let det = moments.determinant(self.count);
            if det < self.best_det {
                self.best_det = det;
                self.best.clone_from(&self.chosen);
            }
            return;
        }
        let last = self.points.len() - (self.h - depth);
        for i in start..=last {
            self.chosen.push(i);
            self.visit(i + 1, moments.push(self.points[i]));
            self.chosen.pop();
        }
    }
}

fn exhaustive_subset(points: &[[f64; 2]], h: usize) -> Vec<usize> {
    // Centering on the coordinate-wise median keeps the running sums well scaled.
    let median = |axis: usize| {
        let mut v: Vec<f64> = points.iter().map(|p| p[axis]).collect();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (mx, my) = (median(0), median(1));
    let centered: Vec<[f64; 2]> = points.iter().map(|p| [p[0] - mx, p[1] - my]).collect();
    let mut search = Exhaustive {
        points: &centered,
        h,
        count: h as f64,
        chosen: Vec::with_capacity(h),
        best: Vec::new(),
        best_det: f64::INFINITY,
    };
    search.visit(0, Moments::default());
    search.best
}

/// One concentration step: the h points closest under the subset's own estimate.
fn c_step(points: &[[f64; 2]], subset: &[usize], h: usize) -> Option<Vec<usize>> {
    let (mean, cov) = subset_stats(points, subset);
    if det2(&cov) <= 0.0 {
        return None;
    }
    let mut order: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, &p)| (sq_mahalanobis(p, mean, &cov), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut next: Vec<usize> = order[..h].iter().map(|&(_, i)| i).collect();
    next.sort_unstable();
    Some(next)
}

fn subset_det(points: &[[f64; 2]], subset: &[usize]) -> f64 {
    det2(&subset_stats(points, subset).1)
}

/// Randomized concentration-step search over `FAST_MCD_STARTS` elemental starts.
fn fast_subset(points: &[[f64; 2]], h: usize, seed: u64) -> Vec<usize> {
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates: Vec<(f64, Vec<usize>)> = Vec::with_capacity(FAST_MCD_STARTS);
    for _ in 0..FAST_MCD_STARTS {
        let perm = index::sample(&mut rng, n, n).into_vec();
        let mut start: Vec<usize> = perm[..3].to_vec();
        let mut next = 3;
        while subset_det(points, &start) <= 0.0 && next < n {
            start.push(perm[next]);
            next += 1;
        }
        let Some(mut subset) = c_step(points, &start, h) else {
            continue;
        };
        for _ in 0..2 {
            match c_step(points, &subset, h) {
                Some(s) => subset = s,
                None => break,
            }
        }
        candidates.push((subset_det(points, &subset), subset));
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    candidates.dedup_by(|a, b| a.1 == b.1);

    let mut best: Option<(f64, Vec<usize>)> = None;
    for (_, mut subset) in candidates.into_iter().take(FAST_MCD_KEEP) {
        for _ in 0..FAST_MCD_MAX_STEPS {
            match c_step(points, &subset, h) {
                Some(s) if s != subset => subset = s,
                _ => break,
            }
        }
        let det = subset_det(points, &subset);
        let better = match &best {
            None => true,
            Some((d, s)) => det < *d || (det == *d && subset < *s),
        };
        if better {
            best = Some((det, subset));
        }
    }
    best.map(|(_, s)| s).unwrap_or_else(|| (0..h).collect())
}

fn mcd_2d(points: &[[f64; 2]], h: usize, seed: u64) -> Result<McdEstimate> {
    let n = points.len();
    if points
        .iter()
        .any(|p| !p[0].is_finite() || !p[1].is_finite())
    {
        return Err(Error::Validation(
            "MCD input contains non-finite values".into(),
        ));
    }
    let subset = if n <= EXHAUSTIVE_LIMIT {
        exhaustive_subset(points, h)
    } else {
        fast_subset(points, h, seed)
    };

    let (mean, raw) = subset_stats(points, &subset);
    let raw_det = det2(&raw);
    let scale = determinant_scale(points);
    if !(raw_det > SINGULAR_TOL * scale) || raw_det <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "bivariate MCD subset scatter is singular".into(),
        ));
    }
    let consistency = consistency_factor(h, n, 2);
    let scatter = [
        raw[0] * consistency,
        raw[1] * consistency,
        raw[2] * consistency,
    ];
    let robust_sq_distances = points
        .iter()
        .map(|&p| sq_mahalanobis(p, mean, &scatter))
        .collect();
    Ok(McdEstimate {
        location: mean.to_vec(),
        scatter: vec![scatter[0], scatter[1], scatter[1], scatter[2]],
        raw_determinant: raw_det,
        consistency,
        subset,
        robust_sq_distances,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierMask {
    /// `true` marks an outlier.
    pub flags: Vec<bool>,
    pub threshold: f64,
    pub sq_distances: Vec<f64>,
    pub subset: Vec<usize>,
}

impl OutlierMask {
    /// Mask with every point kept, used when the robust scatter is singular.
    pub fn all_inliers(n: usize, threshold: f64) -> Self {
        OutlierMask {
            flags: vec![false; n],
            threshold,
            sq_distances: vec![0.0; n],
            subset: (0..n).collect(),
        }
    }

    pub fn outlier_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn inlier_indices(&self) -> Vec<usize> {
        self.flags
            .iter()
            .enumerate()
            .filter(|(_, &f)| !f)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Flags points whose squared robust distance exceeds the chi-square
/// `percentile` quantile with 2 degrees of freedom.
pub fn detect_outliers(
    points: &[NormalizedPoint],
    percentile: f64,
    seed: u64,
) -> Result<OutlierMask> {
    if points.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: points.len(),
        });
    }
    let threshold = chi2_quantile(percentile, 2)?;
    let xy: Vec<[f64; 2]> = points.iter().map(|p| [p.eff, p.acc]).collect();
    let est = mcd(Sample::Bivariate(&xy), None, seed)?;
    let flags = est
        .robust_sq_distances
        .iter()
        .map(|&d| d > threshold)
        .collect();
    Ok(OutlierMask {
        flags,
        threshold,
        sq_distances: est.robust_sq_distances,
        subset: est.subset,
    })
}

pub const LES_FALLBACK: f64 = -0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LesEstimate {
    pub value: f64,
    /// Every negative pairwise slope, in pair order.
    pub slopes: Vec<f64>,
    /// Slopes surviving the robust filter.
    pub kept: Vec<f64>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Negative slopes `(acc_j - acc_i) / (eff_j - eff_i)` over unordered pairs.
pub fn negative_slopes(points: &[NormalizedPoint]) -> Vec<f64> {
    let mut slopes = Vec::new();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if a.eff != b.eff {
                let d = (b.acc - a.acc) / (b.eff - a.eff);
                if d < 0.0 {
                    slopes.push(d);
                }
            }
        }
    }
    slopes
}

/// Quantile of ascending `sorted` by linear interpolation between order
/// statistics at position `q * (len - 1)`.
pub fn quantile_linear(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Least expected slope: the `quantile` of the negative pairwise slopes after
/// removing slopes flagged by univariate MCD at `filter_percentile` (no filtering
/// when `None`). Falls back to [`LES_FALLBACK`] when no pair trades off.
pub fn les(
    points: &[NormalizedPoint],
    quantile: f64,
    filter_percentile: Option<f64>,
) -> Result<LesEstimate> {
    if points.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: points.len(),
        });
    }
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::Argument(format!(
            "quantile must lie in [0, 1], got {quantile}"
        )));
    }
    let slopes = negative_slopes(points);
    let mut diagnostics = Vec::new();
    if slopes.is_empty() {
        diagnostics.push(Diagnostic::NoTradeOff {
            fallback: LES_FALLBACK,
        });
        return Ok(LesEstimate {
            value: LES_FALLBACK,
            slopes,
            kept: Vec::new(),
            diagnostics,
        });
    }

    let mut kept = match filter_percentile {
        Some(pct) if slopes.len() >= 3 => {
            let threshold = chi2_quantile(pct, 1)?;
            match mcd(Sample::Univariate(&slopes), None, 0) {
                Ok(est) => slopes
                    .iter()
                    .zip(&est.robust_sq_distances)
                    .filter(|(_, &d)| d <= threshold)
                    .map(|(&s, _)| s)
                    .collect(),
                Err(Error::DegenerateGeometry(_)) => {
                    diagnostics.push(Diagnostic::SingularScatter {
                        stage: "slope filter".into(),
                    });
                    slopes.clone()
                }
                Err(e) => return Err(e),
            }
        }
        _ => slopes.clone(),
    };
    if kept.is_empty() {
        kept = slopes.clone();
    }
    kept.sort_by(f64::total_cmp);
    let value = quantile_linear(&kept, quantile);
    Ok(LesEstimate {
        value,
        slopes,
        kept,
        diagnostics,
    })
}
