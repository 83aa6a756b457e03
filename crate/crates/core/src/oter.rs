//! Rating by the ratio of observed to expected accuracy.
//!
//! Pipeline: flag outliers with a 2-D MCD, estimate the least expected slope
//! from the pairwise slopes of all models (or of the inliers only, when
//! configured), fit a strictly decreasing polynomial to the inliers, score
//! every model (outliers included) as `v = acc / f(eff)` and cut the range of
//! scores into K equal intervals.

use serde::{Deserialize, Serialize};

use crate::circ::RatingScale;
use crate::diagnostics::Diagnostic;
use crate::error::{Error, Result};
use crate::measurements::NormalizedPoint;
use crate::polyfit::{fit_monotone_polynomial, FitConfig, Polynomial};
use crate::robust::{detect_outliers, les, OutlierMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OterConfig {
    pub degree: usize,
    pub mcd_percentile: f64,
    pub les_quantile: f64,
    pub epsilon: f64,
    pub scale: RatingScale,
    /// Chi-square coverage of the univariate slope filter; `None` disables it.
    pub les_filter: Option<f64>,
    /// Build the slope set from the 2-D inliers instead of every model.
    pub les_from_inliers: bool,
    pub grid_size: usize,
    pub ridge: f64,
    pub domain: (f64, f64),
    pub seed: u64,
}

impl Default for OterConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        OterConfig {
            degree: fit.degree,
            mcd_percentile: 0.95,
            les_quantile: 0.75,
            epsilon: fit.epsilon,
            scale: RatingScale::default(),
            les_filter: Some(0.95),
            les_from_inliers: false,
            grid_size: fit.grid_size,
            ridge: fit.ridge,
            domain: fit.domain,
            seed: 0,
        }
    }
}

impl OterConfig {
    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            degree: self.degree,
            domain: self.domain,
            grid_size: self.grid_size,
            epsilon: self.epsilon,
            ridge: self.ridge,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("mcd_percentile", self.mcd_percentile),
            ("les_quantile", self.les_quantile),
        ] {
            if !(0.0 < p && p < 1.0) {
                return Err(Error::Argument(format!(
                    "{name} must lie in (0, 1), got {p}"
                )));
            }
        }
        if let Some(p) = self.les_filter {
            if !(0.0 < p && p < 1.0) {
                return Err(Error::Argument(format!(
                    "les_filter must lie in (0, 1), got {p}"
                )));
            }
        }
        self.fit_config().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OterResult {
    pub inlier_mask: OutlierMask,
    pub les_value: f64,
    pub curve: Polynomial,
    pub raw_scores: Vec<f64>,
    pub v_min: f64,
    pub v_max: f64,
    pub delta: f64,
    pub ratings: Vec<u32>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Observed over expected accuracy.
pub fn raw_score(point: &NormalizedPoint, curve: &Polynomial) -> Result<f64> {
    let expected = curve.eval(point.eff);
    if !(expected > 0.0) {
        return Err(Error::Contract(format!(
            "expectation curve is {expected} at eff = {} for {}",
            point.eff, point.model_id
        )));
    }
    Ok(point.acc / expected)
}

/// Interval ratings of `scores`: K equal intervals over `[v_min, v_max]`, with
/// an interval's upper boundary belonging to it. Returns ratings, `v_min`,
/// `v_max`, `delta` and a diagnostic when every score coincides.
pub fn rating_from_scores(
    scores: &[f64],
    scale: RatingScale,
) -> (Vec<u32>, f64, f64, f64, Option<Diagnostic>) {
    let k = scale.classes();
    let v_min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let v_max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let delta = (v_max - v_min) / f64::from(k);
    if !(delta > 0.0) {
        let mid = scale.midpoint();
        return (
            vec![mid; scores.len()],
            v_min,
            v_max,
            0.0,
            Some(Diagnostic::NoSpread { rating: mid }),
        );
    }
    let ratings = scores
        .iter()
        .map(|&v| {
            let r = ((v - v_min) / delta).ceil().clamp(1.0, f64::from(k)) as u32;
            // The maximum may land a hair under K after the division.
            if v == v_max {
                k
            } else {
                r
            }
        })
        .collect();
    (ratings, v_min, v_max, delta, None)
}

pub fn oter_rate(points: &[NormalizedPoint], cfg: &OterConfig) -> Result<OterResult> {
    cfg.validate()?;
    let mut diagnostics = Vec::new();

    let inlier_mask = match detect_outliers(points, cfg.mcd_percentile, cfg.seed) {
        Ok(mask) => mask,
        Err(Error::DegenerateGeometry(_)) => {
            diagnostics.push(Diagnostic::SingularScatter {
                stage: "outlier detection".into(),
            });
            let threshold = crate::robust::chi2_quantile(cfg.mcd_percentile, 2)?;
            OutlierMask::all_inliers(points.len(), threshold)
        }
        Err(e) => return Err(e),
    };
    let inliers: Vec<NormalizedPoint> = inlier_mask
        .inlier_indices()
        .into_iter()
        .map(|i| points[i].clone())
        .collect();

    let slope_source = if cfg.les_from_inliers {
        &inliers[..]
    } else {
        points
    };
    let estimate = les(slope_source, cfg.les_quantile, cfg.les_filter)?;
    diagnostics.extend(estimate.diagnostics);
    let xy: Vec<(f64, f64)> = inliers.iter().map(|p| (p.eff, p.acc)).collect();
    let fit = fit_monotone_polynomial(&xy, estimate.value, &cfg.fit_config())?;
    diagnostics.extend(fit.diagnostics);

    let raw_scores = points
        .iter()
        .map(|p| raw_score(p, &fit.curve))
        .collect::<Result<Vec<_>>>()?;
    let (ratings, v_min, v_max, delta, spread) = rating_from_scores(&raw_scores, cfg.scale);
    diagnostics.extend(spread);

    Ok(OterResult {
        inlier_mask,
        les_value: estimate.value,
        curve: fit.curve,
        raw_scores,
        v_min,
        v_max,
        delta,
        ratings,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{self, Benchmark};
    use approx::assert_abs_diff_eq;

    fn p(id: &str, eff: f64, acc: f64) -> NormalizedPoint {
        NormalizedPoint::new(id, eff, acc)
    }

    #[test]
    fn raw_score_examples() {
        let line = Polynomial::new(vec![1.0, -0.5]).unwrap();
        assert_abs_diff_eq!(
            raw_score(&p("a", 0.5, 0.9), &line).unwrap(),
            1.2,
            epsilon = 1e-15
        );
        assert_eq!(raw_score(&p("a", 0.3, 0.0), &line).unwrap(), 0.0);
        assert_eq!(raw_score(&p("a", 0.4, 0.8), &line).unwrap(), 1.0);
        let negative = Polynomial::new(vec![0.1, -1.0]).unwrap();
        assert!(matches!(
            raw_score(&p("a", 0.5, 0.5), &negative),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn interval_boundaries() {
        let five = RatingScale::default();
        let (r, lo, hi, d, diag) = rating_from_scores(&[0.0, 0.2, 0.2000001, 0.5, 1.0], five);
        assert_eq!((lo, hi, d), (0.0, 1.0, 0.2));
        assert_eq!(r, vec![1, 1, 2, 3, 5]);
        assert!(diag.is_none());
    }

    #[test]
    fn identical_points_get_midpoint() {
        let pts: Vec<_> = (0..6).map(|i| p(&format!("m{i}"), 0.5, 0.5)).collect();
        let res = oter_rate(&pts, &OterConfig::default()).unwrap();
        assert_eq!(res.ratings, vec![3; 6]);
        assert_eq!(res.delta, 0.0);
        assert!(res
            .diagnostics
            .iter()
            .any(|d| matches!(d, Diagnostic::NoSpread { rating: 3 })));
    }

    #[test]
    fn too_few_points() {
        let pts: Vec<_> = (0..3)
            .map(|i| p(&format!("m{i}"), f64::from(i) / 2.0, 0.5))
            .collect();
        assert!(matches!(
            oter_rate(&pts, &OterConfig::default()),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn fixture_headline_models() {
        let cfg = OterConfig::default();
        let lcb = oter_rate(&fixture::points(Benchmark::Lcb).points, &cfg).unwrap();
        assert_eq!(lcb.ratings[17], 5, "Seed-Coder on LCB");
        assert_eq!(lcb.ratings[12], 1, "Yi-Coder on LCB");
        let cxg = oter_rate(&fixture::points(Benchmark::Cxg).points, &cfg).unwrap();
        assert_eq!(cxg.ratings[20], 5, "granite on CXG");
        assert!(cxg.inlier_mask.flags[20]);
        assert_eq!(cxg.ratings[12], 1, "Yi-Coder on CXG");
    }

    #[test]
    fn scores_every_model() {
        let pts = fixture::points(Benchmark::Cxg).points;
        let res = oter_rate(&pts, &OterConfig::default()).unwrap();
        assert_eq!(res.raw_scores.len(), pts.len());
        assert_eq!(res.ratings.len(), pts.len());
        for (pt, v) in pts.iter().zip(&res.raw_scores) {
            assert_abs_diff_eq!(*v, pt.acc / res.curve.eval(pt.eff), epsilon = 0.0);
        }
    }
}
