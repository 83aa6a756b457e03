//! Concentric band rating around the ideal point (1, 1).
//!
//! The distance range `[0, sqrt(2)]` is split into K bands of width `sqrt(2)/K`.
//! A point on a band boundary belongs to the inner (better) band.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurements::NormalizedPoint;

/// Number of ordinal rating classes; K is best, 1 is worst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct RatingScale(u32);

impl RatingScale {
    pub fn new(classes: u32) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Argument(format!(
                "rating scale needs at least 2 classes, got {classes}"
            )));
        }
        Ok(RatingScale(classes))
    }

    pub fn classes(self) -> u32 {
        self.0
    }

    /// Rating used when there is no information to separate models.
    pub fn midpoint(self) -> u32 {
        (self.0 + 2) / 2
    }
}

impl Default for RatingScale {
    fn default() -> Self {
        RatingScale(5)
    }
}

impl TryFrom<u32> for RatingScale {
    type Error = Error;

    fn try_from(value: u32) -> Result<Self> {
        RatingScale::new(value)
    }
}

impl From<RatingScale> for u32 {
    fn from(scale: RatingScale) -> u32 {
        scale.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircResult {
    pub model_id: String,
    pub distance: f64,
    pub rating: u32,
}

/// Euclidean distance from the ideal point (1, 1).
pub fn circ_distance(point: &NormalizedPoint) -> f64 {
    (1.0 - point.eff).hypot(1.0 - point.acc)
}

/// Rating of a distance from the ideal point under `scale`.
pub fn rating_for_distance(distance: f64, scale: RatingScale) -> u32 {
    let k = scale.classes();
    if distance <= 0.0 {
        return k;
    }
    let width = SQRT_2 / f64::from(k);
    let band = (distance / width).ceil();
    // ceil >= 1 for positive distances; clamp absorbs drift past sqrt(2).
    let rating = f64::from(k) + 1.0 - band;
    rating.clamp(1.0, f64::from(k)) as u32
}

pub fn circ_rating(point: &NormalizedPoint, scale: RatingScale) -> CircResult {
    let distance = circ_distance(point);
    CircResult {
        model_id: point.model_id.clone(),
        distance,
        rating: rating_for_distance(distance, scale),
    }
}

pub fn circ_rate_all(points: &[NormalizedPoint], scale: RatingScale) -> Vec<CircResult> {
    points.iter().map(|p| circ_rating(p, scale)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p(eff: f64, acc: f64) -> NormalizedPoint {
        NormalizedPoint::new("m", eff, acc)
    }

    #[test]
    fn distance_examples() {
        assert_eq!(circ_distance(&p(1.0, 1.0)), 0.0);
        assert_abs_diff_eq!(circ_distance(&p(0.0, 0.0)), SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(circ_distance(&p(0.88, 1.0)), 0.12, epsilon = 1e-12);
    }

    #[test]
    fn published_rows() {
        let five = RatingScale::default();
        let r = circ_rating(&p(0.96, 0.52), five);
        assert_abs_diff_eq!(r.distance, 0.4817, epsilon = 1e-4);
        assert_eq!(r.rating, 4);
        let r = circ_rating(&p(0.0, 0.33), five);
        assert_abs_diff_eq!(r.distance, 1.2037, epsilon = 1e-4);
        assert_eq!(r.rating, 1);
    }

    #[test]
    fn endpoints_for_any_scale() {
        for k in 2..=12 {
            let scale = RatingScale::new(k).unwrap();
            assert_eq!(circ_rating(&p(1.0, 1.0), scale).rating, k);
            assert_eq!(circ_rating(&p(0.0, 0.0), scale).rating, 1);
        }
    }

    #[test]
    fn boundary_belongs_to_inner_band() {
        let five = RatingScale::default();
        assert_eq!(rating_for_distance(SQRT_2 / 5.0, five), 5);
        assert_eq!(rating_for_distance(SQRT_2 / 5.0 + 1e-12, five), 4);
        assert_eq!(rating_for_distance(SQRT_2 * (1.0 + 1e-12), five), 1);
    }

    #[test]
    fn scale_rejects_single_class() {
        assert!(RatingScale::new(1).is_err());
        assert_eq!(RatingScale::new(5).unwrap().midpoint(), 3);
        assert_eq!(RatingScale::new(4).unwrap().midpoint(), 3);
    }

    proptest! {
        #[test]
        fn band_width_bounds(eff in 0.0f64..=1.0, acc in 0.0f64..=1.0, k in 2u32..12) {
            let scale = RatingScale::new(k).unwrap();
            let r = circ_rating(&p(eff, acc), scale);
            prop_assert!((1..=k).contains(&r.rating));
            if r.distance > 0.0 {
                let w = SQRT_2 / f64::from(k);
                let lo = f64::from(k - r.rating) * w;
                let hi = f64::from(k + 1 - r.rating) * w;
                prop_assert!(r.distance > lo - 1e-12 && r.distance <= hi + 1e-12);
            }
        }
    }
}
