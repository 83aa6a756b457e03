//! Stability harness: hyperparameter sweeps, leave-one-out, noise perturbation
//! and size-bias tests over either rating method.
//!
//! Cases run in parallel but reports always come back in enumeration order.

use std::collections::HashMap;
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circ::circ_rate_all;
use crate::diagnostics::Diagnostic;
use crate::error::{Error, Result};
use crate::fixture;
use crate::measurements::{minmax_normalize, to_points, Dataset, Measurement, NormalizedPoint};
use crate::oter::{oter_rate, OterConfig};
use crate::stats::{kendall_tau_b, kruskal_wallis, spearman_rho, KwResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Circ,
    Oter,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Circ => "circ",
            Method::Oter => "oter",
        }
    }
}

/// Ratings of `points` under `method`. CIRC only reads the scale from `cfg`.
pub fn rate(
    points: &[NormalizedPoint],
    method: Method,
    cfg: &OterConfig,
) -> Result<(Vec<u32>, Vec<Diagnostic>)> {
    match method {
        Method::Circ => Ok((
            circ_rate_all(points, cfg.scale)
                .into_iter()
                .map(|r| r.rating)
                .collect(),
            vec![],
        )),
        Method::Oter => {
            let res = oter_rate(points, cfg)?;
            Ok((res.ratings, res.diagnostics))
        }
    }
}

/// Agreement between a rating vector and its baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    /// Mean absolute rating change in classes.
    pub drift: f64,
    pub worst_change: u32,
    /// Share of models whose class is unchanged.
    pub stability_fraction: f64,
    /// `None` when the correlation is undefined (a constant rating vector).
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
}

pub fn compare(baseline: &[u32], other: &[u32]) -> Comparison {
    assert_eq!(baseline.len(), other.len());
    let changes: Vec<u32> = baseline
        .iter()
        .zip(other)
        .map(|(a, b)| a.abs_diff(*b))
        .collect();
    let n = changes.len().max(1) as f64;
    let a: Vec<f64> = baseline.iter().map(|&r| f64::from(r)).collect();
    let b: Vec<f64> = other.iter().map(|&r| f64::from(r)).collect();
    let (spearman, kendall) = if a == b && a.len() >= 2 {
        // Identical vectors agree perfectly even when constant.
        (Some(1.0), Some(1.0))
    } else {
        (spearman_rho(&a, &b).ok(), kendall_tau_b(&a, &b).ok())
    };
    Comparison {
        drift: changes.iter().map(|&c| f64::from(c)).sum::<f64>() / n,
        worst_change: changes.iter().copied().max().unwrap_or(0),
        stability_fraction: changes.iter().filter(|&&c| c == 0).count() as f64 / n,
        spearman,
        kendall,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Case {
    pub label: String,
    pub comparison: Option<Comparison>,
    pub error: Option<String>,
}

impl Case {
    fn from_result(label: String, result: Result<Comparison>) -> Self {
        match result {
            Ok(c) => Case {
                label,
                comparison: Some(c),
                error: None,
            },
            Err(e) => Case {
                label,
                comparison: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelChange {
    pub model_id: String,
    pub mean_change: f64,
    pub worst_change: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Summary {
    pub cases: usize,
    pub failures: usize,
    /// Cases whose Spearman or Kendall correlation was undefined.
    pub undefined_correlations: usize,
    pub mean_drift: f64,
    pub max_drift: f64,
    pub worst_change: u32,
    pub mean_stability: f64,
    pub min_stability: f64,
    pub mean_spearman: Option<f64>,
    pub min_spearman: Option<f64>,
    pub mean_kendall: Option<f64>,
    pub min_kendall: Option<f64>,
}

fn summarize(cases: &[Case]) -> Summary {
    let ok: Vec<&Comparison> = cases.iter().filter_map(|c| c.comparison.as_ref()).collect();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let min = |v: &[f64]| v.iter().copied().reduce(f64::min);
    let drift: Vec<f64> = ok.iter().map(|c| c.drift).collect();
    let stability: Vec<f64> = ok.iter().map(|c| c.stability_fraction).collect();
    let rho: Vec<f64> = ok.iter().filter_map(|c| c.spearman).collect();
    let tau: Vec<f64> = ok.iter().filter_map(|c| c.kendall).collect();
    Summary {
        cases: cases.len(),
        failures: cases.len() - ok.len(),
        undefined_correlations: ok
            .iter()
            .filter(|c| c.spearman.is_none() || c.kendall.is_none())
            .count(),
        mean_drift: mean(&drift).unwrap_or(0.0),
        max_drift: drift.iter().copied().fold(0.0, f64::max),
        worst_change: ok.iter().map(|c| c.worst_change).max().unwrap_or(0),
        mean_stability: mean(&stability).unwrap_or(0.0),
        min_stability: min(&stability).unwrap_or(0.0),
        mean_spearman: mean(&rho),
        min_spearman: min(&rho),
        mean_kendall: mean(&tau),
        min_kendall: min(&tau),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub method: Method,
    pub cases: Vec<Case>,
    /// Per-model changes across cases; filled by the noise harness only.
    pub per_model: Vec<ModelChange>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub degrees: Vec<usize>,
    pub mcd_percentiles: Vec<f64>,
    pub les_quantiles: Vec<f64>,
    pub epsilons: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            degrees: vec![3, 4, 5, 6, 7],
            mcd_percentiles: vec![0.90, 0.95, 0.975],
            les_quantiles: vec![0.65, 0.70, 0.75, 0.80],
            epsilons: vec![0.001, 0.01, 0.1],
        }
    }
}

impl SweepGrid {
    /// Grid holding only the baseline's own values.
    pub fn single(baseline: &OterConfig) -> Self {
        SweepGrid {
            degrees: vec![baseline.degree],
            mcd_percentiles: vec![baseline.mcd_percentile],
            les_quantiles: vec![baseline.les_quantile],
            epsilons: vec![baseline.epsilon],
        }
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
            * self.mcd_percentiles.len()
            * self.les_quantiles.len()
            * self.epsilons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every configuration, degree varying slowest and epsilon fastest.
    pub fn configs(&self, baseline: &OterConfig) -> Vec<OterConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &degree in &self.degrees {
            for &mcd_percentile in &self.mcd_percentiles {
                for &les_quantile in &self.les_quantiles {
                    for &epsilon in &self.epsilons {
                        out.push(OterConfig {
                            degree,
                            mcd_percentile,
                            les_quantile,
                            epsilon,
                            ..*baseline
                        });
                    }
                }
            }
        }
        out
    }
}

pub fn config_label(cfg: &OterConfig) -> String {
    format!(
        "degree={} mcd={} les={} epsilon={}",
        cfg.degree, cfg.mcd_percentile, cfg.les_quantile, cfg.epsilon
    )
}

/// Runs OTER for every grid configuration and compares against `baseline`.
pub fn hyperparam_sweep(
    points: &[NormalizedPoint],
    grid: &SweepGrid,
    baseline: &OterConfig,
) -> Result<StabilityReport> {
    if grid.is_empty() {
        return Err(Error::Argument("sweep grid is empty".into()));
    }
    let (reference, _) = rate(points, Method::Oter, baseline)?;
    let cases: Vec<Case> = grid
        .configs(baseline)
        .par_iter()
        .map(|cfg| {
            let result = rate(points, Method::Oter, cfg).map(|(r, _)| compare(&reference, &r));
            Case::from_result(config_label(cfg), result)
        })
        .collect();
    let summary = summarize(&cases);
    Ok(StabilityReport {
        method: Method::Oter,
        cases,
        per_model: vec![],
        summary,
    })
}

fn renormalized(points: &[NormalizedPoint]) -> Result<Vec<NormalizedPoint>> {
    let eff: Vec<f64> = points.iter().map(|p| p.eff).collect();
    let acc: Vec<f64> = points.iter().map(|p| p.acc).collect();
    let (eff, acc) = (minmax_normalize(&eff)?, minmax_normalize(&acc)?);
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, p)| NormalizedPoint::new(p.model_id.clone(), eff.values[i], acc.values[i]))
        .collect())
}

/// Drops each model in turn and compares the survivors' ratings with their
/// ratings on the full set.
pub fn loo_analysis(
    points: &[NormalizedPoint],
    method: Method,
    cfg: &OterConfig,
    renormalize: bool,
) -> Result<StabilityReport> {
    if points.len() < 5 {
        return Err(Error::InsufficientData {
            needed: 5,
            got: points.len(),
        });
    }
    let (reference, _) = rate(points, method, cfg)?;
    let cases: Vec<Case> = (0..points.len())
        .into_par_iter()
        .map(|excluded| {
            let result = (|| {
                let mut rest: Vec<NormalizedPoint> = points.to_vec();
                rest.remove(excluded);
                if renormalize {
                    rest = renormalized(&rest)?;
                }
                let (ratings, _) = rate(&rest, method, cfg)?;
                let mut base = reference.clone();
                base.remove(excluded);
                Ok(compare(&base, &ratings))
            })();
            Case::from_result(points[excluded].model_id.clone(), result)
        })
        .collect();
    let summary = summarize(&cases);
    Ok(StabilityReport {
        method,
        cases,
        per_model: vec![],
        summary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub amplitude: f64,
    pub trials: usize,
    pub seed: u64,
    /// Perturb normalized values additively (clamped to [0, 1]) instead of
    /// scaling raw measurements.
    pub additive: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            amplitude: 0.05,
            trials: 20,
            seed: 0,
            additive: false,
        }
    }
}

/// Uniform factors in `[1 - a, 1 + a]`: for each trial, for each model in
/// dataset order, one draw for accuracy then one for energy, all from a single
/// `ChaCha8Rng::seed_from_u64(seed)` stream. Each factor is `1 - a + 2a * u`
/// with `u = rng.gen::<f64>()`.
pub fn noise_factors(models: usize, noise: &NoiseConfig) -> Vec<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let a = noise.amplitude;
    let mut draw = move || 1.0 - a + 2.0 * a * rng.gen::<f64>();
    (0..noise.trials)
        .map(|_| {
            (0..models)
                .map(|_| {
                    let acc = draw();
                    let energy = draw();
                    (acc, energy)
                })
                .collect()
        })
        .collect()
}

fn perturbed_points(
    dataset: &Dataset,
    baseline: &[NormalizedPoint],
    factors: &[(f64, f64)],
    noise: &NoiseConfig,
) -> Result<Vec<NormalizedPoint>> {
    if noise.additive {
        // A factor f = 1 + s maps to the shift s in [-a, a].
        return Ok(baseline
            .iter()
            .zip(factors)
            .map(|(p, &(fa, fe))| {
                NormalizedPoint::new(
                    p.model_id.clone(),
                    (p.eff + (fe - 1.0)).clamp(0.0, 1.0),
                    (p.acc + (fa - 1.0)).clamp(0.0, 1.0),
                )
            })
            .collect());
    }
    let scaled: Vec<Measurement> = dataset
        .measurements()
        .iter()
        .zip(factors)
        .map(|(m, &(fa, fe))| Measurement {
            accuracy_raw: m.accuracy_raw * fa,
            energy_joules: m.energy_joules * fe,
            ..m.clone()
        })
        .collect();
    Ok(to_points(&Dataset::new(scaled)?)?.points.points)
}

/// Perturbs the raw measurements `trials` times and compares each rerun with
/// the unperturbed ratings.
pub fn noise_robustness(
    dataset: &Dataset,
    method: Method,
    cfg: &OterConfig,
    noise: &NoiseConfig,
) -> Result<StabilityReport> {
    if noise.trials < 1 {
        return Err(Error::Argument("noise needs at least one trial".into()));
    }
    if !(0.0..1.0).contains(&noise.amplitude) {
        return Err(Error::Argument(format!(
            "noise amplitude must lie in [0, 1), got {}",
            noise.amplitude
        )));
    }
    let baseline = to_points(dataset)?.points.points;
    let (reference, _) = rate(&baseline, method, cfg)?;
    let factors = noise_factors(dataset.len(), noise);
    let runs: Vec<Result<Vec<u32>>> = factors
        .par_iter()
        .map(|f| {
            let pts = perturbed_points(dataset, &baseline, f, noise)?;
            rate(&pts, method, cfg).map(|(r, _)| r)
        })
        .collect();

    let mut per_model: Vec<ModelChange> = baseline
        .iter()
        .map(|p| ModelChange {
            model_id: p.model_id.clone(),
            mean_change: 0.0,
            worst_change: 0,
        })
        .collect();
    let mut completed = 0usize;
    let mut cases = Vec::with_capacity(runs.len());
    for (trial, run) in runs.into_iter().enumerate() {
        let result = run.map(|ratings| {
            completed += 1;
            for ((m, a), b) in per_model.iter_mut().zip(&reference).zip(&ratings) {
                let change = a.abs_diff(*b);
                m.mean_change += f64::from(change);
                m.worst_change = m.worst_change.max(change);
            }
            compare(&reference, &ratings)
        });
        cases.push(Case::from_result(format!("trial {trial}"), result));
    }
    for m in &mut per_model {
        m.mean_change /= completed.max(1) as f64;
    }
    let summary = summarize(&cases);
    Ok(StabilityReport {
        method,
        cases,
        per_model,
        summary,
    })
}

/// Model to size-bucket assignment; buckets keep first-appearance order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeGroupMap {
    buckets: Vec<String>,
    assignment: HashMap<String, usize>,
}

impl SizeGroupMap {
    pub fn new<I, S, T>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut buckets: Vec<String> = Vec::new();
        let mut assignment = HashMap::new();
        for (model, bucket) in pairs {
            let (model, bucket) = (model.into(), bucket.into());
            let idx = match buckets.iter().position(|b| *b == bucket) {
                Some(i) => i,
                None => {
                    buckets.push(bucket);
                    buckets.len() - 1
                }
            };
            if assignment.insert(model.clone(), idx).is_some() {
                return Err(Error::Validation(format!(
                    "model {model} assigned to a size bucket twice"
                )));
            }
        }
        Ok(SizeGroupMap {
            buckets,
            assignment,
        })
    }

    /// The embedded dataset's (5, 6, 11) grouping.
    pub fn fixture() -> Self {
        let mut rows: Vec<_> = fixture::size_groups();
        rows.sort_by_key(|(_, b)| *b);
        SizeGroupMap::new(rows.into_iter().map(|(m, b)| (m, b.label())))
            .expect("fixture model ids are unique")
    }

    /// Reads `model_id,size_bucket` rows.
    pub fn parse<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(source);
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("missing column {name}"),
                })
        };
        let (mi, bi) = (col("model_id")?, col("size_bucket")?);
        let mut pairs = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let (m, b) = (record.get(mi).unwrap_or(""), record.get(bi).unwrap_or(""));
            if m.is_empty() || b.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: "empty model_id or size_bucket".into(),
                });
            }
            pairs.push((m.to_string(), b.to_string()));
        }
        SizeGroupMap::new(pairs)
    }

    pub fn buckets(&self) -> &[String] {
        &self.buckets
    }

    pub fn bucket_of(&self, model_id: &str) -> Option<&str> {
        self.assignment
            .get(model_id)
            .map(|&i| self.buckets[i].as_str())
    }

    /// Model ids and labels in bucket order, then by model id.
    pub fn entries(&self) -> Vec<(&str, &str)> {
        let mut out: Vec<(usize, &str)> = self
            .assignment
            .iter()
            .map(|(m, &i)| (i, m.as_str()))
            .collect();
        out.sort();
        out.into_iter()
            .map(|(i, m)| (m, self.buckets[i].as_str()))
            .collect()
    }
}

/// Kruskal-Wallis test of the ratings across size buckets. Every rated model
/// must have a bucket; buckets with no rated model are skipped.
pub fn size_bias_test(ratings: &[(String, u32)], groups: &SizeGroupMap) -> Result<KwResult> {
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); groups.buckets.len()];
    for (model, rating) in ratings {
        let idx = groups
            .assignment
            .get(model)
            .ok_or_else(|| Error::Validation(format!("model {model} has no size bucket")))?;
        samples[*idx].push(f64::from(*rating));
    }
    samples.retain(|g| !g.is_empty());
    kruskal_wallis(&samples)
}
