//! Per-model rating reports and CSV writers for reports, curves and stability
//! harness results.
//!
//! Rating and curve-point CSVs start with the normalized input columns, so any
//! of them can be fed back in as normalized input.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::circ::{circ_rate_all, RatingScale};
use crate::diagnostics::Diagnostic;
use crate::error::Result;
use crate::measurements::{csv_writer, write_err, PointSet};
use crate::oter::{oter_rate, OterConfig, OterResult};
use crate::polyfit::Polynomial;
use crate::sensitivity::StabilityReport;
use crate::stats::KwResult;

/// Samples written by [`write_curve`].
pub const CURVE_SAMPLES: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSelection {
    Circ,
    Oter,
    Both,
}

impl MethodSelection {
    pub fn circ(self) -> bool {
        matches!(self, MethodSelection::Circ | MethodSelection::Both)
    }

    pub fn oter(self) -> bool {
        matches!(self, MethodSelection::Oter | MethodSelection::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub model_id: String,
    pub eff: f64,
    pub acc: f64,
    pub circ_distance: Option<f64>,
    pub circ_rating: Option<u32>,
    pub oter_v: Option<f64>,
    pub oter_outlier: Option<bool>,
    pub oter_rating: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatingReport {
    pub benchmark_id: String,
    pub method: MethodSelection,
    pub scale: RatingScale,
    pub rows: Vec<ReportRow>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Rates every point of `set` with the selected method(s). The OTER result is
/// returned alongside so callers can export the curve.
pub fn build_report(
    set: &PointSet,
    method: MethodSelection,
    cfg: &OterConfig,
) -> Result<(RatingReport, Option<OterResult>)> {
    let mut rows: Vec<ReportRow> = set
        .points
        .iter()
        .map(|p| ReportRow {
            model_id: p.model_id.clone(),
            eff: p.eff,
            acc: p.acc,
            circ_distance: None,
            circ_rating: None,
            oter_v: None,
            oter_outlier: None,
            oter_rating: None,
        })
        .collect();
    let mut diagnostics = Vec::new();
    if method.circ() {
        for (row, r) in rows.iter_mut().zip(circ_rate_all(&set.points, cfg.scale)) {
            row.circ_distance = Some(r.distance);
            row.circ_rating = Some(r.rating);
        }
    }
    let oter = if method.oter() {
        let res = oter_rate(&set.points, cfg)?;
        for (i, row) in rows.iter_mut().enumerate() {
            row.oter_v = Some(res.raw_scores[i]);
            row.oter_outlier = Some(res.inlier_mask.flags[i]);
            row.oter_rating = Some(res.ratings[i]);
        }
        diagnostics.extend(res.diagnostics.iter().cloned());
        Some(res)
    } else {
        None
    };
    let report = RatingReport {
        benchmark_id: set.benchmark_id.clone(),
        method,
        scale: cfg.scale,
        rows,
        diagnostics,
    };
    Ok((report, oter))
}

fn opt<T: ToString>(v: Option<T>) -> Option<String> {
    v.map(|v| v.to_string())
}

/// Columns: `model_id,benchmark_id,acc_norm,eff_norm` followed by
/// `circ_distance,circ_rating` and/or `oter_v,oter_outlier,oter_rating`.
pub fn write_report<W: Write>(sink: W, report: &RatingReport) -> Result<()> {
    let mut w = csv_writer(sink);
    let mut header = vec!["model_id", "benchmark_id", "acc_norm", "eff_norm"];
    if report.method.circ() {
        header.extend(["circ_distance", "circ_rating"]);
    }
    if report.method.oter() {
        header.extend(["oter_v", "oter_outlier", "oter_rating"]);
    }
    w.write_record(&header).map_err(write_err)?;
    for row in &report.rows {
        let mut rec = vec![
            row.model_id.clone(),
            report.benchmark_id.clone(),
            row.acc.to_string(),
            row.eff.to_string(),
        ];
        if report.method.circ() {
            rec.extend(
                [opt(row.circ_distance), opt(row.circ_rating)]
                    .into_iter()
                    .flatten(),
            );
        }
        if report.method.oter() {
            rec.extend(
                [opt(row.oter_v), opt(row.oter_outlier), opt(row.oter_rating)]
                    .into_iter()
                    .flatten(),
            );
        }
        w.write_record(&rec).map_err(write_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `x,f_x` at [`CURVE_SAMPLES`] evenly spaced points of `domain`.
pub fn write_curve<W: Write>(sink: W, curve: &Polynomial, domain: (f64, f64)) -> Result<()> {
    let mut w = csv_writer(sink);
    w.write_record(["x", "f_x"]).map_err(write_err)?;
    let (a, b) = domain;
    for i in 0..CURVE_SAMPLES {
        let x = if i == CURVE_SAMPLES - 1 {
            b
        } else {
            a + (b - a) * i as f64 / (CURVE_SAMPLES - 1) as f64
        };
        w.write_record([x.to_string(), curve.eval(x).to_string()])
            .map_err(write_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Scored points next to the curve: `model_id,benchmark_id,acc_norm,eff_norm,is_outlier,v,rating`.
pub fn write_scored_points<W: Write>(sink: W, set: &PointSet, result: &OterResult) -> Result<()> {
    let mut w = csv_writer(sink);
    w.write_record([
        "model_id",
        "benchmark_id",
        "acc_norm",
        "eff_norm",
        "is_outlier",
        "v",
        "rating",
    ])
    .map_err(write_err)?;
    for (i, p) in set.points.iter().enumerate() {
        w.write_record([
            p.model_id.clone(),
            set.benchmark_id.clone(),
            p.acc.to_string(),
            p.eff.to_string(),
            result.inlier_mask.flags[i].to_string(),
            result.raw_scores[i].to_string(),
            result.ratings[i].to_string(),
        ])
        .map_err(write_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per harness case:
/// `method,case,drift,worst_change,stability_fraction,spearman,kendall,error`.
/// Undefined values are left empty.
pub fn write_stability<W: Write>(sink: W, reports: &[StabilityReport]) -> Result<()> {
    let mut w = csv_writer(sink);
    w.write_record([
        "method",
        "case",
        "drift",
        "worst_change",
        "stability_fraction",
        "spearman",
        "kendall",
        "error",
    ])
    .map_err(write_err)?;
    for report in reports {
        for case in &report.cases {
            let mut rec: [String; 8] = Default::default();
            rec[0] = report.method.name().to_string();
            rec[1] = case.label.clone();
            match &case.comparison {
                Some(c) => {
                    rec[2] = c.drift.to_string();
                    rec[3] = c.worst_change.to_string();
                    rec[4] = c.stability_fraction.to_string();
                    rec[5] = opt(c.spearman).unwrap_or_default();
                    rec[6] = opt(c.kendall).unwrap_or_default();
                }
                None => rec[7] = case.error.clone().unwrap_or_default(),
            }
            w.write_record(&rec).map_err(write_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-model noise changes: `method,model_id,mean_change,worst_change`.
pub fn write_model_changes<W: Write>(sink: W, reports: &[StabilityReport]) -> Result<()> {
    let mut w = csv_writer(sink);
    w.write_record(["method", "model_id", "mean_change", "worst_change"])
        .map_err(write_err)?;
    for report in reports {
        for m in &report.per_model {
            w.write_record([
                report.method.name().to_string(),
                m.model_id.clone(),
                m.mean_change.to_string(),
                m.worst_change.to_string(),
            ])
            .map_err(write_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `method,benchmark_id,h_statistic,dof,p_value` for size-bias tests.
pub fn write_size_bias<W: Write>(sink: W, rows: &[(String, String, KwResult)]) -> Result<()> {
    let mut w = csv_writer(sink);
    w.write_record(["method", "benchmark_id", "h_statistic", "dof", "p_value"])
        .map_err(write_err)?;
    for (method, benchmark, kw) in rows {
        w.write_record([
            method.clone(),
            benchmark.clone(),
            kw.h_statistic.to_string(),
            kw.dof.to_string(),
            kw.p_value.to_string(),
        ])
        .map_err(write_err)?;
    }
    w.flush()?;
    Ok(())
}
