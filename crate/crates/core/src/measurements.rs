//! Ingestion of raw measurements and power logs, energy aggregation and
//! min-max normalization into the unit square.
//!
//! Accuracy is taken as higher-is-better. Metrics where lower is better must be
//! negated before they reach this module.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::Diagnostic;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Device {
    Cpu,
    Gpu,
    Ram,
}

impl FromStr for Device {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cpu" => Ok(Device::Cpu),
            "gpu" => Ok(Device::Gpu),
            "ram" => Ok(Device::Ram),
            other => Err(Error::Validation(format!(
                "unknown device '{other}' (expected cpu, gpu or ram)"
            ))),
        }
    }
}

impl fmt::Display for Device {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Device::Cpu => "cpu",
            Device::Gpu => "gpu",
            Device::Ram => "ram",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSample {
    pub device: Device,
    pub watts: f64,
    pub tick: u64,
}

/// Power samples for one model on one benchmark, taken every `dt` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLog {
    pub model_id: String,
    pub benchmark_id: String,
    pub samples: Vec<PowerSample>,
    pub dt: f64,
}

/// Total energy in joules: the sum of `watts * dt` over every sample of every device.
pub fn aggregate_energy(log: &EnergyLog) -> Result<f64> {
    if !(log.dt > 0.0) || !log.dt.is_finite() {
        return Err(Error::Argument(format!(
            "sampling interval must be positive, got {}",
            log.dt
        )));
    }
    let mut joules = 0.0;
    for (index, sample) in log.samples.iter().enumerate() {
        if !(sample.watts >= 0.0) || !sample.watts.is_finite() {
            return Err(Error::Validation(format!(
                "sample {index} of {}/{} has invalid power {} W",
                log.model_id, log.benchmark_id, sample.watts
            )));
        }
        joules += sample.watts * log.dt;
    }
    Ok(joules)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub model_id: String,
    pub benchmark_id: String,
    pub accuracy_raw: f64,
    pub energy_joules: f64,
}

/// Per-model measurements on a single benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    benchmark_id: String,
    measurements: Vec<Measurement>,
}

impl Dataset {
    pub fn new(measurements: Vec<Measurement>) -> Result<Self> {
        if measurements.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: measurements.len(),
            });
        }
        let benchmark_id = measurements[0].benchmark_id.clone();
        let mut seen = HashSet::new();
        for m in &measurements {
            if m.benchmark_id != benchmark_id {
                return Err(Error::Validation(format!(
                    "dataset mixes benchmarks '{benchmark_id}' and '{}'",
                    m.benchmark_id
                )));
            }
            if !seen.insert(m.model_id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate model_id '{}'",
                    m.model_id
                )));
            }
            if !m.accuracy_raw.is_finite() {
                return Err(Error::Validation(format!(
                    "accuracy of '{}' is not finite",
                    m.model_id
                )));
            }
            if !(m.energy_joules >= 0.0) || !m.energy_joules.is_finite() {
                return Err(Error::Validation(format!(
                    "energy of '{}' must be a non-negative number, got {}",
                    m.model_id, m.energy_joules
                )));
            }
        }
        Ok(Dataset {
            benchmark_id,
            measurements,
        })
    }

    pub fn benchmark_id(&self) -> &str {
        &self.benchmark_id
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }
}

/// A model in the unit square: normalized efficiency and accuracy, both higher-is-better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPoint {
    pub model_id: String,
    pub eff: f64,
    pub acc: f64,
}

impl NormalizedPoint {
    pub fn new(model_id: impl Into<String>, eff: f64, acc: f64) -> Self {
        NormalizedPoint {
            model_id: model_id.into(),
            eff,
            acc,
        }
    }
}

/// Normalized points for one benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub benchmark_id: String,
    pub points: Vec<NormalizedPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinMax {
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// Set when max == min and every value was mapped to 0.5.
    pub degenerate: bool,
}

pub fn minmax_normalize(values: &[f64]) -> Result<MinMax> {
    if values.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: values.len(),
        });
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Validation(format!(
            "cannot normalize non-finite value {bad}"
        )));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(MinMax {
            values: vec![0.5; values.len()],
            min,
            max,
            degenerate: true,
        });
    }
    let span = max - min;
    let values = values
        .iter()
        .map(|v| ((v - min) / span).clamp(0.0, 1.0))
        .collect();
    Ok(MinMax {
        values,
        min,
        max,
        degenerate: false,
    })
}

/// Result of normalizing a [`Dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub points: PointSet,
    pub accuracy_bounds: (f64, f64),
    pub energy_bounds: (f64, f64),
    pub diagnostics: Vec<Diagnostic>,
}

impl Normalization {
    /// Diagnostics for every axis whose bounds differ from `reference`.
    pub fn bounds_changes(&self, reference: &Normalization) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.accuracy_bounds != reference.accuracy_bounds {
            out.push(Diagnostic::BoundsChanged {
                axis: "accuracy".into(),
                old: reference.accuracy_bounds,
                new: self.accuracy_bounds,
            });
        }
        if self.energy_bounds != reference.energy_bounds {
            out.push(Diagnostic::BoundsChanged {
                axis: "energy".into(),
                old: reference.energy_bounds,
                new: self.energy_bounds,
            });
        }
        out
    }
}

/// `acc = minmax(accuracy)`, `eff = 1 - minmax(energy)`.
pub fn to_points(dataset: &Dataset) -> Result<Normalization> {
    let ms = dataset.measurements();
    let acc = minmax_normalize(&ms.iter().map(|m| m.accuracy_raw).collect::<Vec<_>>())?;
    let energy = minmax_normalize(&ms.iter().map(|m| m.energy_joules).collect::<Vec<_>>())?;

    let mut diagnostics = Vec::new();
    if acc.degenerate {
        diagnostics.push(Diagnostic::DegenerateSpread {
            axis: "accuracy".into(),
        });
    }
    if energy.degenerate {
        diagnostics.push(Diagnostic::DegenerateSpread {
            axis: "energy".into(),
        });
    }

    let points = ms
        .iter()
        .zip(acc.values.iter().zip(&energy.values))
        .map(|(m, (&a, &e))| NormalizedPoint::new(m.model_id.clone(), 1.0 - e, a))
        .collect();

    Ok(Normalization {
        points: PointSet {
            benchmark_id: dataset.benchmark_id().to_string(),
            points,
        },
        accuracy_bounds: (acc.min, acc.max),
        energy_bounds: (energy.min, energy.max),
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    Raw,
    Normalized,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parsed {
    Raw(Dataset),
    Normalized(PointSet),
}

pub fn parse_measurements<R: Read>(source: R, mode: InputMode) -> Result<Parsed> {
    match mode {
        InputMode::Raw => parse_raw(source).map(Parsed::Raw),
        InputMode::Normalized => parse_normalized(source).map(Parsed::Normalized),
    }
}

pub const RAW_HEADER: [&str; 4] = ["model_id", "benchmark_id", "accuracy", "energy_joules"];
pub const NORMALIZED_HEADER: [&str; 4] = ["model_id", "benchmark_id", "acc_norm", "eff_norm"];
pub const POWER_LOG_HEADER: [&str; 5] = ["model_id", "benchmark_id", "device", "tick", "watts"];

/// Header-driven CSV reader. Required columns may appear in any order and extra
/// columns are ignored, so rating reports can be fed back in.
struct Table<R: Read> {
    reader: csv::Reader<R>,
    columns: Vec<usize>,
}

impl<R: Read> Table<R> {
    fn open(source: R, required: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(source);
        let headers = reader.headers().map_err(|e| csv_error(&e, 1))?.clone();
        let mut columns = Vec::with_capacity(required.len());
        for name in required {
            let idx = headers
                .iter()
                .position(|h| h.trim_start_matches('\u{feff}') == *name)
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!(
                        "missing column '{name}' (expected header {})",
                        required.join(",")
                    ),
                })?;
            columns.push(idx);
        }
        Ok(Table { reader, columns })
    }

    /// Calls `row` with the line number and the required fields of each record.
    fn for_each(mut self, mut row: impl FnMut(u64, &[&str]) -> Result<()>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => return Ok(()),
                Ok(true) => {}
                Err(e) => return Err(csv_error(&e, 0)),
            }
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let fields: Vec<&str> = self
                .columns
                .iter()
                .map(|&c| record.get(c).unwrap_or(""))
                .collect();
            row(line, &fields)?;
        }
    }
}

fn csv_error(err: &csv::Error, fallback_line: u64) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(fallback_line);
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

fn parse_number(line: u64, field: &str, text: &str) -> Result<f64> {
    let value: f64 = text.parse().map_err(|_| Error::Parse {
        line,
        message: format!("{field}: '{text}' is not a number"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("{field}: '{text}' is not finite"),
        });
    }
    Ok(value)
}

fn require_id(line: u64, field: &str, text: &str) -> Result<String> {
    if text.is_empty() {
        return Err(Error::Parse {
            line,
            message: format!("{field} is empty"),
        });
    }
    Ok(text.to_string())
}

pub fn parse_raw<R: Read>(source: R) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    Table::open(source, &RAW_HEADER)?.for_each(|line, f| {
        let model_id = require_id(line, "model_id", f[0])?;
        let benchmark_id = require_id(line, "benchmark_id", f[1])?;
        let accuracy_raw = parse_number(line, "accuracy", f[2])?;
        let energy_joules = parse_number(line, "energy_joules", f[3])?;
        if energy_joules < 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("energy_joules must be non-negative, got {energy_joules}"),
            });
        }
        if let Some(first) = seen.insert(model_id.clone(), line) {
            return Err(Error::Validation(format!(
                "line {line}: duplicate model_id '{model_id}' (first seen on line {first})"
            )));
        }
        rows.push(Measurement {
            model_id,
            benchmark_id,
            accuracy_raw,
            energy_joules,
        });
        Ok(())
    })?;
    Dataset::new(rows)
}

pub fn parse_normalized<R: Read>(source: R) -> Result<PointSet> {
    let mut points = Vec::new();
    let mut benchmark: Option<String> = None;
    let mut seen: HashMap<String, u64> = HashMap::new();
    Table::open(source, &NORMALIZED_HEADER)?.for_each(|line, f| {
        let model_id = require_id(line, "model_id", f[0])?;
        let benchmark_id = require_id(line, "benchmark_id", f[1])?;
        let acc = parse_number(line, "acc_norm", f[2])?;
        let eff = parse_number(line, "eff_norm", f[3])?;
        if !(0.0..=1.0).contains(&acc) {
            return Err(Error::Range {
                line,
                field: "acc_norm",
                value: acc,
            });
        }
        if !(0.0..=1.0).contains(&eff) {
            return Err(Error::Range {
                line,
                field: "eff_norm",
                value: eff,
            });
        }
        match &benchmark {
            None => benchmark = Some(benchmark_id),
            Some(b) if *b != benchmark_id => {
                return Err(Error::Validation(format!(
                    "line {line}: file mixes benchmarks '{b}' and '{benchmark_id}'"
                )));
            }
            Some(_) => {}
        }
        if let Some(first) = seen.insert(model_id.clone(), line) {
            return Err(Error::Validation(format!(
                "line {line}: duplicate model_id '{model_id}' (first seen on line {first})"
            )));
        }
        points.push(NormalizedPoint { model_id, eff, acc });
        Ok(())
    })?;
    let benchmark_id = benchmark.ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
    Ok(PointSet {
        benchmark_id,
        points,
    })
}

/// Groups power-log rows by (model, benchmark) in order of first appearance.
pub fn parse_power_log<R: Read>(source: R, dt: f64) -> Result<Vec<EnergyLog>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Argument(format!(
            "sampling interval must be positive, got {dt}"
        )));
    }
    let mut logs: Vec<EnergyLog> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    Table::open(source, &POWER_LOG_HEADER)?.for_each(|line, f| {
        let model_id = require_id(line, "model_id", f[0])?;
        let benchmark_id = require_id(line, "benchmark_id", f[1])?;
        let device = f[2].parse::<Device>().map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let tick = f[3].parse::<u64>().map_err(|_| Error::Parse {
            line,
            message: format!("tick: '{}' is not a non-negative integer", f[3]),
        })?;
        let watts = parse_number(line, "watts", f[4])?;
        if watts < 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("watts must be non-negative, got {watts}"),
            });
        }
        let key = (model_id, benchmark_id);
        let slot = match index.get(&key) {
            Some(&i) => i,
            None => {
                logs.push(EnergyLog {
                    model_id: key.0.clone(),
                    benchmark_id: key.1.clone(),
                    samples: Vec::new(),
                    dt,
                });
                index.insert(key, logs.len() - 1);
                logs.len() - 1
            }
        };
        logs[slot].samples.push(PowerSample {
            device,
            watts,
            tick,
        });
        Ok(())
    })?;
    Ok(logs)
}

pub fn aggregate_logs(
    logs: &[EnergyLog],
    accuracy: impl Fn(&EnergyLog) -> f64,
) -> Result<Vec<Measurement>> {
    logs.iter()
        .map(|log| {
            Ok(Measurement {
                model_id: log.model_id.clone(),
                benchmark_id: log.benchmark_id.clone(),
                accuracy_raw: accuracy(log),
                energy_joules: aggregate_energy(log)?,
            })
        })
        .collect()
}

pub(crate) fn csv_writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink)
}

pub(crate) fn write_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes measurements in the raw schema. Floats use the shortest representation
/// that parses back to the same value.
pub fn write_raw<W: Write>(sink: W, measurements: &[Measurement]) -> Result<()> {
    let mut w = csv_writer(sink);
    w.write_record(RAW_HEADER).map_err(write_err)?;
    for m in measurements {
        w.write_record([
            m.model_id.as_str(),
            m.benchmark_id.as_str(),
            &m.accuracy_raw.to_string(),
            &m.energy_joules.to_string(),
        ])
        .map_err(write_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_normalized<W: Write>(sink: W, set: &PointSet) -> Result<()> {
    let mut w = csv_writer(sink);
    w.write_record(NORMALIZED_HEADER).map_err(write_err)?;
    for p in &set.points {
        w.write_record([
            p.model_id.as_str(),
            set.benchmark_id.as_str(),
            &p.acc.to_string(),
            &p.eff.to_string(),
        ])
        .map_err(write_err)?;
    }
    w.flush()?;
    Ok(())
}
