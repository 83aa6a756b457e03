use std::fs;
use std::path::{Path, PathBuf};

use ecorate::oter::OterConfig;
use ecorate::report::MethodSelection;
use ecorate::sensitivity::{NoiseConfig, SweepGrid};
use ecorate::RatingScale;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Raw,
    Normalized,
    Powerlog,
}

/// Settings read from `--config`. Every key is optional; unknown keys are errors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub method: Option<MethodSelection>,
    pub scale: Option<RatingScale>,
    pub input: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub oter: OterConfig,
    pub sweep: SweepGrid,
    pub noise: NoiseConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }
}

/// Command-line values that override the config file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub method: Option<MethodSelection>,
    pub scale: Option<u32>,
    pub input: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
}

/// Fully merged settings for one command.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub method: MethodSelection,
    pub input: Option<PathBuf>,
    pub mode: Mode,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub dt: f64,
    pub oter: OterConfig,
    pub sweep: SweepGrid,
    pub noise: NoiseConfig,
}

pub fn resolve(file: RunConfig, flags: Overrides) -> Result<Resolved, Failure> {
    let mut oter = file.oter;
    let scale = match flags.scale {
        Some(k) => RatingScale::new(k).map_err(|e| Failure::Config(e.to_string()))?,
        None => file.scale.unwrap_or(oter.scale),
    };
    oter.scale = scale;
    let seed = flags.seed.or(file.seed).unwrap_or(oter.seed);
    oter.seed = seed;
    oter.validate()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let mut noise = file.noise;
    if flags.seed.is_some() || file.seed.is_some() {
        noise.seed = seed;
    }
    let dt = flags.dt.or(file.dt).unwrap_or(1.0);
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Failure::Config(format!(
            "sampling interval must be positive, got {dt}"
        )));
    }
    Ok(Resolved {
        method: flags
            .method
            .or(file.method)
            .unwrap_or(MethodSelection::Both),
        input: flags.input.or(file.input),
        mode: flags.mode.or(file.mode).unwrap_or(Mode::Normalized),
        out: flags.out.or(file.out),
        seed,
        dt,
        oter,
        sweep: file.sweep,
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file: RunConfig =
            serde_json::from_str(r#"{"method":"circ","scale":7,"oter":{"degree":3}}"#).unwrap();
        let flags = Overrides {
            scale: Some(4),
            ..Overrides::default()
        };
        let r = resolve(file, flags).unwrap();
        assert_eq!(r.method, MethodSelection::Circ);
        assert_eq!(r.oter.scale.classes(), 4);
        assert_eq!(r.oter.degree, 3);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"metod":"circ"}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"oter":{"degre":3}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"scale":1}"#).is_err());
    }

    #[test]
    fn invalid_oter_values_are_config_errors() {
        let file: RunConfig = serde_json::from_str(r#"{"oter":{"degree":0}}"#).unwrap();
        assert!(matches!(
            resolve(file, Overrides::default()),
            Err(Failure::Config(_))
        ));
    }
}
