use std::fmt;

use serde::Serialize;

/// Non-fatal conditions noticed while producing a result.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// Every value on an axis was equal; the axis was mapped to 0.5.
    DegenerateSpread { axis: String },
    /// Normalization bounds differ from a reference set of bounds.
    BoundsChanged {
        axis: String,
        old: (f64, f64),
        new: (f64, f64),
    },
    /// No pair of points trades accuracy for efficiency; the fallback slope was used.
    NoTradeOff { fallback: f64 },
    /// Robust scatter was singular; every point was kept as an inlier.
    SingularScatter { stage: String },
    /// All raw scores coincide; every model got the midpoint rating.
    NoSpread { rating: u32 },
    /// All observations tied in a rank test.
    AllTied,
    /// The dense feasibility post-check failed and the fit was redone on a finer grid.
    GridRefined { grid_size: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DegenerateSpread { axis } => {
                write!(
                    f,
                    "degenerate spread on {axis}: all values equal, mapped to 0.5"
                )
            }
            Diagnostic::BoundsChanged { axis, old, new } => write!(
                f,
                "normalization bounds for {axis} changed from [{}, {}] to [{}, {}]",
                old.0, old.1, new.0, new.1
            ),
            Diagnostic::NoTradeOff { fallback } => {
                write!(
                    f,
                    "no trade-off pair found, least expected slope set to {fallback}"
                )
            }
            Diagnostic::SingularScatter { stage } => {
                write!(f, "singular robust scatter in {stage}, no outliers removed")
            }
            Diagnostic::NoSpread { rating } => {
                write!(f, "all raw scores equal, every model rated {rating}")
            }
            Diagnostic::AllTied => write!(f, "all observations tied"),
            Diagnostic::GridRefined { grid_size } => {
                write!(f, "constraint grid refined to {grid_size} points")
            }
        }
    }
}
