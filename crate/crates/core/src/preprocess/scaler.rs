//! Column standardisation and row-wise unit-norm scaling.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{HarError, Result};
use crate::features::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// Per column: subtract the mean, divide by the population std.
    Standardize,
    /// Per row: divide by the Euclidean norm.
    UnitNorm,
}

impl ScaleMode {
    pub fn name(self) -> &'static str {
        match self {
            ScaleMode::Standardize => "standardize",
            ScaleMode::UnitNorm => "unit_norm",
        }
    }
}

impl fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScaleMode {
    type Err = HarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "standardize" | "standardise" | "standard" => Ok(ScaleMode::Standardize),
            "unit_norm" | "normalize" | "normalise" | "l2" => Ok(ScaleMode::UnitNorm),
            other => Err(HarError::InvalidParameter(format!("unknown scale mode '{other}'"))),
        }
    }
}

/// Fitted scaling parameters. `mean` and `std` are empty in unit-norm mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mode: ScaleMode,
    pub n_features: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_scaler(x: ArrayView2<f64>, mode: ScaleMode) -> Result<ScalerParams> {
    let (n, p) = x.dim();
    if n == 0 || p == 0 {
        return Err(HarError::EmptyInput("scaler training matrix".into()));
    }
    if n < 2 {
        return Err(HarError::TooFewSamples { needed: 2, got: n });
    }
    let (mean, std) = match mode {
        ScaleMode::UnitNorm => (Vec::new(), Vec::new()),
        ScaleMode::Standardize => x
            .axis_iter(Axis(1))
            .map(|col| {
                let c: Vec<f64> = col.iter().copied().collect();
                (stats::mean(&c), stats::variance(&c).sqrt())
            })
            .unzip(),
    };
    Ok(ScalerParams {
        mode,
        n_features: p,
        mean,
        std,
    })
}

pub fn apply_scaler(x: ArrayView2<f64>, params: &ScalerParams) -> Result<Array2<f64>> {
    if x.ncols() != params.n_features {
        return Err(HarError::ShapeMismatch {
            expected: params.n_features,
            got: x.ncols(),
        });
    }
    let mut out = x.to_owned();
    match params.mode {
        ScaleMode::Standardize => {
            for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
                let (m, s) = (params.mean[j], params.std[j]);
                if s == 0.0 {
                    col.fill(0.0);
                } else {
                    col.mapv_inplace(|v| (v - m) / s);
                }
            }
        }
        ScaleMode::UnitNorm => {
            for mut row in out.axis_iter_mut(Axis(0)) {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.mapv_inplace(|v| v / norm);
                }
            }
        }
    }
    Ok(out)
}
