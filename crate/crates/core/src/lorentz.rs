//! Overlapping-Lorentzian state models.
//!
//! A single state is a Lorentzian bump
//!
//! ```text
//! L(t) = m0 / (1 + x^2),   x = (2 / dt) * (t - t0)
//! ```
//!
//! so `m0` is the height at the center `t0` and `dt` is the full width at
//! half maximum: `L(t0 +/- dt/2) = m0 / 2`. Its integral over the whole
//! line is `pi * m0 * dt / 2`. A band is modeled as a constant baseline
//! plus a sum of such states, kept sorted by center time.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One Lorentzian state.
///
/// Serialized field names are the compact `m0` / `t0` / `dt` used by the
/// on-disk model format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianPeak {
    /// Height at the center. Always positive.
    #[serde(rename = "m0")]
    pub amplitude: f64,
    /// Center time in seconds.
    #[serde(rename = "t0")]
    pub center: f64,
    /// Full width at half maximum, in seconds. Always positive.
    #[serde(rename = "dt")]
    pub width: f64,
}

impl LorentzianPeak {
    /// Builds a peak, validating positivity and finiteness.
    pub fn new(amplitude: f64, center: f64, width: f64) -> Result<Self> {
        if !amplitude.is_finite() || amplitude <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "amplitude".into(),
                message: format!("must be positive and finite, got {amplitude}"),
            });
        }
        if !center.is_finite() {
            return Err(Error::NonFinite {
                context: "peak center".into(),
            });
        }
        if !width.is_finite() || width <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "width".into(),
                message: format!("must be positive and finite, got {width}"),
            });
        }
        Ok(LorentzianPeak {
            amplitude,
            center,
            width,
        })
    }

    /// Value of the state at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let x = 2.0 * (t - self.center) / self.width;
        self.amplitude / (1.0 + x * x)
    }

    /// Closed-form integral over the whole line: `pi * m0 * dt / 2`.
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.amplitude * self.width / 2.0
    }
}

/// A constant baseline plus a sum of Lorentzian states sorted by center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLorentzianModel {
    /// Additive offset under all states.
    pub baseline: f64,
    /// The states, sorted by ascending center time.
    pub peaks: Vec<LorentzianPeak>,
}

impl MultiLorentzianModel {
    /// Builds a model from peaks in any order; they are sorted by center.
    /// Requires at least one peak and a finite baseline.
    pub fn new(baseline: f64, mut peaks: Vec<LorentzianPeak>) -> Result<Self> {
        if !baseline.is_finite() {
            return Err(Error::NonFinite {
                context: "baseline".into(),
            });
        }
        if peaks.is_empty() {
            return Err(Error::EmptyModel {
                hint: "a model needs at least one peak".into(),
            });
        }
        for p in &peaks {
            // Re-validate so models assembled from raw JSON keep the invariants.
            LorentzianPeak::new(p.amplitude, p.center, p.width)?;
        }
        peaks.sort_by(|a, b| a.center.partial_cmp(&b.center).unwrap());
        Ok(MultiLorentzianModel { baseline, peaks })
    }

    /// Model value at time `t`: baseline plus every state's contribution.
    pub fn eval(&self, t: f64) -> f64 {
        self.baseline + self.peaks.iter().map(|p| p.eval(t)).sum::<f64>()
    }

    /// Number of states.
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    /// True when the model has no states (never true for a validated model).
    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// Arithmetic mean of the state amplitudes.
    pub fn mean_amplitude(&self) -> f64 {
        self.peaks.iter().map(|p| p.amplitude).sum::<f64>() / self.len() as f64
    }

    /// Mean model value over `[a, b]` by composite trapezoid quadrature
    /// with a fixed 10^4 panels, plus the width-to-spacing ratio that mean
    /// implies.
    ///
    /// For a train of states with mean width `<dt>` and mean spacing `<T>`,
    /// each state spreads an area of `pi * m0 * <dt> / 2` over one spacing,
    /// so `mean - baseline ~= (pi/2) * mean_amplitude * <dt> / <T>`.
    /// `implied_ratio` inverts that relation; it is a useful cross-check
    /// against ratios measured from fitted widths and intervals.
    pub fn mean_over(&self, a: f64, b: f64) -> Result<ModelMean> {
        if !a.is_finite() || !b.is_finite() || b <= a {
            return Err(Error::InvalidParameter {
                name: "span".into(),
                message: format!("need finite b > a, got [{a}, {b}]"),
            });
        }
        const PANELS: usize = 10_000;
        let h = (b - a) / PANELS as f64;
        let mut acc = 0.5 * (self.eval(a) + self.eval(b));
        for i in 1..PANELS {
            acc += self.eval(a + i as f64 * h);
        }
        let mean = acc * h / (b - a);
        let implied_ratio =
            (mean - self.baseline) / (std::f64::consts::FRAC_PI_2 * self.mean_amplitude());
        Ok(ModelMean {
            mean,
            implied_ratio,
        })
    }

    // ---- JSON ----------------------------------------------------------

    /// Serializes to the on-disk model JSON:
    /// `{"baseline": .., "peaks": [{"m0": .., "t0": .., "dt": ..}, ..]}`.
    pub fn to_json_string(&self) -> String {
        // Struct serialization of validated models cannot fail.
        serde_json::to_string_pretty(self).expect("model serialization")
    }

    /// Parses and validates the on-disk model JSON. Peaks are re-sorted by
    /// center, so hand-edited files need not be ordered.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: MultiLorentzianModel =
            serde_json::from_str(text).map_err(|e| Error::CsvParse {
                line: e.line(),
                message: format!("model json: {e}"),
            })?;
        MultiLorentzianModel::new(raw.baseline, raw.peaks)
    }

    /// Reads a model JSON file.
    pub fn load_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Io {
            path: path.as_ref().display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json_str(&text)
    }

    /// Writes the model JSON file.
    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json_string()).map_err(|e| Error::Io {
            path: path.as_ref().display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Output of [`MultiLorentzianModel::mean_over`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelMean {
    /// Mean model value over the requested span.
    pub mean: f64,
    /// Width-to-spacing ratio implied by that mean; see `mean_over`.
    pub implied_ratio: f64,
}
