//! Early-session ratio prediction.
//!
//! The width-to-spacing ratio of a band's states is close to stationary
//! across a session, which makes the value measured in the opening
//! stretch a usable estimate for the rest of the day. The predictor fits
//! the early stretch of a band series, takes its ratio as the estimate,
//! then fits each later window independently and scores how far any of
//! them drift from the estimate. A drift past the threshold flags a
//! session whose state structure changed mid-day.

use crate::error::{Error, Result};
use crate::fitting::{fit_series, DetectOptions, FitOptions};
use crate::stats::extract_statistics;
use crate::timeseries::TimeSeries;
use serde::{Deserialize, Serialize};

/// Ratio measured in one scoring window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRatio {
    /// Window start time, seconds.
    pub start: f64,
    /// Width-to-spacing ratio of the states fitted in this window;
    /// `None` when the window held too few states to measure one.
    pub ratio: Option<f64>,
    /// Number of states fitted in the window.
    pub count: usize,
}

/// Predictor controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorOptions {
    /// Length of the anchoring early stretch, in hours. Default 1.5.
    pub early_hours: f64,
    /// Length of each scoring window, seconds. Default 3600.
    pub window_length: f64,
    /// Largest deviation from the early estimate still considered
    /// stationary. Default 0.03.
    pub threshold: f64,
}

impl Default for PredictorOptions {
    fn default() -> Self {
        PredictorOptions {
            early_hours: 1.5,
            window_length: 3600.0,
            threshold: 0.03,
        }
    }
}

impl PredictorOptions {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("early_hours", self.early_hours),
            ("window_length", self.window_length),
            ("threshold", self.threshold),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    message: format!("must be positive and finite, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// An early-session estimate and how the rest of the session tracked it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioTrack {
    /// Ratio fitted over the early stretch.
    pub early_estimate: f64,
    /// States fitted in the early stretch.
    pub early_count: usize,
    /// Scoring window length, seconds.
    pub window_length: f64,
    /// Per-window ratios over the remainder of the session.
    pub window_ratios: Vec<WindowRatio>,
    /// Largest `|window ratio - early_estimate|` over measurable windows.
    pub max_abs_deviation: f64,
    /// Deviation threshold the track was scored against.
    pub threshold: f64,
    /// Whether every measurable window stayed within the threshold.
    pub within_threshold: bool,
}

/// Minimum states a stretch must yield before its ratio counts.
const MIN_STATES_FOR_RATIO: usize = 4;

/// Fits one window and extracts its ratio; windows that cannot produce a
/// ratio (nothing detected, fit degenerate, too few states) come back as
/// `None` rather than failing the whole track.
fn window_ratio(
    window: &TimeSeries,
    start: f64,
    fit_options: &FitOptions,
    detect: &DetectOptions,
) -> Result<WindowRatio> {
    let fit = match fit_series(window, fit_options, detect) {
        Ok(fit) => fit,
        Err(e) => {
            return match e.class() {
                crate::error::ErrorClass::Analysis => Ok(WindowRatio {
                    start,
                    ratio: None,
                    count: 0,
                }),
                _ => Err(e),
            };
        }
    };
    let count = fit.model.len();
    if count < MIN_STATES_FOR_RATIO {
        return Ok(WindowRatio {
            start,
            ratio: None,
            count,
        });
    }
    match extract_statistics(&fit.model) {
        Ok(stats) => Ok(WindowRatio {
            start,
            ratio: Some(stats.ratio),
            count,
        }),
        Err(e) => match e.class() {
            crate::error::ErrorClass::Analysis => Ok(WindowRatio {
                start,
                ratio: None,
                count,
            }),
            _ => Err(e),
        },
    }
}

/// Splits a band series into consecutive windows of `window_length`
/// seconds and measures the state ratio in each. A trailing remainder at
/// least half a window long becomes a final short window; anything
/// shorter is dropped. Errors when the series cannot supply even one
/// window.
///
/// A window should cover roughly ten expected spacings or more; shorter
/// windows hold too few states for their ratio to mean much and mostly
/// come back as `None`.
pub fn hourly_ratios(
    series: &TimeSeries,
    window_length: f64,
    fit_options: &FitOptions,
    detect: &DetectOptions,
) -> Result<Vec<WindowRatio>> {
    if !window_length.is_finite() || window_length < 3.0 * series.step {
        return Err(Error::InvalidParameter {
            name: "window_length".into(),
            message: format!(
                "must be finite and at least three sample steps, got {window_length}"
            ),
        });
    }
    let span = series.span();
    if span < window_length / 2.0 {
        return Err(Error::SpanTooShort {
            span,
            needed: window_length / 2.0,
        });
    }
    let mut windows = Vec::new();
    let mut k = 0usize;
    loop {
        let w_start = series.start + k as f64 * window_length;
        let remaining = series.end() - w_start;
        if remaining < window_length / 2.0 {
            break;
        }
        let w_end = (w_start + window_length).min(series.end() + series.step / 2.0);
        let window = series.slice_time(w_start, w_end)?;
        windows.push(window_ratio(&window, w_start, fit_options, detect)?);
        k += 1;
    }
    Ok(windows)
}

/// Anchors a ratio estimate on the early stretch of a band series and
/// scores the rest of the session against it.
///
/// The early stretch must yield at least four states; later windows that
/// cannot are recorded with `ratio: None` and skipped in the deviation.
/// The input should be a single band (fit with a floating baseline), not
/// a raw composite session.
pub fn predict_and_score(
    series: &TimeSeries,
    options: &PredictorOptions,
    fit_options: &FitOptions,
    detect: &DetectOptions,
) -> Result<RatioTrack> {
    options.validate()?;
    let early_len = options.early_hours * 3600.0;
    let span = series.span();
    if span < early_len + options.window_length / 2.0 {
        return Err(Error::SpanTooShort {
            span,
            needed: early_len + options.window_length / 2.0,
        });
    }
    let early_end = series.start + early_len;
    let early = series.slice_time(series.start, early_end)?;
    let early_fit = fit_series(&early, fit_options, detect)?;
    let early_count = early_fit.model.len();
    if early_count < MIN_STATES_FOR_RATIO {
        return Err(Error::PredictorUnavailable {
            needed: MIN_STATES_FOR_RATIO,
            got: early_count,
        });
    }
    let early_estimate = extract_statistics(&early_fit.model)?.ratio;

    let rest = series.slice_time(early_end, series.end() + series.step / 2.0)?;
    let window_ratios = hourly_ratios(&rest, options.window_length, fit_options, detect)?;

    let mut max_abs_deviation = 0.0f64;
    let mut measured = 0usize;
    for w in &window_ratios {
        if let Some(r) = w.ratio {
            max_abs_deviation = max_abs_deviation.max((r - early_estimate).abs());
            measured += 1;
        }
    }
    if measured == 0 {
        return Err(Error::DegenerateSample {
            context: "no scoring window held enough states to measure a ratio".into(),
        });
    }
    Ok(RatioTrack {
        early_estimate,
        early_count,
        window_length: options.window_length,
        window_ratios,
        max_abs_deviation,
        threshold: options.threshold,
        within_threshold: max_abs_deviation <= options.threshold,
    })
}
