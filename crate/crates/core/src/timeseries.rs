//! Uniformly sampled intraday series and the structural band cascade.
//!
//! A session is a uniformly spaced grid of values. `decompose` splits it
//! into four additive bands by repeated smoothing of residuals:
//!
//! ```text
//! gross   = MA(series,            gross_window)     slowest structure
//! inter_1 = MA(series - gross,    inter1_window)    hour-scale structure
//! inter_2 = MA(residual,          inter2_window)    ten-minute structure
//! fine    = residual - inter_2                      fastest structure
//! ```
//!
//! The four bands always sum back to the input sample-for-sample; nothing
//! is discarded. Window lengths are wall-clock seconds and default to
//! 10800 / 1800 / 300.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// A uniformly sampled series: `values[i]` sits at `start + i * step` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    /// Time of the first sample, in seconds.
    pub start: f64,
    /// Spacing between samples, in seconds. Always positive.
    pub step: f64,
    /// Sample values. Always finite, always at least two.
    pub values: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series, validating the grid invariants: positive finite
    /// step, at least two samples, all values finite.
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !step.is_finite() || step <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "step".into(),
                message: format!("must be positive and finite, got {step}"),
            });
        }
        if !start.is_finite() {
            return Err(Error::NonFinite {
                context: "start time".into(),
            });
        }
        if values.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("value at index {i}"),
            });
        }
        Ok(TimeSeries {
            start,
            step,
            values,
        })
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the series holds no samples (never true for a validated series).
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time of sample `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    /// Time of the last sample.
    pub fn end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    /// Wall-clock extent from first to last sample.
    pub fn span(&self) -> f64 {
        (self.len() - 1) as f64 * self.step
    }

    /// Iterator over `(time, value)` pairs.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.time(i), v))
    }

    /// Restriction to the half-open time window `[from, to)`.
    ///
    /// The result keeps the original grid; its start is the time of the
    /// first retained sample. Errors when fewer than two samples fall in
    /// the window.
    pub fn slice_time(&self, from: f64, to: f64) -> Result<TimeSeries> {
        let first = ((from - self.start) / self.step).ceil().max(0.0) as usize;
        let mut sub = Vec::new();
        let mut i = first;
        while i < self.len() && self.time(i) < to {
            sub.push(self.values[i]);
            i += 1;
        }
        if sub.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: sub.len(),
            });
        }
        Ok(TimeSeries {
            start: self.time(first),
            step: self.step,
            values: sub,
        })
    }

    /// Elementwise difference `self - other`. Both series must share a grid.
    pub(crate) fn sub(&self, other: &TimeSeries) -> TimeSeries {
        debug_assert_eq!(self.len(), other.len());
        debug_assert!((self.start - other.start).abs() < 1e-9 * self.step.max(1.0));
        TimeSeries {
            start: self.start,
            step: self.step,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    // ---- CSV ------------------------------------------------------------

    /// Parses a two-column `time,value` CSV.
    ///
    /// The header row is optional. Times are either plain seconds (integer
    /// or decimal) or `HH:MM[:SS]` wall-clock; wall-clock times are
    /// converted to seconds since the first sample, so the resulting series
    /// starts at zero. Timestamps must be strictly increasing and uniformly
    /// spaced; violations report the first offending line.
    pub fn from_csv_str(text: &str) -> Result<TimeSeries> {
        let mut times: Vec<f64> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut lines: Vec<usize> = Vec::new();
        let mut wallclock: Option<bool> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let t_field = fields.next().unwrap_or("").trim();
            let v_field = fields.next().unwrap_or("").trim();
            if fields.next().is_some() {
                return Err(Error::CsvParse {
                    line: line_no,
                    message: "expected exactly two columns".into(),
                });
            }

            let parsed = parse_time(t_field);
            if parsed.is_none() && times.is_empty() {
                // Tolerate one header row before any data.
                continue;
            }
            let (t, is_clock) = parsed.ok_or_else(|| Error::CsvParse {
                line: line_no,
                message: format!("unparseable time {t_field:?}"),
            })?;
            match wallclock {
                None => wallclock = Some(is_clock),
                Some(w) if w != is_clock => {
                    return Err(Error::CsvParse {
                        line: line_no,
                        message: "mixed wall-clock and plain-second times".into(),
                    });
                }
                _ => {}
            }
            let v: f64 = v_field.parse().map_err(|_| Error::CsvParse {
                line: line_no,
                message: format!("unparseable value {v_field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("value at line {line_no}"),
                });
            }
            times.push(t);
            values.push(v);
            lines.push(line_no);
        }

        if times.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: times.len(),
            });
        }

        let mut deltas: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        for (i, &d) in deltas.iter().enumerate() {
            if d <= 0.0 {
                return Err(Error::NonMonotonicTime { line: lines[i + 1] });
            }
        }
        // The median delta is the expected step; blame the first delta that
        // disagrees with it, not the median itself.
        let expected = {
            deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
            deltas[deltas.len() / 2]
        };
        for i in 0..times.len() - 1 {
            let d = times[i + 1] - times[i];
            if (d - expected).abs() > 1e-6 * expected {
                return Err(Error::NonUniformSpacing {
                    line: lines[i + 1],
                    expected,
                    found: d,
                });
            }
        }
        let n = times.len();
        let step = (times[n - 1] - times[0]) / (n - 1) as f64;
        let start = if wallclock == Some(true) {
            0.0
        } else {
            times[0]
        };
        TimeSeries::new(start, step, values)
    }

    /// Reads a `time,value` CSV from disk. See [`TimeSeries::from_csv_str`].
    pub fn load_csv<P: AsRef<Path>>(path: P) -> Result<TimeSeries> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Io {
            path: path.as_ref().display().to_string(),
            message: e.to_string(),
        })?;
        TimeSeries::from_csv_str(&text)
    }

    /// Renders the series as a `time,value` CSV with a header row.
    /// Floats use shortest round-trip formatting, so output is
    /// byte-reproducible and reload-exact.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(16 * self.len());
        out.push_str("time,value\n");
        for (t, v) in self.points() {
            let _ = writeln!(out, "{t},{v}");
        }
        out
    }

    /// Writes the CSV form to disk.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv_string()).map_err(|e| Error::Io {
            path: path.as_ref().display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Parses one timestamp field. Returns `(seconds, was_wallclock)`, or
/// `None` when the field is neither plain seconds nor `HH:MM[:SS]`.
fn parse_time(field: &str) -> Option<(f64, bool)> {
    if field.contains(':') {
        let parts: Vec<&str> = field.split(':').collect();
        if parts.len() < 2 || parts.len() > 3 {
            return None;
        }
        let h: u32 = parts[0].parse().ok()?;
        let m: u32 = parts[1].parse().ok()?;
        let s: u32 = if parts.len() == 3 {
            parts[2].parse().ok()?
        } else {
            0
        };
        if m >= 60 || s >= 60 {
            return None;
        }
        Some(((h * 3600 + m * 60 + s) as f64, true))
    } else {
        let t: f64 = field.parse().ok()?;
        t.is_finite().then_some((t, false))
    }
}

// ---- resampling ---------------------------------------------------------

/// Changes the sampling interval of a series.
///
/// Supported ratios:
/// * `new_step == k * step` for integer `k >= 2`: each output value is the
///   mean of `k` consecutive inputs (non-overlapping blocks, labeled at the
///   block's first sample time); a trailing partial block is dropped.
/// * `step == r * new_step` for integer `r >= 2`: linear interpolation onto
///   the finer grid; original samples are preserved exactly, endpoints
///   included.
/// * `new_step == step`: identity.
///
/// Any other ratio is an unsupported-ratio error.
pub fn resample(ts: &TimeSeries, new_step: f64) -> Result<TimeSeries> {
    if !new_step.is_finite() || new_step <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "new_step".into(),
            message: format!("must be positive and finite, got {new_step}"),
        });
    }
    let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1e-300);

    if rel(new_step, ts.step) {
        return Ok(ts.clone());
    }

    let down = new_step / ts.step;
    if down > 1.0 && rel(down, down.round()) {
        let k = down.round() as usize;
        let out_len = ts.len() / k;
        if out_len < 2 {
            return Err(Error::TooShort {
                needed: 2 * k,
                got: ts.len(),
            });
        }
        let values = (0..out_len)
            .map(|i| {
                let block = &ts.values[i * k..(i + 1) * k];
                block.iter().sum::<f64>() / k as f64
            })
            .collect();
        return Ok(TimeSeries {
            start: ts.start,
            step: ts.step * k as f64,
            values,
        });
    }

    let up = ts.step / new_step;
    if up > 1.0 && rel(up, up.round()) {
        let r = up.round() as usize;
        let out_len = (ts.len() - 1) * r + 1;
        let mut values = Vec::with_capacity(out_len);
        for j in 0..out_len {
            let i = j / r;
            let m = j % r;
            if m == 0 {
                values.push(ts.values[i]);
            } else {
                let frac = m as f64 / r as f64;
                values.push(ts.values[i] + frac * (ts.values[i + 1] - ts.values[i]));
            }
        }
        return Ok(TimeSeries {
            start: ts.start,
            step: ts.step / r as f64,
            values,
        });
    }

    Err(Error::UnsupportedResampleRatio {
        from: ts.step,
        to: new_step,
    })
}

// ---- moving average -----------------------------------------------------

/// Centered moving average with a window of `window` seconds.
///
/// The window is rounded to the nearest odd sample count (ties round up).
/// Near the edges the window shrinks to the available samples, so the
/// output never references data outside the series: no phantom values are
/// invented before the first or after the last sample. Requires
/// `window >= 3 * step`.
pub fn moving_average(ts: &TimeSeries, window: f64) -> Result<TimeSeries> {
    if !window.is_finite() || window < 3.0 * ts.step {
        return Err(Error::InvalidParameter {
            name: "window".into(),
            message: format!(
                "must be at least 3 samples wide ({} s), got {window}",
                3.0 * ts.step
            ),
        });
    }
    let w = odd_window_count(window / ts.step);
    let half = w / 2;
    let n = ts.len();

    // Prefix sums let each (possibly shrunken) window be a single
    // subtraction. Values are bounded and n is modest, so drift stays far
    // below the tolerances anything downstream asserts.
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in &ts.values {
        acc += v;
        prefix.push(acc);
    }

    let values = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1) as f64
        })
        .collect();
    Ok(TimeSeries {
        start: ts.start,
        step: ts.step,
        values,
    })
}

/// Nearest odd integer to `x`, ties rounding up. `x` is at least 3 when
/// called through `moving_average`.
fn odd_window_count(x: f64) -> usize {
    let k = x.round();
    let w = if (k as i64) % 2 != 0 {
        k
    } else if x >= k {
        k + 1.0
    } else {
        k - 1.0
    };
    w as usize
}

// ---- decomposition ------------------------------------------------------

/// Smoothing windows for the three-stage cascade, in seconds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DecompositionConfig {
    /// Window isolating the slowest band. Default 10800 (3 h).
    pub gross_window: f64,
    /// Window isolating hour-scale structure. Default 1800 (30 min).
    pub inter1_window: f64,
    /// Window isolating ten-minute-scale structure. Default 300 (5 min).
    pub inter2_window: f64,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig {
            gross_window: 10800.0,
            inter1_window: 1800.0,
            inter2_window: 300.0,
        }
    }
}

impl DecompositionConfig {
    /// Checks window ordering and that each window spans at least three
    /// samples of a series with the given step.
    pub fn validate(&self, step: f64) -> Result<()> {
        let named = [
            ("gross_window", self.gross_window),
            ("inter1_window", self.inter1_window),
            ("inter2_window", self.inter2_window),
        ];
        for (name, w) in named {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    message: format!("must be positive and finite, got {w}"),
                });
            }
            if w < 3.0 * step {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    message: format!("must cover at least 3 samples ({} s)", 3.0 * step),
                });
            }
        }
        if !(self.gross_window > self.inter1_window && self.inter1_window > self.inter2_window) {
            return Err(Error::InvalidParameter {
                name: "windows".into(),
                message: "must be strictly decreasing: gross > inter1 > inter2".into(),
            });
        }
        Ok(())
    }
}

/// One structural band of a decomposed session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    /// Slowest structure: the session-scale trend.
    Gross,
    /// Hour-scale structure.
    Inter1,
    /// Ten-minute-scale structure.
    Inter2,
    /// Fastest structure: minute-scale states.
    Fine,
}

impl Band {
    /// Stable lowercase name, matching the CLI flag values and file names.
    pub fn name(self) -> &'static str {
        match self {
            Band::Gross => "gross",
            Band::Inter1 => "inter1",
            Band::Inter2 => "inter2",
            Band::Fine => "fine",
        }
    }
}

impl std::str::FromStr for Band {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gross" => Ok(Band::Gross),
            "inter1" => Ok(Band::Inter1),
            "inter2" => Ok(Band::Inter2),
            "fine" => Ok(Band::Fine),
            other => Err(Error::InvalidParameter {
                name: "band".into(),
                message: format!("unknown band {other:?}; expected gross|inter1|inter2|fine"),
            }),
        }
    }
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Result of the band cascade. All four bands share the input grid and sum
/// back to the input exactly (up to float rounding).
#[derive(Debug, Clone)]
pub struct BandDecomposition {
    /// Slowest band: `MA(input, gross_window)`.
    pub gross: TimeSeries,
    /// `MA(input - gross, inter1_window)`.
    pub inter_1: TimeSeries,
    /// `MA(remaining residual, inter2_window)`.
    pub inter_2: TimeSeries,
    /// Whatever the three smoothing passes left behind.
    pub fine: TimeSeries,
    /// The windows that produced this decomposition.
    pub config: DecompositionConfig,
}

impl BandDecomposition {
    /// The requested band.
    pub fn band(&self, which: Band) -> &TimeSeries {
        match which {
            Band::Gross => &self.gross,
            Band::Inter1 => &self.inter_1,
            Band::Inter2 => &self.inter_2,
            Band::Fine => &self.fine,
        }
    }

    /// Sums the four bands back into one series.
    pub fn reconstruct(&self) -> TimeSeries {
        let values = (0..self.gross.len())
            .map(|i| {
                self.gross.values[i]
                    + self.inter_1.values[i]
                    + self.inter_2.values[i]
                    + self.fine.values[i]
            })
            .collect();
        TimeSeries {
            start: self.gross.start,
            step: self.gross.step,
            values,
        }
    }

    /// Largest absolute difference between `reconstruct()` and `original`.
    pub fn reconstruction_residual(&self, original: &TimeSeries) -> f64 {
        self.reconstruct()
            .values
            .iter()
            .zip(&original.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Runs the three-stage cascade. The series must span at least twice the
/// gross window so the slowest band is meaningful.
pub fn decompose(ts: &TimeSeries, config: &DecompositionConfig) -> Result<BandDecomposition> {
    config.validate(ts.step)?;
    let needed = 2.0 * config.gross_window;
    if ts.span() < needed {
        return Err(Error::SpanTooShort {
            span: ts.span(),
            needed,
        });
    }
    let gross = moving_average(ts, config.gross_window)?;
    let r1 = ts.sub(&gross);
    let inter_1 = moving_average(&r1, config.inter1_window)?;
    let r2 = r1.sub(&inter_1);
    let inter_2 = moving_average(&r2, config.inter2_window)?;
    let fine = r2.sub(&inter_2);
    Ok(BandDecomposition {
        gross,
        inter_1,
        inter_2,
        fine,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(step: f64, values: &[f64]) -> TimeSeries {
        TimeSeries::new(0.0, step, values.to_vec()).unwrap()
    }

    #[test]
    fn csv_plain_seconds_with_header() {
        let ts = TimeSeries::from_csv_str("time,value\n0,1.5\n60,2.5\n120,3.5\n").unwrap();
        assert_eq!(ts.start, 0.0);
        assert_eq!(ts.step, 60.0);
        assert_eq!(ts.values, vec![1.5, 2.5, 3.5]);
    }

    #[test]
    fn csv_without_header_and_decimal_times() {
        let ts = TimeSeries::from_csv_str("0.5,1\n1.0,2\n1.5,3\n").unwrap();
        assert_eq!(ts.start, 0.5);
        assert!((ts.step - 0.5).abs() < 1e-12);
    }

    #[test]
    fn csv_wall_clock_converts_to_session_seconds() {
        let ts = TimeSeries::from_csv_str("09:30,10\n09:31,11\n09:32,12\n").unwrap();
        assert_eq!(ts.start, 0.0);
        assert_eq!(ts.step, 60.0);
        let ts = TimeSeries::from_csv_str("09:30:00,1\n09:30:10,2\n09:30:20,3\n").unwrap();
        assert_eq!(ts.step, 10.0);
    }

    #[test]
    fn csv_non_uniform_reports_first_offending_line() {
        let err =
            TimeSeries::from_csv_str("time,value\n0,1\n60,2\n120,3\n210,4\n").unwrap_err();
        match err {
            Error::NonUniformSpacing { line, .. } => assert_eq!(line, 5),
            other => panic!("expected NonUniformSpacing, got {other:?}"),
        }
    }

    #[test]
    fn csv_non_monotonic_reports_line() {
        let err = TimeSeries::from_csv_str("0,1\n60,2\n30,3\n").unwrap_err();
        match err {
            Error::NonMonotonicTime { line } => assert_eq!(line, 3),
            other => panic!("expected NonMonotonicTime, got {other:?}"),
        }
    }

    #[test]
    fn csv_too_short_and_bad_fields() {
        assert!(matches!(
            TimeSeries::from_csv_str(""),
            Err(Error::TooShort { .. })
        ));
        assert!(matches!(
            TimeSeries::from_csv_str("time,value\n0,1\n"),
            Err(Error::TooShort { .. })
        ));
        assert!(matches!(
            TimeSeries::from_csv_str("0,1\n60,abc\n"),
            Err(Error::CsvParse { line: 2, .. })
        ));
        assert!(matches!(
            TimeSeries::from_csv_str("0,1\n09:31,2\n"),
            Err(Error::CsvParse { line: 2, .. })
        ));
    }

    #[test]
    fn csv_round_trips_exactly() {
        let ts = series(10.0, &[1.25, -3.5, 0.1, 2.0 / 3.0]);
        let back = TimeSeries::from_csv_str(&ts.to_csv_string()).unwrap();
        assert_eq!(ts, back);
    }

    #[test]
    fn resample_upsample_interpolates_and_keeps_endpoints() {
        let ts = series(60.0, &[0.0, 60.0]);
        let up = resample(&ts, 30.0).unwrap();
        assert_eq!(up.step, 30.0);
        assert_eq!(up.values, vec![0.0, 30.0, 60.0]);
    }

    #[test]
    fn resample_downsample_block_means() {
        let ts = series(10.0, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let down = resample(&ts, 30.0).unwrap();
        assert_eq!(down.step, 30.0);
        assert_eq!(down.values, vec![2.0, 5.0]);
    }

    #[test]
    fn resample_identity_and_unsupported_ratio() {
        let ts = series(60.0, &[1.0, 2.0, 3.0]);
        assert_eq!(resample(&ts, 60.0).unwrap(), ts);
        assert!(matches!(
            resample(&ts, 40.0),
            Err(Error::UnsupportedResampleRatio { .. })
        ));
        assert!(matches!(
            resample(&ts, 90.0),
            Err(Error::UnsupportedResampleRatio { .. })
        ));
    }

    #[test]
    fn moving_average_impulse_spreads_over_window() {
        let ts = series(1.0, &[0.0, 0.0, 1.0, 0.0, 0.0]);
        let ma = moving_average(&ts, 3.0).unwrap();
        let expect = [0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0];
        for (got, want) in ma.values.iter().zip(expect) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn moving_average_keeps_linear_ramp_in_interior() {
        let values: Vec<f64> = (0..50).map(|i| 2.0 * i as f64 + 1.0).collect();
        let ts = series(1.0, &values);
        let ma = moving_average(&ts, 7.0).unwrap();
        for i in 3..47 {
            assert!((ma.values[i] - ts.values[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn moving_average_rejects_narrow_window() {
        let ts = series(60.0, &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            moving_average(&ts, 120.0),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn odd_window_rounding() {
        assert_eq!(odd_window_count(3.0), 3);
        assert_eq!(odd_window_count(3.6), 3);
        assert_eq!(odd_window_count(4.0), 5); // tie rounds up
        assert_eq!(odd_window_count(4.4), 5);
        assert_eq!(odd_window_count(30.0), 31);
        assert_eq!(odd_window_count(30.4), 31);
        assert_eq!(odd_window_count(29.6), 29);
    }

    #[test]
    fn decompose_constant_series_goes_entirely_to_gross() {
        let ts = series(10.0, &vec![5.0; 3000]);
        let cfg = DecompositionConfig {
            gross_window: 3000.0,
            inter1_window: 600.0,
            inter2_window: 100.0,
        };
        let d = decompose(&ts, &cfg).unwrap();
        for i in 0..ts.len() {
            assert!((d.gross.values[i] - 5.0).abs() < 1e-12);
            assert!(d.inter_1.values[i].abs() < 1e-12);
            assert!(d.inter_2.values[i].abs() < 1e-12);
            assert!(d.fine.values[i].abs() < 1e-12);
        }
    }

    #[test]
    fn decompose_requires_span_twice_gross_window() {
        let ts = series(10.0, &vec![1.0; 100]);
        let cfg = DecompositionConfig {
            gross_window: 600.0,
            inter1_window: 300.0,
            inter2_window: 60.0,
        };
        assert!(matches!(
            decompose(&ts, &cfg),
            Err(Error::SpanTooShort { .. })
        ));
    }

    #[test]
    fn decomposition_config_validation() {
        let bad = DecompositionConfig {
            gross_window: 300.0,
            inter1_window: 300.0,
            inter2_window: 60.0,
        };
        assert!(bad.validate(10.0).is_err());
        let bad = DecompositionConfig {
            inter2_window: -5.0,
            ..DecompositionConfig::default()
        };
        assert!(bad.validate(10.0).is_err());
        assert!(DecompositionConfig::default().validate(10.0).is_ok());
    }

    #[test]
    fn slice_time_keeps_grid() {
        let ts = series(10.0, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let s = ts.slice_time(15.0, 45.0).unwrap();
        assert_eq!(s.start, 20.0);
        assert_eq!(s.values, vec![2.0, 3.0, 4.0]);
    }

    proptest! {
        #[test]
        fn prop_upsample_preserves_original_nodes(
            values in proptest::collection::vec(-1e3f64..1e3, 2..40),
            r in 2usize..6,
        ) {
            let ts = series(60.0, &values);
            let up = resample(&ts, 60.0 / r as f64).unwrap();
            prop_assert_eq!(up.len(), (ts.len() - 1) * r + 1);
            for (i, &v) in ts.values.iter().enumerate() {
                prop_assert_eq!(up.values[i * r], v);
            }
        }

        #[test]
        fn prop_downsample_preserves_block_mass(
            values in proptest::collection::vec(-1e3f64..1e3, 4..60),
            k in 2usize..5,
        ) {
            prop_assume!(values.len() / k >= 2);
            let ts = series(10.0, &values);
            let down = resample(&ts, 10.0 * k as f64).unwrap();
            let consumed = down.len() * k;
            let in_mass: f64 = ts.values[..consumed].iter().sum();
            let out_mass: f64 = down.values.iter().map(|v| v * k as f64).sum();
            prop_assert!((in_mass - out_mass).abs() < 1e-9 * in_mass.abs().max(1.0));
        }

        #[test]
        fn prop_moving_average_grid_and_constants(
            c in -1e3f64..1e3,
            n in 12usize..80,
            window in 3.0f64..10.0,
        ) {
            let ts = series(1.0, &vec![c; n]);
            let ma = moving_average(&ts, window).unwrap();
            prop_assert_eq!(ma.len(), ts.len());
            prop_assert_eq!(ma.start, ts.start);
            prop_assert_eq!(ma.step, ts.step);
            for v in &ma.values {
                prop_assert!((v - c).abs() < 1e-9 * c.abs().max(1.0));
            }
        }

        #[test]
        fn prop_decomposition_reconstructs(
            raw in proptest::collection::vec(-50f64..50.0, 120..240),
        ) {
            // Random rough series; windows scaled to the series length.
            let ts = series(10.0, &raw);
            let cfg = DecompositionConfig {
                gross_window: 500.0,
                inter1_window: 150.0,
                inter2_window: 50.0,
            };
            let d = decompose(&ts, &cfg).unwrap();
            let max_abs = raw.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!(d.reconstruction_residual(&ts) < 1e-9 * max_abs);
        }
    }
}
