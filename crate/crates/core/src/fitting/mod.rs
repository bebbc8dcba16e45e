//! Fitting sums of overlapping Lorentzian states to band series.
//!
//! The public surface has three levels:
//!
//! * [`fit_multi_lorentzian`] — damped least squares from explicit seeds
//!   on one series, with a duplicate-merge pass and per-peak standard
//!   errors.
//! * [`fit_series`] — detect seeds, then fit with residual-reseeding
//!   rounds to pick up states the first detection blurred together. A
//!   long seed list is split into disjoint time windows at the sparsest
//!   gaps, each window running the whole pipeline on its own slice.
//! * [`fit_band`] — [`fit_series`] on one band of a decomposition, with
//!   the band's characteristic separation floor filled in.

mod detect;
mod lm;

pub use detect::{detect_peaks, DetectOptions, PeakSeed};

use crate::error::{Error, Result};
use crate::lorentz::{LorentzianPeak, MultiLorentzianModel};
use crate::timeseries::{Band, BandDecomposition, TimeSeries};
use serde::{Deserialize, Serialize};

/// A merged (fewer-peak) refit must stay within this factor of the
/// unmerged residual to be accepted; collapsing a genuine pair blows the
/// residual up far past it, while removing a duplicate does not.
const MERGE_RSS_SLACK: f64 = 1.05;

/// A fitted peak whose amplitude falls below this fraction of the data
/// scale is numerical debris left from an extra seed, not a state; it is
/// pruned after the fit.
const DEAD_AMPLITUDE_FRACTION: f64 = 1e-9;

/// Bound on debris-pruning passes in one fit. Each pass removes at least
/// one peak and refits; two passes settle all but adversarial cases, and
/// any debris left after the budget is stripped without a refit.
const PRUNE_PASSES: usize = 3;

/// Fitter controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Iteration budget for one damped-least-squares run. Default 200.
    pub max_iterations: usize,
    /// Relative residual improvement below which the fit is converged.
    /// Default 1e-8.
    pub rel_tol: f64,
    /// Initial damping factor. Default 1e-3.
    pub damping_init: f64,
    /// Two peaks closer than this fraction of the narrower width are
    /// treated as duplicates of one state. Default 0.25.
    pub merge_fraction: f64,
    /// Fit a shared constant offset alongside the peaks. Default off;
    /// band fits force it on because decomposed bands are mean-free.
    pub free_baseline: bool,
    /// Seed-list length above which a series is fitted window by
    /// window, cut at the widest seed gaps. Default 40.
    pub max_peaks_per_fit: usize,
    /// How many residual-reseeding rounds [`fit_series`] may run. In
    /// bands whose states overlap heavily, the first detection pass
    /// merges neighbors and a single refit leaves them merged; two
    /// rounds recover most of them. Default 2.
    pub reseed_rounds: usize,
    /// Ceiling on fitted widths; peaks that settle wider count as
    /// debris and are pruned. A band built by subtracting a moving
    /// average cannot hold structure wider than that window, so
    /// [`fit_band`] fills this with the window that produced the band.
    /// Without a ceiling the fitter is free to grow pedestal peaks many
    /// times wider than any state, which soak up background instead of
    /// resolving it. Default none (the series span is the only bound).
    pub max_width: Option<f64>,
    /// Floor on fitted amplitudes, as a fraction of the model's median
    /// amplitude. After fitting and reseeding, peaks below the floor are
    /// removed and the survivors refitted: a heavily blended stretch is
    /// sometimes re-expressed as one strong peak plus a faint companion
    /// a few samples off, and states within one band share an amplitude
    /// scale, so a peak at a small fraction of the typical amplitude is
    /// residual-chasing structure rather than a state. Must stay below 1
    /// (at most half the peaks can fall under a sub-median floor); 0
    /// disables the pass. Default 0.45.
    pub min_amplitude_fraction: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            rel_tol: 1e-8,
            damping_init: 1e-3,
            merge_fraction: 0.25,
            free_baseline: false,
            max_peaks_per_fit: 40,
            reseed_rounds: 2,
            max_width: None,
            min_amplitude_fraction: 0.45,
        }
    }
}

impl FitOptions {
    /// Validates every field, naming the offending one.
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iterations".into(),
                message: "must be at least 1".into(),
            });
        }
        if !self.rel_tol.is_finite() || self.rel_tol <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "rel_tol".into(),
                message: format!("must be positive and finite, got {}", self.rel_tol),
            });
        }
        if !self.damping_init.is_finite() || self.damping_init <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "damping_init".into(),
                message: format!("must be positive and finite, got {}", self.damping_init),
            });
        }
        if !self.merge_fraction.is_finite() || !(0.0..1.0).contains(&self.merge_fraction) {
            return Err(Error::InvalidParameter {
                name: "merge_fraction".into(),
                message: format!("must lie in [0, 1), got {}", self.merge_fraction),
            });
        }
        if self.max_peaks_per_fit < 4 {
            return Err(Error::InvalidParameter {
                name: "max_peaks_per_fit".into(),
                message: "must be at least 4".into(),
            });
        }
        if let Some(w) = self.max_width {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "max_width".into(),
                    message: format!("must be positive and finite when set, got {w}"),
                });
            }
        }
        Ok(())
    }
}

/// One-sigma standard errors for a fitted peak, from the linearized
/// covariance at the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakUncertainty {
    /// Standard error of the amplitude.
    pub amplitude_se: f64,
    /// Standard error of the center time.
    pub center_se: f64,
    /// Standard error of the full width at half maximum.
    pub width_se: f64,
}

/// Outcome of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Whether the optimizer met its convergence test within budget.
    pub converged: bool,
    /// Damped-least-squares iterations spent (summed across windows and
    /// refits).
    pub iterations: usize,
    /// Final residual sum of squares over the fitted series.
    pub rss: f64,
    /// The fitted model, peaks sorted by center.
    pub model: MultiLorentzianModel,
    /// Per-peak standard errors, aligned with `model.peaks`. Absent when
    /// the fit ran windowed or the covariance was unavailable.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_peak_ci: Option<Vec<PeakUncertainty>>,
}

impl FitResult {
    /// Pretty JSON rendering.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }

    /// Writes the result as pretty JSON.
    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n").map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

fn validate_seeds(series: &TimeSeries, seeds: &[PeakSeed]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::EmptyModel {
            hint: "at least one seed is required".into(),
        });
    }
    let (start, end) = (series.start, series.end());
    for s in seeds {
        if !s.m0_guess.is_finite()
            || s.m0_guess <= 0.0
            || !s.dt_guess.is_finite()
            || s.dt_guess <= 0.0
            || !s.t0_guess.is_finite()
        {
            return Err(Error::InvalidParameter {
                name: "seed".into(),
                message: format!(
                    "guesses must be finite with positive amplitude and width, got \
                     m0={} t0={} dt={}",
                    s.m0_guess, s.t0_guess, s.dt_guess
                ),
            });
        }
        if s.t0_guess < start || s.t0_guess > end {
            return Err(Error::SeedOutOfRange {
                t0: s.t0_guess,
                start,
                end,
            });
        }
    }
    Ok(())
}

fn collect_times(series: &TimeSeries) -> Vec<f64> {
    (0..series.len()).map(|i| series.time(i)).collect()
}

fn lm_settings(
    series: &TimeSeries,
    options: &FitOptions,
    free_baseline: bool,
    width_cap: f64,
) -> lm::LmSettings {
    lm::LmSettings {
        max_iterations: options.max_iterations,
        rel_tol: options.rel_tol,
        damping_init: options.damping_init,
        free_baseline,
        width_bounds: (series.step, width_cap),
        center_bounds: (series.start, series.end()),
    }
}

fn seeds_from_peaks(
    series: &TimeSeries,
    peaks: &[LorentzianPeak],
    width_cap: f64,
) -> Vec<PeakSeed> {
    let (start, end) = (series.start, series.end());
    peaks
        .iter()
        .map(|p| PeakSeed {
            m0_guess: p.amplitude,
            t0_guess: p.center.clamp(start, end),
            dt_guess: p.width.min(width_cap),
        })
        .collect()
}

/// Collapses runs of peaks closer than `fraction` of the narrower width,
/// keeping the strongest of each run. `None` when nothing qualifies.
fn merge_close_peaks(sorted: &[LorentzianPeak], fraction: f64) -> Option<Vec<LorentzianPeak>> {
    let mut kept: Vec<LorentzianPeak> = Vec::with_capacity(sorted.len());
    let mut merged_any = false;
    for p in sorted {
        if let Some(last) = kept.last_mut() {
            let gap = p.center - last.center;
            if gap < fraction * last.width.min(p.width) {
                merged_any = true;
                if p.amplitude > last.amplitude {
                    *last = *p;
                }
                continue;
            }
        }
        kept.push(*p);
    }
    merged_any.then_some(kept)
}

struct SingleFit {
    outcome: lm::LmOutcome,
    n_samples: usize,
}

/// One validated damped-least-squares run plus the duplicate-merge pass.
fn fit_once(
    series: &TimeSeries,
    seeds: &[PeakSeed],
    options: &FitOptions,
    free_baseline: bool,
) -> Result<SingleFit> {
    validate_seeds(series, seeds)?;
    let needed = 3 * seeds.len() + usize::from(free_baseline);
    if series.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: series.len(),
        });
    }
    let times = collect_times(series);
    let width_cap = series.span().min(options.max_width.unwrap_or(f64::INFINITY));
    let settings = lm_settings(series, options, free_baseline, width_cap);
    let mut outcome = lm::run(&times, &series.values, seeds, &settings)?;
    outcome.peaks.sort_by(|a, b| a.center.total_cmp(&b.center));

    if options.merge_fraction > 0.0 {
        if let Some(merged) = merge_close_peaks(&outcome.peaks, options.merge_fraction) {
            let warm = seeds_from_peaks(series, &merged, width_cap);
            let mut refit = lm::run(&times, &series.values, &warm, &settings)?;
            refit.peaks.sort_by(|a, b| a.center.total_cmp(&b.center));
            if refit.rss <= outcome.rss * MERGE_RSS_SLACK {
                refit.iterations += outcome.iterations;
                outcome = refit;
            }
        }
    }

    outcome = prune_debris(series, &times, &settings, width_cap, outcome)?;

    Ok(SingleFit {
        outcome,
        n_samples: series.len(),
    })
}

/// True for a fitted peak that is numerical debris rather than a state:
/// amplitude at the noise floor (an extinguished extra seed), width
/// pinned at or under the one-sample floor (a spike riding a single
/// sample — the optimizer's width projection parks such peaks exactly at
/// the floor), or width past the cap (a pedestal soaking background;
/// unreachable when the projection is active, kept for robustness).
fn is_debris(p: &LorentzianPeak, amplitude_floor: f64, step: f64, width_cap: f64) -> bool {
    p.amplitude <= amplitude_floor || p.width <= step || p.width > width_cap
}

/// Residual sum of squares of an explicit peak list plus baseline.
fn peaks_rss(peaks: &[LorentzianPeak], baseline: f64, times: &[f64], values: &[f64]) -> f64 {
    times
        .iter()
        .zip(values)
        .map(|(&t, &y)| {
            let f = baseline + peaks.iter().map(|p| p.eval(t)).sum::<f64>();
            let r = y - f;
            r * r
        })
        .sum()
}

/// Removes debris peaks (see [`is_debris`]) and refits warm from the
/// survivors, repeating while the refit itself produces new debris. When
/// a refit degrades the residual past the merge slack — or the pass
/// budget runs out — the debris is stripped without a refit and the
/// residual recomputed; the covariance is dropped in that case because it
/// no longer matches the peak list.
fn prune_debris(
    series: &TimeSeries,
    times: &[f64],
    settings: &lm::LmSettings,
    width_cap: f64,
    mut outcome: lm::LmOutcome,
) -> Result<lm::LmOutcome> {
    let scale = series.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = DEAD_AMPLITUDE_FRACTION * scale;
    let step = series.step;

    for _ in 0..PRUNE_PASSES {
        let alive: Vec<LorentzianPeak> = outcome
            .peaks
            .iter()
            .copied()
            .filter(|p| !is_debris(p, floor, step, width_cap))
            .collect();
        if alive.len() == outcome.peaks.len() {
            return Ok(outcome);
        }
        if alive.is_empty() {
            return Err(Error::EmptyModel {
                hint: "every fitted state collapsed into noise-floor amplitude or a \
                       degenerate width; the series may be featureless at this detection \
                       setting"
                    .into(),
            });
        }
        let warm = seeds_from_peaks(series, &alive, width_cap);
        let mut refit = lm::run(times, &series.values, &warm, settings)?;
        refit.peaks.sort_by(|a, b| a.center.total_cmp(&b.center));
        if refit.rss <= outcome.rss * MERGE_RSS_SLACK {
            refit.iterations += outcome.iterations;
            outcome = refit;
            continue;
        }
        outcome.rss = peaks_rss(&alive, outcome.baseline, times, &series.values);
        outcome.peaks = alive;
        outcome.normal_matrix = nalgebra::DMatrix::zeros(0, 0);
        return Ok(outcome);
    }

    // Pass budget exhausted with debris still present: strip it.
    let alive: Vec<LorentzianPeak> = outcome
        .peaks
        .iter()
        .copied()
        .filter(|p| !is_debris(p, floor, step, width_cap))
        .collect();
    if alive.len() < outcome.peaks.len() {
        outcome.rss = peaks_rss(&alive, outcome.baseline, times, &series.values);
        outcome.peaks = alive;
        outcome.normal_matrix = nalgebra::DMatrix::zeros(0, 0);
    }
    Ok(outcome)
}

/// Fits a sum of Lorentzians to a series from explicit seeds.
///
/// Runs damped least squares in `(ln amplitude, center, ln width)`
/// space, then merges peaks that landed on one state (closer than
/// `merge_fraction` of the narrower width) and refits once. Per-peak
/// standard errors are attached when the covariance is available.
pub fn fit_multi_lorentzian(
    series: &TimeSeries,
    seeds: &[PeakSeed],
    options: &FitOptions,
) -> Result<FitResult> {
    options.validate()?;
    let fit = fit_once(series, seeds, options, options.free_baseline)?;
    let ci = lm::standard_errors(&fit.outcome, fit.n_samples).map(|ses| {
        ses.iter()
            .map(|&(amplitude_se, center_se, width_se)| PeakUncertainty {
                amplitude_se,
                center_se,
                width_se,
            })
            .collect()
    });
    Ok(FitResult {
        converged: fit.outcome.converged,
        iterations: fit.outcome.iterations,
        rss: fit.outcome.rss,
        model: lm::outcome_model(&fit.outcome)?,
        per_peak_ci: ci,
    })
}

/// Time cuts for fitting a long seed list window by window.
///
/// The span is divided into roughly even windows sized so that neither
/// the first-pass seed count nor the window duration outgrows one
/// damped-least-squares problem. The duration bound matters because
/// residual reseeding recovers states the first detection missed — they
/// arrive at the detector's separation floor, so a long window with few
/// seeds today can hold several times as many peaks after reseeding.
/// Each ideal boundary is nudged onto the widest nearby seed gap so
/// cuts fall where peaks are sparsest.
fn window_cuts(
    series: &TimeSeries,
    seeds: &[PeakSeed],
    max_peaks: usize,
    min_separation: f64,
) -> Vec<f64> {
    let span = series.span();
    let target_seeds = (2 * max_peaks / 3).max(1);
    let target_span = 2.0 * max_peaks as f64 * min_separation;
    let k_seeds = seeds.len().div_ceil(target_seeds);
    let k_span = (span / target_span).ceil() as usize;
    let k = k_seeds.max(k_span).max(1);
    let mut cuts = Vec::with_capacity(k + 1);
    cuts.push(series.start);
    for j in 1..k {
        let ideal = series.start + span * j as f64 / k as f64;
        let radius = span / (4.0 * k as f64);
        let mut best = ideal;
        let mut best_gap = f64::NEG_INFINITY;
        for w in seeds.windows(2) {
            let mid = 0.5 * (w[0].t0_guess + w[1].t0_guess);
            if (mid - ideal).abs() <= radius {
                let gap = w[1].t0_guess - w[0].t0_guess;
                if gap > best_gap {
                    best_gap = gap;
                    best = mid;
                }
            }
        }
        if best > *cuts.last().unwrap() {
            cuts.push(best);
        }
    }
    // One step past the last sample so the half-open slices cover the
    // series exactly.
    cuts.push(series.end() + series.step);
    cuts
}

/// Runs the single-span pipeline: one fit from the given seeds, then up
/// to `reseed_rounds` residual-reseeding passes, each kept only when it
/// lowers the residual on this same span.
fn fit_and_reseed(
    series: &TimeSeries,
    seeds: &[PeakSeed],
    options: &FitOptions,
    detect: &DetectOptions,
) -> Result<FitResult> {
    let mut result = fit_multi_lorentzian(series, seeds, options)?;
    if std::env::var_os("FIT_DIAG").is_some() {
        eprintln!(
            "DIAG win [{:.0},{:.0}) seeds={} -> n={} rss={:.2e}",
            series.start,
            series.end(),
            seeds.len(),
            result.model.len(),
            result.rss
        );
    }
    for _ in 0..options.reseed_rounds {
        match reseed_once(series, &result, options, detect)? {
            Some(better) => result = better,
            None => break,
        }
    }
    Ok(result)
}

/// Fits a long seed list window by window.
///
/// The series is cut into disjoint spans at the sparsest seed gaps and
/// every span runs the whole pipeline alone — fit plus residual
/// reseeding — with its own floating offset when `free_baseline` is on.
/// Working per window keeps each accept/reject decision local: a refit
/// competes against the current model on the same slice under the same
/// offset convention, so an improvement in one span cannot be vetoed by
/// a mismatch elsewhere. Fitted widths are capped (see
/// [`FitOptions::max_width`]), so no span's model reaches far past its
/// cut; a state straddling a cut may be fitted from both sides, and
/// such duplicates collapse in the final merge pass. The stitched
/// residual is reported against a single shared offset, which sits at
/// or slightly above the sum of the per-window residuals.
fn fit_windowed(
    series: &TimeSeries,
    seeds: &[PeakSeed],
    options: &FitOptions,
    detect: &DetectOptions,
) -> Result<FitResult> {
    let min_separation = detect.min_separation.unwrap_or(3.0 * series.step);
    let cuts = window_cuts(series, seeds, options.max_peaks_per_fit, min_separation);

    let mut kept: Vec<LorentzianPeak> = Vec::new();
    let mut iterations = 0;
    let mut converged = true;
    let mut s = 0;
    for pair in cuts.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let mut e = s;
        while e < seeds.len() && seeds[e].t0_guess < hi {
            e += 1;
        }
        if e == s {
            continue;
        }
        let sub = series.slice_time(lo, hi)?;
        let local: Vec<PeakSeed> = seeds[s..e]
            .iter()
            .map(|seed| PeakSeed {
                m0_guess: seed.m0_guess,
                t0_guess: seed.t0_guess.clamp(sub.start, sub.end()),
                dt_guess: seed.dt_guess,
            })
            .collect();
        s = e;
        match fit_and_reseed(&sub, &local, options, detect) {
            Ok(fit) => {
                iterations += fit.iterations;
                converged &= fit.converged;
                kept.extend(fit.model.peaks);
            }
            // A window whose every seed died held no real structure in
            // its stretch; the others still stand on their own.
            Err(Error::EmptyModel { .. }) => {}
            Err(e) => return Err(e),
        }
    }

    kept.sort_by(|a, b| a.center.total_cmp(&b.center));
    if options.merge_fraction > 0.0 {
        if let Some(merged) = merge_close_peaks(&kept, options.merge_fraction) {
            kept = merged;
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyModel {
            hint: "every window fit collapsed; the series may be featureless at this \
                   detection setting"
                .into(),
        });
    }

    // Residual on the full series; with a free baseline the optimal
    // constant offset given fixed peaks is the mean residual.
    let peak_sum: Vec<f64> = (0..series.len())
        .map(|i| {
            let t = series.time(i);
            kept.iter().map(|p| p.eval(t)).sum::<f64>()
        })
        .collect();
    let baseline = if options.free_baseline {
        series
            .values
            .iter()
            .zip(&peak_sum)
            .map(|(y, m)| y - m)
            .sum::<f64>()
            / series.len() as f64
    } else {
        0.0
    };
    let rss = series
        .values
        .iter()
        .zip(&peak_sum)
        .map(|(y, m)| {
            let r = y - m - baseline;
            r * r
        })
        .sum();

    Ok(FitResult {
        converged,
        iterations,
        rss,
        model: MultiLorentzianModel::new(baseline, kept)?,
        per_peak_ci: None,
    })
}

/// One residual-reseeding round: detect structure the current model
/// missed, refit with the union of warm and new seeds, and keep the
/// refit only if it lowers the residual.
fn reseed_once(
    series: &TimeSeries,
    current: &FitResult,
    options: &FitOptions,
    detect: &DetectOptions,
) -> Result<Option<FitResult>> {
    let power: f64 = series.values.iter().map(|y| y * y).sum();
    if current.rss <= 1e-12 * power {
        return Ok(None);
    }
    let residual_values: Vec<f64> = (0..series.len())
        .map(|i| series.values[i] - current.model.eval(series.time(i)))
        .collect();
    let residual = TimeSeries {
        start: series.start,
        step: series.step,
        values: residual_values,
    };
    let extra = detect_peaks(&residual, detect)?;
    let diag = std::env::var_os("FIT_DIAG").is_some();
    if extra.is_empty() {
        if diag {
            eprintln!("DIAG   reseed: no extras (rss={:.2e})", current.rss);
        }
        return Ok(None);
    }
    let width_cap = series.span().min(options.max_width.unwrap_or(f64::INFINITY));
    let mut combined = seeds_from_peaks(series, &current.model.peaks, width_cap);
    combined.extend(extra.iter().copied());
    combined.sort_by(|a, b| a.t0_guess.total_cmp(&b.t0_guess));
    // Reseeding is opportunistic: when the augmented seed list cannot be
    // fitted (too many parameters for the span, every extra collapses),
    // the current result stands rather than failing the whole fit.
    let refit = match fit_multi_lorentzian(series, &combined, options) {
        Ok(refit) => refit,
        Err(e) => {
            if diag {
                eprintln!("DIAG   reseed: extras={} refit ERR {e}", extra.len());
            }
            return Ok(None);
        }
    };
    if diag {
        eprintln!(
            "DIAG   reseed: extras={} refit n={} rss={:.2e} vs {:.2e} -> {}",
            extra.len(),
            refit.model.len(),
            refit.rss,
            current.rss,
            if refit.rss < current.rss { "accept" } else { "REJECT" }
        );
    }
    if refit.rss < current.rss {
        Ok(Some(FitResult {
            iterations: refit.iterations + current.iterations,
            ..refit
        }))
    } else {
        Ok(None)
    }
}

/// Detects peaks and fits the series end to end.
///
/// Up to `reseed_rounds` residual passes look for states the first
/// detection merged into a neighbor, accepting each refit only when it
/// lowers the residual. A seed list longer than `max_peaks_per_fit` is
/// fitted window by window (see [`fit_windowed`]), with the reseeding
/// running inside each window.
pub fn fit_series(
    series: &TimeSeries,
    options: &FitOptions,
    detect: &DetectOptions,
) -> Result<FitResult> {
    options.validate()?;
    let seeds = detect_peaks(series, detect)?;
    if seeds.is_empty() {
        return Err(Error::EmptyModel {
            hint: "no peaks cleared the prominence floor; lower min_prominence".into(),
        });
    }
    if seeds.len() > options.max_peaks_per_fit {
        validate_seeds(series, &seeds)?;
        return fit_windowed(series, &seeds, options, detect);
    }
    fit_and_reseed(series, &seeds, options, detect)
}

/// Fits one band of a decomposition.
///
/// Fills in the band's characteristic separation floor when the caller
/// did not set one (50 s fine, 300 s ten-minute, 1800 s hour-scale) and
/// always floats a baseline: decomposed bands are mean-free, so a sum of
/// positive peaks needs a negative offset under it. Unless the caller
/// set a width ceiling, the moving-average window that produced the
/// band becomes one — the subtraction removes anything wider, so a
/// fitted width past it could only be an artifact. The gross band is
/// trend, not states, and is rejected.
pub fn fit_band(
    decomposition: &BandDecomposition,
    band: Band,
    options: &FitOptions,
    detect: &DetectOptions,
) -> Result<FitResult> {
    let config = &decomposition.config;
    let (default_separation, band_cutoff) = match band {
        Band::Gross => {
            return Err(Error::InvalidParameter {
                name: "band".into(),
                message: "the gross band carries the trend; fit inter_1, inter_2, or fine".into(),
            });
        }
        Band::Inter1 => (1800.0, config.gross_window),
        Band::Inter2 => (300.0, config.inter1_window),
        Band::Fine => (50.0, config.inter2_window),
    };
    let detect = DetectOptions {
        min_separation: detect.min_separation.or(Some(default_separation)),
        ..*detect
    };
    let options = FitOptions {
        free_baseline: true,
        max_width: options.max_width.or(Some(band_cutoff)),
        ..options.clone()
    };
    fit_series(decomposition.band(band), &options, &detect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{decompose, DecompositionConfig};

    fn lorentz_series(
        peaks: &[(f64, f64, f64)],
        baseline: f64,
        n: usize,
        step: f64,
    ) -> TimeSeries {
        let values = (0..n)
            .map(|i| {
                let t = i as f64 * step;
                baseline
                    + peaks
                        .iter()
                        .map(|&(m0, t0, dt)| {
                            let x = 2.0 * (t - t0) / dt;
                            m0 / (1.0 + x * x)
                        })
                        .sum::<f64>()
            })
            .collect();
        TimeSeries::new(0.0, step, values).unwrap()
    }

    #[test]
    fn fit_series_recovers_separated_peaks() {
        let truth = [
            (1.0, 120.0, 20.0),
            (1.6, 300.0, 14.0),
            (0.7, 430.0, 25.0),
            (1.2, 600.0, 18.0),
            (0.9, 760.0, 22.0),
        ];
        let ts = lorentz_series(&truth, 0.0, 900, 1.0);
        let fit = fit_series(
            &ts,
            &FitOptions::default(),
            &DetectOptions {
                min_prominence: Some(0.1),
                min_separation: Some(30.0),
            },
        )
        .unwrap();
        assert!(fit.converged);
        assert_eq!(fit.model.len(), truth.len());
        for (got, want) in fit.model.peaks.iter().zip(&truth) {
            assert!((got.center - want.1).abs() < 0.5, "center {}", got.center);
            assert!((got.width - want.2).abs() / want.2 < 0.05);
        }
        assert!(fit.per_peak_ci.is_some());
    }

    #[test]
    fn windowed_fit_recovers_a_long_train() {
        let truth: Vec<(f64, f64, f64)> = (0..60)
            .map(|i| (1.0 + 0.3 * ((i % 3) as f64), 100.0 + 100.0 * i as f64, 20.0))
            .collect();
        let ts = lorentz_series(&truth, 0.0, 6200, 1.0);
        let seeds: Vec<PeakSeed> = truth
            .iter()
            .map(|&(m0, t0, dt)| PeakSeed {
                m0_guess: m0 * 0.8,
                t0_guess: t0 + 3.0,
                dt_guess: dt * 1.2,
            })
            .collect();
        let opts = FitOptions {
            reseed_rounds: 0,
            ..FitOptions::default()
        };
        assert!(seeds.len() > opts.max_peaks_per_fit);
        let detect = DetectOptions {
            min_prominence: None,
            min_separation: Some(50.0),
        };
        let fit = fit_windowed(&ts, &seeds, &opts, &detect).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.model.len(), 60);
        assert!(fit.per_peak_ci.is_none());
        for (got, want) in fit.model.peaks.iter().zip(&truth) {
            assert!(
                (got.center - want.1).abs() < 0.5,
                "center {} for truth {}",
                got.center,
                want.1
            );
        }
    }

    #[test]
    fn duplicate_seeds_merge_to_one_state() {
        let ts = lorentz_series(&[(1.0, 200.0, 30.0)], 0.0, 400, 1.0);
        let seeds = vec![
            PeakSeed {
                m0_guess: 0.6,
                t0_guess: 198.0,
                dt_guess: 25.0,
            },
            PeakSeed {
                m0_guess: 0.5,
                t0_guess: 202.0,
                dt_guess: 25.0,
            },
        ];
        let fit = fit_multi_lorentzian(&ts, &seeds, &FitOptions::default()).unwrap();
        assert_eq!(fit.model.len(), 1);
        assert!((fit.model.peaks[0].center - 200.0).abs() < 0.1);
    }

    #[test]
    fn reseeding_splits_a_blended_pair() {
        let truth = [(1.0, 500.0, 25.0), (0.8, 532.0, 25.0)];
        let ts = lorentz_series(&truth, 0.0, 1000, 1.0);
        let detect = DetectOptions {
            min_prominence: Some(0.1),
            min_separation: Some(50.0),
        };
        let first = detect_peaks(&ts, &detect).unwrap();
        assert_eq!(first.len(), 1, "premise: detection blends the pair");
        let no_reseed = fit_series(
            &ts,
            &FitOptions {
                reseed_rounds: 0,
                ..FitOptions::default()
            },
            &detect,
        )
        .unwrap();
        let with_reseed = fit_series(&ts, &FitOptions::default(), &detect).unwrap();
        assert_eq!(no_reseed.model.len(), 1);
        assert_eq!(with_reseed.model.len(), 2);
        assert!(with_reseed.rss < no_reseed.rss / 100.0);
        let centers: Vec<f64> = with_reseed.model.peaks.iter().map(|p| p.center).collect();
        assert!((centers[0] - 500.0).abs() < 1.0);
        assert!((centers[1] - 532.0).abs() < 1.0);
    }

    #[test]
    fn extinguished_extra_seed_is_pruned() {
        // One real peak, one seed far out in flat territory: the
        // optimizer drives the extra's amplitude to the floor, and the
        // result must contain only the real state — not a zero-amplitude
        // husk that would fail model validation downstream.
        let ts = lorentz_series(&[(1.0, 200.0, 30.0)], 0.0, 800, 1.0);
        let seeds = vec![
            PeakSeed {
                m0_guess: 1.0,
                t0_guess: 200.0,
                dt_guess: 30.0,
            },
            PeakSeed {
                m0_guess: 0.05,
                t0_guess: 600.0,
                dt_guess: 30.0,
            },
        ];
        let fit = fit_multi_lorentzian(&ts, &seeds, &FitOptions::default()).unwrap();
        assert_eq!(fit.model.len(), 1);
        let p = fit.model.peaks[0];
        assert!((p.center - 200.0).abs() < 1e-6);
        assert!((p.amplitude - 1.0).abs() < 1e-6);
        assert!((p.width - 30.0).abs() < 1e-6);
    }

    #[test]
    fn width_degenerate_peak_is_pruned_not_kept_flat() {
        // A redundant seed over a constant offset can flatten instead of
        // dying: its width grows until the profile is indistinguishable
        // from baseline. Such a peak must not survive into the model.
        let ts = lorentz_series(&[(1.0, 300.0, 40.0)], 0.5, 900, 1.0);
        let seeds = vec![
            PeakSeed {
                m0_guess: 1.0,
                t0_guess: 300.0,
                dt_guess: 40.0,
            },
            PeakSeed {
                m0_guess: 0.4,
                t0_guess: 700.0,
                dt_guess: 400.0,
            },
        ];
        let options = FitOptions {
            free_baseline: true,
            ..FitOptions::default()
        };
        let fit = fit_multi_lorentzian(&ts, &seeds, &options).unwrap();
        let span = ts.span();
        for p in &fit.model.peaks {
            assert!(p.width >= ts.step, "sub-step spike survived: {}", p.width);
            assert!(p.width <= span, "flat profile survived: {}", p.width);
        }
        let real = fit
            .model
            .peaks
            .iter()
            .find(|p| (p.center - 300.0).abs() < 5.0)
            .expect("real state kept");
        assert!((real.amplitude - 1.0).abs() < 0.05);
        assert!((real.width - 40.0).abs() < 2.0);
    }

    #[test]
    fn fit_band_rejects_gross_and_defaults_separation() {
        let values: Vec<f64> = (0..2400)
            .map(|i| {
                let t = i as f64 * 10.0;
                let x = 2.0 * (t - 12_000.0) / 400.0;
                3.0 / (1.0 + x * x)
            })
            .collect();
        let ts = TimeSeries::new(0.0, 10.0, values).unwrap();
        let bands = decompose(&ts, &DecompositionConfig::default()).unwrap();
        let err = fit_band(
            &bands,
            Band::Gross,
            &FitOptions::default(),
            &DetectOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { ref name, .. } if name == "band"));
    }

    #[test]
    fn seed_validation_errors() {
        let ts = lorentz_series(&[(1.0, 50.0, 10.0)], 0.0, 100, 1.0);
        let err = fit_multi_lorentzian(&ts, &[], &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyModel { .. }));

        let err = fit_multi_lorentzian(
            &ts,
            &[PeakSeed {
                m0_guess: 1.0,
                t0_guess: 500.0,
                dt_guess: 10.0,
            }],
            &FitOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::SeedOutOfRange { .. }));

        let err = fit_multi_lorentzian(
            &ts,
            &[PeakSeed {
                m0_guess: -1.0,
                t0_guess: 50.0,
                dt_guess: 10.0,
            }],
            &FitOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { .. }));
    }

    #[test]
    fn too_few_samples_for_seed_count() {
        let ts = lorentz_series(&[(1.0, 5.0, 3.0)], 0.0, 8, 1.0);
        let seeds: Vec<PeakSeed> = (0..3)
            .map(|i| PeakSeed {
                m0_guess: 1.0,
                t0_guess: 2.0 + i as f64,
                dt_guess: 3.0,
            })
            .collect();
        let err = fit_multi_lorentzian(&ts, &seeds, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::TooShort { needed: 9, got: 8 }));
    }

    #[test]
    fn options_validation_names_fields() {
        let bad = FitOptions {
            merge_fraction: 1.0,
            ..FitOptions::default()
        };
        let err = bad.validate().unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { ref name, .. } if name == "merge_fraction"));
        let bad = FitOptions {
            rel_tol: 0.0,
            ..FitOptions::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn window_cuts_fall_on_wide_gaps() {
        // 50 seeds, mostly 10 apart, with one conspicuous gap of 200
        // near the midpoint that the cut should land in.
        let mut t = 0.0;
        let seeds: Vec<PeakSeed> = (0..50)
            .map(|i| {
                t += if i == 25 { 200.0 } else { 10.0 };
                PeakSeed {
                    m0_guess: 1.0,
                    t0_guess: t,
                    dt_guess: 5.0,
                }
            })
            .collect();
        let ts = TimeSeries::new(0.0, 1.0, vec![0.0; 711]).unwrap();
        let cuts = window_cuts(&ts, &seeds, 40, 10.0);
        assert!(cuts.len() >= 3, "cuts {cuts:?}");
        assert!(
            cuts.iter().any(|&c| (250.0..=450.0).contains(&c)),
            "no cut in the wide gap: {cuts:?}"
        );
        // Every window holds at most the seed budget.
        for pair in cuts.windows(2) {
            let n = seeds
                .iter()
                .filter(|s| s.t0_guess >= pair[0] && s.t0_guess < pair[1])
                .count();
            assert!(n <= 40, "window {pair:?} holds {n} seeds");
        }
    }

    #[test]
    fn fit_result_json_round_trip() {
        let ts = lorentz_series(&[(1.0, 50.0, 10.0)], 0.0, 100, 1.0);
        let seeds = vec![PeakSeed {
            m0_guess: 0.9,
            t0_guess: 52.0,
            dt_guess: 12.0,
        }];
        let fit = fit_multi_lorentzian(&ts, &seeds, &FitOptions::default()).unwrap();
        let text = fit.to_json_string();
        assert!(text.contains("\"converged\""));
        assert!(text.contains("\"rss\""));
        let back: FitResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back.model.len(), fit.model.len());
        assert_eq!(back.converged, fit.converged);
    }
}
