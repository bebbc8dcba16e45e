//! Damped least squares for sums of Lorentzians.
//!
//! Parameters are `(ln amplitude, center, ln width)` per peak plus an
//! optional shared baseline. The log transforms keep amplitudes and
//! widths positive and make the damping scale-free across peaks of very
//! different size; widths are additionally projected onto the caller's
//! admissible box at every step (see [`LmSettings::width_bounds`]).

use crate::error::{Error, Result};
use crate::fitting::PeakSeed;
use crate::lorentz::{LorentzianPeak, MultiLorentzianModel};
use nalgebra::{DMatrix, DVector};

/// Damping growth cap: past this the step direction is pure gradient
/// descent with a vanishing step, so further growth cannot help.
const LAMBDA_MAX: f64 = 1e12;
const LAMBDA_MIN: f64 = 1e-12;

pub(crate) struct LmSettings {
    pub max_iterations: usize,
    pub rel_tol: f64,
    pub damping_init: f64,
    pub free_baseline: bool,
    /// Inclusive `(narrowest, widest)` admissible peak width. Every
    /// trial step is projected onto this box before evaluation, so the
    /// optimizer can never trade a genuine state for a sub-sample spike
    /// or grow a pedestal wider than the band can physically hold;
    /// projection before the accept test keeps descent monotone.
    pub width_bounds: (f64, f64),
    /// Inclusive `(earliest, latest)` admissible peak center, projected
    /// the same way. Keeps a peak from wandering off the fitted span,
    /// where most of its mass would fall on samples the objective never
    /// sees — fatal when the span is one window of a longer series.
    pub center_bounds: (f64, f64),
}

pub(crate) struct LmOutcome {
    pub peaks: Vec<LorentzianPeak>,
    pub baseline: f64,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final `J^T J`, for uncertainty estimates.
    pub normal_matrix: DMatrix<f64>,
}

struct Params {
    theta: DVector<f64>,
    n_peaks: usize,
    free_baseline: bool,
}

impl Params {
    fn from_seeds(seeds: &[PeakSeed], free_baseline: bool) -> Params {
        let n_peaks = seeds.len();
        let mut theta = DVector::zeros(3 * n_peaks + usize::from(free_baseline));
        for (i, s) in seeds.iter().enumerate() {
            theta[3 * i] = s.m0_guess.ln();
            theta[3 * i + 1] = s.t0_guess;
            theta[3 * i + 2] = s.dt_guess.ln();
        }
        Params {
            theta,
            n_peaks,
            free_baseline,
        }
    }

    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn peak(&self, i: usize) -> (f64, f64, f64) {
        // A redundant peak can be driven to either end of a log-parameter:
        // amplitude toward zero (the peak vanishes), or width toward
        // infinity (the peak flattens into a constant). Raw exp() then
        // under- or overflows to 0.0 or inf, which the model types reject;
        // clamp to the open positive range instead. The flat-peak limit is
        // exact either way: at width 1e300 the profile is m0 everywhere.
        (
            self.theta[3 * i].exp().clamp(f64::MIN_POSITIVE, 1e300),
            self.theta[3 * i + 1],
            self.theta[3 * i + 2].exp().clamp(f64::MIN_POSITIVE, 1e300),
        )
    }

    fn baseline(&self) -> f64 {
        if self.free_baseline {
            self.theta[self.theta.len() - 1]
        } else {
            0.0
        }
    }

    fn model_at(&self, t: f64) -> f64 {
        let mut acc = self.baseline();
        for i in 0..self.n_peaks {
            let (m0, t0, dt) = self.peak(i);
            let x = 2.0 * (t - t0) / dt;
            acc += m0 / (1.0 + x * x);
        }
        acc
    }

    fn rss(&self, times: &[f64], values: &[f64]) -> f64 {
        times
            .iter()
            .zip(values)
            .map(|(&t, &y)| {
                let r = y - self.model_at(t);
                r * r
            })
            .sum()
    }

    /// Jacobian of the model (not the residual) and the residual vector.
    fn jacobian(&self, times: &[f64], values: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let n = times.len();
        let p = self.dim();
        let mut jac = DMatrix::zeros(n, p);
        let mut resid = DVector::zeros(n);
        for (row, (&t, &y)) in times.iter().zip(values).enumerate() {
            let mut f = self.baseline();
            for i in 0..self.n_peaks {
                let (m0, t0, dt) = self.peak(i);
                let x = 2.0 * (t - t0) / dt;
                let denom = 1.0 + x * x;
                let lor = m0 / denom;
                f += lor;
                let shared = 2.0 * m0 * x / (denom * denom);
                jac[(row, 3 * i)] = lor;
                jac[(row, 3 * i + 1)] = 2.0 * shared / dt;
                jac[(row, 3 * i + 2)] = shared * x;
            }
            if self.free_baseline {
                jac[(row, p - 1)] = 1.0;
            }
            resid[row] = y - f;
        }
        (jac, resid)
    }

    fn to_peaks(&self) -> Vec<LorentzianPeak> {
        (0..self.n_peaks)
            .map(|i| {
                let (m0, t0, dt) = self.peak(i);
                LorentzianPeak {
                    amplitude: m0,
                    center: t0,
                    width: dt,
                }
            })
            .collect()
    }
}

/// Runs damped least squares from the given seeds. Seeds are assumed
/// validated (positive guesses, centers inside the span).
pub(crate) fn run(
    times: &[f64],
    values: &[f64],
    seeds: &[PeakSeed],
    settings: &LmSettings,
) -> Result<LmOutcome> {
    let (w_lo, w_hi) = (settings.width_bounds.0.ln(), settings.width_bounds.1.ln());
    let (c_lo, c_hi) = settings.center_bounds;
    let project = |theta: &mut nalgebra::DVector<f64>, n_peaks: usize| {
        for i in 0..n_peaks {
            theta[3 * i + 1] = theta[3 * i + 1].clamp(c_lo, c_hi);
            theta[3 * i + 2] = theta[3 * i + 2].clamp(w_lo, w_hi);
        }
    };
    let mut params = Params::from_seeds(seeds, settings.free_baseline);
    project(&mut params.theta, params.n_peaks);
    let p = params.dim();

    let mut rss = params.rss(times, values);
    if !rss.is_finite() {
        return Err(Error::NonFinite {
            context: "residual at initial guess".into(),
        });
    }
    // A residual this close to machine zero cannot meaningfully improve;
    // treating it as converged avoids thrashing on relative checks.
    let rss_floor = 1e-24 * values.iter().map(|y| y * y).sum::<f64>();
    let mut lambda = settings.damping_init;
    let mut iterations = 0;
    let mut converged = rss <= rss_floor;

    let (mut jac, mut resid) = params.jacobian(times, values);
    let mut normal = jac.transpose() * &jac;
    let mut gradient = jac.transpose() * &resid;

    while !converged && iterations < settings.max_iterations {
        iterations += 1;
        let mut damped = normal.clone();
        for k in 0..p {
            let d = normal[(k, k)];
            damped[(k, k)] = d + lambda * d.max(1e-12);
        }
        let step = match damped.cholesky() {
            Some(chol) => chol.solve(&gradient),
            None => {
                lambda *= 10.0;
                if lambda > LAMBDA_MAX {
                    break;
                }
                continue;
            }
        };
        let mut trial = Params {
            theta: &params.theta + &step,
            n_peaks: params.n_peaks,
            free_baseline: params.free_baseline,
        };
        project(&mut trial.theta, trial.n_peaks);
        let trial_rss = trial.rss(times, values);
        if trial_rss.is_finite() && trial_rss < rss {
            let improvement = (rss - trial_rss) / rss.max(f64::MIN_POSITIVE);
            std::mem::swap(&mut params, &mut trial);
            rss = trial_rss;
            lambda = (lambda / 10.0).max(LAMBDA_MIN);
            if improvement < settings.rel_tol || rss <= rss_floor {
                converged = true;
            } else {
                let (j, r) = params.jacobian(times, values);
                jac = j;
                resid = r;
                normal = jac.transpose() * &jac;
                gradient = jac.transpose() * &resid;
            }
        } else {
            lambda *= 10.0;
            if lambda > LAMBDA_MAX {
                break;
            }
        }
    }

    // Refresh the normal matrix at the accepted optimum so downstream
    // uncertainty estimates see the final geometry.
    let (jac, _) = params.jacobian(times, values);
    let normal = jac.transpose() * &jac;

    Ok(LmOutcome {
        peaks: params.to_peaks(),
        baseline: params.baseline(),
        rss,
        iterations,
        converged,
        normal_matrix: normal,
    })
}

/// Standard errors for `(amplitude, center, width)` per peak from the
/// final normal matrix, via the usual linearized covariance
/// `rss / (n - p) * (J^T J)^{-1}`. Returns `None` when there are no
/// spare degrees of freedom, the normal matrix is singular, or the
/// matrix no longer matches the peak list (peaks removed after the
/// optimizer's last step invalidate the stored curvature).
pub(crate) fn standard_errors(
    outcome: &LmOutcome,
    n_samples: usize,
) -> Option<Vec<(f64, f64, f64)>> {
    let p = outcome.normal_matrix.nrows();
    let n_params = 3 * outcome.peaks.len();
    if p != n_params && p != n_params + 1 {
        return None;
    }
    if n_samples <= p {
        return None;
    }
    let sigma2 = outcome.rss / (n_samples - p) as f64;
    let inv = outcome.normal_matrix.clone().cholesky()?.inverse();
    Some(
        outcome
            .peaks
            .iter()
            .enumerate()
            .map(|(i, peak)| {
                let se = |k: usize| (sigma2 * inv[(k, k)]).max(0.0).sqrt();
                (
                    peak.amplitude * se(3 * i),
                    se(3 * i + 1),
                    peak.width * se(3 * i + 2),
                )
            })
            .collect(),
    )
}

/// Builds a validated model from an outcome, sorted by center.
pub(crate) fn outcome_model(outcome: &LmOutcome) -> Result<MultiLorentzianModel> {
    MultiLorentzianModel::new(outcome.baseline, outcome.peaks.clone())
}
