//! Lifetime and interval statistics for fitted state models.
//!
//! Two reference distributions describe the fine structure:
//!
//! * interval spacings follow the Wigner surmise
//!   `p(x) = (pi/2) x exp(-pi x^2 / 4)` for `x = T / <T>` (unit mean);
//! * widths follow a chi-squared family with `n` degrees of freedom,
//!   rescaled to a fixed mean `<x>`:
//!   `p(x) = (n / 2<x>)^(n/2) / Gamma(n/2) * x^(n/2 - 1) * exp(-n x / 2<x>)`.
//!
//! The `n = 2` member of the width family is the exponential
//! (Porter-Thomas) case. `n` is recovered from data by moment matching:
//! the family has `var = 2 <x>^2 / n`, so `n_hat = 2 mean^2 / variance`.

use crate::error::{Error, Result};
use crate::lorentz::MultiLorentzianModel;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

// ---- special functions --------------------------------------------------

/// Lanczos approximation (g = 7, 9 terms), accurate to ~1e-13 over the
/// positive axis, which is all the width family needs.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // Reflection keeps the small-argument path accurate.
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma `P(a, x)`, by series for `x < a + 1`
/// and by Lentz's continued fraction otherwise.
fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    let ln_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // Ascending series.
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut k = a;
        for _ in 0..500 {
            k += 1.0;
            term *= x / k;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * ln_prefactor.exp()
    } else {
        // Continued fraction for Q(a, x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        1.0 - ln_prefactor.exp() * h
    }
}

// ---- reference densities ------------------------------------------------

/// Wigner surmise density for unit-mean spacings. `x < 0` is a domain error.
pub fn wigner_pdf(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain {
            context: format!("wigner_pdf needs x >= 0, got {x}"),
        });
    }
    Ok(PI / 2.0 * x * (-PI * x * x / 4.0).exp())
}

/// Wigner surmise CDF: `1 - exp(-pi x^2 / 4)`. `x < 0` is a domain error.
pub fn wigner_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain {
            context: format!("wigner_cdf needs x >= 0, got {x}"),
        });
    }
    Ok(1.0 - (-PI * x * x / 4.0).exp())
}

fn check_chi2_args(x: f64, n: f64, mean: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain {
            context: format!("width family needs x >= 0, got {x}"),
        });
    }
    if !n.is_finite() || n < 1.0 {
        return Err(Error::Domain {
            context: format!("width family needs n >= 1, got {n}"),
        });
    }
    if !mean.is_finite() || mean <= 0.0 {
        return Err(Error::Domain {
            context: format!("width family needs mean > 0, got {mean}"),
        });
    }
    Ok(())
}

/// Density of the chi-squared width family with `n` degrees of freedom and
/// mean `mean`. Real `n >= 1` is accepted.
///
/// At `x = 0` the density is infinite for `n < 2` (integrable
/// singularity), `1/mean` for `n = 2`, and zero for `n > 2`.
pub fn chi2_family_pdf(x: f64, n: f64, mean: f64) -> Result<f64> {
    check_chi2_args(x, n, mean)?;
    let rate = n / (2.0 * mean);
    if x == 0.0 {
        return Ok(if n < 2.0 {
            f64::INFINITY
        } else if n == 2.0 {
            rate // n = 2 makes the density (1/mean) exp(-x/mean)
        } else {
            0.0
        });
    }
    let half_n = n / 2.0;
    let ln_pdf =
        half_n * rate.ln() - ln_gamma(half_n) + (half_n - 1.0) * x.ln() - rate * x;
    Ok(ln_pdf.exp())
}

/// CDF of the chi-squared width family: regularized incomplete gamma
/// `P(n/2, n x / 2 mean)`.
pub fn chi2_family_cdf(x: f64, n: f64, mean: f64) -> Result<f64> {
    check_chi2_args(x, n, mean)?;
    Ok(gamma_p(n / 2.0, n * x / (2.0 * mean)))
}

/// Exponential (Porter-Thomas) width density: the `n = 2` family member.
pub fn porter_thomas_pdf(x: f64, mean: f64) -> Result<f64> {
    chi2_family_pdf(x, 2.0, mean)
}

// ---- estimators ---------------------------------------------------------

/// Moment-matched degrees of freedom for the width family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Chi2DofEstimate {
    /// Estimated degrees of freedom, clamped to `[1, 1000]`.
    pub dof: f64,
    /// Sample mean of the widths.
    pub mean: f64,
}

/// Estimates the width family's degrees of freedom by moment matching:
/// `n_hat = 2 mean^2 / variance` (population variance). Needs at least
/// five strictly positive samples with nonzero variance. The estimate is
/// clamped to `[1, 1000]`; it is scale-free, so rescaling every width
/// leaves it unchanged.
pub fn estimate_chi2_dof(widths: &[f64]) -> Result<Chi2DofEstimate> {
    if widths.len() < 5 {
        return Err(Error::InsufficientStates {
            needed: 5,
            got: widths.len(),
        });
    }
    if let Some(&bad) = widths.iter().find(|w| !w.is_finite() || **w <= 0.0) {
        return Err(Error::Domain {
            context: format!("widths must be positive, got {bad}"),
        });
    }
    let n = widths.len() as f64;
    let mean = widths.iter().sum::<f64>() / n;
    let var = widths.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
    if var <= mean * mean * 1e-24 {
        return Err(Error::DegenerateSample {
            context: "width variance is zero".into(),
        });
    }
    let dof = (2.0 * mean * mean / var).clamp(1.0, 1000.0);
    Ok(Chi2DofEstimate { dof, mean })
}

/// One-sample Kolmogorov-Smirnov statistic of `sample` against the
/// continuous CDF `cdf`: the largest gap between the empirical and
/// reference distribution functions. Errors on an empty sample.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InsufficientStates { needed: 1, got: 0 });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let upper = (i + 1) as f64 / n - f;
        let lower = f - i as f64 / n;
        d = d.max(upper).max(lower);
    }
    Ok(d)
}

// ---- histograms ---------------------------------------------------------

/// Fixed-width histogram with bins `[edges[i], edges[i+1])` anchored at
/// zero. Edges are strictly increasing and one longer than the counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// Bin boundaries, `counts.len() + 1` of them, strictly increasing.
    pub bin_edges: Vec<f64>,
    /// Count per bin; interior empty bins are preserved.
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Left edge of bin `i`.
    pub fn bin_left(&self, i: usize) -> f64 {
        self.bin_edges[i]
    }

    /// Renders the histogram as `bin_left,count` CSV rows with a header.
    pub fn to_csv_string(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("bin_left,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{c}", self.bin_left(i));
        }
        out
    }
}

/// Bins a sample into fixed-width bins anchored at zero. Widths and
/// intervals are nonnegative by construction; any negative value is
/// counted in the first bin. The counts always sum to the sample size.
pub fn histogram(sample: &[f64], bin_width: f64) -> Result<Histogram> {
    if !bin_width.is_finite() || bin_width <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "bin_width".into(),
            message: format!("must be positive and finite, got {bin_width}"),
        });
    }
    let max = sample.iter().cloned().fold(0.0f64, f64::max);
    let bins = ((max / bin_width).floor() as usize + 1).max(1);
    let mut counts = vec![0usize; bins];
    for &x in sample {
        let i = ((x / bin_width).floor().max(0.0) as usize).min(counts.len() - 1);
        counts[i] += 1;
    }
    let bin_edges = (0..=bins).map(|i| i as f64 * bin_width).collect();
    Ok(Histogram { bin_edges, counts })
}

// ---- state statistics ---------------------------------------------------

/// Widths, intervals, and their means for one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateStatistics {
    /// Mean state width `<dt>`.
    pub mean_width: f64,
    /// Mean center-to-center interval `<T>`.
    pub mean_interval: f64,
    /// `<dt> / <T>`.
    pub ratio: f64,
    /// Per-state widths, in center order.
    pub widths: Vec<f64>,
    /// Consecutive center-to-center intervals.
    pub intervals: Vec<f64>,
}

/// Pulls width and interval statistics out of a fitted model. Needs at
/// least two states; duplicate centers make the intervals degenerate and
/// are rejected.
pub fn extract_statistics(model: &MultiLorentzianModel) -> Result<StateStatistics> {
    if model.len() < 2 {
        return Err(Error::InsufficientStates {
            needed: 2,
            got: model.len(),
        });
    }
    let widths: Vec<f64> = model.peaks.iter().map(|p| p.width).collect();
    let intervals: Vec<f64> = model
        .peaks
        .windows(2)
        .map(|w| w[1].center - w[0].center)
        .collect();
    if intervals.iter().any(|&t| t <= 0.0) {
        return Err(Error::DegenerateSample {
            context: "coincident state centers give a zero interval".into(),
        });
    }
    let mean_width = widths.iter().sum::<f64>() / widths.len() as f64;
    let mean_interval = intervals.iter().sum::<f64>() / intervals.len() as f64;
    Ok(StateStatistics {
        mean_width,
        mean_interval,
        ratio: mean_width / mean_interval,
        widths,
        intervals,
    })
}

// ---- distribution fits --------------------------------------------------

/// Which reference distribution a fit refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionFamily {
    /// Wigner surmise on normalized intervals.
    Wigner,
    /// Chi-squared width family with moment-matched degrees of freedom.
    ChiSquared,
    /// Exponential widths: the chi-squared family pinned at `n = 2`.
    PorterThomas,
}

/// Parameters of a fitted reference distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistributionParams {
    /// Degrees of freedom, for the width-family entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    /// Scale of the reference distribution (mean interval or mean width).
    pub mean: f64,
}

/// Goodness-of-fit record for one reference distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionFit {
    /// The reference family.
    pub family: DistributionFamily,
    /// Fitted parameters of the reference distribution.
    pub params: DistributionParams,
    /// One-sample KS statistic of the data against the reference CDF.
    pub ks_stat: f64,
    /// Number of samples the statistic was computed from.
    pub sample_size: usize,
}

/// Scores the standard reference distributions against one model's
/// statistics: Wigner on mean-normalized intervals, the moment-matched
/// chi-squared family on widths, and the fixed exponential member on
/// widths. The chi-squared entry is omitted when there are too few widths
/// to estimate its degrees of freedom.
pub fn fit_distributions(stats: &StateStatistics) -> Vec<DistributionFit> {
    let mut fits = Vec::new();

    let normalized: Vec<f64> = stats
        .intervals
        .iter()
        .map(|t| t / stats.mean_interval)
        .collect();
    if let Ok(ks) = ks_statistic(&normalized, |x| wigner_cdf(x.max(0.0)).unwrap()) {
        fits.push(DistributionFit {
            family: DistributionFamily::Wigner,
            params: DistributionParams {
                n: None,
                mean: stats.mean_interval,
            },
            ks_stat: ks,
            sample_size: normalized.len(),
        });
    }

    if let Ok(est) = estimate_chi2_dof(&stats.widths) {
        let ks = ks_statistic(&stats.widths, |x| {
            chi2_family_cdf(x.max(0.0), est.dof, est.mean).unwrap()
        })
        .expect("nonempty widths");
        fits.push(DistributionFit {
            family: DistributionFamily::ChiSquared,
            params: DistributionParams {
                n: Some(est.dof),
                mean: est.mean,
            },
            ks_stat: ks,
            sample_size: stats.widths.len(),
        });
    }

    let mean_width = stats.mean_width;
    if let Ok(ks) = ks_statistic(&stats.widths, |x| {
        chi2_family_cdf(x.max(0.0), 2.0, mean_width).unwrap()
    }) {
        fits.push(DistributionFit {
            family: DistributionFamily::PorterThomas,
            params: DistributionParams {
                n: Some(2.0),
                mean: mean_width,
            },
            ks_stat: ks,
            sample_size: stats.widths.len(),
        });
    }

    fits
}
