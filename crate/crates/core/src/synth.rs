//! Synthetic sessions with known ground truth.
//!
//! A generated session is the sum of a piecewise-linear trend, three
//! Lorentzian state bands (hour-scale, ten-minute-scale, minute-scale),
//! and white Gaussian noise. State centers are laid down by cumulative
//! Wigner-surmise spacings, widths are drawn from the chi-squared width
//! family, and amplitudes get a uniform relative jitter. Every band's true
//! peak list is returned alongside the series, so fitted models can be
//! scored against exact truth.
//!
//! Generation is deterministic for a given config: one seeded stream,
//! consumed in a fixed order (inter-1 states, inter-2 states, fine states,
//! then one noise draw per sample). Re-running with the same config
//! reproduces the session bit for bit.

use crate::error::{Error, Result};
use crate::lorentz::{LorentzianPeak, MultiLorentzianModel};
use crate::timeseries::{Band, TimeSeries};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// A step change in the fine band's mean width partway through the
/// session; the nonstationary scenario a ratio predictor must flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthShift {
    /// Session time (seconds) at which the shift takes effect.
    pub at: f64,
    /// Multiplier applied to the mean width from `at` onward.
    pub factor: f64,
}

/// Generator configuration. Defaults model a 6.5-hour session sampled
/// every 10 s, with band scales taken from the observed intraday
/// hierarchy: fine states every ~110 s of width ~57 s (ratio 0.52),
/// ten-minute states every 720 s, hour-scale states every 3300 s, the
/// intermediate bands at a width-to-spacing ratio of 0.6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Session length in seconds. Default 23400 (6.5 h).
    pub session_length: f64,
    /// Sample spacing in seconds. Default 10.
    pub step: f64,
    /// Mean spacing of fine states. Default 110.
    pub fine_mean_spacing: f64,
    /// Mean width of fine states. Default 57.
    pub fine_mean_width: f64,
    /// Degrees of freedom of the fine width distribution. Default 8.
    pub fine_width_dof: u32,
    /// Fine state amplitude, band units. Default 1.
    pub fine_amplitude: f64,
    /// Relative amplitude jitter applied to every state. Default 0.2.
    pub amplitude_jitter: f64,
    /// Mean spacing of ten-minute states. Default 720.
    pub inter2_mean_spacing: f64,
    /// Mean width of ten-minute states. Default 432 (ratio 0.6).
    pub inter2_mean_width: f64,
    /// Degrees of freedom of the ten-minute width distribution. Default 8.
    pub inter2_width_dof: u32,
    /// Ten-minute state amplitude. Default 3.
    pub inter2_amplitude: f64,
    /// Mean spacing of hour-scale states. Default 3300.
    pub inter1_mean_spacing: f64,
    /// Mean width of hour-scale states. Default 1980 (ratio 0.6).
    pub inter1_mean_width: f64,
    /// Degrees of freedom of the hour-scale width distribution. Default 8.
    pub inter1_width_dof: u32,
    /// Hour-scale state amplitude. Default 8.
    pub inter1_amplitude: f64,
    /// Piecewise-linear trend control points `(time, value)`. Empty means
    /// a flat zero trend.
    pub trend: Vec<(f64, f64)>,
    /// Standard deviation of the additive Gaussian noise. Default 0.05.
    pub noise_sigma: f64,
    /// Seed for the deterministic generator stream. Default 42.
    pub rng_seed: u64,
    /// Optional mid-session change in the fine mean width.
    pub fine_width_shift: Option<WidthShift>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            session_length: 23_400.0,
            step: 10.0,
            fine_mean_spacing: 110.0,
            fine_mean_width: 57.0,
            fine_width_dof: 8,
            fine_amplitude: 1.0,
            amplitude_jitter: 0.2,
            inter2_mean_spacing: 720.0,
            inter2_mean_width: 432.0,
            inter2_width_dof: 8,
            inter2_amplitude: 3.0,
            inter1_mean_spacing: 3_300.0,
            inter1_mean_width: 1_980.0,
            inter1_width_dof: 8,
            inter1_amplitude: 8.0,
            trend: Vec::new(),
            noise_sigma: 0.05,
            rng_seed: 42,
            fine_width_shift: None,
        }
    }
}

impl SynthConfig {
    /// Validates every field, naming the offending one.
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("session_length", self.session_length),
            ("step", self.step),
            ("fine_mean_spacing", self.fine_mean_spacing),
            ("fine_mean_width", self.fine_mean_width),
            ("fine_amplitude", self.fine_amplitude),
            ("inter2_mean_spacing", self.inter2_mean_spacing),
            ("inter2_mean_width", self.inter2_mean_width),
            ("inter2_amplitude", self.inter2_amplitude),
            ("inter1_mean_spacing", self.inter1_mean_spacing),
            ("inter1_mean_width", self.inter1_mean_width),
            ("inter1_amplitude", self.inter1_amplitude),
        ];
        for (name, v) in positives {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    message: format!("must be positive and finite, got {v}"),
                });
            }
        }
        for (name, dof) in [
            ("fine_width_dof", self.fine_width_dof),
            ("inter2_width_dof", self.inter2_width_dof),
            ("inter1_width_dof", self.inter1_width_dof),
        ] {
            if dof == 0 {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    message: "must be a positive integer".into(),
                });
            }
        }
        if !self.amplitude_jitter.is_finite()
            || !(0.0..1.0).contains(&self.amplitude_jitter)
        {
            return Err(Error::InvalidParameter {
                name: "amplitude_jitter".into(),
                message: format!("must lie in [0, 1), got {}", self.amplitude_jitter),
            });
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidParameter {
                name: "noise_sigma".into(),
                message: format!("must be nonnegative, got {}", self.noise_sigma),
            });
        }
        if self.session_length < 2.0 * self.step {
            return Err(Error::InvalidParameter {
                name: "session_length".into(),
                message: "must cover at least two samples".into(),
            });
        }
        if let Some(shift) = self.fine_width_shift {
            if !shift.at.is_finite() || !shift.factor.is_finite() || shift.factor <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "fine_width_shift".into(),
                    message: "needs finite time and positive factor".into(),
                });
            }
        }
        let mut last = f64::NEG_INFINITY;
        for &(t, v) in &self.trend {
            if !t.is_finite() || !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "trend control point".into(),
                });
            }
            if t <= last {
                return Err(Error::InvalidParameter {
                    name: "trend".into(),
                    message: "control point times must be strictly increasing".into(),
                });
            }
            last = t;
        }
        Ok(())
    }
}

/// Noiseless per-band component series of a generated session.
#[derive(Debug, Clone)]
pub struct BandComponents {
    /// The piecewise-linear trend sampled on the session grid.
    pub trend: TimeSeries,
    /// Sum of the hour-scale states.
    pub inter1: TimeSeries,
    /// Sum of the ten-minute states.
    pub inter2: TimeSeries,
    /// Sum of the fine states.
    pub fine: TimeSeries,
}

/// A generated session: the observable series, the exact state lists that
/// produced it, and the noiseless per-band components.
#[derive(Debug, Clone)]
pub struct SynthSession {
    /// Trend + all bands + noise: what an instrument would record.
    pub series: TimeSeries,
    /// True hour-scale states.
    pub truth_inter1: MultiLorentzianModel,
    /// True ten-minute states.
    pub truth_inter2: MultiLorentzianModel,
    /// True fine states.
    pub truth_fine: MultiLorentzianModel,
    /// Noiseless per-band components.
    pub components: BandComponents,
    /// The configuration that produced this session.
    pub config: SynthConfig,
}

impl SynthSession {
    /// The true model for one state band. The gross band has no states;
    /// it corresponds to the trend.
    pub fn truth(&self, band: Band) -> Option<&MultiLorentzianModel> {
        match band {
            Band::Gross => None,
            Band::Inter1 => Some(&self.truth_inter1),
            Band::Inter2 => Some(&self.truth_inter2),
            Band::Fine => Some(&self.truth_fine),
        }
    }

    /// One state band plus the session noise: the series minus the trend
    /// and the other two bands. This is the cleanest observable version of
    /// a band, free of any smoothing distortion.
    pub fn band_with_noise(&self, band: Band) -> Option<TimeSeries> {
        let (drop_a, drop_b) = match band {
            Band::Gross => return None,
            Band::Inter1 => (&self.components.inter2, &self.components.fine),
            Band::Inter2 => (&self.components.inter1, &self.components.fine),
            Band::Fine => (&self.components.inter1, &self.components.inter2),
        };
        let values = (0..self.series.len())
            .map(|i| {
                self.series.values[i]
                    - self.components.trend.values[i]
                    - drop_a.values[i]
                    - drop_b.values[i]
            })
            .collect();
        Some(TimeSeries {
            start: self.series.start,
            step: self.series.step,
            values,
        })
    }

    /// Width-to-spacing ratio of the true state list for a band.
    pub fn truth_ratio(&self, band: Band) -> Option<f64> {
        let model = self.truth(band)?;
        crate::stats::extract_statistics(model).ok().map(|s| s.ratio)
    }
}

/// One spacing from the Wigner surmise with the given mean, by inverse
/// transform: `mean * sqrt(-(4/pi) ln(1 - u))`.
pub fn sample_wigner<R: Rng + ?Sized>(rng: &mut R, mean_spacing: f64) -> f64 {
    assert!(mean_spacing > 0.0, "mean spacing must be positive");
    let u: f64 = rng.random();
    mean_spacing * (-(4.0 / std::f64::consts::PI) * (1.0 - u).ln()).sqrt()
}

/// One width from the chi-squared family with integer degrees of freedom:
/// the mean-scaled sum of `dof` squared standard normals.
pub fn sample_chi2_width<R: Rng + ?Sized>(rng: &mut R, dof: u32, mean_width: f64) -> f64 {
    assert!(dof >= 1, "dof must be at least 1");
    assert!(mean_width > 0.0, "mean width must be positive");
    let mut acc = 0.0;
    for _ in 0..dof {
        let z: f64 = rng.sample(StandardNormal);
        acc += z * z;
    }
    acc * mean_width / dof as f64
}

struct BandPlan {
    name: &'static str,
    spacing: f64,
    width: f64,
    dof: u32,
    amplitude: f64,
    shift: Option<WidthShift>,
}

/// Generates one synthetic session. Errors when the config is invalid or
/// the session is too short to hold even one state in some band.
pub fn generate_session(config: &SynthConfig) -> Result<SynthSession> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let n = (config.session_length / config.step).floor() as usize + 1;

    let plans = [
        BandPlan {
            name: "inter1",
            spacing: config.inter1_mean_spacing,
            width: config.inter1_mean_width,
            dof: config.inter1_width_dof,
            amplitude: config.inter1_amplitude,
            shift: None,
        },
        BandPlan {
            name: "inter2",
            spacing: config.inter2_mean_spacing,
            width: config.inter2_mean_width,
            dof: config.inter2_width_dof,
            amplitude: config.inter2_amplitude,
            shift: None,
        },
        BandPlan {
            name: "fine",
            spacing: config.fine_mean_spacing,
            width: config.fine_mean_width,
            dof: config.fine_width_dof,
            amplitude: config.fine_amplitude,
            shift: config.fine_width_shift,
        },
    ];

    let mut models: Vec<MultiLorentzianModel> = Vec::with_capacity(3);
    for plan in &plans {
        let mut centers = Vec::new();
        let mut c = 0.0;
        loop {
            c += sample_wigner(&mut rng, plan.spacing);
            if c >= config.session_length {
                break;
            }
            centers.push(c);
        }
        if centers.is_empty() {
            return Err(Error::InvalidParameter {
                name: "session_length".into(),
                message: format!("too short to hold any {} state", plan.name),
            });
        }
        let mut peaks = Vec::with_capacity(centers.len());
        for &t0 in &centers {
            let mean_width = match plan.shift {
                Some(s) if t0 >= s.at => plan.width * s.factor,
                _ => plan.width,
            };
            let width = sample_chi2_width(&mut rng, plan.dof, mean_width);
            let u: f64 = rng.random();
            let amplitude = plan.amplitude * (1.0 + config.amplitude_jitter * (2.0 * u - 1.0));
            peaks.push(LorentzianPeak {
                amplitude,
                center: t0,
                width: width.max(1e-9),
            });
        }
        models.push(MultiLorentzianModel::new(0.0, peaks)?);
    }
    let truth_inter1 = models.remove(0);
    let truth_inter2 = models.remove(0);
    let truth_fine = models.remove(0);

    let grid = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
        (0..n).map(|i| f(i as f64 * config.step)).collect()
    };
    let trend_values = grid(&|t| eval_trend(&config.trend, t));
    let inter1_values = grid(&|t| truth_inter1.eval(t));
    let inter2_values = grid(&|t| truth_inter2.eval(t));
    let fine_values = grid(&|t| truth_fine.eval(t));

    let mut series_values = Vec::with_capacity(n);
    for i in 0..n {
        let noise: f64 = if config.noise_sigma > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            config.noise_sigma * z
        } else {
            0.0
        };
        series_values
            .push(trend_values[i] + inter1_values[i] + inter2_values[i] + fine_values[i] + noise);
    }

    let mk = |values: Vec<f64>| TimeSeries {
        start: 0.0,
        step: config.step,
        values,
    };
    Ok(SynthSession {
        series: mk(series_values),
        truth_inter1,
        truth_inter2,
        truth_fine,
        components: BandComponents {
            trend: mk(trend_values),
            inter1: mk(inter1_values),
            inter2: mk(inter2_values),
            fine: mk(fine_values),
        },
        config: config.clone(),
    })
}

/// Piecewise-linear interpolation of the trend control points, clamped to
/// the first/last value outside their range. No points means zero.
fn eval_trend(points: &[(f64, f64)], t: f64) -> f64 {
    match points {
        [] => 0.0,
        [(_, v)] => *v,
        _ => {
            if t <= points[0].0 {
                return points[0].1;
            }
            if t >= points[points.len() - 1].0 {
                return points[points.len() - 1].1;
            }
            let idx = points.partition_point(|&(pt, _)| pt <= t);
            let (t0, v0) = points[idx - 1];
            let (t1, v1) = points[idx];
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::extract_statistics;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig::default();
        let a = generate_session(&cfg).unwrap();
        let b = generate_session(&cfg).unwrap();
        assert_eq!(a.series.values, b.series.values);
        assert_eq!(a.truth_fine.peaks, b.truth_fine.peaks);
        assert_eq!(a.truth_inter2.peaks, b.truth_inter2.peaks);

        let other = SynthConfig {
            rng_seed: 43,
            ..SynthConfig::default()
        };
        let c = generate_session(&other).unwrap();
        assert_ne!(a.series.values, c.series.values);
    }

    #[test]
    fn default_session_shape() {
        let s = generate_session(&SynthConfig::default()).unwrap();
        assert_eq!(s.series.len(), 2341);
        assert_eq!(s.series.step, 10.0);
        // ~213 fine states expected; allow generous realization scatter.
        let k = s.truth_fine.len();
        assert!((150..=280).contains(&k), "fine count {k}");
        assert!(s.truth_inter2.len() >= 20);
        assert!(s.truth_inter1.len() >= 4);
        // Centers strictly inside the session.
        for p in &s.truth_fine.peaks {
            assert!(p.center > 0.0 && p.center < 23_400.0);
        }
    }

    #[test]
    fn default_truth_ratio_near_052() {
        let s = generate_session(&SynthConfig::default()).unwrap();
        let ratio = s.truth_ratio(Band::Fine).unwrap();
        assert!(
            (ratio - 0.52).abs() <= 0.03,
            "realized fine ratio {ratio} strays from 0.52"
        );
    }

    #[test]
    fn wigner_sampler_mean_within_one_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let sum: f64 = (0..n).map(|_| sample_wigner(&mut rng, 110.0)).sum();
        let mean = sum / n as f64;
        assert!((mean - 110.0).abs() / 110.0 < 0.01, "mean {mean}");
    }

    #[test]
    fn chi2_width_sampler_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (dof, mean_width) = (8u32, 57.0);
        let n = 40_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_chi2_width(&mut rng, dof, mean_width))
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - mean_width).abs() / mean_width < 0.01, "mean {mean}");
        let want_var = 2.0 * mean_width * mean_width / dof as f64;
        assert!((var - want_var).abs() / want_var < 0.05, "var {var}");
    }

    #[test]
    fn dof_estimator_recovers_sampler_dof() {
        // Draws from the width sampler land the moment-matched estimate
        // inside a ±10% bracket around the true degrees of freedom.
        let brackets = [(2u32, 1.8, 2.2), (4, 3.6, 4.4), (8, 7.2, 8.8)];
        for (dof, lo, hi) in brackets {
            let mut rng = ChaCha8Rng::seed_from_u64(23);
            let draws: Vec<f64> = (0..10_000)
                .map(|_| sample_chi2_width(&mut rng, dof, 57.0))
                .collect();
            let est = crate::stats::estimate_chi2_dof(&draws).unwrap();
            assert!(
                est.dof >= lo && est.dof <= hi,
                "dof {dof}: estimate {} outside [{lo}, {hi}]",
                est.dof
            );
        }
    }

    #[test]
    fn chi2_sampler_at_two_dof_is_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mean = 57.0;
        let draws: Vec<f64> = (0..100_000)
            .map(|_| sample_chi2_width(&mut rng, 2, mean))
            .collect();
        let d = crate::stats::ks_statistic(&draws, |x| 1.0 - (-x / mean).exp()).unwrap();
        assert!(d < 0.01, "KS statistic {d}");
    }

    #[test]
    fn wigner_sampler_matches_reference_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_wigner(&mut rng, 1.0)).collect();
        let d = crate::stats::ks_statistic(&draws, |x| {
            crate::stats::wigner_cdf(x).unwrap()
        })
        .unwrap();
        assert!(d < 0.01, "KS statistic {d}");
    }

    #[test]
    fn width_shift_raises_late_widths() {
        let cfg = SynthConfig {
            fine_width_shift: Some(WidthShift {
                at: 11_700.0,
                factor: 1.5,
            }),
            ..SynthConfig::default()
        };
        let s = generate_session(&cfg).unwrap();
        let (mut early, mut late) = (Vec::new(), Vec::new());
        for p in &s.truth_fine.peaks {
            if p.center < 11_700.0 {
                early.push(p.width);
            } else {
                late.push(p.width);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean(&early) - 57.0).abs() / 57.0 < 0.2);
        assert!((mean(&late) - 85.5).abs() / 85.5 < 0.2);
    }

    #[test]
    fn trend_is_piecewise_linear() {
        let cfg = SynthConfig {
            trend: vec![(0.0, 100.0), (23_400.0, 200.0)],
            noise_sigma: 0.0,
            ..SynthConfig::default()
        };
        let s = generate_session(&cfg).unwrap();
        let tr = &s.components.trend;
        assert!((tr.values[0] - 100.0).abs() < 1e-12);
        assert!((tr.values[tr.len() - 1] - 200.0).abs() < 1e-12);
        let mid = tr.values[tr.len() / 2];
        assert!((mid - 150.0).abs() < 0.1);
    }

    #[test]
    fn band_with_noise_recovers_component_plus_noise() {
        let cfg = SynthConfig::default();
        let s = generate_session(&cfg).unwrap();
        let fine_noisy = s.band_with_noise(Band::Fine).unwrap();
        // Residual against the pure component should look like the noise.
        let resid: Vec<f64> = fine_noisy
            .values
            .iter()
            .zip(&s.components.fine.values)
            .map(|(a, b)| a - b)
            .collect();
        let var = resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64;
        assert!((var.sqrt() - 0.05).abs() < 0.005, "noise sd {}", var.sqrt());
        assert!(s.band_with_noise(Band::Gross).is_none());
    }

    #[test]
    fn config_validation_names_fields() {
        let bad = SynthConfig {
            fine_mean_spacing: -5.0,
            ..SynthConfig::default()
        };
        match generate_session(&bad) {
            Err(Error::InvalidParameter { name, .. }) => {
                assert_eq!(name, "fine_mean_spacing")
            }
            other => panic!("expected InvalidParameter, got {other:?}"),
        }
        let bad = SynthConfig {
            amplitude_jitter: 1.0,
            ..SynthConfig::default()
        };
        assert!(generate_session(&bad).is_err());
        let bad = SynthConfig {
            fine_width_dof: 0,
            ..SynthConfig::default()
        };
        assert!(generate_session(&bad).is_err());
    }

    #[test]
    fn session_too_short_for_states_errors() {
        let bad = SynthConfig {
            session_length: 40.0,
            step: 10.0,
            ..SynthConfig::default()
        };
        // 40 s cannot hold an hour-scale state.
        assert!(generate_session(&bad).is_err());
    }

    #[test]
    fn truth_statistics_match_peak_lists() {
        let s = generate_session(&SynthConfig::default()).unwrap();
        let st = extract_statistics(&s.truth_fine).unwrap();
        assert_eq!(st.widths.len(), s.truth_fine.len());
        // Spacing mean within realization scatter of the configured 110 s.
        assert!((st.mean_interval - 110.0).abs() < 15.0);
        assert!((st.mean_width - 57.0).abs() < 8.0);
    }
}
