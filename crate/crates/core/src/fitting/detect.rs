//! Peak detection: local maxima filtered by topographic prominence and
//! thinned to a minimum separation, producing seeds for the fitter.

use crate::error::{Error, Result};
use crate::timeseries::TimeSeries;
use serde::{Deserialize, Serialize};

/// Initial guess for one Lorentzian state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSeed {
    /// Guessed amplitude.
    pub m0_guess: f64,
    /// Guessed center time.
    pub t0_guess: f64,
    /// Guessed full width at half maximum.
    pub dt_guess: f64,
}

/// Detection controls. `None` fields resolve to data-driven defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectOptions {
    /// Smallest topographic prominence a candidate must clear. `None`
    /// derives a threshold from the series itself: 7.5 times a robust
    /// noise scale, or 2% of the robust value range, whichever is larger.
    pub min_prominence: Option<f64>,
    /// Smallest allowed gap between accepted candidates, in time units.
    /// `None` falls back to three sample steps; band-aware callers
    /// substitute the band's characteristic spacing floor.
    pub min_separation: Option<f64>,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            min_prominence: None,
            min_separation: None,
        }
    }
}

/// Value at quantile `q` of an ascending-sorted slice, by nearest rank.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx]
}

/// Data-driven prominence floor: `max(7.5 * sigma_hat, 0.02 * range)`,
/// where `sigma_hat` is the noise scale implied by the median absolute
/// first difference and `range` spans the 0.5%..99.5% quantiles.
///
/// The noise multiplier sits at the extreme-value scale, not the
/// pointwise one: prominence in pure iid noise is a peak-to-valley
/// measure, and over thousands of samples the deepest cols reach six to
/// seven sigma, so a smaller multiple would pass noise maxima as peaks.
pub(crate) fn auto_min_prominence(values: &[f64]) -> f64 {
    let mut diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    diffs.sort_by(|a, b| a.total_cmp(b));
    let med = quantile(&diffs, 0.5);
    // Differencing white noise doubles its variance, hence the sqrt(2);
    // 1.4826 converts a median absolute deviation to a standard deviation.
    let sigma = 1.4826 * med / std::f64::consts::SQRT_2;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let range = quantile(&sorted, 0.995) - quantile(&sorted, 0.005);
    (7.5 * sigma).max(0.02 * range).max(f64::MIN_POSITIVE)
}

/// Topographic prominence of the candidate at `idx`: its height above
/// the higher of the two cols separating it from taller terrain. A side
/// with no taller terrain contributes no col; a global maximum falls
/// back to its height above the lower of the two side minima.
fn prominence(values: &[f64], idx: usize) -> f64 {
    let h = values[idx];
    let walk = |dir: isize| -> (f64, bool) {
        let mut low = h;
        let mut j = idx as isize;
        loop {
            j += dir;
            if j < 0 || j as usize >= values.len() {
                return (low, false);
            }
            let v = values[j as usize];
            if v > h {
                return (low, true);
            }
            low = low.min(v);
        }
    };
    let (min_l, higher_l) = walk(-1);
    let (min_r, higher_r) = walk(1);
    let col = match (higher_l, higher_r) {
        (true, true) => min_l.max(min_r),
        (true, false) => min_l,
        (false, true) => min_r,
        (false, false) => min_l.min(min_r),
    };
    h - col
}

/// Finds peak seeds in a series.
///
/// Candidates are strict local maxima (a plateau counts once, at its
/// left edge). Each must clear the prominence floor; survivors are
/// thinned greedily in descending prominence order (ties to the earlier
/// time) so that accepted seeds are at least `min_separation` apart.
/// Seed widths start at half the separation floor; amplitudes at the
/// candidate's prominence.
pub fn detect_peaks(series: &TimeSeries, options: &DetectOptions) -> Result<Vec<PeakSeed>> {
    let min_separation = options.min_separation.unwrap_or(3.0 * series.step);
    if !min_separation.is_finite() || min_separation < series.step {
        return Err(Error::InvalidParameter {
            name: "min_separation".into(),
            message: format!(
                "must be finite and at least one sample step ({}), got {min_separation}",
                series.step
            ),
        });
    }
    let min_prominence = match options.min_prominence {
        Some(p) if !p.is_finite() || p <= 0.0 => {
            return Err(Error::InvalidParameter {
                name: "min_prominence".into(),
                message: format!("must be positive and finite, got {p}"),
            });
        }
        Some(p) => p,
        None => auto_min_prominence(&series.values),
    };

    let v = &series.values;
    let n = v.len();
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    let mut i = 1;
    while i + 1 <= n - 1 {
        if v[i] > v[i - 1] {
            // Scan any plateau to confirm a drop on the far side.
            let mut j = i;
            while j + 1 < n && v[j + 1] == v[i] {
                j += 1;
            }
            if j + 1 < n && v[j + 1] < v[i] {
                let p = prominence(v, i);
                if p >= min_prominence {
                    candidates.push((i, p));
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut accepted: Vec<(usize, f64)> = Vec::new();
    'next: for (idx, p) in candidates {
        let t = series.time(idx);
        for &(kept, _) in &accepted {
            if (t - series.time(kept)).abs() < min_separation {
                continue 'next;
            }
        }
        accepted.push((idx, p));
    }
    accepted.sort_by_key(|&(idx, _)| idx);

    Ok(accepted
        .into_iter()
        .map(|(idx, p)| PeakSeed {
            m0_guess: p,
            t0_guess: series.time(idx),
            dt_guess: min_separation / 2.0,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::LorentzianPeak;

    fn series(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(0.0, 1.0, values).unwrap()
    }

    #[test]
    fn finds_isolated_lorentzians_at_their_centers() {
        let peaks = [
            LorentzianPeak::new(1.0, 100.0, 12.0).unwrap(),
            LorentzianPeak::new(2.0, 200.0, 8.0).unwrap(),
            LorentzianPeak::new(0.8, 320.0, 15.0).unwrap(),
        ];
        let values: Vec<f64> = (0..400)
            .map(|i| peaks.iter().map(|p| p.eval(i as f64)).sum())
            .collect();
        let ts = series(values);
        let seeds = detect_peaks(
            &ts,
            &DetectOptions {
                min_prominence: Some(0.1),
                min_separation: Some(20.0),
            },
        )
        .unwrap();
        assert_eq!(seeds.len(), 3);
        for (seed, peak) in seeds.iter().zip(&peaks) {
            assert!(
                (seed.t0_guess - peak.center).abs() <= 1.0,
                "seed at {} for center {}",
                seed.t0_guess,
                peak.center
            );
        }
    }

    #[test]
    fn plateau_counts_once_at_left_edge() {
        let ts = series(vec![0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        let seeds = detect_peaks(
            &ts,
            &DetectOptions {
                min_prominence: Some(0.5),
                min_separation: Some(1.0),
            },
        )
        .unwrap();
        assert_eq!(seeds.len(), 1);
        assert_eq!(seeds[0].t0_guess, 2.0);
    }

    #[test]
    fn equal_twin_maxima_keep_the_earlier_one() {
        let ts = series(vec![0.0, 1.0, 0.5, 1.0, 0.0]);
        let seeds = detect_peaks(
            &ts,
            &DetectOptions {
                min_prominence: Some(0.2),
                min_separation: Some(3.0),
            },
        )
        .unwrap();
        assert_eq!(seeds.len(), 1);
        assert_eq!(seeds[0].t0_guess, 1.0);
    }

    #[test]
    fn separation_thinning_keeps_the_more_prominent() {
        // Two peaks 5 apart, the taller second; separation 8 forces a choice.
        let mut values = vec![0.0; 30];
        values[10] = 1.0;
        values[15] = 2.0;
        let ts = series(values);
        let seeds = detect_peaks(
            &ts,
            &DetectOptions {
                min_prominence: Some(0.5),
                min_separation: Some(8.0),
            },
        )
        .unwrap();
        assert_eq!(seeds.len(), 1);
        assert_eq!(seeds[0].t0_guess, 15.0);
        assert_eq!(seeds[0].m0_guess, 2.0);
    }

    #[test]
    fn auto_threshold_suppresses_pure_noise() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..2000)
            .map(|_| {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                0.05 * z
            })
            .collect();
        let ts = series(values);
        let seeds = detect_peaks(&ts, &DetectOptions::default()).unwrap();
        assert!(seeds.len() <= 2, "noise produced {} seeds", seeds.len());
    }

    #[test]
    fn auto_threshold_still_finds_real_peaks_in_noise() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let peak = LorentzianPeak::new(1.0, 500.0, 30.0).unwrap();
        let values: Vec<f64> = (0..1000)
            .map(|i| {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                peak.eval(i as f64) + 0.05 * z
            })
            .collect();
        let ts = series(values);
        let seeds = detect_peaks(
            &ts,
            &DetectOptions {
                min_prominence: None,
                min_separation: Some(50.0),
            },
        )
        .unwrap();
        assert_eq!(seeds.len(), 1);
        assert!((seeds[0].t0_guess - 500.0).abs() <= 5.0);
    }

    #[test]
    fn constant_series_yields_no_seeds() {
        let ts = series(vec![1.0; 50]);
        let seeds = detect_peaks(&ts, &DetectOptions::default()).unwrap();
        assert!(seeds.is_empty());
    }

    #[test]
    fn rejects_bad_options() {
        let ts = series(vec![0.0, 1.0, 0.0]);
        let err = detect_peaks(
            &ts,
            &DetectOptions {
                min_prominence: Some(0.0),
                min_separation: None,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { ref name, .. } if name == "min_prominence"));
        let err = detect_peaks(
            &ts,
            &DetectOptions {
                min_prominence: None,
                min_separation: Some(0.5),
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { ref name, .. } if name == "min_separation"));
    }
}
