//! Structural band decomposition and overlapping-Lorentzian state
//! analysis for intraday index series.
//!
//! The library splits a uniformly sampled session into four structural
//! bands (gross, two intermediate, fine) by cascaded moving-average
//! subtraction, models each band as a sum of overlapping Lorentzian
//! states fitted by damped least squares, and characterizes the fitted
//! states: width-to-spacing ratios, Wigner-surmise interval statistics,
//! chi-squared width families, and an early-session ratio predictor. A
//! built-in synthetic session generator with exact ground truth closes
//! the loop, letting every stage be verified end to end.
//!
//! Typical flow:
//!
//! ```
//! use finestra::{decompose, fit_band, extract_statistics};
//! use finestra::{Band, DecompositionConfig, DetectOptions, FitOptions};
//! use finestra::synth::{generate_session, SynthConfig};
//!
//! let session = generate_session(&SynthConfig::default()).unwrap();
//! let bands = decompose(&session.series, &DecompositionConfig::default()).unwrap();
//! let fit = fit_band(
//!     &bands,
//!     Band::Inter2,
//!     &FitOptions::default(),
//!     &DetectOptions::default(),
//! )
//! .unwrap();
//! let stats = extract_statistics(&fit.model).unwrap();
//! assert!(stats.ratio > 0.0);
//! ```

pub mod error;
pub mod fitting;
pub mod lorentz;
pub mod predictor;
pub mod stats;
pub mod synth;
pub mod timeseries;

pub use error::{Error, ErrorClass, Result};
pub use fitting::{
    detect_peaks, fit_band, fit_multi_lorentzian, fit_series, DetectOptions, FitOptions,
    FitResult, PeakSeed,
};
pub use lorentz::{LorentzianPeak, ModelMean, MultiLorentzianModel};
pub use predictor::{predict_and_score, PredictorOptions, RatioTrack, WindowRatio};
pub use synth::{
    generate_session, sample_chi2_width, sample_wigner, BandComponents, SynthConfig,
    SynthSession, WidthShift,
};

pub use stats::{
    chi2_family_cdf, chi2_family_pdf, estimate_chi2_dof, extract_statistics, fit_distributions,
    histogram, ks_statistic, porter_thomas_pdf, wigner_cdf, wigner_pdf, Chi2DofEstimate,
    DistributionFamily, DistributionFit, DistributionParams, Histogram, StateStatistics,
};
pub use timeseries::{
    decompose, Band, BandDecomposition, DecompositionConfig, TimeSeries,
};
