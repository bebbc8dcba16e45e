//! Diagnostic: classify weak fitted peaks by proximity to truth and to neighbors.
use finestra::{
    fit_series, generate_session, Band, DetectOptions, FitOptions, SynthConfig,
};

fn main() {
    for seed in [1000u64, 1003, 1004] {
        let config = SynthConfig {
            rng_seed: seed,
            ..SynthConfig::default()
        };
        let session = generate_session(&config).unwrap();
        let band = session.band_with_noise(Band::Fine).unwrap();
        let truth = session.truth(Band::Fine).unwrap();
        let detect = DetectOptions {
            min_prominence: None,
            min_separation: Some(50.0),
        };
        let opts = FitOptions {
            free_baseline: true,
            max_width: Some(300.0),
            ..FitOptions::default()
        };
        let fit = fit_series(&band, &opts, &detect).unwrap();
        let mut peaks = fit.model.peaks.clone();
        peaks.sort_by(|a, b| a.center.total_cmp(&b.center));
        println!("-- fine seed {seed}: n={} true={} --", peaks.len(), truth.len());
        for (i, p) in peaks.iter().enumerate() {
            if p.amplitude >= 0.6 {
                continue;
            }
            let d_true = truth
                .peaks
                .iter()
                .map(|t| (t.center - p.center).abs())
                .fold(f64::INFINITY, f64::min);
            let d_fit = peaks
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| (q.center - p.center).abs())
                .fold(f64::INFINITY, f64::min);
            // Amplitude of the nearest fitted neighbour, for the satellite test.
            let (nb_amp, nb_d) = peaks
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| (q.amplitude, (q.center - p.center).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            let _ = nb_d;
            println!(
                "  weak m={:.3} w={:6.1} t={:8.1} d_true={:6.1} d_fit={:6.1} nb_amp={:.2}",
                p.amplitude, p.width, p.center, d_true, d_fit, nb_amp
            );
        }
    }
}
