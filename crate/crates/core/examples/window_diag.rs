//! Diagnostic: full-session fine-band fits across seeds and reseed depths.
use finestra::{
    extract_statistics, fit_series, generate_session, Band, DetectOptions, FitOptions,
    SynthConfig,
};
use std::time::Instant;

fn main() {
    let detect = DetectOptions {
        min_prominence: None,
        min_separation: Some(50.0),
    };
    for rounds in [1usize, 2, 3] {
        let mut devs = Vec::new();
        for seed in 1000u64..1005 {
            let config = SynthConfig {
                rng_seed: seed,
                ..SynthConfig::default()
            };
            let session = generate_session(&config).unwrap();
            let band = session.band_with_noise(Band::Fine).unwrap();
            let truth = session.truth_ratio(Band::Fine).unwrap();
            let opts = FitOptions {
                free_baseline: true,
                reseed_rounds: rounds,
                max_width: Some(300.0),
                ..FitOptions::default()
            };
            let t0 = Instant::now();
            let fit = fit_series(&band, &opts, &detect).unwrap();
            let dt = t0.elapsed().as_secs_f64();
            let s = extract_statistics(&fit.model).unwrap();
            let dev = s.ratio - truth;
            devs.push(dev.abs());
            println!(
                "R{rounds} seed {seed}: n={} (true {}) W={:.1} T={:.1} r={:.3} (true {:.3}) dev={:+.3} rss={:.1} {:.1}s",
                fit.model.len(),
                session.truth(Band::Fine).unwrap().len(),
                s.mean_width,
                s.mean_interval,
                s.ratio,
                truth,
                dev,
                fit.rss,
                dt
            );
        }
        devs.sort_by(|a, b| a.total_cmp(b));
        println!("R{rounds} median |dev| = {:.3}\n", devs[devs.len() / 2]);
    }
}
