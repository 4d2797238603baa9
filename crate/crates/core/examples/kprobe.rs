use std::time::Instant;

use excloop::clouds::clt_fluctuation;
use excloop::diagnostics::excess_kurtosis;
use excloop::geom::{Density, Region};
use excloop::sampler::ExcursionConfig;

fn main() {
    let cfg = ExcursionConfig::new(0.05, 6.25e-4);
    let probe = Density::indicator(Region::disc(0.4, 0.0, 0.2));
    let r = 12_000;
    for c in [0.22f64, 0.3] {
        let kurt = |n: usize, seed: u64| {
            let run = clt_fluctuation(n, c, &probe, &cfg, r, seed, 0).unwrap();
            let v: Vec<f64> = run.y.iter().map(|s| s.value).collect();
            excess_kurtosis(&v)
        };
        let t0 = Instant::now();
        let k16 = kurt(16, 1_000);
        let k64 = kurt(64, 2_000);
        println!(
            "c = {c}: k16 = {k16:.3}, k64 = {k64:.3}, ratio {:.2}  [{:.1}s]",
            k16 / k64,
            t0.elapsed().as_secs_f64()
        );
    }
}
