use pulsecorr::dynamics::{SystemSpec, DEFAULT_HORIZON, DEFAULT_SLOTS};
use pulsecorr::grape::{generate_ncp, OptimConfig};
use pulsecorr::rng::RngSeed;
use rayon::prelude::*;
use std::time::Instant;

fn main() {
    let sys = SystemSpec::drift_free(DEFAULT_HORIZON, DEFAULT_SLOTS);
    for lr in [0.02, 0.05] {
        let t0 = Instant::now();
        let ok: usize = (0..50u64)
            .into_par_iter()
            .map(|stream| {
                let cfg = OptimConfig { learning_rate: lr, ..OptimConfig::default() };
                generate_ncp(&sys, RngSeed::new(4242, stream), &cfg).map(|_| 1usize).unwrap_or(0)
            })
            .sum();
        println!("lr {lr}: {ok}/50 targets admitted within shared 2000-iteration budget, wall {:?}", t0.elapsed());
    }
}
