use ndarray::Array2;
use pulsecorr::dynamics::{target_superoperator, ControlPulses, SystemSpec, DEFAULT_HORIZON, DEFAULT_SLOTS};
use pulsecorr::grape::{optimize_pulses, OptimConfig};
use pulsecorr::quantum::haar_with_rng;
use pulsecorr::rng::RngSeed;
use rand::Rng;
use rayon::prelude::*;
use std::time::Instant;

fn main() {
    let sys = SystemSpec::drift_free(DEFAULT_HORIZON, DEFAULT_SLOTS);
    for lr in [0.02, 0.05, 0.1, 0.2] {
        let t0 = Instant::now();
        let results: Vec<(bool, usize, f64)> = (0..50u64)
            .into_par_iter()
            .map(|stream| {
                let cfg = OptimConfig { learning_rate: lr, ..OptimConfig::default() };
                let mut rng = RngSeed::new(4242, stream).rng();
                let u = haar_with_rng(2, &mut rng);
                let y = target_superoperator(&u).unwrap();
                let init = ControlPulses::new(Array2::from_shape_fn((DEFAULT_SLOTS, 2), |_| rng.gen_range(-1.0..=1.0))).unwrap();
                let r = optimize_pulses(&sys, &y, init, &cfg).unwrap();
                (r.converged, r.iterations, r.fidelity)
            })
            .collect();
        let ok = results.iter().filter(|r| r.0).count();
        let med_iters = {
            let mut it: Vec<usize> = results.iter().filter(|r| r.0).map(|r| r.1).collect();
            it.sort();
            if it.is_empty() { 0 } else { it[it.len() / 2] }
        };
        let worst = results.iter().map(|r| r.2).fold(1.0_f64, f64::min);
        println!("lr {lr}: {ok}/50 converged, median iters {med_iters}, worst F {worst:.6}, wall {:?}", t0.elapsed());
    }
}
