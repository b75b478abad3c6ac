use ndarray::Array2;
use pulsecorr::dynamics::{target_superoperator, ControlPulses, SystemSpec, DEFAULT_HORIZON, DEFAULT_SLOTS};
use pulsecorr::grape::{optimize_pulses, OptimConfig};
use pulsecorr::quantum::haar_with_rng;
use pulsecorr::rng::RngSeed;
use rand::Rng;

fn main() {
    let sys = SystemSpec::drift_free(DEFAULT_HORIZON, DEFAULT_SLOTS);
    let mut rng = RngSeed::new(777, 9).rng();
    let u = haar_with_rng(2, &mut rng);
    let y = target_superoperator(&u).unwrap();
    let mut used = 0usize;
    for restart in 0..5 {
        let budget = 2000usize.saturating_sub(used);
        if budget == 0 { println!("restart {restart}: budget exhausted"); break; }
        let init = ControlPulses::new(Array2::from_shape_fn((DEFAULT_SLOTS, 2), |_| rng.gen_range(-1.0..=1.0))).unwrap();
        let cfg = OptimConfig { max_iters: budget, ..OptimConfig::default() };
        let r = optimize_pulses(&sys, &y, init, &cfg).unwrap();
        used += r.iterations.max(1);
        println!("restart {restart}: F={:.6} iters={} used_total={used}", r.fidelity, r.iterations);
        if r.converged { break; }
    }
}
