use ndarray::Array2;
use pulsecorr::dynamics::{target_superoperator, ControlPulses, SystemSpec, DEFAULT_HORIZON, DEFAULT_SLOTS};
use pulsecorr::grape::{grape_gradient, optimize_pulses, OptimConfig};
use pulsecorr::quantum::haar_with_rng;
use pulsecorr::rng::RngSeed;
use rand::Rng;

fn main() {
    let sys = SystemSpec::drift_free(DEFAULT_HORIZON, DEFAULT_SLOTS);
    for stream in 0..50u64 {
        let cfg = OptimConfig { learning_rate: 0.05, ..OptimConfig::default() };
        let mut rng = RngSeed::new(4242, stream).rng();
        let u = haar_with_rng(2, &mut rng);
        let y = target_superoperator(&u).unwrap();
        let init = ControlPulses::new(Array2::from_shape_fn((DEFAULT_SLOTS, 2), |_| rng.gen_range(-1.0..=1.0))).unwrap();
        let r = optimize_pulses(&sys, &y, init, &cfg).unwrap();
        if !r.converged {
            let g = grape_gradient(&sys, &r.pulses, &y);
            let gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let at_bound = r.pulses.values().iter().filter(|v| v.abs() == 1.0).count();
            println!("stream {stream}: F={:.6} iters={} grad_max={gmax:.3e} bound_saturated={at_bound}/64", r.fidelity, r.iterations);
        }
    }
}
