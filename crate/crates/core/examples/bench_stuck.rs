use ndarray::Array2;
use pulsecorr::dynamics::{target_superoperator, ControlPulses, SystemSpec, DEFAULT_HORIZON, DEFAULT_SLOTS};
use pulsecorr::grape::{optimize_pulses, OptimConfig};
use pulsecorr::quantum::haar_with_rng;
use pulsecorr::rng::RngSeed;
use rand::Rng;

fn main() {
    let sys = SystemSpec::drift_free(DEFAULT_HORIZON, DEFAULT_SLOTS);
    for (stream, lr) in [(21u64, 0.05), (25, 0.05), (29, 0.05), (25, 0.02), (29, 0.02)] {
        let cfg = OptimConfig { learning_rate: lr, max_iters: 20000, ..OptimConfig::default() };
        let mut rng = RngSeed::new(4242, stream).rng();
        let u = haar_with_rng(2, &mut rng);
        let y = target_superoperator(&u).unwrap();
        let init = ControlPulses::new(Array2::from_shape_fn((DEFAULT_SLOTS, 2), |_| rng.gen_range(-1.0..=1.0))).unwrap();
        let r = optimize_pulses(&sys, &y, init, &cfg).unwrap();
        println!("stream {stream} lr {lr}: F={:.6} iters={} converged={}", r.fidelity, r.iterations, r.converged);
    }
}
