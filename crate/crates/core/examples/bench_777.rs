use pulsecorr::dynamics::{SystemSpec, DEFAULT_HORIZON, DEFAULT_SLOTS};
use pulsecorr::grape::{generate_ncp, OptimConfig};
use pulsecorr::rng::RngSeed;

fn main() {
    let sys = SystemSpec::drift_free(DEFAULT_HORIZON, DEFAULT_SLOTS);
    let cfg = OptimConfig::default();
    for stream in 0..20u64 {
        match generate_ncp(&sys, RngSeed::new(777, stream), &cfg) {
            Ok(s) => println!("stream {stream}: ok F={:.5} restarts {}", s.fidelity, s.restarts),
            Err(e) => println!("stream {stream}: FAIL {e}"),
        }
    }
}
