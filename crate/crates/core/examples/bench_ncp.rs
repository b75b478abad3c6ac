use pulsecorr::dynamics::{SystemSpec, DEFAULT_HORIZON, DEFAULT_SLOTS};
use pulsecorr::grape::{generate_ncp, OptimConfig};
use pulsecorr::rng::RngSeed;
use std::time::Instant;

fn main() {
    let sys = SystemSpec::drift_free(DEFAULT_HORIZON, DEFAULT_SLOTS);
    let cfg = OptimConfig::default();
    let t0 = Instant::now();
    let mut ok = 0;
    let mut total_restarts = 0;
    for stream in 0..10u64 {
        let t = Instant::now();
        match generate_ncp(&sys, RngSeed::new(4242, stream), &cfg) {
            Ok(s) => {
                ok += 1;
                total_restarts += s.restarts;
                println!("stream {stream}: F = {:.6} restarts {} in {:?}", s.fidelity, s.restarts, t.elapsed());
            }
            Err(e) => println!("stream {stream}: FAILED {e}"),
        }
    }
    println!("ok {ok}/10, extra restarts {total_restarts}, total {:?}", t0.elapsed());
}
