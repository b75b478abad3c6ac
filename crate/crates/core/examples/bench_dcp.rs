use pulsecorr::dynamics::{target_superoperator, SystemSpec, DEFAULT_HORIZON, DEFAULT_SLOTS};
use pulsecorr::grape::{generate_dcp, generate_ncp, OptimConfig, DCP_FIDELITY_THRESHOLD};
use pulsecorr::quantum::{pauli_pair, PauliAxis};
use pulsecorr::rng::RngSeed;
use rayon::prelude::*;
use std::time::Instant;

fn main() {
    let sys_free = SystemSpec::drift_free(DEFAULT_HORIZON, DEFAULT_SLOTS);
    let cfg = OptimConfig::default();
    let t0 = Instant::now();
    let samples: Vec<_> = (0..20u64)
        .into_par_iter()
        .map(|stream| generate_ncp(&sys_free, RngSeed::new(777, stream), &cfg).unwrap())
        .collect();
    println!("20 NCP in {:?}", t0.elapsed());

    for gamma in [0.2, 0.4, 0.6, 0.8] {
        let drift = pauli_pair(PauliAxis::Y, PauliAxis::I).mapv(|z| z * gamma);
        let sys = SystemSpec::two_qubit(drift, Vec::new(), DEFAULT_HORIZON, DEFAULT_SLOTS).unwrap();
        let t = Instant::now();
        let out: Vec<(bool, f64, usize)> = samples
            .par_iter()
            .map(|s| {
                let y = target_superoperator(&s.u_target).unwrap();
                let dcfg = OptimConfig { target_fidelity: DCP_FIDELITY_THRESHOLD, ..cfg };
                let r = generate_dcp(&sys, &s.pulses, &y, &dcfg).unwrap();
                let dist = r.pulses.l2_distance(&s.pulses);
                (r.converged, dist, r.iterations)
            })
            .collect();
        let ok = out.iter().filter(|o| o.0).count();
        let mut dists: Vec<f64> = out.iter().map(|o| o.1).collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = dists[dists.len() / 2];
        let med_iters = { let mut it: Vec<usize> = out.iter().map(|o| o.2).collect(); it.sort(); it[it.len()/2] };
        println!("gamma {gamma}: {ok}/20 reach 0.99, median ||DCP-NCP|| {med:.4}, median iters {med_iters}, wall {:?}", t.elapsed());
    }
}
