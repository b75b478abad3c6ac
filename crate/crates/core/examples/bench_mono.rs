use pulsecorr::dynamics::{target_superoperator, SystemSpec, DEFAULT_HORIZON, DEFAULT_SLOTS};
use pulsecorr::grape::{generate_dcp, generate_ncp, OptimConfig, DCP_FIDELITY_THRESHOLD};
use pulsecorr::quantum::{pauli_pair, PauliAxis};
use pulsecorr::rng::RngSeed;
use rayon::prelude::*;

fn main() {
    let sys_free = SystemSpec::drift_free(DEFAULT_HORIZON, DEFAULT_SLOTS);
    let base = OptimConfig::default();
    let samples: Vec<_> = (0..20u64)
        .into_par_iter()
        .map(|s| generate_ncp(&sys_free, RngSeed::new(4100, s), &base).unwrap())
        .collect();
    for max_iters in [2000usize, 6000] {
        let mut meds = Vec::new();
        let mut convs = Vec::new();
        for gamma in [0.2, 0.4, 0.6, 0.8] {
            let drift = pauli_pair(PauliAxis::Y, PauliAxis::I).mapv(|z| z * gamma);
            let sys = SystemSpec::two_qubit(drift, Vec::new(), DEFAULT_HORIZON, DEFAULT_SLOTS).unwrap();
            let cfg = OptimConfig { target_fidelity: DCP_FIDELITY_THRESHOLD, max_iters, ..base };
            let results: Vec<_> = samples.par_iter().map(|s| {
                let y = target_superoperator(&s.u_target).unwrap();
                let r = generate_dcp(&sys, &s.pulses, &y, &cfg).unwrap();
                (r.converged, r.pulses.l2_distance(&s.pulses))
            }).collect();
            let conv = results.iter().filter(|r| r.0).count();
            let mut d: Vec<f64> = results.iter().filter(|r| r.0).map(|r| r.1).collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            meds.push(if d.is_empty() { f64::NAN } else { d[d.len()/2] });
            convs.push(conv);
        }
        println!("budget {max_iters}: converged {convs:?} medians(conv-only) {meds:?}");
    }
    // Mixed drift achievability with bigger budget
    let drift = (pauli_pair(PauliAxis::X, PauliAxis::I).mapv(|z| z * 0.8)
        + pauli_pair(PauliAxis::Y, PauliAxis::I).mapv(|z| z * 0.2)).mapv(|z| z * 0.8);
    let sys = SystemSpec::two_qubit(drift, Vec::new(), DEFAULT_HORIZON, DEFAULT_SLOTS).unwrap();
    for max_iters in [2000usize, 6000] {
        let cfg = OptimConfig { target_fidelity: DCP_FIDELITY_THRESHOLD, max_iters, ..base };
        let ok: usize = samples[..6].par_iter().map(|s| {
            let y = target_superoperator(&s.u_target).unwrap();
            usize::from(generate_dcp(&sys, &s.pulses, &y, &cfg).unwrap().converged)
        }).sum();
        println!("mixed drift budget {max_iters}: {ok}/6");
    }
}
