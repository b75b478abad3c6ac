use pulsecorr::dynamics::{target_superoperator, SystemSpec, DEFAULT_HORIZON, DEFAULT_SLOTS};
use pulsecorr::grape::{generate_dcp, generate_ncp, OptimConfig, DCP_FIDELITY_THRESHOLD};
use pulsecorr::quantum::{pauli_pair, PauliAxis};
use pulsecorr::rng::RngSeed;
use rayon::prelude::*;

fn main() {
    let sys_free = SystemSpec::drift_free(DEFAULT_HORIZON, DEFAULT_SLOTS);
    let cfg = OptimConfig::default();
    // H_drift = 0.8 (0.8 sx + 0.2 sy) ⊗ 1
    let drift = (pauli_pair(PauliAxis::X, PauliAxis::I).mapv(|z| z * 0.8)
        + pauli_pair(PauliAxis::Y, PauliAxis::I).mapv(|z| z * 0.2))
    .mapv(|z| z * 0.8);
    let sys = SystemSpec::two_qubit(drift, Vec::new(), DEFAULT_HORIZON, DEFAULT_SLOTS).unwrap();
    let ok: usize = (0..10u64)
        .into_par_iter()
        .map(|stream| {
            let s = generate_ncp(&sys_free, RngSeed::new(555, stream), &cfg).unwrap();
            let y = target_superoperator(&s.u_target).unwrap();
            let dcfg = OptimConfig { target_fidelity: DCP_FIDELITY_THRESHOLD, ..cfg };
            let r = generate_dcp(&sys, &s.pulses, &y, &dcfg).unwrap();
            usize::from(r.converged)
        })
        .sum();
    println!("mixed drift 0.8(0.8sx+0.2sy): {ok}/10 reach 0.99");
}
