//! Empirical properties of the NCP -> DCP correction: the correction grows
//! with the drift strength, stays local to its seed, and strong mixed drifts
//! remain correctable.

use rayon::prelude::*;

use pulsecorr::dynamics::{
    target_superoperator, ControlPulses, SystemSpec, DEFAULT_HORIZON, DEFAULT_SLOTS,
};
use pulsecorr::grape::{
    generate_dcp, generate_ncp, NcpSample, OptimConfig, DCP_FIDELITY_THRESHOLD,
};
use pulsecorr::linalg::CMatrix;
use pulsecorr::quantum::{pauli_pair, PauliAxis};
use pulsecorr::rng::RngSeed;

fn drift_sy(gamma: f64) -> CMatrix {
    pauli_pair(PauliAxis::Y, PauliAxis::I).mapv(|z| z * gamma)
}

fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

fn ncp_samples(count: u64, seed: u64) -> Vec<NcpSample> {
    let sys_free = SystemSpec::drift_free(DEFAULT_HORIZON, DEFAULT_SLOTS);
    let cfg = OptimConfig::default();
    (0..count)
        .into_par_iter()
        .map(|stream| generate_ncp(&sys_free, RngSeed::new(seed, stream), &cfg).unwrap())
        .collect()
}

#[test]
fn correction_distance_grows_with_drift_strength() {
    let samples = ncp_samples(20, 4100);
    let cfg = OptimConfig {
        target_fidelity: DCP_FIDELITY_THRESHOLD,
        ..OptimConfig::default()
    };

    // Medians over the admitted (F >= 0.99) corrections; the strongest
    // drifts leave fewer of them, but enough for a median.
    let mut medians = Vec::new();
    let mut dcp_at_02: Vec<(ControlPulses, usize)> = Vec::new();
    for gamma in [0.2, 0.4, 0.6, 0.8] {
        let sys =
            SystemSpec::two_qubit(drift_sy(gamma), Vec::new(), DEFAULT_HORIZON, DEFAULT_SLOTS)
                .unwrap();
        let results: Vec<_> = samples
            .par_iter()
            .map(|s| {
                let y = target_superoperator(&s.u_target).unwrap();
                generate_dcp(&sys, &s.pulses, &y, &cfg).unwrap()
            })
            .collect();
        let distances: Vec<f64> = results
            .iter()
            .zip(samples.iter())
            .filter(|(r, _)| r.converged)
            .map(|(r, s)| r.pulses.l2_distance(&s.pulses))
            .collect();
        assert!(
            !distances.is_empty(),
            "no admitted corrections at gamma {gamma}"
        );
        medians.push(median(distances));
        if gamma == 0.2 {
            assert!(
                results.iter().filter(|r| r.converged).count() >= 18,
                "gamma 0.2 corrections should almost always converge"
            );
            dcp_at_02 = results
                .into_iter()
                .enumerate()
                .filter(|(_, r)| r.converged)
                .map(|(i, r)| (r.pulses, i))
                .collect();
        }
    }
    for w in medians.windows(2) {
        assert!(
            w[1] > w[0],
            "median correction distance must grow with gamma: {medians:?}"
        );
    }

    // Locality: a DCP stays closer to its own seed NCP than to a mismatched
    // one (the correlation the network is trained to exploit).
    let own: Vec<f64> = dcp_at_02
        .iter()
        .map(|(dcp, i)| dcp.l2_distance(&samples[*i].pulses))
        .collect();
    let mismatched: Vec<f64> = dcp_at_02
        .iter()
        .map(|(dcp, i)| {
            let other = (*i + 7) % samples.len();
            dcp.l2_distance(&samples[other].pulses)
        })
        .collect();
    let own_med = median(own);
    let mismatched_med = median(mismatched);
    assert!(
        own_med < mismatched_med,
        "median ||DCP - NCP|| = {own_med:.3} should undercut mismatched {mismatched_med:.3}"
    );
}

#[test]
fn strong_mixed_drift_remains_correctable() {
    // Drift 0.8 (0.8 sx + 0.2 sy) kron 1: mostly along a control direction,
    // so high-fidelity corrections exist even at gamma = 0.8.
    let samples = ncp_samples(6, 4100);
    let drift = (pauli_pair(PauliAxis::X, PauliAxis::I).mapv(|z| z * 0.8)
        + pauli_pair(PauliAxis::Y, PauliAxis::I).mapv(|z| z * 0.2))
    .mapv(|z| z * 0.8);
    let sys = SystemSpec::two_qubit(drift, Vec::new(), DEFAULT_HORIZON, DEFAULT_SLOTS).unwrap();
    let cfg = OptimConfig {
        target_fidelity: DCP_FIDELITY_THRESHOLD,
        ..OptimConfig::default()
    };
    let converged: usize = samples
        .par_iter()
        .map(|s| {
            let y = target_superoperator(&s.u_target).unwrap();
            generate_dcp(&sys, &s.pulses, &y, &cfg)
                .map(|r| usize::from(r.converged))
                .unwrap_or(0)
        })
        .sum();
    assert!(
        converged >= 1,
        "F >= 0.99 must be achievable under the strong mixed drift, got {converged}/6"
    );
}
