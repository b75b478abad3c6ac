//! Piecewise-constant time evolution of the controlled two-qubit system and
//! the superoperator fidelity figure of merit.
//!
//! Slot ordering convention: the earliest slot acts first, so it sits
//! rightmost in the propagator product,
//! `X(T) = P_{n-1} ... P_1 P_0`.
//! The GRAPE gradients in [`crate::grape`] rely on the same convention.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_defect, identity, kron, matrix_exp, CMatrix, C64};
use crate::quantum::{liouvillian, pauli, pauli_pair, unitary_superoperator, PauliAxis, Superoperator};

/// Which of the two control fields a pulse entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Control {
    X,
    Z,
}

impl Control {
    pub const ALL: [Control; 2] = [Control::X, Control::Z];

    /// Column index in a pulse matrix.
    pub fn index(self) -> usize {
        match self {
            Control::X => 0,
            Control::Z => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Control::X => "x",
            Control::Z => "z",
        }
    }
}

/// Piecewise-constant control amplitudes: an n x 2 matrix with column 0 the
/// x-control and column 1 the z-control, every entry within [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPulses {
    values: Array2<f64>,
}

impl ControlPulses {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "control pulses need 2 columns, got {}",
                values.ncols()
            )));
        }
        if values.nrows() == 0 {
            return Err(Error::InvalidArgument("control pulses need >= 1 slot".into()));
        }
        for ((slot, control), &v) in values.indexed_iter() {
            if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                return Err(Error::PulseOutOfRange {
                    slot,
                    control,
                    value: v,
                });
            }
        }
        Ok(Self { values })
    }

    pub fn zeros(slots: usize) -> Self {
        Self {
            values: Array2::zeros((slots, 2)),
        }
    }

    pub fn slots(&self) -> usize {
        self.values.nrows()
    }

    pub fn value(&self, slot: usize, control: Control) -> f64 {
        self.values[[slot, control.index()]]
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Euclidean norm of the difference, taken over all slots and controls.
    pub fn l2_distance(&self, other: &ControlPulses) -> f64 {
        assert_eq!(self.slots(), other.slots(), "pulse slot counts differ");
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Full description of the controlled system: base Hamiltonian, control
/// generators, drift (including its strength), Lindblad operators with rates,
/// and the time grid.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    base_h: CMatrix,
    control_gens: Vec<CMatrix>,
    drift_h: CMatrix,
    lindblads: Vec<(CMatrix, f64)>,
    horizon: f64,
    slots: usize,
}

/// Default evolution time.
pub const DEFAULT_HORIZON: f64 = 6.0;
/// Default number of time slots.
pub const DEFAULT_SLOTS: usize = 32;

impl SystemSpec {
    pub fn new(
        base_h: CMatrix,
        control_gens: Vec<CMatrix>,
        drift_h: CMatrix,
        lindblads: Vec<(CMatrix, f64)>,
        horizon: f64,
        slots: usize,
    ) -> Result<Self> {
        let d = base_h.nrows();
        if base_h.ncols() != d || drift_h.nrows() != d || drift_h.ncols() != d {
            return Err(Error::DimensionMismatch(
                "base and drift Hamiltonians must be square with equal dimension".into(),
            ));
        }
        if hermiticity_defect(&base_h) > 1e-12 {
            return Err(Error::InvalidArgument("base Hamiltonian is not Hermitian".into()));
        }
        if hermiticity_defect(&drift_h) > 1e-12 {
            return Err(Error::InvalidArgument("drift Hamiltonian is not Hermitian".into()));
        }
        for g in &control_gens {
            if g.nrows() != d || g.ncols() != d {
                return Err(Error::DimensionMismatch(
                    "control generator dimension mismatch".into(),
                ));
            }
            if hermiticity_defect(g) > 1e-12 {
                return Err(Error::InvalidArgument("control generator is not Hermitian".into()));
            }
        }
        for (l, rate) in &lindblads {
            if *rate < 0.0 {
                return Err(Error::NegativeRate(*rate));
            }
            if l.nrows() != d || l.ncols() != d {
                return Err(Error::DimensionMismatch("Lindblad operator dimension mismatch".into()));
            }
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be > 0, got {horizon}")));
        }
        if slots == 0 {
            return Err(Error::InvalidArgument("slot count must be >= 1".into()));
        }
        Ok(Self {
            base_h,
            control_gens,
            drift_h,
            lindblads,
            horizon,
            slots,
        })
    }

    /// The standard two-qubit setup: exchange base Hamiltonian
    /// `sx kron sx + sy kron sy + sz kron sz`, controls `sx kron 1` and
    /// `sz kron 1`, plus the given drift and Lindblad terms.
    pub fn two_qubit(
        drift_h: CMatrix,
        lindblads: Vec<(CMatrix, f64)>,
        horizon: f64,
        slots: usize,
    ) -> Result<Self> {
        let base = pauli_pair(PauliAxis::X, PauliAxis::X)
            + pauli_pair(PauliAxis::Y, PauliAxis::Y)
            + pauli_pair(PauliAxis::Z, PauliAxis::Z);
        let gens = vec![
            pauli_pair(PauliAxis::X, PauliAxis::I),
            pauli_pair(PauliAxis::Z, PauliAxis::I),
        ];
        Self::new(base, gens, drift_h, lindblads, horizon, slots)
    }

    /// Drift-free two-qubit system on the default time grid.
    pub fn drift_free(horizon: f64, slots: usize) -> Self {
        Self::two_qubit(Array2::zeros((4, 4)), Vec::new(), horizon, slots)
            .expect("drift-free system is always valid")
    }

    pub fn dim(&self) -> usize {
        self.base_h.nrows()
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Slot width T/n.
    pub fn dt(&self) -> f64 {
        self.horizon / self.slots as f64
    }

    pub fn base_h(&self) -> &CMatrix {
        &self.base_h
    }

    pub fn drift_h(&self) -> &CMatrix {
        &self.drift_h
    }

    pub fn control_gens(&self) -> &[CMatrix] {
        &self.control_gens
    }

    pub fn lindblads(&self) -> &[(CMatrix, f64)] {
        &self.lindblads
    }

    /// True when there are no Lindblad terms, so evolution stays unitary.
    pub fn is_closed(&self) -> bool {
        self.lindblads.is_empty()
    }

    /// Same physics on a different time grid. Used to evolve sub-intervals.
    pub fn with_time_grid(&self, horizon: f64, slots: usize) -> Result<Self> {
        Self::new(
            self.base_h.clone(),
            self.control_gens.clone(),
            self.drift_h.clone(),
            self.lindblads.clone(),
            horizon,
            slots,
        )
    }

    /// Hamiltonian on slot i: `h_x[i] C_0 + h_z[i] C_1 + H_base + H_drift`.
    pub fn hamiltonian_at(&self, pulses: &ControlPulses, slot: usize) -> CMatrix {
        let mut h = &self.base_h + &self.drift_h;
        for (k, gen) in self.control_gens.iter().enumerate() {
            let amp = pulses.values()[[slot, k]];
            h = h + gen.mapv(|z| z * amp);
        }
        h
    }
}

/// Constant generator of the master equation on slot i, as a superoperator.
pub fn slot_generator(sys: &SystemSpec, pulses: &ControlPulses, slot: usize) -> Result<Superoperator> {
    if slot >= sys.slots() {
        return Err(Error::InvalidArgument(format!(
            "slot {slot} out of range (n = {})",
            sys.slots()
        )));
    }
    liouvillian(&sys.hamiltonian_at(pulses, slot), sys.lindblads())
}

/// Total unitary propagator of a closed system (earliest slot rightmost).
///
/// Panics if the system has Lindblad terms; use [`evolve`] in that case.
pub fn evolve_unitary(sys: &SystemSpec, pulses: &ControlPulses) -> CMatrix {
    assert!(sys.is_closed(), "evolve_unitary requires a closed system");
    assert_eq!(pulses.slots(), sys.slots(), "pulse slot count mismatch");
    let dt = sys.dt();
    let minus_i_dt = C64::new(0.0, -dt);
    let mut total = identity(sys.dim());
    for i in 0..sys.slots() {
        let h = sys.hamiltonian_at(pulses, i);
        let u = matrix_exp(&h.mapv(|z| z * minus_i_dt)).expect("square by construction");
        total = u.dot(&total);
    }
    total
}

/// Evolution superoperator over the whole horizon,
/// `X(T) = exp(L_{n-1} dt) ... exp(L_1 dt) exp(L_0 dt)`.
///
/// Closed systems take a fast path through d x d unitaries and are lifted to
/// the superoperator at the end; this agrees with the Liouvillian path to
/// better than 1e-10 (tested).
pub fn evolve(sys: &SystemSpec, pulses: &ControlPulses) -> Superoperator {
    if sys.is_closed() {
        let total = evolve_unitary(sys, pulses);
        return unitary_superoperator(&total).expect("square by construction");
    }
    evolve_liouville(sys, pulses)
}

/// Evolution superoperator via per-slot Liouvillian exponentials, regardless
/// of whether Lindblad terms are present.
pub fn evolve_liouville(sys: &SystemSpec, pulses: &ControlPulses) -> Superoperator {
    assert_eq!(pulses.slots(), sys.slots(), "pulse slot count mismatch");
    let dt = sys.dt();
    let mut total = identity(sys.dim() * sys.dim());
    for i in 0..sys.slots() {
        let gen = slot_generator(sys, pulses, i).expect("slot index in range");
        let p = matrix_exp(&gen.matrix().mapv(|z| z * dt)).expect("square by construction");
        total = p.dot(&total);
    }
    Superoperator::new(total).expect("square by construction")
}

/// Superoperator fidelity error between a target `y` and an achieved `x`:
///
/// `F_err = 1/(2 N^2) tr[(Y - X)^dag (Y - X)]`
///
/// with N the Hilbert-space dimension (N^2 the superoperator side). Zero iff
/// `x == y`; for unitary superoperators this equals
/// `1 - Re tr(Y^dag X) / N^2`.
pub fn fidelity_error(y: &Superoperator, x: &Superoperator) -> Result<f64> {
    if y.dim() != x.dim() {
        return Err(Error::DimensionMismatch(format!(
            "superoperator dimensions differ: {} vs {}",
            y.dim(),
            x.dim()
        )));
    }
    let diff_sq: f64 = y
        .matrix()
        .iter()
        .zip(x.matrix().iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(diff_sq / (2.0 * y.dim() as f64))
}

/// `F = 1 - F_err`.
pub fn fidelity(y: &Superoperator, x: &Superoperator) -> Result<f64> {
    Ok(1.0 - fidelity_error(y, x)?)
}

/// Target superoperator for a single-qubit target acting on the first qubit:
/// `Y = superop(u kron 1_2)`.
pub fn target_superoperator(u: &CMatrix) -> Result<Superoperator> {
    if u.nrows() != 2 || u.ncols() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "single-qubit target must be 2x2, got {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    unitary_superoperator(&kron(u, &pauli(PauliAxis::I)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, frobenius_norm, I, ONE, ZERO};
    use crate::quantum::{haar_unitary, vec_rho, unvec_rho};
    use crate::rng::RngSeed;
    use ndarray::Array1;
    use rand::Rng;

    fn random_pulses(slots: usize, seed: u64) -> ControlPulses {
        let mut rng = RngSeed::new(seed, 0).rng();
        ControlPulses::new(Array2::from_shape_fn((slots, 2), |_| rng.gen_range(-1.0..1.0))).unwrap()
    }

    fn drift_sy(gamma: f64) -> CMatrix {
        pauli_pair(PauliAxis::Y, PauliAxis::I).mapv(|z| z * gamma)
    }

    #[test]
    fn pulses_reject_out_of_range_entries() {
        let mut v = Array2::zeros((4, 2));
        v[[2, 1]] = 1.25;
        assert!(matches!(
            ControlPulses::new(v),
            Err(Error::PulseOutOfRange { slot: 2, control: 1, .. })
        ));
        let mut v = Array2::zeros((4, 2));
        v[[0, 0]] = f64::NAN;
        assert!(ControlPulses::new(v).is_err());
    }

    #[test]
    fn slot_generator_reduces_to_base_term() {
        let sys = SystemSpec::drift_free(6.0, 4);
        let pulses = ControlPulses::zeros(4);
        let gen = slot_generator(&sys, &pulses, 0).unwrap();
        let expected = liouvillian(sys.base_h(), &[]).unwrap();
        assert!(frobenius_norm(&(gen.matrix() - expected.matrix())) < 1e-14);
        assert!(slot_generator(&sys, &pulses, 4).is_err());
    }

    #[test]
    fn slot_generator_hermitian_part_tracks_pulses() {
        let sys = SystemSpec::two_qubit(drift_sy(0.3), Vec::new(), 6.0, 4).unwrap();
        let mut v = Array2::zeros((4, 2));
        v[[1, 0]] = 1.0;
        let pulses = ControlPulses::new(v).unwrap();
        let h = sys.hamiltonian_at(&pulses, 1);
        let expected = pauli_pair(PauliAxis::X, PauliAxis::I) + sys.base_h() + sys.drift_h();
        assert!(frobenius_norm(&(&h - &expected)) < 1e-14);
    }

    #[test]
    fn slot_generator_decomposes_into_closed_part_plus_dissipator() {
        let jump = pauli_pair(PauliAxis::Z, PauliAxis::I);
        let sys =
            SystemSpec::two_qubit(Array2::zeros((4, 4)), vec![(jump.clone(), 0.01)], 6.0, 8).unwrap();
        let pulses = random_pulses(8, 5);
        let gen = slot_generator(&sys, &pulses, 3).unwrap();
        let closed = liouvillian(&sys.hamiltonian_at(&pulses, 3), &[]).unwrap();
        let dissipator_only = liouvillian(&Array2::zeros((4, 4)), &[(jump, 0.01)]).unwrap();
        let recomposed = closed.matrix() + dissipator_only.matrix();
        assert!(frobenius_norm(&(gen.matrix() - &recomposed)) < 1e-14);
    }

    #[test]
    fn evolve_of_trivial_system_is_identity() {
        let sys = SystemSpec::new(
            Array2::zeros((4, 4)),
            vec![
                pauli_pair(PauliAxis::X, PauliAxis::I),
                pauli_pair(PauliAxis::Z, PauliAxis::I),
            ],
            Array2::zeros((4, 4)),
            Vec::new(),
            1.0,
            1,
        )
        .unwrap();
        let x = evolve(&sys, &ControlPulses::zeros(1));
        assert!(frobenius_norm(&(x.matrix() - &identity(16))) < 1e-14);
    }

    #[test]
    fn free_evolution_matches_exchange_eigenstructure() {
        // The exchange base Hamiltonian equals 2 SWAP - 1, so free evolution
        // is exp(-iT) P_triplet + exp(3iT) P_singlet.
        let t = DEFAULT_HORIZON;
        let sys = SystemSpec::drift_free(t, DEFAULT_SLOTS);
        let x = evolve(&sys, &ControlPulses::zeros(DEFAULT_SLOTS));

        let mut swap = Array2::from_elem((4, 4), ZERO);
        swap[[0, 0]] = ONE;
        swap[[1, 2]] = ONE;
        swap[[2, 1]] = ONE;
        swap[[3, 3]] = ONE;
        let p_triplet = (&identity(4) + &swap).mapv(|z| z * 0.5);
        let p_singlet = (&identity(4) - &swap).mapv(|z| z * 0.5);
        let u = p_triplet.mapv(|z| z * (-I * t).exp()) + p_singlet.mapv(|z| z * (I * 3.0 * t).exp());
        let expected = unitary_superoperator(&u).unwrap();
        assert!(frobenius_norm(&(x.matrix() - expected.matrix())) < 1e-10);
    }

    #[test]
    fn closed_fast_path_matches_liouville_path() {
        let sys = SystemSpec::two_qubit(drift_sy(0.4), Vec::new(), 6.0, 32).unwrap();
        let pulses = random_pulses(32, 17);
        let fast = evolve(&sys, &pulses);
        let slow = evolve_liouville(&sys, &pulses);
        assert!(frobenius_norm(&(fast.matrix() - slow.matrix())) < 1e-10);
    }

    #[test]
    fn closed_evolution_is_unitary_superoperator() {
        let sys = SystemSpec::drift_free(6.0, 32);
        let pulses = random_pulses(32, 23);
        let x = evolve(&sys, &pulses);
        let defect = frobenius_norm(&(&dagger(x.matrix()).dot(x.matrix()) - &identity(16)));
        assert!(defect < 1e-9, "unitarity defect {defect}");
    }

    #[test]
    fn evolve_is_multiplicative_over_pulse_concatenation() {
        let sys = SystemSpec::two_qubit(
            drift_sy(0.2),
            vec![(pauli_pair(PauliAxis::Z, PauliAxis::I), 0.02)],
            6.0,
            8,
        )
        .unwrap();
        let pulses = random_pulses(8, 31);
        let dt = sys.dt();

        let first = ControlPulses::new(pulses.values().slice(ndarray::s![..5, ..]).to_owned()).unwrap();
        let second = ControlPulses::new(pulses.values().slice(ndarray::s![5.., ..]).to_owned()).unwrap();
        let sys1 = sys.with_time_grid(5.0 * dt, 5).unwrap();
        let sys2 = sys.with_time_grid(3.0 * dt, 3).unwrap();

        let whole = evolve(&sys, &pulses);
        let composed = evolve(&sys2, &second).compose(&evolve(&sys1, &first));
        assert!(frobenius_norm(&(whole.matrix() - composed.matrix())) < 1e-10);
    }

    #[test]
    fn open_evolution_preserves_density_matrix_structure() {
        let jump = pauli_pair(PauliAxis::Y, PauliAxis::I);
        let sys = SystemSpec::two_qubit(drift_sy(0.2), vec![(jump, 0.05)], 6.0, 16).unwrap();
        let pulses = random_pulses(16, 41);
        let x = evolve(&sys, &pulses);

        let a = haar_unitary(4, RngSeed::new(3, 3)) + haar_unitary(4, RngSeed::new(4, 4));
        let mut rho = a.dot(&dagger(&a));
        let tr: C64 = (0..4).map(|i| rho[[i, i]]).sum();
        rho = rho.mapv(|z| z / tr);

        let out_vec: Array1<C64> = x.apply_vec(&vec_rho(&rho));
        let out = unvec_rho(&out_vec, 4);
        let tr_out: C64 = (0..4).map(|i| out[[i, i]]).sum();
        assert!((tr_out - ONE).norm() < 1e-9);
        assert!(crate::linalg::hermiticity_defect(&out) < 1e-9);
    }

    #[test]
    fn fidelity_error_of_identical_arguments_is_zero() {
        let y = unitary_superoperator(&haar_unitary(4, RngSeed::new(9, 0))).unwrap();
        assert_eq!(fidelity_error(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn fidelity_error_of_orthogonal_unitaries_is_one() {
        let y = unitary_superoperator(&pauli_pair(PauliAxis::X, PauliAxis::I)).unwrap();
        let x = Superoperator::new(identity(16)).unwrap();
        let err = fidelity_error(&y, &x).unwrap();
        assert!((err - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fidelity_error_matches_trace_formula_for_unitaries() {
        for seed in 0..5 {
            let yu = haar_unitary(4, RngSeed::new(500 + seed, 0));
            let xu = haar_unitary(4, RngSeed::new(600 + seed, 0));
            let y = unitary_superoperator(&yu).unwrap();
            let x = unitary_superoperator(&xu).unwrap();

            // Direct elementwise evaluation of the defining trace.
            let diff = y.matrix() - x.matrix();
            let brute: C64 = dagger(&diff)
                .dot(&diff)
                .diag()
                .iter()
                .sum();
            let expected = brute.re / 32.0;
            let got = fidelity_error(&y, &x).unwrap();
            assert!((got - expected).abs() < 1e-12);

            // And the unitary shortcut 1 - Re tr(Y^dag X)/N^2.
            let overlap: C64 = dagger(y.matrix()).dot(x.matrix()).diag().iter().sum();
            assert!((got - (1.0 - overlap.re / 16.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn fidelity_error_is_symmetric_nonnegative_and_unitary_invariant() {
        let mut rng = RngSeed::new(77, 0).rng();
        for seed in 0..5 {
            let y = unitary_superoperator(&haar_unitary(4, RngSeed::new(700 + seed, 0))).unwrap();
            let x = unitary_superoperator(&haar_unitary(4, RngSeed::new(800 + seed, 0))).unwrap();
            let fe = fidelity_error(&y, &x).unwrap();
            assert!(fe >= 0.0);
            assert_eq!(fe, fidelity_error(&x, &y).unwrap());

            let w = unitary_superoperator(&haar_unitary(4, RngSeed::new(900 + seed, rng.gen())))
                .unwrap();
            let rotated = fidelity_error(&w.compose(&y), &w.compose(&x)).unwrap();
            assert!((rotated - fe).abs() < 1e-10);
        }
    }

    #[test]
    fn fidelity_error_rejects_dimension_mismatch() {
        let y = Superoperator::new(identity(16)).unwrap();
        let x = Superoperator::new(identity(4)).unwrap();
        assert!(fidelity_error(&y, &x).is_err());
    }
}
