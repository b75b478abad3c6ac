//! GRAPE-style exact gradients and bounded pulse optimization.
//!
//! The gradient of the fidelity error with respect to each pulse amplitude is
//! computed with cached forward/backward propagator products; the per-slot
//! propagator derivative comes from the augmented-block exponential
//! `exp([[A dt, G dt], [0, A dt]])`, whose upper-right block is the exact
//! Frechet derivative of the slot propagator in the control direction.

use ndarray::Array2;

use crate::adam::Adam;
use crate::dynamics::{
    evolve, fidelity_error, slot_generator, target_superoperator, ControlPulses, SystemSpec,
};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, identity, kron, matrix_exp, CMatrix, C64, ZERO};
use crate::quantum::{haar_with_rng, Superoperator};
use crate::rng::RngSeed;

/// Dataset admission threshold for drift-free pulses.
pub const NCP_FIDELITY_THRESHOLD: f64 = 0.999;
/// Dataset admission threshold for drift-compensating pulses.
pub const DCP_FIDELITY_THRESHOLD: f64 = 0.99;
/// Fresh random restarts before a target is abandoned.
pub const MAX_RESTARTS: usize = 5;
/// Stall window used by NCP generation (see [`OptimConfig::stall_window`]).
pub const NCP_STALL_WINDOW: usize = 250;

/// Stopping rules and step size for the pulse optimizer.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    pub max_iters: usize,
    /// Stop as soon as F = 1 - F_err reaches this value.
    pub target_fidelity: f64,
    /// Initial (and maximal) step size applied to the Adam direction.
    pub learning_rate: f64,
    /// Stop when the gradient max-norm falls below this.
    pub grad_tol: f64,
    pub seed: RngSeed,
    /// When set, abandon a run whose error improves by less than a 1e-5
    /// relative factor over this many iterations. Off by default: a slow
    /// descent is still a descent. [`generate_ncp`] enables it so trapped
    /// runs hand their remaining budget to a fresh restart.
    #[serde(default)]
    pub stall_window: Option<usize>,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            target_fidelity: NCP_FIDELITY_THRESHOLD,
            learning_rate: 0.05,
            grad_tol: 1e-10,
            seed: RngSeed::new(0, 0),
            stall_window: None,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if !(self.target_fidelity > 0.0 && self.target_fidelity <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target_fidelity must be in (0, 1], got {}",
                self.target_fidelity
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be > 0".into()));
        }
        Ok(())
    }
}

/// Outcome of one optimization run.
#[derive(Debug, Clone)]
pub struct OptimResult {
    pub pulses: ControlPulses,
    pub fidelity: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// One admitted drift-free target/pulse pair.
#[derive(Debug, Clone)]
pub struct NcpSample {
    /// Haar-random single-qubit target; the full target is `u kron 1`.
    pub u_target: CMatrix,
    pub pulses: ControlPulses,
    pub fidelity: f64,
    /// Random restarts consumed before admission.
    pub restarts: usize,
}

fn augmented_frechet(a_dt: &CMatrix, e_dt: &CMatrix) -> CMatrix {
    let d = a_dt.nrows();
    let mut aug = Array2::from_elem((2 * d, 2 * d), ZERO);
    for i in 0..d {
        for j in 0..d {
            aug[[i, j]] = a_dt[[i, j]];
            aug[[d + i, d + j]] = a_dt[[i, j]];
            aug[[i, d + j]] = e_dt[[i, j]];
        }
    }
    let e = matrix_exp(&aug).expect("square by construction");
    e.slice(ndarray::s![..d, d..]).to_owned()
}

/// Forward partial products `fwd[i] = P_{i-1} ... P_0` (so `fwd[0] = 1` and
/// `fwd[n]` is the total propagator) and backward partials
/// `bwd[i] = P_{n-1} ... P_{i+1}`.
fn propagator_chains(props: &[CMatrix]) -> (Vec<CMatrix>, Vec<CMatrix>) {
    let n = props.len();
    let d = props[0].nrows();
    let mut fwd = Vec::with_capacity(n + 1);
    fwd.push(identity(d));
    for p in props {
        let last = fwd.last().unwrap();
        fwd.push(p.dot(last));
    }
    let mut bwd = vec![identity(d); n];
    for i in (0..n.saturating_sub(1)).rev() {
        bwd[i] = bwd[i + 1].dot(&props[i + 1]);
    }
    (fwd, bwd)
}

/// Exact gradient of the fidelity error with respect to every pulse
/// amplitude; an n x 2 matrix matching the pulse layout.
pub fn grape_gradient(sys: &SystemSpec, pulses: &ControlPulses, y: &Superoperator) -> Array2<f64> {
    if sys.is_closed() {
        grape_gradient_closed(sys, pulses, y)
    } else {
        grape_gradient_liouville(sys, pulses, y)
    }
}

/// Closed-system path: works with d x d unitaries and contracts the tensor
/// structure of `X = U kron conj(U)` directly, so the augmented exponentials
/// stay 2d x 2d.
fn grape_gradient_closed(sys: &SystemSpec, pulses: &ControlPulses, y: &Superoperator) -> Array2<f64> {
    let n = sys.slots();
    let d = sys.dim();
    let dt = sys.dt();
    let minus_i_dt = C64::new(0.0, -dt);

    let hams: Vec<CMatrix> = (0..n).map(|i| sys.hamiltonian_at(pulses, i)).collect();
    let props: Vec<CMatrix> = hams
        .iter()
        .map(|h| matrix_exp(&h.mapv(|z| z * minus_i_dt)).expect("square"))
        .collect();
    let (fwd, bwd) = propagator_chains(&props);
    let u_tot = &fwd[n];
    let u_conj = u_tot.mapv(|z| z.conj());

    let x = kron(u_tot, &u_conj);
    let z = y.matrix() - &x;

    // w1[i][j] = sum_{kl} conj(z[(ik),(jl)]) conj(u_tot[k,l])
    // w2[k][l] = sum_{ij} conj(z[(ik),(jl)]) u_tot[i,j]
    // so that tr[Z^dag (dU kron conj(U))] = sum w1 .* dU and
    // tr[Z^dag (U kron conj(dU))] = sum w2 .* conj(dU).
    let mut w1 = Array2::from_elem((d, d), ZERO);
    let mut w2 = Array2::from_elem((d, d), ZERO);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let zc = z[[i * d + k, j * d + l]].conj();
                    w1[[i, j]] += zc * u_conj[[k, l]];
                    w2[[k, l]] += zc * u_tot[[i, j]];
                }
            }
        }
    }

    let scale = -1.0 / y.dim() as f64;
    let mut grad = Array2::zeros((n, 2));
    for slot in 0..n {
        let a_dt = hams[slot].mapv(|z| z * minus_i_dt);
        for (ctrl, gen) in sys.control_gens().iter().enumerate() {
            let e_dt = gen.mapv(|z| z * minus_i_dt);
            let frechet = augmented_frechet(&a_dt, &e_dt);
            let du = bwd[slot].dot(&frechet).dot(&fwd[slot]);

            let mut t1 = ZERO;
            let mut t2 = ZERO;
            for i in 0..d {
                for j in 0..d {
                    t1 += w1[[i, j]] * du[[i, j]];
                    t2 += w2[[i, j]] * du[[i, j]].conj();
                }
            }
            grad[[slot, ctrl]] = scale * (t1.re + t2.re);
        }
    }
    grad
}

/// Open-system path: propagators and Frechet derivatives at the superoperator
/// level (augmented blocks are 2 d^2 x 2 d^2).
fn grape_gradient_liouville(
    sys: &SystemSpec,
    pulses: &ControlPulses,
    y: &Superoperator,
) -> Array2<f64> {
    let n = sys.slots();
    let dt = sys.dt();

    let gens: Vec<CMatrix> = (0..n)
        .map(|i| slot_generator(sys, pulses, i).expect("slot in range").into_matrix())
        .collect();
    let props: Vec<CMatrix> = gens
        .iter()
        .map(|g| matrix_exp(&g.mapv(|z| z * dt)).expect("square"))
        .collect();
    let (fwd, bwd) = propagator_chains(&props);

    let z = y.matrix() - &fwd[n];
    let scale = -1.0 / y.dim() as f64;

    // The lifted control generators dL/dh are pulse-independent.
    let lifted: Vec<CMatrix> = sys
        .control_gens()
        .iter()
        .map(|c| {
            let id = identity(sys.dim());
            let ct = c.t().to_owned();
            (kron(c, &id) - kron(&id, &ct)).mapv(|z| z * C64::new(0.0, -1.0))
        })
        .collect();

    let mut grad = Array2::zeros((n, 2));
    for slot in 0..n {
        let a_dt = gens[slot].mapv(|z| z * dt);
        for (ctrl, g) in lifted.iter().enumerate() {
            let e_dt = g.mapv(|z| z * dt);
            let frechet = augmented_frechet(&a_dt, &e_dt);
            let dx = bwd[slot].dot(&frechet).dot(&fwd[slot]);
            let overlap: C64 = z.iter().zip(dx.iter()).map(|(zz, dd)| zz.conj() * dd).sum();
            grad[[slot, ctrl]] = scale * overlap.re;
        }
    }
    grad
}

fn clamp_unit(values: &Array2<f64>) -> Array2<f64> {
    values.mapv(|v| v.clamp(-1.0, 1.0))
}

/// Gradient descent with adaptive moments, step rejection, and post-step
/// clamping to the unit pulse bound. The accepted-iterate error sequence is
/// non-increasing; steps that would worsen it are shrunk and, failing that,
/// discarded.
pub fn optimize_pulses(
    sys: &SystemSpec,
    y: &Superoperator,
    init: ControlPulses,
    cfg: &OptimConfig,
) -> Result<OptimResult> {
    cfg.validate()?;
    if init.slots() != sys.slots() {
        return Err(Error::DimensionMismatch(format!(
            "initial pulses have {} slots, system has {}",
            init.slots(),
            sys.slots()
        )));
    }

    let eval = |values: &Array2<f64>| -> f64 {
        let pulses = ControlPulses::new(values.clone()).expect("clamped values are in range");
        fidelity_error(y, &evolve(sys, &pulses)).expect("matching dimensions")
    };

    let n = sys.slots();
    let mut values = clamp_unit(init.values());
    let mut err = eval(&values);
    let mut adam = Adam::new(n * 2);
    let mut step = cfg.learning_rate;
    let mut iterations = 0;
    let mut fresh_moments = true;

    // Optional stall detector: the accepted-error sequence is monotone, so a
    // window with essentially no relative improvement means the run is
    // trapped. Trapped runs improve by ~1e-9 relative per window.
    const STALL_RELATIVE_IMPROVEMENT: f64 = 1e-5;
    let mut window_err = err;
    let mut window_start = 0;

    while iterations < cfg.max_iters {
        if 1.0 - err >= cfg.target_fidelity {
            break;
        }
        if let Some(window) = cfg.stall_window {
            if iterations - window_start >= window {
                if window_err - err <= STALL_RELATIVE_IMPROVEMENT * window_err {
                    break;
                }
                window_err = err;
                window_start = iterations;
            }
        }
        let pulses = ControlPulses::new(values.clone()).expect("in range");
        let grad = grape_gradient(sys, &pulses, y);
        // Project out components that push a bound-saturated amplitude
        // further outside [-1, 1]; clamping would discard them anyway and
        // they poison the moment estimates.
        let projected: Vec<f64> = values
            .iter()
            .zip(grad.iter())
            .map(|(&v, &g)| {
                if (v >= 1.0 && g < 0.0) || (v <= -1.0 && g > 0.0) {
                    0.0
                } else {
                    g
                }
            })
            .collect();
        let grad_max = projected.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if grad_max <= cfg.grad_tol {
            break;
        }
        iterations += 1;

        let dir = adam.direction(&projected);
        let mut accepted = false;
        for _ in 0..40 {
            let mut candidate = values.clone();
            for (v, d) in candidate.iter_mut().zip(dir.iter()) {
                *v -= step * d;
            }
            let candidate = clamp_unit(&candidate);
            let cand_err = eval(&candidate);
            if cand_err <= err {
                values = candidate;
                err = cand_err;
                accepted = true;
                step = (step * 2.0).min(cfg.learning_rate);
                break;
            }
            step *= 0.5;
            if step < 1e-13 {
                break;
            }
        }
        if accepted {
            fresh_moments = false;
        } else if fresh_moments {
            // Even the bias-corrected raw gradient direction cannot descend:
            // we are at a stationary point within float resolution.
            break;
        } else {
            // The momentum went stale; retry from the plain gradient.
            adam = Adam::new(n * 2);
            step = cfg.learning_rate;
            fresh_moments = true;
        }
    }

    let fidelity = 1.0 - err;
    Ok(OptimResult {
        pulses: ControlPulses::new(values).expect("in range"),
        fidelity,
        iterations,
        converged: fidelity >= cfg.target_fidelity,
    })
}

/// Sample a Haar-random single-qubit target, lift it to the two-qubit system,
/// and optimize drift-free pulses for it from a uniform random start.
/// Re-initializes from a fresh random start up to [`MAX_RESTARTS`] times
/// (each with the full iteration budget) before giving up on the seed.
pub fn generate_ncp(sys_free: &SystemSpec, seed: RngSeed, cfg: &OptimConfig) -> Result<NcpSample> {
    if !sys_free.is_closed() || frobenius_norm(sys_free.drift_h()) != 0.0 {
        return Err(Error::InvalidArgument(
            "NCP generation requires a drift-free closed system".into(),
        ));
    }
    let mut rng = seed.rng();
    let u_target = haar_with_rng(2, &mut rng);
    let y = target_superoperator(&u_target)?;
    let run_cfg = OptimConfig {
        stall_window: cfg.stall_window.or(Some(NCP_STALL_WINDOW)),
        ..*cfg
    };

    for restart in 0..MAX_RESTARTS {
        let init = ControlPulses::new(Array2::from_shape_fn((sys_free.slots(), 2), |_| {
            rand::Rng::gen_range(&mut rng, -1.0..=1.0)
        }))?;
        let result = optimize_pulses(sys_free, &y, init, &run_cfg)?;
        if result.converged {
            return Ok(NcpSample {
                u_target,
                pulses: result.pulses,
                fidelity: result.fidelity,
                restarts: restart,
            });
        }
    }
    Err(Error::GenerationFailed {
        seed: seed.seed,
        stream: seed.stream,
        attempts: MAX_RESTARTS,
    })
}

/// Local optimization of drift-compensating pulses seeded at the drift-free
/// solution.
pub fn generate_dcp(
    sys_drift: &SystemSpec,
    ncp: &ControlPulses,
    y: &Superoperator,
    cfg: &OptimConfig,
) -> Result<OptimResult> {
    optimize_pulses(sys_drift, y, ncp.clone(), cfg)
}
