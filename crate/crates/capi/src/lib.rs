//! C ABI for the pulsecorr toolkit.
//!
//! Handles are opaque pointers created and destroyed by this library; every
//! fallible call returns a [`PcStatus`] code and writes results through out
//! pointers. Panics never cross the boundary (they map to
//! `PC_INTERNAL_ERROR`). The generated header lives in `include/pulsecorr.h`.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pulsecorr::dynamics::{evolve, fidelity_error, target_superoperator, ControlPulses, SystemSpec};
use pulsecorr::grape::{generate_ncp, OptimConfig};
use pulsecorr::linalg::{CMatrix, C64};
use pulsecorr::lstm::{model_forward, read_checkpoint, ModelParams};
use pulsecorr::presets::SystemConfig;
use pulsecorr::rng::RngSeed;
use pulsecorr::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcStatus {
    PcOk = 0,
    PcNullArgument = 1,
    PcInvalidArgument = 2,
    PcParseError = 3,
    PcDimensionMismatch = 4,
    PcIoError = 5,
    PcIncompatible = 6,
    PcNotConverged = 7,
    PcInternalError = 8,
}

fn status_of(err: &Error) -> PcStatus {
    match err {
        Error::DimensionMismatch(_) => PcStatus::PcDimensionMismatch,
        Error::InvalidArgument(_) | Error::NegativeRate(_) | Error::PulseOutOfRange { .. } => {
            PcStatus::PcInvalidArgument
        }
        Error::Parse(_) | Error::Json(_) => PcStatus::PcParseError,
        Error::Io(_) => PcStatus::PcIoError,
        Error::Incompatible(_) => PcStatus::PcIncompatible,
        Error::GenerationFailed { .. } | Error::Diverged { .. } => PcStatus::PcNotConverged,
    }
}

/// Opaque handle: a fully-described two-qubit system.
pub struct PcSystem {
    spec: SystemSpec,
}

/// Opaque handle: an n x 2 set of control pulses.
pub struct PcPulses {
    pulses: ControlPulses,
}

/// Opaque handle: trained network weights.
pub struct PcModel {
    params: ModelParams,
}

fn guarded<F: FnOnce() -> PcStatus>(f: F) -> PcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => PcStatus::PcInternalError,
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn pc_status_message(status: PcStatus) -> *const c_char {
    let msg: &'static [u8] = match status {
        PcStatus::PcOk => b"ok\0",
        PcStatus::PcNullArgument => b"null argument\0",
        PcStatus::PcInvalidArgument => b"invalid argument\0",
        PcStatus::PcParseError => b"parse error\0",
        PcStatus::PcDimensionMismatch => b"dimension mismatch\0",
        PcStatus::PcIoError => b"io error\0",
        PcStatus::PcIncompatible => b"incompatible inputs\0",
        PcStatus::PcNotConverged => b"optimization did not converge\0",
        PcStatus::PcInternalError => b"internal error\0",
    };
    msg.as_ptr() as *const c_char
}

/// Create a system from a drift spec (e.g. "sy", "0.8sx+0.2sy", "none"), a
/// drift strength, a Lindblad preset ("none", "lind1", "lind2", "lind3")
/// with its rate, and the time grid.
///
/// # Safety
/// `drift` and `lindblad` must be valid NUL-terminated strings or NULL
/// (NULL means "none"); `out` must be a valid pointer. The returned handle
/// must be released with [`pc_system_free`].
#[no_mangle]
pub unsafe extern "C" fn pc_system_new(
    drift: *const c_char,
    gamma: f64,
    lindblad: *const c_char,
    lindblad_rate: f64,
    horizon: f64,
    slots: usize,
    out: *mut *mut PcSystem,
) -> PcStatus {
    guarded(|| {
        if out.is_null() {
            return PcStatus::PcNullArgument;
        }
        let drift = cstr(drift).unwrap_or("none").to_string();
        let lindblad = cstr(lindblad).unwrap_or("none").to_string();
        let cfg = SystemConfig {
            horizon,
            slots,
            drift,
            gamma,
            lindblad,
            lindblad_rate,
        };
        match cfg.drifted() {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(PcSystem { spec }));
                PcStatus::PcOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Release a system handle. NULL is ignored.
///
/// # Safety
/// `sys` must be NULL or a pointer from [`pc_system_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pc_system_free(sys: *mut PcSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Number of time slots of the system; 0 on NULL.
///
/// # Safety
/// `sys` must be NULL or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn pc_system_slots(sys: *const PcSystem) -> usize {
    if sys.is_null() {
        return 0;
    }
    (*sys).spec.slots()
}

/// Create pulses from `slots` rows of `[h_x, h_z]` (row-major, `2 * slots`
/// doubles). Every value must lie in [-1, 1].
///
/// # Safety
/// `values` must point to `2 * slots` readable doubles; `out` must be valid.
/// The returned handle must be released with [`pc_pulses_free`].
#[no_mangle]
pub unsafe extern "C" fn pc_pulses_new(
    values: *const f64,
    slots: usize,
    out: *mut *mut PcPulses,
) -> PcStatus {
    guarded(|| {
        if values.is_null() || out.is_null() {
            return PcStatus::PcNullArgument;
        }
        let data = std::slice::from_raw_parts(values, 2 * slots);
        let array = ndarray::Array2::from_shape_vec((slots, 2), data.to_vec())
            .expect("shape matches length");
        match ControlPulses::new(array) {
            Ok(pulses) => {
                *out = Box::into_raw(Box::new(PcPulses { pulses }));
                PcStatus::PcOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Release a pulse handle. NULL is ignored.
///
/// # Safety
/// `pulses` must be NULL or an owned handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pc_pulses_free(pulses: *mut PcPulses) {
    if !pulses.is_null() {
        drop(Box::from_raw(pulses));
    }
}

/// Number of time slots in a pulse set; 0 on NULL.
///
/// # Safety
/// `pulses` must be NULL or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn pc_pulses_slots(pulses: *const PcPulses) -> usize {
    if pulses.is_null() {
        return 0;
    }
    (*pulses).pulses.slots()
}

/// Copy the pulse values out as `slots` rows of `[h_x, h_z]`.
///
/// # Safety
/// `out` must point to at least `len` writable doubles and `len` must be at
/// least `2 * slots`.
#[no_mangle]
pub unsafe extern "C" fn pc_pulses_values(
    pulses: *const PcPulses,
    out: *mut f64,
    len: usize,
) -> PcStatus {
    guarded(|| {
        if pulses.is_null() || out.is_null() {
            return PcStatus::PcNullArgument;
        }
        let values = (*pulses).pulses.values();
        if len < values.len() {
            return PcStatus::PcDimensionMismatch;
        }
        let dst = std::slice::from_raw_parts_mut(out, values.len());
        for (d, v) in dst.iter_mut().zip(values.iter()) {
            *d = *v;
        }
        PcStatus::PcOk
    })
}

fn unpack_target(target: &[f64]) -> CMatrix {
    ndarray::Array2::from_shape_vec(
        (2, 2),
        (0..4)
            .map(|k| C64::new(target[2 * k], target[2 * k + 1]))
            .collect(),
    )
    .expect("length checked by caller")
}

/// Fidelity `1 - F_err` of evolving the system under the given pulses
/// against the single-qubit target `u` (the full target is `u kron 1`).
/// `target` holds the 2 x 2 matrix as 8 doubles, row-major (re, im) pairs.
///
/// # Safety
/// `target` must point to 8 readable doubles; `fidelity_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pc_fidelity(
    sys: *const PcSystem,
    pulses: *const PcPulses,
    target: *const f64,
    fidelity_out: *mut f64,
) -> PcStatus {
    guarded(|| {
        if sys.is_null() || pulses.is_null() || target.is_null() || fidelity_out.is_null() {
            return PcStatus::PcNullArgument;
        }
        let spec = &(*sys).spec;
        let p = &(*pulses).pulses;
        if p.slots() != spec.slots() {
            return PcStatus::PcDimensionMismatch;
        }
        let u = unpack_target(std::slice::from_raw_parts(target, 8));
        let y = match target_superoperator(&u) {
            Ok(y) => y,
            Err(e) => return status_of(&e),
        };
        match fidelity_error(&y, &evolve(spec, p)) {
            Ok(err) => {
                *fidelity_out = 1.0 - err;
                PcStatus::PcOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Sample a Haar-random single-qubit target for `(seed, stream)` and
/// optimize drift-free pulses for it. The system must be drift-free and
/// closed. On success writes the admitted pulses, the achieved fidelity,
/// and (when non-NULL) the sampled target as 8 doubles. Pass `max_iters = 0`
/// for the default iteration budget.
///
/// # Safety
/// Out pointers must be valid; `u_target_out`, when non-NULL, must point to
/// 8 writable doubles. The returned pulses must be freed with
/// [`pc_pulses_free`].
#[no_mangle]
pub unsafe extern "C" fn pc_generate_ncp(
    sys: *const PcSystem,
    seed: u64,
    stream: u64,
    max_iters: usize,
    u_target_out: *mut f64,
    fidelity_out: *mut f64,
    pulses_out: *mut *mut PcPulses,
) -> PcStatus {
    guarded(|| {
        if sys.is_null() || fidelity_out.is_null() || pulses_out.is_null() {
            return PcStatus::PcNullArgument;
        }
        let cfg = OptimConfig {
            max_iters: if max_iters == 0 {
                OptimConfig::default().max_iters
            } else {
                max_iters
            },
            ..OptimConfig::default()
        };
        match generate_ncp(&(*sys).spec, RngSeed::new(seed, stream), &cfg) {
            Ok(sample) => {
                if !u_target_out.is_null() {
                    let dst = std::slice::from_raw_parts_mut(u_target_out, 8);
                    for (k, z) in sample.u_target.iter().enumerate() {
                        dst[2 * k] = z.re;
                        dst[2 * k + 1] = z.im;
                    }
                }
                *fidelity_out = sample.fidelity;
                *pulses_out = Box::into_raw(Box::new(PcPulses {
                    pulses: sample.pulses,
                }));
                PcStatus::PcOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Load trained network weights from a checkpoint file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be valid. The
/// returned handle must be released with [`pc_model_free`].
#[no_mangle]
pub unsafe extern "C" fn pc_model_load(path: *const c_char, out: *mut *mut PcModel) -> PcStatus {
    guarded(|| {
        if out.is_null() {
            return PcStatus::PcNullArgument;
        }
        let Some(path) = cstr(path) else {
            return PcStatus::PcNullArgument;
        };
        match read_checkpoint(std::path::Path::new(path)) {
            Ok(ckpt) => {
                *out = Box::into_raw(Box::new(PcModel {
                    params: ckpt.params,
                }));
                PcStatus::PcOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Release a model handle. NULL is ignored.
///
/// # Safety
/// `model` must be NULL or a pointer from [`pc_model_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pc_model_free(model: *mut PcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Apply the correction network: `nnDCP = ANN(NCP)`.
///
/// # Safety
/// All pointers must be valid handles / out slots. The returned pulses must
/// be freed with [`pc_pulses_free`].
#[no_mangle]
pub unsafe extern "C" fn pc_model_apply(
    model: *const PcModel,
    ncp: *const PcPulses,
    out: *mut *mut PcPulses,
) -> PcStatus {
    guarded(|| {
        if model.is_null() || ncp.is_null() || out.is_null() {
            return PcStatus::PcNullArgument;
        }
        let corrected = model_forward(&(*ncp).pulses, &(*model).params);
        *out = Box::into_raw(Box::new(PcPulses { pulses: corrected }));
        PcStatus::PcOk
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn make_system(drift: &str, gamma: f64, slots: usize) -> *mut PcSystem {
        let drift = CString::new(drift).unwrap();
        let mut sys: *mut PcSystem = ptr::null_mut();
        let status =
            unsafe { pc_system_new(drift.as_ptr(), gamma, ptr::null(), 0.0, 6.0, slots, &mut sys) };
        assert_eq!(status, PcStatus::PcOk);
        assert!(!sys.is_null());
        sys
    }

    #[test]
    fn system_lifecycle_and_errors() {
        let sys = make_system("sy", 0.2, 32);
        unsafe {
            assert_eq!(pc_system_slots(sys), 32);
            pc_system_free(sys);
        }

        let bad = CString::new("sq").unwrap();
        let mut out: *mut PcSystem = ptr::null_mut();
        let status =
            unsafe { pc_system_new(bad.as_ptr(), 0.2, ptr::null(), 0.0, 6.0, 32, &mut out) };
        assert_eq!(status, PcStatus::PcParseError);

        let status =
            unsafe { pc_system_new(ptr::null(), 0.0, ptr::null(), 0.0, 6.0, 32, ptr::null_mut()) };
        assert_eq!(status, PcStatus::PcNullArgument);
    }

    #[test]
    fn pulses_roundtrip_and_validation() {
        let values: Vec<f64> = (0..8).map(|k| 0.1 * k as f64 - 0.4).collect();
        let mut pulses: *mut PcPulses = ptr::null_mut();
        let status = unsafe { pc_pulses_new(values.as_ptr(), 4, &mut pulses) };
        assert_eq!(status, PcStatus::PcOk);
        unsafe {
            assert_eq!(pc_pulses_slots(pulses), 4);
            let mut back = vec![0.0; 8];
            assert_eq!(pc_pulses_values(pulses, back.as_mut_ptr(), 8), PcStatus::PcOk);
            assert_eq!(back, values);
            let mut small = vec![0.0; 4];
            assert_eq!(
                pc_pulses_values(pulses, small.as_mut_ptr(), 4),
                PcStatus::PcDimensionMismatch
            );
            pc_pulses_free(pulses);
        }

        let bad = vec![0.0, 1.5];
        let mut out: *mut PcPulses = ptr::null_mut();
        let status = unsafe { pc_pulses_new(bad.as_ptr(), 1, &mut out) };
        assert_eq!(status, PcStatus::PcInvalidArgument);
    }

    #[test]
    fn fidelity_is_bounded_and_deterministic() {
        let sys = make_system("none", 0.0, 8);
        let values = vec![0.0; 16];
        let mut pulses: *mut PcPulses = ptr::null_mut();
        unsafe {
            pc_pulses_new(values.as_ptr(), 8, &mut pulses);
        }
        // Identity target, row-major (re, im) pairs.
        let target = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let mut f1 = f64::NAN;
        let mut f2 = f64::NAN;
        unsafe {
            assert_eq!(pc_fidelity(sys, pulses, target.as_ptr(), &mut f1), PcStatus::PcOk);
            assert_eq!(pc_fidelity(sys, pulses, target.as_ptr(), &mut f2), PcStatus::PcOk);
            pc_pulses_free(pulses);
            pc_system_free(sys);
        }
        assert!((0.0..=1.0).contains(&f1));
        assert_eq!(f1, f2);

        // Slot-count mismatch is rejected.
        let sys = make_system("none", 0.0, 4);
        let mut pulses: *mut PcPulses = ptr::null_mut();
        unsafe {
            pc_pulses_new(values.as_ptr(), 8, &mut pulses);
            let mut f = 0.0;
            assert_eq!(
                pc_fidelity(sys, pulses, target.as_ptr(), &mut f),
                PcStatus::PcDimensionMismatch
            );
            pc_pulses_free(pulses);
            pc_system_free(sys);
        }
    }

    #[test]
    fn ncp_generation_is_deterministic_across_calls() {
        let sys = make_system("none", 0.0, 32);
        let run = |stream: u64| -> (f64, Vec<f64>, [f64; 8]) {
            let mut fid = 0.0;
            let mut target = [0.0; 8];
            let mut pulses: *mut PcPulses = ptr::null_mut();
            let status = unsafe {
                pc_generate_ncp(sys, 1234, stream, 0, target.as_mut_ptr(), &mut fid, &mut pulses)
            };
            assert_eq!(status, PcStatus::PcOk);
            let mut values = vec![0.0; 64];
            unsafe {
                assert_eq!(
                    pc_pulses_values(pulses, values.as_mut_ptr(), 64),
                    PcStatus::PcOk
                );
                pc_pulses_free(pulses);
            }
            (fid, values, target)
        };
        let a = run(0);
        let b = run(0);
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
        assert!(a.0 >= 0.999);
        unsafe { pc_system_free(sys) };

        // A drifted system is rejected for NCP generation.
        let sys = make_system("sy", 0.2, 32);
        let mut fid = 0.0;
        let mut pulses: *mut PcPulses = ptr::null_mut();
        let status =
            unsafe { pc_generate_ncp(sys, 1, 0, 0, ptr::null_mut(), &mut fid, &mut pulses) };
        assert_eq!(status, PcStatus::PcInvalidArgument);
        unsafe { pc_system_free(sys) };
    }

    #[test]
    fn model_load_and_apply() {
        use pulsecorr::lstm::{
            write_checkpoint, Checkpoint, TrainConfig, CHECKPOINT_FORMAT_VERSION,
        };

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let ckpt = Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            params: ModelParams::init(4, RngSeed::new(5, 0)),
            train_config: TrainConfig::default(),
            manifest_sha256: String::new(),
        };
        write_checkpoint(&path, &ckpt).unwrap();

        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        let mut model: *mut PcModel = ptr::null_mut();
        let status = unsafe { pc_model_load(cpath.as_ptr(), &mut model) };
        assert_eq!(status, PcStatus::PcOk);

        let values = vec![0.25; 64];
        let mut ncp: *mut PcPulses = ptr::null_mut();
        let mut corrected: *mut PcPulses = ptr::null_mut();
        unsafe {
            assert_eq!(pc_pulses_new(values.as_ptr(), 32, &mut ncp), PcStatus::PcOk);
            assert_eq!(pc_model_apply(model, ncp, &mut corrected), PcStatus::PcOk);
            assert_eq!(pc_pulses_slots(corrected), 32);
            let mut out = vec![0.0; 64];
            assert_eq!(
                pc_pulses_values(corrected, out.as_mut_ptr(), 64),
                PcStatus::PcOk
            );
            assert!(out.iter().all(|v| (-1.0..=1.0).contains(v)));
            pc_pulses_free(ncp);
            pc_pulses_free(corrected);
            pc_model_free(model);
        }

        let missing = CString::new(dir.path().join("nope.json").to_str().unwrap()).unwrap();
        let mut model: *mut PcModel = ptr::null_mut();
        let status = unsafe { pc_model_load(missing.as_ptr(), &mut model) };
        assert_eq!(status, PcStatus::PcIoError);
    }

    #[test]
    fn status_messages_are_nul_terminated() {
        for status in [
            PcStatus::PcOk,
            PcStatus::PcNullArgument,
            PcStatus::PcInvalidArgument,
            PcStatus::PcParseError,
            PcStatus::PcDimensionMismatch,
            PcStatus::PcIoError,
            PcStatus::PcIncompatible,
            PcStatus::PcNotConverged,
            PcStatus::PcInternalError,
        ] {
            let msg = pc_status_message(status);
            let text = unsafe { CStr::from_ptr(msg) }.to_str().unwrap();
            assert!(!text.is_empty());
        }
    }
}
