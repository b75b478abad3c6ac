//! Quantum-specific constructions: Pauli matrices, Haar-random unitaries,
//! superoperators and Liouvillians.
//!
//! Vectorization convention: row-stacking, i.e. `vec(A rho B) = (A kron B^T)
//! vec(rho)`. Under this convention the superoperator of `rho -> U rho U^dag`
//! is exactly `U kron conj(U)`.

use ndarray::Array2;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{conjugate, dagger, identity, kron, qr_decompose, CMatrix, C64, ONE, ZERO};
use crate::rng::RngSeed;

/// The four single-qubit generators used throughout: identity and the three
/// Pauli matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliAxis {
    I,
    X,
    Y,
    Z,
}

/// Standard 2x2 Pauli matrix (or identity).
pub fn pauli(axis: PauliAxis) -> CMatrix {
    let i = C64::new(0.0, 1.0);
    match axis {
        PauliAxis::I => identity(2),
        PauliAxis::X => ndarray::array![[ZERO, ONE], [ONE, ZERO]],
        PauliAxis::Y => ndarray::array![[ZERO, -i], [i, ZERO]],
        PauliAxis::Z => ndarray::array![[ONE, ZERO], [ZERO, -ONE]],
    }
}

/// Two-qubit operator `a kron b` from single-qubit Pauli labels.
pub fn pauli_pair(first: PauliAxis, second: PauliAxis) -> CMatrix {
    kron(&pauli(first), &pauli(second))
}

/// Haar-distributed random unitary via the Ginibre + QR construction:
/// sample a complex Gaussian matrix, QR-decompose it, and fix the phases so
/// that R's diagonal is positive real.
pub fn haar_unitary(dim: usize, seed: RngSeed) -> CMatrix {
    haar_with_rng(dim, &mut seed.rng())
}

/// Same construction, drawing from a caller-owned generator.
pub fn haar_with_rng<R: rand::Rng>(dim: usize, rng: &mut R) -> CMatrix {
    assert!(dim >= 1, "haar_unitary requires dim >= 1");
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let ginibre = Array2::from_shape_fn((dim, dim), |_| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * scale, im * scale)
    });
    let (mut q, r) = qr_decompose(&ginibre);
    for j in 0..dim {
        let d = r[[j, j]];
        let phase = if d.norm() == 0.0 { ONE } else { d / d.norm() };
        for i in 0..dim {
            q[[i, j]] *= phase;
        }
    }
    q
}

/// A d^2 x d^2 matrix acting on row-stacked d x d density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    matrix: CMatrix,
}

impl Superoperator {
    /// Wrap a square matrix whose side is a perfect square (d^2).
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "superoperator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let d = (n as f64).sqrt().round() as usize;
        if d * d != n {
            return Err(Error::DimensionMismatch(format!(
                "superoperator side {n} is not a perfect square"
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument(
                "superoperator entries must be finite".into(),
            ));
        }
        Ok(Self { matrix })
    }

    /// Side length d^2 of the matrix.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Hilbert-space dimension d.
    pub fn hilbert_dim(&self) -> usize {
        (self.dim() as f64).sqrt().round() as usize
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Composition `self . other` (apply `other` first).
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        Superoperator {
            matrix: self.matrix.dot(&other.matrix),
        }
    }

    /// Apply to a row-stacked density matrix.
    pub fn apply_vec(&self, rho_vec: &ndarray::Array1<C64>) -> ndarray::Array1<C64> {
        self.matrix.dot(rho_vec)
    }
}

/// Row-stack a density matrix into a vector.
pub fn vec_rho(rho: &CMatrix) -> ndarray::Array1<C64> {
    ndarray::Array1::from_iter(rho.iter().cloned())
}

/// Inverse of [`vec_rho`].
pub fn unvec_rho(v: &ndarray::Array1<C64>, dim: usize) -> CMatrix {
    Array2::from_shape_vec((dim, dim), v.to_vec()).expect("vector length must be dim^2")
}

/// Superoperator of the unitary channel `rho -> u rho u^dag`, i.e.
/// `u kron conj(u)` under row-stacking.
pub fn unitary_superoperator(u: &CMatrix) -> Result<Superoperator> {
    if u.nrows() != u.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "unitary_superoperator expects a square matrix, got {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    Superoperator::new(kron(u, &conjugate(u)))
}

/// Row-stacked generator of the GKSL master equation:
///
/// `L = -i (h kron 1 - 1 kron h^T)
///    + sum_j rate_j (l_j kron conj(l_j)
///                    - 1/2 (l_j^dag l_j) kron 1
///                    - 1/2 1 kron (l_j^dag l_j)^T)`
pub fn liouvillian(h: &CMatrix, lindblads: &[(CMatrix, f64)]) -> Result<Superoperator> {
    let d = h.nrows();
    if h.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "hamiltonian must be square, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let id = identity(d);
    let minus_i = C64::new(0.0, -1.0);
    let ht = h.t().to_owned();
    let mut gen = (kron(h, &id) - kron(&id, &ht)).mapv(|z| z * minus_i);

    for (l, rate) in lindblads {
        if *rate < 0.0 {
            return Err(Error::NegativeRate(*rate));
        }
        if l.nrows() != d || l.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "lindblad operator is {}x{}, expected {}x{}",
                l.nrows(),
                l.ncols(),
                d,
                d
            )));
        }
        let ldl = dagger(l).dot(l);
        let ldl_t = ldl.t().to_owned();
        let dissipator = kron(l, &conjugate(l))
            - kron(&ldl, &id).mapv(|z| z * 0.5)
            - kron(&id, &ldl_t).mapv(|z| z * 0.5);
        gen = gen + dissipator.mapv(|z| z * *rate);
    }
    Superoperator::new(gen)
}
