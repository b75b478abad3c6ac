//! Dense complex linear algebra on small matrices.
//!
//! Everything in this crate works on two-qubit operators (4x4) and their
//! superoperators (16x16, 32x32 for augmented blocks), so all routines here
//! are plain dense algorithms with no sparse or blocked machinery.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = Array2<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// d x d identity.
pub fn identity(dim: usize) -> CMatrix {
    Array2::eye(dim).mapv(|x: f64| C64::new(x, 0.0))
}

/// Conjugate transpose.
pub fn dagger(a: &CMatrix) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

/// Elementwise complex conjugate.
pub fn conjugate(a: &CMatrix) -> CMatrix {
    a.mapv(|z| z.conj())
}

/// Frobenius norm.
pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Induced 1-norm (maximum absolute column sum).
pub fn one_norm(a: &CMatrix) -> f64 {
    let mut max = 0.0_f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|z| z.norm()).sum();
        if s > max {
            max = s;
        }
    }
    max
}

/// Max entrywise deviation from Hermiticity.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let d = (a[[i, j]] - a[[j, i]].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Kronecker product. `kron(a, b)[(i*rb + k, j*cb + l)] = a[(i, j)] * b[(k, l)]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::from_elem((ra * rb, ca * cb), ZERO);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[[i, j]];
            for k in 0..rb {
                for l in 0..cb {
                    out[[i * rb + k, j * cb + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Solve A X = B for X by LU decomposition with partial pivoting.
///
/// A is consumed as the factorization workspace.
pub fn lu_solve(mut a: CMatrix, mut b: CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "lu_solve expects a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "lu_solve rhs has {} rows, expected {}",
            b.nrows(),
            n
        )));
    }

    for k in 0..n {
        // Pivot on the largest remaining entry in column k.
        let mut pivot = k;
        let mut best = a[[k, k]].norm();
        for i in (k + 1)..n {
            let mag = a[[i, k]].norm();
            if mag > best {
                best = mag;
                pivot = i;
            }
        }
        if best == 0.0 {
            return Err(Error::InvalidArgument("singular matrix in lu_solve".into()));
        }
        if pivot != k {
            for j in 0..n {
                a.swap([k, j], [pivot, j]);
            }
            for j in 0..b.ncols() {
                b.swap([k, j], [pivot, j]);
            }
        }
        let akk = a[[k, k]];
        for i in (k + 1)..n {
            let factor = a[[i, k]] / akk;
            a[[i, k]] = factor;
            for j in (k + 1)..n {
                let akj = a[[k, j]];
                a[[i, j]] -= factor * akj;
            }
            for j in 0..b.ncols() {
                let bkj = b[[k, j]];
                b[[i, j]] -= factor * bkj;
            }
        }
    }

    // Back substitution.
    for j in 0..b.ncols() {
        for i in (0..n).rev() {
            let mut sum = b[[i, j]];
            for k in (i + 1)..n {
                sum -= a[[i, k]] * b[[k, j]];
            }
            b[[i, j]] = sum / a[[i, i]];
        }
    }
    Ok(b)
}

// Pade coefficient tables for the scaling-and-squaring method
// (diagonal approximants of orders 3, 5, 7, 9, 13).
const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

fn scale(a: &CMatrix, c: f64) -> CMatrix {
    a.mapv(|z| z * c)
}

/// Assemble U (odd part) and V (even part) of a Pade approximant from
/// precomputed even powers of A.
fn pade_uv(a: &CMatrix, powers: &[&CMatrix], b: &[f64]) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let mut u_inner = scale(&identity(n), b[1]);
    let mut v = scale(&identity(n), b[0]);
    for (k, p) in powers.iter().enumerate() {
        let even = b[2 * (k + 1)];
        let odd = b[2 * (k + 1) + 1];
        v = v + scale(p, even);
        u_inner = u_inner + scale(p, odd);
    }
    (a.dot(&u_inner), v)
}

/// Matrix exponential by scaling and squaring with Pade approximants.
///
/// For skew-Hermitian input the result is unitary to ~1e-15.
pub fn matrix_exp(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix_exp expects a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let norm = one_norm(a);

    let (u, v) = if norm <= THETA3 {
        let a2 = a.dot(a);
        pade_uv(a, &[&a2], &B3)
    } else if norm <= THETA5 {
        let a2 = a.dot(a);
        let a4 = a2.dot(&a2);
        pade_uv(a, &[&a2, &a4], &B5)
    } else if norm <= THETA7 {
        let a2 = a.dot(a);
        let a4 = a2.dot(&a2);
        let a6 = a4.dot(&a2);
        pade_uv(a, &[&a2, &a4, &a6], &B7)
    } else if norm <= THETA9 {
        let a2 = a.dot(a);
        let a4 = a2.dot(&a2);
        let a6 = a4.dot(&a2);
        let a8 = a6.dot(&a2);
        pade_uv(a, &[&a2, &a4, &a6, &a8], &B9)
    } else {
        // Scale A down to norm <= theta_13, apply the order-13 approximant,
        // then undo the scaling by repeated squaring.
        let s = ((norm / THETA13).log2().ceil() as i32).max(0);
        let a_scaled = scale(a, 2f64.powi(-s));
        let a2 = a_scaled.dot(&a_scaled);
        let a4 = a2.dot(&a2);
        let a6 = a4.dot(&a2);

        let mut u_high = scale(&a6, B13[13]) + scale(&a4, B13[11]) + scale(&a2, B13[9]);
        u_high = a6.dot(&u_high);
        let u_low = scale(&a6, B13[7])
            + scale(&a4, B13[5])
            + scale(&a2, B13[3])
            + scale(&identity(n), B13[1]);
        let u = a_scaled.dot(&(u_high + u_low));

        let mut v_high = scale(&a6, B13[12]) + scale(&a4, B13[10]) + scale(&a2, B13[8]);
        v_high = a6.dot(&v_high);
        let v = v_high
            + scale(&a6, B13[6])
            + scale(&a4, B13[4])
            + scale(&a2, B13[2])
            + scale(&identity(n), B13[0]);

        let mut r = lu_solve(&v - &u, &v + &u)?;
        for _ in 0..s {
            r = r.dot(&r);
        }
        return Ok(r);
    };

    lu_solve(&v - &u, &v + &u)
}

/// QR decomposition of a square complex matrix by Householder reflections.
///
/// Returns `(q, r)` with `q` unitary and `r` upper triangular.
pub fn qr_decompose(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "qr_decompose expects a square matrix");
    let mut r = a.clone();
    let mut q = identity(n);

    for k in 0..n.saturating_sub(1) {
        let mut v = Array1::from_elem(n - k, ZERO);
        let mut norm_sq = 0.0;
        for i in k..n {
            v[i - k] = r[[i, k]];
            norm_sq += r[[i, k]].norm_sqr();
        }
        let norm = norm_sq.sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm < f64::EPSILON * norm {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }

        // r[k.., k..] -= 2 v (v^dag r[k.., k..])
        for j in k..n {
            let mut dot = ZERO;
            for i in k..n {
                dot += v[i - k].conj() * r[[i, j]];
            }
            let dot2 = dot * 2.0;
            for i in k..n {
                r[[i, j]] -= v[i - k] * dot2;
            }
        }
        // q[.., k..] -= 2 (q[.., k..] v) v^dag
        for i in 0..n {
            let mut dot = ZERO;
            for j in k..n {
                dot += q[[i, j]] * v[j - k];
            }
            let dot2 = dot * 2.0;
            for j in k..n {
                q[[i, j]] -= dot2 * v[j - k].conj();
            }
        }
    }
    (q, r)
}
