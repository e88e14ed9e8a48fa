//! Small dense linear-algebra helpers shared by the environment modules.

use nalgebra::{DMatrix, Dyn, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

const JACOBI_SKIP: f64 = 1e-18;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `q ⊗ q*`, the doubled (transfer) form of a single site matrix.
pub fn doubled(q: &CMatrix) -> CMatrix {
    q.kronecker(&q.map(|z| z.conj()))
}

/// Eigenvalues of a general complex square matrix, from the complex Schur form.
pub fn eigenvalues(m: &CMatrix) -> Vec<C64> {
    if m.nrows() == 1 {
        return vec![m[(0, 0)]];
    }
    let scale = max_abs(m);
    if scale == 0.0 {
        return vec![C64::new(0.0, 0.0); m.nrows()];
    }
    let schur = (m / C64::new(scale, 0.0))
        .try_schur(f64::EPSILON, 100_000)
        .expect("complex Schur iteration did not converge");
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|i| t[(i, i)] * scale).collect()
}

/// Eigenvalues of a Hermitian matrix (the Hermitian part is used).
/// Each eigenvalue of `h` appears twice in the real embedding `[[Re, -Im], [Im, Re]]`.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = hermitian_part(m);
    let n = h.nrows();
    let real = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut vals: Vec<f64> = symmetric_eigen(real).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

/// Cyclic Jacobi eigendecomposition of a real symmetric matrix.
///
/// Used instead of the QR-based solver, whose implicit shifts occasionally stall short of full
/// accuracy on tridiagonal input.
pub fn symmetric_eigen(m: DMatrix<f64>) -> SymmetricEigen<f64, Dyn> {
    let n = m.nrows();
    let mut a = (&m + m.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 || apq.abs() <= JACOBI_SKIP * (a[(p, p)] * a[(q, q)]).abs().sqrt() {
                    continue;
                }
                rotated = true;
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    SymmetricEigen { eigenvalues: a.diagonal(), eigenvectors: v }
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Trace norm of a Hermitian matrix: sum of absolute eigenvalues.
pub fn trace_norm_hermitian(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|e| e.abs()).sum()
}

/// `m^k` by repeated squaring.
pub fn matrix_power(m: &CMatrix, mut k: usize) -> CMatrix {
    let n = m.nrows();
    let mut result = CMatrix::identity(n, n);
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Row-major flattening of a square matrix, `vec(P)[a*n + b] = P[a, b]`.
pub fn vec_row_major(m: &CMatrix) -> Vec<C64> {
    let n = m.ncols();
    let mut out = Vec::with_capacity(m.nrows() * n);
    for a in 0..m.nrows() {
        for b in 0..n {
            out.push(m[(a, b)]);
        }
    }
    out
}

pub fn unvec_row_major(v: &[C64], rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |a, b| v[a * cols + b])
}
