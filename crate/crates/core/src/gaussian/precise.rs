//! Double-double route for ground-state mutual information.
//!
//! Far-apart blocks have `I(A:B)` many orders of magnitude below the
//! entropies it is assembled from, so `S(A) + S(B) - S(AB)` is evaluated in
//! ~32-digit arithmetic end to end: `V^{±1/2}` by Jacobi, block spectra via
//! Cholesky, and `f(μ)` with our own `exp`/`ln`.

use twofloat::TwoFloat;

use crate::error::{invalid, Error, Result};

pub(crate) type Dd = TwoFloat;

fn dd(x: f64) -> Dd {
    Dd::from(x)
}

fn ln2() -> Dd {
    Dd::new_add(std::f64::consts::LN_2, 2.319_046_813_846_299_6e-17)
}

/// Long division; `TwoFloat`'s own quotient is only correct to ~f64.
pub(crate) fn div(a: Dd, b: Dd) -> Dd {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    Dd::new_add(q1, q2) + q3
}

fn recip(x: Dd) -> Dd {
    div(dd(1.0), x)
}

const EXP_HALVINGS: i32 = 6;

pub(crate) fn exp(x: Dd) -> Dd {
    if x.hi() > 700.0 {
        return dd(f64::INFINITY);
    }
    if x.hi() < -700.0 {
        return dd(0.0);
    }
    let k = (x.hi() / ln2().hi()).round();
    let r = (x - ln2() * k) * (0.5f64).powi(EXP_HALVINGS);
    let mut term = dd(1.0);
    let mut sum = dd(1.0);
    for i in 1..30 {
        term = div(term * r, dd(i as f64));
        sum += term;
        if term.hi().abs() < 1e-36 {
            break;
        }
    }
    for _ in 0..EXP_HALVINGS {
        sum = sum * sum;
    }
    sum * 2f64.powi(k as i32)
}

pub(crate) fn ln(x: Dd) -> Dd {
    debug_assert!(x.hi() > 0.0);
    let mut y = dd(x.hi().ln());
    for _ in 0..2 {
        y = y + x * exp(-y) - 1.0;
    }
    y
}

/// Symmetric matrix in row-major double-double storage.
#[derive(Clone, Debug)]
pub(crate) struct DdMatrix {
    pub n: usize,
    pub a: Vec<Dd>,
}

impl DdMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![dd(0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = dd(1.0);
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Dd) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> Dd {
        self.a[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: Dd) {
        self.a[i * self.n + j] = v;
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| (0..n).fold(dd(0.0), |acc, k| acc + self.get(i, k) * other.get(k, j)))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i))
    }

    pub fn principal(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |i, j| self.get(idx[i], idx[j]))
    }
}

const JACOBI_SWEEPS: usize = 60;

/// Cyclic Jacobi eigendecomposition: `(eigenvalues, eigenvectors as columns)`.
pub(crate) fn jacobi(m: &DdMatrix, want_vectors: bool) -> Result<(Vec<Dd>, DdMatrix)> {
    let n = m.n;
    let mut a = m.clone();
    let mut u = DdMatrix::identity(if want_vectors { n } else { 0 });
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                let scale = (a.get(p, p).hi() * a.get(q, q).hi()).abs().sqrt();
                if apq.hi().abs() <= 1e-33 * scale {
                    continue;
                }
                rotated = true;
                let theta = div(a.get(q, q) - a.get(p, p), apq * 2.0);
                let t = {
                    let mag = theta.abs() + (theta * theta + 1.0).sqrt();
                    let t = recip(mag);
                    if theta.hi() < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = recip((t * t + 1.0).sqrt());
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                if want_vectors {
                    for k in 0..n {
                        let ukp = u.get(k, p);
                        let ukq = u.get(k, q);
                        u.set(k, p, c * ukp - s * ukq);
                        u.set(k, q, s * ukp + c * ukq);
                    }
                }
            }
        }
        if !rotated {
            let vals = (0..n).map(|i| a.get(i, i)).collect();
            return Ok((vals, u));
        }
    }
    let residual = (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| a.get(i, j).hi().abs()).fold(0.0, f64::max);
    Err(Error::NoConvergence { iterations: JACOBI_SWEEPS, residual })
}

/// Lower-triangular `R` with `R Rᵀ = m`.
pub(crate) fn cholesky(m: &DdMatrix) -> Result<DdMatrix> {
    let n = m.n;
    let mut r = DdMatrix::zeros(n);
    for j in 0..n {
        let mut diag = m.get(j, j);
        for k in 0..j {
            diag -= r.get(j, k) * r.get(j, k);
        }
        if !(diag.hi() > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: diag.hi() });
        }
        let d = diag.sqrt();
        r.set(j, j, d);
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= r.get(i, k) * r.get(j, k);
            }
            r.set(i, j, div(s, d));
        }
    }
    Ok(r)
}

/// `(V^{-1/2}, V^{1/2})` of a positive-definite matrix.
pub(crate) fn inverse_and_square_root(v: &DdMatrix) -> Result<(DdMatrix, DdMatrix)> {
    let (w, u) = jacobi(v, true)?;
    if let Some(bad) = w.iter().find(|x| !(x.hi() > 0.0)) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: bad.hi() });
    }
    let roots: Vec<Dd> = w.iter().map(|x| x.sqrt()).collect();
    let n = v.n;
    let build = |scale: &dyn Fn(usize) -> Dd| {
        DdMatrix::from_fn(n, |i, j| (0..n).fold(dd(0.0), |acc, k| acc + u.get(i, k) * scale(k) * u.get(j, k)))
    };
    let gx = build(&|k| recip(roots[k]));
    let gp = build(&|k| roots[k]);
    Ok((gx, gp))
}

/// Symplectic eigenvalues of the block-diagonal state `γ_x ⊕ γ_p` restricted
/// to `sites`: `μ² = eig(Rᵀ γ_p R)` with `γ_x = R Rᵀ`.
pub(crate) fn block_symplectic(gx: &DdMatrix, gp: &DdMatrix, sites: &[usize]) -> Result<Vec<Dd>> {
    let r = cholesky(&gx.principal(sites))?;
    let m = r.transpose().mul(&gp.principal(sites)).mul(&r);
    let sym = DdMatrix::from_fn(m.n, |i, j| (m.get(i, j) + m.get(j, i)) * 0.5);
    let (mu2, _) = jacobi(&sym, false)?;
    Ok(mu2.into_iter().map(|x| if x.hi() > 1.0 { x.sqrt() } else { dd(1.0) }).collect())
}

/// `f(μ)` in nats.
pub(crate) fn mode_entropy_nats(mu: Dd) -> Dd {
    let plus = (mu + 1.0) * 0.5;
    let minus = (mu - 1.0) * 0.5;
    let mut s = plus * ln(plus);
    if minus.hi() > 0.0 {
        s -= minus * ln(minus);
    }
    s
}

pub(crate) fn block_entropy_nats(gx: &DdMatrix, gp: &DdMatrix, sites: &[usize]) -> Result<Dd> {
    Ok(block_symplectic(gx, gp, sites)?.into_iter().fold(dd(0.0), |acc, mu| acc + mode_entropy_nats(mu)))
}

pub(crate) struct GroundState {
    gx: DdMatrix,
    gp: DdMatrix,
}

impl GroundState {
    pub fn new(v: &nalgebra::DMatrix<f64>) -> Result<Self> {
        if v.nrows() != v.ncols() {
            return invalid("potential matrix must be square");
        }
        let vd = DdMatrix::from_fn(v.nrows(), |i, j| dd(v[(i, j)]));
        let (gx, gp) = inverse_and_square_root(&vd)?;
        Ok(Self { gx, gp })
    }

    /// `I(A:B) = S(A) + S(B) - S(AB)` in nats.
    pub fn mutual_information(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        let ab: Vec<usize> = a.iter().chain(b).copied().collect();
        let i = block_entropy_nats(&self.gx, &self.gp, a)? + block_entropy_nats(&self.gx, &self.gp, b)?
            - block_entropy_nats(&self.gx, &self.gp, &ab)?;
        Ok(i.hi() + i.lo())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total(x: Dd) -> f64 {
        x.hi() + x.lo()
    }

    #[test]
    fn exp_and_ln_are_double_double_accurate() {
        let e = exp(dd(1.0));
        assert_eq!(e.hi(), std::f64::consts::E);
        assert!((e.lo() - 1.445_646_891_729_250_2e-16).abs() < 1e-30);
        assert!((total(div(dd(1.0), dd(3.0)) * 3.0 - 1.0)).abs() < 1e-31);
        let l2 = ln(dd(2.0));
        assert_eq!(l2.hi(), ln2().hi());
        assert!((l2.lo() - ln2().lo()).abs() < 1e-31);
        for &x in &[1e-12, 0.37, 1.0 + 1e-9, 5.5, 123.0] {
            let back = exp(ln(dd(x)));
            assert!((total(back) - x).abs() <= 1e-30 * x, "{x}");
        }
        assert_eq!(total(ln(dd(1.0))), 0.0);
    }

    #[test]
    fn jacobi_and_cholesky() {
        let m = DdMatrix::from_fn(4, |i, j| dd(if i == j { 2.0 + i as f64 } else { 0.3 / (1.0 + (i + j) as f64) }));
        let (vals, u) = jacobi(&m, true).unwrap();
        let back = DdMatrix::from_fn(4, |i, j| (0..4).fold(dd(0.0), |acc, k| acc + u.get(i, k) * vals[k] * u.get(j, k)));
        for k in 0..16 {
            assert!(total(back.a[k] - m.a[k]).abs() < 1e-29);
        }
        let r = cholesky(&m).unwrap();
        let rr = r.mul(&r.transpose());
        for k in 0..16 {
            assert!(total(rr.a[k] - m.a[k]).abs() < 1e-30);
        }
        let (gx, gp) = inverse_and_square_root(&m).unwrap();
        let check = gx.mul(&gx).mul(&m);
        let id = gp.mul(&gx);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((total(check.get(i, j)) - want).abs() < 1e-29);
                assert!((total(id.get(i, j)) - want).abs() < 1e-29);
            }
        }
    }

    #[test]
    fn mode_entropy_values() {
        assert!((total(mode_entropy_nats(dd(3.0))) - 2.0 * 2f64.ln()).abs() < 1e-30);
        assert_eq!(total(mode_entropy_nats(dd(1.0))), 0.0);
    }
}
