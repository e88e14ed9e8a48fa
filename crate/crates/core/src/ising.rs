//! Classical 1D Ising chain environment.
//!
//! The capacity follows from the entropy per site `s = (1 - β∂_β) ln λ₁` of
//! the transfer matrix, with `∂_β λ₁` taken by Hellmann–Feynman from the
//! Perron vectors. Periodic boundaries throughout.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::symmetric_eigen;
use crate::numerics::perron_eigen;

/// Largest absolute Boltzmann exponent accepted before `exp` loses the value.
pub const MAX_EXPONENT: f64 = 700.0;
pub const MAX_BRUTE_FORCE_SITES: usize = 18;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub beta: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "D", default)]
    pub d: f64,
}

impl IsingParams {
    pub fn new(beta: f64, j: f64, m: f64, d: f64) -> Result<Self> {
        let p = Self { beta, j, m, d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.beta, self.j, self.m, self.d].iter().all(|x| x.is_finite()) {
            return invalid("Ising parameters must be finite");
        }
        if !(self.beta > 0.0) {
            return invalid(format!("beta must be positive, got {}", self.beta));
        }
        Ok(())
    }

    /// Effective nearest-neighbour coupling `J - D`.
    pub fn coupling(&self) -> f64 {
        self.j - self.d
    }

    /// Exponents (divided by β) of the transfer-matrix entries, spin up first.
    fn energies(&self) -> [[f64; 2]; 2] {
        let k = self.coupling();
        [[k + self.m, -k], [-k, k - self.m]]
    }

    fn checked_exponents(&self) -> Result<[[f64; 2]; 2]> {
        self.validate()?;
        let g = self.energies();
        for row in g {
            for e in row {
                let x = self.beta * e;
                if x.abs() > MAX_EXPONENT {
                    return Err(Error::ParameterOverflow { exponent: x, limit: MAX_EXPONENT });
                }
            }
        }
        Ok(g)
    }
}

/// `[[e^{β(J-D+M)}, e^{-β(J-D)}], [e^{-β(J-D)}, e^{β(J-D-M)}]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransferMatrix2 {
    pub entries: [[f64; 2]; 2],
}

impl TransferMatrix2 {
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(2, 2, |i, j| self.entries[i][j])
    }
}

pub fn transfer_matrix(p: &IsingParams) -> Result<TransferMatrix2> {
    let g = p.checked_exponents()?;
    Ok(TransferMatrix2 { entries: g.map(|row| row.map(|e| (p.beta * e).exp())) })
}

/// Transfer matrix divided by `e^{shift}` so the largest entry is one.
fn scaled_transfer(p: &IsingParams) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let g = p.checked_exponents()?;
    let shift = g.iter().flatten().map(|e| p.beta * e).fold(f64::NEG_INFINITY, f64::max);
    let t = DMatrix::from_fn(2, 2, |i, j| (p.beta * g[i][j] - shift).exp());
    let dt = DMatrix::from_fn(2, 2, |i, j| g[i][j] * t[(i, j)]);
    Ok((t, dt, shift))
}

/// Entropy per site in nats, `ln λ₁ - β λ₁'/λ₁`.
pub fn entropy_per_site(p: &IsingParams) -> Result<f64> {
    let (t, dt, shift) = scaled_transfer(p)?;
    let pair = perron_eigen(&t)?;
    let dlambda = pair.left.dot(&(&dt * &pair.right)) / pair.left.dot(&pair.right);
    let s = shift + pair.value.ln() - p.beta * dlambda / pair.value;
    Ok(s.clamp(0.0, std::f64::consts::LN_2))
}

/// Capacity in bits, `1 - log2(e) s`.
pub fn capacity(p: &IsingParams) -> Result<f64> {
    let s = entropy_per_site(p)?;
    Ok((1.0 - s / std::f64::consts::LN_2).clamp(0.0, 1.0))
}

/// Total entropy (nats) of a periodic chain of `n` sites from
/// `Z = tr T^n = λ₁^n + λ₂^n`.
pub fn periodic_chain_entropy(p: &IsingParams, n: usize) -> Result<f64> {
    if n == 0 {
        return invalid("chain length must be positive");
    }
    let (t, dt, shift) = scaled_transfer(p)?;
    let eig = symmetric_eigen(t);
    let (i1, i2) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let l1 = eig.eigenvalues[i1];
    let l2 = eig.eigenvalues[i2];
    let hf = |i: usize| {
        let v = eig.eigenvectors.column(i);
        v.dot(&(&dt * v))
    };
    let nf = n as f64;
    let ratio = l2 / l1;
    let rn = ratio.powi(n as i32);
    let ln_z = nf * (shift + l1.ln()) + rn.ln_1p();
    let dln_z = nf * (hf(i1) / l1 + ratio.powi(n as i32 - 1) * hf(i2) / l1) / (1.0 + rn);
    Ok(ln_z - p.beta * dln_z)
}

/// Exact entropy (nats) of the Boltzmann distribution over all `2^n`
/// configurations of `H = -(J-D) Σ s_i s_{i+1} - M Σ s_i`.
pub fn brute_force_entropy(p: &IsingParams, n: usize, periodic: bool) -> Result<f64> {
    p.validate()?;
    if n == 0 || n > MAX_BRUTE_FORCE_SITES {
        return Err(Error::EnumerationTooLarge(format!("{n} sites (limit {MAX_BRUTE_FORCE_SITES})")));
    }
    let k = p.coupling();
    let bonds = if periodic { n } else { n - 1 };
    let log_w: Vec<f64> = (0..1usize << n)
        .map(|cfg| {
            let spin = |i: usize| if (cfg >> (n - 1 - i)) & 1 == 0 { 1.0 } else { -1.0 };
            let mut energy = 0.0;
            for i in 0..n {
                energy -= p.m * spin(i);
            }
            for b in 0..bonds {
                energy -= k * spin(b) * spin((b + 1) % n);
            }
            -p.beta * energy
        })
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = log_w.iter().map(|w| (w - max).exp()).sum();
    let ln_z = max + z.ln();
    Ok(-log_w
        .iter()
        .map(|w| {
            let lp = w - ln_z;
            lp.exp() * lp
        })
        .sum::<f64>())
}
