//! Exact reduced states of live blocks on a periodic MPS chain.
//!
//! Every traced stretch of `r` sites contributes the CP map `M^r`, which is
//! split into at most `bond²` Kraus operators from its Choi matrix. The
//! reduced state on the kept sites is then `ΨΨ†` with
//! `Ψ[x, k] = tr(Q_{x1} K_{k1} Q_{x2} …)`, so only kept configurations and
//! Kraus strings are ever enumerated.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::{string_products, MpsSpec, Normalized};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::linalg::{matrix_power, trace_norm_hermitian, CMatrix};

pub const MAX_DENSE_SITES: usize = 12;
pub const MAX_BLOCK_STRINGS: usize = 4096;
pub const MAX_COMPRESSED_DIM: usize = 1024;
const MAX_PARTIAL_PRODUCTS: usize = 1 << 22;
const KRAUS_CUTOFF: f64 = 1e-14;
const SUPPORT_CUTOFF: f64 = 1e-13;

/// `v` sections of `l` live sites followed by `s` spacer sites, on a ring of
/// `n` sites; whatever is left over trails the last section.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub l: usize,
    pub s: usize,
    pub v: usize,
    pub n: usize,
}

impl BlockLayout {
    pub fn new(l: usize, s: usize, v: usize, n: usize) -> Result<Self> {
        if l == 0 || s == 0 || v == 0 || n == 0 {
            return invalid("block layout sizes must be positive");
        }
        if v * (l + s) > n {
            return invalid(format!("v(l+s) = {} exceeds chain length {n}", v * (l + s)));
        }
        Ok(Self { l, s, v, n })
    }

    pub fn block_sites(&self, j: usize) -> std::ops::Range<usize> {
        let start = j * (self.l + self.s);
        start..start + self.l
    }

    /// Length of the traced stretch after block `j`.
    fn gap_after(&self, j: usize) -> usize {
        if j + 1 < self.v {
            self.s
        } else {
            self.n - self.v * self.l - (self.v - 1) * self.s
        }
    }
}

/// Kraus operators of a superoperator given as `Σ K ⊗ K*`.
fn kraus(superop: &CMatrix, bond: usize) -> Vec<CMatrix> {
    let choi = CMatrix::from_fn(bond * bond, bond * bond, |r, c| {
        let (i, j) = (r / bond, r % bond);
        let (ip, jp) = (c / bond, c % bond);
        superop[(i * bond + ip, j * bond + jp)]
    });
    let choi = (&choi + choi.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(choi);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    (0..bond * bond)
        .filter(|&k| eig.eigenvalues[k] > KRAUS_CUTOFF * top)
        .map(|k| {
            let w = eig.eigenvalues[k].sqrt();
            CMatrix::from_fn(bond, bond, |i, j| eig.eigenvectors[(i * bond + j, k)] * w)
        })
        .collect()
}

fn gap_kraus(norm: &Normalized, len: usize) -> Vec<CMatrix> {
    kraus(&matrix_power(&norm.transfer, len), norm.qs[0].nrows())
}

enum Step<'a> {
    /// Operators indexed by a physical (row) label.
    Row(&'a [CMatrix]),
    /// Operators indexed by an environment (column) label.
    Col(&'a [CMatrix]),
}

/// `Ψ[row, col] = tr(Π steps)` with rows and columns as mixed-radix strings,
/// earliest step most significant.
fn contract(steps: &[Step], bond: usize) -> Result<CMatrix> {
    let (mut rows, mut cols) = (1usize, 1usize);
    for st in steps {
        match st {
            Step::Row(ops) => rows *= ops.len(),
            Step::Col(ops) => cols *= ops.len(),
        }
        if rows * cols > MAX_PARTIAL_PRODUCTS {
            return Err(Error::EnumerationTooLarge(format!("{rows}x{cols} purification entries")));
        }
    }
    let (mut rows, mut cols) = (1usize, 1usize);
    let mut prods = vec![CMatrix::identity(bond, bond)];
    for st in steps {
        let mut next = Vec::new();
        match st {
            Step::Row(ops) => {
                for r in 0..rows {
                    for op in ops.iter() {
                        for c in 0..cols {
                            next.push(&prods[r * cols + c] * op);
                        }
                    }
                }
                rows *= ops.len();
            }
            Step::Col(ops) => {
                for r in 0..rows {
                    for c in 0..cols {
                        for op in ops.iter() {
                            next.push(&prods[r * cols + c] * op);
                        }
                    }
                }
                cols *= ops.len();
            }
        }
        prods = next;
    }
    Ok(CMatrix::from_fn(rows, cols, |r, c| prods[r * cols + c].trace()))
}

fn density_from(psi: &CMatrix) -> Result<CMatrix> {
    let norm = psi.norm_squared();
    if !(norm > 1e-300) {
        return Err(Error::DegenerateMps("reduced state vanishes".into()));
    }
    let rho = (psi * psi.adjoint()).unscale(norm);
    Ok((&rho + rho.adjoint()).scale(0.5))
}

/// Reduced density matrix of the listed sites (strictly increasing) of an
/// `n`-site periodic chain.
pub fn reduced_density_sites(spec: &MpsSpec, n: usize, sites: &[usize]) -> Result<CMatrix> {
    if sites.windows(2).any(|w| w[0] >= w[1]) || sites.last().is_some_and(|&s| s >= n) {
        return invalid("sites must be strictly increasing and inside the chain");
    }
    if sites.len() > MAX_DENSE_SITES || spec.d().pow(sites.len() as u32) > MAX_BLOCK_STRINGS {
        return Err(Error::EnumerationTooLarge(format!("{} retained sites", sites.len())));
    }
    if sites.is_empty() {
        return Ok(CMatrix::identity(1, 1));
    }
    let norm = spec.normalized();
    let mut gaps = Vec::new();
    for w in sites.windows(2) {
        gaps.push(w[1] - w[0] - 1);
    }
    gaps.push(n - 1 - sites[sites.len() - 1] + sites[0]);
    let kraus_sets: Vec<Vec<CMatrix>> = gaps.iter().map(|&g| gap_kraus(&norm, g)).collect();
    let mut steps = Vec::new();
    for (ks, &g) in kraus_sets.iter().zip(&gaps) {
        steps.push(Step::Row(&norm.qs));
        if g > 0 {
            steps.push(Step::Col(ks));
        }
    }
    density_from(&contract(&steps, spec.bond())?)
}

/// Reduced state of the live blocks listed in `which` (ascending).
pub fn reduced_block_density(spec: &MpsSpec, layout: &BlockLayout, which: &[usize]) -> Result<CMatrix> {
    if which.windows(2).any(|w| w[0] >= w[1]) || which.last().is_some_and(|&j| j >= layout.v) {
        return invalid("block indices must be strictly increasing and below v");
    }
    let sites: Vec<usize> = which.iter().flat_map(|&j| layout.block_sites(j)).collect();
    reduced_density_sites(spec, layout.n, &sites)
}

/// `‖AA†/‖A‖² - BB†/‖B‖²‖₁` through a QR factorization of `[A B]`.
pub(crate) fn trace_norm_difference(a: &CMatrix, b: &CMatrix) -> f64 {
    let a = a.unscale(a.norm());
    let b = b.unscale(b.norm());
    let mut w = CMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    w.columns_mut(0, a.ncols()).copy_from(&a);
    w.columns_mut(a.ncols(), b.ncols()).copy_from(&b);
    let r = w.qr().r();
    let mut rj = r.clone();
    for mut col in rj.column_iter_mut().skip(a.ncols()) {
        col.neg_mut();
    }
    trace_norm_hermitian(&(&rj * r.adjoint()))
}

/// Purification of a single block of `l` sites on an `n`-site ring, along
/// with the ordered block products it was built from.
fn single_block(norm: &Normalized, l: usize, n: usize) -> (Vec<CMatrix>, CMatrix) {
    let prods = string_products(&norm.qs, l);
    let env = gap_kraus(norm, n - l);
    let psi = CMatrix::from_fn(prods.len(), env.len(), |x, k| (&prods[x] * &env[k]).trace());
    (prods, psi)
}

fn check_block(spec: &MpsSpec, l: usize) -> Result<()> {
    if l == 0 {
        return invalid("block length must be positive");
    }
    if (l as f64) * (spec.d() as f64).log2() > (MAX_BLOCK_STRINGS as f64).log2() + 1e-9 {
        return Err(Error::EnumerationTooLarge(format!("{}^{l} block strings", spec.d())));
    }
    Ok(())
}

fn kron_power(m: &CMatrix, v: usize) -> CMatrix {
    (1..v).fold(m.clone(), |acc, _| acc.kronecker(m))
}

pub fn block_product_deviation(spec: &MpsSpec, layout: &BlockLayout) -> Result<f64> {
    block_product_deviation_with(spec, layout, Execution::default())
}

/// `‖ρ_{L1…Lv} - (ρ^l_N)^{⊗v}‖₁`.
///
/// Every block marginal of the joint state equals the single-block state, so
/// the joint state lives on the product of single-block supports. Both
/// operators are compressed onto that product before the trace norm, which
/// keeps the cost independent of `v·l`.
pub fn block_product_deviation_with(spec: &MpsSpec, layout: &BlockLayout, exec: Execution) -> Result<f64> {
    check_block(spec, layout.l)?;
    let norm = spec.normalized();
    let (prods, psi) = single_block(&norm, layout.l, layout.n);

    let svd = psi.clone().svd(true, false);
    let u = svd.u.as_ref().expect("requested U");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let support: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > SUPPORT_CUTOFF * top)
        .collect();
    let basis = CMatrix::from_fn(psi.nrows(), support.len(), |x, a| u[(x, support[a])]);

    let rank = support.len();
    let env_ranks: Vec<usize> = (0..layout.v).map(|j| gap_kraus(&norm, layout.gap_after(j)).len()).collect();
    let joint_cols: usize = env_ranks.iter().product();
    let prod_cols = psi.ncols().pow(layout.v as u32);
    let rows = rank.pow(layout.v as u32);
    if rows > MAX_COMPRESSED_DIM || joint_cols > MAX_COMPRESSED_DIM || prod_cols > MAX_COMPRESSED_DIM {
        return Err(Error::EnumerationTooLarge(format!(
            "compressed dimensions {rows}x({joint_cols}+{prod_cols}) exceed {MAX_COMPRESSED_DIM}"
        )));
    }

    let bond = spec.bond();
    let compressed: Vec<CMatrix> = exec.map_range(rank, |a| {
        prods
            .iter()
            .enumerate()
            .fold(CMatrix::zeros(bond, bond), |acc, (x, p)| acc + p * basis[(x, a)].conj())
    });
    let gaps: Vec<Vec<CMatrix>> = (0..layout.v).map(|j| gap_kraus(&norm, layout.gap_after(j))).collect();
    let mut steps = Vec::new();
    for ks in &gaps {
        steps.push(Step::Row(&compressed));
        steps.push(Step::Col(ks));
    }
    let joint = contract(&steps, bond)?;
    let single = basis.adjoint() * &psi;
    Ok(trace_norm_difference(&joint, &kron_power(&single, layout.v)))
}

/// `‖ρ^l_{l+Δ} - ρ^l_{N_big}‖₁` for the first `l` sites of two rings.
pub fn longshort_deviation(spec: &MpsSpec, l: usize, delta: usize, n_big: usize) -> Result<f64> {
    check_block(spec, l)?;
    if l > 10 {
        return Err(Error::EnumerationTooLarge(format!("block length {l} > 10")));
    }
    if delta == 0 || l + delta > n_big {
        return invalid(format!("need 0 < Δ and l+Δ <= N_big, got l={l}, Δ={delta}, N_big={n_big}"));
    }
    let norm = spec.normalized();
    let (_, short) = single_block(&norm, l, l + delta);
    let (_, long) = single_block(&norm, l, n_big);
    Ok(trace_norm_difference(&short, &long))
}

#[cfg(test)]
mod tests {
    use crate::linalg::C64;
    use super::*;
    use crate::mps::{mps_state_vector, transfer_spectrum, wolf_mps};
    use crate::numerics::fit_exponential_decay;
    use nalgebra::DMatrix;

    fn dense_partial_trace(psi: &[C64], n: usize, sites: &[usize]) -> CMatrix {
        let k = sites.len();
        let rest: Vec<usize> = (0..n).filter(|i| !sites.contains(i)).collect();
        let index = |kept: usize, other: usize| {
            let mut idx = 0usize;
            for (p, &s) in sites.iter().enumerate() {
                idx |= ((kept >> (k - 1 - p)) & 1) << (n - 1 - s);
            }
            for (p, &s) in rest.iter().enumerate() {
                idx |= ((other >> (rest.len() - 1 - p)) & 1) << (n - 1 - s);
            }
            idx
        };
        CMatrix::from_fn(1 << k, 1 << k, |x, y| {
            (0..1usize << rest.len()).map(|z| psi[index(x, z)] * psi[index(y, z)].conj()).sum()
        })
    }

    fn assert_state(rho: &CMatrix) {
        assert!((rho.trace().re - 1.0).abs() < 1e-10);
        assert!((rho - rho.adjoint()).iter().all(|z| z.norm() < 1e-12));
        let eig = crate::linalg::hermitian_eigenvalues(rho);
        assert!(eig.iter().all(|&e| e > -1e-10));
    }

    fn product_env() -> MpsSpec {
        let q = DMatrix::identity(2, 2) / 2f64.sqrt();
        MpsSpec::from_real(&[q.clone(), q]).unwrap()
    }

    #[test]
    fn kraus_reproduces_superoperator() {
        let norm = wolf_mps(0.7).normalized();
        for len in [0, 1, 3] {
            let target = matrix_power(&norm.transfer, len);
            let ks = gap_kraus(&norm, len);
            let sum = ks.iter().fold(CMatrix::zeros(4, 4), |acc, k| acc + crate::linalg::doubled(k));
            assert!((sum - target).norm() < 1e-12);
        }
    }

    #[test]
    fn whole_chain_is_pure() {
        let spec = wolf_mps(0.5);
        let layout = BlockLayout::new(6, 1, 1, 7).unwrap();
        let rho = reduced_density_sites(&spec, 6, &[0, 1, 2, 3, 4, 5]).unwrap();
        let psi = mps_state_vector(&spec, 6).unwrap();
        let v = nalgebra::DVector::from_vec(psi);
        assert!((&rho - &v * v.adjoint()).norm() < 1e-12);
        assert_state(&reduced_block_density(&spec, &layout, &[0]).unwrap());
    }

    #[test]
    fn product_environment_marginal() {
        let rho = reduced_density_sites(&product_env(), 10, &[2, 3, 4]).unwrap();
        for i in 0..8 {
            assert!((rho[(i, i)].re - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_partial_trace() {
        let spec = wolf_mps(0.5);
        let layout = BlockLayout::new(3, 2, 2, 12).unwrap();
        let rho = reduced_block_density(&spec, &layout, &[0, 1]).unwrap();
        let psi = mps_state_vector(&spec, 12).unwrap();
        let dense = dense_partial_trace(&psi, 12, &[0, 1, 2, 5, 6, 7]);
        assert!((&rho - &dense).iter().all(|z| z.norm() < 1e-10));
        assert_state(&rho);
        let rho2 = reduced_block_density(&spec, &layout, &[1]).unwrap();
        let dense2 = dense_partial_trace(&psi, 12, &[5, 6, 7]);
        assert!((&rho2 - &dense2).iter().all(|z| z.norm() < 1e-10));
        // Odd placements exercise the wrap-around gap.
        let rho3 = reduced_density_sites(&spec, 12, &[1, 4, 11]).unwrap();
        assert!((&rho3 - dense_partial_trace(&psi, 12, &[1, 4, 11])).iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn nested_consistency() {
        let spec = wolf_mps(-0.8);
        let layout = BlockLayout::new(2, 3, 2, 14).unwrap();
        let both = reduced_block_density(&spec, &layout, &[0, 1]).unwrap();
        let first = reduced_block_density(&spec, &layout, &[0]).unwrap();
        let traced = CMatrix::from_fn(4, 4, |x, y| (0..4).map(|z| both[(x * 4 + z, y * 4 + z)]).sum());
        assert!((traced - first).iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn block_deviation_matches_dense() {
        let spec = wolf_mps(0.5);
        let layout = BlockLayout::new(3, 2, 2, 12).unwrap();
        let rho = reduced_block_density(&spec, &layout, &[0, 1]).unwrap();
        let single = reduced_density_sites(&spec, 12, &[0, 1, 2]).unwrap();
        let dense = trace_norm_hermitian(&(rho - single.kronecker(&single)));
        let fast = block_product_deviation(&spec, &layout).unwrap();
        assert!((dense - fast).abs() < 1e-10, "{dense} vs {fast}");
    }

    #[test]
    fn block_deviation_trivial_cases() {
        let spec = wolf_mps(0.5);
        assert!(block_product_deviation(&spec, &BlockLayout::new(3, 2, 1, 20).unwrap()).unwrap() < 1e-12);
        assert!(block_product_deviation(&product_env(), &BlockLayout::new(3, 2, 3, 20).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn block_deviation_decays_with_spacer() {
        let spec = wolf_mps(0.5);
        let rate = transfer_spectrum(&spec).unwrap().predicted_rate();
        let pts: Vec<(f64, f64)> = (1..=6)
            .map(|s| {
                let layout = BlockLayout::new(3, s, 2, 60).unwrap();
                (s as f64, block_product_deviation(&spec, &layout).unwrap())
            })
            .collect();
        assert!((pts[0].1 - 1.0 / 9.0).abs() < 1e-3);
        let fit = fit_exponential_decay(&pts).unwrap();
        assert!((fit.rate / rate - 1.0).abs() < 0.2);
        let seq = block_product_deviation_with(&spec, &BlockLayout::new(3, 2, 3, 60).unwrap(), Execution::Sequential);
        let par = block_product_deviation_with(&spec, &BlockLayout::new(3, 2, 3, 60).unwrap(), Execution::Parallel);
        assert_eq!(seq.unwrap(), par.unwrap());
    }

    #[test]
    fn longshort_examples() {
        let spec = wolf_mps(0.5);
        assert!(longshort_deviation(&spec, 4, 36, 40).unwrap() < 1e-12);
        assert!(longshort_deviation(&product_env(), 4, 3, 40).unwrap() < 1e-12);
        let vals: Vec<f64> = (1..=8).map(|d| longshort_deviation(&spec, 4, d, 40).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        assert!((vals[1] - 0.03698).abs() < 1e-4);
        let pts: Vec<(f64, f64)> = vals.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)).collect();
        let fit = fit_exponential_decay(&pts).unwrap();
        assert!((fit.rate - (1f64 / 3.0).ln()).abs() < 0.05 && fit.r_squared > 0.99);
        assert!(longshort_deviation(&spec, 11, 2, 40).is_err());
    }
}
