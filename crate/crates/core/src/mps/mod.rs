//! Matrix-product-state environments.
//!
//! The dephased environment has `p_x = |tr(Q_{x1}…Q_{xN})|² / C(N)` with
//! `C(N) = tr M^N`, `M = Σ_k Q_k ⊗ Q_k*`. Site 0 is the most significant
//! digit of a string index.

mod blocks;

pub use blocks::{
    block_product_deviation, block_product_deviation_with, longshort_deviation, reduced_block_density,
    reduced_density_sites, BlockLayout,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::ising::{self, IsingParams};
use crate::linalg::{doubled, eigenvalues, CMatrix, C64};
use crate::numerics::{entropy_of_weights, entropy_rate_estimate, Base, FitLine, ProbDist};

/// Largest number of strings `diag_distribution` will enumerate.
pub const MAX_STRINGS: usize = 1 << 20;
/// Second-to-first singular value ratio below which a doubled matrix counts as rank one.
pub const RANK_ONE_TOLERANCE: f64 = 1e-10;
pub const NILPOTENT_TOLERANCE: f64 = 1e-12;
pub const C_ZERO_CLAMP: f64 = 1e-14;
pub const FIXED_POINT_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMps", into = "RawMps")]
pub struct MpsSpec {
    d: usize,
    bond: usize,
    matrices: Vec<CMatrix>,
}

#[derive(Serialize, Deserialize)]
struct RawMps {
    matrices: Vec<Vec<Vec<[f64; 2]>>>,
}

impl TryFrom<RawMps> for MpsSpec {
    type Error = Error;

    fn try_from(raw: RawMps) -> Result<Self> {
        let mut mats = Vec::with_capacity(raw.matrices.len());
        for (k, rows) in raw.matrices.iter().enumerate() {
            let n = rows.len();
            if n == 0 || rows.iter().any(|r| r.len() != n) {
                return invalid(format!("matrix {k} is not square"));
            }
            mats.push(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])));
        }
        MpsSpec::new(mats)
    }
}

impl From<MpsSpec> for RawMps {
    fn from(spec: MpsSpec) -> Self {
        let matrices = spec
            .matrices
            .iter()
            .map(|q| (0..q.nrows()).map(|i| (0..q.ncols()).map(|j| [q[(i, j)].re, q[(i, j)].im]).collect()).collect())
            .collect();
        RawMps { matrices }
    }
}

/// `Q_k` rescaled so that the transfer operator has spectral radius one.
#[derive(Clone, Debug)]
pub(crate) struct Normalized {
    pub qs: Vec<CMatrix>,
    pub transfer: CMatrix,
}

impl MpsSpec {
    pub fn new(matrices: Vec<CMatrix>) -> Result<Self> {
        let d = matrices.len();
        if d < 2 {
            return invalid(format!("need at least 2 symbol matrices, got {d}"));
        }
        let bond = matrices[0].nrows();
        if bond == 0 {
            return invalid("bond dimension must be positive");
        }
        for (k, q) in matrices.iter().enumerate() {
            if q.nrows() != bond || q.ncols() != bond {
                return invalid(format!("matrix {k} is {}x{}, expected {bond}x{bond}", q.nrows(), q.ncols()));
            }
            if q.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return invalid(format!("matrix {k} has non-finite entries"));
            }
        }
        let spec = Self { d, bond, matrices };
        spec.spectral_radius()?;
        Ok(spec)
    }

    pub fn from_real(matrices: &[DMatrix<f64>]) -> Result<Self> {
        Self::new(matrices.iter().map(|m| m.map(|x| C64::new(x, 0.0))).collect())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn bond(&self) -> usize {
        self.bond
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn transfer_op(&self) -> TransferOp {
        let terms: Vec<CMatrix> = self.matrices.iter().map(doubled).collect();
        let dim = self.bond * self.bond;
        let matrix = terms.iter().fold(CMatrix::zeros(dim, dim), |acc, a| acc + a);
        TransferOp { dim, matrix, terms }
    }

    /// Gauge transform `Q_k -> S Q_k S^{-1}`; leaves every string trace unchanged.
    pub fn gauge(&self, s: &CMatrix) -> Result<Self> {
        let inv = s.clone().try_inverse().ok_or_else(|| Error::InvalidInput("gauge matrix is singular".into()))?;
        Self::new(self.matrices.iter().map(|q| s * q * &inv).collect())
    }

    fn spectral_radius(&self) -> Result<f64> {
        let op = self.transfer_op();
        let r = eigenvalues(&op.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(r > 1e-300) || !r.is_finite() {
            return Err(Error::DegenerateMps(format!("transfer operator has spectral radius {r}")));
        }
        Ok(r)
    }

    pub(crate) fn normalized(&self) -> Normalized {
        let lambda = self.spectral_radius().expect("validated at construction");
        let scale = C64::new(1.0 / lambda.sqrt(), 0.0);
        let qs: Vec<CMatrix> = self.matrices.iter().map(|q| q * scale).collect();
        let transfer = self.transfer_op().matrix / C64::new(lambda, 0.0);
        Normalized { qs, transfer }
    }
}

/// Doubled transfer operator `M = Σ_k A_k`, `A_k = Q_k ⊗ Q_k*`.
#[derive(Clone, Debug)]
pub struct TransferOp {
    pub dim: usize,
    pub matrix: CMatrix,
    pub terms: Vec<CMatrix>,
}

fn check_enumeration(d: usize, n: usize) -> Result<()> {
    if n == 0 {
        return invalid("chain length must be positive");
    }
    let too_big = (n as f64) * (d as f64).log2() > (MAX_STRINGS as f64).log2() + 1e-9;
    if too_big {
        return Err(Error::EnumerationTooLarge(format!("{d}^{n} strings (limit {MAX_STRINGS})")));
    }
    Ok(())
}

fn push_traces(qs: &[CMatrix], prod: &CMatrix, remaining: usize, out: &mut Vec<C64>) {
    if remaining == 0 {
        out.push(prod.trace());
        return;
    }
    for q in qs {
        push_traces(qs, &(prod * q), remaining - 1, out);
    }
}

/// `tr(Q_{x1}…Q_{xn})` for every string, in index order.
pub(crate) fn string_traces(qs: &[CMatrix], n: usize, exec: Execution) -> Vec<C64> {
    let d = qs.len();
    let bond = qs[0].nrows();
    let depth = (1..=n).find(|&k| d.pow(k as u32) >= 256).unwrap_or(n);
    let tail = n - depth;
    let chunks = exec.map_range(d.pow(depth as u32), |code| {
        let mut prod = CMatrix::identity(bond, bond);
        for pos in (0..depth).rev() {
            prod *= &qs[(code / d.pow(pos as u32)) % d];
        }
        let mut out = Vec::with_capacity(d.pow(tail as u32));
        push_traces(qs, &prod, tail, &mut out);
        out
    });
    chunks.concat()
}

/// Ordered products `Q_{x1}…Q_{xn}` for every string of length `n`.
pub(crate) fn string_products(qs: &[CMatrix], n: usize) -> Vec<CMatrix> {
    let bond = qs[0].nrows();
    let mut prods = vec![CMatrix::identity(bond, bond)];
    for _ in 0..n {
        prods = prods.iter().flat_map(|p| qs.iter().map(move |q| p * q)).collect();
    }
    prods
}

/// `C(N)/λ₁^N = Σ_i (λ_i/λ₁)^N` from the transfer spectrum.
fn normalization(norm: &Normalized, n: usize) -> Result<f64> {
    let c: C64 = eigenvalues(&norm.transfer).iter().map(|z| z.powu(n as u32)).sum();
    if !(c.re > 1e-300) || c.im.abs() > 1e-10 * c.re.abs().max(1e-300) {
        return Err(Error::DegenerateMps(format!("normalization C({n}) = {c}")));
    }
    Ok(c.re)
}

pub fn diag_distribution(spec: &MpsSpec, n: usize) -> Result<ProbDist> {
    diag_distribution_with(spec, n, Execution::default())
}

pub fn diag_distribution_with(spec: &MpsSpec, n: usize, exec: Execution) -> Result<ProbDist> {
    check_enumeration(spec.d, n)?;
    let norm = spec.normalized();
    let c = normalization(&norm, n)?;
    let amps = string_traces(&norm.qs, n, exec);
    ProbDist::new(amps.iter().map(|a| a.norm_sqr() / c).collect())
}

/// Shannon entropy (bits) of the dephased `n`-site distribution.
pub fn diag_entropy_bits(spec: &MpsSpec, n: usize, exec: Execution) -> Result<f64> {
    let p = diag_distribution_with(spec, n, exec)?;
    Ok(entropy_of_weights(p.values(), Base::Two))
}

/// Normalized state vector `ψ_x ∝ tr(Q_{x1}…Q_{xn})`.
pub fn mps_state_vector(spec: &MpsSpec, n: usize) -> Result<Vec<C64>> {
    check_enumeration(spec.d, n)?;
    let norm = spec.normalized();
    let amps = string_traces(&norm.qs, n, Execution::default());
    let total: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if !(total > 1e-150) {
        return Err(Error::DegenerateMps(format!("state norm {total} on {n} sites")));
    }
    Ok(amps.into_iter().map(|a| a / total).collect())
}

/// Per-symbol capacity from the slope of enumerated entropies over `ns`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnumerationCapacity {
    pub capacity: f64,
    pub fit: FitLine,
    pub entropies: Vec<(usize, f64)>,
}

pub fn enumeration_capacity(spec: &MpsSpec, ns: &[usize], exec: Execution) -> Result<EnumerationCapacity> {
    let entropies: Vec<(usize, f64)> = ns
        .iter()
        .map(|&n| diag_entropy_bits(spec, n, exec).map(|s| (n, s)))
        .collect::<Result<_>>()?;
    let points: Vec<(f64, f64)> = entropies.iter().map(|&(n, s)| (n as f64, s)).collect();
    let fit = entropy_rate_estimate(&points)?;
    let capacity = ((spec.d as f64).log2() - fit.slope).clamp(0.0, (spec.d as f64).log2());
    Ok(EnumerationCapacity { capacity, fit, entropies })
}

/// Left and right fixed points of the normalized transfer operator, scaled
/// so that `L·R = 1`.
fn fixed_points(norm: &Normalized) -> Result<(CMatrix, CMatrix)> {
    let dim = norm.transfer.nrows();
    let null = |m: CMatrix| -> CMatrix {
        let svd = m.svd(false, true);
        let vt = svd.v_t.expect("requested V^T");
        let k = (0..svd.singular_values.len())
            .min_by(|&i, &j| svd.singular_values[i].partial_cmp(&svd.singular_values[j]).unwrap())
            .unwrap();
        CMatrix::from_iterator(vt.ncols(), 1, vt.row(k).iter().map(|z| z.conj()))
    };
    let eye = CMatrix::identity(dim, dim);
    let right = null(&norm.transfer - &eye);
    let left = null(norm.transfer.transpose() - &eye);
    let overlap = (left.transpose() * &right)[(0, 0)];
    if overlap.norm() < 1e-12 {
        return Err(Error::DegenerateMps("fixed points are orthogonal".into()));
    }
    Ok((left.transpose() / overlap, right))
}

fn push_block_weights(terms: &[CMatrix], row: &CMatrix, right: &CMatrix, remaining: usize, out: &mut Vec<f64>) {
    if remaining == 0 {
        out.push((row * right)[(0, 0)].re);
        return;
    }
    for a in terms {
        push_block_weights(terms, &(row * a), right, remaining - 1, out);
    }
}

/// Dephased distribution of `l` consecutive sites of the infinite chain,
/// `p_x = L·A_{x1}…A_{xl}·R`. Needs a unique fixed point.
pub fn block_diag_distribution(spec: &MpsSpec, l: usize, exec: Execution) -> Result<ProbDist> {
    check_enumeration(spec.d, l)?;
    let spectrum = transfer_spectrum(spec)?;
    if !spectrum.unique_fixed_point {
        return Err(Error::DegenerateMps("transfer operator has no unique fixed point".into()));
    }
    let norm = spec.normalized();
    let (left, right) = fixed_points(&norm)?;
    let terms: Vec<CMatrix> = norm.qs.iter().map(doubled).collect();
    let d = spec.d;
    let depth = (1..=l).find(|&k| d.pow(k as u32) >= 256).unwrap_or(l);
    let chunks = exec.map_range(d.pow(depth as u32), |code| {
        let mut row = left.clone();
        for pos in (0..depth).rev() {
            row *= &terms[(code / d.pow(pos as u32)) % d];
        }
        let mut out = Vec::new();
        push_block_weights(&terms, &row, &right, l - depth, &mut out);
        out
    });
    ProbDist::new(chunks.concat())
}

/// Capacity from the slope of infinite-chain block entropies. Converges much
/// faster in `l` than the ring estimate, whose corrections go like `N (λ₂/λ₁)^N`.
pub fn block_enumeration_capacity(spec: &MpsSpec, ls: &[usize], exec: Execution) -> Result<EnumerationCapacity> {
    let entropies: Vec<(usize, f64)> = ls
        .iter()
        .map(|&l| block_diag_distribution(spec, l, exec).map(|p| (l, entropy_of_weights(p.values(), Base::Two))))
        .collect::<Result<_>>()?;
    let points: Vec<(f64, f64)> = entropies.iter().map(|&(n, s)| (n as f64, s)).collect();
    let fit = entropy_rate_estimate(&points)?;
    let capacity = ((spec.d as f64).log2() - fit.slope).clamp(0.0, (spec.d as f64).log2());
    Ok(EnumerationCapacity { capacity, fit, entropies })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rank1Params {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Rank1Params {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if ![a, b, c].iter().all(|x| x.is_finite()) {
            return invalid("rank-1 parameters must be finite");
        }
        if !(a > 0.0 && b > 0.0) {
            return invalid(format!("a and b must be positive, got a={a}, b={b}"));
        }
        if c < 0.0 {
            return invalid(format!("c must be non-negative, got {c}"));
        }
        Ok(Self { a, b, c })
    }
}

fn rank_one_ratio(a: &CMatrix) -> f64 {
    let mut sv: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    if sv[0] == 0.0 {
        return 0.0;
    }
    sv.get(1).map_or(0.0, |s| s / sv[0])
}

pub fn rank1_params(spec: &MpsSpec) -> Result<Rank1Params> {
    if spec.d != 2 {
        return invalid(format!("rank-1 reduction needs d = 2, got {}", spec.d));
    }
    let op = spec.transfer_op();
    let (big_a, big_b) = (&op.terms[0], &op.terms[1]);
    for t in [big_a, big_b] {
        let ratio = rank_one_ratio(t);
        if ratio > RANK_ONE_TOLERANCE {
            return Err(Error::NotRank1 { ratio });
        }
        let tr = t.trace();
        if tr.norm() <= NILPOTENT_TOLERANCE {
            return Err(Error::Nilpotent { trace: tr.norm() });
        }
    }
    let a = big_a.trace().re;
    let b = big_b.trace().re;
    let mut c = (big_a * big_b).trace().re / (a * b);
    if c.abs() <= C_ZERO_CLAMP {
        c = 0.0;
    }
    Rank1Params::new(a, b, c)
}

/// Inverse map onto Ising parameters at `β = 1`:
/// `J = (ln a + ln b)/2`, `M = (ln a - ln b)/2`, `D = -(ln a + ln b) - ln(c)/2`.
pub fn ising_from_rank1(p: &Rank1Params) -> Result<IsingParams> {
    if p.c == 0.0 {
        return Err(Error::DeterministicLimit);
    }
    let (la, lb) = (p.a.ln(), p.b.ln());
    IsingParams::new(1.0, (la + lb) / 2.0, (la - lb) / 2.0, -(la + lb) - p.c.ln() / 2.0)
}

/// Ising chain whose Boltzmann weights equal the string weights
/// `a^{n0} b^{n1} c^K` up to normalization: `J = -ln(c)/4`, `M = ln(a/b)/2`.
pub fn rank1_effective_ising(p: &Rank1Params) -> Result<IsingParams> {
    if p.c == 0.0 {
        return Err(Error::DeterministicLimit);
    }
    IsingParams::new(1.0, -p.c.ln() / 4.0, (p.a / p.b).ln() / 2.0, 0.0)
}

pub fn capacity_rank1(p: &Rank1Params) -> Result<f64> {
    if p.c == 0.0 {
        return Ok(1.0);
    }
    ising::capacity(&rank1_effective_ising(p)?)
}

/// Canonical rank-1 matrices realizing `(a, b, c)`.
pub fn canonical_rank1_mps(p: &Rank1Params) -> MpsSpec {
    let off = (p.c * p.a * p.b).powf(0.25);
    let q0 = DMatrix::from_row_slice(2, 2, &[p.a.sqrt(), off, 0.0, 0.0]);
    let q1 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, off, p.b.sqrt()]);
    MpsSpec::from_real(&[q0, q1]).expect("canonical matrices are valid")
}

/// Number of maximal runs of zeros on the ring (the exponent of `c`).
pub fn zero_blocks(x: &[u8]) -> usize {
    let n = x.len();
    (0..n).filter(|&i| x[i] == 0 && x[(i + 1) % n] == 1).count()
}

/// `a^{n0} b^{n1} c^K / C(N)` with `C(N) = tr W^N`, `W = [[a, √(cab)], [√(cab), b]]`.
pub fn rank1_string_probability(p: &Rank1Params, x: &[u8]) -> Result<f64> {
    let n = x.len();
    if n == 0 || x.iter().any(|&s| s > 1) {
        return invalid("string must be non-empty and binary");
    }
    let n0 = x.iter().filter(|&&s| s == 0).count() as f64;
    let n1 = n as f64 - n0;
    let k = zero_blocks(x) as f64;
    let off = (p.c * p.a * p.b).sqrt();
    let mean = (p.a + p.b) / 2.0;
    let rad = (((p.a - p.b) / 2.0).powi(2) + off * off).sqrt();
    let (hi, lo) = (mean + rad, mean - rad);
    let ln_c = n as f64 * hi.ln() + (lo / hi).powi(n as i32).ln_1p();
    let ln_w = n0 * p.a.ln() + n1 * p.b.ln() + if k > 0.0 { k * p.c.ln() } else { 0.0 };
    Ok((ln_w - ln_c).exp())
}

/// `Q0 = [[0,0],[1,1]]`, `Q1 = [[1,g],[0,0]]`.
pub fn wolf_mps(g: f64) -> MpsSpec {
    let q0 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]);
    let q1 = DMatrix::from_row_slice(2, 2, &[1.0, g, 0.0, 0.0]);
    MpsSpec::from_real(&[q0, q1]).expect("wolf matrices are valid")
}

pub fn wolf_capacity(g: f64) -> Result<f64> {
    capacity_rank1(&rank1_params(&wolf_mps(g))?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferSpectrum {
    /// Eigenvalue moduli divided by the largest, descending.
    pub moduli: Vec<f64>,
    pub spectral_radius: f64,
    pub unique_fixed_point: bool,
    pub gap: f64,
}

impl TransferSpectrum {
    pub fn second(&self) -> f64 {
        self.moduli.get(1).copied().unwrap_or(0.0)
    }

    /// `ln λ₂`, the predicted decay rate per site.
    pub fn predicted_rate(&self) -> f64 {
        self.second().ln()
    }
}

pub fn transfer_spectrum(spec: &MpsSpec) -> Result<TransferSpectrum> {
    transfer_spectrum_with_threshold(spec, FIXED_POINT_THRESHOLD)
}

pub fn transfer_spectrum_with_threshold(spec: &MpsSpec, threshold: f64) -> Result<TransferSpectrum> {
    let op = spec.transfer_op();
    let mut moduli: Vec<f64> = eigenvalues(&op.matrix).iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let radius = moduli[0];
    if !(radius > 0.0) {
        return Err(Error::DegenerateMps("zero transfer operator".into()));
    }
    moduli.iter_mut().for_each(|m| *m /= radius);
    let at_one = moduli.iter().filter(|&&m| (m - 1.0).abs() <= threshold).count();
    let gap = 1.0 - moduli.get(1).copied().unwrap_or(0.0);
    Ok(TransferSpectrum { moduli, spectral_radius: radius, unique_fixed_point: at_one == 1, gap })
}
