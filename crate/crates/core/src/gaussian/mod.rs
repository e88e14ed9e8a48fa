//! Harmonic-chain (Gaussian) environments.
//!
//! `H = ½ Σ p² + ½ xᵀ V x` has ground covariance `γ = V^{-1/2} ⊕ V^{1/2}` in
//! the ordering `(x₁…x_m, p₁…p_m)`, with ħ = 1 and vanishing first moments.

mod precise;

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::linalg::{hermitian_eigenvalues, symmetric_eigen, C64};
use crate::numerics::{find_root_bisect, fit_exponential_decay, DecayFit};

pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
pub const UNCERTAINTY_TOLERANCE: f64 = 1e-8;
const PAIRING_TOLERANCE: f64 = 1e-10;
/// Samples at or below this are treated as exact zeros and left out of fits.
pub const ZERO_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialMatrix {
    v: DMatrix<f64>,
    bandwidth: usize,
    periodic: bool,
    min_eigenvalue: f64,
}

fn ring_distance(i: usize, j: usize, n: usize, periodic: bool) -> usize {
    let d = i.abs_diff(j);
    if periodic {
        d.min(n - d)
    } else {
        d
    }
}

impl PotentialMatrix {
    /// `V_ij = 0` whenever the (ring) distance is at least `bandwidth / 2`.
    pub fn from_matrix(v: DMatrix<f64>, bandwidth: usize, periodic: bool) -> Result<Self> {
        let n = v.nrows();
        if n == 0 || v.ncols() != n {
            return invalid("potential matrix must be square and non-empty");
        }
        if v.iter().any(|x| !x.is_finite()) {
            return invalid("potential matrix has non-finite entries");
        }
        let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for i in 0..n {
            for j in 0..n {
                if (v[(i, j)] - v[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale {
                    return invalid(format!("potential matrix not symmetric at ({i}, {j})"));
                }
                if 2 * ring_distance(i, j, n, periodic) >= bandwidth && v[(i, j)] != 0.0 {
                    return invalid(format!("entry ({i}, {j}) outside stated bandwidth {bandwidth}"));
                }
            }
        }
        let v = (&v + v.transpose()) * 0.5;
        let min_eigenvalue = symmetric_eigen(v.clone()).eigenvalues.min();
        if !(min_eigenvalue > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        Ok(Self { v, bandwidth, periodic, min_eigenvalue })
    }

    /// `V_ii = 1 + 2κ`, `V_{i,i±1} = -κ`.
    pub fn nearest_neighbor(n: usize, kappa: f64, periodic: bool) -> Result<Self> {
        if n < 3 {
            return invalid(format!("nearest-neighbour chain needs n >= 3, got {n}"));
        }
        if !kappa.is_finite() {
            return invalid("kappa must be finite");
        }
        let mut v = DMatrix::zeros(n, n);
        for i in 0..n {
            v[(i, i)] = 1.0 + 2.0 * kappa;
            if i + 1 < n || periodic {
                let j = (i + 1) % n;
                v[(i, j)] = -kappa;
                v[(j, i)] = -kappa;
            }
        }
        Self::from_matrix(v, 3, periodic)
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    gamma: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymplecticSpectrum {
    /// Descending.
    pub mu: Vec<f64>,
}

impl CovarianceMatrix {
    pub fn new(gamma: DMatrix<f64>) -> Result<Self> {
        let dim = gamma.nrows();
        if dim == 0 || !dim.is_multiple_of(2) || gamma.ncols() != dim {
            return Err(Error::InvalidCovariance(format!("{}x{} is not 2m x 2m", gamma.nrows(), gamma.ncols())));
        }
        let scale = gamma.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if (&gamma - gamma.transpose()).iter().any(|x| x.abs() > SYMMETRY_TOLERANCE * scale) {
            return Err(Error::InvalidCovariance("not symmetric".into()));
        }
        let cm = Self { gamma: (&gamma + gamma.transpose()) * 0.5 };
        let spectrum = cm.symplectic_eigenvalues()?;
        if let Some(&low) = spectrum.mu.last() {
            if low < 1.0 - UNCERTAINTY_TOLERANCE {
                return Err(Error::InvalidCovariance(format!("symplectic eigenvalue {low} < 1")));
            }
        }
        Ok(cm)
    }

    pub fn modes(&self) -> usize {
        self.gamma.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn x_block(&self) -> DMatrix<f64> {
        let m = self.modes();
        self.gamma.view((0, 0), (m, m)).into_owned()
    }

    pub fn p_block(&self) -> DMatrix<f64> {
        let m = self.modes();
        self.gamma.view((m, m), (m, m)).into_owned()
    }

    /// Positive halves of the spectrum of `iγσ`, computed from the Hermitian
    /// similar matrix `i γ^{1/2} σ γ^{1/2}`.
    pub fn symplectic_eigenvalues(&self) -> Result<SymplecticSpectrum> {
        let m = self.modes();
        if self.gamma.view((0, m), (m, m)).amax() == 0.0 {
            return self.block_diagonal_spectrum();
        }
        let eig = symmetric_eigen(self.gamma.clone());
        if eig.eigenvalues.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidCovariance(format!("γ not positive definite (min {})", eig.eigenvalues.min())));
        }
        let root = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
            * eig.eigenvectors.transpose();
        let sigma = DMatrix::from_fn(2 * m, 2 * m, |i, j| {
            if j == i + m {
                1.0
            } else if i == j + m {
                -1.0
            } else {
                0.0
            }
        });
        let a = &root * sigma * &root;
        let h = a.map(|x| C64::new(0.0, x));
        let mut vals = hermitian_eigenvalues(&h);
        vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let scale = vals[0].abs().max(1.0);
        for k in 0..m {
            if (vals[k] + vals[2 * m - 1 - k]).abs() > PAIRING_TOLERANCE * scale {
                return Err(Error::InvalidCovariance(format!("unpaired spectrum {} / {}", vals[k], vals[2 * m - 1 - k])));
            }
        }
        let mu = (0..m).map(|k| 0.5 * (vals[k] - vals[2 * m - 1 - k])).collect();
        Ok(SymplecticSpectrum { mu })
    }

    /// `μ² = eig(Lᵀ γ_p L)` with `γ_x = L Lᵀ`; keeps `μ ≈ 1` accurate for near-pure states.
    fn block_diagonal_spectrum(&self) -> Result<SymplecticSpectrum> {
        let chol = Cholesky::new(self.x_block())
            .ok_or_else(|| Error::InvalidCovariance("γ_x not positive definite".into()))?;
        let l = chol.l();
        let inner = l.transpose() * self.p_block() * &l;
        let inner = (&inner + inner.transpose()) * 0.5;
        let mut mu: Vec<f64> = symmetric_eigen(inner)
            .eigenvalues
            .iter()
            .map(|&w| if w > 0.0 { w.sqrt() } else { f64::NAN })
            .collect();
        if mu.iter().any(|m| m.is_nan()) {
            return Err(Error::InvalidCovariance("γ_p not positive definite".into()));
        }
        mu.sort_by(|x, y| y.partial_cmp(x).unwrap());
        Ok(SymplecticSpectrum { mu })
    }

    /// Principal submatrix on the listed modes.
    pub fn reduce(&self, sites: &[usize]) -> Result<Self> {
        let m = self.modes();
        if sites.is_empty() {
            return invalid("site subset must be non-empty");
        }
        if sites.iter().any(|&s| s >= m) {
            return invalid("site index out of range");
        }
        let mut sorted = sites.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != sites.len() {
            return invalid("site subset has duplicates");
        }
        let idx: Vec<usize> = sites.iter().copied().chain(sites.iter().map(|&s| s + m)).collect();
        let k = idx.len();
        Ok(Self { gamma: DMatrix::from_fn(k, k, |i, j| self.gamma[(idx[i], idx[j])]) })
    }
}

/// `γ = V^{-1/2} ⊕ V^{1/2}`.
pub fn ground_covariance(v: &PotentialMatrix) -> Result<CovarianceMatrix> {
    let n = v.n();
    let eig = symmetric_eigen(v.matrix().clone());
    let u = &eig.eigenvectors;
    let gx = u * DMatrix::from_diagonal(&eig.eigenvalues.map(|w| 1.0 / w.sqrt())) * u.transpose();
    let gp = u * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * u.transpose();
    let residual = (&gx * &gx * v.matrix() - DMatrix::identity(n, n)).amax();
    let cond = eig.eigenvalues.max() / eig.eigenvalues.min();
    if residual > 1e-10 * cond.max(1.0) {
        return Err(Error::InvalidCovariance(format!("ground covariance reconstruction error {residual}")));
    }
    let mut gamma = DMatrix::zeros(2 * n, 2 * n);
    gamma.view_mut((0, 0), (n, n)).copy_from(&gx);
    gamma.view_mut((n, n), (n, n)).copy_from(&gp);
    Ok(CovarianceMatrix { gamma: (&gamma + gamma.transpose()) * 0.5 })
}

fn mode_entropy(mu: f64, ln_base: f64) -> f64 {
    if mu <= 1.0 {
        return 0.0;
    }
    let plus = (mu + 1.0) / 2.0;
    let minus = (mu - 1.0) / 2.0;
    (plus * plus.ln() - minus * minus.ln()) / ln_base
}

/// `f(μ) = ((μ+1)/2) log₂((μ+1)/2) - ((μ-1)/2) log₂((μ-1)/2)`, `f(1) = 0`.
pub fn mode_entropy_bits(mu: f64) -> f64 {
    mode_entropy(mu, std::f64::consts::LN_2)
}

fn spectrum_entropy(spec: &SymplecticSpectrum, ln_base: f64) -> Result<f64> {
    if let Some(&bad) = spec.mu.iter().find(|&&m| m < 1.0 - UNCERTAINTY_TOLERANCE) {
        return Err(Error::InvalidCovariance(format!("symplectic eigenvalue {bad} < 1")));
    }
    Ok(spec.mu.iter().map(|&m| mode_entropy(m, ln_base)).sum())
}

pub fn entropy_bits(gamma: &CovarianceMatrix) -> Result<f64> {
    spectrum_entropy(&gamma.symplectic_eigenvalues()?, std::f64::consts::LN_2)
}

pub fn entropy_nats(gamma: &CovarianceMatrix) -> Result<f64> {
    spectrum_entropy(&gamma.symplectic_eigenvalues()?, 1.0)
}

/// Nonzero root `B` of `(k+2) log₂(k+2) + k log₂ k = 2`.
pub fn fannes_threshold() -> f64 {
    static ROOT: OnceLock<f64> = OnceLock::new();
    *ROOT.get_or_init(|| {
        let h = |k: f64| (k + 2.0) * (k + 2.0).log2() + k * k.log2() - 2.0;
        find_root_bisect(h, 1e-3, 1.0, 1e-15).expect("bracketed root").x
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FannesBound {
    pub bound_fine: f64,
    pub bound_coarse: f64,
    pub applicable: bool,
}

fn neg_xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.log2()
    }
}

/// Fannes-type continuity bound for symplectic spectra that differ by at
/// most `B` per mode.
pub fn fannes_gaussian_bound(mu1: &SymplecticSpectrum, mu2: &SymplecticSpectrum) -> Result<FannesBound> {
    if mu1.mu.len() != mu2.mu.len() {
        return invalid(format!("spectra have {} and {} modes", mu1.mu.len(), mu2.mu.len()));
    }
    let deltas: Vec<f64> = mu1.mu.iter().zip(&mu2.mu).map(|(a, b)| (a - b).abs()).collect();
    let applicable = deltas.iter().all(|&d| d <= fannes_threshold());
    let total: f64 = deltas.iter().sum();
    let n = deltas.len() as f64;
    let bound_fine = deltas.iter().map(|&d| neg_xlogx(d)).sum();
    let bound_coarse = if total > 0.0 { total * n.log2() + neg_xlogx(total) } else { 0.0 };
    Ok(FannesBound { bound_fine, bound_coarse, applicable })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MutualInfo {
    pub nats: f64,
    /// `√(2 I)`, the bound on `‖ρ_AB - ρ_A ⊗ ρ_B‖₁`.
    pub trace_bound: f64,
}

fn check_disjoint(a: &[usize], b: &[usize]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return invalid("both subsets must be non-empty");
    }
    if a.iter().any(|x| b.contains(x)) {
        return invalid("subsets overlap");
    }
    Ok(())
}

fn mutual_info_from_nats(i: f64) -> Result<MutualInfo> {
    if i < -1e-9 {
        return Err(Error::InvalidCovariance(format!("negative mutual information {i}")));
    }
    let i = i.max(0.0);
    Ok(MutualInfo { nats: i, trace_bound: (2.0 * i).sqrt() })
}

pub fn mutual_info_and_trace_bound(gamma: &CovarianceMatrix, a: &[usize], b: &[usize]) -> Result<MutualInfo> {
    check_disjoint(a, b)?;
    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
    let i = entropy_nats(&gamma.reduce(a)?)? + entropy_nats(&gamma.reduce(b)?)? - entropy_nats(&gamma.reduce(&ab)?)?;
    mutual_info_from_nats(i)
}

/// Same quantity for a ground state, evaluated in double-double precision so
/// that mutual informations far below `1e-16` stay resolved.
pub fn ground_mutual_info_precise(v: &PotentialMatrix, a: &[usize], b: &[usize]) -> Result<MutualInfo> {
    check_disjoint(a, b)?;
    let gs = precise::GroundState::new(v.matrix())?;
    mutual_info_from_nats(gs.mutual_information(a, b)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeparationSample {
    pub separation: usize,
    pub mutual_info_nats: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayExperiment {
    pub kappa: f64,
    pub block: usize,
    pub n_total: usize,
    pub samples: Vec<SeparationSample>,
    /// `None` when fewer than three samples clear the zero floor.
    pub fit: Option<DecayFit>,
    pub trivial: bool,
}

fn fit_above_floor(points: &[(f64, f64)]) -> Result<Option<DecayFit>> {
    let usable: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1 > ZERO_FLOOR).collect();
    if usable.len() < 3 {
        return Ok(None);
    }
    fit_exponential_decay(&usable).map(Some)
}

/// Property-1 bound `√(2 I)` between two blocks of `l` sites at separations
/// `d`, on a periodic nearest-neighbour chain of `n_total` sites.
pub fn theorem1_decay_experiment(kappa: f64, l: usize, d_values: &[usize], n_total: usize) -> Result<DecayExperiment> {
    theorem1_decay_experiment_with(kappa, l, d_values, n_total, Execution::default())
}

pub fn theorem1_decay_experiment_with(
    kappa: f64,
    l: usize,
    d_values: &[usize],
    n_total: usize,
    exec: Execution,
) -> Result<DecayExperiment> {
    if l == 0 || d_values.is_empty() {
        return invalid("need a positive block length and at least one separation");
    }
    let max_d = *d_values.iter().max().unwrap();
    if n_total < 2 * l + 2 * max_d {
        return invalid(format!("n_total = {n_total} too small: need >= 2L + 2 max(d) = {}", 2 * l + 2 * max_d));
    }
    let v = PotentialMatrix::nearest_neighbor(n_total, kappa, true)?;
    let gs = precise::GroundState::new(v.matrix())?;
    let a: Vec<usize> = (0..l).collect();
    let samples: Vec<SeparationSample> = exec
        .map(d_values, |&d| {
            let b: Vec<usize> = (l + d..2 * l + d).collect();
            let mi = mutual_info_from_nats(gs.mutual_information(&a, &b)?)?;
            Ok(SeparationSample { separation: d, mutual_info_nats: mi.nats, bound: mi.trace_bound })
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let points: Vec<(f64, f64)> = samples.iter().map(|s| (s.separation as f64, s.bound)).collect();
    let trivial = samples.iter().all(|s| s.bound <= ZERO_FLOOR);
    Ok(DecayExperiment { kappa, block: l, n_total, fit: fit_above_floor(&points)?, samples, trivial })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LongshortCovSample {
    pub delta: usize,
    /// Operator norm of the difference of the two reduced covariances.
    pub norm_difference: f64,
    pub entropy_difference_bits: f64,
    /// Fannes-type bound on the entropy difference, when applicable.
    pub entropy_bound_bits: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LongshortCovResult {
    pub kappa: f64,
    pub block: usize,
    pub n_big: usize,
    pub samples: Vec<LongshortCovSample>,
    pub fit: Option<DecayFit>,
    pub trivial: bool,
}

fn first_sites(n: usize, kappa: f64, l: usize) -> Result<CovarianceMatrix> {
    let v = PotentialMatrix::nearest_neighbor(n, kappa, true)?;
    ground_covariance(&v)?.reduce(&(0..l).collect::<Vec<_>>())
}

/// Compares the first `l` sites of periodic chains of lengths `l + Δ` and `n_big`.
pub fn longshort_covariance_experiment(
    kappa: f64,
    l: usize,
    delta_values: &[usize],
    n_big: usize,
) -> Result<LongshortCovResult> {
    longshort_covariance_experiment_with(kappa, l, delta_values, n_big, Execution::default())
}

pub fn longshort_covariance_experiment_with(
    kappa: f64,
    l: usize,
    delta_values: &[usize],
    n_big: usize,
    exec: Execution,
) -> Result<LongshortCovResult> {
    if l == 0 || delta_values.is_empty() {
        return invalid("need a positive block length and at least one Δ");
    }
    if let Some(&bad) = delta_values.iter().find(|&&d| d == 0 || l + d > n_big || l + d < 3) {
        return invalid(format!("Δ = {bad} out of range for l = {l}, n_big = {n_big}"));
    }
    let reference = first_sites(n_big, kappa, l)?;
    let ref_spec = reference.symplectic_eigenvalues()?;
    let ref_entropy = entropy_bits(&reference)?;
    let samples: Vec<LongshortCovSample> = exec
        .map(delta_values, |&delta| {
            let short = first_sites(l + delta, kappa, l)?;
            let diff = short.matrix() - reference.matrix();
            let norm_difference = symmetric_eigen(diff).eigenvalues.amax();
            let spec = short.symplectic_eigenvalues()?;
            let bound = fannes_gaussian_bound(&spec, &ref_spec)?;
            Ok(LongshortCovSample {
                delta,
                norm_difference,
                entropy_difference_bits: (entropy_bits(&short)? - ref_entropy).abs(),
                entropy_bound_bits: bound.applicable.then_some(bound.bound_fine),
            })
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let points: Vec<(f64, f64)> = samples.iter().map(|s| (s.delta as f64, s.norm_difference)).collect();
    let trivial = samples.iter().all(|s| s.norm_difference <= ZERO_FLOOR);
    Ok(LongshortCovResult { kappa, block: l, n_big, fit: fit_above_floor(&points)?, samples, trivial })
}
