//! Exact diagonalization of periodic (or open) spin-1/2 chains.
//!
//! Basis states are bit strings with site 0 as the most significant bit;
//! bit 0 is the `σz = +1` state. All supported Hamiltonians are real, so the
//! solver works on real vectors and only the public interface is complex.
//! When the chain has no longitudinal field the global flip `Πσx` is a
//! symmetry and each parity sector is solved separately.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::linalg::{symmetric_eigen, C64};
use crate::mps::{diag_entropy_bits as mps_diag_entropy_bits, mps_state_vector, wolf_mps};
use crate::numerics::{entropy_of_weights, Base};

pub const MIN_SITES: usize = 4;
pub const MAX_SITES: usize = 18;
const DENSE_LIMIT: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SpinModel {
    /// `H = -Σ σz σz - g Σ σx`.
    TransverseIsing { g: f64 },
    /// `H = Σ 2(g²-1) σz σz - (1+g)² σx + (g-1)² σz σx σz`.
    Wolf { g: f64 },
    LocalTerms { zz: f64, x: f64, zxz: f64, z: f64 },
}

/// Coefficients of `zz Σ σzσz + x Σ σx + zxz Σ σzσxσz + z Σ σz`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Couplings {
    zz: f64,
    x: f64,
    zxz: f64,
    z: f64,
}

impl SpinModel {
    fn couplings(&self) -> Couplings {
        match *self {
            SpinModel::TransverseIsing { g } => Couplings { zz: -1.0, x: -g, zxz: 0.0, z: 0.0 },
            SpinModel::Wolf { g } => Couplings {
                zz: 2.0 * (g * g - 1.0),
                x: -(1.0 + g).powi(2),
                zxz: (g - 1.0).powi(2),
                z: 0.0,
            },
            SpinModel::LocalTerms { zz, x, zxz, z } => Couplings { zz, x, zxz, z },
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            SpinModel::TransverseIsing { g } | SpinModel::Wolf { g } => vec![g],
            SpinModel::LocalTerms { zz, x, zxz, z } => vec![zz, x, zxz, z],
        }
    }
}

/// Family of models indexed by a single `g`, for sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    TransverseIsing,
    Wolf,
}

impl ModelFamily {
    pub fn at(self, g: f64) -> SpinModel {
        match self {
            ModelFamily::TransverseIsing => SpinModel::TransverseIsing { g },
            ModelFamily::Wolf => SpinModel::Wolf { g },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinChainSpec {
    pub n: usize,
    #[serde(default = "default_periodic")]
    pub periodic: bool,
    pub model: SpinModel,
}

fn default_periodic() -> bool {
    true
}

impl SpinChainSpec {
    pub fn new(n: usize, periodic: bool, model: SpinModel) -> Result<Self> {
        let spec = Self { n, periodic, model };
        spec.validate()?;
        Ok(spec)
    }

    pub fn periodic(n: usize, model: SpinModel) -> Result<Self> {
        Self::new(n, true, model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_SITES..=MAX_SITES).contains(&self.n) {
            return invalid(format!("n = {} outside [{MIN_SITES}, {MAX_SITES}]", self.n));
        }
        if self.model.params().iter().any(|p| !p.is_finite()) {
            return invalid("model parameters must be finite");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    fn has_flip_symmetry(&self) -> bool {
        self.model.couplings().z == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Matrix-free Hamiltonian on the full space or on one flip-parity sector.
struct Operator {
    n: usize,
    periodic: bool,
    c: Couplings,
    diag: Vec<f64>,
    sector: Option<Parity>,
    exec: Execution,
}

fn spin(cfg: usize, n: usize, i: usize) -> f64 {
    if (cfg >> (n - 1 - i)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl Operator {
    fn new(spec: &SpinChainSpec, sector: Option<Parity>, exec: Execution) -> Self {
        let n = spec.n;
        let c = spec.model.couplings();
        let dim = match sector {
            Some(_) => 1 << (n - 1),
            None => 1 << n,
        };
        let bonds = if spec.periodic { n } else { n - 1 };
        let mut diag = vec![0.0; dim];
        exec.fill(&mut diag, |cfg| {
            let mut e = 0.0;
            for b in 0..bonds {
                e += c.zz * spin(cfg, n, b) * spin(cfg, n, (b + 1) % n);
            }
            if c.z != 0.0 {
                for i in 0..n {
                    e += c.z * spin(cfg, n, i);
                }
            }
            e
        });
        Self { n, periodic: spec.periodic, c, diag, sector, exec }
    }

    fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Amplitude of `σx_i` at configuration `cfg` (neighbours are unchanged by the flip).
    fn flip_coefficient(&self, cfg: usize, i: usize) -> f64 {
        let n = self.n;
        let mut coef = self.c.x;
        if self.c.zxz != 0.0 && (self.periodic || (i > 0 && i + 1 < n)) {
            coef += self.c.zxz * spin(cfg, n, (i + n - 1) % n) * spin(cfg, n, (i + 1) % n);
        }
        coef
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        let all = (1usize << n) - 1;
        let half = 1usize << (n - 1);
        self.exec.fill(y, |cfg| {
            let mut acc = self.diag[cfg] * x[cfg];
            for i in 0..n {
                let coef = self.flip_coefficient(cfg, i);
                if coef == 0.0 {
                    continue;
                }
                let other = cfg ^ (1 << (n - 1 - i));
                acc += coef
                    * match self.sector {
                        Some(p) if other >= half => p.sign() * x[other ^ all],
                        _ => x[other],
                    };
            }
            acc
        });
    }

    fn expand(&self, v: &[f64]) -> Vec<C64> {
        match self.sector {
            None => v.iter().map(|&a| C64::new(a, 0.0)).collect(),
            Some(p) => {
                let all = (1usize << self.n) - 1;
                let mut out = vec![C64::new(0.0, 0.0); 1 << self.n];
                let s = std::f64::consts::FRAC_1_SQRT_2;
                for (cfg, &a) in v.iter().enumerate() {
                    out[cfg] = C64::new(a * s, 0.0);
                    out[cfg ^ all] = C64::new(p.sign() * a * s, 0.0);
                }
                out
            }
        }
    }
}

/// Complex `Hψ`, matrix-free.
pub fn apply_hamiltonian(spec: &SpinChainSpec, psi: &[C64]) -> Result<Vec<C64>> {
    apply_hamiltonian_with(spec, psi, Execution::default())
}

pub fn apply_hamiltonian_with(spec: &SpinChainSpec, psi: &[C64], exec: Execution) -> Result<Vec<C64>> {
    spec.validate()?;
    if psi.len() != spec.dim() {
        return invalid(format!("vector length {} != 2^{}", psi.len(), spec.n));
    }
    let op = Operator::new(spec, None, exec);
    let re: Vec<f64> = psi.iter().map(|z| z.re).collect();
    let im: Vec<f64> = psi.iter().map(|z| z.im).collect();
    let mut hre = vec![0.0; re.len()];
    let mut him = vec![0.0; im.len()];
    op.apply(&re, &mut hre);
    op.apply(&im, &mut him);
    Ok(hre.into_iter().zip(him).map(|(a, b)| C64::new(a, b)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    /// Budget of Hamiltonian applications per sector.
    pub max_iter: usize,
    pub krylov_dim: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 3000, krylov_dim: 60, seed: 42 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroundStateResult {
    pub n: usize,
    pub energy: f64,
    #[serde(skip)]
    pub amplitudes: Vec<C64>,
    pub residual: f64,
    pub gap_estimate: f64,
    pub degenerate: bool,
    pub sector: Option<Parity>,
    /// Ground state of the other parity sector when the two are degenerate.
    #[serde(skip)]
    pub partner: Option<Vec<C64>>,
    pub iterations: usize,
}

struct Eigen {
    values: [f64; 2],
    vector: Vec<f64>,
    residual: f64,
    iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn combine(basis: &[Vec<f64>], coef: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; basis[0].len()];
    for (v, &c) in basis.iter().zip(coef) {
        out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
    }
    out
}

fn dense_lowest(op: &Operator) -> Eigen {
    let dim = op.dim();
    let mut h = DMatrix::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    let mut col = vec![0.0; dim];
    for j in 0..dim {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[j] = 1.0;
        op.apply(&e, &mut col);
        h.column_mut(j).copy_from_slice(&col);
    }
    let h = (&h + h.transpose()) * 0.5;
    let eig = symmetric_eigen(h.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vector: Vec<f64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
    let hv = &h * nalgebra::DVector::from_column_slice(&vector);
    let e0 = eig.eigenvalues[order[0]];
    let residual = hv.iter().zip(&vector).map(|(a, b)| (a - e0 * b).powi(2)).sum::<f64>().sqrt();
    let e1 = order.get(1).map_or(f64::INFINITY, |&k| eig.eigenvalues[k]);
    Eigen { values: [e0, e1], vector, residual, iterations: dim }
}

/// Restarted Lanczos (Rayleigh–Ritz with full reorthogonalization) keeping
/// the two lowest Ritz vectors at each restart.
fn lanczos_lowest(op: &Operator, opts: &SolverOptions) -> Result<Eigen> {
    let dim = op.dim();
    if dim <= DENSE_LIMIT {
        return Ok(dense_lowest(op));
    }
    let m = opts.krylov_dim.clamp(4, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut applications = 0usize;

    let mut candidate: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    let mut best = f64::INFINITY;
    loop {
        for _ in 0..2 {
            for v in &basis {
                let p = dot(v, &candidate);
                candidate.iter_mut().zip(v).for_each(|(c, x)| *c -= p * x);
            }
        }
        let len = norm(&candidate);
        if len < 1e-12 {
            candidate = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
            continue;
        }
        candidate.iter_mut().for_each(|c| *c /= len);
        let mut image = vec![0.0; dim];
        op.apply(&candidate, &mut image);
        applications += 1;
        basis.push(std::mem::take(&mut candidate));
        images.push(image);

        let k = basis.len();
        let t = DMatrix::from_fn(k, k, |i, j| 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i])));
        let eig = symmetric_eigen(t);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let y0: Vec<f64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
        let theta = eig.eigenvalues[order[0]];
        let ritz = combine(&basis, &y0);
        let hritz = combine(&images, &y0);
        let resid: Vec<f64> = hritz.iter().zip(&ritz).map(|(h, r)| h - theta * r).collect();
        let res = norm(&resid);
        best = best.min(res);
        if res <= opts.tol || k == dim {
            let e1 = order.get(1).map_or(f64::INFINITY, |&j| eig.eigenvalues[j]);
            return Ok(Eigen { values: [theta, e1], vector: ritz, residual: res, iterations: applications });
        }
        if applications >= opts.max_iter {
            return Err(Error::NoConvergence { iterations: applications, residual: best });
        }
        if k == m {
            let y1: Vec<f64> = eig.eigenvectors.column(order[1]).iter().copied().collect();
            let keep = [ritz, combine(&basis, &y1)];
            let keep_images = [hritz, combine(&images, &y1)];
            basis = keep.to_vec();
            images = keep_images.to_vec();
        }
        candidate = resid;
    }
}

fn degenerate(gap: f64, energy: f64) -> bool {
    gap < 1e-8 * energy.abs() + 1e-10
}

pub fn ground_state(spec: &SpinChainSpec, opts: &SolverOptions) -> Result<GroundStateResult> {
    ground_state_with(spec, opts, Execution::default())
}

pub fn ground_state_with(spec: &SpinChainSpec, opts: &SolverOptions, exec: Execution) -> Result<GroundStateResult> {
    spec.validate()?;
    if !(opts.tol > 0.0) || opts.krylov_dim < 2 || opts.max_iter == 0 {
        return invalid("solver options must have tol > 0, krylov_dim >= 2, max_iter >= 1");
    }
    if !spec.has_flip_symmetry() {
        let op = Operator::new(spec, None, exec);
        let eig = lanczos_lowest(&op, opts)?;
        let gap = (eig.values[1] - eig.values[0]).max(0.0);
        return Ok(GroundStateResult {
            n: spec.n,
            energy: eig.values[0],
            amplitudes: op.expand(&eig.vector),
            residual: eig.residual,
            gap_estimate: gap,
            degenerate: degenerate(gap, eig.values[0]),
            sector: None,
            partner: None,
            iterations: eig.iterations,
        });
    }
    let even_op = Operator::new(spec, Some(Parity::Even), exec);
    let odd_op = Operator::new(spec, Some(Parity::Odd), exec);
    let even = lanczos_lowest(&even_op, opts)?;
    let odd = lanczos_lowest(&odd_op, opts)?;
    let split = (even.values[0] - odd.values[0]).abs();
    let energy = even.values[0].min(odd.values[0]);
    let iterations = even.iterations + odd.iterations;
    if degenerate(split, energy) {
        let gap = split.min((even.values[1] - even.values[0]).max(0.0));
        return Ok(GroundStateResult {
            n: spec.n,
            energy,
            amplitudes: even_op.expand(&even.vector),
            residual: even.residual.max(odd.residual),
            gap_estimate: gap,
            degenerate: true,
            sector: Some(Parity::Even),
            partner: Some(odd_op.expand(&odd.vector)),
            iterations,
        });
    }
    let (win, other, op, parity) = if even.values[0] < odd.values[0] {
        (&even, &odd, &even_op, Parity::Even)
    } else {
        (&odd, &even, &odd_op, Parity::Odd)
    };
    let gap = (other.values[0].min(win.values[1]) - win.values[0]).max(0.0);
    Ok(GroundStateResult {
        n: spec.n,
        energy: win.values[0],
        amplitudes: op.expand(&win.vector),
        residual: win.residual,
        gap_estimate: gap,
        degenerate: degenerate(gap, win.values[0]),
        sector: Some(parity),
        partner: None,
        iterations,
    })
}

/// `-Σ |ψ_x|² log₂ |ψ_x|²`.
pub fn diag_entropy_bits(state: &GroundStateResult) -> f64 {
    amplitude_entropy_bits(&state.amplitudes)
}

pub fn amplitude_entropy_bits(amps: &[C64]) -> f64 {
    let p: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
    entropy_of_weights(&p, Base::Two)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapacityPoint {
    pub n: usize,
    pub capacity_bits: f64,
    pub diag_entropy_bits: f64,
    pub energy: f64,
    pub gap_estimate: f64,
    pub degenerate: bool,
    pub residual: f64,
}

pub fn capacity_point(spec: &SpinChainSpec, opts: &SolverOptions) -> Result<CapacityPoint> {
    capacity_point_with(spec, opts, Execution::default())
}

pub fn capacity_point_with(spec: &SpinChainSpec, opts: &SolverOptions, exec: Execution) -> Result<CapacityPoint> {
    let gs = ground_state_with(spec, opts, exec)?;
    let s = diag_entropy_bits(&gs).clamp(0.0, spec.n as f64);
    Ok(CapacityPoint {
        n: spec.n,
        capacity_bits: (1.0 - s / spec.n as f64).clamp(0.0, 1.0),
        diag_entropy_bits: s,
        energy: gs.energy,
        gap_estimate: gs.gap_estimate,
        degenerate: gs.degenerate,
        residual: gs.residual,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub g: f64,
    pub outcome: Result<CapacityPoint>,
}

/// Capacity over the `n × g` grid, rows ordered by `n` then `g`. Failures are
/// recorded per row.
pub fn sweep(
    family: ModelFamily,
    g_values: &[f64],
    n_values: &[usize],
    periodic: bool,
    opts: &SolverOptions,
    exec: Execution,
) -> Vec<SweepRow> {
    let grid: Vec<(usize, f64)> = n_values.iter().flat_map(|&n| g_values.iter().map(move |&g| (n, g))).collect();
    exec.map(&grid, |&(n, g)| {
        let outcome = SpinChainSpec::new(n, periodic, family.at(g))
            .and_then(|spec| capacity_point_with(&spec, opts, Execution::Sequential));
        SweepRow { n, g, outcome }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WolfCheck {
    pub n: usize,
    pub g: f64,
    pub overlap: f64,
    pub entropy_gap: f64,
    pub ed_energy: f64,
    pub degenerate: bool,
}

/// Compares the ED ground state of the Wolf Hamiltonian with the periodic MPS
/// built from `wolf_mps(g)`.
pub fn wolf_cross_check(n: usize, g: f64, opts: &SolverOptions) -> Result<WolfCheck> {
    if n > 12 {
        return invalid(format!("wolf cross-check limited to n <= 12, got {n}"));
    }
    if g == 0.0 || !g.is_finite() {
        return invalid("wolf cross-check needs finite g != 0");
    }
    let spec = SpinChainSpec::periodic(n, SpinModel::Wolf { g })?;
    let gs = ground_state(&spec, opts)?;
    let mps = mps_state_vector(&wolf_mps(g), n)?;
    let proj = |v: &[C64]| v.iter().zip(&mps).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr();
    let mut weight = proj(&gs.amplitudes);
    if let Some(p) = &gs.partner {
        weight += proj(p);
    }
    let s_mps = mps_diag_entropy_bits(&wolf_mps(g), n, Execution::default())?;
    Ok(WolfCheck {
        n,
        g,
        overlap: weight.sqrt(),
        entropy_gap: (diag_entropy_bits(&gs) - s_mps).abs(),
        ed_energy: gs.energy,
        degenerate: gs.degenerate,
    })
}
