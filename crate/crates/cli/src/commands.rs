//! Subcommand configurations and runners.

use std::f64::consts::LN_2;

use memchan_core::conditions::{self, ConditionReport, DecayrepeatParams, GaussianConditionParams, LongshortPlan};
use memchan_core::gaussian;
use memchan_core::ising::{self, IsingParams};
use memchan_core::markov::{self, StochasticMatrix};
use memchan_core::mps::{self, MpsSpec, Rank1Params};
use memchan_core::numerics::{coherent_info_bits, DecayFit, FitLine};
use memchan_core::spin::{self, ModelFamily, SolverOptions};
use memchan_core::Execution;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::grid::{Grid, IntGrid};
use crate::output::{Cell, Table};

/// Problems found before any computation starts.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl<E: std::fmt::Display> From<E> for ConfigError {
    fn from(e: E) -> Self {
        ConfigError(e.to_string())
    }
}

type Setup<T> = std::result::Result<T, ConfigError>;

fn status<T>(r: &memchan_core::Result<T>) -> Cell {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => format!("error: {e}").into(),
    }
}

fn row_matrix(rows: &[Vec<f64>]) -> Setup<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(ConfigError("matrix rows must be non-empty and equally long".into()));
    }
    Ok(DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

fn foot_fit(t: &mut Table, prefix: &str, fit: Option<&DecayFit>) {
    match fit {
        Some(f) => {
            t.foot(format!("{prefix}rate"), f.rate);
            t.foot(format!("{prefix}log_amplitude"), f.log_amplitude);
            t.foot(format!("{prefix}r_squared"), f.r_squared);
        }
        None => t.foot(format!("{prefix}fit"), "none"),
    }
}

fn foot_line(t: &mut Table, fit: &FitLine) {
    t.foot("slope", fit.slope);
    t.foot("intercept", fit.intercept);
    t.foot("max_abs_residual", fit.max_abs_residual);
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovConfig {
    /// Column-stochastic: `matrix[i][j]` is the probability of `j → i`.
    pub matrix: Vec<Vec<f64>>,
}

pub fn markov(cfg: &MarkovConfig) -> Setup<Table> {
    let m = StochasticMatrix::from_matrix(row_matrix(&cfg.matrix)?)?;
    let mut t = Table::new(vec!["d", "entropy_rate_bits", "capacity_bits", "status"]);
    let r = markov::capacity(&m);
    match &r {
        Ok(rep) => {
            t.push(vec![m.d().into(), rep.entropy_rate_bits.into(), rep.capacity_bits.into(), status(&r)]);
            t.details = json!({ "stationary": rep.stationary.values(), "column_entropies": rep.column_entropies });
        }
        Err(e) => {
            t.push(vec![m.d().into(), Cell::Empty, Cell::Empty, status(&r)]);
            t.fail(e.to_string());
        }
    }
    Ok(t)
}

fn zero() -> Grid {
    Grid(vec![0.0])
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingConfig {
    pub beta: Grid,
    #[serde(rename = "J")]
    pub j: Grid,
    #[serde(rename = "M", default = "zero")]
    pub m: Grid,
    #[serde(rename = "D", default = "zero")]
    pub d: Grid,
}

pub fn ising(cfg: &IsingConfig, exec: Execution) -> Setup<Table> {
    let mut points = Vec::new();
    for &beta in &cfg.beta.0 {
        for &j in &cfg.j.0 {
            for &m in &cfg.m.0 {
                for &d in &cfg.d.0 {
                    points.push((beta, j, m, d));
                }
            }
        }
    }
    let results = exec.map(&points, |&(beta, j, m, d)| {
        let p = IsingParams::new(beta, j, m, d)?;
        Ok((ising::entropy_per_site(&p)?, ising::capacity(&p)?))
    });
    let mut t = Table::new(vec!["beta", "J", "M", "D", "entropy_nats", "capacity_bits", "status"]);
    for (&(beta, j, m, d), r) in points.iter().zip(&results) {
        let (s, c) = r.as_ref().map_or((Cell::Empty, Cell::Empty), |&(s, c)| (s.into(), c.into()));
        if let Err(e) = r {
            t.fail(format!("beta={beta} J={j} M={m} D={d}: {e}"));
        }
        t.push(vec![beta.into(), j.into(), m.into(), d.into(), s, c, status(r)]);
    }
    Ok(t)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MpsEnv {
    Mps(MpsSpec),
    Wolf { g: f64 },
    Rank1 { a: f64, b: f64, c: f64 },
}

impl MpsEnv {
    pub fn build(&self) -> Setup<MpsSpec> {
        Ok(match self {
            MpsEnv::Mps(spec) => spec.clone(),
            MpsEnv::Wolf { g } => {
                if !g.is_finite() {
                    return Err(ConfigError("wolf g must be finite".into()));
                }
                mps::wolf_mps(*g)
            }
            MpsEnv::Rank1 { a, b, c } => mps::canonical_rank1_mps(&Rank1Params::new(*a, *b, *c)?),
        })
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EnumerationMethod {
    /// Infinite-chain block marginals.
    Block,
    /// Periodic rings of length n.
    Ring,
}

fn default_block_lengths() -> IntGrid {
    IntGrid((8..=13).collect())
}

fn default_method() -> EnumerationMethod {
    EnumerationMethod::Block
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpsCapacityConfig {
    pub environment: MpsEnv,
    #[serde(default = "default_block_lengths")]
    pub n: IntGrid,
    #[serde(default = "default_method")]
    pub method: EnumerationMethod,
}

pub fn mps_capacity(cfg: &MpsCapacityConfig, exec: Execution) -> Setup<Table> {
    let spec = cfg.environment.build()?;
    let r = match cfg.method {
        EnumerationMethod::Block => mps::block_enumeration_capacity(&spec, &cfg.n.0, exec),
        EnumerationMethod::Ring => mps::enumeration_capacity(&spec, &cfg.n.0, exec),
    };
    let mut t = Table::new(vec!["n", "diag_entropy_bits"]);
    match r {
        Ok(cap) => {
            for &(n, s) in &cap.entropies {
                t.push(vec![n.into(), s.into()]);
            }
            t.foot("capacity_bits", cap.capacity);
            foot_line(&mut t, &cap.fit);
        }
        Err(e) => t.fail(e.to_string()),
    }
    if let Ok(ts) = mps::transfer_spectrum(&spec) {
        t.foot("lambda2", ts.second());
        t.details = json!({ "transfer_spectrum": ts });
    }
    if let Ok(c) = mps::rank1_params(&spec).and_then(|p| mps::capacity_rank1(&p)) {
        t.foot("capacity_rank1_bits", c);
    }
    Ok(t)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rank1Config {
    pub a: Grid,
    pub b: Grid,
    pub c: Grid,
}

pub fn mps_rank1(cfg: &Rank1Config, exec: Execution) -> Setup<Table> {
    let mut points = Vec::new();
    for &a in &cfg.a.0 {
        for &b in &cfg.b.0 {
            for &c in &cfg.c.0 {
                points.push((a, b, c));
            }
        }
    }
    let results = exec.map(&points, |&(a, b, c)| {
        let p = Rank1Params::new(a, b, c)?;
        let cap = mps::capacity_rank1(&p)?;
        Ok((mps::ising_from_rank1(&p).ok(), mps::rank1_effective_ising(&p).ok(), cap))
    });
    let mut t = Table::new(vec!["a", "b", "c", "J", "M", "J_eff", "M_eff", "capacity_bits", "status"]);
    for (&(a, b, c), r) in points.iter().zip(&results) {
        let mut row: Vec<Cell> = vec![a.into(), b.into(), c.into()];
        match r {
            Ok((mapped, eff, cap)) => {
                for p in [mapped, eff] {
                    row.push(p.map(|p| p.j).into());
                    row.push(p.map(|p| p.m).into());
                }
                row.push((*cap).into());
            }
            Err(e) => {
                row.extend(std::iter::repeat(Cell::Empty).take(5));
                t.fail(format!("a={a} b={b} c={c}: {e}"));
            }
        }
        row.push(status(r));
        t.push(row);
    }
    Ok(t)
}

fn default_wolf_grid() -> Grid {
    "-2:2:0.05".parse().expect("valid grid")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WolfConfig {
    #[serde(default = "default_wolf_grid")]
    pub g: Grid,
}

pub fn wolf_sweep(cfg: &WolfConfig, exec: Execution) -> Setup<Table> {
    let results = exec.map(&cfg.g.0, |&g| mps::wolf_capacity(g));
    let mut t = Table::new(vec!["g", "c", "capacity_bits", "status"]);
    for (&g, r) in cfg.g.0.iter().zip(&results) {
        if let Err(e) = r {
            t.fail(format!("g={g}: {e}"));
        }
        t.push(vec![g.into(), (g * g).into(), r.as_ref().ok().copied().into(), status(r)]);
    }
    Ok(t)
}

fn default_sizes() -> IntGrid {
    IntGrid(vec![6, 8, 10])
}

fn default_field_grid() -> Grid {
    "0.2:1.8:0.05".parse().expect("valid grid")
}

fn default_true() -> bool {
    true
}

fn default_family() -> ModelFamily {
    ModelFamily::TransverseIsing
}

fn default_seed() -> u64 {
    42
}

fn default_tol() -> f64 {
    SolverOptions::default().tol
}

fn default_max_iter() -> usize {
    SolverOptions::default().max_iter
}

fn default_krylov() -> usize {
    SolverOptions::default().krylov_dim
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QisingConfig {
    #[serde(default = "default_sizes")]
    pub n: IntGrid,
    #[serde(default = "default_field_grid")]
    pub g: Grid,
    #[serde(default = "default_true")]
    pub periodic: bool,
    #[serde(default = "default_family")]
    pub model: ModelFamily,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_krylov")]
    pub krylov_dim: usize,
}

pub fn qising_sweep(cfg: &QisingConfig, exec: Execution) -> Setup<Table> {
    let opts = SolverOptions { tol: cfg.tol, max_iter: cfg.max_iter, krylov_dim: cfg.krylov_dim, seed: cfg.seed };
    let rows = spin::sweep(cfg.model, &cfg.g.0, &cfg.n.0, cfg.periodic, &opts, exec);
    let mut t = Table::new(vec![
        "n",
        "g",
        "capacity_bits",
        "diag_entropy_bits",
        "energy",
        "gap_estimate",
        "degenerate",
        "residual",
        "status",
    ]);
    for row in &rows {
        let mut cells: Vec<Cell> = vec![row.n.into(), row.g.into()];
        match &row.outcome {
            Ok(p) => cells.extend([
                p.capacity_bits.into(),
                p.diag_entropy_bits.into(),
                p.energy.into(),
                p.gap_estimate.into(),
                p.degenerate.into(),
                p.residual.into(),
            ]),
            Err(e) => {
                cells.extend(std::iter::repeat(Cell::Empty).take(6));
                t.fail(format!("n={} g={}: {e}", row.n, row.g));
            }
        }
        cells.push(status(&row.outcome));
        t.push(cells);
    }
    for &n in &cfg.n.0 {
        let curve: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.n == n)
            .filter_map(|r| r.outcome.as_ref().ok().map(|p| (r.g, p.capacity_bits)))
            .collect();
        let steepest = curve
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))));
        t.foot(format!("max_abs_slope_n{n}"), steepest);
    }
    Ok(t)
}

fn default_kappa() -> f64 {
    0.2
}

fn default_decay_block() -> usize {
    4
}

fn default_separations() -> IntGrid {
    IntGrid((2..=12).collect())
}

fn default_ring() -> usize {
    60
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianDecayConfig {
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_decay_block")]
    pub block: usize,
    #[serde(default = "default_separations")]
    pub separations: IntGrid,
    #[serde(default = "default_ring")]
    pub n_total: usize,
}

pub fn gaussian_decay(cfg: &GaussianDecayConfig, exec: Execution) -> Setup<Table> {
    gaussian::PotentialMatrix::nearest_neighbor(cfg.n_total, cfg.kappa, true)?;
    let mut t = Table::new(vec!["separation", "bound", "mutual_info_nats"]);
    match gaussian::theorem1_decay_experiment_with(cfg.kappa, cfg.block, &cfg.separations.0, cfg.n_total, exec) {
        Ok(r) => {
            for s in &r.samples {
                t.push(vec![s.separation.into(), s.bound.into(), s.mutual_info_nats.into()]);
            }
            foot_fit(&mut t, "", r.fit.as_ref());
            t.foot("trivial", r.trivial);
        }
        Err(e) => t.fail(e.to_string()),
    }
    Ok(t)
}

fn default_longshort_block() -> usize {
    6
}

fn default_deltas() -> IntGrid {
    IntGrid((1..=10).collect())
}

fn default_n_big() -> usize {
    80
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianLongshortConfig {
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_longshort_block")]
    pub block: usize,
    #[serde(default = "default_deltas")]
    pub deltas: IntGrid,
    #[serde(default = "default_n_big")]
    pub n_big: usize,
}

pub fn gaussian_longshort(cfg: &GaussianLongshortConfig, exec: Execution) -> Setup<Table> {
    gaussian::PotentialMatrix::nearest_neighbor(cfg.n_big, cfg.kappa, true)?;
    let mut t = Table::new(vec!["delta", "norm_difference", "entropy_difference_bits", "entropy_bound_bits"]);
    match gaussian::longshort_covariance_experiment_with(cfg.kappa, cfg.block, &cfg.deltas.0, cfg.n_big, exec) {
        Ok(r) => {
            for s in &r.samples {
                t.push(vec![
                    s.delta.into(),
                    s.norm_difference.into(),
                    s.entropy_difference_bits.into(),
                    s.entropy_bound_bits.into(),
                ]);
            }
            foot_fit(&mut t, "", r.fit.as_ref());
            t.foot("trivial", r.trivial);
        }
        Err(e) => t.fail(e.to_string()),
    }
    Ok(t)
}

fn report_table(reports: &[&ConditionReport]) -> Table {
    let mut t = Table::new(vec!["condition", "series", "abscissa", "value"]);
    for r in reports {
        let name = serde_json::to_value(r.condition).expect("serializable");
        let name = name.as_str().unwrap_or_default().to_string();
        for s in &r.samples {
            t.push(vec![name.clone().into(), s.series.into(), s.abscissa.into(), s.value.into()]);
        }
        let verdict = serde_json::to_value(r.verdict).expect("serializable");
        t.foot(format!("{name}_verdict"), verdict.as_str().unwrap_or_default());
        foot_fit(&mut t, &format!("{name}_"), r.primary_fit());
        t.foot(format!("{name}_predicted_rate"), r.predicted_rate);
    }
    t.details = json!({ "reports": reports });
    t
}

fn default_wolf_env() -> MpsEnv {
    MpsEnv::Wolf { g: 0.5 }
}

fn default_decayrepeat() -> DecayrepeatParams {
    DecayrepeatParams::new(vec![2, 3], (1..=6).collect(), 2)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LongshortConfig {
    pub plan: LongshortPlan,
    pub n_big: usize,
    #[serde(default = "default_gap")]
    pub gap_threshold: f64,
}

fn default_gap() -> f64 {
    conditions::DEFAULT_GAP_THRESHOLD
}

fn default_longshort() -> LongshortConfig {
    LongshortConfig {
        plan: LongshortPlan::Sqrt { l_values: vec![4, 6, 9] },
        n_big: 40,
        gap_threshold: default_gap(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsMpsConfig {
    #[serde(default = "default_wolf_env")]
    pub environment: MpsEnv,
    #[serde(default = "default_decayrepeat")]
    pub decayrepeat: DecayrepeatParams,
    #[serde(default = "default_longshort")]
    pub longshort: LongshortConfig,
}

pub fn conditions_mps(cfg: &ConditionsMpsConfig, exec: Execution) -> Setup<Table> {
    let spec = cfg.environment.build()?;
    cfg.longshort.plan.points()?;
    let decay = conditions::check_decayrepeat_mps(&spec, &cfg.decayrepeat, exec);
    let ls = &cfg.longshort;
    let longshort = conditions::check_longshort_mps(&spec, &ls.plan, ls.n_big, ls.gap_threshold, exec);
    let reports: Vec<&ConditionReport> = [&decay, &longshort].into_iter().filter_map(|r| r.as_ref().ok()).collect();
    let mut t = report_table(&reports);
    for e in [decay.err(), longshort.err()].into_iter().flatten() {
        t.fail(e.to_string());
    }
    Ok(t)
}

pub fn conditions_gaussian(cfg: &GaussianConditionParams, exec: Execution) -> Setup<Table> {
    gaussian::PotentialMatrix::nearest_neighbor(cfg.n_total.max(3), cfg.kappa, true)?;
    Ok(match conditions::check_conditions_gaussian(cfg, exec) {
        Ok((d, l)) => report_table(&[&d, &l]),
        Err(e) => {
            let mut t = report_table(&[]);
            t.fail(e.to_string());
            t
        }
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HashingEnv {
    Markov { matrix: Vec<Vec<f64>> },
    Ising(IsingParams),
    Mps(MpsSpec),
    Wolf { g: f64 },
    Rank1 { a: f64, b: f64, c: f64 },
}

fn default_hashing_n() -> IntGrid {
    IntGrid((1..=10).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HashingConfig {
    pub environment: HashingEnv,
    #[serde(default = "default_hashing_n")]
    pub n: IntGrid,
}

enum Source {
    Markov(StochasticMatrix),
    Ising(IsingParams),
    Mps(MpsSpec),
}

impl Source {
    fn d(&self) -> usize {
        match self {
            Source::Markov(m) => m.d(),
            Source::Ising(_) => 2,
            Source::Mps(s) => s.d(),
        }
    }

    fn diag_entropy_bits(&self, n: usize) -> memchan_core::Result<f64> {
        match self {
            Source::Markov(m) => markov::brute_force_diag_entropy_with(m, None, n, Execution::Sequential),
            Source::Ising(p) => Ok(ising::brute_force_entropy(p, n, true)? / LN_2),
            Source::Mps(s) => mps::diag_entropy_bits(s, n, Execution::Sequential),
        }
    }
}

/// Finite-n coherent information of the channel, which is achievable by hashing.
pub fn hashing(cfg: &HashingConfig, exec: Execution) -> Setup<Table> {
    let source = match &cfg.environment {
        HashingEnv::Markov { matrix } => Source::Markov(StochasticMatrix::from_matrix(row_matrix(matrix)?)?),
        HashingEnv::Ising(p) => {
            p.validate()?;
            Source::Ising(*p)
        }
        HashingEnv::Mps(s) => Source::Mps(s.clone()),
        HashingEnv::Wolf { g } => Source::Mps(MpsEnv::Wolf { g: *g }.build()?),
        HashingEnv::Rank1 { a, b, c } => Source::Mps(MpsEnv::Rank1 { a: *a, b: *b, c: *c }.build()?),
    };
    let d = source.d();
    let results = exec.map(&cfg.n.0, |&n| {
        let s = source.diag_entropy_bits(n)?;
        Ok((s, coherent_info_bits(n, d, s)?))
    });
    let mut t = Table::new(vec!["n", "diag_entropy_bits", "coherent_info_bits", "per_symbol_bits", "status"]);
    for (&n, r) in cfg.n.0.iter().zip(&results) {
        match r {
            Ok((s, ci)) => t.push(vec![n.into(), (*s).into(), (*ci).into(), (ci / n as f64).into(), status(r)]),
            Err(e) => {
                t.fail(format!("n={n}: {e}"));
                t.push(vec![n.into(), Cell::Empty, Cell::Empty, Cell::Empty, status(r)]);
            }
        }
    }
    Ok(t)
}
