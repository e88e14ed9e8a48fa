//! Forgetfulness checks: decay of block correlations with spacer length
//! (`decayrepeat`) and convergence of block states with ring length
//! (`longshort`), with fitted constants and a verdict.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::gaussian::{self, ZERO_FLOOR};
use crate::mps::{block_product_deviation_with, longshort_deviation, transfer_spectrum_with_threshold, BlockLayout, MpsSpec};
use crate::numerics::{fit_exponential_decay, DecayFit};

pub const MIN_R_SQUARED: f64 = 0.9;
pub const DEFAULT_GAP_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Decayrepeat,
    Longshort,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    DecayConfirmed,
    Inconclusive,
    Violated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sample {
    /// Block length the sample belongs to.
    pub series: usize,
    pub abscissa: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesFit {
    pub series: usize,
    pub fit: Option<DecayFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub environment: String,
    pub samples: Vec<Sample>,
    pub fits: Vec<SeriesFit>,
    pub verdict: Verdict,
    pub predicted_rate: Option<f64>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    /// Fit of the first series that has one.
    pub fn primary_fit(&self) -> Option<&DecayFit> {
        self.fits.iter().find_map(|f| f.fit.as_ref())
    }

    fn inconclusive(condition: Condition, environment: String, predicted_rate: Option<f64>, reason: String) -> Self {
        Self {
            condition,
            environment,
            samples: Vec::new(),
            fits: Vec::new(),
            verdict: Verdict::Inconclusive,
            predicted_rate,
            notes: vec![reason],
        }
    }
}

fn fit_series(samples: &[Sample]) -> Result<Vec<SeriesFit>> {
    let mut series: Vec<usize> = samples.iter().map(|s| s.series).collect();
    series.dedup();
    series
        .into_iter()
        .map(|id| {
            let pts: Vec<(f64, f64)> = samples
                .iter()
                .filter(|s| s.series == id && s.value > ZERO_FLOOR)
                .map(|s| (s.abscissa, s.value))
                .collect();
            let distinct = {
                let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
                xs.dedup();
                xs.len()
            };
            let fit = if pts.len() >= 3 && distinct >= 2 { Some(fit_exponential_decay(&pts)?) } else { None };
            Ok(SeriesFit { series: id, fit })
        })
        .collect()
}

fn verdict(samples: &[Sample], fits: &[SeriesFit], notes: &mut Vec<String>) -> Verdict {
    if samples.iter().all(|s| s.value <= ZERO_FLOOR) {
        notes.push("all deviations vanish: decay holds trivially".into());
        return Verdict::DecayConfirmed;
    }
    let mut confirmed = true;
    for f in fits {
        match &f.fit {
            None => {
                notes.push(format!("series {}: fewer than three nonzero samples", f.series));
                confirmed = false;
            }
            Some(fit) if fit.rate >= 0.0 && fit.r_squared >= MIN_R_SQUARED => return Verdict::Violated,
            Some(fit) if fit.rate < 0.0 && fit.r_squared >= MIN_R_SQUARED => {}
            Some(fit) => {
                notes.push(format!("series {}: poor fit (rate {:.4}, r² {:.4})", f.series, fit.rate, fit.r_squared));
                confirmed = false;
            }
        }
    }
    if confirmed {
        Verdict::DecayConfirmed
    } else {
        Verdict::Inconclusive
    }
}

fn assemble(
    condition: Condition,
    environment: String,
    samples: Vec<Sample>,
    predicted_rate: Option<f64>,
    mut notes: Vec<String>,
) -> Result<ConditionReport> {
    let fits = fit_series(&samples)?;
    let verdict = verdict(&samples, &fits, &mut notes);
    Ok(ConditionReport { condition, environment, samples, fits, verdict, predicted_rate, notes })
}

fn describe(spec: &MpsSpec) -> String {
    format!("mps d={} D={}", spec.d(), spec.bond())
}

/// `Ok(Err(report))` when the transfer operator is critical.
fn gate(spec: &MpsSpec, condition: Condition, gap_threshold: f64) -> Result<std::result::Result<f64, ConditionReport>> {
    let ts = transfer_spectrum_with_threshold(spec, gap_threshold)?;
    let rate = ts.predicted_rate();
    let predicted = rate.is_finite().then_some(rate);
    if !ts.unique_fixed_point || ts.gap <= gap_threshold {
        let reason = format!(
            "transfer operator has no unique fixed point (gap {:.3e} <= {:.1e}); decay fit skipped",
            ts.gap, gap_threshold
        );
        return Ok(Err(ConditionReport::inconclusive(condition, describe(spec), predicted, reason)));
    }
    Ok(Ok(rate))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayrepeatParams {
    pub l_values: Vec<usize>,
    pub s_values: Vec<usize>,
    #[serde(default = "default_v")]
    pub v: usize,
    /// Ring length; the spacer after the last block absorbs the remainder.
    #[serde(default = "default_ring")]
    pub n: usize,
    /// Spacer-to-block ratio of the asymptotic scaling; documentation only.
    #[serde(default)]
    pub delta_doc: Option<f64>,
    #[serde(default = "default_gap")]
    pub gap_threshold: f64,
}

fn default_v() -> usize {
    2
}

fn default_ring() -> usize {
    60
}

fn default_gap() -> f64 {
    DEFAULT_GAP_THRESHOLD
}

impl DecayrepeatParams {
    pub fn new(l_values: Vec<usize>, s_values: Vec<usize>, v: usize) -> Self {
        Self { l_values, s_values, v, n: default_ring(), delta_doc: None, gap_threshold: default_gap() }
    }
}

pub fn check_decayrepeat_mps(spec: &MpsSpec, p: &DecayrepeatParams, exec: Execution) -> Result<ConditionReport> {
    if p.l_values.is_empty() || p.s_values.is_empty() {
        return invalid("l_values and s_values must be non-empty");
    }
    let predicted = match gate(spec, Condition::Decayrepeat, p.gap_threshold)? {
        Ok(rate) => rate,
        Err(report) => return Ok(report),
    };
    let points: Vec<(usize, usize)> = p.l_values.iter().flat_map(|&l| p.s_values.iter().map(move |&s| (l, s))).collect();
    let samples = exec
        .map(&points, |&(l, s)| {
            let layout = BlockLayout::new(l, s, p.v, p.n)?;
            let value = block_product_deviation_with(spec, &layout, Execution::Sequential)?;
            Ok(Sample { series: l, abscissa: s as f64, value })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut notes = vec![format!(
        "v = {} blocks held fixed; the asymptotic argument takes v = l^5 and s = δl{}",
        p.v,
        p.delta_doc.map_or(String::new(), |d| format!(" (δ = {d})"))
    )];
    notes.push(format!("samples: ‖ρ(blocks) - ρ(block)^⊗v‖₁ against spacer s on a ring of {}", p.n));
    assemble(Condition::Decayrepeat, describe(spec), samples, Some(predicted), notes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum LongshortPlan {
    /// `Δ = ⌈√l⌉`.
    Sqrt { l_values: Vec<usize> },
    /// `Δ = ⌈f·l⌉`.
    LinearFraction { l_values: Vec<usize>, fraction: f64 },
    /// One block length, explicit `Δ` grid.
    Fixed { l: usize, deltas: Vec<usize> },
}

impl LongshortPlan {
    pub fn points(&self) -> Result<Vec<(usize, usize)>> {
        let pts: Vec<(usize, usize)> = match self {
            Self::Sqrt { l_values } => l_values.iter().map(|&l| (l, (l as f64).sqrt().ceil() as usize)).collect(),
            Self::LinearFraction { l_values, fraction } => {
                if !(*fraction > 0.0) {
                    return invalid("linear fraction must be positive");
                }
                l_values.iter().map(|&l| (l, (fraction * l as f64).ceil().max(1.0) as usize)).collect()
            }
            Self::Fixed { l, deltas } => deltas.iter().map(|&d| (*l, d)).collect(),
        };
        if pts.is_empty() {
            return invalid("longshort plan has no points");
        }
        Ok(pts)
    }
}

pub fn check_longshort_mps(
    spec: &MpsSpec,
    plan: &LongshortPlan,
    n_big: usize,
    gap_threshold: f64,
    exec: Execution,
) -> Result<ConditionReport> {
    let points = plan.points()?;
    let predicted = match gate(spec, Condition::Longshort, gap_threshold)? {
        Ok(rate) => rate,
        Err(report) => return Ok(report),
    };
    // One series for a fixed block; otherwise Δ grows with l and all points fit together.
    let series_of = |l: usize| if matches!(plan, LongshortPlan::Fixed { .. }) { l } else { 0 };
    let samples = exec
        .map(&points, |&(l, delta)| {
            let value = longshort_deviation(spec, l, delta, n_big)?;
            Ok(Sample { series: series_of(l), abscissa: delta as f64, value })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let notes = vec![format!("samples: ‖ρ^l(l+Δ) - ρ^l({n_big})‖₁ against Δ")];
    assemble(Condition::Longshort, describe(spec), samples, Some(predicted), notes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConditionParams {
    pub kappa: f64,
    #[serde(default = "default_block")]
    pub block: usize,
    #[serde(default = "default_separations")]
    pub separations: Vec<usize>,
    #[serde(default = "default_ring")]
    pub n_total: usize,
    #[serde(default = "default_longshort_block")]
    pub longshort_block: usize,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<usize>,
    #[serde(default = "default_n_big")]
    pub n_big: usize,
}

fn default_block() -> usize {
    4
}

fn default_separations() -> Vec<usize> {
    (2..=12).collect()
}

fn default_longshort_block() -> usize {
    6
}

fn default_deltas() -> Vec<usize> {
    (1..=10).collect()
}

fn default_n_big() -> usize {
    80
}

impl GaussianConditionParams {
    pub fn with_kappa(kappa: f64) -> Self {
        Self {
            kappa,
            block: default_block(),
            separations: default_separations(),
            n_total: default_ring(),
            longshort_block: default_longshort_block(),
            deltas: default_deltas(),
            n_big: default_n_big(),
        }
    }
}

/// `(decayrepeat, longshort)` for a nearest-neighbour harmonic ring.
pub fn check_conditions_gaussian(p: &GaussianConditionParams, exec: Execution) -> Result<(ConditionReport, ConditionReport)> {
    let env = format!("harmonic ring κ={}", p.kappa);
    let t1 = gaussian::theorem1_decay_experiment_with(p.kappa, p.block, &p.separations, p.n_total, exec)?;
    let samples = t1
        .samples
        .iter()
        .map(|s| Sample { series: p.block, abscissa: s.separation as f64, value: s.bound })
        .collect();
    let notes = vec![
        format!("samples: √(2 I(A:B)) for two blocks of {} sites on a ring of {}", p.block, p.n_total),
        "v > 2 blocks follow by the triangle inequality over adjacent pairs".into(),
    ];
    let decay = assemble(Condition::Decayrepeat, env.clone(), samples, None, notes)?;

    let ls = gaussian::longshort_covariance_experiment_with(p.kappa, p.longshort_block, &p.deltas, p.n_big, exec)?;
    let samples = ls
        .samples
        .iter()
        .map(|s| Sample { series: p.longshort_block, abscissa: s.delta as f64, value: s.norm_difference })
        .collect();
    let notes = vec![format!(
        "samples: ‖γ^l(l+Δ) - γ^l({})‖ (operator norm) for l = {}",
        p.n_big, p.longshort_block
    )];
    let longshort = assemble(Condition::Longshort, env, samples, None, notes)?;
    Ok((decay, longshort))
}
