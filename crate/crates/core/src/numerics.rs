//! Shared numerical primitives: Shannon entropies, capacity assembly, affine
//! and exponential fits, bisection, and the Perron pair of positive matrices.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::symmetric_eigen;

/// Entries below zero but above this are treated as rounding noise and clipped.
pub const NEGATIVE_CLIP: f64 = 1e-12;
/// Allowed deviation of the total probability from one.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// A normalized probability vector, e.g. the computational-basis diagonal of
/// an environment state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbDist {
    values: Vec<f64>,
}

impl ProbDist {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("empty probability vector");
        }
        for (i, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                return invalid(format!("entry {i} is not finite"));
            }
            if *v < -NEGATIVE_CLIP {
                return invalid(format!("entry {i} is negative ({v:e})"));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return invalid(format!("probabilities sum to {total}, not 1"));
        }
        Ok(Self { values })
    }

    pub fn uniform(n: usize) -> Self {
        Self { values: vec![1.0 / n as f64; n] }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut values = vec![0.0; n];
        values[at] = 1.0;
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }

    /// Product distribution `self ⊗ other`, `self` index most significant.
    pub fn product(&self, other: &ProbDist) -> ProbDist {
        let mut values = Vec::with_capacity(self.len() * other.len());
        for p in &self.values {
            for q in &other.values {
                values.push(p * q);
            }
        }
        ProbDist { values }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Base {
    Two,
    E,
}

impl Base {
    fn log(self, x: f64) -> f64 {
        match self {
            Base::Two => x.log2(),
            Base::E => x.ln(),
        }
    }
}

/// `-Σ p log p` with `0 log 0 = 0`.
pub fn shannon_entropy(p: &ProbDist, base: Base) -> f64 {
    entropy_of_weights(p.values(), base).max(0.0)
}

/// Entropy of an already validated slice of probabilities.
pub(crate) fn entropy_of_weights(p: &[f64], base: Base) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * base.log(x)).sum::<f64>()
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_of_weights(&[p, 1.0 - p], Base::Two)
}

/// Finite-n coherent information `n log2 d - S(Diag)`, in bits.
pub fn coherent_info_bits(n: usize, d: usize, s_diag_bits: f64) -> Result<f64> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    if d < 2 {
        return invalid("d must be at least 2");
    }
    let max = n as f64 * (d as f64).log2();
    if !(s_diag_bits.is_finite()) || s_diag_bits < -NORMALIZATION_TOL || s_diag_bits > max + NORMALIZATION_TOL {
        return invalid(format!("diagonal entropy {s_diag_bits} outside [0, {max}]"));
    }
    Ok((max - s_diag_bits).clamp(0.0, max))
}

/// Least-squares line through `(n, S_n)` samples. The slope estimates the
/// entropy rate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitLine {
    pub slope: f64,
    pub intercept: f64,
    pub max_abs_residual: f64,
    pub window: Vec<f64>,
}

impl FitLine {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn distinct_abscissae(points: &[(f64, f64)]) -> usize {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    xs.len()
}

pub fn entropy_rate_estimate(points: &[(f64, f64)]) -> Result<FitLine> {
    if points.len() < 3 {
        return invalid(format!("need at least 3 points, got {}", points.len()));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return invalid("non-finite sample");
    }
    if distinct_abscissae(points) != points.len() {
        return invalid("abscissae must be distinct");
    }
    let (slope, intercept) = least_squares(points);
    let max_abs_residual = points
        .iter()
        .map(|&(x, y)| (y - (slope * x + intercept)).abs())
        .fold(0.0, f64::max);
    Ok(FitLine { slope, intercept, max_abs_residual, window: points.iter().map(|p| p.0).collect() })
}

/// Result of regressing `ln y` on the abscissa.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub log_amplitude: f64,
    /// Per unit abscissa; negative for decaying data.
    pub rate: f64,
    /// Exponent of an optional `s^E` prefactor.
    pub poly_exponent: Option<f64>,
    pub r_squared: f64,
}

impl DecayFit {
    pub fn eval(&self, s: f64) -> f64 {
        let poly = self.poly_exponent.map_or(0.0, |e| e * s.ln());
        (self.log_amplitude + self.rate * s + poly).exp()
    }
}

fn r_squared(ys: &[f64], fitted: &[f64]) -> f64 {
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = ys.iter().zip(fitted).map(|(y, f)| (y - f).powi(2)).sum();
    if ss_tot <= f64::EPSILON * ys.iter().map(|y| y * y).sum::<f64>() {
        return if ss_res <= 1e-24 { 1.0 } else { 0.0 };
    }
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}

fn check_decay_points(points: &[(f64, f64)]) -> Result<()> {
    if points.len() < 3 {
        return invalid(format!("need at least 3 points, got {}", points.len()));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0) || !p.1.is_finite() || !p.0.is_finite()) {
        return invalid(format!("decay samples must be finite and positive, got ({}, {})", p.0, p.1));
    }
    if distinct_abscissae(points) < 2 {
        return invalid("need at least two distinct abscissae");
    }
    Ok(())
}

/// Fit `y = A e^{rate s}` by linear regression of `ln y` on `s`.
pub fn fit_exponential_decay(points: &[(f64, f64)]) -> Result<DecayFit> {
    check_decay_points(points)?;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(s, y)| (s, y.ln())).collect();
    let (rate, log_amplitude) = least_squares(&logs);
    let ys: Vec<f64> = logs.iter().map(|p| p.1).collect();
    let fitted: Vec<f64> = logs.iter().map(|p| log_amplitude + rate * p.0).collect();
    Ok(DecayFit { log_amplitude, rate, poly_exponent: None, r_squared: r_squared(&ys, &fitted) })
}

/// Fit `y = A s^E e^{rate s}` (the `r^k λ^r` envelope of a transfer power with
/// a Jordan block). Needs at least four points with positive abscissae.
pub fn fit_power_exponential_decay(points: &[(f64, f64)]) -> Result<DecayFit> {
    check_decay_points(points)?;
    if points.len() < 4 || points.iter().any(|p| p.0 <= 0.0) {
        return invalid("power-exponential fit needs >= 4 points with positive abscissae");
    }
    let n = points.len();
    let design = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => points[i].0,
        _ => points[i].0.ln(),
    });
    let rhs = DVector::from_iterator(n, points.iter().map(|p| p.1.ln()));
    let svd = design.clone().svd(true, true);
    let coef = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::InvalidInput(format!("degenerate design matrix: {e}")))?;
    let fitted = &design * &coef;
    let ys: Vec<f64> = rhs.iter().copied().collect();
    let fitted: Vec<f64> = fitted.iter().copied().collect();
    Ok(DecayFit {
        log_amplitude: coef[0],
        rate: coef[1],
        poly_exponent: Some(coef[2]),
        r_squared: r_squared(&ys, &fitted),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RootResult {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Bisection for a sign change of `f` on `[a, b]`; stops at the first midpoint
/// with `|f| <= tol`.
pub fn find_root_bisect<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<RootResult> {
    if !(a < b) || !(tol > 0.0) {
        return invalid("need a < b and tol > 0");
    }
    let (mut lo, mut hi) = (a, b);
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo.abs() <= tol {
        return Ok(RootResult { x: lo, residual: f_lo.abs(), iterations: 0 });
    }
    if f_hi.abs() <= tol {
        return Ok(RootResult { x: hi, residual: f_hi.abs(), iterations: 0 });
    }
    if f_lo.signum() == f_hi.signum() {
        return invalid(format!("no sign change on [{a}, {b}]"));
    }
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid.abs() <= tol {
            return Ok(RootResult { x: mid, residual: f_mid.abs(), iterations });
        }
        if mid <= lo || mid >= hi {
            return Err(Error::NoConvergence { iterations, residual: f_mid.abs() });
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
}

/// Perron root and positive eigenvectors of an entrywise-positive matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PerronPair {
    pub value: f64,
    pub left: DVector<f64>,
    pub right: DVector<f64>,
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax();
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= 1e-14 * scale))
}

fn positive_direction(v: DVector<f64>) -> Option<DVector<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let v = v.map(f64::abs);
    let norm = v.norm();
    (norm > 0.0).then(|| v / norm)
}

fn null_vector(m: &DMatrix<f64>) -> Option<DVector<f64>> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
    Some(v_t.row(idx).transpose())
}

/// Polish a direction with power steps. For a positive matrix and nonnegative
/// vector every product is a sum of positive terms, so tiny components come out
/// with full relative precision.
fn power_polish(m: &DMatrix<f64>, mut v: DVector<f64>, max_steps: usize, tol: f64) -> DVector<f64> {
    for _ in 0..max_steps {
        let w = m * &v;
        let w = &w / w.norm();
        let delta = (&w - &v).amax();
        v = w;
        if delta <= tol {
            break;
        }
    }
    v
}

/// Perron eigenvalue with left and right eigenvectors normalized so that
/// `left · right = 1` (right normalized to unit sum).
pub fn perron_eigen(m: &DMatrix<f64>) -> Result<PerronPair> {
    if !m.is_square() || m.nrows() == 0 {
        return invalid("perron_eigen needs a nonempty square matrix");
    }
    if let Some(x) = m.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return invalid(format!("matrix entries must be strictly positive, found {x}"));
    }
    let scale = m.amax();
    let a = m / scale;
    let n = a.nrows();
    let ones = DVector::from_element(n, 1.0 / (n as f64).sqrt());

    let (right0, left0) = if is_symmetric(&a) {
        let eig = symmetric_eigen(a.clone());
        let idx = eig.eigenvalues.imax();
        let v = positive_direction(eig.eigenvectors.column(idx).into_owned());
        (v.clone(), v)
    } else {
        let lambda = a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let shift = DMatrix::identity(n, n) * lambda;
        let r = null_vector(&(&a - &shift)).and_then(positive_direction);
        let l = null_vector(&(a.transpose() - &shift)).and_then(positive_direction);
        (r, l)
    };
    // Fall back to plain power iteration from the uniform vector when the
    // decomposition did not give a usable direction.
    let (right, left) = match (right0, left0) {
        (Some(r), Some(l)) => (power_polish(&a, r, 8, 0.0), power_polish(&a.transpose(), l, 8, 0.0)),
        _ => (
            power_polish(&a, ones.clone(), 100_000, 1e-15),
            power_polish(&a.transpose(), ones, 100_000, 1e-15),
        ),
    };
    let value = left.dot(&(&a * &right)) / left.dot(&right);
    let right = &right / right.sum();
    let left = &left / left.dot(&right);
    Ok(PerronPair { value: value * scale, left, right })
}
