//! Dephasing channels driven by a classical d-state Markov chain.
//!
//! Transition matrices use the column convention `p_i(s+1) = Σ_j M_ij p_j(s)`:
//! every column is a probability distribution over the next state. Row
//! stochastic input is rejected rather than silently transposed.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::numerics::{entropy_of_weights, shannon_entropy, Base, ProbDist};

/// Column sums must match one to this tolerance.
pub const COLUMN_SUM_TOL: f64 = 1e-10;
/// Eigenvalues within this distance of one count towards the fixed-point multiplicity.
pub const UNIT_EIGENVALUE_GAP: f64 = 1e-8;
/// Largest `n log2 d` accepted by the path enumeration oracle.
pub const ENUMERATION_BITS: f64 = 24.0;

#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix {
    m: DMatrix<f64>,
}

impl StochasticMatrix {
    /// Build from `d` columns, `columns[j][i] = M_ij` (probability of `j -> i`).
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let d = columns.len();
        if d < 2 {
            return invalid("a Markov chain needs at least 2 states");
        }
        if let Some(j) = columns.iter().position(|c| c.len() != d) {
            return invalid(format!("column {j} has length {}, expected {d}", columns[j].len()));
        }
        let m = DMatrix::from_fn(d, d, |i, j| columns[j][i]);
        Self::from_matrix(m)
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() < 2 {
            return invalid("transition matrix must be square with d >= 2");
        }
        if m.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return invalid("transition probabilities must be finite and nonnegative");
        }
        for j in 0..m.ncols() {
            let s = m.column(j).sum();
            if (s - 1.0).abs() > COLUMN_SUM_TOL {
                return invalid(format!(
                    "column {j} sums to {s}; matrices are column-stochastic (p(s+1) = M p(s))"
                ));
            }
        }
        Ok(Self { m })
    }

    pub fn d(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// `M_ij`, the probability of moving from `j` to `i`.
    pub fn transition(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.d()).map(|j| self.m.column(j).iter().copied().collect()).collect()
    }

    /// Simultaneous relabelling of states: new state `k` is old state `perm[k]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let d = self.d();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true)) {
            return invalid("relabelling must be a permutation");
        }
        Self::from_matrix(DMatrix::from_fn(d, d, |i, j| self.m[(perm[i], perm[j])]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarkovCapacityReport {
    pub stationary: ProbDist,
    pub column_entropies: Vec<f64>,
    pub entropy_rate_bits: f64,
    pub capacity_bits: f64,
}

fn reachable(d: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; d];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..d {
            if !seen[v] && edge(u, v) {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Strong connectivity of the graph with an edge `j -> i` whenever `M_ij > 0`.
pub fn check_irreducible(m: &StochasticMatrix) -> bool {
    let d = m.d();
    let forward = reachable(d, |u, v| m.transition(v, u) > 0.0);
    let backward = reachable(d, |u, v| m.transition(u, v) > 0.0);
    forward.iter().chain(backward.iter()).all(|&x| x)
}

fn fixed_point_residual(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (m * v - v).amax()
}

/// Unique stationary distribution of an irreducible chain.
pub fn stationary(m: &StochasticMatrix) -> Result<ProbDist> {
    if !check_irreducible(m) {
        return Err(Error::NoUniqueStationary("chain is reducible".into()));
    }
    let a = m.matrix();
    let d = m.d();
    let unit = a
        .complex_eigenvalues()
        .iter()
        .filter(|z| (*z - num_complex::Complex64::new(1.0, 0.0)).norm() <= UNIT_EIGENVALUE_GAP)
        .count();
    if unit != 1 {
        return Err(Error::NoUniqueStationary(format!("eigenvalue 1 has multiplicity {unit}")));
    }

    let shifted = a - DMatrix::<f64>::identity(d, d);
    let svd = shifted.svd(false, true);
    let mut v = svd.v_t.and_then(|vt| {
        let idx = svd.singular_values.imin();
        let v = vt.row(idx).transpose().map(f64::abs);
        let s = v.sum();
        (s > 0.0).then(|| v / s)
    });
    if v.as_ref().is_none_or(|v| fixed_point_residual(a, v) > 1e-12) {
        // Lazy power iteration converges for periodic chains too.
        let lazy = (a + DMatrix::<f64>::identity(d, d)) * 0.5;
        let mut w = DVector::from_element(d, 1.0 / d as f64);
        for _ in 0..1_000_000 {
            let next = &lazy * &w;
            let done = (&next - &w).amax() <= 1e-16;
            w = next;
            if done {
                break;
            }
        }
        v = Some(&w / w.sum());
    }
    let v = v.expect("stationary vector");
    let resid = fixed_point_residual(a, &v);
    if resid > 1e-10 {
        return Err(Error::NoUniqueStationary(format!("fixed-point residual {resid:e}")));
    }
    ProbDist::new(v.iter().copied().collect())
}

/// Shannon entropy (bits) of every column.
pub fn column_entropies(m: &StochasticMatrix) -> Vec<f64> {
    (0..m.d())
        .map(|j| {
            let col: Vec<f64> = m.matrix().column(j).iter().copied().collect();
            entropy_of_weights(&col, Base::Two).max(0.0)
        })
        .collect()
}

/// Entropy rate `Σ_i v_i H_i` in bits.
pub fn entropy_rate(m: &StochasticMatrix) -> Result<f64> {
    let v = stationary(m)?;
    Ok(v.values().iter().zip(column_entropies(m)).map(|(vi, hi)| vi * hi).sum())
}

/// Capacity `log2 d - Σ v_i H_i` with the full breakdown.
pub fn capacity(m: &StochasticMatrix) -> Result<MarkovCapacityReport> {
    let stationary = stationary(m)?;
    let column_entropies = column_entropies(m);
    let log_d = (m.d() as f64).log2();
    let entropy_rate_bits: f64 =
        stationary.values().iter().zip(&column_entropies).map(|(v, h)| v * h).sum::<f64>().clamp(0.0, log_d);
    Ok(MarkovCapacityReport {
        stationary,
        column_entropies,
        entropy_rate_bits,
        capacity_bits: log_d - entropy_rate_bits,
    })
}

fn subtree_entropy(m: &DMatrix<f64>, last: usize, prob: f64, remaining: usize) -> f64 {
    if prob == 0.0 {
        return 0.0;
    }
    if remaining == 0 {
        return -prob * prob.log2();
    }
    (0..m.nrows())
        .map(|next| subtree_entropy(m, next, prob * m[(next, last)], remaining - 1))
        .sum()
}

/// Exact Shannon entropy (bits) of the length-`n` path distribution
/// `p(x_1..x_n) = p0(x_1) Π M_{x_{t+1} x_t}` by full enumeration. `p0`
/// defaults to the stationary distribution.
pub fn brute_force_diag_entropy(m: &StochasticMatrix, p0: Option<&ProbDist>, n: usize) -> Result<f64> {
    brute_force_diag_entropy_with(m, p0, n, Execution::default())
}

pub fn brute_force_diag_entropy_with(
    m: &StochasticMatrix,
    p0: Option<&ProbDist>,
    n: usize,
    exec: Execution,
) -> Result<f64> {
    let d = m.d();
    if n == 0 {
        return invalid("path length must be at least 1");
    }
    let bits = n as f64 * (d as f64).log2();
    if bits > ENUMERATION_BITS + 1e-9 {
        return Err(Error::EnumerationTooLarge(format!("{d}^{n} paths ({bits:.1} bits > {ENUMERATION_BITS})")));
    }
    let p0 = match p0 {
        Some(p) if p.len() != d => return invalid("initial distribution has wrong dimension"),
        Some(p) => p.clone(),
        None => stationary(m)?,
    };
    // Split the tree at a prefix depth that yields enough independent work items.
    let depth = (1..=n).find(|&k| d.pow(k as u32) >= 256).unwrap_or(n);
    let prefixes: Vec<(usize, f64)> = (0..d.pow(depth as u32))
        .map(|code| {
            let mut digits = Vec::with_capacity(depth);
            let mut c = code;
            for _ in 0..depth {
                digits.push(c % d);
                c /= d;
            }
            digits.reverse();
            let mut p = p0.values()[digits[0]];
            for w in digits.windows(2) {
                p *= m.transition(w[1], w[0]);
            }
            (digits[depth - 1], p)
        })
        .collect();
    let parts = exec.map(&prefixes, |&(last, p)| subtree_entropy(m.matrix(), last, p, n - depth));
    Ok(parts.iter().sum())
}

/// Shannon entropy of the path distribution, for callers that want the
/// per-step distribution itself (small `n` only).
pub fn path_distribution(m: &StochasticMatrix, p0: &ProbDist, n: usize) -> Result<ProbDist> {
    let d = m.d();
    if n as f64 * (d as f64).log2() > ENUMERATION_BITS {
        return Err(Error::EnumerationTooLarge(format!("{d}^{n} paths")));
    }
    let mut probs = p0.values().to_vec();
    for _ in 1..n {
        let mut next = Vec::with_capacity(probs.len() * d);
        for (idx, p) in probs.iter().enumerate() {
            let last = idx % d;
            for x in 0..d {
                next.push(p * m.transition(x, last));
            }
        }
        probs = next;
    }
    let dist = ProbDist::new(probs)?;
    debug_assert!(shannon_entropy(&dist, Base::Two).is_finite());
    Ok(dist)
}
