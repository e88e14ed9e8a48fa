//! Acceptance criteria 1-10, one pass/fail line each.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use memchan_core::gaussian::{self, CovarianceMatrix, PotentialMatrix, SymplecticSpectrum};
use memchan_core::ising::{self, IsingParams};
use memchan_core::markov::{self, StochasticMatrix};
use memchan_core::mps::{self, MpsSpec, Rank1Params};
use memchan_core::numerics::{shannon_entropy, Base, ProbDist};
use memchan_core::spin::{self, ModelFamily, SolverOptions};
use memchan_core::conditions::{self, DecayrepeatParams, LongshortPlan};
use memchan_core::Execution;
use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn h2(p: f64) -> f64 {
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn random_chain(rng: &mut ChaCha8Rng, d: usize) -> StochasticMatrix {
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|_| {
            let w: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
        .collect();
    StochasticMatrix::from_columns(&cols).unwrap()
}

fn criterion_1() -> Outcome {
    let bsc = StochasticMatrix::from_columns(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
    let cap = markov::capacity(&bsc).unwrap().capacity_bits;
    let closed = (cap - (1.0 - h2(0.1))).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let d = 2 + k % 3;
        let m = random_chain(&mut rng, d);
        let top = if d == 4 { 12 } else { 14 };
        let pts: Vec<(f64, f64)> =
            (8..=top).map(|n| (n as f64, markov::brute_force_diag_entropy(&m, None, n).unwrap())).collect();
        let brute = (d as f64).log2() - slope(&pts);
        worst = worst.max((markov::capacity(&m).unwrap().capacity_bits - brute).abs());
    }
    check(closed < 1e-9 && worst < 2e-3, format!("BSC error {closed:.1e}, 20 chains max error {worst:.1e}"))
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..5 {
        for k in 0..10 {
            let beta = 0.2 + 0.4 * i as f64;
            let coupling = -2.0 + 0.45 * k as f64;
            let x = beta * coupling;
            let oracle = (2.0 * x.cosh()).ln() - x * x.tanh();
            let p = IsingParams::new(beta, coupling + 0.3, 0.0, 0.3).unwrap();
            worst = worst.max((ising::entropy_per_site(&p).unwrap() - oracle).abs());
        }
    }
    let mut brute: f64 = 0.0;
    for (beta, j, m) in [(0.5, 1.0, 0.0), (1.0, 1.0, 0.3), (0.8, -0.7, 0.5), (0.3, 2.0, -0.4)] {
        let p = IsingParams::new(beta, j, m, 0.0).unwrap();
        let per_site = ising::brute_force_entropy(&p, 14, true).unwrap() / 14.0;
        brute = brute.max((per_site - ising::entropy_per_site(&p).unwrap()).abs());
    }
    check(worst < 1e-10 && brute < 5e-3, format!("closed form max error {worst:.1e}, N=14 enumeration max error {brute:.1e}"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let p = Rank1Params::new(rng.gen_range(0.2..1.0), rng.gen_range(0.2..1.0), rng.gen_range(0.05..1.0)).unwrap();
        let s = DMatrix::from_fn(2, 2, |i, j| Complex::new(rng.gen_range(-1.0..1.0) + if i == j { 2.0 } else { 0.0 }, 0.0));
        let spec = mps::canonical_rank1_mps(&p).gauge(&s).unwrap();
        let closed = mps::capacity_rank1(&mps::rank1_params(&spec).unwrap()).unwrap();
        let ls: Vec<usize> = (8..=13).collect();
        let enumerated = mps::block_enumeration_capacity(&spec, &ls, Execution::default()).unwrap().capacity;
        worst = worst.max((closed - enumerated).abs());
    }
    check(worst < 1e-2, format!("10 gauged rank-1 specs, max |closed - enumerated| = {worst:.1e}"))
}

fn criterion_4() -> Outcome {
    let c = |g: f64| mps::wolf_capacity(g).unwrap();
    let asym = (1..=19).map(|k| 0.1 * k as f64).map(|g| (c(g) - c(-g)).abs()).fold(0.0, f64::max);
    let ends = c(0.0) == 1.0;
    let unit = c(1.0).abs().max(c(-1.0).abs());
    let slopes: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|&g| {
            let h = g / 100.0;
            ((c(g + h) - c(g - h)) / (2.0 * h)).abs()
        })
        .collect();
    let steepening = slopes.windows(2).all(|w| w[1] > w[0]);
    check(
        asym < 1e-12 && ends && unit < 1e-9 && steepening,
        format!("asymmetry {asym:.1e}, C(0)=1 {ends}, |C(±1)| {unit:.1e}, |dC/dg| {slopes:.3?}"),
    )
}

fn criterion_5() -> Outcome {
    let g: Vec<f64> = (0..=32).map(|k| 0.2 + 0.05 * k as f64).collect();
    let ns = [6, 8, 10, 12];
    let rows = spin::sweep(ModelFamily::TransverseIsing, &g, &ns, true, &SolverOptions::default(), Execution::default());
    let mut monotone = true;
    let mut steepest = Vec::new();
    for &n in &ns {
        let curve: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.outcome.as_ref().unwrap().capacity_bits).collect();
        monotone &= curve.windows(2).all(|w| w[1] <= w[0] + 1e-8);
        steepest.push(curve.windows(2).map(|w| (w[1] - w[0]).abs() / 0.05).fold(0.0, f64::max));
    }
    let increasing = steepest.windows(2).all(|w| w[1] > w[0]);
    check(monotone && increasing, format!("monotone {monotone}, max |ΔQ/Δg| by n {steepest:.4?}"))
}

fn criterion_6() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for g in [0.5, 2.0] {
        let w = spin::wolf_cross_check(8, g, &SolverOptions::default()).unwrap();
        ok &= w.overlap >= 1.0 - 1e-8 && w.entropy_gap <= 1e-6;
        lines.push(format!("g={g}: 1-overlap {:.1e}, entropy gap {:.1e}", 1.0 - w.overlap, w.entropy_gap));
    }
    check(ok, lines.join("; "))
}

fn mode_entropy(mu: f64) -> f64 {
    if mu <= 1.0 {
        return 0.0;
    }
    let (p, m) = ((mu + 1.0) / 2.0, (mu - 1.0) / 2.0);
    p * p.log2() - m * m.log2()
}

fn random_potential(rng: &mut ChaCha8Rng, n: usize, reach: usize, periodic: bool) -> PotentialMatrix {
    let mut v = DMatrix::zeros(n, n);
    for i in 0..n {
        for r in 1..=reach {
            if i + r < n || periodic {
                let j = (i + r) % n;
                let x = rng.gen_range(-0.5..0.5);
                v[(i, j)] = x;
                v[(j, i)] = x;
            }
        }
    }
    let shift = v.clone().symmetric_eigen().eigenvalues.min();
    for i in 0..n {
        v[(i, i)] = rng.gen_range(0.1..1.0) - shift;
    }
    PotentialMatrix::from_matrix(v, 2 * reach + 1, periodic).unwrap()
}

fn criterion_7() -> Outcome {
    let b = gaussian::fannes_threshold();
    let root_ok = (b - 0.17623008).abs() < 1e-7;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bound_ok = 0;
    for _ in 0..100 {
        let m = rng.gen_range(1..=6);
        let mu1: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0..5.0)).collect();
        let mu2: Vec<f64> = mu1.iter().map(|&x| (x + rng.gen_range(-b..b)).max(1.0)).collect();
        let bound = gaussian::fannes_gaussian_bound(&SymplecticSpectrum { mu: mu1.clone() }, &SymplecticSpectrum { mu: mu2.clone() }).unwrap();
        let diff = (mu1.iter().map(|&x| mode_entropy(x)).sum::<f64>() - mu2.iter().map(|&x| mode_entropy(x)).sum::<f64>()).abs();
        if bound.applicable && diff <= bound.bound_fine + 1e-12 {
            bound_ok += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let v = random_potential(&mut rng, 8 + 3 * k, 1 + k % 3, k % 2 == 0);
        worst = worst.max(gaussian::entropy_bits(&gaussian::ground_covariance(&v).unwrap()).unwrap());
    }
    check(
        root_ok && bound_ok == 100 && worst <= 1e-8,
        format!("B = {b:.10}, entropy bound holds on {bound_ok}/100 pairs, max pure-state entropy {worst:.1e} bits"),
    )
}

fn criterion_8() -> Outcome {
    let ds: Vec<usize> = (2..=12).collect();
    let r = gaussian::theorem1_decay_experiment(0.2, 4, &ds, 60).unwrap();
    let fit = r.fit.as_ref().ok_or("no fit")?;
    let v = PotentialMatrix::nearest_neighbor(60, 0.2, true).unwrap();
    let g = gaussian::ground_covariance(&v).unwrap();
    let f64_route = gaussian::mutual_info_and_trace_bound(&g, &[0, 1, 2, 3], &[6, 7, 8, 9]).unwrap();
    let agree = (f64_route.trace_bound - r.samples[0].bound).abs() < 1e-9;
    check(
        fit.rate < 0.0 && fit.r_squared >= 0.95 && agree,
        format!("rate {:.4}, r² {:.6}, d=2 bound matches f64 route {agree}", fit.rate, fit.r_squared),
    )
}

fn transfer_oracle(spec: &MpsSpec) -> f64 {
    let d2 = spec.bond() * spec.bond();
    let mut e = DMatrix::<Complex<f64>>::zeros(d2, d2);
    for q in spec.matrices() {
        e += q.kronecker(&q.map(|z| z.conj()));
    }
    let re = e.map(|z| z.re);
    let mut moduli: Vec<f64> = re.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    (moduli[1] / moduli[0]).ln()
}

fn criterion_9() -> Outcome {
    let spec = mps::wolf_mps(0.5);
    let predicted = transfer_oracle(&spec);
    let from_module = mps::transfer_spectrum(&spec).unwrap().predicted_rate();
    let p = DecayrepeatParams::new(vec![2, 3], (1..=6).collect(), 2);
    let decay = conditions::check_decayrepeat_mps(&spec, &p, Execution::default()).unwrap();
    let rates: Vec<f64> = decay.fits.iter().map(|f| f.fit.as_ref().map_or(f64::NAN, |f| f.rate)).collect();
    let decay_ok = rates.iter().all(|r| (r - predicted).abs() <= 0.2 * predicted.abs());
    let plan = LongshortPlan::Fixed { l: 4, deltas: (1..=8).collect() };
    let ls = conditions::check_longshort_mps(&spec, &plan, 40, conditions::DEFAULT_GAP_THRESHOLD, Execution::default()).unwrap();
    let monotone = ls.samples.windows(2).all(|w| w[1].value < w[0].value);
    let r2 = ls.primary_fit().map_or(0.0, |f| f.r_squared);
    check(
        decay_ok && monotone && r2 >= 0.9 && (from_module - predicted).abs() < 1e-9,
        format!("ln λ₂ = {predicted:.4}, decayrepeat rates {rates:.4?}, longshort monotone {monotone} r² {r2:.6}"),
    )
}

fn csv_reproducible() -> Result<bool, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |jobs: &str, name: &str| -> Result<Vec<u8>, String> {
        let status = Command::new(env!("CARGO_BIN_EXE_memchan"))
            .current_dir(dir.path())
            .env_remove("MEMCHAN_JOBS")
            .args(["qising-sweep", "--n", "6,8", "--g", "0.2:1.8:0.2", "--seed", "42", "--jobs", jobs, "--out", name])
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("memchan exited with {status}"));
        }
        std::fs::read(dir.path().join(name)).map_err(|e| e.to_string())
    };
    let a = run("1", "a.csv")?;
    Ok(a == run("1", "b.csv")? && a == run("4", "c.csv")?)
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut cases = 0;
    let mut failures = Vec::new();
    let mut expect = |ok: bool, what: &str| {
        cases += 1;
        if !ok {
            failures.push(what.to_string());
        }
    };
    for _ in 0..50 {
        let len = rng.gen_range(1..20);
        let w: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0f64).powi(3)).collect();
        let total: f64 = w.iter().sum();
        let p = ProbDist::new(w.iter().map(|x| x / total).collect()).unwrap();
        let h = shannon_entropy(&p, Base::Two);
        let mut rev = p.values().to_vec();
        rev.reverse();
        let hr = shannon_entropy(&ProbDist::new(rev).unwrap(), Base::Two);
        expect(h >= 0.0 && h <= (len as f64).log2() + 1e-12 && (h - hr).abs() < 1e-12, "probdist entropy");
    }
    for _ in 0..50 {
        let n = rng.gen_range(4..14);
        let (reach, periodic) = (rng.gen_range(1..3), rng.gen_bool(0.5));
        let v = random_potential(&mut rng, n, reach, periodic);
        let g = gaussian::ground_covariance(&v).unwrap();
        let k = rng.gen_range(1..n);
        let sites: Vec<usize> = (0..k).map(|i| (i * 7 + 3) % n).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let red = g.reduce(&sites).unwrap();
        let mu = red.symplectic_eigenvalues().unwrap().mu;
        let ex = red.x_block().symmetric_eigen();
        let root = &ex.eigenvectors * DMatrix::from_diagonal(&ex.eigenvalues.map(f64::sqrt)) * ex.eigenvectors.transpose();
        let inner = &root * red.p_block() * &root;
        let mut oracle: Vec<f64> = inner.symmetric_eigen().eigenvalues.iter().map(|w| w.max(0.0).sqrt()).collect();
        oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let agree = mu.iter().zip(&oracle).all(|(a, b)| (a - b).abs() < 1e-8 * b.max(1.0));
        let valid = CovarianceMatrix::new(red.matrix().clone()).is_ok();
        expect(mu.iter().all(|&m| m >= 1.0 - 1e-8) && agree && valid, "covariance uncertainty");
    }
    for _ in 0..40 {
        let d = rng.gen_range(2..5);
        let m = random_chain(&mut rng, d);
        let c = markov::capacity(&m).unwrap().capacity_bits;
        let perm: Vec<usize> = (0..d).rev().collect();
        let c2 = markov::capacity(&m.relabel(&perm).unwrap()).unwrap().capacity_bits;
        expect(c >= 0.0 && c <= (d as f64).log2() + 1e-12 && (c - c2).abs() < 1e-10, "markov capacity");
    }
    for _ in 0..40 {
        let p = IsingParams::new(rng.gen_range(0.0..3.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0)).unwrap();
        let flipped = IsingParams { m: -p.m, ..p };
        let c = ising::capacity(&p).unwrap();
        expect((0.0..=1.0).contains(&c) && (c - ising::capacity(&flipped).unwrap()).abs() < 1e-10, "ising capacity");
    }
    for _ in 0..40 {
        let (a, b, c) = (rng.gen_range(0.05..2.0), rng.gen_range(0.05..2.0), rng.gen_range(0.0..1.0));
        let cap = mps::capacity_rank1(&Rank1Params::new(a, b, c).unwrap()).unwrap();
        let swapped = mps::capacity_rank1(&Rank1Params::new(b, a, c).unwrap()).unwrap();
        expect((0.0..=1.0).contains(&cap) && (cap - swapped).abs() < 1e-10, "rank-1 capacity");
    }
    let csv = csv_reproducible()?;
    check(
        cases >= 200 && failures.is_empty() && csv,
        format!("{} randomized cases, {} failures {:?}, CSV byte-reproducible {csv}", cases, failures.len(), failures),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("Markov closed form and brute force", criterion_1, Duration::from_secs(60)),
        ("classical Ising entropy", criterion_2, Duration::from_secs(60)),
        ("rank-1 MPS two-route equality", criterion_3, Duration::from_secs(120)),
        ("Wolf capacity curve", criterion_4, Duration::from_secs(600)),
        ("quantum Ising sweep", criterion_5, Duration::from_secs(600)),
        ("Wolf ED vs MPS", criterion_6, Duration::from_secs(600)),
        ("Gaussian constants and bounds", criterion_7, Duration::from_secs(600)),
        ("block mutual-information decay", criterion_8, Duration::from_secs(60)),
        ("MPS forgetfulness conditions", criterion_9, Duration::from_secs(600)),
        ("property suites and CSV reproducibility", criterion_10, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget {budget:?}")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} {}: {} ({:.2}s) {}",
            k + 1,
            if ok { "PASS" } else { "FAIL" },
            name,
            elapsed.as_secs_f64(),
            detail
        );
    }
    println!("acceptance: {}/10 passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
