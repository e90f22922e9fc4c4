//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use flate2::read::GzDecoder;
use gcgm::{gen_synthetic, load_mnist_pair};
use gcgm_core::{
    reference_solve, residuals, support_of, AtomicSet, DataMatrix, Error, Ext, Loss, Penalty, Problem,
    ReferenceOptions, ReferenceSolution, RunOutput, ScreeningMode, Solver, SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-major inverse by Gauss-Jordan elimination with partial pivoting.
fn invert(m: &[f64], d: usize) -> Vec<f64> {
    let mut a = m.to_vec();
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        inv[i * d + i] = 1.0;
    }
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| a[i * d + col].abs().total_cmp(&a[j * d + col].abs())).unwrap();
        for k in 0..d {
            a.swap(col * d + k, piv * d + k);
            inv.swap(col * d + k, piv * d + k);
        }
        let p = a[col * d + col];
        assert!(p.abs() > 1e-12, "singular matrix");
        for k in 0..d {
            a[col * d + k] /= p;
            inv[col * d + k] /= p;
        }
        for r in 0..d {
            if r != col {
                let f = a[r * d + col];
                for k in 0..d {
                    a[r * d + k] -= f * a[col * d + k];
                    inv[r * d + k] -= f * inv[col * d + k];
                }
            }
        }
    }
    inv
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..m.len() / d).map(|r| dot(&m[r * d..(r + 1) * d], v)).collect()
}

// 1

fn conjugates() -> Verdict {
    let start = Instant::now();
    let pow = Penalty::power(2.0, 1.0).unwrap();
    let mut worst_pow = 0.0f64;
    for k in 0..=200 {
        let nu = 0.5 * k as f64;
        let got = pow.conjugate(nu).unwrap().to_f64();
        worst_pow = worst_pow.max((got - nu * nu / 2.0).abs());
    }

    let cap = 10.0;
    let samples = 100_000;
    let h = cap / samples as f64;
    let mut barrier_ok = true;
    let mut worst_gap = 0.0f64;
    for beta in [0.5, 1.0, 3.0] {
        let pen = Penalty::log_barrier(cap, beta, 1.0).unwrap();
        let phi = |xi: f64| -(cap - xi).ln() / beta - xi / (cap * beta) + cap.ln() / beta;
        let dphi = |xi: f64| 1.0 / (beta * (cap - xi)) - 1.0 / (cap * beta);
        for k in 1..=100 {
            let nu = 0.05 * k as f64;
            let closed = cap * nu - (cap * beta * nu + 1.0).ln() / beta;
            let arg = cap * cap * beta * nu / (cap * beta * nu + 1.0);
            let conj = pen.conjugate(nu).unwrap().to_f64();
            let step = pen.xi_step(nu).unwrap();
            barrier_ok &= (conj - closed).abs() <= 1e-12 * (1.0 + closed.abs());
            barrier_ok &= (step - arg).abs() <= 1e-12 * (1.0 + arg);
            let (best_i, best) = (0..samples)
                .map(|i| {
                    let xi = i as f64 * h;
                    (i, nu * xi - phi(xi))
                })
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            let xi_g = best_i as f64 * h;
            // concavity: the maximizer is within one cell, and the value within slope × cell
            let slack = (nu - dphi(xi_g)).abs() * h + 1e-12;
            barrier_ok &= conj >= best - 1e-12 && conj - best <= slack;
            barrier_ok &= (step - xi_g).abs() <= h;
            worst_gap = worst_gap.max(conj - best);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst_pow <= 1e-12 && barrier_ok && secs < 1.0,
        format!("power max err {worst_pow:.1e}; log-barrier closed forms vs 1e5 grid ok={barrier_ok} (max conj-grid {worst_gap:.1e}); {secs:.2}s"),
    )
}

// 2-5 share the synthetic references

struct Instance {
    seed: u64,
    lambda: f64,
    loss: Loss,
    set: AtomicSet,
    pen: Penalty,
    reference: ReferenceSolution,
}

fn synthetic_instances() -> Vec<Instance> {
    let mut out = Vec::new();
    for lambda in [0.01, 1.0] {
        for seed in 0..20 {
            let loss = Loss::logistic(gen_synthetic(seed, 100, 50).unwrap()).unwrap();
            let set = AtomicSet::signed_basis(50, 1.0).unwrap();
            let pen = Penalty::power(2.0, lambda).unwrap();
            let problem = Problem::new(&loss, &pen, &set).unwrap();
            let reference = reference_solve(problem, &ReferenceOptions::default()).unwrap();
            out.push(Instance { seed, lambda, loss, set, pen, reference });
        }
    }
    out
}

fn screened_run(inst: &Instance, mode: ScreeningMode) -> RunOutput {
    let problem = Problem::new(&inst.loss, &inst.pen, &inst.set).unwrap();
    let cfg = SolverConfig {
        max_iters: 10_000,
        gap_tolerance: 0.0,
        screening: mode,
        keep_iterates: true,
        ..SolverConfig::default()
    };
    Solver::new(problem, cfg).unwrap().run(|| 0.0).unwrap()
}

fn safety(instances: &[Instance], runs: &[(usize, RunOutput)]) -> Verdict {
    let mut violations = 0;
    let mut unreached = 0;
    for (i, out) in runs {
        let r = &instances[*i].reference;
        if !r.reached_tolerance {
            unreached += 1;
        }
        for it in &out.iterates {
            violations += r.support_ids.iter().filter(|id| it.active_ids.binary_search(id).is_err()).count();
        }
    }
    let worst = instances.iter().map(|i| i.reference.gap).fold(0.0, f64::max);
    verdict(
        violations == 0 && unreached == 0,
        format!("{} runs (20 seeds x 2 lambdas x prune/report): {violations} violations; references short of tol: {unreached}; worst reference gap {worst:.1e}", runs.len()),
    )
}

/// Slope over `[1e2, 1e4]`, truncated where the series first reaches the
/// roundoff floor. `None` when the whole window sits at or below the floor.
fn slope_above_floor(points: &[(f64, f64)], floor: f64) -> Option<Result<f64, Error>> {
    let window: Vec<(f64, f64)> = points.iter().copied().filter(|(t, _)| (1e2..=1e4).contains(t)).collect();
    let end = window.iter().position(|(_, v)| *v <= floor).unwrap_or(window.len());
    if end < 5 && window[end..].iter().all(|(_, v)| *v <= floor) {
        return None;
    }
    Some(gcgm_core::rate_slope(&window[..end], 1e2, 1e4))
}

fn rate_and_residual(instances: &[Instance], runs: &[(usize, RunOutput)]) -> (Verdict, Verdict) {
    let mut worst_obj = f64::NEG_INFINITY;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut fit_errors = 0;
    let mut checked = 0;
    let mut violations = 0;
    let mut fits = 0;
    let mut at_floor = 0;
    for (i, out) in runs {
        let inst = &instances[*i];
        if inst.lambda != 1.0 {
            continue;
        }
        let sym = inst.set.symmetrize().unwrap();
        let series =
            residuals(&inst.loss, &sym, &out.trace, &out.iterates, &inst.reference, out.smoothness).unwrap();
        for r in &series.records {
            checked += 1;
            if r.gradient_error > r.gradient_bound + 1e-8 {
                violations += 1;
            }
        }
        let floor = 1e-12 * (1.0 + inst.reference.objective.abs());
        for (column, worst) in [
            (series.column(|r| r.objective_error), &mut worst_obj),
            (series.column(|r| r.min_gap), &mut worst_gap),
        ] {
            match slope_above_floor(&column, floor) {
                Some(Ok(s)) => {
                    *worst = worst.max(s);
                    fits += 1;
                }
                Some(Err(_)) => fit_errors += 1,
                None => at_floor += 1,
            }
        }
    }
    (
        verdict(
            fit_errors == 0 && worst_obj <= -0.9 && worst_gap <= -0.9,
            format!("20 runs at lambda=1: {fits} fitted series, worst slope objective error {worst_obj:.3}, min_gap {worst_gap:.3} over t in [1e2,1e4]; {at_floor} series at the roundoff floor throughout; failed fits {fit_errors}"),
        ),
        verdict(violations == 0, format!("{checked} traced iterates: {violations} violations of the residual bound")),
    )
}

fn identification(instances: &[Instance]) -> Verdict {
    const CAP: usize = 100_000;
    let mut checked = 0;
    let mut mismatched = 0;
    let mut eligible = 0;
    let mut first_t = Vec::new();
    for inst in instances {
        let delta = match inst.reference.delta {
            Ext::Finite(d) if d > 0.0 => d,
            _ => continue,
        };
        eligible += 1;
        let problem = Problem::new(&inst.loss, &inst.pen, &inst.set).unwrap();
        let cfg = SolverConfig {
            max_iters: CAP,
            gap_tolerance: 0.0,
            screening: ScreeningMode::PruneLmo,
            ..SolverConfig::default()
        };
        let mut solver = Solver::new(problem, cfg).unwrap();
        let l = solver.smoothness();
        loop {
            let out = solver.evaluate(0.0).unwrap();
            if (l * out.record.min_gap).sqrt() < delta / 4.0 {
                checked += 1;
                first_t.push(out.t);
                if solver.state().mask.active_ids() != inst.reference.support_ids {
                    mismatched += 1;
                    eprintln!("seed {} lambda {}: S differs from the reference support at t={}", inst.seed, inst.lambda, out.t);
                }
                break;
            }
            if out.t >= CAP {
                break;
            }
            solver.advance(&out).unwrap();
        }
    }
    let tmax = first_t.iter().max().copied().unwrap_or(0);
    verdict(
        checked > 0 && mismatched == 0,
        format!("{eligible} instances with delta>0, {checked} reached the threshold within {CAP} iterations (latest t={tmax}); {mismatched} mismatches"),
    )
}

// 6

fn invariance() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut atom_mismatch = 0;
    let mut steps = 0;
    for _ in 0..10 {
        let d = rng.random_range(2..=10);
        let n = 2 * d;
        let m = 2 * d + 2;
        let atoms: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let set = AtomicSet::explicit(d, &atoms, 1.0).unwrap().symmetrize().unwrap();
        let a: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut map = vec![0.0; d * d];
        for (i, v) in map.iter_mut().enumerate() {
            *v = if i / d == i % d { 1.0 } else { 0.0 } + 0.4 * rng.random_range(-1.0..1.0);
        }
        let data = DataMatrix::new(n, d, a, b).unwrap();
        let moved = data.times(&invert(&map, d)).unwrap();
        let loss = Loss::quadratic(data);
        let loss_m = Loss::quadratic(moved);
        let set_m = set.map_linear(&map).unwrap();
        let l = loss.smoothness_wrt(&set.symmetrize().unwrap()).unwrap();
        let pen = Penalty::power(2.0, l).unwrap();
        let cfg = SolverConfig { max_iters: 200, gap_tolerance: 0.0, ..SolverConfig::default() };
        let mut s = Solver::new(Problem::new(&loss, &pen, &set).unwrap(), cfg.clone()).unwrap();
        let mut sm = Solver::new(Problem::new(&loss_m, &pen, &set_m).unwrap(), cfg).unwrap();
        for _ in 0..200 {
            let o = s.step(0.0).unwrap();
            let om = sm.step(0.0).unwrap();
            steps += 1;
            if o.atom != om.atom {
                atom_mismatch += 1;
            }
            for (u, v) in [(o.kappa, om.kappa), (o.sigma, om.sigma), (o.xi, om.xi), (o.gap.to_f64(), om.gap.to_f64())] {
                worst = worst.max((u - v).abs());
            }
            let mapped = mat_vec(&map, &s.state().x);
            for (u, v) in mapped.iter().zip(&sm.state().x) {
                worst = worst.max((u - v).abs());
            }
        }
    }
    verdict(
        worst <= 1e-7 && atom_mismatch == 0,
        format!("10 maps, {steps} steps: max |difference| in kappa/sigma/xi/gap/Mx {worst:.1e}; LMO atom mismatches {atom_mismatch}"),
    )
}

// 7

fn divergence_paths() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("one.csv");
    std::fs::write(&data, "1 1\n1,2\n").unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_gcgm"))
        .args(["synthetic", "--loss", "quadratic", "--alpha", "1", "--lambda", "1", "--iters", "10", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    let stderr = String::from_utf8_lossy(&status.stderr);
    let code = status.status.code();
    let unbounded_ok = code == Some(2) && stderr.contains("unbounded at t=1");

    let mut diverged = 0;
    let mut peaks = Vec::new();
    let seeds = 0..5u64;
    for seed in seeds.clone() {
        let loss = Loss::logistic(gen_synthetic(seed, 100, 50).unwrap()).unwrap();
        let set = AtomicSet::signed_basis(50, 1.0).unwrap();
        let pen = Penalty::power(1.2, 0.01).unwrap();
        let cfg = SolverConfig { max_iters: 10_000, gap_tolerance: 0.0, ..SolverConfig::default() };
        let mut peak = 0.0f64;
        let result = Solver::new(Problem::new(&loss, &pen, &set).unwrap(), cfg).unwrap().run_observed(
            || 0.0,
            |_, state| {
                peak = peak.max(state.x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                gcgm_core::Control::Continue
            },
        );
        if matches!(result, Err(ref f) if matches!(f.error, Error::Divergence { .. })) {
            diverged += 1;
        }
        peaks.push(peak);
    }
    let peak = peaks.iter().copied().fold(0.0, f64::max);
    verdict(
        unbounded_ok && diverged == seeds.count(),
        format!(
            "alpha=1 1D c=2: exit {code:?} ({}); alpha=1.2 lambda=0.01: {diverged}/5 seeds diverged, peak |x|_inf {peak:.2e} vs bound 1e12",
            stderr.lines().last().unwrap_or("")
        ),
    )
}

// 8

fn gauge_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d = 6;
    let basis: Vec<Vec<f64>> = (0..2 * d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i / 2] = if i % 2 == 0 { 1.0 } else { -1.0 };
            e
        })
        .collect();
    let set = AtomicSet::explicit(d, &basis, 1.0).unwrap();
    let mut worst_gauge = 0.0f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        worst_gauge = worst_gauge.max((set.gauge_value(&x).unwrap() - l1).abs());
    }

    let n = 12;
    let a: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let loss = Loss::quadratic(DataMatrix::new(n, d, a.clone(), b.clone()).unwrap());
    let lambda = 0.5;
    let pen = Penalty::power(2.0, lambda).unwrap();
    let problem = Problem::new(&loss, &pen, &set).unwrap();
    let mut ata = vec![0.0; d * d];
    let mut atb = vec![0.0; d];
    for i in 0..n {
        let row = &a[i * d..(i + 1) * d];
        for j in 0..d {
            atb[j] += row[j] * b[i];
            for k in 0..d {
                ata[j * d + k] += row[j] * row[k];
            }
        }
    }
    let ata_inv = invert(&ata, d);
    // sup_x gᵀx − ½‖Ax − b‖², attained where Aᵀ(Ax − b) = g
    let f_star = |g: &[f64]| {
        let rhs: Vec<f64> = g.iter().zip(&atb).map(|(u, v)| u + v).collect();
        let x = mat_vec(&ata_inv, &rhs);
        let r: Vec<f64> = (0..n).map(|i| dot(&a[i * d..(i + 1) * d], &x) - b[i]).collect();
        dot(g, &x) - 0.5 * dot(&r, &r)
    };
    // sup_{ξ≥0} νξ − (λ/2)ξ² on a grid wide enough to hold the maximizer
    let phi_star = |nu: f64| {
        let top = 2.0 * nu.max(0.0) / lambda + 1.0;
        let samples = 100_000;
        let h = top / samples as f64;
        let best = (0..=samples).map(|i| i as f64 * h).fold(f64::NEG_INFINITY, |m, xi| m.max(nu * xi - 0.5 * lambda * xi * xi));
        (best, 0.5 * lambda * h * h)
    };
    let mut worst_gap = 0.0f64;
    for _ in 0..20 {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let kappa: f64 = x.iter().map(|v| v.abs()).sum();
        let cert = problem.certificate(&x, kappa).unwrap();
        let grad = loss.gradient(&x).unwrap();
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let sigma = basis.iter().map(|p| dot(p, &neg)).fold(f64::NEG_INFINITY, f64::max);
        let (ps, _) = phi_star(sigma);
        let dual = loss.value(&x).unwrap() + 0.5 * lambda * kappa * kappa + f_star(&grad) + ps;
        worst_gap = worst_gap.max((dual - cert.gap.to_f64()).abs());
    }
    verdict(
        worst_gauge <= 1e-9 && worst_gap <= 1e-6,
        format!("LP gauge vs l1 on 100 points: max err {worst_gauge:.1e}; dual-form vs primal gap on 20 states: max err {worst_gap:.1e}"),
    )
}

// 9

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/mnist").join(name)
}

fn gunzip(path: &Path) -> Vec<u8> {
    let mut out = Vec::new();
    GzDecoder::new(std::fs::File::open(path).unwrap()).read_to_end(&mut out).unwrap();
    out
}

fn mnist() -> Verdict {
    let images = fixture("train-images-idx3-ubyte.gz");
    let labels = fixture("train-labels-idx1-ubyte.gz");
    let data = load_mnist_pair(&images, &labels, (4, 9)).unwrap();
    let raw = gunzip(&labels);
    let fours = raw[8..].iter().filter(|&&l| l == 4).count();
    let nines = raw[8..].iter().filter(|&&l| l == 9).count();
    let neg = data.targets().iter().filter(|&&t| t == -1.0).count();
    let pos = data.targets().iter().filter(|&&t| t == 1.0).count();
    let load_ok = data.cols() == 784 && neg == fours && pos == nines && data.rows() == fours + nines;

    let d = data.cols();
    let loss = Loss::logistic(data).unwrap();
    let set = AtomicSet::signed_basis(d, 1.0).unwrap();
    let mut parts = Vec::new();
    let mut runs_ok = true;
    for lambda in [0.1, 0.01, 0.001] {
        let pen = Penalty::power(2.0, lambda).unwrap();
        let cfg = SolverConfig {
            max_iters: 10_000,
            gap_tolerance: 0.0,
            screening: ScreeningMode::PruneLmo,
            ..SolverConfig::default()
        };
        let out = Solver::new(Problem::new(&loss, &pen, &set).unwrap(), cfg).unwrap().run(|| 0.0).unwrap();
        let monotone = out.trace.windows(2).all(|w| w[1].active_atoms <= w[0].active_atoms);
        let active = out.state.mask.active_ids();
        let nonzero = support_of(&out.state.coeffs, gcgm_core::solver::NONZERO_RELATIVE_TOL);
        let outside: Vec<_> = nonzero.iter().filter(|id| active.binary_search(id).is_err()).collect();
        runs_ok &= monotone && outside.is_empty();
        parts.push(format!(
            "lambda={lambda}: |S|={} nonzeros={} monotone={monotone} outside S={outside:?}",
            active.len(),
            nonzero.len()
        ));
    }
    verdict(
        load_ok && runs_ok,
        format!("d={} n={} (4s {neg}/{fours}, 9s {pos}/{nines}); {}", d, neg + pos, parts.join("; ")),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let report = |name: &str, v: &Verdict| {
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    };
    let mut record = |name: &'static str, v: Verdict| {
        report(name, &v);
        results.push((name, v));
    };

    record("criterion 1 conjugate identities", conjugates());

    let instances = synthetic_instances();
    let mut runs = Vec::new();
    for (i, _) in instances.iter().enumerate() {
        for mode in [ScreeningMode::PruneLmo, ScreeningMode::ReportOnly] {
            runs.push((i, screened_run(&instances[i], mode)));
        }
    }
    record("criterion 2 screening safety", safety(&instances, &runs));
    let prune_runs: Vec<(usize, RunOutput)> = runs.into_iter().step_by(2).collect();
    let (rate, residual) = rate_and_residual(&instances, &prune_runs);
    record("criterion 3 O(1/t) rate", rate);
    record("criterion 4 residual bound", residual);
    record("criterion 5 support identification", identification(&instances));
    record("criterion 6 invariance under linear maps", invariance());
    record("criterion 7 unbounded step and divergence exits", divergence_paths());
    record("criterion 8 gauge and gap oracles", gauge_oracles());
    record("criterion 9 MNIST loading and screening containment", mnist());

    let failed = results.iter().filter(|(_, v)| !v.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
