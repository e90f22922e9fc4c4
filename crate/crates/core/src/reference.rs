//! High-accuracy reference solutions.
//!
//! A long unscreened gCGM run, periodically polished by a projected Newton
//! method on the conic coefficients of the current support:
//!
//! ```text
//! minimize_{c ≥ 0}  f(Σ cᵢpᵢ) + λφ(Σ cᵢ)
//! ```
//!
//! Atoms enter the working set when they violate optimality over the full set
//! and leave when their coefficient is driven to zero. A polished point is kept
//! only if its duality gap over the full set beats the gCGM iterate's.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::atoms::AtomId;
use crate::linalg::{axpy, cholesky_solve, dot};
use crate::screening::{delta, support_of};
use crate::solver::{Problem, ScreeningMode, Solver, SolverConfig};
use crate::{Error, Ext, PenaltyKind, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOptions {
    pub iters: usize,
    pub tol: f64,
    /// Polish with projected Newton every this many iterations (0 disables).
    pub refine_every: usize,
    /// Relative threshold for reading the support off the ledger.
    pub support_tol: f64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions { iters: 1_000_000, tol: 1e-10, refine_every: 100_000, support_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
    pub coeffs: BTreeMap<AtomId, f64>,
    pub objective: f64,
    pub gap: f64,
    pub support_ids: Vec<AtomId>,
    pub delta: Ext,
    pub smoothness: f64,
    pub iterations: usize,
    pub reached_tolerance: bool,
    pub refined: bool,
}

struct Candidate {
    x: Vec<f64>,
    coeffs: BTreeMap<AtomId, f64>,
    gap: f64,
    refined: bool,
}

fn kappa_of(coeffs: &BTreeMap<AtomId, f64>) -> f64 {
    coeffs.values().sum()
}

/// Gap over the full set at the point described by `coeffs`.
fn ledger_gap(problem: &Problem<'_>, x: &[f64], coeffs: &BTreeMap<AtomId, f64>) -> Result<f64> {
    Ok(problem.certificate(x, kappa_of(coeffs))?.gap.to_f64())
}

/// Runs gCGM for up to `opts.iters` iterations (stopping early once the best
/// gap is at most `opts.tol`) and returns the best point found together with
/// its support and degeneracy margin.
pub fn reference_solve(problem: Problem<'_>, opts: &ReferenceOptions) -> Result<ReferenceSolution> {
    if !problem.penalty.convergence_guaranteed() {
        return Err(Error::Contract("reference solutions need a penalty with guaranteed convergence"));
    }
    let config = SolverConfig {
        max_iters: opts.iters.max(1),
        gap_tolerance: opts.tol,
        screening: ScreeningMode::Off,
        ..SolverConfig::default()
    };
    let mut solver = Solver::new(problem, config)?;
    let smoothness = solver.smoothness();
    let mut best: Option<Candidate> = None;
    let mut iterations;
    let can_refine = opts.refine_every > 0 && !matches!(problem.penalty.kind(), PenaltyKind::Indicator { .. });

    loop {
        let outcome = solver.evaluate(0.0)?;
        iterations = outcome.t;
        let gap = outcome.gap.to_f64();
        if best.as_ref().is_none_or(|b| gap < b.gap) {
            best = Some(Candidate {
                x: solver.state().x.clone(),
                coeffs: solver.state().coeffs.clone(),
                gap,
                refined: false,
            });
        }
        let done = best.as_ref().is_some_and(|b| b.gap <= opts.tol) || outcome.t >= opts.iters;
        let checkpoint = can_refine && (outcome.t % opts.refine_every == 0 || done);
        if checkpoint {
            if let Some(polished) = refine(&problem, &solver.state().coeffs)? {
                if best.as_ref().is_none_or(|b| polished.gap < b.gap) {
                    best = Some(polished);
                }
            }
        }
        if done || best.as_ref().is_some_and(|b| b.gap <= opts.tol) {
            break;
        }
        solver.advance(&outcome)?;
    }

    let best = best.ok_or(Error::Contract("reference run produced no iterate"))?;
    let cert = problem.certificate(&best.x, kappa_of(&best.coeffs))?;
    let support_ids = support_of(&best.coeffs, opts.support_tol);
    let delta = if problem.set.is_enumerable() {
        delta(problem.set, &cert.grad, &support_ids)?
    } else {
        Ext::Finite(0.0)
    };
    Ok(ReferenceSolution {
        objective: cert.objective.to_f64(),
        gap: best.gap,
        reached_tolerance: best.gap <= opts.tol,
        x: best.x,
        grad: cert.grad,
        coeffs: best.coeffs,
        support_ids,
        delta,
        smoothness,
        iterations,
        refined: best.refined,
    })
}

/// Projected Newton polish starting from the ledger `start`.
fn refine(problem: &Problem<'_>, start: &BTreeMap<AtomId, f64>) -> Result<Option<Candidate>> {
    let set = problem.set;
    let loss = problem.loss;
    let pen = problem.penalty;
    let d = set.dim();

    let mut work: Vec<(AtomId, f64)> = support_of(start, 1e-6).into_iter().map(|id| (id, start[&id])).collect();
    if work.is_empty() {
        return Ok(None);
    }
    let mut atoms: BTreeMap<AtomId, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let fetch = |id: AtomId, atoms: &mut BTreeMap<AtomId, (Vec<f64>, Vec<f64>)>| -> Result<()> {
        if let alloc::collections::btree_map::Entry::Vacant(e) = atoms.entry(id) {
            e.insert((set.atom(id)?, loss.atom_image(set, id)?));
        }
        Ok(())
    };

    // F(c) = f(Σ cᵢpᵢ) + λφ(Σ cᵢ); +∞ outside the penalty's domain.
    let objective = |work: &[(AtomId, f64)], atoms: &BTreeMap<AtomId, (Vec<f64>, Vec<f64>)>| -> Result<f64> {
        let n = loss.data().rows();
        let mut ax = vec![0.0; n];
        for (id, c) in work {
            axpy(*c, &atoms[id].1, &mut ax);
        }
        let kappa: f64 = work.iter().map(|(_, c)| c).sum();
        Ok(match pen.value(kappa)? {
            Ext::Finite(h) => loss.value_from_predictor(&ax) + h,
            Ext::PosInf => f64::INFINITY,
        })
    };

    for _outer in 0..20 {
        for (id, _) in &work {
            fetch(*id, &mut atoms)?;
        }
        for _inner in 0..60 {
            let n = loss.data().rows();
            let mut ax = vec![0.0; n];
            for (id, c) in &work {
                axpy(*c, &atoms[id].1, &mut ax);
            }
            let kappa: f64 = work.iter().map(|(_, c)| c).sum();
            let weights = loss.residual_weights(&ax);
            let slope = pen.derivative(kappa);
            if !slope.is_finite() {
                return Ok(None);
            }
            let grad_c: Vec<f64> = work.iter().map(|(id, _)| dot(&atoms[id].1, &weights) + slope).collect();
            let free: Vec<usize> =
                (0..work.len()).filter(|&j| work[j].1 > 0.0 || grad_c[j] < 0.0).collect();
            let scale = 1.0 + work.iter().map(|(_, c)| c.abs()).fold(0.0, f64::max);
            let stationarity = free.iter().map(|&j| grad_c[j].abs()).fold(0.0, f64::max);
            if free.is_empty() || stationarity <= 1e-15 * scale {
                break;
            }
            let curv = loss.curvature_weights(&ax);
            let k = free.len();
            let mut h = vec![0.0; k * k];
            let second = pen.second_derivative(kappa);
            for a in 0..k {
                let ia = &atoms[&work[free[a]].0].1;
                for b in 0..=a {
                    let ib = &atoms[&work[free[b]].0].1;
                    let v: f64 = ia.iter().zip(ib).zip(&curv).map(|((x, y), w)| x * y * w).sum::<f64>() + second;
                    h[a * k + b] = v;
                    h[b * k + a] = v;
                }
            }
            let diag_max = (0..k).map(|a| h[a * k + a].abs()).fold(0.0, f64::max);
            let damping = 1e-12 * (1.0 + diag_max);
            for a in 0..k {
                h[a * k + a] += damping;
            }
            let rhs: Vec<f64> = free.iter().map(|&j| -grad_c[j]).collect();
            let Some(dir) = cholesky_solve(&h, k, &rhs) else {
                return Ok(None);
            };

            let f0 = objective(&work, &atoms)?;
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let mut trial = work.clone();
                for (a, &j) in free.iter().enumerate() {
                    trial[j].1 = (work[j].1 + step * dir[a]).max(0.0);
                }
                let decrease: f64 = free.iter().map(|&j| grad_c[j] * (trial[j].1 - work[j].1)).sum();
                let f1 = objective(&trial, &atoms)?;
                if f1 <= f0 + 1e-4 * decrease || (f1 <= f0 && decrease.abs() < 1e-300) {
                    work = trial;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            work.retain(|(_, c)| *c > 0.0);
            if work.is_empty() {
                return Ok(None);
            }
        }

        // Optimality over the full set: add the most violating atom, if any.
        let mut x = vec![0.0; d];
        for (id, c) in &work {
            axpy(*c, &atoms[id].0, &mut x);
        }
        let kappa: f64 = work.iter().map(|(_, c)| c).sum();
        let grad = loss.gradient(&x)?;
        let z: Vec<f64> = grad.iter().map(|g| -g).collect();
        let (atom, sigma) = set.lmo(&set.full_mask(), &z)?;
        let slope = pen.derivative(kappa);
        let violation = sigma - slope;
        if violation > 1e-13 * (1.0 + slope.abs()) && !work.iter().any(|(id, _)| *id == atom) {
            work.push((atom, 0.0));
            work.sort_by_key(|(id, _)| *id);
            continue;
        }
        let coeffs: BTreeMap<AtomId, f64> = work.iter().copied().collect();
        let gap = ledger_gap(problem, &x, &coeffs)?;
        return Ok(Some(Candidate { x, coeffs, gap, refined: true }));
    }
    Ok(None)
}
