//! The gCGM iteration.
//!
//! At iterate `x⁽ᵗ⁾` with `z = −∇f(x⁽ᵗ⁾)`:
//!
//! 1. `(ŝ, σ) = LMO(z)` over the active atoms,
//! 2. `ξ = argmin_{ξ≥0} −ξσ + φ(ξ)`, `s = ξŝ`,
//! 3. `gap = −∇fᵀ(s − x) + φ(κ(x)) − φ(ξ)`,
//! 4. optional screening of the active set with the gap,
//! 5. `x⁽ᵗ⁺¹⁾ = (1 − θ⁽ᵗ⁾)x⁽ᵗ⁾ + θ⁽ᵗ⁾s`.
//!
//! The iterate is tracked together with a conic ledger `x = Σ cᵢpᵢ`, whose sum
//! bounds `κ(x)` from above; sets with a closed-form gauge use it instead.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::atoms::{AtomId, AtomMask, AtomicSet};
use crate::linalg::{all_finite, axpy, dot, norm_inf};
use crate::screening::{apply_rule, support_of, ScreenReport};
use crate::{Error, Ext, Loss, Penalty, Result};

/// Relative tolerance used when counting nonzero ledger coefficients.
pub const NONZERO_RELATIVE_TOL: f64 = 1e-6;

const RESYNC_EVERY: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepSchedule {
    /// `θ⁽ᵗ⁾ = 2/(t+1)`
    #[default]
    TwoOverTPlusOne,
    /// `θ⁽ᵗ⁾ = min(1, 4/(t+2))`
    FourOverTPlusTwo,
}

impl StepSchedule {
    pub fn theta(self, t: usize) -> f64 {
        let t = t as f64;
        match self {
            StepSchedule::TwoOverTPlusOne => 2.0 / (t + 1.0),
            StepSchedule::FourOverTPlusTwo => (4.0 / (t + 2.0)).min(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScreeningMode {
    #[default]
    Off,
    /// Screen and restrict the LMO to the surviving atoms.
    PruneLmo,
    /// Screen for diagnostics only; the LMO always scans every atom.
    ReportOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once the running minimum gap is at or below this value.
    pub gap_tolerance: f64,
    pub schedule: StepSchedule,
    pub screening: ScreeningMode,
    pub screen_every: usize,
    /// Evaluate `σ` for the screening rule over all atoms instead of `S⁽ᵗ⁾`.
    pub conservative_sigma: bool,
    pub trace_every: usize,
    /// Keep a copy of `x` and `S⁽ᵗ⁾` for every traced iterate.
    pub keep_iterates: bool,
    /// Abort once `‖x‖_∞` exceeds this bound.
    pub divergence_bound: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 10_000,
            gap_tolerance: 0.0,
            schedule: StepSchedule::default(),
            screening: ScreeningMode::default(),
            screen_every: 1,
            conservative_sigma: false,
            trace_every: 1,
            keep_iterates: false,
            divergence_bound: 1e12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1"));
        }
        if self.trace_every == 0 || self.screen_every == 0 {
            return Err(Error::InvalidConfig("trace_every and screen_every must be at least 1"));
        }
        if !(self.gap_tolerance >= 0.0) {
            return Err(Error::InvalidConfig("gap_tolerance must be nonnegative"));
        }
        if !(self.divergence_bound > 0.0) {
            return Err(Error::InvalidConfig("divergence_bound must be positive"));
        }
        Ok(())
    }
}

/// `f + λφ(κ_{C·P})`: loss, penalty and (scaled) atomic set.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub loss: &'a Loss,
    pub penalty: &'a Penalty,
    pub set: &'a AtomicSet,
}

/// Duality-gap certificate at an arbitrary point.
#[derive(Debug, Clone, PartialEq)]
pub struct GapCertificate {
    pub objective: Ext,
    pub gap: Ext,
    pub grad: Vec<f64>,
    pub atom: AtomId,
    pub sigma: f64,
    pub xi: f64,
    pub kappa: f64,
}

impl<'a> Problem<'a> {
    pub fn new(loss: &'a Loss, penalty: &'a Penalty, set: &'a AtomicSet) -> Result<Self> {
        if loss.dim() != set.dim() {
            return Err(Error::DimensionMismatch { expected: loss.dim(), got: set.dim() });
        }
        Ok(Problem { loss, penalty, set })
    }

    /// `f(x) + λφ(κ)` for a supplied gauge value (exact or an upper bound).
    pub fn objective_with_kappa(&self, x: &[f64], kappa: f64) -> Result<Ext> {
        let f = self.loss.value(x)?;
        Ok(match self.penalty.value(kappa)? {
            Ext::Finite(h) => Ext::Finite(f + h),
            Ext::PosInf => Ext::PosInf,
        })
    }

    /// Gap at `x` over the full set, using `kappa` for `κ(x)` (the exact value
    /// when the set has a closed form, otherwise the supplied bound).
    pub fn certificate(&self, x: &[f64], kappa: f64) -> Result<GapCertificate> {
        let ax = self.loss.predictor(x)?;
        let kappa = self.set.exact_gauge(x).unwrap_or(kappa);
        let eval = evaluate_at(self, x, &ax, kappa, &self.set.full_mask())?;
        Ok(GapCertificate {
            objective: eval.objective,
            gap: eval.gap,
            grad: eval.grad,
            atom: eval.atom,
            sigma: eval.sigma,
            xi: eval.xi,
            kappa,
        })
    }
}

/// `−∇f(x)ᵀ(s − x) + h(x) − h(s)` where `s` minimizes `∇f(x)ᵀs + h(s)`.
///
/// `h_s` must be finite (the minimizer lies in the penalty's domain); an
/// infinite `h_x` gives an infinite gap.
pub fn gap_primal(x: &[f64], s: &[f64], grad: &[f64], h_x: Ext, h_s: Ext) -> Result<Ext> {
    if x.len() != grad.len() || s.len() != grad.len() {
        return Err(Error::DimensionMismatch { expected: grad.len(), got: x.len().min(s.len()) });
    }
    let h_s = h_s.finite().ok_or(Error::Contract("h(s) must be finite at the step minimizer"))?;
    Ok(match h_x {
        Ext::PosInf => Ext::PosInf,
        Ext::Finite(h_x) => Ext::Finite(dot(grad, x) - dot(grad, s) + h_x - h_s),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub t: usize,
    /// Conic ledger: `x = Σ coeffs[i]·pᵢ`.
    pub coeffs: BTreeMap<AtomId, f64>,
    /// `Σ coeffs`, an upper bound on `κ(x)`.
    pub kappa_bound: f64,
    /// The active set `S⁽ᵗ⁾`.
    pub mask: AtomMask,
    pub min_gap: Ext,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub objective: f64,
    pub gap: f64,
    pub min_gap: f64,
    pub sigma: f64,
    pub active_atoms: usize,
    pub nonzero_coeffs: usize,
    pub xi: f64,
    pub elapsed: f64,
}

/// Snapshot of a traced iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub t: usize,
    pub x: Vec<f64>,
    pub active_ids: Vec<AtomId>,
}

/// Everything computed while evaluating iterate `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub t: usize,
    pub record: TraceRecord,
    pub grad: Vec<f64>,
    pub atom: AtomId,
    pub sigma: f64,
    pub xi: f64,
    /// Gauge value used in the gap (exact or ledger bound).
    pub kappa: f64,
    pub gap: Ext,
    pub report: Option<ScreenReport>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub state: SolverState,
    pub trace: Vec<TraceRecord>,
    pub screen_events: Vec<ScreenReport>,
    pub iterates: Vec<Iterate>,
    pub smoothness: f64,
    pub converged: bool,
}

/// A failed run with everything recorded up to and including the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub error: Error,
    pub trace: Vec<TraceRecord>,
    pub screen_events: Vec<ScreenReport>,
    pub state: SolverState,
    pub smoothness: f64,
}

struct Evaluation {
    grad: Vec<f64>,
    atom: AtomId,
    sigma: f64,
    xi: f64,
    objective: Ext,
    gap: Ext,
    /// Magnitude of the terms summed into the gap, for rounding bounds.
    gap_scale: f64,
}

fn evaluate_at(problem: &Problem<'_>, x: &[f64], ax: &[f64], kappa: f64, mask: &AtomMask) -> Result<Evaluation> {
    let grad = problem.loss.gradient_from_predictor(ax);
    if !all_finite(&grad) {
        return Err(Error::Divergence { t: 0, norm: norm_inf(x) });
    }
    let z: Vec<f64> = grad.iter().map(|g| -g).collect();
    let (atom, sigma) = problem.set.lmo(mask, &z)?;
    let xi = problem.penalty.xi_step(sigma)?;
    let h_x = problem.penalty.value(kappa)?;
    let h_s = problem.penalty.value(xi)?;
    let f = problem.loss.value_from_predictor(ax);
    let gx = dot(&grad, x);
    let gs = -xi * sigma;
    let gap = match (h_x, h_s) {
        (Ext::PosInf, _) => Ext::PosInf,
        (Ext::Finite(hx), Ext::Finite(hs)) => Ext::Finite(gx - gs + hx - hs),
        (_, Ext::PosInf) => return Err(Error::Contract("h(s) must be finite at the step minimizer")),
    };
    let objective = match h_x {
        Ext::Finite(h) => Ext::Finite(f + h),
        Ext::PosInf => Ext::PosInf,
    };
    let gap_scale = libm::fabs(gx) + libm::fabs(gs) + h_x.to_f64().abs() + h_s.to_f64().abs();
    Ok(Evaluation { grad, atom, sigma, xi, objective, gap, gap_scale })
}

pub struct Solver<'a> {
    problem: Problem<'a>,
    config: SolverConfig,
    smoothness: f64,
    full_mask: AtomMask,
    state: SolverState,
    ax: Vec<f64>,
    steps_since_resync: usize,
}

impl<'a> Solver<'a> {
    /// Starts at `x = 0` with `S⁽⁰⁾ = P₀`. The smoothness constant is computed
    /// with respect to the symmetrized set.
    pub fn new(problem: Problem<'a>, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let smoothness = problem.loss.smoothness_wrt(&problem.set.symmetrize()?)?;
        Self::with_smoothness(problem, config, smoothness)
    }

    /// As [`Solver::new`] with a caller-supplied smoothness constant, which must
    /// be a valid upper bound for screening to remain safe.
    pub fn with_smoothness(problem: Problem<'a>, config: SolverConfig, smoothness: f64) -> Result<Self> {
        config.validate()?;
        let d = problem.set.dim();
        if problem.loss.dim() != d {
            return Err(Error::DimensionMismatch { expected: problem.loss.dim(), got: d });
        }
        if config.screening != ScreeningMode::Off && !problem.set.is_enumerable() {
            return Err(Error::NotEnumerable(problem.set.atom_count()));
        }
        if !(smoothness >= 0.0 && smoothness.is_finite()) {
            return Err(Error::InvalidConfig("smoothness constant must be finite and nonnegative"));
        }
        let full_mask = problem.set.full_mask();
        let state = SolverState {
            x: vec![0.0; d],
            t: 1,
            coeffs: BTreeMap::new(),
            kappa_bound: 0.0,
            mask: full_mask.clone(),
            min_gap: Ext::PosInf,
        };
        let ax = vec![0.0; problem.loss.data().rows()];
        Ok(Solver { problem, config, smoothness, full_mask, state, ax, steps_since_resync: 0 })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn problem(&self) -> &Problem<'a> {
        &self.problem
    }

    fn kappa(&self) -> f64 {
        self.problem.set.exact_gauge(&self.state.x).unwrap_or(self.state.kappa_bound)
    }

    /// Evaluates the current iterate (gradient, oracle, step length, gap) and
    /// applies the screening rule, producing `S⁽ᵗ⁾`. Does not move `x`.
    pub fn evaluate(&mut self, elapsed: f64) -> Result<StepOutcome> {
        let t = self.state.t;
        let kappa = self.kappa();
        let lmo_mask = match self.config.screening {
            ScreeningMode::PruneLmo => &self.state.mask,
            _ => &self.full_mask,
        };
        let eval = evaluate_at(&self.problem, &self.state.x, &self.ax, kappa, lmo_mask).map_err(|e| match e {
            Error::UnboundedStep { sigma, slope, .. } => Error::UnboundedStep { t, sigma, slope },
            Error::Divergence { norm, .. } => Error::Divergence { t, norm },
            other => other,
        })?;
        self.state.min_gap = self.state.min_gap.min(eval.gap);

        let mut report = None;
        if self.config.screening != ScreeningMode::Off && t.is_multiple_of(self.config.screen_every) {
            let sigma = if self.config.conservative_sigma && self.config.screening == ScreeningMode::PruneLmo {
                let z: Vec<f64> = eval.grad.iter().map(|g| -g).collect();
                self.problem.set.support_full(&z)?
            } else {
                eval.sigma
            };
            // inflate by a bound on the rounding error of the computed gap
            let gap = match eval.gap {
                Ext::Finite(g) => Ext::Finite(g + 8.0 * f64::EPSILON * eval.gap_scale),
                Ext::PosInf => Ext::PosInf,
            };
            let (mask, rep) =
                apply_rule(t, &self.state.mask, self.problem.set, &eval.grad, sigma, gap, self.smoothness)?;
            self.state.mask = mask;
            report = Some(rep);
        }

        let converged = self.state.min_gap <= Ext::Finite(self.config.gap_tolerance);
        let record = TraceRecord {
            t,
            objective: eval.objective.to_f64(),
            gap: eval.gap.to_f64(),
            min_gap: self.state.min_gap.to_f64(),
            sigma: eval.sigma,
            active_atoms: self.state.mask.active_count(),
            nonzero_coeffs: support_of(&self.state.coeffs, NONZERO_RELATIVE_TOL).len(),
            xi: eval.xi,
            elapsed,
        };
        Ok(StepOutcome {
            t,
            record,
            grad: eval.grad,
            atom: eval.atom,
            sigma: eval.sigma,
            xi: eval.xi,
            kappa,
            gap: eval.gap,
            report,
            converged,
        })
    }

    /// Moves to `x⁽ᵗ⁺¹⁾` using the oracle output of `outcome`.
    pub fn advance(&mut self, outcome: &StepOutcome) -> Result<()> {
        let t = self.state.t;
        if outcome.t != t {
            return Err(Error::Contract("outcome does not belong to the current iterate"));
        }
        let theta = self.config.schedule.theta(t);
        let weight = theta * outcome.xi;
        let keep = 1.0 - theta;

        for v in self.state.x.iter_mut() {
            *v *= keep;
        }
        for v in self.ax.iter_mut() {
            *v *= keep;
        }
        for c in self.state.coeffs.values_mut() {
            *c *= keep;
        }
        self.state.coeffs.retain(|_, c| *c > 0.0);
        if weight > 0.0 {
            let p = self.problem.set.atom(outcome.atom)?;
            axpy(weight, &p, &mut self.state.x);
            let image = self.problem.loss.atom_image(self.problem.set, outcome.atom)?;
            axpy(weight, &image, &mut self.ax);
            *self.state.coeffs.entry(outcome.atom).or_insert(0.0) += weight;
        }
        self.state.kappa_bound = self.state.coeffs.values().sum();
        self.state.t = t + 1;

        self.steps_since_resync += 1;
        if self.steps_since_resync >= RESYNC_EVERY {
            self.ax = self.problem.loss.data().apply(&self.state.x);
            self.steps_since_resync = 0;
        }

        let norm = norm_inf(&self.state.x);
        if !all_finite(&self.state.x) || !all_finite(&self.ax) || norm > self.config.divergence_bound {
            return Err(Error::Divergence { t: t + 1, norm });
        }
        Ok(())
    }

    /// One full iteration: evaluate, then advance.
    pub fn step(&mut self, elapsed: f64) -> Result<StepOutcome> {
        let outcome = self.evaluate(elapsed)?;
        self.advance(&outcome)?;
        Ok(outcome)
    }

    fn failure_record(&self, elapsed: f64) -> TraceRecord {
        let objective = self
            .problem
            .penalty
            .value(self.kappa())
            .ok()
            .map(|h| self.problem.loss.value_from_predictor(&self.ax) + h.to_f64())
            .unwrap_or(f64::NAN);
        TraceRecord {
            t: self.state.t,
            objective,
            gap: f64::INFINITY,
            min_gap: self.state.min_gap.to_f64(),
            sigma: f64::NAN,
            active_atoms: self.state.mask.active_count(),
            nonzero_coeffs: support_of(&self.state.coeffs, NONZERO_RELATIVE_TOL).len(),
            xi: f64::INFINITY,
            elapsed,
        }
    }

    /// Runs until `max_iters` iterates have been evaluated or the minimum gap
    /// reaches the tolerance. `clock` returns elapsed seconds.
    pub fn run(self, clock: impl FnMut() -> f64) -> core::result::Result<RunOutput, RunFailure> {
        self.run_observed(clock, |_, _| Control::Continue)
    }

    /// As [`Solver::run`], calling `observer` after each evaluation (before the
    /// iterate moves). Returning [`Control::Stop`] ends the run there.
    pub fn run_observed(
        mut self,
        mut clock: impl FnMut() -> f64,
        mut observer: impl FnMut(&StepOutcome, &SolverState) -> Control,
    ) -> core::result::Result<RunOutput, RunFailure> {
        let mut trace = Vec::new();
        let mut events = Vec::new();
        let mut iterates = Vec::new();
        loop {
            let t = self.state.t;
            let outcome = match self.evaluate(clock()) {
                Ok(o) => o,
                Err(error) => {
                    trace.push(self.failure_record(clock()));
                    return Err(RunFailure { error, trace, screen_events: events, state: self.state, smoothness: self.smoothness });
                }
            };
            if let Some(rep) = &outcome.report {
                if !rep.removed_ids.is_empty() {
                    events.push(rep.clone());
                }
            }
            let last = outcome.converged || t >= self.config.max_iters;
            let stop = observer(&outcome, &self.state) == Control::Stop;
            if t.is_multiple_of(self.config.trace_every) || t == 1 || last || stop {
                trace.push(outcome.record.clone());
                if self.config.keep_iterates {
                    iterates.push(Iterate { t, x: self.state.x.clone(), active_ids: self.state.mask.active_ids() });
                }
            }
            if last || stop {
                return Ok(RunOutput {
                    state: self.state,
                    trace,
                    screen_events: events,
                    iterates,
                    smoothness: self.smoothness,
                    converged: outcome.converged,
                });
            }
            if let Err(error) = self.advance(&outcome) {
                trace.push(self.failure_record(clock()));
                return Err(RunFailure { error, trace, screen_events: events, state: self.state, smoothness: self.smoothness });
            }
        }
    }
}
