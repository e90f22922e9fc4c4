//! Residuals against a reference solution and empirical convergence rates.

use alloc::vec::Vec;

use crate::atoms::AtomicSet;
use crate::reference::ReferenceSolution;
use crate::solver::{Iterate, TraceRecord};
use crate::{Error, Loss, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRecord {
    pub t: usize,
    /// `f(x⁽ᵗ⁾) + h(x⁽ᵗ⁾) − obj*`
    pub objective_error: f64,
    pub gap: f64,
    pub min_gap: f64,
    /// `σ_{P̃}(∇f(x⁽ᵗ⁾) − ∇f(x*))`
    pub gradient_error: f64,
    /// `√(L·gap)`, the bound on `gradient_error`.
    pub gradient_bound: f64,
    /// `|S⁽ᵗ⁾ △ supp(x*)|`
    pub support_error: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResidualSeries {
    pub records: Vec<ResidualRecord>,
}

impl ResidualSeries {
    /// `(t, value)` pairs of one column, for [`rate_slope`].
    pub fn column(&self, pick: impl Fn(&ResidualRecord) -> f64) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t as f64, pick(r))).collect()
    }
}

/// Pairs each traced record with its iterate snapshot and measures it against
/// the reference. `symmetrized` must be `P ∪ −P` for the problem's set.
pub fn residuals(
    loss: &Loss,
    symmetrized: &AtomicSet,
    trace: &[TraceRecord],
    iterates: &[Iterate],
    reference: &ReferenceSolution,
    smoothness: f64,
) -> Result<ResidualSeries> {
    let d = loss.dim();
    if symmetrized.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: symmetrized.dim() });
    }
    if reference.x.len() != d || reference.grad.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: reference.x.len() });
    }
    let mut records = Vec::with_capacity(iterates.len());
    for it in iterates {
        let rec = trace
            .iter()
            .find(|r| r.t == it.t)
            .ok_or(Error::Contract("iterate snapshot without a trace record"))?;
        let grad = loss.gradient(&it.x)?;
        let diff: Vec<f64> = grad.iter().zip(&reference.grad).map(|(g, s)| g - s).collect();
        let gradient_error = symmetrized.support_full(&diff)?;
        let in_support = |id: &usize| reference.support_ids.binary_search(id).is_ok();
        let extra = it.active_ids.iter().filter(|id| !in_support(id)).count();
        let missing = reference.support_ids.iter().filter(|id| it.active_ids.binary_search(id).is_err()).count();
        records.push(ResidualRecord {
            t: it.t,
            objective_error: rec.objective - reference.objective,
            gap: rec.gap,
            min_gap: rec.min_gap,
            gradient_error,
            gradient_bound: libm::sqrt(smoothness * rec.gap.max(0.0)),
            support_error: extra + missing,
        });
    }
    Ok(ResidualSeries { records })
}

/// Least-squares slope of `log(value)` against `log(t)` over points with
/// `t_lo ≤ t ≤ t_hi`.
pub fn rate_slope(points: &[(f64, f64)], t_lo: f64, t_hi: f64) -> Result<f64> {
    let window: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, _)| *t >= t_lo && *t <= t_hi)
        .map(|&(t, v)| (t, v))
        .collect();
    if window.iter().any(|(t, v)| !(*v > 0.0) || !(*t > 0.0)) {
        return Err(Error::Contract("rate fit needs positive values in the window"));
    }
    if window.len() < 5 {
        return Err(Error::TooFewPoints(window.len()));
    }
    let logs: Vec<(f64, f64)> = window.iter().map(|(t, v)| (libm::log(*t), libm::log(*v))).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Contract("rate fit needs distinct t values"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn slopes_of_exact_power_laws() {
        let inv: Vec<(f64, f64)> = (1..=200).map(|t| (t as f64, 3.0 / t as f64)).collect();
        assert!((rate_slope(&inv, 10.0, 200.0).unwrap() + 1.0).abs() < 1e-6);
        let inv_sqrt: Vec<(f64, f64)> = (1..=200).map(|t| (t as f64, 0.5 / libm::sqrt(t as f64))).collect();
        assert!((rate_slope(&inv_sqrt, 10.0, 200.0).unwrap() + 0.5).abs() < 1e-6);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![(1.0, 1.0), (2.0, 0.5), (3.0, 0.3), (4.0, 0.25)];
        assert_eq!(rate_slope(&pts, 0.0, 10.0), Err(Error::TooFewPoints(4)));
        assert!(rate_slope(&[(1.0, 0.0); 6], 0.0, 10.0).is_err());
    }
}
