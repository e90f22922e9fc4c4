//! Gap-safe screening.
//!
//! If `f` is `L`-smooth with respect to `P ∪ −P`, then at any point `x` with
//! gradient `g` and duality gap `gap`, every atom with
//!
//! ```text
//! σ(−g) + pᵀg > 2·√(L·gap)
//! ```
//!
//! is absent from the support of every minimizer. The solver applies this rule
//! each iteration to shrink the active set `S⁽ᵗ⁾`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::atoms::{AtomId, AtomMask, AtomicSet};
use crate::{Error, Ext, Result};

/// Gaps below `-GAP_NEGATIVE_TOL` indicate a broken certificate.
pub const GAP_NEGATIVE_TOL: f64 = 1e-10;

/// Slack added to the threshold to absorb rounding in `σ + pᵀg`.
const ROUNDOFF_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenReport {
    pub t: usize,
    pub removed_ids: Vec<AtomId>,
    pub threshold: f64,
    pub sigma: f64,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportCertificate {
    pub support_ids: Vec<AtomId>,
    pub delta: Ext,
    pub identified_at: Option<usize>,
    pub smoothness: f64,
    pub min_gap: f64,
}

/// Applies the rule to every active atom and returns the pruned mask.
///
/// `sigma` must be `σ(−grad)` over at least the active atoms. The mask never
/// becomes empty: if every active atom qualifies (possible only when the
/// optimum is `x* = 0`), the lowest-scoring atom is kept so the oracle stays
/// defined.
pub fn apply_rule(
    t: usize,
    mask: &AtomMask,
    set: &AtomicSet,
    grad: &[f64],
    sigma: f64,
    gap: Ext,
    smoothness: f64,
) -> Result<(AtomMask, ScreenReport)> {
    if grad.len() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), got: grad.len() });
    }
    if !set.is_enumerable() || mask.is_implicit() {
        return Err(Error::NotEnumerable(set.atom_count()));
    }
    let gap = match gap {
        Ext::PosInf => {
            let report = ScreenReport {
                t,
                removed_ids: Vec::new(),
                threshold: f64::INFINITY,
                sigma,
                remaining: mask.active_count(),
            };
            return Ok((mask.clone(), report));
        }
        Ext::Finite(g) if g < -GAP_NEGATIVE_TOL || g.is_nan() => {
            return Err(Error::CertificateCorruption { t, gap: g });
        }
        Ext::Finite(g) => g.max(0.0),
    };
    let threshold = 2.0 * libm::sqrt(smoothness * gap);
    let cutoff = threshold + ROUNDOFF_SLACK * (1.0 + libm::fabs(sigma));

    let active = mask.active_ids();
    let mut removed = Vec::new();
    let mut keeper: Option<(AtomId, f64)> = None;
    for &id in &active {
        let score = sigma + set.atom_dot(id, grad);
        if score > cutoff {
            removed.push(id);
        }
        if keeper.is_none_or(|(_, s)| score < s) {
            keeper = Some((id, score));
        }
    }
    if removed.len() == active.len() {
        if let Some((id, _)) = keeper {
            removed.retain(|r| *r != id);
        }
    }
    let mut next = mask.clone();
    for &id in &removed {
        next.deactivate(id)?;
    }
    let report = ScreenReport { t, removed_ids: removed, threshold, sigma, remaining: next.active_count() };
    Ok((next, report))
}

/// Degeneracy margin `δ = min_{p ∉ supp} σ(−∇f*) + ∇f*ᵀp`.
///
/// Returns `PosInf` when every atom is in the support. Values that round
/// slightly below zero are clamped to zero (degenerate).
pub fn delta(set: &AtomicSet, grad_star: &[f64], support_ids: &[AtomId]) -> Result<Ext> {
    if grad_star.len() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), got: grad_star.len() });
    }
    if !set.is_enumerable() {
        return Err(Error::NotEnumerable(set.atom_count()));
    }
    let neg: Vec<f64> = grad_star.iter().map(|g| -g).collect();
    let sigma = set.support_full(&neg)?;
    let mut best = Ext::PosInf;
    for id in 0..set.atom_count() {
        if support_ids.contains(&id) {
            continue;
        }
        best = best.min(Ext::Finite((sigma + set.atom_dot(id, grad_star)).max(0.0)));
    }
    Ok(best)
}

/// Atoms whose ledger coefficient exceeds `relative_tol` times the largest one.
pub fn support_of(coeffs: &BTreeMap<AtomId, f64>, relative_tol: f64) -> Vec<AtomId> {
    let max = coeffs.values().fold(0.0f64, |m, c| m.max(*c));
    if max <= 0.0 {
        return Vec::new();
    }
    coeffs.iter().filter(|(_, c)| **c > relative_tol * max).map(|(id, _)| *id).collect()
}
