//! Scalar penalties `φ: ℝ₊ → ℝ₊` applied to the gauge, with their conjugates
//! `φ*(ν) = sup_{ξ≥0} νξ − φ(ξ)` and the maximizer `ξ(ν)` used as the step
//! length of each iteration.
//!
//! Every penalty carries a weight `λ`: the penalty actually applied is `λ·φ`.
//! Its conjugate is `λ·φ*(ν/λ)` and its step is `ξ(ν/λ)`. The magnification `C`
//! of the atomic set never enters here; it is folded into the atoms.
//!
//! | kind        | `φ(ξ)` (before `λ`)                         | `ξ(ν)`                 |
//! |-------------|---------------------------------------------|------------------------|
//! | power       | `ξ^α/α`                                     | `ν^{1/(α−1)}`          |
//! | log-barrier | `−log(1 − ξ/C)/β − ξ/(Cβ)` on `[0, C)`      | `C²βν/(Cβν + 1)`       |
//! | indicator   | `0` on `[0, C]`, `+∞` beyond                | `C` for `ν > 0`        |

use crate::{Error, Ext, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyKind {
    Power { alpha: f64 },
    LogBarrier { cap: f64, beta: f64 },
    Indicator { cap: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    kind: PenaltyKind,
    weight: f64,
}

/// Growth certificate bounding the step length `ξ(ν)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Growth {
    /// `λφ(ξ) ≥ μξ² − φ₀`, hence `ξ(ν) ≤ ν/μ + ξ₀`.
    Quadratic { mu: f64, phi0: f64, xi0: f64 },
    /// Finite only on `[0, cap]`, hence `ξ(ν) ≤ cap`.
    BoundedDomain { cap: f64 },
    /// No quadratic lower bound: iterates are well defined but convergence is
    /// not guaranteed (power penalties with `α < 2`).
    NotGuaranteed,
}

impl Growth {
    /// Upper bound on `ξ(ν)` implied by the certificate, if any.
    pub fn step_bound(&self, nu: f64) -> Option<f64> {
        match *self {
            Growth::Quadratic { mu, xi0, .. } => Some(nu.max(0.0) / mu + xi0),
            Growth::BoundedDomain { cap } => Some(cap),
            Growth::NotGuaranteed => None,
        }
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl Penalty {
    /// `λξ^α/α`. `α = 1` is accepted only so the unbounded-step path can be
    /// exercised; `1 < α < 2` is accepted without a convergence guarantee.
    pub fn power(alpha: f64, weight: f64) -> Result<Self> {
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(Error::InvalidPenalty("power exponent must be finite and at least 1"));
        }
        if !positive(weight) {
            return Err(Error::InvalidPenalty("weight must be positive"));
        }
        Ok(Penalty { kind: PenaltyKind::Power { alpha }, weight })
    }

    pub fn log_barrier(cap: f64, beta: f64, weight: f64) -> Result<Self> {
        if !positive(cap) || !positive(beta) {
            return Err(Error::InvalidPenalty("log-barrier cap and sharpness must be positive"));
        }
        if !positive(weight) {
            return Err(Error::InvalidPenalty("weight must be positive"));
        }
        Ok(Penalty { kind: PenaltyKind::LogBarrier { cap, beta }, weight })
    }

    /// Indicator of `[0, cap]`; the weight is irrelevant and fixed to 1.
    pub fn indicator(cap: f64) -> Result<Self> {
        if !positive(cap) {
            return Err(Error::InvalidPenalty("indicator cap must be positive"));
        }
        Ok(Penalty { kind: PenaltyKind::Indicator { cap }, weight: 1.0 })
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn value(&self, xi: f64) -> Result<Ext> {
        if !(xi >= 0.0) {
            return Err(Error::Contract("penalty argument must be nonnegative"));
        }
        let lam = self.weight;
        Ok(match self.kind {
            PenaltyKind::Power { alpha } => {
                if !xi.is_finite() {
                    Ext::PosInf
                } else if alpha == 2.0 {
                    Ext::Finite(0.5 * lam * xi * xi)
                } else if alpha == 1.0 {
                    Ext::Finite(lam * xi)
                } else {
                    Ext::Finite(lam * libm::pow(xi, alpha) / alpha)
                }
            }
            PenaltyKind::LogBarrier { cap, beta } => {
                if xi >= cap {
                    Ext::PosInf
                } else {
                    let r = xi / cap;
                    Ext::Finite(lam * (-libm::log1p(-r) - r) / beta)
                }
            }
            PenaltyKind::Indicator { cap } => {
                if xi <= cap {
                    Ext::ZERO
                } else {
                    Ext::PosInf
                }
            }
        })
    }

    /// Right derivative of `λφ` at `ξ` (`+∞` outside the domain).
    pub fn derivative(&self, xi: f64) -> f64 {
        let lam = self.weight;
        match self.kind {
            PenaltyKind::Power { alpha } => {
                if alpha == 2.0 {
                    lam * xi
                } else if alpha == 1.0 {
                    lam
                } else {
                    lam * libm::pow(xi, alpha - 1.0)
                }
            }
            PenaltyKind::LogBarrier { cap, beta } => {
                if xi >= cap {
                    f64::INFINITY
                } else {
                    lam * xi / (beta * cap * (cap - xi))
                }
            }
            PenaltyKind::Indicator { cap } => {
                if xi < cap {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Second derivative of `λφ` (used by the reference refinement).
    pub fn second_derivative(&self, xi: f64) -> f64 {
        let lam = self.weight;
        match self.kind {
            PenaltyKind::Power { alpha } => {
                if alpha == 2.0 {
                    lam
                } else if alpha == 1.0 {
                    0.0
                } else if xi == 0.0 && alpha < 2.0 {
                    f64::INFINITY
                } else {
                    lam * (alpha - 1.0) * libm::pow(xi, alpha - 2.0)
                }
            }
            PenaltyKind::LogBarrier { cap, beta } => {
                if xi >= cap {
                    f64::INFINITY
                } else {
                    lam / (beta * (cap - xi) * (cap - xi))
                }
            }
            PenaltyKind::Indicator { .. } => 0.0,
        }
    }

    /// `sup_{ξ≥0} νξ − λφ(ξ)`. Returns `PosInf` when unbounded (power with
    /// `α = 1` and `ν > λ`). For `ν ≤ 0` the supremum is `−λφ(0) = 0`.
    pub fn conjugate(&self, nu: f64) -> Result<Ext> {
        if nu.is_nan() {
            return Err(Error::Contract("conjugate argument must not be NaN"));
        }
        if nu <= 0.0 {
            return Ok(Ext::ZERO);
        }
        let lam = self.weight;
        let u = nu / lam;
        Ok(match self.kind {
            PenaltyKind::Power { alpha } => {
                if alpha == 1.0 {
                    if u <= 1.0 {
                        Ext::ZERO
                    } else {
                        Ext::PosInf
                    }
                } else if alpha == 2.0 {
                    Ext::Finite(0.5 * lam * u * u)
                } else {
                    let q = alpha / (alpha - 1.0);
                    Ext::Finite(lam * libm::pow(u, q) / q)
                }
            }
            PenaltyKind::LogBarrier { cap, beta } => {
                Ext::Finite(lam * (cap * u - libm::log1p(cap * beta * u) / beta))
            }
            PenaltyKind::Indicator { cap } => Ext::Finite(cap * nu),
        })
    }

    /// Step length `argmin_{ξ≥0} −νξ + λφ(ξ)`; `0` for `ν ≤ 0`.
    ///
    /// Fails with [`Error::UnboundedStep`] (reported at `t = 0`; the solver fills
    /// in the iteration) when the minimization has no solution.
    pub fn xi_step(&self, nu: f64) -> Result<f64> {
        if !nu.is_finite() {
            return Err(Error::Contract("step argument must be finite"));
        }
        if nu <= 0.0 {
            return Ok(0.0);
        }
        let lam = self.weight;
        let u = nu / lam;
        Ok(match self.kind {
            PenaltyKind::Power { alpha } => {
                if alpha == 1.0 {
                    if u <= 1.0 {
                        0.0
                    } else {
                        return Err(Error::UnboundedStep { t: 0, sigma: nu, slope: lam });
                    }
                } else if alpha == 2.0 {
                    u
                } else {
                    libm::pow(u, 1.0 / (alpha - 1.0))
                }
            }
            PenaltyKind::LogBarrier { cap, beta } => cap * cap * beta * u / (cap * beta * u + 1.0),
            PenaltyKind::Indicator { cap } => cap,
        })
    }

    /// Growth certificate after the `λ` scaling.
    ///
    /// Power `α = 2`: `μ = λ/2`, `φ₀ = 0`, `ξ₀ = 0` (exact). Power `α > 2`:
    /// `ξ^α ≥ ξ² − 1` gives `μ = φ₀ = λ/α`, and `u^{1/(α−1)} ≤ αu + 1` gives
    /// `ξ₀ = 1`. Barrier and indicator are finite only on `[0, C]`.
    pub fn growth(&self) -> Growth {
        let lam = self.weight;
        match self.kind {
            PenaltyKind::Power { alpha } if alpha == 2.0 => {
                Growth::Quadratic { mu: 0.5 * lam, phi0: 0.0, xi0: 0.0 }
            }
            PenaltyKind::Power { alpha } if alpha > 2.0 => {
                Growth::Quadratic { mu: lam / alpha, phi0: lam / alpha, xi0: 1.0 }
            }
            PenaltyKind::Power { .. } => Growth::NotGuaranteed,
            PenaltyKind::LogBarrier { cap, .. } | PenaltyKind::Indicator { cap } => {
                Growth::BoundedDomain { cap }
            }
        }
    }

    pub fn convergence_guaranteed(&self) -> bool {
        !matches!(self.growth(), Growth::NotGuaranteed)
    }
}
