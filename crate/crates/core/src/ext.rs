use core::fmt;

/// A real number or `+∞`.
///
/// Penalties with bounded domains (indicator, log-barrier) and unbounded
/// conjugates need an exact "infinite" value that never arises from overflow.
/// The derived ordering places every finite value below `PosInf`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum Ext {
    Finite(f64),
    PosInf,
}

impl Ext {
    pub const ZERO: Ext = Ext::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, Ext::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Ext::Finite(v) => Some(v),
            Ext::PosInf => None,
        }
    }

    /// Lossy view as an IEEE double (`+∞` maps to `f64::INFINITY`).
    pub fn to_f64(self) -> f64 {
        match self {
            Ext::Finite(v) => v,
            Ext::PosInf => f64::INFINITY,
        }
    }

    pub fn min(self, other: Ext) -> Ext {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl From<f64> for Ext {
    fn from(v: f64) -> Self {
        Ext::Finite(v)
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ext::Finite(v) => write!(f, "{v}"),
            Ext::PosInf => f.write_str("inf"),
        }
    }
}
