use crate::atoms::AtomId;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid atomic set: {0}")]
    InvalidAtomicSet(&'static str),
    #[error("invalid penalty: {0}")]
    InvalidPenalty(&'static str),
    #[error("invalid data: {0}")]
    InvalidData(&'static str),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("point lies outside the cone generated by the atoms; gauge is +inf")]
    InfeasibleGauge,
    #[error("linear program did not terminate within {0} pivots")]
    PivotLimit(usize),
    #[error("scalar step is unbounded at t={t}: support value {sigma} exceeds the penalty slope {slope}")]
    UnboundedStep { t: usize, sigma: f64, slope: f64 },
    #[error("iterates diverged at t={t}: |x|_inf = {norm}")]
    Divergence { t: usize, norm: f64 },
    #[error("negative duality gap {gap} at t={t}; screening certificate is corrupt")]
    CertificateCorruption { t: usize, gap: f64 },
    #[error("atom {0} is not part of the set")]
    UnknownAtom(AtomId),
    #[error("operation needs an enumerable atom set (implicit sets with {0} atoms are not scanned)")]
    NotEnumerable(usize),
    #[error("rate fit needs at least 5 positive points in the window, found {0}")]
    TooFewPoints(usize),
}
