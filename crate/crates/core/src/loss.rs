//! Smooth convex losses over a dense data matrix.
//!
//! Both losses are functions of the linear predictor `Ax`, so the solver keeps
//! `Ax` up to date incrementally and calls the `*_from_predictor` methods.

use alloc::vec;
use alloc::vec::Vec;

use crate::atoms::{AtomId, AtomKind, AtomicSet};
use crate::linalg::dot;
use crate::{Error, Result};

/// Row-major `n × d` matrix `A` with targets `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    d: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n: usize, d: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidData("data matrix must have n, d ≥ 1"));
        }
        if a.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, got: a.len() });
        }
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        if !a.iter().chain(&b).all(|v| v.is_finite()) {
            return Err(Error::InvalidData("data entries must be finite"));
        }
        Ok(DataMatrix { n, d, a, b })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.d..(i + 1) * self.d]
    }

    pub fn entries(&self) -> &[f64] {
        &self.a
    }

    pub fn targets(&self) -> &[f64] {
        &self.b
    }

    /// `A v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    /// `Aᵀ w`.
    pub fn apply_transpose(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for (i, wi) in w.iter().enumerate() {
            if *wi != 0.0 {
                for (o, a) in out.iter_mut().zip(self.row(i)) {
                    *o += wi * a;
                }
            }
        }
        out
    }

    /// `‖A_{:,k}‖₂²` for every column.
    pub fn column_norms_sq(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for i in 0..self.n {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * a;
            }
        }
        out
    }

    /// Right-multiplies by a `d × d` matrix (row-major): `A ↦ A M`.
    pub fn times(&self, m: &[f64]) -> Result<DataMatrix> {
        let d = self.d;
        if m.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: m.len() });
        }
        let mut a = vec![0.0; self.n * d];
        for i in 0..self.n {
            let row = self.row(i);
            for (k, r) in row.iter().enumerate() {
                if *r != 0.0 {
                    for j in 0..d {
                        a[i * d + j] += r * m[k * d + j];
                    }
                }
            }
        }
        DataMatrix::new(self.n, d, a, self.b.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `½‖Ax − b‖²`
    Quadratic,
    /// `(1/n) Σ log(1 + exp(−b_i a_iᵀx))` with labels `b_i ∈ {−1, +1}`
    Logistic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loss {
    kind: LossKind,
    data: DataMatrix,
}

/// `log(1 + eᵗ)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + libm::log1p(libm::exp(-libm::fabs(t)))
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + libm::exp(-t))
    } else {
        let e = libm::exp(t);
        e / (1.0 + e)
    }
}

impl Loss {
    pub fn quadratic(data: DataMatrix) -> Self {
        Loss { kind: LossKind::Quadratic, data }
    }

    pub fn logistic(data: DataMatrix) -> Result<Self> {
        if !data.b.iter().all(|v| *v == 1.0 || *v == -1.0) {
            return Err(Error::InvalidData("logistic labels must be -1 or +1"));
        }
        Ok(Loss { kind: LossKind::Logistic, data })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn data(&self) -> &DataMatrix {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.d
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.data.d {
            return Err(Error::DimensionMismatch { expected: self.data.d, got: x.len() });
        }
        Ok(())
    }

    /// `Ax`.
    pub fn predictor(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.data.apply(x))
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let ax = self.predictor(x)?;
        Ok(self.value_from_predictor(&ax))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ax = self.predictor(x)?;
        Ok(self.gradient_from_predictor(&ax))
    }

    pub fn value_from_predictor(&self, ax: &[f64]) -> f64 {
        let b = &self.data.b;
        match self.kind {
            LossKind::Quadratic => 0.5 * ax.iter().zip(b).map(|(p, t)| (p - t) * (p - t)).sum::<f64>(),
            LossKind::Logistic => {
                ax.iter().zip(b).map(|(p, t)| softplus(-t * p)).sum::<f64>() / self.data.n as f64
            }
        }
    }

    /// `∂f/∂(Ax)`, i.e. the weights `w` with `∇f = Aᵀw`.
    pub fn residual_weights(&self, ax: &[f64]) -> Vec<f64> {
        let b = &self.data.b;
        match self.kind {
            LossKind::Quadratic => ax.iter().zip(b).map(|(p, t)| p - t).collect(),
            LossKind::Logistic => {
                let inv_n = 1.0 / self.data.n as f64;
                ax.iter().zip(b).map(|(p, t)| -t * sigmoid(-t * p) * inv_n).collect()
            }
        }
    }

    pub fn gradient_from_predictor(&self, ax: &[f64]) -> Vec<f64> {
        self.data.apply_transpose(&self.residual_weights(ax))
    }

    /// Diagonal `D` of the Hessian `AᵀDA`.
    pub fn curvature_weights(&self, ax: &[f64]) -> Vec<f64> {
        match self.kind {
            LossKind::Quadratic => vec![1.0; self.data.n],
            LossKind::Logistic => {
                let inv_n = 1.0 / self.data.n as f64;
                ax.iter()
                    .map(|p| {
                        let s = sigmoid(*p);
                        s * (1.0 - s) * inv_n
                    })
                    .collect()
            }
        }
    }

    /// `A p` for atom `id`; a scaled column for the signed basis.
    pub fn atom_image(&self, set: &AtomicSet, id: AtomId) -> Result<Vec<f64>> {
        if set.dim() != self.data.d {
            return Err(Error::DimensionMismatch { expected: self.data.d, got: set.dim() });
        }
        match set.kind() {
            AtomKind::SignedBasis => {
                if id >= set.atom_count() {
                    return Err(Error::UnknownAtom(id));
                }
                let k = id / 2;
                let c = if id.is_multiple_of(2) { set.scale() } else { -set.scale() };
                Ok((0..self.data.n).map(|i| c * self.data.a[i * self.data.d + k]).collect())
            }
            _ => Ok(self.data.apply(&set.atom(id)?)),
        }
    }

    /// Upper bound on `sup_{p,q ∈ P̃} |pᵀ∇²f q|`, the smoothness constant with
    /// respect to the symmetrized set.
    ///
    /// The Hessian is `AᵀDA` with `D ≼ I` (quadratic) or `D ≼ I/(4n)` (logistic).
    /// Signed basis: `C²·max_k ‖A_{:,k}‖²`. Hypercube: `C²·(Σ_k ‖A_{:,k}‖)²`.
    /// Explicit lists: maximum of `|(Ap)ᵀ(Aq)|` over all atom pairs. Negating an
    /// atom does not change the pair values, so the set need not be symmetrized.
    pub fn smoothness_wrt(&self, set: &AtomicSet) -> Result<f64> {
        if set.dim() != self.data.d {
            return Err(Error::DimensionMismatch { expected: self.data.d, got: set.dim() });
        }
        let curvature = match self.kind {
            LossKind::Quadratic => 1.0,
            LossKind::Logistic => 0.25 / self.data.n as f64,
        };
        let c2 = set.scale() * set.scale();
        let gram_max = match set.kind() {
            AtomKind::SignedBasis => c2 * self.data.column_norms_sq().iter().fold(0.0f64, |m, v| m.max(*v)),
            AtomKind::HypercubeVertices => {
                let s: f64 = self.data.column_norms_sq().iter().map(|v| libm::sqrt(*v)).sum();
                c2 * s * s
            }
            AtomKind::ExplicitList => {
                let images = (0..set.atom_count())
                    .map(|id| self.atom_image(set, id))
                    .collect::<Result<Vec<_>>>()?;
                let mut best = 0.0f64;
                for i in 0..images.len() {
                    for j in 0..=i {
                        best = best.max(libm::fabs(dot(&images[i], &images[j])));
                    }
                }
                best
            }
        };
        Ok(curvature * gram_max)
    }
}
