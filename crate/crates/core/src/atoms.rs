//! Finite atomic sets and their three oracles: linear maximization (LMO),
//! support function and gauge.
//!
//! A set stores `C·P₀`, i.e. the magnification `C` is folded into the atoms, so
//! `gauge_value` returns `κ_{C·P}(x) = κ_P(x)/C` and `support_value` returns
//! `C·σ_P(z)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::gauge_lp::{self, LpStatus};
use crate::linalg::{dot, norm1, norm_inf};
use crate::{Error, Result};

/// Index of an atom within its set.
///
/// Signed basis: `2k` is `+C·e_k`, `2k+1` is `−C·e_k`. Hypercube vertices: bit
/// `k` set means coordinate `k` is `−C`. Explicit lists: row index.
pub type AtomId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomKind {
    SignedBasis,
    HypercubeVertices,
    ExplicitList,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    SignedBasis,
    Hypercube,
    /// Row-major `m × d`, already multiplied by the scale.
    Explicit { atoms: Vec<f64>, count: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicSet {
    dim: usize,
    scale: f64,
    repr: Repr,
    contains_zero: bool,
}

/// One conic decomposition `x = Σ c_i p_i` achieving the gauge.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeDecomposition {
    pub value: f64,
    pub coeffs: Vec<(AtomId, f64)>,
}

/// Active/inactive flag per atom. Implicit sets (hypercube vertices) only
/// support the all-active mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomMask {
    active: Option<Vec<bool>>,
    count: usize,
}

impl AtomMask {
    pub fn all(total: usize) -> Self {
        AtomMask { active: Some(vec![true; total]), count: total }
    }

    fn implicit(total: usize) -> Self {
        AtomMask { active: None, count: total }
    }

    pub fn from_ids(total: usize, ids: &[AtomId]) -> Result<Self> {
        let mut active = vec![false; total];
        for &id in ids {
            *active.get_mut(id).ok_or(Error::UnknownAtom(id))? = true;
        }
        let count = active.iter().filter(|a| **a).count();
        Ok(AtomMask { active: Some(active), count })
    }

    pub fn active_count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_implicit(&self) -> bool {
        self.active.is_none()
    }

    pub fn is_active(&self, id: AtomId) -> bool {
        match &self.active {
            Some(a) => a.get(id).copied().unwrap_or(false),
            None => id < self.count,
        }
    }

    /// Active ids in increasing order; empty for implicit masks.
    pub fn active_ids(&self) -> Vec<AtomId> {
        match &self.active {
            Some(a) => a.iter().enumerate().filter(|(_, on)| **on).map(|(i, _)| i).collect(),
            None => Vec::new(),
        }
    }

    pub fn deactivate(&mut self, id: AtomId) -> Result<()> {
        let active = self
            .active
            .as_mut()
            .ok_or(Error::Contract("implicit masks cannot be pruned"))?;
        let slot = active.get_mut(id).ok_or(Error::UnknownAtom(id))?;
        if *slot {
            *slot = false;
            self.count -= 1;
        }
        Ok(())
    }

    pub fn is_subset_of(&self, other: &AtomMask) -> bool {
        match (&self.active, &other.active) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| !*x || *y),
        }
    }
}

impl AtomicSet {
    /// `{±C·e_k}`; the gauge is `‖x‖₁/C`.
    pub fn signed_basis(dim: usize, scale: f64) -> Result<Self> {
        check_dims(dim, scale)?;
        Ok(AtomicSet { dim, scale, repr: Repr::SignedBasis, contains_zero: true })
    }

    /// `C·{±1}^d` with an implicit sign oracle; the gauge is `‖x‖_∞/C`.
    /// Atom ids are bit patterns, which limits `d` to the pointer width minus one.
    pub fn hypercube(dim: usize, scale: f64) -> Result<Self> {
        check_dims(dim, scale)?;
        if dim >= usize::BITS as usize {
            return Err(Error::InvalidAtomicSet("hypercube dimension too large for bit-pattern ids"));
        }
        Ok(AtomicSet { dim, scale, repr: Repr::Hypercube, contains_zero: true })
    }

    /// Explicit list of atoms (unscaled); they are stored multiplied by `scale`.
    pub fn explicit(dim: usize, atoms: &[Vec<f64>], scale: f64) -> Result<Self> {
        check_dims(dim, scale)?;
        let mut flat = Vec::with_capacity(atoms.len() * dim);
        for a in atoms {
            if a.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: a.len() });
            }
            flat.extend(a.iter().map(|v| v * scale));
        }
        Self::from_scaled(dim, scale, flat)
    }

    fn from_scaled(dim: usize, scale: f64, flat: Vec<f64>) -> Result<Self> {
        let count = flat.len() / dim;
        if count == 0 {
            return Err(Error::InvalidAtomicSet("an explicit set needs at least one atom"));
        }
        if !flat.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidAtomicSet("atom coordinates must be finite"));
        }
        for i in 0..count {
            for j in 0..i {
                if flat[i * dim..(i + 1) * dim] == flat[j * dim..(j + 1) * dim] {
                    return Err(Error::InvalidAtomicSet("atoms must be pairwise distinct"));
                }
            }
        }
        let contains_zero = hull_contains_origin(&flat, dim, count)?;
        Ok(AtomicSet { dim, scale, repr: Repr::Explicit { atoms: flat, count }, contains_zero })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn contains_zero(&self) -> bool {
        self.contains_zero
    }

    pub fn kind(&self) -> AtomKind {
        match self.repr {
            Repr::SignedBasis => AtomKind::SignedBasis,
            Repr::Hypercube => AtomKind::HypercubeVertices,
            Repr::Explicit { .. } => AtomKind::ExplicitList,
        }
    }

    pub fn atom_count(&self) -> usize {
        match &self.repr {
            Repr::SignedBasis => 2 * self.dim,
            Repr::Hypercube => 1usize << self.dim,
            Repr::Explicit { count, .. } => *count,
        }
    }

    /// True for sets whose atoms are materialized or cheap to list, so masks can
    /// be pruned and per-atom scans are allowed.
    pub fn is_enumerable(&self) -> bool {
        !matches!(self.repr, Repr::Hypercube)
    }

    pub fn full_mask(&self) -> AtomMask {
        match self.repr {
            Repr::Hypercube => AtomMask::implicit(self.atom_count()),
            _ => AtomMask::all(self.atom_count()),
        }
    }

    /// The (scaled) atom vector.
    pub fn atom(&self, id: AtomId) -> Result<Vec<f64>> {
        if id >= self.atom_count() {
            return Err(Error::UnknownAtom(id));
        }
        let d = self.dim;
        Ok(match &self.repr {
            Repr::SignedBasis => {
                let mut v = vec![0.0; d];
                v[id / 2] = if id.is_multiple_of(2) { self.scale } else { -self.scale };
                v
            }
            Repr::Hypercube => (0..d)
                .map(|k| if (id >> k) & 1 == 0 { self.scale } else { -self.scale })
                .collect(),
            Repr::Explicit { atoms, .. } => atoms[id * d..(id + 1) * d].to_vec(),
        })
    }

    /// `pᵀz` for atom `id`; `id` must be in range.
    pub fn atom_dot(&self, id: AtomId, z: &[f64]) -> f64 {
        let d = self.dim;
        match &self.repr {
            Repr::SignedBasis => {
                let v = self.scale * z[id / 2];
                if id.is_multiple_of(2) {
                    v
                } else {
                    -v
                }
            }
            Repr::Hypercube => (0..d)
                .map(|k| if (id >> k) & 1 == 0 { self.scale * z[k] } else { -(self.scale * z[k]) })
                .sum(),
            Repr::Explicit { atoms, .. } => dot(&atoms[id * d..(id + 1) * d], z),
        }
    }

    fn check_vector(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::Contract("vector entries must be finite"));
        }
        Ok(())
    }

    /// Linear maximization oracle over the active atoms: returns the atom
    /// maximizing `pᵀz` and the maximum. Ties go to the lowest id.
    pub fn lmo(&self, mask: &AtomMask, z: &[f64]) -> Result<(AtomId, f64)> {
        self.check_vector(z)?;
        if mask.is_empty() {
            return Err(Error::Contract("LMO over an empty mask"));
        }
        let best = match (&self.repr, &mask.active) {
            (Repr::Hypercube, _) => {
                let id = z
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (k, v)| if *v < 0.0 { acc | (1 << k) } else { acc });
                id
            }
            (_, Some(active)) => {
                let mut best: Option<(AtomId, f64)> = None;
                for (id, _) in active.iter().enumerate().filter(|(_, on)| **on) {
                    let v = self.atom_dot(id, z);
                    if best.is_none_or(|(_, b)| v > b) {
                        best = Some((id, v));
                    }
                }
                best.map(|(id, _)| id).ok_or(Error::Contract("LMO over an empty mask"))?
            }
            (_, None) => return Err(Error::Contract("mask does not match the atomic set")),
        };
        Ok((best, self.atom_dot(best, z)))
    }

    /// `σ(z) = max pᵀz` over the active atoms.
    pub fn support_value(&self, mask: &AtomMask, z: &[f64]) -> Result<f64> {
        self.lmo(mask, z).map(|(_, s)| s)
    }

    /// Support value over the full set.
    pub fn support_full(&self, z: &[f64]) -> Result<f64> {
        self.support_value(&self.full_mask(), z)
    }

    /// Closed-form gauge, when the set has one.
    pub fn exact_gauge(&self, x: &[f64]) -> Option<f64> {
        match self.repr {
            Repr::SignedBasis => Some(norm1(x) / self.scale),
            Repr::Hypercube => Some(norm_inf(x) / self.scale),
            Repr::Explicit { .. } => None,
        }
    }

    /// `κ(x) = min Σ c_i` over `c ≥ 0` with `Σ c_i p_i = x`.
    pub fn gauge_value(&self, x: &[f64]) -> Result<f64> {
        self.check_vector(x)?;
        match self.exact_gauge(x) {
            Some(v) => Ok(v),
            None => self.gauge_decomposition(x).map(|g| g.value),
        }
    }

    /// The gauge together with one optimal decomposition (the support witness).
    pub fn gauge_decomposition(&self, x: &[f64]) -> Result<GaugeDecomposition> {
        self.check_vector(x)?;
        let d = self.dim;
        match &self.repr {
            Repr::SignedBasis => {
                let coeffs = x
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, v)| (if *v > 0.0 { 2 * k } else { 2 * k + 1 }, libm::fabs(*v) / self.scale))
                    .collect();
                Ok(GaugeDecomposition { value: norm1(x) / self.scale, coeffs })
            }
            Repr::Hypercube => Ok(hypercube_decomposition(x, self.scale)),
            Repr::Explicit { atoms, count } => {
                let m = *count;
                // atoms as columns
                let mut cols = vec![0.0; d * m];
                for i in 0..m {
                    for k in 0..d {
                        cols[k * m + i] = atoms[i * d + k];
                    }
                }
                match gauge_lp::solve(&cols, d, m, x, &vec![1.0; m])? {
                    Ok(sol) => Ok(GaugeDecomposition {
                        value: sol.objective,
                        coeffs: sol
                            .y
                            .iter()
                            .enumerate()
                            .filter(|(_, c)| **c > 0.0)
                            .map(|(i, c)| (i, *c))
                            .collect(),
                    }),
                    Err(LpStatus::Infeasible) => Err(Error::InfeasibleGauge),
                    Err(LpStatus::Unbounded) => Err(Error::Contract("gauge LP is unbounded")),
                }
            }
        }
    }

    /// `P ∪ −P`, deduplicated. The signed basis and the hypercube are already
    /// symmetric.
    pub fn symmetrize(&self) -> Result<AtomicSet> {
        match &self.repr {
            Repr::Explicit { atoms, count } => {
                let d = self.dim;
                let mut flat = atoms.clone();
                for i in 0..*count {
                    let neg: Vec<f64> = atoms[i * d..(i + 1) * d].iter().map(|v| -v).collect();
                    let present = (0..flat.len() / d).any(|j| flat[j * d..(j + 1) * d] == neg[..]);
                    if !present {
                        flat.extend_from_slice(&neg);
                    }
                }
                Self::from_scaled(d, self.scale, flat)
            }
            _ => Ok(self.clone()),
        }
    }

    /// Applies a linear map (row-major `d × d`) to every atom. Only explicit
    /// lists can represent the image in general.
    pub fn map_linear(&self, map: &[f64]) -> Result<AtomicSet> {
        let d = self.dim;
        if map.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: map.len() });
        }
        if !self.is_enumerable() {
            return Err(Error::NotEnumerable(self.atom_count()));
        }
        let mut flat = Vec::with_capacity(self.atom_count() * d);
        for id in 0..self.atom_count() {
            let p = self.atom(id)?;
            flat.extend((0..d).map(|r| dot(&map[r * d..(r + 1) * d], &p)));
        }
        Self::from_scaled(d, self.scale, flat)
    }
}

fn check_dims(dim: usize, scale: f64) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidAtomicSet("dimension must be positive"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidAtomicSet("scale must be positive and finite"));
    }
    Ok(())
}

/// Is `0 ∈ conv(atoms)`? Feasibility of `Σ c_i p_i = 0, Σ c_i = 1, c ≥ 0`.
fn hull_contains_origin(flat: &[f64], d: usize, m: usize) -> Result<bool> {
    let rows = d + 1;
    let mut mat = vec![0.0; rows * m];
    for i in 0..m {
        for k in 0..d {
            mat[k * m + i] = flat[i * d + k];
        }
        mat[d * m + i] = 1.0;
    }
    let mut b = vec![0.0; rows];
    b[d] = 1.0;
    Ok(gauge_lp::solve(&mat, rows, m, &b, &vec![0.0; m])?.is_ok())
}

/// Writes `x = κ·C·y` with `y ∈ [−1,1]^d` as a convex combination of sign
/// vectors: vertex `v(u)_k = +1` iff `(y_k+1)/2 > u`, for `u` uniform on
/// `[0,1)`, is piecewise constant with breakpoints at the sorted `(y_k+1)/2`.
fn hypercube_decomposition(x: &[f64], scale: f64) -> GaugeDecomposition {
    let kappa = norm_inf(x) / scale;
    if kappa == 0.0 {
        return GaugeDecomposition { value: 0.0, coeffs: Vec::new() };
    }
    let y: Vec<f64> = x.iter().map(|v| v / (kappa * scale)).collect();
    let mut breaks: Vec<f64> = y.iter().map(|v| ((v + 1.0) / 2.0).clamp(0.0, 1.0)).collect();
    breaks.push(0.0);
    breaks.push(1.0);
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    let mut coeffs: Vec<(AtomId, f64)> = Vec::new();
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let id = y
            .iter()
            .enumerate()
            .fold(0usize, |acc, (k, v)| if (v + 1.0) / 2.0 > mid { acc } else { acc | (1 << k) });
        match coeffs.iter_mut().find(|(i, _)| *i == id) {
            Some((_, c)) => *c += kappa * (hi - lo),
            None => coeffs.push((id, kappa * (hi - lo))),
        }
    }
    coeffs.sort_by_key(|(id, _)| *id);
    GaugeDecomposition { value: kappa, coeffs }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_atoms() -> AtomicSet {
        AtomicSet::explicit(2, &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], 1.0).unwrap()
    }

    #[test]
    fn signed_basis_lmo_picks_largest_magnitude_with_sign() {
        let set = AtomicSet::signed_basis(3, 1.0).unwrap();
        assert_eq!(set.lmo(&set.full_mask(), &[3.0, -1.0, 2.0]).unwrap(), (0, 3.0));
        assert_eq!(set.lmo(&set.full_mask(), &[1.0, -4.0, 2.0]).unwrap(), (3, 4.0));
    }

    #[test]
    fn explicit_lmo_enumerates() {
        let set = three_atoms();
        // inner products 1, 1, 2
        assert_eq!(set.lmo(&set.full_mask(), &[1.0, 1.0]).unwrap(), (2, 2.0));
    }

    #[test]
    fn zero_direction_ties_to_lowest_id() {
        for set in [
            AtomicSet::signed_basis(3, 1.0).unwrap(),
            AtomicSet::hypercube(3, 1.0).unwrap(),
            three_atoms(),
        ] {
            let z = vec![0.0; set.dim()];
            assert_eq!(set.lmo(&set.full_mask(), &z).unwrap(), (0, 0.0));
        }
    }

    #[test]
    fn empty_mask_is_a_contract_violation() {
        let set = AtomicSet::signed_basis(2, 1.0).unwrap();
        let mask = AtomMask::from_ids(4, &[]).unwrap();
        assert!(matches!(set.lmo(&mask, &[1.0, 0.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn masked_lmo_skips_inactive_atoms() {
        let set = AtomicSet::signed_basis(3, 1.0).unwrap();
        let mask = AtomMask::from_ids(6, &[3, 4]).unwrap();
        assert_eq!(set.lmo(&mask, &[3.0, -1.0, 2.0]).unwrap(), (4, 2.0));
    }

    #[test]
    fn support_values() {
        let set = AtomicSet::signed_basis(3, 1.0).unwrap();
        assert_eq!(set.support_full(&[3.0, -1.0, 2.0]).unwrap(), 3.0);
        let big = AtomicSet::signed_basis(3, 10.0).unwrap();
        assert_eq!(big.support_full(&[3.0, -1.0, 2.0]).unwrap(), 30.0);
        let cube = AtomicSet::hypercube(2, 1.0).unwrap();
        // vertices (1,1),(1,-1),(-1,1),(-1,-1) give -3, 7, -7, 3
        assert_eq!(cube.support_full(&[2.0, -5.0]).unwrap(), 7.0);
    }

    #[test]
    fn gauge_values() {
        let set = AtomicSet::signed_basis(3, 1.0).unwrap();
        assert_eq!(set.gauge_value(&[1.0, -2.0, 0.0]).unwrap(), 3.0);
        let big = AtomicSet::signed_basis(3, 10.0).unwrap();
        assert!((big.gauge_value(&[1.0, -2.0, 0.0]).unwrap() - 0.3).abs() < 1e-15);
        let g = three_atoms().gauge_decomposition(&[2.0, 2.0]).unwrap();
        assert!((g.value - 2.0).abs() < 1e-12);
        assert_eq!(g.coeffs.len(), 1);
        assert_eq!(g.coeffs[0].0, 2);
    }

    #[test]
    fn gauge_outside_cone_is_infeasible() {
        assert_eq!(three_atoms().gauge_value(&[-1.0, 0.0]), Err(Error::InfeasibleGauge));
    }

    #[test]
    fn hypercube_decomposition_reproduces_x() {
        let cube = AtomicSet::hypercube(3, 2.0).unwrap();
        let x = [0.5, -1.0, 0.25];
        let g = cube.gauge_decomposition(&x).unwrap();
        assert!((g.value - 0.5).abs() < 1e-15);
        let total: f64 = g.coeffs.iter().map(|(_, c)| c).sum();
        assert!((total - g.value).abs() < 1e-14);
        let mut rebuilt = [0.0; 3];
        for (id, c) in &g.coeffs {
            let p = cube.atom(*id).unwrap();
            for k in 0..3 {
                rebuilt[k] += c * p[k];
            }
        }
        for k in 0..3 {
            assert!((rebuilt[k] - x[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetrize_examples() {
        let basis = AtomicSet::signed_basis(4, 2.0).unwrap();
        assert_eq!(basis.symmetrize().unwrap(), basis);
        let one = AtomicSet::explicit(2, &[vec![1.0, 0.0]], 1.0).unwrap();
        let sym = one.symmetrize().unwrap();
        assert_eq!(sym.atom_count(), 2);
        assert_eq!(sym.atom(1).unwrap(), vec![-1.0, 0.0]);
        assert!(!one.contains_zero());
        assert!(sym.contains_zero());
    }

    #[test]
    fn explicit_set_rejects_duplicates_and_empty() {
        assert!(AtomicSet::explicit(2, &[vec![1.0, 0.0], vec![1.0, 0.0]], 1.0).is_err());
        assert!(AtomicSet::explicit(2, &[], 1.0).is_err());
        assert!(AtomicSet::signed_basis(2, 0.0).is_err());
    }

    #[test]
    fn mask_bookkeeping() {
        let mut mask = AtomMask::all(4);
        let full = mask.clone();
        mask.deactivate(2).unwrap();
        mask.deactivate(2).unwrap();
        assert_eq!(mask.active_count(), 3);
        assert_eq!(mask.active_ids(), vec![0, 1, 3]);
        assert!(mask.is_subset_of(&full));
        assert!(!full.is_subset_of(&mask));
    }
}
