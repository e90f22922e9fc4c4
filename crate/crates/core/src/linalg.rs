//! Dense helpers on slices. Matrices are row-major.

use alloc::vec::Vec;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y ← a·x + y`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(libm::fabs(*v)))
}

pub fn norm1(x: &[f64]) -> f64 {
    x.iter().map(|v| libm::fabs(*v)).sum()
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Solves `H y = rhs` for a symmetric positive definite `H` (k×k, row-major)
/// by Cholesky factorization. Returns `None` when a pivot is not positive.
pub fn cholesky_solve(h: &[f64], k: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    debug_assert_eq!(h.len(), k * k);
    let mut l = alloc::vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = h[i * k + j];
            for p in 0..j {
                s -= l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * k + i] = libm::sqrt(s);
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..k {
        let mut s = y[i];
        for p in 0..i {
            s -= l[i * k + p] * y[p];
        }
        y[i] = s / l[i * k + i];
    }
    for i in (0..k).rev() {
        let mut s = y[i];
        for p in i + 1..k {
            s -= l[p * k + i] * y[p];
        }
        y[i] = s / l[i * k + i];
    }
    Some(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_small_system() {
        // [[4,2],[2,3]] y = [2,1]  →  y = [0.5, 0]
        let y = cholesky_solve(&[4.0, 2.0, 2.0, 3.0], 2, &[2.0, 1.0]).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-15 && y[1].abs() < 1e-15);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert!(cholesky_solve(&[1.0, 2.0, 2.0, 1.0], 2, &[1.0, 1.0]).is_none());
    }
}
