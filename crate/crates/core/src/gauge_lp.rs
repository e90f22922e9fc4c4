//! Two-phase primal simplex for small standard-form linear programs
//!
//! ```text
//! minimize cᵀy  subject to  M y = b,  y ≥ 0
//! ```
//!
//! Used to evaluate gauges of explicit atom lists, where `M` holds the atoms as
//! columns. The tableau is dense and pivots follow Bland's rule, so the method
//! terminates on degenerate problems. Sizes are expected to be in the tens to
//! low hundreds.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;
const COST_EPS: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub y: Vec<f64>,
}

/// Outcome of a linear program that has no optimal solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: usize,
    width: usize,
    cells: Vec<f64>,
    basis: Vec<usize>,
    /// Reduced-cost row; its last entry is minus the objective value.
    cost: Vec<f64>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.cells[r * w + c];
        for j in 0..w {
            self.cells[r * w + j] /= p;
        }
        self.cells[r * w + c] = 1.0;
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let factor = self.cells[i * w + c];
            if factor != 0.0 {
                for j in 0..w {
                    let v = self.cells[r * w + j];
                    self.cells[i * w + j] -= factor * v;
                }
                self.cells[i * w + c] = 0.0;
            }
        }
        let factor = self.cost[c];
        if factor != 0.0 {
            for j in 0..w {
                self.cost[j] -= factor * self.cells[r * w + j];
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Runs simplex pivots over columns `< allowed`. Returns `Ok(false)` if the
    /// problem is unbounded along some column.
    fn optimize(&mut self, allowed: usize, max_pivots: usize) -> Result<bool> {
        for _ in 0..max_pivots {
            let Some(enter) = (0..allowed).find(|&j| self.cost[j] < -COST_EPS) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, enter);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - PIVOT_EPS
                                || (ratio <= best + PIVOT_EPS && self.basis[i] < self.basis[r])
                            {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, enter);
        }
        Err(Error::PivotLimit(max_pivots))
    }
}

/// Solves the program with `matrix` given row-major as `rows × cols`.
///
/// The outer `Err` reports numerical trouble (pivot limit); the inner one is
/// the LP status when no optimum exists.
pub fn solve(
    matrix: &[f64],
    rows: usize,
    cols: usize,
    b: &[f64],
    cost: &[f64],
) -> Result<core::result::Result<LpSolution, LpStatus>> {
    if matrix.len() != rows * cols {
        return Err(Error::DimensionMismatch { expected: rows * cols, got: matrix.len() });
    }
    if b.len() != rows {
        return Err(Error::DimensionMismatch { expected: rows, got: b.len() });
    }
    if cost.len() != cols {
        return Err(Error::DimensionMismatch { expected: cols, got: cost.len() });
    }

    // Columns: originals, then one artificial per row, then the right-hand side.
    let width = cols + rows + 1;
    let mut cells = vec![0.0; rows * width];
    for i in 0..rows {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..cols {
            cells[i * width + j] = sign * matrix[i * cols + j];
        }
        cells[i * width + cols + i] = 1.0;
        cells[i * width + width - 1] = sign * b[i];
    }
    let mut phase1 = vec![0.0; width];
    for i in 0..rows {
        for j in 0..cols {
            phase1[j] -= cells[i * width + j];
        }
        phase1[width - 1] -= cells[i * width + width - 1];
    }
    let mut tab = Tableau {
        rows,
        width,
        cells,
        basis: (cols..cols + rows).collect(),
        cost: phase1,
    };
    let max_pivots = 50 * (rows + cols + 10);

    tab.optimize(cols + rows, max_pivots)?;
    let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    if -tab.cost[width - 1] > 1e-9 * scale {
        return Ok(Err(LpStatus::Infeasible));
    }

    // Drive remaining artificials out of the basis; rows where that is
    // impossible are redundant and get cleared.
    let mut dead = vec![false; rows];
    for i in 0..rows {
        if tab.basis[i] >= cols {
            match (0..cols).find(|&j| libm::fabs(tab.at(i, j)) > 1e-9) {
                Some(j) => tab.pivot(i, j),
                None => dead[i] = true,
            }
        }
    }
    for (i, is_dead) in dead.iter().enumerate() {
        if *is_dead {
            for j in 0..width {
                tab.cells[i * width + j] = 0.0;
            }
        }
    }

    let mut reduced = vec![0.0; width];
    reduced[..cols].copy_from_slice(cost);
    for i in 0..rows {
        if dead[i] {
            continue;
        }
        let cb = cost[tab.basis[i]];
        if cb != 0.0 {
            for j in 0..width {
                reduced[j] -= cb * tab.at(i, j);
            }
        }
    }
    tab.cost = reduced;
    if !tab.optimize(cols, max_pivots)? {
        return Ok(Err(LpStatus::Unbounded));
    }

    let mut y = vec![0.0; cols];
    for i in 0..rows {
        if !dead[i] && tab.basis[i] < cols {
            y[tab.basis[i]] = tab.rhs(i).max(0.0);
        }
    }
    let objective = y.iter().zip(cost).map(|(a, c)| a * c).sum();
    Ok(Ok(LpSolution { objective, y }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_the_cheapest_decomposition() {
        // columns (1,0), (0,1), (1,1); target (2,2); unit costs → use (1,1) twice
        let m = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let sol = solve(&m, 2, 3, &[2.0, 2.0], &[1.0; 3]).unwrap().unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-12);
        assert!((sol.y[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        // only nonnegative combinations of (1,0),(0,1): (-1,0) unreachable
        let m = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(solve(&m, 2, 2, &[-1.0, 0.0], &[1.0; 2]).unwrap(), Err(LpStatus::Infeasible));
    }

    #[test]
    fn handles_redundant_rows() {
        // second row duplicates the first
        let m = [1.0, 2.0, 1.0, 2.0];
        let sol = solve(&m, 2, 2, &[4.0, 4.0], &[1.0, 1.0]).unwrap().unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn detects_unboundedness() {
        // minimize -y0 with y0 - y1 = 0
        let m = [1.0, -1.0];
        assert_eq!(solve(&m, 1, 2, &[0.0], &[-1.0, 0.0]).unwrap(), Err(LpStatus::Unbounded));
    }
}
