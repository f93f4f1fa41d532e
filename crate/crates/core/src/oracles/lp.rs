//! Dense two-phase simplex: Dantzig pricing with a fallback to Bland's rule
//! during degenerate stretches. Meant for a few hundred rows of well-scaled data.

use crate::error::{Error, Result};

const EPS: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// `minimize c.x` subject to linear rows; variables are `>= 0` unless marked free.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    cost: Vec<f64>,
    free: Vec<bool>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

impl LinearProgram {
    pub fn new(cost: Vec<f64>) -> Self {
        let n = cost.len();
        Self { cost, free: vec![false; n], rows: Vec::new() }
    }

    pub fn set_free(&mut self, j: usize) {
        self.free[j] = true;
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.cost.len(), "row length must match the number of variables");
        self.rows.push((coeffs, rel, rhs));
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let n = self.cost.len();
        // column map: each free variable becomes x+ - x-
        let mut cols: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            cols.push((j, 1.0));
            if self.free[j] {
                cols.push((j, -1.0));
            }
        }
        let nx = cols.len();
        // normalize every row to a nonnegative right-hand side; a row whose
        // slack can start in the basis needs no artificial variable
        let rows: Vec<(Vec<f64>, Relation, f64)> = self
            .rows
            .iter()
            .map(|(coeffs, rel, rhs)| {
                let flip = *rhs < 0.0 || (*rhs == 0.0 && *rel == Relation::Ge);
                let sgn = if flip { -1.0 } else { 1.0 };
                let rel = match (rel, flip) {
                    (Relation::Le, true) => Relation::Ge,
                    (Relation::Ge, true) => Relation::Le,
                    (r, _) => *r,
                };
                let row = cols.iter().map(|&(j, s)| sgn * s * coeffs[j]).collect();
                (row, rel, sgn * rhs)
            })
            .collect();
        let nr = rows.len();
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let width = nx + n_slack + n_art;
        let mut t = vec![vec![0.0; width + 1]; nr];
        let mut basis = vec![0usize; nr];
        let (mut slack, mut art) = (nx, nx + n_slack);
        for (i, (row, rel, rhs)) in rows.into_iter().enumerate() {
            t[i][..nx].copy_from_slice(&row);
            t[i][width] = rhs;
            match rel {
                Relation::Le => {
                    t[i][slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    t[i][slack] = -1.0;
                    slack += 1;
                    t[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    t[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        let artificial = |c: usize| c >= nx + n_slack;

        // phase one
        let mut phase1 = vec![0.0; width];
        for c in nx + n_slack..width {
            phase1[c] = 1.0;
        }
        run_simplex(&mut t, &mut basis, &phase1, width, |_| true)?;
        let infeas: f64 = basis
            .iter()
            .zip(&t)
            .filter(|(&b, _)| artificial(b))
            .map(|(_, row)| row[width])
            .sum();
        if infeas > 1e-8 {
            return Err(Error::InvalidParameter(format!("linear program infeasible (residual {infeas:e})")));
        }
        // drive zero-level artificials out of the basis, dropping redundant rows
        let mut i = 0;
        while i < t.len() {
            if artificial(basis[i]) {
                if let Some(c) = (0..nx + n_slack).find(|&c| t[i][c].abs() > EPS) {
                    pivot(&mut t, &mut basis, i, c, width);
                    i += 1;
                } else {
                    t.remove(i);
                    basis.remove(i);
                }
            } else {
                i += 1;
            }
        }

        // phase two
        let mut cost = vec![0.0; width];
        for (c, &(j, s)) in cols.iter().enumerate() {
            cost[c] = s * self.cost[j];
        }
        run_simplex(&mut t, &mut basis, &cost, width, |c| !artificial(c))?;

        let mut col_values = vec![0.0; width];
        for (row, &b) in t.iter().zip(&basis) {
            col_values[b] = row[width];
        }
        let mut x = vec![0.0; n];
        for (c, &(j, s)) in cols.iter().enumerate() {
            x[j] += s * col_values[c];
        }
        let value = x.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
        Ok(LpSolution { x, value })
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, c: usize, width: usize) {
    let p = t[r][c];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let pivot_row = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i == r {
            continue;
        }
        let f = row[c];
        if f != 0.0 {
            for k in 0..=width {
                row[k] -= f * pivot_row[k];
            }
            row[c] = 0.0;
        }
    }
    basis[r] = c;
}

fn run_simplex(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &[f64],
    width: usize,
    allowed: impl Fn(usize) -> bool,
) -> Result<()> {
    // reduced costs c_j - c_B B^{-1} A_j, kept up to date across pivots
    let mut rc: Vec<f64> = (0..width)
        .map(|c| cost[c] - t.iter().zip(basis.iter()).map(|(row, &b)| cost[b] * row[c]).sum::<f64>())
        .collect();
    let max_pivots = 50_000 + 50 * width * t.len().max(1);
    let mut stalled = 0usize;
    for _ in 0..max_pivots {
        // Dantzig's rule, switching to Bland's rule while degenerate pivots pile up
        let bland = stalled > 50;
        let mut entering: Option<usize> = None;
        for c in (0..width).filter(|&c| allowed(c) && rc[c] < -EPS) {
            if bland {
                entering = Some(c);
                break;
            }
            if entering.is_none_or(|e| rc[c] < rc[e]) {
                entering = Some(c);
            }
        }
        let Some(c) = entering else {
            return Ok(());
        };
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in t.iter().enumerate() {
            if row[c] > EPS {
                let ratio = row[width] / row[c];
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - EPS || (ratio <= br + EPS && basis[i] < basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        let Some((r, ratio)) = best else {
            return Err(Error::InvalidParameter("linear program unbounded".into()));
        };
        stalled = if ratio.abs() <= EPS { stalled + 1 } else { 0 };
        pivot(t, basis, r, c, width);
        let f = rc[c];
        rc.iter_mut().zip(&t[r]).for_each(|(v, p)| *v -= f * p);
        rc[c] = 0.0;
    }
    Err(Error::InvalidParameter("simplex pivot limit reached".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(vec![-3.0, -5.0]);
        lp.add_row(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.add_row(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.add_row(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!((s.value + 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min |x - 3| via x free, z >= x - 3, z >= 3 - x, plus x + y = 1, y >= 0
        let mut lp = LinearProgram::new(vec![0.0, 0.0, 1.0]);
        lp.set_free(0);
        lp.add_row(vec![-1.0, 0.0, 1.0], Relation::Ge, -3.0);
        lp.add_row(vec![1.0, 0.0, 1.0], Relation::Ge, 3.0);
        lp.add_row(vec![1.0, 1.0, 0.0], Relation::Eq, 1.0);
        let s = lp.solve().unwrap();
        // y >= 0 forces x <= 1, so the best is x = 1 with value 2
        assert!((s.value - 2.0).abs() < 1e-12);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_row(vec![1.0], Relation::Le, -1.0);
        assert!(lp.solve().is_err());
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.add_row(vec![1.0], Relation::Ge, 0.0);
        assert!(lp.solve().is_err());
    }
}
