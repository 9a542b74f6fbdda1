//! Dense-tableau primal simplex over exact rationals.
//!
//! Two phases with artificial variables on equality rows; Bland's rule for
//! both the entering and the leaving variable, so the method cannot cycle.
//! Problems are of the form
//!
//! ```text
//! minimize    c^T y
//! subject to  a_r^T y  = b_r   (equality rows)
//!             a_r^T y <= b_r   (inequality rows)
//!             y >= 0
//! ```
//!
//! The returned duals satisfy `c_j - sum_r dual_r a_rj >= 0` for every
//! column at optimality, with `dual_r <= 0` on inequality rows.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Equal,
    AtMost,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, Rational)>,
    pub kind: RowKind,
    pub rhs: Rational,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub costs: Vec<Rational>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: Rational,
    pub values: Vec<Rational>,
    pub duals: Vec<Rational>,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(costs: Vec<Rational>) -> Self {
        Self {
            costs,
            rows: Vec::new(),
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, Rational)>, kind: RowKind, rhs: Rational) {
        self.rows.push(Row { coeffs, kind, rhs });
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Tableau::build(self)?.run(self)
    }
}

struct Tableau {
    /// `rows x cols`, rows already multiplied by the current basis inverse.
    body: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    /// Column whose initial entry is the unit vector of each row.
    unit_col: Vec<usize>,
    /// Rows negated at build time (equality rows with negative rhs).
    flipped: Vec<bool>,
    structural: usize,
    first_artificial: usize,
    cols: usize,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Result<Self> {
        let n = lp.costs.len();
        let slack_count = lp.rows.iter().filter(|r| r.kind == RowKind::AtMost).count();
        let art_count = lp.rows.len() - slack_count;
        let first_artificial = n + slack_count;
        let cols = first_artificial + art_count;

        let mut body = Vec::with_capacity(lp.rows.len());
        let mut rhs = Vec::with_capacity(lp.rows.len());
        let mut basis = Vec::with_capacity(lp.rows.len());
        let mut flipped = Vec::with_capacity(lp.rows.len());
        let (mut next_slack, mut next_art) = (n, first_artificial);
        for (r, row) in lp.rows.iter().enumerate() {
            let mut dense = vec![Rational::zero(); cols];
            for (j, a) in &row.coeffs {
                if *j >= n {
                    return Err(Error::InvalidInput(format!(
                        "row {r} references column {j}, but there are only {n} columns"
                    )));
                }
                dense[*j] += a;
            }
            let mut b = row.rhs.clone();
            let flip = b.is_negative();
            if flip {
                if row.kind == RowKind::AtMost {
                    return Err(Error::InvalidInput(format!(
                        "inequality row {r} has negative right-hand side"
                    )));
                }
                for v in dense.iter_mut() {
                    *v = -v.clone();
                }
                b = -b;
            }
            let unit = match row.kind {
                RowKind::AtMost => {
                    next_slack += 1;
                    next_slack - 1
                }
                RowKind::Equal => {
                    next_art += 1;
                    next_art - 1
                }
            };
            dense[unit] = Rational::from_integer(1.into());
            body.push(dense);
            rhs.push(b);
            basis.push(unit);
            flipped.push(flip);
        }
        let unit_col = basis.clone();
        Ok(Self {
            body,
            rhs,
            basis,
            unit_col,
            flipped,
            structural: n,
            first_artificial,
            cols,
            pivots: 0,
        })
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= self.first_artificial
    }

    /// Reduced costs `c_j - c_B^T B^-1 A_j` and the objective `c_B^T b`.
    fn reduced_costs(&self, cost: &dyn Fn(usize) -> Rational) -> (Vec<Rational>, Rational) {
        let mut d: Vec<Rational> = (0..self.cols).map(cost).collect();
        let mut obj = Rational::zero();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost(b);
            if cb.is_zero() {
                continue;
            }
            for (dj, a) in d.iter_mut().zip(&self.body[r]) {
                if !a.is_zero() {
                    *dj -= &cb * a;
                }
            }
            obj += &cb * &self.rhs[r];
        }
        (d, obj)
    }

    fn pivot(&mut self, row: usize, col: usize, d: &mut [Rational], obj: &mut Rational) {
        self.pivots += 1;
        let p = self.body[row][col].clone();
        for v in self.body[row].iter_mut() {
            if !v.is_zero() {
                *v /= &p;
            }
        }
        self.rhs[row] /= &p;
        let pivot_row = self.body[row].clone();
        let pivot_rhs = self.rhs[row].clone();
        for r in 0..self.body.len() {
            if r == row {
                continue;
            }
            let factor = self.body[r][col].clone();
            if factor.is_zero() {
                continue;
            }
            for (v, a) in self.body[r].iter_mut().zip(&pivot_row) {
                if !a.is_zero() {
                    *v -= &factor * a;
                }
            }
            self.rhs[r] -= &factor * &pivot_rhs;
        }
        let factor = d[col].clone();
        if !factor.is_zero() {
            for (v, a) in d.iter_mut().zip(&pivot_row) {
                if !a.is_zero() {
                    *v -= &factor * a;
                }
            }
            *obj += &factor * &pivot_rhs;
        }
        self.basis[row] = col;
    }

    /// Bland's rule iterations until optimal. `allowed` filters entering columns.
    fn optimize(&mut self, d: &mut [Rational], obj: &mut Rational, allowed: &dyn Fn(usize) -> bool) -> Result<()> {
        loop {
            let Some(enter) = (0..self.cols).find(|&j| allowed(j) && d[j].is_negative()) else {
                return Ok(());
            };
            let mut leave: Option<(usize, Rational)> = None;
            for r in 0..self.body.len() {
                let a = &self.body[r][enter];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[r] / a;
                let better = match &leave {
                    None => true,
                    Some((best_r, best)) => ratio < *best || (ratio == *best && self.basis[r] < self.basis[*best_r]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(row, enter, d, obj);
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let first_art = self.first_artificial;
        if first_art < self.cols {
            let phase1 = |j: usize| {
                if j >= first_art {
                    Rational::from_integer(1.into())
                } else {
                    Rational::zero()
                }
            };
            let (mut d, mut obj) = self.reduced_costs(&phase1);
            self.optimize(&mut d, &mut obj, &|_| true)?;
            if obj.is_positive() {
                return Err(Error::Infeasible);
            }
            // Drive zero-level artificials out of the basis where possible.
            for r in 0..self.body.len() {
                if !self.is_artificial(self.basis[r]) {
                    continue;
                }
                if let Some(col) = (0..first_art).find(|&j| !self.body[r][j].is_zero()) {
                    self.pivot(r, col, &mut d, &mut obj);
                }
            }
        }

        let n = self.structural;
        let costs = &lp.costs;
        let phase2 = |j: usize| {
            if j < n {
                costs[j].clone()
            } else {
                Rational::zero()
            }
        };
        let (mut d, mut obj) = self.reduced_costs(&phase2);
        self.optimize(&mut d, &mut obj, &|j| j < first_art)?;

        let mut values = vec![Rational::zero(); n];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < n {
                values[b] = self.rhs[r].clone();
            }
        }
        // d of a unit column is 0 - dual_r.
        let duals = (0..self.body.len())
            .map(|r| {
                let dual = -d[self.unit_col[r]].clone();
                if self.flipped[r] {
                    -dual
                } else {
                    dual
                }
            })
            .collect();
        Ok(LpSolution {
            objective: obj,
            values,
            duals,
            pivots: self.pivots,
        })
    }
}
