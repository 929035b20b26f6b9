//! Dense two-phase revised simplex for small linear programs
//!
//! Solves `min cᵀx` subject to rows `Aᵢx {≤,=,≥} bᵢ` and `x ⪰ 0`. The basis
//! inverse is kept explicitly and refactored periodically. Pricing uses the
//! most negative reduced cost and falls back to Bland's rule after a run of
//! degenerate pivots, which rules out cycling.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per constraint, in insertion order (`∂ objective / ∂ rhs`).
    pub duals: Vec<f64>,
    pub pivots: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub max_pivots: Option<usize>,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-11,
            pivot_tol: 1e-11,
            max_pivots: None,
            bland_after: 50,
        }
    }
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            num_vars: objective.len(),
            objective,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    /// Adds a dense constraint row; `coeffs.len()` must equal the variable count.
    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Result<()> {
        if coeffs.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                found: coeffs.len(),
            });
        }
        if !rhs.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite linear program data".into()));
        }
        self.rows.push((coeffs, relation, rhs));
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.solve_with(SimplexOptions::default())
    }

    pub fn solve_with(&self, options: SimplexOptions) -> Result<LpSolution> {
        Tableau::build(self, options).run()
    }
}

#[derive(Clone, Copy)]
enum Column {
    Structural(usize),
    /// Unit column with the given coefficient in one row.
    Unit { row: usize, coef: f64 },
}

struct Tableau {
    opts: SimplexOptions,
    r: usize,
    n: usize,
    /// structural columns, column-major `n × r`
    a: Vec<f64>,
    rhs: Vec<f64>,
    row_sign: Vec<f64>,
    columns: Vec<Column>,
    first_artificial: usize,
    cost: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram, opts: SimplexOptions) -> Self {
        let r = lp.rows.len();
        let n = lp.num_vars;
        let mut a = vec![0.0; n * r];
        let mut rhs = vec![0.0; r];
        let mut row_sign = vec![1.0; r];
        let mut relations = Vec::with_capacity(r);
        for (i, (coeffs, rel, b)) in lp.rows.iter().enumerate() {
            let sign = if *b < 0.0 { -1.0 } else { 1.0 };
            row_sign[i] = sign;
            rhs[i] = sign * b;
            for (j, c) in coeffs.iter().enumerate() {
                a[j * r + i] = sign * c;
            }
            relations.push(match (rel, sign < 0.0) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (rel, _) => *rel,
            });
        }

        let mut columns: Vec<Column> = (0..n).map(Column::Structural).collect();
        let mut basis = vec![usize::MAX; r];
        for (i, rel) in relations.iter().enumerate() {
            match rel {
                Relation::Le => {
                    basis[i] = columns.len();
                    columns.push(Column::Unit { row: i, coef: 1.0 });
                }
                Relation::Ge => columns.push(Column::Unit { row: i, coef: -1.0 }),
                Relation::Eq => {}
            }
        }
        let first_artificial = columns.len();
        for (i, slot) in basis.iter_mut().enumerate() {
            if *slot == usize::MAX {
                *slot = columns.len();
                columns.push(Column::Unit { row: i, coef: 1.0 });
            }
        }
        let mut is_basic = vec![false; columns.len()];
        for &b in &basis {
            is_basic[b] = true;
        }
        let mut binv = vec![0.0; r * r];
        for i in 0..r {
            binv[i * r + i] = 1.0;
        }
        let mut cost = vec![0.0; columns.len()];
        cost[..n].copy_from_slice(&lp.objective);
        Tableau {
            opts,
            r,
            n,
            a,
            xb: rhs.clone(),
            rhs,
            row_sign,
            columns,
            first_artificial,
            cost,
            basis,
            is_basic,
            binv,
            pivots: 0,
            since_refactor: 0,
        }
    }

    fn column_dot(&self, j: usize, y: &[f64]) -> f64 {
        match self.columns[j] {
            Column::Structural(s) => self.a[s * self.r..(s + 1) * self.r]
                .iter()
                .zip(y)
                .map(|(a, b)| a * b)
                .sum(),
            Column::Unit { row, coef } => coef * y[row],
        }
    }

    /// `B⁻¹ A_j`
    fn ftran(&self, j: usize) -> Vec<f64> {
        let r = self.r;
        match self.columns[j] {
            Column::Structural(s) => {
                let col = &self.a[s * r..(s + 1) * r];
                let nz: Vec<(usize, f64)> = col.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
                (0..r)
                    .map(|i| {
                        let row = &self.binv[i * r..(i + 1) * r];
                        nz.iter().map(|&(k, v)| row[k] * v).sum()
                    })
                    .collect()
            }
            Column::Unit { row, coef } => (0..r).map(|i| coef * self.binv[i * r + row]).collect(),
        }
    }

    fn prices(&self, cost: &[f64]) -> Vec<f64> {
        let r = self.r;
        let mut pi = vec![0.0; r];
        for (k, &bk) in self.basis.iter().enumerate() {
            let cb = cost[bk];
            if cb != 0.0 {
                for (p, v) in pi.iter_mut().zip(&self.binv[k * r..(k + 1) * r]) {
                    *p += cb * v;
                }
            }
        }
        pi
    }

    fn refactor(&mut self) -> Result<()> {
        let r = self.r;
        // dense B, then Gauss-Jordan with partial pivoting on [B | I]
        let mut b = vec![0.0; r * r];
        for (k, &j) in self.basis.iter().enumerate() {
            match self.columns[j] {
                Column::Structural(s) => {
                    for i in 0..r {
                        b[i * r + k] = self.a[s * r + i];
                    }
                }
                Column::Unit { row, coef } => b[row * r + k] = coef,
            }
        }
        let mut inv = vec![0.0; r * r];
        for i in 0..r {
            inv[i * r + i] = 1.0;
        }
        for col in 0..r {
            let piv = (col..r)
                .max_by(|&x, &y| b[x * r + col].abs().total_cmp(&b[y * r + col].abs()))
                .expect("nonempty");
            if b[piv * r + col].abs() < 1e-14 {
                return Err(Error::InvalidInput("singular simplex basis".into()));
            }
            if piv != col {
                for k in 0..r {
                    b.swap(piv * r + k, col * r + k);
                    inv.swap(piv * r + k, col * r + k);
                }
            }
            let d = b[col * r + col];
            for k in 0..r {
                b[col * r + k] /= d;
                inv[col * r + k] /= d;
            }
            for i in 0..r {
                if i != col {
                    let f = b[i * r + col];
                    if f != 0.0 {
                        for k in 0..r {
                            b[i * r + k] -= f * b[col * r + k];
                            inv[i * r + k] -= f * inv[col * r + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        for i in 0..r {
            let v: f64 = (0..r).map(|k| self.binv[i * r + k] * self.rhs[k]).sum();
            self.xb[i] = if v < 0.0 && v > -self.opts.feasibility_tol { 0.0 } else { v };
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn pivot(&mut self, leave: usize, enter: usize, alpha: &[f64]) {
        let r = self.r;
        let p = alpha[leave];
        let (head, tail) = self.binv.split_at_mut(leave * r);
        let (prow, tail) = tail.split_at_mut(r);
        for v in prow.iter_mut() {
            *v /= p;
        }
        let theta = self.xb[leave] / p;
        for i in 0..r {
            if i == leave || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            let row = if i < leave {
                &mut head[i * r..(i + 1) * r]
            } else {
                let off = (i - leave - 1) * r;
                &mut tail[off..off + r]
            };
            for (v, pv) in row.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            let x = self.xb[i] - f * theta;
            self.xb[i] = if x < 0.0 && x > -self.opts.feasibility_tol { 0.0 } else { x };
        }
        self.xb[leave] = theta;
        self.is_basic[self.basis[leave]] = false;
        self.is_basic[enter] = true;
        self.basis[leave] = enter;
        self.pivots += 1;
        self.since_refactor += 1;
    }

    fn refactor_period(&self) -> usize {
        if self.r <= 300 {
            100
        } else {
            1000
        }
    }

    /// Runs simplex iterations for `cost` until optimal. Columns at or beyond
    /// `barred_from` never enter.
    fn optimize(&mut self, cost: &[f64], barred_from: usize, max_pivots: usize) -> Result<()> {
        let mut degenerate_run = 0usize;
        loop {
            if self.pivots >= max_pivots {
                return Err(Error::IterationLimit(max_pivots));
            }
            if self.since_refactor >= self.refactor_period() {
                self.refactor()?;
            }
            let pi = self.prices(cost);
            let bland = degenerate_run >= self.opts.bland_after;
            let mut enter = None;
            let mut best = -self.opts.optimality_tol;
            for j in 0..barred_from {
                if self.is_basic[j] {
                    continue;
                }
                let d = cost[j] - self.column_dot(j, &pi);
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = enter else { return Ok(()) };
            let alpha = self.ftran(q);
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for (i, &ai) in alpha.iter().enumerate() {
                if ai > self.opts.pivot_tol {
                    let ratio = self.xb[i].max(0.0) / ai;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            if ratio < best_ratio - 1e-12 {
                                true
                            } else if ratio <= best_ratio + 1e-12 {
                                if bland {
                                    self.basis[i] < self.basis[l]
                                } else {
                                    ai > alpha[l]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some(i);
                        best_ratio = best_ratio.min(ratio);
                    }
                }
            }
            let Some(l) = leave else { return Err(Error::Unbounded) };
            if best_ratio <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(l, q, &alpha);
        }
    }

    fn run(mut self) -> Result<LpSolution> {
        let total_cols = self.columns.len();
        let max_pivots = self
            .opts
            .max_pivots
            .unwrap_or_else(|| 50 * (self.r + total_cols).max(100));
        if self.first_artificial < total_cols {
            let mut phase1 = vec![0.0; total_cols];
            for c in phase1.iter_mut().skip(self.first_artificial) {
                *c = 1.0;
            }
            self.optimize(&phase1, total_cols, max_pivots)?;
            self.refactor()?;
            let infeasibility: f64 = self
                .basis
                .iter()
                .zip(&self.xb)
                .filter(|(&b, _)| b >= self.first_artificial)
                .map(|(_, x)| x)
                .sum();
            let scale = 1.0 + self.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if infeasibility > self.opts.feasibility_tol * scale {
                return Err(Error::Infeasible);
            }
            // drive zero-level artificials out where a replacement column exists
            for l in 0..self.r {
                if self.basis[l] < self.first_artificial {
                    continue;
                }
                let candidate = (0..self.first_artificial).find(|&j| {
                    !self.is_basic[j] && {
                        let row = &self.binv[l * self.r..(l + 1) * self.r];
                        self.column_dot(j, row).abs() > 1e-9
                    }
                });
                if let Some(j) = candidate {
                    let alpha = self.ftran(j);
                    self.pivot(l, j, &alpha);
                }
            }
        }
        let cost = self.cost.clone();
        self.optimize(&cost, self.first_artificial, max_pivots)?;
        self.refactor()?;

        let mut x = vec![0.0; self.n];
        for (&b, &v) in self.basis.iter().zip(&self.xb) {
            if let Column::Structural(s) = self.columns[b] {
                x[s] = v.max(0.0);
            }
        }
        let objective = x.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
        let pi = self.prices(&cost);
        let duals = pi.iter().zip(&self.row_sign).map(|(p, s)| p * s).collect();
        Ok(LpSolution {
            x,
            objective,
            duals,
            pivots: self.pivots,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18
        let mut lp = LinearProgram::new(vec![-3.0, -5.0]);
        lp.add_constraint(vec![1.0, 0.0], Relation::Le, 4.0).unwrap();
        lp.add_constraint(vec![0.0, 2.0], Relation::Le, 12.0).unwrap();
        lp.add_constraint(vec![3.0, 2.0], Relation::Le, 18.0).unwrap();
        let sol = lp.solve().unwrap();
        assert!((sol.objective + 36.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9 && (sol.x[1] - 6.0).abs() < 1e-9);
        // shadow prices of the binding rows
        assert!((sol.duals[1] + 1.5).abs() < 1e-9);
        assert!((sol.duals[2] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows_need_phase_one() {
        // min x + y s.t. x + y = 2, x - y ≥ 1
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 2.0).unwrap();
        lp.add_constraint(vec![1.0, -1.0], Relation::Ge, 1.0).unwrap();
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_rows_are_flipped() {
        // min x s.t. -x ≤ -3
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_constraint(vec![-1.0], Relation::Le, -3.0).unwrap();
        let sol = lp.solve().unwrap();
        assert!((sol.x[0] - 3.0).abs() < 1e-12);
        assert!((sol.duals[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0).unwrap();
        lp.add_constraint(vec![1.0], Relation::Ge, 2.0).unwrap();
        assert!(matches!(lp.solve(), Err(Error::Infeasible)));

        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_constraint(vec![1.0, -1.0], Relation::Le, 1.0).unwrap();
        assert!(matches!(lp.solve(), Err(Error::Unbounded)));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's cycling example under the largest-coefficient rule
        let mut lp = LinearProgram::new(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0).unwrap();
        lp.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0).unwrap();
        lp.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0).unwrap();
        let sol = lp
            .solve_with(SimplexOptions {
                bland_after: 2,
                ..Default::default()
            })
            .unwrap();
        assert!((sol.objective + 0.05).abs() < 1e-9);
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0).unwrap();
        lp.add_constraint(vec![2.0, 2.0], Relation::Eq, 2.0).unwrap();
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }
}
