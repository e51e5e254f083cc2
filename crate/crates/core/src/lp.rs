//! Dense two-phase primal simplex. Small and auditable rather than
//! sophisticated: every problem solved here has at most a few hundred
//! variables. The internal solver keeps its tableau alive so callers in
//! this crate can swap objectives and re-optimize from the current
//! basis, which the penalty-iteration scheduler does heavily.

use thiserror::Error;

/// Comparison direction of one constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// One linear constraint: `coeffs · x  (relation)  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A minimization problem over box-bounded variables. Upper bounds may
/// be `f64::INFINITY`; lower bounds must be finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, solution: Vec<f64> },
    Infeasible,
    Unbounded,
    /// The iteration cap was hit without convergence; with Bland's rule
    /// this indicates numerical trouble rather than true cycling.
    CycleSuspected,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("constraint {index} has {got} coefficients but the problem has {expected} variables")]
    DimensionMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("expected one (lo, hi) bound pair per variable: {got} pairs for {expected} variables")]
    BoundCount { got: usize, expected: usize },
    #[error("variable {index} has lower bound {lo} above upper bound {hi}")]
    BoundOrder { index: usize, lo: f64, hi: f64 },
    #[error("variable {index} has a non-finite lower bound")]
    LowerUnbounded { index: usize },
    #[error("non-finite coefficient in {place}")]
    NonFinite { place: String },
}

/// Solves the program fresh. See [`Simplex`] for the reusable core.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    let mut s = Simplex::new(lp)?;
    Ok(match s.solve() {
        Status::Optimal => LpOutcome::Optimal {
            value: s.objective_value(),
            solution: s.solution(),
        },
        Status::Infeasible => LpOutcome::Infeasible,
        Status::Unbounded => LpOutcome::Unbounded,
        Status::CycleSuspected => LpOutcome::CycleSuspected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    CycleSuspected,
}

const TOL_PIVOT: f64 = 1e-9;
const TOL_REDUCED: f64 = 1e-9;
const TOL_PHASE1: f64 = 1e-7;
/// Consecutive non-improving pivots tolerated before switching from
/// steepest-coefficient pricing to Bland's rule.
const DEGENERATE_STREAK: usize = 40;

/// Dense tableau simplex over the shifted variables `y = x − lo ≥ 0`.
/// Columns: structural `y`, then slack/surplus, then artificials; the
/// last tableau column is the right-hand side.
pub(crate) struct Simplex {
    n: usize,
    lower: Vec<f64>,
    obj: Vec<f64>,
    rows: usize,
    width: usize,
    n_real_cols: usize,
    n_art: usize,
    tab: Vec<f64>,
    basis: Vec<usize>,
    reduced: Vec<f64>,
    cost: Vec<f64>,
    scratch: Vec<f64>,
    phase_two: bool,
    iterations: usize,
    iter_cap: usize,
}

impl Simplex {
    pub(crate) fn new(lp: &LinearProgram) -> Result<Self, LpError> {
        let n = lp.objective.len();
        if lp.bounds.len() != n {
            return Err(LpError::BoundCount {
                got: lp.bounds.len(),
                expected: n,
            });
        }
        for (j, &c) in lp.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::NonFinite {
                    place: format!("objective coefficient {j}"),
                });
            }
        }
        for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
            if !lo.is_finite() {
                return Err(LpError::LowerUnbounded { index: j });
            }
            if hi < lo || hi.is_nan() {
                return Err(LpError::BoundOrder { index: j, lo, hi });
            }
        }
        for (i, con) in lp.constraints.iter().enumerate() {
            if con.coeffs.len() != n {
                return Err(LpError::DimensionMismatch {
                    index: i,
                    got: con.coeffs.len(),
                    expected: n,
                });
            }
            if con.coeffs.iter().any(|c| !c.is_finite()) || !con.rhs.is_finite() {
                return Err(LpError::NonFinite {
                    place: format!("constraint {i}"),
                });
            }
        }

        let lower: Vec<f64> = lp.bounds.iter().map(|&(lo, _)| lo).collect();

        // Rows over y: the declared constraints plus one row per finite
        // upper bound.
        let mut row_coeffs: Vec<Vec<f64>> = Vec::new();
        let mut row_rel: Vec<Relation> = Vec::new();
        let mut row_rhs: Vec<f64> = Vec::new();
        for con in &lp.constraints {
            let shift: f64 = con
                .coeffs
                .iter()
                .zip(&lower)
                .map(|(c, lo)| c * lo)
                .sum();
            row_coeffs.push(con.coeffs.clone());
            row_rel.push(con.relation);
            row_rhs.push(con.rhs - shift);
        }
        for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
            if hi.is_finite() {
                let mut coeffs = vec![0.0; n];
                coeffs[j] = 1.0;
                row_coeffs.push(coeffs);
                row_rel.push(Relation::Le);
                row_rhs.push(hi - lo);
            }
        }
        let rows = row_coeffs.len();

        // Flip rows so every right-hand side is nonnegative, then count
        // the slack/surplus and artificial columns each row needs.
        let mut n_slack = 0;
        let mut n_art = 0;
        for i in 0..rows {
            if row_rhs[i] < 0.0 {
                for c in &mut row_coeffs[i] {
                    *c = -*c;
                }
                row_rhs[i] = -row_rhs[i];
                row_rel[i] = match row_rel[i] {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            match row_rel[i] {
                Relation::Le | Relation::Ge => n_slack += 1,
                Relation::Eq => {}
            }
            match row_rel[i] {
                Relation::Ge | Relation::Eq => n_art += 1,
                Relation::Le => {}
            }
        }

        let n_real_cols = n + n_slack;
        let width = n_real_cols + n_art + 1;
        let mut tab = vec![0.0; rows * width];
        let mut basis = vec![0usize; rows];
        let mut next_slack = n;
        let mut next_art = n_real_cols;
        for i in 0..rows {
            let base = i * width;
            tab[base..base + n].copy_from_slice(&row_coeffs[i]);
            tab[base + width - 1] = row_rhs[i];
            match row_rel[i] {
                Relation::Le => {
                    tab[base + next_slack] = 1.0;
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    tab[base + next_slack] = -1.0;
                    next_slack += 1;
                    tab[base + next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    tab[base + next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
        }

        let iter_cap = 50 * (n_real_cols + n_art + rows).max(1);
        Ok(Self {
            n,
            lower,
            obj: lp.objective.clone(),
            rows,
            width,
            n_real_cols,
            n_art,
            tab,
            basis,
            reduced: vec![0.0; width],
            cost: vec![0.0; n_real_cols + n_art],
            scratch: vec![0.0; width],
            phase_two: false,
            iterations: 0,
            iter_cap,
        })
    }

    /// Runs phase one (if any artificials exist) and phase two.
    pub(crate) fn solve(&mut self) -> Status {
        if self.n_art > 0 {
            for j in 0..self.n_real_cols {
                self.cost[j] = 0.0;
            }
            for j in self.n_real_cols..self.n_real_cols + self.n_art {
                self.cost[j] = 1.0;
            }
            self.recompute_reduced();
            match self.iterate(false) {
                Status::Optimal => {}
                // The phase-one objective is bounded below by zero, so a
                // failed ratio test can only be numerical noise.
                Status::Unbounded => return Status::CycleSuspected,
                other => return other,
            }
            if self.objective_row_value() > TOL_PHASE1 {
                return Status::Infeasible;
            }
            self.evict_artificials();
        }
        self.enter_phase_two();
        self.iterate(true)
    }

    /// Replaces the objective and re-optimizes from the current basis.
    /// Only valid after a successful [`Simplex::solve`].
    pub(crate) fn reoptimize(&mut self, objective: &[f64]) -> Status {
        assert!(self.phase_two, "reoptimize requires a solved program");
        assert_eq!(objective.len(), self.n);
        self.obj.copy_from_slice(objective);
        self.enter_phase_two();
        self.iterations = 0;
        self.iterate(true)
    }

    /// Current solution in the original (unshifted) variables.
    pub(crate) fn solution(&self) -> Vec<f64> {
        let mut x = self.lower.clone();
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n {
                x[b] += self.tab[i * self.width + self.width - 1];
            }
        }
        x
    }

    /// Objective value of the current solution, computed directly from
    /// the returned point so the two always agree.
    pub(crate) fn objective_value(&self) -> f64 {
        self.solution()
            .iter()
            .zip(&self.obj)
            .map(|(x, c)| x * c)
            .sum()
    }

    fn enter_phase_two(&mut self) {
        for j in 0..self.n_real_cols + self.n_art {
            self.cost[j] = if j < self.n { self.obj[j] } else { 0.0 };
        }
        self.phase_two = true;
        self.recompute_reduced();
    }

    /// Value of the objective row (y-space, no lower-bound shift).
    fn objective_row_value(&self) -> f64 {
        -self.reduced[self.width - 1]
    }

    fn recompute_reduced(&mut self) {
        let w = self.width;
        for j in 0..w - 1 {
            self.reduced[j] = self.cost[j];
        }
        self.reduced[w - 1] = 0.0;
        for i in 0..self.rows {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.tab[i * w..(i + 1) * w];
            for (rj, &tj) in self.reduced.iter_mut().zip(row) {
                *rj -= cb * tj;
            }
        }
    }

    /// Pivots out any artificial variable still basic after phase one;
    /// rows that offer no pivot are redundant and dropped.
    fn evict_artificials(&mut self) {
        let w = self.width;
        let mut i = 0;
        while i < self.rows {
            if self.basis[i] < self.n_real_cols {
                i += 1;
                continue;
            }
            let row_off = i * w;
            let col = (0..self.n_real_cols)
                .find(|&j| self.tab[row_off + j].abs() > TOL_PIVOT * 10.0);
            match col {
                Some(j) => {
                    self.pivot(i, j);
                    i += 1;
                }
                None => {
                    // Redundant constraint: remove the row.
                    let last = self.rows - 1;
                    if i != last {
                        let (head, tail) = self.tab.split_at_mut(last * w);
                        head[i * w..(i + 1) * w].copy_from_slice(&tail[..w]);
                        self.basis[i] = self.basis[last];
                    }
                    self.tab.truncate(last * w);
                    self.basis.truncate(last);
                    self.rows = last;
                }
            }
        }
    }

    fn iterate(&mut self, allow_unbounded: bool) -> Status {
        let w = self.width;
        let mut streak = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= self.iter_cap {
                return Status::CycleSuspected;
            }
            let limit = if self.phase_two {
                self.n_real_cols
            } else {
                self.n_real_cols + self.n_art
            };
            let entering = if bland {
                (0..limit).find(|&j| self.reduced[j] < -TOL_REDUCED)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..limit {
                    let r = self.reduced[j];
                    if r < -TOL_REDUCED && best.map_or(true, |(_, br)| r < br) {
                        best = Some((j, r));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(col) = entering else {
                return Status::Optimal;
            };

            // Ratio test; ties broken towards the smallest basis index,
            // which keeps Bland's rule sound when it is active.
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.tab[i * w + col];
                if a > TOL_PIVOT {
                    let ratio = self.tab[i * w + w - 1] / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 * (1.0 + lr.abs()) {
                                true
                            } else if ratio <= lr + 1e-12 * (1.0 + lr.abs()) {
                                self.basis[i] < self.basis[li]
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leave else {
                return if allow_unbounded {
                    Status::Unbounded
                } else {
                    Status::Unbounded // mapped to CycleSuspected by solve()
                };
            };

            let before = self.objective_row_value();
            self.pivot(row, col);
            self.iterations += 1;
            let after = self.objective_row_value();
            if after < before - 1e-12 * (1.0 + before.abs()) {
                streak = 0;
                bland = false;
            } else {
                streak += 1;
                if streak >= DEGENERATE_STREAK {
                    bland = true;
                }
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let off = row * w;
        let inv = 1.0 / self.tab[off + col];
        for v in &mut self.tab[off..off + w] {
            *v *= inv;
        }
        self.tab[off + col] = 1.0;
        self.scratch.copy_from_slice(&self.tab[off..off + w]);

        for r in 0..self.rows {
            if r == row {
                continue;
            }
            let f = self.tab[r * w + col];
            if f == 0.0 {
                continue;
            }
            let dst = &mut self.tab[r * w..(r + 1) * w];
            for (d, &s) in dst.iter_mut().zip(&self.scratch) {
                *d -= f * s;
            }
            dst[col] = 0.0;
        }
        let f = self.reduced[col];
        if f != 0.0 {
            for (d, &s) in self.reduced.iter_mut().zip(&self.scratch) {
                *d -= f * s;
            }
            self.reduced[col] = 0.0;
        }
        self.basis[row] = col;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn optimal(lp: &LinearProgram) -> (f64, Vec<f64>) {
        match solve_lp(lp).expect("well-formed") {
            LpOutcome::Optimal { value, solution } => (value, solution),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn maximizes_over_a_simplex_face() {
        let lp = LinearProgram {
            objective: vec![-1.0, -1.0],
            constraints: vec![Constraint {
                coeffs: vec![1.0, 1.0],
                relation: Relation::Le,
                rhs: 1.0,
            }],
            bounds: vec![(0.0, 1.0), (0.0, 1.0)],
        };
        let (value, solution) = optimal(&lp);
        assert!((value + 1.0).abs() < 1e-9);
        assert!((solution[0] + solution[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lower_bounded_single_variable() {
        let lp = LinearProgram {
            objective: vec![1.0],
            constraints: vec![Constraint {
                coeffs: vec![1.0],
                relation: Relation::Ge,
                rhs: 3.0,
            }],
            bounds: vec![(0.0, f64::INFINITY)],
        };
        let (value, solution) = optimal(&lp);
        assert!((value - 3.0).abs() < 1e-9);
        assert!((solution[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn equality_pair_pins_the_solution() {
        let lp = LinearProgram {
            objective: vec![1.0, 1.0],
            constraints: vec![
                Constraint {
                    coeffs: vec![1.0, 1.0],
                    relation: Relation::Eq,
                    rhs: 2.0,
                },
                Constraint {
                    coeffs: vec![1.0, -1.0],
                    relation: Relation::Eq,
                    rhs: 0.0,
                },
            ],
            bounds: vec![(0.0, f64::INFINITY), (0.0, f64::INFINITY)],
        };
        let (value, solution) = optimal(&lp);
        assert!((value - 2.0).abs() < 1e-9);
        assert!((solution[0] - 1.0).abs() < 1e-9);
        assert!((solution[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let lp = LinearProgram {
            objective: vec![0.0],
            constraints: vec![
                Constraint {
                    coeffs: vec![1.0],
                    relation: Relation::Le,
                    rhs: 1.0,
                },
                Constraint {
                    coeffs: vec![1.0],
                    relation: Relation::Ge,
                    rhs: 2.0,
                },
            ],
            bounds: vec![(0.0, f64::INFINITY)],
        };
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn missing_ceiling_is_unbounded() {
        let lp = LinearProgram {
            objective: vec![-1.0],
            constraints: vec![],
            bounds: vec![(0.0, f64::INFINITY)],
        };
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities_still_solve() {
        let lp = LinearProgram {
            objective: vec![2.0, 3.0],
            constraints: vec![
                Constraint {
                    coeffs: vec![1.0, 1.0],
                    relation: Relation::Eq,
                    rhs: 4.0,
                },
                Constraint {
                    coeffs: vec![2.0, 2.0],
                    relation: Relation::Eq,
                    rhs: 8.0,
                },
            ],
            bounds: vec![(0.0, f64::INFINITY), (0.0, f64::INFINITY)],
        };
        let (value, solution) = optimal(&lp);
        assert!((value - 8.0).abs() < 1e-9);
        assert!((solution[0] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn negative_lower_bounds_shift_correctly() {
        let lp = LinearProgram {
            objective: vec![1.0, -1.0],
            constraints: vec![Constraint {
                coeffs: vec![1.0, 1.0],
                relation: Relation::Le,
                rhs: 1.0,
            }],
            bounds: vec![(-2.0, 2.0), (-3.0, 5.0)],
        };
        let (value, solution) = optimal(&lp);
        // x = -2 and y as large as x+y <= 1 allows: y = 3.
        assert!((solution[0] + 2.0).abs() < 1e-9);
        assert!((solution[1] - 3.0).abs() < 1e-9);
        assert!((value + 5.0).abs() < 1e-9);
    }

    #[test]
    fn malformed_programs_are_rejected() {
        let lp = LinearProgram {
            objective: vec![1.0],
            constraints: vec![Constraint {
                coeffs: vec![1.0, 2.0],
                relation: Relation::Le,
                rhs: 1.0,
            }],
            bounds: vec![(0.0, 1.0)],
        };
        assert!(matches!(
            solve_lp(&lp).unwrap_err(),
            LpError::DimensionMismatch { .. }
        ));

        let lp = LinearProgram {
            objective: vec![1.0],
            constraints: vec![],
            bounds: vec![(2.0, 1.0)],
        };
        assert!(matches!(solve_lp(&lp).unwrap_err(), LpError::BoundOrder { .. }));

        let lp = LinearProgram {
            objective: vec![f64::NAN],
            constraints: vec![],
            bounds: vec![(0.0, 1.0)],
        };
        assert!(matches!(solve_lp(&lp).unwrap_err(), LpError::NonFinite { .. }));

        let lp = LinearProgram {
            objective: vec![1.0],
            constraints: vec![],
            bounds: vec![(f64::NEG_INFINITY, 1.0)],
        };
        assert!(matches!(
            solve_lp(&lp).unwrap_err(),
            LpError::LowerUnbounded { .. }
        ));
    }

    /// Exhaustive vertex enumeration for small box-bounded programs:
    /// every vertex lies on n linearly independent active hyperplanes
    /// drawn from constraint and bound faces.
    fn vertex_enumeration_optimum(lp: &LinearProgram) -> Option<f64> {
        let n = lp.objective.len();
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for con in &lp.constraints {
            planes.push((con.coeffs.clone(), con.rhs));
        }
        for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            planes.push((row.clone(), lo));
            if hi.is_finite() {
                planes.push((row, hi));
            }
        }
        let mut best: Option<f64> = None;
        let m = planes.len();
        let mut pick = vec![0usize; n];
        fn rec(
            planes: &[(Vec<f64>, f64)],
            lp: &LinearProgram,
            pick: &mut Vec<usize>,
            depth: usize,
            start: usize,
            best: &mut Option<f64>,
        ) {
            let n = lp.objective.len();
            if depth == n {
                if let Some(x) = solve_square(planes, pick, n) {
                    if feasible(lp, &x) {
                        let v: f64 = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
                        if best.map_or(true, |b| v < b) {
                            *best = Some(v);
                        }
                    }
                }
                return;
            }
            for i in start..planes.len() {
                pick[depth] = i;
                rec(planes, lp, pick, depth + 1, i + 1, best);
            }
        }
        fn solve_square(
            planes: &[(Vec<f64>, f64)],
            pick: &[usize],
            n: usize,
        ) -> Option<Vec<f64>> {
            let mut a = vec![vec![0.0; n + 1]; n];
            for (r, &pi) in pick.iter().enumerate() {
                a[r][..n].copy_from_slice(&planes[pi].0);
                a[r][n] = planes[pi].1;
            }
            for col in 0..n {
                let piv = (col..n).max_by(|&i, &j| {
                    a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
                })?;
                if a[piv][col].abs() < 1e-9 {
                    return None;
                }
                a.swap(col, piv);
                for r in 0..n {
                    if r != col {
                        let f = a[r][col] / a[col][col];
                        for c in col..=n {
                            a[r][c] -= f * a[col][c];
                        }
                    }
                }
            }
            Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
        }
        fn feasible(lp: &LinearProgram, x: &[f64]) -> bool {
            for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
                if x[j] < lo - 1e-7 || x[j] > hi + 1e-7 {
                    return false;
                }
            }
            for con in &lp.constraints {
                let lhs: f64 = con.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
                let ok = match con.relation {
                    Relation::Le => lhs <= con.rhs + 1e-7,
                    Relation::Ge => lhs >= con.rhs - 1e-7,
                    Relation::Eq => (lhs - con.rhs).abs() <= 1e-7,
                };
                if !ok {
                    return false;
                }
            }
            true
        }
        let _ = m;
        rec(&planes, lp, &mut pick, 0, 0, &mut best);
        best
    }

    fn random_box_lp(rng: &mut ChaCha12Rng) -> LinearProgram {
        let n = 4;
        let m = rng.random_range(2..=3);
        let center = vec![0.5; n];
        let mut constraints = Vec::new();
        for _ in 0..m {
            let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let at_center: f64 = coeffs.iter().zip(&center).map(|(a, b)| a * b).sum();
            // Keep the box center strictly feasible so the program
            // always has an optimum.
            constraints.push(Constraint {
                coeffs,
                relation: Relation::Le,
                rhs: at_center + rng.random_range(0.05..0.8),
            });
        }
        LinearProgram {
            objective: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
            constraints,
            bounds: vec![(0.0, 1.0); n],
        }
    }

    #[test]
    fn matches_vertex_enumeration_on_random_boxes() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for trial in 0..100 {
            let lp = random_box_lp(&mut rng);
            let (value, solution) = optimal(&lp);
            let oracle = vertex_enumeration_optimum(&lp)
                .unwrap_or_else(|| panic!("trial {trial}: oracle found no vertex"));
            assert!(
                (value - oracle).abs() < 1e-6,
                "trial {trial}: simplex {value} vs enumeration {oracle}"
            );
            // Returned value must be the objective at the returned point.
            let dot: f64 = solution.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
            assert!((value - dot).abs() <= 1e-9 * (1.0 + value.abs()));
            // And the point must satisfy every constraint.
            for con in &lp.constraints {
                let lhs: f64 = con.coeffs.iter().zip(&solution).map(|(a, b)| a * b).sum();
                match con.relation {
                    Relation::Le => assert!(lhs <= con.rhs + 1e-8),
                    Relation::Ge => assert!(lhs >= con.rhs - 1e-8),
                    Relation::Eq => assert!((lhs - con.rhs).abs() <= 1e-8),
                }
            }
        }
    }

    #[test]
    fn reoptimize_matches_fresh_solves() {
        let mut rng = ChaCha12Rng::seed_from_u64(1729);
        for _ in 0..50 {
            let lp = random_box_lp(&mut rng);
            let mut warm = Simplex::new(&lp).unwrap();
            assert_eq!(warm.solve(), Status::Optimal);
            for _ in 0..4 {
                let c: Vec<f64> = (0..lp.objective.len())
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect();
                assert_eq!(warm.reoptimize(&c), Status::Optimal);
                let fresh = LinearProgram {
                    objective: c.clone(),
                    ..lp.clone()
                };
                let (value, _) = optimal(&fresh);
                assert!(
                    (warm.objective_value() - value).abs() < 1e-7,
                    "warm {} vs fresh {value}",
                    warm.objective_value()
                );
            }
        }
    }
}
