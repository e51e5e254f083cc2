//! Balanced-transportation solver: slack-row balancing, a least-cost
//! initial basic feasible solution, and dual-based (MODI) improvement
//! with stepping-stone reallocation. Everything is deterministic —
//! ties break lexicographically — so replays are bit-identical.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("cost matrix row {row} has {got} entries, expected {expected}")]
    CostShape {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("cost matrix has {rows} rows but there are {demands} demands")]
    CostRows { rows: usize, demands: usize },
    #[error("cost entry ({row}, {col}) = {value} must be finite and nonnegative")]
    BadCost { row: usize, col: usize, value: f64 },
    #[error("total demand {demand} exceeds total supply {supply}")]
    DemandExceedsSupply { demand: u64, supply: u64 },
    #[error("problem must be balanced before building a tableau (demand {demand}, supply {supply})")]
    NotBalanced { demand: u64, supply: u64 },
    #[error("transportation problem has no cells (rows {rows}, cols {cols})")]
    EmptyShape { rows: usize, cols: usize },
    #[error("tableau basis is corrupt: {reason}")]
    BasisCorrupt { reason: String },
    #[error("improvement loop exceeded {cap} iterations")]
    IterationCap { cap: usize },
}

/// A (possibly unbalanced) transportation instance: demands along the
/// rows, supplies along the columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportProblem {
    pub cost: Vec<Vec<f64>>,
    pub demand: Vec<u64>,
    pub supply: Vec<u64>,
}

impl TransportProblem {
    pub fn total_demand(&self) -> u64 {
        self.demand.iter().sum()
    }

    pub fn total_supply(&self) -> u64 {
        self.supply.iter().sum()
    }

    pub fn is_balanced(&self) -> bool {
        self.total_demand() == self.total_supply()
    }

    pub fn validate(&self) -> Result<(), TransportError> {
        if self.cost.len() != self.demand.len() {
            return Err(TransportError::CostRows {
                rows: self.cost.len(),
                demands: self.demand.len(),
            });
        }
        for (r, row) in self.cost.iter().enumerate() {
            if row.len() != self.supply.len() {
                return Err(TransportError::CostShape {
                    row: r,
                    got: row.len(),
                    expected: self.supply.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(TransportError::BadCost {
                        row: r,
                        col: c,
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Basic feasible solution with its dual potentials. `basis` lists the
/// basic cells in insertion order; zero allocations keep the basis at
/// `rows + cols − 1` cells under degeneracy.
#[derive(Debug, Clone, PartialEq)]
pub struct Tableau {
    pub chi: Vec<Vec<u64>>,
    pub basis: Vec<(usize, usize)>,
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
}

impl Tableau {
    /// Objective value Σ cost·χ of this tableau under `p`.
    pub fn cost(&self, p: &TransportProblem) -> f64 {
        self.chi
            .iter()
            .zip(&p.cost)
            .map(|(xr, cr)| xr.iter().zip(cr).map(|(&x, &c)| x as f64 * c).sum::<f64>())
            .sum()
    }

    /// Checks marginals, basis size, and that the duals satisfy
    /// x_u + y_e = c_{u,e} on every basic cell.
    pub fn validate(&self, p: &TransportProblem) -> Result<(), TransportError> {
        let rows = p.demand.len();
        let cols = p.supply.len();
        let fail = |reason: String| TransportError::BasisCorrupt { reason };
        if self.chi.len() != rows || self.chi.iter().any(|r| r.len() != cols) {
            return Err(fail("allocation shape mismatch".into()));
        }
        for (r, row) in self.chi.iter().enumerate() {
            let sum: u64 = row.iter().sum();
            if sum != p.demand[r] {
                return Err(fail(format!(
                    "row {r} ships {sum}, demand is {}",
                    p.demand[r]
                )));
            }
        }
        for c in 0..cols {
            let sum: u64 = self.chi.iter().map(|row| row[c]).sum();
            if sum != p.supply[c] {
                return Err(fail(format!(
                    "column {c} ships {sum}, supply is {}",
                    p.supply[c]
                )));
            }
        }
        if self.basis.len() != rows + cols - 1 {
            return Err(fail(format!(
                "basis holds {} cells, expected {}",
                self.basis.len(),
                rows + cols - 1
            )));
        }
        for &(r, c) in &self.basis {
            let gap = p.cost[r][c] - self.row_duals[r] - self.col_duals[c];
            if gap.abs() > 1e-9 {
                return Err(fail(format!(
                    "duals violate the basic-cell equation at ({r}, {c}) by {gap}"
                )));
            }
        }
        Ok(())
    }
}

/// Appends a zero-cost slack demand row absorbing any excess supply.
/// Already-balanced problems pass through unchanged.
pub fn balance(p: &TransportProblem) -> Result<TransportProblem, TransportError> {
    p.validate()?;
    let demand = p.total_demand();
    let supply = p.total_supply();
    if demand > supply {
        return Err(TransportError::DemandExceedsSupply { demand, supply });
    }
    let mut out = p.clone();
    if demand < supply {
        out.cost.push(vec![0.0; p.supply.len()]);
        out.demand.push(supply - demand);
    }
    Ok(out)
}

/// Builds the initial basic feasible solution by repeatedly giving the
/// cheapest uncrossed cell as much as its row and column allow. Exactly
/// one of the two lines is crossed per step (both on the final step),
/// so the basis ends with `rows + cols − 1` cells, padding with
/// zero-allocation cells under degeneracy.
pub fn mcc_initial(p: &TransportProblem) -> Result<Tableau, TransportError> {
    p.validate()?;
    if !p.is_balanced() {
        return Err(TransportError::NotBalanced {
            demand: p.total_demand(),
            supply: p.total_supply(),
        });
    }
    let rows = p.demand.len();
    let cols = p.supply.len();
    if rows == 0 || cols == 0 {
        return Err(TransportError::EmptyShape { rows, cols });
    }
    let mut rem_d = p.demand.clone();
    let mut rem_s = p.supply.clone();
    let mut row_live = vec![true; rows];
    let mut col_live = vec![true; cols];
    let mut live_rows = rows;
    let mut chi = vec![vec![0u64; cols]; rows];
    let total_cells = rows + cols - 1;
    let mut basis = Vec::with_capacity(total_cells);

    for step in 0..total_cells {
        let mut best: Option<(f64, usize, usize)> = None;
        for r in 0..rows {
            if !row_live[r] {
                continue;
            }
            for c in 0..cols {
                if !col_live[c] {
                    continue;
                }
                let cost = p.cost[r][c];
                if best.map_or(true, |(bc, _, _)| cost < bc) {
                    best = Some((cost, r, c));
                }
            }
        }
        let (_, r, c) = best.ok_or_else(|| TransportError::BasisCorrupt {
            reason: "ran out of uncrossed cells before the basis was complete".into(),
        })?;
        let quantity = rem_d[r].min(rem_s[c]);
        chi[r][c] = quantity;
        rem_d[r] -= quantity;
        rem_s[c] -= quantity;
        basis.push((r, c));
        if step + 1 == total_cells {
            row_live[r] = false;
            col_live[c] = false;
        } else if rem_d[r] == 0 && live_rows > 1 {
            row_live[r] = false;
            live_rows -= 1;
        } else {
            // Either the column is exhausted, or this is the last live
            // row (in which case balance forces the column to be empty
            // too and crossing it keeps a line available).
            col_live[c] = false;
        }
    }

    let (row_duals, col_duals) = solve_duals(p, &basis)?;
    Ok(Tableau {
        chi,
        basis,
        row_duals,
        col_duals,
    })
}

/// Solves x_u + y_e = c_{u,e} over the basic cells with the first row
/// potential pinned to zero, walking the basis tree.
fn solve_duals(
    p: &TransportProblem,
    basis: &[(usize, usize)],
) -> Result<(Vec<f64>, Vec<f64>), TransportError> {
    let rows = p.demand.len();
    let cols = p.supply.len();
    // Nodes 0..rows are demand rows, rows..rows+cols are supply columns.
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows + cols];
    for &(r, c) in basis {
        let cost = p.cost[r][c];
        adj[r].push((rows + c, cost));
        adj[rows + c].push((r, cost));
    }
    let mut potential = vec![f64::NAN; rows + cols];
    potential[0] = 0.0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        let base = potential[node];
        for &(next, cost) in &adj[node] {
            if potential[next].is_nan() {
                potential[next] = cost - base;
                queue.push_back(next);
            }
        }
    }
    if potential.iter().any(|v| v.is_nan()) {
        return Err(TransportError::BasisCorrupt {
            reason: "basis graph does not span all rows and columns".into(),
        });
    }
    Ok((
        potential[..rows].to_vec(),
        potential[rows..].to_vec(),
    ))
}

/// Improves a basic feasible solution to optimality: computes reduced
/// costs k_{u,e} = c_{u,e} − x_u − y_e on nonbasic cells, enters the
/// most negative one (lexicographic ties), and shifts flow around the
/// unique stepping-stone cycle, retiring the first donor that hits
/// zero.
pub fn modi_optimize(p: &TransportProblem, mut t: Tableau) -> Result<Tableau, TransportError> {
    p.validate()?;
    let rows = p.demand.len();
    let cols = p.supply.len();
    let cap = 10 * rows * cols;
    for _ in 0..cap {
        let (row_duals, col_duals) = solve_duals(p, &t.basis)?;
        t.row_duals = row_duals;
        t.col_duals = col_duals;

        let in_basis: std::collections::HashSet<(usize, usize)> =
            t.basis.iter().copied().collect();
        let mut entering: Option<(f64, usize, usize)> = None;
        for r in 0..rows {
            for c in 0..cols {
                if in_basis.contains(&(r, c)) {
                    continue;
                }
                let k = p.cost[r][c] - t.row_duals[r] - t.col_duals[c];
                if k < -1e-9 && entering.map_or(true, |(bk, _, _)| k < bk) {
                    entering = Some((k, r, c));
                }
            }
        }
        let Some((_, er, ec)) = entering else {
            return Ok(t);
        };

        // The unique path through the basis tree from the entering
        // cell's column back to its row closes the stepping-stone cycle.
        let path = tree_path(rows, cols, &t.basis, rows + ec, er)?;
        // Signs alternate around the cycle starting with the entering
        // cell as a recipient; odd path positions are donors.
        let mut donors: Vec<(usize, usize)> = Vec::new();
        let mut recipients = vec![(er, ec)];
        for (i, &cell) in path.iter().enumerate() {
            if i % 2 == 0 {
                donors.push(cell);
            } else {
                recipients.push(cell);
            }
        }
        let theta = donors
            .iter()
            .map(|&(r, c)| t.chi[r][c])
            .min()
            .ok_or_else(|| TransportError::BasisCorrupt {
                reason: "stepping-stone cycle has no donor cell".into(),
            })?;
        let leaving = *donors
            .iter()
            .find(|&&(r, c)| t.chi[r][c] == theta)
            .expect("a donor attains the minimum");
        for &(r, c) in &recipients {
            t.chi[r][c] += theta;
        }
        for &(r, c) in &donors {
            t.chi[r][c] -= theta;
        }
        let pos = t
            .basis
            .iter()
            .position(|&cell| cell == leaving)
            .ok_or_else(|| TransportError::BasisCorrupt {
                reason: "leaving cell missing from the basis".into(),
            })?;
        t.basis[pos] = (er, ec);
    }
    Err(TransportError::IterationCap { cap })
}

/// Cells along the unique basis-tree path from node `from` to node `to`
/// (nodes 0..rows are rows, rows.. are columns), in walk order.
fn tree_path(
    rows: usize,
    cols: usize,
    basis: &[(usize, usize)],
    from: usize,
    to: usize,
) -> Result<Vec<(usize, usize)>, TransportError> {
    let mut adj: Vec<Vec<(usize, (usize, usize))>> = vec![Vec::new(); rows + cols];
    for &(r, c) in basis {
        adj[r].push((rows + c, (r, c)));
        adj[rows + c].push((r, (r, c)));
    }
    let mut parent: Vec<Option<(usize, (usize, usize))>> = vec![None; rows + cols];
    let mut seen = vec![false; rows + cols];
    seen[from] = true;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &(next, cell) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                parent[next] = Some((node, cell));
                queue.push_back(next);
            }
        }
    }
    if !seen[to] {
        return Err(TransportError::BasisCorrupt {
            reason: "no stepping-stone cycle: entering cell's row and column are disconnected"
                .into(),
        });
    }
    let mut cells = Vec::new();
    let mut node = to;
    while node != from {
        let (prev, cell) = parent[node].expect("path nodes have parents");
        cells.push(cell);
        node = prev;
    }
    cells.reverse();
    Ok(cells)
}

/// Optimal assignment with the slack row stripped away.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    /// χ restricted to the real demand rows.
    pub assignment: Vec<Vec<u64>>,
    /// Objective value (the slack row costs nothing).
    pub cost: f64,
    /// Full tableau over the balanced problem, including any slack row.
    pub tableau: Tableau,
    /// The balanced problem the tableau refers to.
    pub balanced: TransportProblem,
}

/// End-to-end solve: balance, build the least-cost start, optimize.
pub fn solve_transport(
    cost: Vec<Vec<f64>>,
    demand: Vec<u64>,
    supply: Vec<u64>,
) -> Result<TransportSolution, TransportError> {
    let n_real = demand.len();
    let problem = TransportProblem {
        cost,
        demand,
        supply,
    };
    let balanced = balance(&problem)?;
    if balanced.demand.is_empty() || balanced.supply.is_empty() {
        // Nothing to ship (a demand against zero columns would have
        // failed the balance step unless it was itself zero).
        let tableau = Tableau {
            chi: vec![vec![0; balanced.supply.len()]; balanced.demand.len()],
            basis: Vec::new(),
            row_duals: vec![0.0; balanced.demand.len()],
            col_duals: vec![0.0; balanced.supply.len()],
        };
        return Ok(TransportSolution {
            assignment: vec![vec![0; balanced.supply.len()]; n_real],
            cost: 0.0,
            tableau,
            balanced,
        });
    }
    let initial = mcc_initial(&balanced)?;
    let tableau = modi_optimize(&balanced, initial)?;
    let cost = tableau.cost(&balanced);
    let assignment = tableau.chi[..n_real].to_vec();
    Ok(TransportSolution {
        assignment,
        cost,
        tableau,
        balanced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn problem(cost: Vec<Vec<f64>>, demand: Vec<u64>, supply: Vec<u64>) -> TransportProblem {
        TransportProblem {
            cost,
            demand,
            supply,
        }
    }

    #[test]
    fn balance_appends_a_zero_cost_slack_row() {
        let p = problem(vec![vec![5.0]], vec![2], vec![3]);
        let b = balance(&p).unwrap();
        assert_eq!(b.demand, vec![2, 1]);
        assert_eq!(b.cost[1], vec![0.0]);

        let p = problem(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![2, 2], vec![2, 2]);
        let b = balance(&p).unwrap();
        assert_eq!(b, p, "already balanced passes through");

        let p = problem(
            vec![vec![2.0, 5.0, 1.0], vec![4.0, 1.0, 3.0]],
            vec![4, 3],
            vec![3, 3, 3],
        );
        let b = balance(&p).unwrap();
        assert_eq!(b.demand, vec![4, 3, 2]);
    }

    #[test]
    fn balance_rejects_excess_demand() {
        let p = problem(vec![vec![1.0, 1.0]], vec![5], vec![2, 2]);
        assert!(matches!(
            balance(&p).unwrap_err(),
            TransportError::DemandExceedsSupply {
                demand: 5,
                supply: 4
            }
        ));
    }

    #[test]
    fn costs_must_be_finite_and_nonnegative() {
        let p = problem(vec![vec![-1.0]], vec![1], vec![1]);
        assert!(matches!(
            balance(&p).unwrap_err(),
            TransportError::BadCost { .. }
        ));
    }

    #[test]
    fn mcc_handles_the_single_column_case() {
        let p = problem(vec![vec![5.0], vec![0.0]], vec![2, 1], vec![3]);
        let t = mcc_initial(&p).unwrap();
        assert_eq!(t.chi, vec![vec![2], vec![1]]);
        assert_eq!(t.basis.len(), 2);
        assert!((t.cost(&p) - 10.0).abs() < 1e-12);
        t.validate(&p).unwrap();
    }

    #[test]
    fn mcc_matches_the_hand_trace() {
        let p = problem(vec![vec![1.0, 2.0], vec![3.0, 1.0]], vec![2, 2], vec![2, 2]);
        let t = mcc_initial(&p).unwrap();
        assert_eq!(t.chi, vec![vec![2, 0], vec![0, 2]]);
        assert_eq!(t.basis.len(), 3);
        assert!((t.cost(&p) - 4.0).abs() < 1e-12);
        t.validate(&p).unwrap();
        // This start is already optimal, so improvement is a fixed point.
        let improved = modi_optimize(&p, t.clone()).unwrap();
        assert_eq!(improved.chi, t.chi);
    }

    #[test]
    fn mcc_requires_balance() {
        let p = problem(vec![vec![1.0]], vec![1], vec![2]);
        assert!(matches!(
            mcc_initial(&p).unwrap_err(),
            TransportError::NotBalanced { .. }
        ));
    }

    #[test]
    fn modi_reaches_the_known_optimum() {
        let p = problem(
            vec![
                vec![2.0, 5.0, 1.0],
                vec![4.0, 1.0, 3.0],
                vec![0.0, 0.0, 0.0],
            ],
            vec![4, 3, 2],
            vec![3, 3, 3],
        );
        let start = mcc_initial(&p).unwrap();
        let t = modi_optimize(&p, start.clone()).unwrap();
        assert!(t.cost(&p) <= start.cost(&p));
        assert!((t.cost(&p) - 8.0).abs() < 1e-12);
        t.validate(&p).unwrap();
        // Dual feasibility across all cells at the optimum.
        for r in 0..3 {
            for c in 0..3 {
                assert!(p.cost[r][c] - t.row_duals[r] - t.col_duals[c] >= -1e-9);
            }
        }
    }

    #[test]
    fn zero_demand_yields_an_empty_assignment() {
        let sol = solve_transport(Vec::new(), Vec::new(), vec![2, 3]).unwrap();
        assert!(sol.assignment.is_empty());
        assert_eq!(sol.cost, 0.0);
        // The slack row soaks up the whole supply.
        assert_eq!(sol.tableau.chi, vec![vec![2, 3]]);
    }

    #[test]
    fn nothing_at_all_is_fine() {
        let sol = solve_transport(Vec::new(), Vec::new(), Vec::new()).unwrap();
        assert!(sol.assignment.is_empty());
        assert_eq!(sol.cost, 0.0);
    }

    #[test]
    fn uniform_costs_are_allocation_invariant() {
        let sol = solve_transport(
            vec![vec![3.0, 3.0, 3.0], vec![3.0, 3.0, 3.0]],
            vec![2, 3],
            vec![2, 2, 2],
        )
        .unwrap();
        assert!((sol.cost - 15.0).abs() < 1e-12);
    }

    #[test]
    fn zero_demand_rows_are_carried_through() {
        let sol = solve_transport(
            vec![vec![1.0, 2.0], vec![4.0, 0.5]],
            vec![0, 2],
            vec![2, 2],
        )
        .unwrap();
        assert_eq!(sol.assignment[0], vec![0, 0]);
        assert_eq!(sol.assignment[1].iter().sum::<u64>(), 2);
    }

    /// Enumerates every nonnegative integer matrix with the given
    /// marginals and returns the cheapest objective.
    fn brute_force(p: &TransportProblem) -> f64 {
        fn rec(
            p: &TransportProblem,
            row: usize,
            col: usize,
            rem_d: &mut Vec<u64>,
            rem_s: &mut Vec<u64>,
            acc: f64,
            best: &mut f64,
        ) {
            if acc >= *best {
                return;
            }
            let cols = p.supply.len();
            if row == p.demand.len() {
                *best = acc;
                return;
            }
            let (next_row, next_col) = if col + 1 == cols {
                (row + 1, 0)
            } else {
                (row, col + 1)
            };
            let max_here = rem_d[row].min(rem_s[col]);
            // On the last column the row remainder is forced.
            if col + 1 == cols {
                let need = rem_d[row];
                if need > rem_s[col] {
                    return;
                }
                rem_d[row] -= need;
                rem_s[col] -= need;
                rec(
                    p,
                    next_row,
                    next_col,
                    rem_d,
                    rem_s,
                    acc + need as f64 * p.cost[row][col],
                    best,
                );
                rem_d[row] += need;
                rem_s[col] += need;
                return;
            }
            for q in 0..=max_here {
                rem_d[row] -= q;
                rem_s[col] -= q;
                rec(
                    p,
                    next_row,
                    next_col,
                    rem_d,
                    rem_s,
                    acc + q as f64 * p.cost[row][col],
                    best,
                );
                rem_d[row] += q;
                rem_s[col] += q;
            }
        }
        let mut best = f64::INFINITY;
        let mut rem_d = p.demand.clone();
        let mut rem_s = p.supply.clone();
        rec(p, 0, 0, &mut rem_d, &mut rem_s, 0.0, &mut best);
        best
    }

    fn random_instance(rng: &mut ChaCha12Rng) -> TransportProblem {
        loop {
            let rows = rng.random_range(1..=4);
            let cols = rng.random_range(1..=4);
            let demand: Vec<u64> = (0..rows).map(|_| rng.random_range(0..=6)).collect();
            let supply: Vec<u64> = (0..cols).map(|_| rng.random_range(0..=6)).collect();
            if demand.iter().sum::<u64>() <= supply.iter().sum::<u64>()
                && supply.iter().sum::<u64>() > 0
            {
                let cost = (0..rows)
                    .map(|_| (0..cols).map(|_| rng.random_range(0..=9) as f64).collect())
                    .collect();
                return TransportProblem {
                    cost,
                    demand,
                    supply,
                };
            }
        }
    }

    #[test]
    fn random_instances_match_enumeration() {
        let mut rng = ChaCha12Rng::seed_from_u64(2024);
        for trial in 0..300 {
            let p = random_instance(&mut rng);
            let sol =
                solve_transport(p.cost.clone(), p.demand.clone(), p.supply.clone()).unwrap();
            sol.tableau.validate(&sol.balanced).unwrap();
            let best = brute_force(&sol.balanced);
            assert!(
                (sol.cost - best).abs() < 1e-9,
                "trial {trial}: solver {} vs enumeration {best} on {p:?}",
                sol.cost
            );
            // Integrality and marginal checks on the public view.
            for (r, row) in sol.assignment.iter().enumerate() {
                assert_eq!(row.iter().sum::<u64>(), p.demand[r]);
            }
            for c in 0..p.supply.len() {
                let shipped: u64 = sol.tableau.chi.iter().map(|row| row[c]).sum();
                assert_eq!(shipped, p.supply[c]);
            }
            // Dual feasibility everywhere at the optimum.
            for r in 0..sol.balanced.demand.len() {
                for c in 0..sol.balanced.supply.len() {
                    let k = sol.balanced.cost[r][c]
                        - sol.tableau.row_duals[r]
                        - sol.tableau.col_duals[c];
                    assert!(k >= -1e-9, "trial {trial}: negative reduced cost {k} left");
                }
            }
        }
    }
}
