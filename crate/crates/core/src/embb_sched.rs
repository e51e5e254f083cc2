//! Slot-level broadband scheduling. Two policies live here: a
//! relaxation scheduler that minimizes the sum of per-user fairness
//! deviations and drives the solution to a binary vertex with a
//! concave p-norm penalty (successive upper-bound minimization), and a
//! lightweight heuristic that re-apportions blocks in proportion to the
//! previous slot's puncturing losses.

use thiserror::Error;

use crate::channel::ChannelState;
use crate::lp::{Constraint, LinearProgram, Relation, Simplex, Status};
use crate::model::{EmbbAllocation, ModelError, RateLedger};
use crate::model::PsumParams;

#[derive(Debug, Error)]
pub enum SchedError {
    #[error("slot {slot}: subproblem solve failed: {detail}")]
    Lp { slot: usize, detail: String },
    #[error("gradient singularity: entry ({ue}, {rb}) plus smoothing offset is zero")]
    GradientSingularity { ue: usize, rb: usize },
    #[error("resource block {rb} is oversubscribed in the relaxed solution (column sum {sum})")]
    ColumnOversubscribed { rb: usize, sum: f64 },
    #[error("cannot repair a starved user: {n_rb} resource blocks for {n_embb} users")]
    CannotRepair { n_rb: usize, n_embb: usize },
    #[error("slot counter must be at least 1")]
    SlotIndex,
    #[error("ledger tracks {ledger} users but the channel snapshot has {rates}")]
    UserMismatch { ledger: usize, rates: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One iterate of the penalty loop, kept for diagnostics and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct PsumState {
    /// Relaxed allocation α at this iterate, entries in [0, 1].
    pub alpha_relaxed: Vec<Vec<f64>>,
    /// Iteration counter; 0 is the initial relaxation solution.
    pub iter: u32,
    /// Penalty weight used to produce this iterate.
    pub sigma: f64,
    /// Smoothing offset used to produce this iterate.
    pub eps: f64,
    /// Subproblem objective evaluated at this iterate (normalized
    /// fairness term plus the linearized penalty).
    pub objective: f64,
    /// The same subproblem objective evaluated at the previous iterate;
    /// NaN for the initial relaxation.
    pub objective_at_previous: f64,
}

/// Per-user fairness deviation: the absolute gap between the
/// population-average cumulative rate and the user's own, with slot-t
/// rates induced by `alpha` (which may be fractional).
pub fn fairness_deviation(
    alpha: &[Vec<f64>],
    ledger: &RateLedger,
    rates: &ChannelState,
    t: usize,
) -> Vec<f64> {
    let e_n = alpha.len();
    debug_assert!(t >= 1);
    debug_assert_eq!(ledger.n_embb(), e_n);
    let totals: Vec<f64> = (0..e_n)
        .map(|e| {
            let slot_rate: f64 = alpha[e]
                .iter()
                .zip(&rates.rb_rate_embb[e])
                .map(|(a, r)| a * r)
                .sum();
            ledger.cumulative()[e] + slot_rate
        })
        .collect();
    let grand: f64 = totals.iter().sum();
    let t_f = t as f64;
    totals
        .iter()
        .map(|&own| (grand / (t_f * e_n as f64) - own / t_f).abs())
        .collect()
}

/// Concave p-norm penalty Σ_k (‖α_k + ε·1‖_p^p − c_{ε,k}) with
/// c_{ε,k} = (1+ε)^p + (E−1)·ε^p. Zero exactly on matrices whose
/// columns are one-hot, positive on fractional points of the feasible
/// set.
pub fn penalty_value(alpha: &[Vec<f64>], eps: f64, p: f64) -> f64 {
    let e_n = alpha.len();
    if e_n == 0 {
        return 0.0;
    }
    let k_n = alpha[0].len();
    debug_assert!(eps >= 0.0 && p > 0.0 && p < 1.0);
    let column_offset = (1.0 + eps).powf(p) + (e_n as f64 - 1.0) * eps.powf(p);
    let mut total = 0.0;
    for k in 0..k_n {
        let norm: f64 = alpha.iter().map(|row| (row[k] + eps).powf(p)).sum();
        total += norm - column_offset;
    }
    total
}

/// Entrywise gradient of the penalty: p·(α_{e,k} + ε)^{p−1}.
pub fn penalty_gradient(
    alpha: &[Vec<f64>],
    eps: f64,
    p: f64,
) -> Result<Vec<Vec<f64>>, SchedError> {
    let mut out = Vec::with_capacity(alpha.len());
    for (e, row) in alpha.iter().enumerate() {
        let mut grad_row = Vec::with_capacity(row.len());
        for (k, &a) in row.iter().enumerate() {
            let base = a + eps;
            if base <= 0.0 {
                return Err(SchedError::GradientSingularity { ue: e, rb: k });
            }
            grad_row.push(p * base.powf(p - 1.0));
        }
        out.push(grad_row);
    }
    Ok(out)
}

/// Equal contiguous blocks of ⌊K/E⌋ resource blocks, with the remainder
/// handed one each to the lowest-indexed users.
pub fn equal_split(n_rb: usize, n_embb: usize, slot_index: usize) -> EmbbAllocation {
    let base = n_rb / n_embb;
    let extra = n_rb % n_embb;
    let counts: Vec<usize> = (0..n_embb)
        .map(|e| base + usize::from(e < extra))
        .collect();
    EmbbAllocation::from_counts(&counts, n_rb, slot_index)
}

fn is_binary(alpha: &[Vec<f64>], tol: f64) -> bool {
    alpha
        .iter()
        .flatten()
        .all(|&a| a.min(1.0 - a).abs() <= tol)
}

/// Rounds a relaxed allocation to a feasible binary one: every block
/// goes to its strongest claimant, then starved users steal the block
/// their owners hold with the weakest claim.
pub fn round_allocation(alpha_relaxed: &[Vec<f64>]) -> Result<Vec<Vec<bool>>, SchedError> {
    let e_n = alpha_relaxed.len();
    let k_n = alpha_relaxed.first().map_or(0, |r| r.len());
    if k_n < e_n {
        return Err(SchedError::CannotRepair {
            n_rb: k_n,
            n_embb: e_n,
        });
    }
    // Structural guard only: a genuinely doubled-up block sums to 2,
    // while warm-restarted pivot chains can leave a few 1e-3 of drift on
    // a satisfied constraint, so split the difference at 1.5.
    for k in 0..k_n {
        let sum: f64 = alpha_relaxed.iter().map(|row| row[k]).sum();
        if sum > 1.5 {
            return Err(SchedError::ColumnOversubscribed { rb: k, sum });
        }
    }

    let mut owner = vec![0usize; k_n];
    for (k, slot) in owner.iter_mut().enumerate() {
        let mut best = 0usize;
        for e in 1..e_n {
            if alpha_relaxed[e][k] > alpha_relaxed[best][k] {
                best = e;
            }
        }
        *slot = best;
    }
    let mut counts = vec![0usize; e_n];
    for &e in &owner {
        counts[e] += 1;
    }
    // Repair starved users: take the block whose current owner holds it
    // with the smallest relaxed weight among owners that can spare one.
    loop {
        let Some(starved) = counts.iter().position(|&c| c == 0) else {
            break;
        };
        let mut steal: Option<(f64, usize)> = None;
        for (k, &e) in owner.iter().enumerate() {
            if counts[e] >= 2 {
                let claim = alpha_relaxed[e][k];
                if steal.map_or(true, |(c, _)| claim < c) {
                    steal = Some((claim, k));
                }
            }
        }
        let (_, k) = steal.expect("k_n >= e_n guarantees a donor exists");
        counts[owner[k]] -= 1;
        owner[k] = starved;
        counts[starved] += 1;
    }

    let mut alpha = vec![vec![false; k_n]; e_n];
    for (k, &e) in owner.iter().enumerate() {
        alpha[e][k] = true;
    }
    Ok(alpha)
}

/// Steepest-descent polish of a binary allocation: repeatedly applies
/// the single-block reassignment that lowers the total cumulative
/// deviation the most, never leaving a user without blocks. The
/// deviation strictly decreases with every move, so the loop
/// terminates.
fn polish_allocation(
    alpha: &mut [Vec<bool>],
    ledger: &RateLedger,
    rates: &ChannelState,
) {
    let e_n = alpha.len();
    let k_n = alpha.first().map_or(0, |r| r.len());
    if e_n < 2 {
        return;
    }
    let cum = ledger.cumulative();
    let mut totals: Vec<f64> = (0..e_n)
        .map(|e| {
            cum[e]
                + (0..k_n)
                    .filter(|&k| alpha[e][k])
                    .map(|k| rates.rb_rate_embb[e][k])
                    .sum::<f64>()
        })
        .collect();
    let mut counts: Vec<usize> = alpha
        .iter()
        .map(|row| row.iter().filter(|&&a| a).count())
        .collect();
    let mut owner: Vec<usize> = (0..k_n)
        .map(|k| {
            (0..e_n)
                .find(|&e| alpha[e][k])
                .expect("every block is granted")
        })
        .collect();

    let deviation = |totals: &[f64]| -> f64 {
        let mean: f64 = totals.iter().sum::<f64>() / e_n as f64;
        totals.iter().map(|&own| (mean - own).abs()).sum()
    };
    let mut current = deviation(&totals);
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for k in 0..k_n {
            let from = owner[k];
            if counts[from] < 2 {
                continue;
            }
            for to in 0..e_n {
                if to == from {
                    continue;
                }
                let mut trial = totals.clone();
                trial[from] -= rates.rb_rate_embb[from][k];
                trial[to] += rates.rb_rate_embb[to][k];
                let value = deviation(&trial);
                if value < best.map_or(current - 1e-9, |(v, _, _)| v) {
                    best = Some((value, k, to));
                }
            }
        }
        let Some((value, k, to)) = best else { break };
        let from = owner[k];
        alpha[from][k] = false;
        alpha[to][k] = true;
        totals[from] -= rates.rb_rate_embb[from][k];
        totals[to] += rates.rb_rate_embb[to][k];
        counts[from] -= 1;
        counts[to] += 1;
        owner[k] = to;
        current = value;
    }
}

/// Builds the relaxed scheduling polytope and the exact linearization
/// of the fairness objective: variables are the E·K relaxed grants
/// followed by one auxiliary deviation bound per user. The deviation
/// rows are scaled to keep the tableau well conditioned regardless of
/// the absolute rate level.
struct FairnessLp {
    lp: LinearProgram,
    scale: f64,
}

fn build_fairness_lp(ledger: &RateLedger, rates: &ChannelState, t: usize) -> FairnessLp {
    let e_n = rates.n_embb();
    let k_n = rates.n_rb();
    let n_vars = e_n * k_n + e_n;
    let idx = |e: usize, k: usize| e * k_n + k;
    let w_idx = |e: usize| e_n * k_n + e;
    let t_f = t as f64;
    let e_f = e_n as f64;

    let mean_rate = rates
        .rb_rate_embb
        .iter()
        .flatten()
        .copied()
        .sum::<f64>()
        / (e_n * k_n) as f64;
    let scale = if mean_rate > 0.0 { mean_rate } else { 1.0 };

    let mut constraints = Vec::with_capacity(k_n + e_n + 1 + 2 * e_n);
    // Each block serves at most one user.
    for k in 0..k_n {
        let mut coeffs = vec![0.0; n_vars];
        for e in 0..e_n {
            coeffs[idx(e, k)] = 1.0;
        }
        constraints.push(Constraint {
            coeffs,
            relation: Relation::Le,
            rhs: 1.0,
        });
    }
    // Every user holds at least one block.
    for e in 0..e_n {
        let mut coeffs = vec![0.0; n_vars];
        for k in 0..k_n {
            coeffs[idx(e, k)] = 1.0;
        }
        constraints.push(Constraint {
            coeffs,
            relation: Relation::Ge,
            rhs: 1.0,
        });
    }
    // Every block is granted: the carrier runs at full utilization, so
    // the budget binds with equality.
    {
        let mut coeffs = vec![0.0; n_vars];
        for v in coeffs.iter_mut().take(e_n * k_n) {
            *v = 1.0;
        }
        constraints.push(Constraint {
            coeffs,
            relation: Relation::Eq,
            rhs: k_n as f64,
        });
    }
    // w_e bounds the absolute deviation from both sides. The deviation
    // of user e is b_e + L_e(α) with constant b_e from the ledger and
    // linear part L_e over all grants.
    let cum = ledger.cumulative();
    let cum_total: f64 = cum.iter().sum();
    for e in 0..e_n {
        let b_e = (cum_total / (t_f * e_f) - cum[e] / t_f) / scale;
        let mut lin = vec![0.0; n_vars];
        for e2 in 0..e_n {
            for k in 0..k_n {
                let mut coeff = rates.rb_rate_embb[e2][k] / (t_f * e_f);
                if e2 == e {
                    coeff -= rates.rb_rate_embb[e][k] / t_f;
                }
                lin[idx(e2, k)] = coeff / scale;
            }
        }
        // w_e − L_e(α) ≥ b_e
        let mut upper = lin.clone();
        for v in upper.iter_mut().take(e_n * k_n) {
            *v = -*v;
        }
        upper[w_idx(e)] = 1.0;
        constraints.push(Constraint {
            coeffs: upper,
            relation: Relation::Ge,
            rhs: b_e,
        });
        // w_e + L_e(α) ≥ −b_e
        let mut lower = lin;
        lower[w_idx(e)] = 1.0;
        constraints.push(Constraint {
            coeffs: lower,
            relation: Relation::Ge,
            rhs: -b_e,
        });
    }

    let mut objective = vec![0.0; n_vars];
    for e in 0..e_n {
        objective[w_idx(e)] = 1.0;
    }
    FairnessLp {
        lp: LinearProgram {
            objective,
            constraints,
            bounds: vec![(0.0, f64::INFINITY); n_vars],
        },
        scale,
    }
}

fn alpha_from_solution(solution: &[f64], e_n: usize, k_n: usize) -> Vec<Vec<f64>> {
    (0..e_n)
        .map(|e| solution[e * k_n..(e + 1) * k_n].to_vec())
        .collect()
}

fn subproblem_objective(
    alpha: &[Vec<f64>],
    ledger: &RateLedger,
    rates: &ChannelState,
    t: usize,
    scale: f64,
    sigma: f64,
    grad: Option<&[Vec<f64>]>,
) -> f64 {
    let w: f64 = fairness_deviation(alpha, ledger, rates, t).iter().sum();
    let penalty = grad.map_or(0.0, |g| {
        sigma
            * g.iter()
                .zip(alpha)
                .map(|(gr, ar)| gr.iter().zip(ar).map(|(g, a)| g * a).sum::<f64>())
                .sum::<f64>()
    });
    w / scale + penalty
}

/// Fairness-driven slot scheduler. Solves the relaxation of the
/// deviation-minimization problem, then iterates linearized concave
/// penalty subproblems (tightening ε, amplifying σ) until the iterate
/// is binary or the iteration budget is spent, rounding as a last
/// resort; a steepest-descent reassignment pass then polishes the
/// binary allocation.
pub fn psum_schedule(
    ledger: &RateLedger,
    rates: &ChannelState,
    t: usize,
    params: &PsumParams,
) -> Result<EmbbAllocation, SchedError> {
    psum_schedule_traced(ledger, rates, t, params).map(|(alloc, _)| alloc)
}

/// As [`psum_schedule`], additionally returning every iterate of the
/// penalty loop.
pub fn psum_schedule_traced(
    ledger: &RateLedger,
    rates: &ChannelState,
    t: usize,
    params: &PsumParams,
) -> Result<(EmbbAllocation, Vec<PsumState>), SchedError> {
    if t == 0 {
        return Err(SchedError::SlotIndex);
    }
    let e_n = rates.n_embb();
    let k_n = rates.n_rb();
    if ledger.n_embb() != e_n {
        return Err(SchedError::UserMismatch {
            ledger: ledger.n_embb(),
            rates: e_n,
        });
    }
    if k_n < e_n {
        return Err(SchedError::CannotRepair {
            n_rb: k_n,
            n_embb: e_n,
        });
    }
    // A lone user deviates from itself by zero whatever it holds; give
    // it everything.
    if e_n == 1 {
        let alloc = EmbbAllocation::from_counts(&[k_n], k_n, t);
        alloc.validate(e_n, k_n)?;
        let trace = vec![PsumState {
            alpha_relaxed: vec![vec![1.0; k_n]],
            iter: 0,
            sigma: params.sigma1,
            eps: params.eps1,
            objective: 0.0,
            objective_at_previous: f64::NAN,
        }];
        return Ok((alloc, trace));
    }

    let built = build_fairness_lp(ledger, rates, t);
    let mut simplex = Simplex::new(&built.lp).map_err(|e| SchedError::Lp {
        slot: t,
        detail: e.to_string(),
    })?;
    let fail = |slot: usize, status: Status| SchedError::Lp {
        slot,
        detail: format!("{status:?}"),
    };
    match simplex.solve() {
        Status::Optimal => {}
        status => return Err(fail(t, status)),
    }
    let mut alpha = alpha_from_solution(&simplex.solution(), e_n, k_n);
    let mut sigma = params.sigma1;
    let mut eps = params.eps1;
    // The deviation objective is normalized to per-block units, so the
    // penalty weight must be dimensionless too: divide the linearized
    // penalty by its steepest possible slope (the gradient at an empty
    // grant, summed over the K columns). σ then starts on the same
    // footing as the deviation term and still overtakes it
    // geometrically, because every iteration both amplifies σ and
    // sharpens the gradient through the shrinking ε.
    let grad_norm = k_n as f64 * params.p * params.eps1.powf(params.p - 1.0);
    let mut trace = vec![PsumState {
        alpha_relaxed: alpha.clone(),
        iter: 0,
        sigma,
        eps,
        objective: subproblem_objective(&alpha, ledger, rates, t, built.scale, 0.0, None),
        objective_at_previous: f64::NAN,
    }];

    let mut iter = 0u32;
    while iter < params.i_max && !is_binary(&alpha, params.binary_tol) {
        let grad = penalty_gradient(&alpha, eps, params.p)?;
        let weight = sigma / grad_norm;
        let mut objective = built.lp.objective.clone();
        for e in 0..e_n {
            for k in 0..k_n {
                objective[e * k_n + k] = weight * grad[e][k];
            }
        }
        match simplex.reoptimize(&objective) {
            Status::Optimal => {}
            status => return Err(fail(t, status)),
        }
        let next = alpha_from_solution(&simplex.solution(), e_n, k_n);
        trace.push(PsumState {
            alpha_relaxed: next.clone(),
            iter: iter + 1,
            sigma,
            eps,
            objective: subproblem_objective(
                &next, ledger, rates, t, built.scale, weight, Some(&grad),
            ),
            objective_at_previous: subproblem_objective(
                &alpha, ledger, rates, t, built.scale, weight, Some(&grad),
            ),
        });
        alpha = next;
        eps *= params.eta;
        sigma *= params.zeta;
        iter += 1;
    }

    let mut binary: Vec<Vec<bool>> = if is_binary(&alpha, params.binary_tol) {
        alpha
            .iter()
            .map(|row| row.iter().map(|&a| a > 0.5).collect())
            .collect()
    } else {
        round_allocation(&alpha)?
    };
    polish_allocation(&mut binary, ledger, rates);
    let alloc = EmbbAllocation {
        alpha: binary,
        slot_index: t,
    };
    alloc.validate(e_n, k_n)?;
    Ok((alloc, trace))
}

/// Largest-remainder apportionment of `n_rb` blocks proportional to
/// `weights`, with a floor of one block per user.
fn apportion(weights: &[f64], n_rb: usize) -> Vec<usize> {
    let e_n = weights.len();
    let total: f64 = weights.iter().sum();
    let mut counts: Vec<usize> = Vec::with_capacity(e_n);
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(e_n);
    let mut assigned = 0usize;
    for (e, &w) in weights.iter().enumerate() {
        let quota = w / total * n_rb as f64;
        let floor = quota.floor();
        counts.push(floor as usize);
        assigned += floor as usize;
        remainders.push((quota - floor, e));
    }
    // Hand out the leftover blocks by descending fractional remainder,
    // lowest user index on ties.
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut leftover = n_rb - assigned;
    for &(_, e) in remainders.iter().cycle() {
        if leftover == 0 {
            break;
        }
        counts[e] += 1;
        leftover -= 1;
    }
    // Floor of one block each: take from the largest holder.
    loop {
        let Some(starved) = counts.iter().position(|&c| c == 0) else {
            break;
        };
        let donor = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(e, _)| e)
            .expect("nonempty");
        counts[donor] -= 1;
        counts[starved] += 1;
    }
    counts
}

/// Loss-proportional heuristic. The first slot splits blocks equally;
/// afterwards each user's share follows its previous-slot puncturing
/// loss (largest-remainder rounding, floor of one). All-zero losses
/// fall back to the equal split.
pub fn heuristic_schedule(
    ledger: &RateLedger,
    t: usize,
    n_rb: usize,
    n_embb: usize,
) -> Result<EmbbAllocation, SchedError> {
    if t == 0 {
        return Err(SchedError::SlotIndex);
    }
    if n_embb == 0 || n_rb < n_embb {
        return Err(SchedError::CannotRepair { n_rb, n_embb });
    }
    if ledger.n_embb() != n_embb {
        return Err(SchedError::UserMismatch {
            ledger: ledger.n_embb(),
            rates: n_embb,
        });
    }
    let alloc = if t == 1 {
        equal_split(n_rb, n_embb, t)
    } else {
        let losses = ledger.prev_slot_loss();
        let total: f64 = losses.iter().sum();
        if total <= 0.0 {
            equal_split(n_rb, n_embb, t)
        } else {
            let counts = apportion(losses, n_rb);
            EmbbAllocation::from_counts(&counts, n_rb, t)
        }
    };
    alloc.validate(n_embb, n_rb)?;
    Ok(alloc)
}
