//! Comparison puncturing policies. Each one admits the same request
//! prefix as the optimizing scheduler and differs only in how victims
//! are chosen: strongest modulation first, best drawn cross-gain,
//! uniformly at random, round-robin, or a many-to-one matching game.

use rand::Rng;

use crate::channel::rayleigh_power_fade;
use crate::traffic::UrllcBatch;
use crate::urllc_sched::{
    admitted_demands, build_cost_matrix, decision_from_picks, supply_vector, MinislotDecision,
    MinislotState, PunctureError, VictimPool,
};

/// Victim-selection discipline for the mini-slot puncturing step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselinePolicy {
    /// Puncture the blocks carrying the highest broadband rate first.
    Ps,
    /// Puncture the user with the best drawn cross-channel gain.
    Mups,
    /// Puncture uniformly random blocks without replacement.
    Rs,
    /// Puncture one block per user, round-robin, until demand is met.
    Eds,
    /// Match requests to victims by deferred acceptance.
    Mbs,
}

/// Runs one baseline policy over a mini-slot. Admission, violation
/// accounting, record layout, and cost evaluation are shared with the
/// optimizing scheduler; only the victim choice differs.
pub fn baseline_schedule(
    policy: BaselinePolicy,
    state: &MinislotState,
    batch: &UrllcBatch,
    rng: &mut impl Rng,
) -> Result<MinislotDecision, PunctureError> {
    if state.rates.rb_rate_urllc.len() < batch.arrivals {
        return Err(PunctureError::MissingRates {
            have: state.rates.rb_rate_urllc.len(),
            need: batch.arrivals,
        });
    }
    let demands = admitted_demands(state, batch);
    let served = demands.len();
    if served == 0 {
        return decision_from_picks(state, batch, demands, &[]);
    }
    let picks = match policy {
        BaselinePolicy::Ps => split_in_order(&demands, highest_rate_order(state)),
        BaselinePolicy::Rs => split_in_order(&demands, random_order(state, &demands, rng)),
        BaselinePolicy::Eds => split_in_order(&demands, round_robin_order(state, &demands)),
        BaselinePolicy::Mups => best_gain_picks(state, &demands, rng),
        BaselinePolicy::Mbs => matching_picks(state, &demands),
    };
    decision_from_picks(state, batch, demands, &picks)
}

/// Deals an ordered list of victim blocks out to the requests, each
/// taking its demand in arrival order.
fn split_in_order(demands: &[u64], order: Vec<usize>) -> Vec<Vec<usize>> {
    let mut it = order.into_iter();
    demands
        .iter()
        .map(|&d| (0..d).map(|_| it.next().expect("order covers total demand")).collect())
        .collect()
}

/// All blocks sorted by their owner's per-block rate, strongest first
/// (block index breaks ties).
fn highest_rate_order(state: &MinislotState) -> Vec<usize> {
    let k_n = state.alpha.alpha.first().map_or(0, |r| r.len());
    let mut blocks: Vec<(f64, usize)> = (0..k_n)
        .filter_map(|k| {
            state
                .alpha
                .owner_of(k)
                .map(|e| (state.rates.rb_rate_embb[e][k], k))
        })
        .collect();
    blocks.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    blocks.into_iter().map(|(_, k)| k).collect()
}

/// A uniform sample of distinct owned blocks covering the total demand.
fn random_order(state: &MinislotState, demands: &[u64], rng: &mut impl Rng) -> Vec<usize> {
    let owned: Vec<usize> = (0..state.alpha.alpha.first().map_or(0, |r| r.len()))
        .filter(|&k| state.alpha.owner_of(k).is_some())
        .collect();
    let total: u64 = demands.iter().sum();
    rand::seq::index::sample(rng, owned.len(), total as usize)
        .into_iter()
        .map(|i| owned[i])
        .collect()
}

/// One block per user in index order, cycling until demand is met;
/// exhausted users are skipped.
fn round_robin_order(state: &MinislotState, demands: &[u64]) -> Vec<usize> {
    let e_n = state.alpha.alpha.len();
    let total: u64 = demands.iter().sum();
    let mut pool = VictimPool::new(state.alpha);
    let mut order = Vec::with_capacity(total as usize);
    let mut e = 0usize;
    while (order.len() as u64) < total {
        if let Some(k) = pool.take_lowest(e) {
            order.push(k);
        }
        e = (e + 1) % e_n;
    }
    order
}

/// Each request draws an independent fading gain toward every broadband
/// user and takes blocks from the best-faded users first.
fn best_gain_picks(
    state: &MinislotState,
    demands: &[u64],
    rng: &mut impl Rng,
) -> Vec<Vec<usize>> {
    let e_n = state.alpha.alpha.len();
    let mut pool = VictimPool::new(state.alpha);
    let mut picks = Vec::with_capacity(demands.len());
    for &d in demands {
        let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(e_n);
        for e in 0..e_n {
            ranked.push((rayleigh_power_fade(rng), e));
        }
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut mine = Vec::with_capacity(d as usize);
        'fill: for &(_, e) in &ranked {
            while pool.remaining(e) > 0 {
                mine.push(pool.take_lowest(e).unwrap());
                if mine.len() as u64 == d {
                    break 'fill;
                }
            }
        }
        picks.push(mine);
    }
    picks
}

/// Deferred-acceptance matching: requests propose to victims in order
/// of ascending marginal loss cost; a victim holds proposals up to its
/// block quota, preferring earlier arrivals, and rejections re-propose
/// down the list. Requests too large for any single victim fall back to
/// a greedy cheapest-first split of whatever supply is left.
fn matching_picks(state: &MinislotState, demands: &[u64]) -> Vec<Vec<usize>> {
    let served = demands.len();
    let e_n = state.alpha.alpha.len();
    let cost_row =
        build_cost_matrix(state.ledger, state.alpha, state.rates, 1, state.m_per_slot).remove(0);
    let mut pref: Vec<usize> = (0..e_n).collect();
    pref.sort_by(|&a, &b| cost_row[a].partial_cmp(&cost_row[b]).unwrap().then(a.cmp(&b)));
    let quotas = supply_vector(state.alpha);

    // matched[u] = victim index once accepted; next[u] = how far down
    // the preference list u has proposed.
    let mut matched: Vec<Option<usize>> = vec![None; served];
    let mut next = vec![0usize; served];
    loop {
        let mut proposals: Vec<Vec<usize>> = vec![Vec::new(); e_n];
        let mut any = false;
        for u in 0..served {
            if matched[u].is_none() && next[u] < e_n {
                proposals[pref[next[u]]].push(u);
                any = true;
            }
        }
        if !any {
            break;
        }
        for e in 0..e_n {
            // Pool this round's proposals with current holders, prefer
            // earlier arrivals, keep as many as the quota allows.
            let mut pool: Vec<usize> = (0..served).filter(|&u| matched[u] == Some(e)).collect();
            pool.extend(&proposals[e]);
            pool.sort_unstable();
            let mut used = 0u64;
            for &u in &pool {
                if used + demands[u] <= quotas[e] {
                    used += demands[u];
                    matched[u] = Some(e);
                } else {
                    // Bumped holders and rejected proposers both move on
                    // to their next choice.
                    matched[u] = None;
                    next[u] += 1;
                }
            }
        }
    }

    let mut pool = VictimPool::new(state.alpha);
    let mut picks: Vec<Vec<usize>> = vec![Vec::new(); served];
    for u in 0..served {
        if let Some(e) = matched[u] {
            for _ in 0..demands[u] {
                picks[u].push(pool.take_lowest(e).expect("quota respected by matching"));
            }
        }
    }
    // Unmatched requests split across the cheapest remaining supply.
    for u in 0..served {
        if matched[u].is_some() {
            continue;
        }
        let mut left = demands[u];
        for &e in &pref {
            while left > 0 && pool.remaining(e) > 0 {
                picks[u].push(pool.take_lowest(e).unwrap());
                left -= 1;
            }
        }
        debug_assert_eq!(left, 0, "admission guarantees total demand fits the carrier");
    }
    picks
}
