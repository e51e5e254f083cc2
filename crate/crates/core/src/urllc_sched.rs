//! Mini-slot puncturing decisions. Admitted low-latency requests are
//! turned into a transportation problem: demands are the resource
//! blocks each request needs, supplies are the blocks each broadband
//! user currently holds, and costs price how far a victim's running
//! loss would drift from the population mean. The optimal assignment
//! picks the victims; blocks are punctured lowest-index first.

use thiserror::Error;

use crate::channel::ChannelState;
use crate::model::{EmbbAllocation, ModelError, PunctureRecord, RateLedger};
use crate::traffic::{required_rbs, TrafficError, UrllcBatch};
use crate::transport::{solve_transport, TransportError};

#[derive(Debug, Error)]
pub enum PunctureError {
    #[error("channel snapshot carries {have} low-latency rate rows but the batch has {need} requests")]
    MissingRates { have: usize, need: usize },
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Everything the puncturing step needs to know about the slot it runs
/// inside: the frozen broadband allocation, the loss ledger state, the
/// channel snapshot (with per-request low-latency rate rows), and the
/// mini-slot count used to convert slot rates into per-mini-slot units.
pub struct MinislotState<'a> {
    pub alpha: &'a EmbbAllocation,
    pub ledger: &'a RateLedger,
    pub rates: &'a ChannelState,
    pub m_per_slot: usize,
}

/// Outcome of one mini-slot of puncturing.
#[derive(Debug, Clone)]
pub struct MinislotDecision {
    pub record: PunctureRecord,
    /// Blocks taken from each broadband user this mini-slot.
    pub punctured_per_user: Vec<usize>,
    /// Objective value of the chosen assignment.
    pub transport_cost: f64,
    /// Requests admitted and served.
    pub served: usize,
    /// Requests that arrived but could not be served next mini-slot.
    pub violations: usize,
    /// Blocks demanded by each served request.
    pub demands: Vec<u64>,
}

/// Blocks held by each broadband user under `alpha`; these are the
/// transportation supplies and always sum to the carrier size.
pub fn supply_vector(alpha: &EmbbAllocation) -> Vec<u64> {
    alpha.rb_counts().iter().map(|&c| c as u64).collect()
}

/// Cost of puncturing one block from each candidate victim: the
/// distance between the victim's running loss and the population mean
/// loss after the hypothetical puncture. Rows are identical across
/// requests because the loss ledger does not distinguish who punctures.
pub fn build_cost_matrix(
    ledger: &RateLedger,
    alpha: &EmbbAllocation,
    rates: &ChannelState,
    served: usize,
    m_per_slot: usize,
) -> Vec<Vec<f64>> {
    debug_assert!(served >= 1);
    let e_n = alpha.alpha.len();
    let losses = ledger.slot_loss();
    let mean: f64 = losses.iter().sum::<f64>() / e_n as f64;
    let row: Vec<f64> = (0..e_n)
        .map(|e| {
            let held: Vec<usize> = alpha.holdings(e);
            let unit = if held.is_empty() {
                0.0
            } else {
                held.iter()
                    .map(|&k| rates.rb_rate_embb[e][k])
                    .sum::<f64>()
                    / (held.len() * m_per_slot) as f64
            };
            (mean - losses[e] - unit * (e_n as f64 - 1.0) / e_n as f64).abs()
        })
        .collect();
    vec![row; served]
}

/// Evaluates an arbitrary assignment against a cost matrix; used to
/// compare the optimizer's choice with fixed policies.
pub fn assignment_cost(cost: &[Vec<f64>], chi: &[Vec<u64>]) -> f64 {
    chi.iter()
        .zip(cost)
        .map(|(crow, prow)| {
            crow.iter()
                .zip(prow)
                .map(|(&q, &c)| q as f64 * c)
                .sum::<f64>()
        })
        .sum()
}

/// Admission: walks requests in arrival order, accumulating block
/// demand until the carrier is exhausted or a payload cannot be carried
/// at all within one mini-slot. Returns the demands of the admitted
/// prefix; everything after it is a violation.
pub(crate) fn admitted_demands(state: &MinislotState, batch: &UrllcBatch) -> Vec<u64> {
    let capacity: u64 = supply_vector(state.alpha).iter().sum();
    let mut demands: Vec<u64> = Vec::with_capacity(batch.arrivals);
    let mut committed = 0u64;
    for u in 0..batch.arrivals {
        let need = match required_rbs(batch.requests[u], &state.rates.rb_rate_urllc[u]) {
            Ok(n) => n as u64,
            Err(TrafficError::LatencyInfeasible { .. }) => break,
            Err(_) => unreachable!("required_rbs only fails on infeasible payloads"),
        };
        if committed + need > capacity {
            break;
        }
        committed += need;
        demands.push(need);
    }
    demands
}

/// Assembles a [`MinislotDecision`] from explicit per-request block
/// picks, pricing the implied assignment under the loss-balancing cost
/// matrix so that policies can be compared on equal footing.
pub(crate) fn decision_from_picks(
    state: &MinislotState,
    batch: &UrllcBatch,
    demands: Vec<u64>,
    picks: &[Vec<usize>],
) -> Result<MinislotDecision, PunctureError> {
    let e_n = state.alpha.alpha.len();
    let k_n = state.alpha.alpha.first().map_or(0, |r| r.len());
    let served = demands.len();
    let violations = batch.arrivals - served;

    let mut record = PunctureRecord::empty(served, k_n, batch.slot_index, batch.minislot_index);
    let mut punctured_per_user = vec![0usize; e_n];
    let mut transport_cost = 0.0;

    if served > 0 {
        for phi in record.phi.iter_mut() {
            *phi = true;
        }
        let mut chi = vec![vec![0u64; e_n]; served];
        for (u, rbs) in picks.iter().enumerate() {
            for &k in rbs {
                record.beta[u][k] = true;
                let e = state
                    .alpha
                    .owner_of(k)
                    .expect("picked blocks are always owned");
                punctured_per_user[e] += 1;
                chi[u][e] += 1;
            }
        }
        let cost = build_cost_matrix(state.ledger, state.alpha, state.rates, served, state.m_per_slot);
        transport_cost = assignment_cost(&cost, &chi);
        record.validate(state.alpha)?;
    }

    Ok(MinislotDecision {
        record,
        punctured_per_user,
        transport_cost,
        served,
        violations,
        demands,
    })
}

/// Hands out each victim's lowest-indexed blocks in turn; shared by
/// every puncturing policy so block identity stays deterministic.
pub(crate) struct VictimPool {
    holdings: Vec<Vec<usize>>,
    cursor: Vec<usize>,
}

impl VictimPool {
    pub(crate) fn new(alpha: &EmbbAllocation) -> Self {
        let holdings: Vec<Vec<usize>> = (0..alpha.alpha.len()).map(|e| alpha.holdings(e)).collect();
        let cursor = vec![0; holdings.len()];
        VictimPool { holdings, cursor }
    }

    pub(crate) fn remaining(&self, e: usize) -> usize {
        self.holdings[e].len() - self.cursor[e]
    }

    pub(crate) fn take_lowest(&mut self, e: usize) -> Option<usize> {
        let k = *self.holdings[e].get(self.cursor[e])?;
        self.cursor[e] += 1;
        Some(k)
    }
}

/// Serves the admission-feasible prefix of a request batch by solving
/// the loss-balancing transportation problem and converting the
/// assignment into punctured blocks (lowest indices of each victim
/// first). Requests beyond the prefix — too demanding for the carrier
/// or arriving after it is exhausted — are counted as violations.
pub fn schedule_minislot(
    state: &MinislotState,
    batch: &UrllcBatch,
) -> Result<MinislotDecision, PunctureError> {
    if state.rates.rb_rate_urllc.len() < batch.arrivals {
        return Err(PunctureError::MissingRates {
            have: state.rates.rb_rate_urllc.len(),
            need: batch.arrivals,
        });
    }
    let demands = admitted_demands(state, batch);
    let served = demands.len();

    let mut picks: Vec<Vec<usize>> = vec![Vec::new(); served];
    if served > 0 {
        let cost =
            build_cost_matrix(state.ledger, state.alpha, state.rates, served, state.m_per_slot);
        let solution = solve_transport(cost, demands.clone(), supply_vector(state.alpha))?;
        let mut pool = VictimPool::new(state.alpha);
        for (u, row) in solution.assignment.iter().enumerate() {
            for (e, &q) in row.iter().enumerate() {
                for _ in 0..q {
                    picks[u].push(pool.take_lowest(e).expect("assignment respects supply"));
                }
            }
        }
    }
    decision_from_picks(state, batch, demands, &picks)
}
