//! The discrete-time engine: slots carry broadband scheduling,
//! mini-slots carry low-latency arrivals and puncturing, and a
//! double-entry ledger reconciles every lost bit. Experiments fan the
//! engine out over schedulers × seeds with deterministic aggregation.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::baselines::{baseline_schedule, BaselinePolicy};
use crate::channel::{free_space_gain, rayleigh_power_fade, urllc_rb_rate, ChannelState};
use crate::embb_sched::{equal_split, heuristic_schedule, psum_schedule, SchedError};
use crate::model::{
    EmbbAllocation, ModelError, PunctureRecord, RateLedger, SystemConfig,
};
use crate::traffic::{draw_arrivals, TrafficError, UrllcBatch};
use crate::urllc_sched::{schedule_minislot, MinislotState, PunctureError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("slot {slot}: {source}")]
    Embb {
        slot: usize,
        #[source]
        source: SchedError,
    },
    #[error("slot {slot}, mini-slot {minislot}: {source}")]
    Puncture {
        slot: usize,
        minislot: usize,
        #[source]
        source: PunctureError,
    },
    #[error("slot {slot}: ledger rejected the update: {source}")]
    Ledger {
        slot: usize,
        #[source]
        source: ModelError,
    },
    #[error("slot {slot}, mini-slot {minislot}: arrival draw failed: {source}")]
    Traffic {
        slot: usize,
        minislot: usize,
        #[source]
        source: TrafficError,
    },
    #[error("accounting bug: loss {loss} exceeds nominal {nominal}")]
    Accounting { nominal: f64, loss: f64 },
    #[error("slot {slot}, mini-slot {minislot}: invariant violated: {detail}")]
    Invariant {
        slot: usize,
        minislot: usize,
        detail: String,
    },
    #[error("all per-user rates are zero; the fairness index is undefined")]
    DegenerateRates,
}

/// The seven scheduling policies the simulator can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchedulerId {
    /// Fairness-deviation optimizer on the slot level, transportation
    /// optimizer on the mini-slot level.
    Proposed,
    /// Loss-proportional slot heuristic with the same mini-slot
    /// optimizer.
    Heuristic,
    Ps,
    Mups,
    Rs,
    Eds,
    Mbs,
}

impl SchedulerId {
    pub const ALL: [SchedulerId; 7] = [
        SchedulerId::Proposed,
        SchedulerId::Heuristic,
        SchedulerId::Ps,
        SchedulerId::Mups,
        SchedulerId::Rs,
        SchedulerId::Eds,
        SchedulerId::Mbs,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchedulerId::Proposed => "proposed",
            SchedulerId::Heuristic => "heuristic",
            SchedulerId::Ps => "ps",
            SchedulerId::Mups => "mups",
            SchedulerId::Rs => "rs",
            SchedulerId::Eds => "eds",
            SchedulerId::Mbs => "mbs",
        }
    }

    /// Stream index for the policy-owned random draws. Stream 0 is the
    /// environment, shared by all schedulers so runs with the same seed
    /// see identical channels and traffic.
    fn policy_stream(&self) -> u64 {
        1 + Self::ALL.iter().position(|s| s == self).unwrap() as u64
    }
}

impl fmt::Display for SchedulerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown scheduler `{0}`; expected one of proposed, heuristic, ps, mups, rs, eds, mbs")]
pub struct ParseSchedulerError(String);

impl FromStr for SchedulerId {
    type Err = ParseSchedulerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchedulerId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| ParseSchedulerError(s.to_string()))
    }
}

/// How puncturing converts into lost broadband bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// Each punctured (block, mini-slot) cell forfeits 1/M of the
    /// block's slot rate — the physically consistent accounting.
    PerMinislot,
    /// Audit mode: each punctured cell forfeits the full slot rate, as
    /// a literal reading of the loss formula would have it. Losses are
    /// clipped at the nominal grant to keep the ledger solvent.
    LiteralSlotRate,
}

/// Lost bits per broadband user caused by one mini-slot's punctures.
pub fn accrue_loss(
    alpha: &EmbbAllocation,
    record: &PunctureRecord,
    rates: &ChannelState,
    m_per_slot: usize,
    mode: LossMode,
) -> Vec<f64> {
    let e_n = alpha.alpha.len();
    let mut loss = vec![0.0; e_n];
    let scale = match mode {
        LossMode::PerMinislot => 1.0 / m_per_slot as f64,
        LossMode::LiteralSlotRate => 1.0,
    };
    for row in &record.beta {
        for (k, &hit) in row.iter().enumerate() {
            if hit {
                if let Some(e) = alpha.owner_of(k) {
                    loss[e] += rates.rb_rate_embb[e][k] * scale;
                }
            }
        }
    }
    loss
}

/// Bits a user actually gets from a slot after puncturing.
pub fn actual_rate(nominal: f64, loss: f64) -> Result<f64, SimError> {
    if loss > nominal + 1e-9 * nominal.max(1.0) {
        return Err(SimError::Accounting { nominal, loss });
    }
    Ok((nominal - loss).max(0.0))
}

/// Minimum expected achieved rate across users.
pub fn mear(per_ue_expected: &[f64]) -> f64 {
    assert!(!per_ue_expected.is_empty(), "need at least one user");
    per_ue_expected.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Jain's index (Σx)² / (n·Σx²): 1 when everyone gets the same rate,
/// 1/n when one user takes everything.
pub fn jain_fairness(per_ue_expected: &[f64]) -> Result<f64, SimError> {
    let n = per_ue_expected.len();
    assert!(n > 0, "need at least one user");
    let sum: f64 = per_ue_expected.iter().sum();
    let sq: f64 = per_ue_expected.iter().map(|x| x * x).sum();
    if sq == 0.0 {
        return Err(SimError::DegenerateRates);
    }
    Ok(sum * sum / (n as f64 * sq))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Use the literal slot-rate loss accounting (audit mode).
    pub literal_eq10: bool,
    /// Re-derive and assert structural invariants every slot and
    /// mini-slot (allocation shape, puncture containment, loss
    /// conservation, fairness bounds).
    pub check_invariants: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            literal_eq10: false,
            check_invariants: true,
        }
    }
}

/// Counters that explain a run without affecting its metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunDiagnostics {
    /// Requests drawn over the whole horizon.
    pub arrivals: u64,
    /// Requests served in the mini-slot after their arrival.
    pub served: u64,
    /// Served requests that crossed a slot boundary (arrived in the
    /// last mini-slot, served against the next slot's allocation).
    pub boundary_served: u64,
    /// Requests pending when the horizon ended; dropped, not counted
    /// as violations.
    pub dropped_arrivals: u64,
    /// Loss clipped at the nominal grant (nonzero only in audit mode).
    pub clipped_loss_bits: f64,
}

/// Outcome of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub scheduler: SchedulerId,
    pub seed: u64,
    /// Mean achieved bits per slot, per broadband user.
    pub per_ue_rate: Vec<f64>,
    /// Minimum of `per_ue_rate`.
    pub mear_bits: f64,
    /// Jain index of `per_ue_rate`.
    pub fairness: f64,
    /// Requests not served in the mini-slot after their arrival.
    pub violation_count: u64,
    pub diagnostics: RunDiagnostics,
}

struct Pending {
    batch: UrllcBatch,
    rate_rows: Vec<Vec<f64>>,
}

/// Runs one scheduler over the configured horizon with a fixed seed.
/// The environment (positions, fades, arrivals) is drawn from a stream
/// keyed by the seed alone, so different schedulers face identical
/// conditions; policy-internal randomness uses a per-scheduler stream.
pub fn run_simulation(
    cfg: &SystemConfig,
    scheduler: SchedulerId,
    seed: u64,
    options: &SimOptions,
) -> Result<RunResult, SimError> {
    let e_n = cfg.n_embb;
    let k_n = cfg.n_rb;
    let m_n = cfg.minislots_per_slot;
    let mode = if options.literal_eq10 {
        LossMode::LiteralSlotRate
    } else {
        LossMode::PerMinislot
    };

    let mut env = ChaCha12Rng::seed_from_u64(seed);
    env.set_stream(0);
    let mut policy = ChaCha12Rng::seed_from_u64(seed);
    policy.set_stream(scheduler.policy_stream());

    // Broadband users keep their positions for the whole run; fading
    // redraws every slot.
    let static_gain: Vec<f64> = (0..e_n)
        .map(|_| free_space_gain(draw_distance(&mut env, cfg.cell_radius_m), cfg.carrier_hz))
        .collect::<Result<_, _>>()
        .expect("distances are clamped away from zero");

    let payload = cfg.payload_bits();
    let mut ledger = RateLedger::new(e_n);
    let mut diagnostics = RunDiagnostics::default();
    let mut violations = 0u64;
    let mut pending: Option<Pending> = None;

    for t in 1..=cfg.n_slots {
        let gains: Vec<f64> = static_gain
            .iter()
            .map(|&g| g * rayleigh_power_fade(&mut env))
            .collect();
        let state = ChannelState::for_slot(cfg, &gains);

        let alpha = match scheduler {
            SchedulerId::Proposed => psum_schedule(&ledger, &state, t, &cfg.psum),
            SchedulerId::Heuristic | SchedulerId::Mbs => {
                heuristic_schedule(&ledger, t, k_n, e_n)
            }
            _ => Ok(equal_split(k_n, e_n, t)),
        }
        .map_err(|source| SimError::Embb { slot: t, source })?;
        if options.check_invariants {
            alpha
                .validate(e_n, k_n)
                .map_err(|source| SimError::Ledger { slot: t, source })?;
        }

        let nominal: Vec<f64> = (0..e_n)
            .map(|e| {
                alpha.alpha[e]
                    .iter()
                    .zip(&state.rb_rate_embb[e])
                    .map(|(&a, r)| if a { *r } else { 0.0 })
                    .sum()
            })
            .collect();
        ledger
            .begin_slot(nominal)
            .map_err(|source| SimError::Ledger { slot: t, source })?;

        for m in 1..=m_n {
            // Serve what arrived one mini-slot ago (possibly across the
            // slot boundary), then draw this mini-slot's arrivals.
            if let Some(p) = pending.take() {
                serve_batch(
                    cfg, scheduler, &alpha, &state, &mut ledger, &p, t, m, mode, options,
                    &mut policy, &mut diagnostics, &mut violations,
                )?;
            }
            let arrivals = draw_arrivals(cfg.arrival_mean, cfg.arrival_std, &mut env)
                .map_err(|source| SimError::Traffic {
                    slot: t,
                    minislot: m,
                    source,
                })? as usize;
            diagnostics.arrivals += arrivals as u64;
            let mut rate_rows = Vec::with_capacity(arrivals);
            for _ in 0..arrivals {
                let gain = free_space_gain(draw_distance(&mut env, cfg.cell_radius_m), cfg.carrier_hz)
                    .expect("distances are clamped away from zero")
                    * rayleigh_power_fade(&mut env);
                let rate = urllc_rb_rate(
                    gain,
                    cfg.p_urllc_mw(),
                    cfg.noise_mw_hz(),
                    cfg.bandwidth_hz,
                    cfg.minislot_s,
                    cfg.decode_err,
                    cfg.blocklength(),
                );
                rate_rows.push(vec![rate; k_n]);
            }
            pending = Some(Pending {
                batch: UrllcBatch::uniform(arrivals, payload, t, m),
                rate_rows,
            });
        }

        ledger
            .end_slot()
            .map_err(|source| SimError::Ledger { slot: t, source })?;
    }

    if let Some(p) = pending.take() {
        diagnostics.dropped_arrivals += p.batch.arrivals as u64;
    }
    if options.check_invariants && !ledger.replay_matches(1e-9) {
        return Err(SimError::Invariant {
            slot: cfg.n_slots,
            minislot: m_n,
            detail: "ledger replay does not reproduce cumulative rates".into(),
        });
    }

    let t_f = cfg.n_slots as f64;
    let per_ue_rate: Vec<f64> = ledger.cumulative().iter().map(|c| c / t_f).collect();
    let mear_bits = mear(&per_ue_rate);
    let fairness = jain_fairness(&per_ue_rate)?;
    if options.check_invariants {
        let lo = 1.0 / e_n as f64;
        if !(lo - 1e-12..=1.0 + 1e-12).contains(&fairness) {
            return Err(SimError::Invariant {
                slot: cfg.n_slots,
                minislot: m_n,
                detail: format!("fairness {fairness} outside [{lo}, 1]"),
            });
        }
    }
    Ok(RunResult {
        scheduler,
        seed,
        per_ue_rate,
        mear_bits,
        fairness,
        violation_count: violations,
        diagnostics,
    })
}

#[allow(clippy::too_many_arguments)]
fn serve_batch(
    cfg: &SystemConfig,
    scheduler: SchedulerId,
    alpha: &EmbbAllocation,
    state: &ChannelState,
    ledger: &mut RateLedger,
    pending: &Pending,
    t: usize,
    m: usize,
    mode: LossMode,
    options: &SimOptions,
    policy: &mut ChaCha12Rng,
    diagnostics: &mut RunDiagnostics,
    violations: &mut u64,
) -> Result<(), SimError> {
    if pending.batch.is_empty() {
        return Ok(());
    }
    let mut serving_state = state.clone();
    serving_state.set_urllc_rows(pending.rate_rows.clone());
    let minislot_state = MinislotState {
        alpha,
        ledger,
        rates: &serving_state,
        m_per_slot: cfg.minislots_per_slot,
    };
    let decision = match scheduler {
        SchedulerId::Proposed | SchedulerId::Heuristic => {
            schedule_minislot(&minislot_state, &pending.batch)
        }
        SchedulerId::Ps => {
            baseline_schedule(BaselinePolicy::Ps, &minislot_state, &pending.batch, policy)
        }
        SchedulerId::Mups => {
            baseline_schedule(BaselinePolicy::Mups, &minislot_state, &pending.batch, policy)
        }
        SchedulerId::Rs => {
            baseline_schedule(BaselinePolicy::Rs, &minislot_state, &pending.batch, policy)
        }
        SchedulerId::Eds => {
            baseline_schedule(BaselinePolicy::Eds, &minislot_state, &pending.batch, policy)
        }
        SchedulerId::Mbs => {
            baseline_schedule(BaselinePolicy::Mbs, &minislot_state, &pending.batch, policy)
        }
    }
    .map_err(|source| SimError::Puncture {
        slot: t,
        minislot: m,
        source,
    })?;

    *violations += decision.violations as u64;
    diagnostics.served += decision.served as u64;
    if pending.batch.slot_index != t {
        diagnostics.boundary_served += decision.served as u64;
    }

    let raw_loss = accrue_loss(alpha, &decision.record, state, cfg.minislots_per_slot, mode);
    // Clip at what the grant can still cover; only the audit mode can
    // actually hit the ceiling.
    let mut posted = raw_loss;
    for (e, loss) in posted.iter_mut().enumerate() {
        let remaining =
            (ledger.slot_nominal()[e] - ledger.slot_loss()[e]).max(0.0);
        if *loss > remaining {
            diagnostics.clipped_loss_bits += *loss - remaining;
            *loss = remaining;
        }
    }
    if options.check_invariants {
        if mode == LossMode::PerMinislot && diagnostics.clipped_loss_bits > 1e-6 {
            return Err(SimError::Invariant {
                slot: t,
                minislot: m,
                detail: "per-mini-slot losses exceeded the nominal grant".into(),
            });
        }
        // Double entry: what the ledger is told must equal an
        // independent recount of the punctured cells.
        let recount: f64 = decision
            .record
            .beta
            .iter()
            .flat_map(|row| row.iter().enumerate())
            .filter(|(_, &hit)| hit)
            .map(|(k, _)| {
                let e = alpha.owner_of(k).expect("validated record");
                state.rb_rate_embb[e][k]
                    / if mode == LossMode::PerMinislot {
                        cfg.minislots_per_slot as f64
                    } else {
                        1.0
                    }
            })
            .sum();
        let posted_total: f64 = posted.iter().sum();
        let clip_ok = mode == LossMode::LiteralSlotRate;
        if !clip_ok && (recount - posted_total).abs() > 1e-6 * recount.max(1.0) {
            return Err(SimError::Invariant {
                slot: t,
                minislot: m,
                detail: format!(
                    "loss conservation broke: posted {posted_total}, recounted {recount}"
                ),
            });
        }
    }
    ledger
        .add_loss(&posted)
        .map_err(|source| SimError::Ledger { slot: t, source })?;
    Ok(())
}

fn draw_distance<R: Rng + ?Sized>(rng: &mut R, radius_m: f64) -> f64 {
    // Uniform over the disc, kept at least a metre from the mast.
    (radius_m * rng.random::<f64>().sqrt()).max(1.0)
}

/// One (scheduler, seed) cell of an experiment.
#[derive(Debug)]
pub struct CellOutcome {
    pub scheduler: SchedulerId,
    pub seed: u64,
    pub result: Result<RunResult, SimError>,
}

/// Results of a scheduler × seed sweep, in deterministic cell order.
#[derive(Debug)]
pub struct ExperimentReport {
    pub cells: Vec<CellOutcome>,
}

impl ExperimentReport {
    pub fn runs(&self, scheduler: SchedulerId) -> impl Iterator<Item = &RunResult> {
        self.cells
            .iter()
            .filter(move |c| c.scheduler == scheduler)
            .filter_map(|c| c.result.as_ref().ok())
    }

    pub fn mean_mear(&self, scheduler: SchedulerId) -> Option<f64> {
        mean(self.runs(scheduler).map(|r| r.mear_bits))
    }

    pub fn mean_fairness(&self, scheduler: SchedulerId) -> Option<f64> {
        mean(self.runs(scheduler).map(|r| r.fairness))
    }

    /// Violations divided by arrivals, pooled over all runs of one
    /// scheduler.
    pub fn violation_rate(&self, scheduler: SchedulerId) -> Option<f64> {
        let mut violations = 0u64;
        let mut arrivals = 0u64;
        let mut any = false;
        for run in self.runs(scheduler) {
            violations += run.violation_count;
            arrivals += run.diagnostics.arrivals;
            any = true;
        }
        if !any {
            return None;
        }
        Some(if arrivals == 0 {
            0.0
        } else {
            violations as f64 / arrivals as f64
        })
    }

    /// Empirical distribution of per-run minimum expected rates:
    /// ascending (value, cumulative probability) pairs.
    pub fn ecdf(&self, scheduler: SchedulerId) -> Vec<(f64, f64)> {
        let mut values: Vec<f64> = self.runs(scheduler).map(|r| r.mear_bits).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = values.len() as f64;
        values
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, (i + 1) as f64 / n))
            .collect()
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Runs every scheduler over every seed. Cells execute concurrently
/// (capped by the SCHED_SIM_THREADS environment variable) but are
/// reduced in deterministic order, so concurrency never changes the
/// report. A failed cell carries its error; the rest complete.
pub fn run_experiment(
    cfg: &SystemConfig,
    schedulers: &[SchedulerId],
    seeds: &[u64],
    options: &SimOptions,
) -> ExperimentReport {
    let cells: Vec<(SchedulerId, u64)> = schedulers
        .iter()
        .flat_map(|&s| seeds.iter().map(move |&z| (s, z)))
        .collect();
    let run_cell = |&(scheduler, seed): &(SchedulerId, u64)| CellOutcome {
        scheduler,
        seed,
        result: run_simulation(cfg, scheduler, seed, options),
    };
    let cells = match thread_pool() {
        Some(pool) => pool.install(|| cells.par_iter().map(run_cell).collect()),
        None => cells.iter().map(run_cell).collect(),
    };
    ExperimentReport { cells }
}

fn thread_pool() -> Option<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("SCHED_SIM_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            builder = builder.num_threads(n.max(1));
        }
    }
    builder.build().ok()
}
