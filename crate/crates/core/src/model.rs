//! System model: configuration, slot/mini-slot timing, allocation
//! matrices and double-entry rate accounting.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

/// Tolerance used when checking that the mini-slot grid tiles a slot.
const TIMING_REL_TOL: f64 = 1e-9;
/// Slack allowed when comparing accumulated loss against nominal rate.
pub(crate) const LOSS_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config field `{field}` must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("config field `{field}` must be finite, got {value}")]
    NonFinite { field: &'static str, value: f64 },
    #[error("n_embb must be at least 1")]
    NoUsers,
    #[error("n_rb ({n_rb}) must be at least n_embb ({n_embb}) so every broadband user can hold a resource block")]
    TooFewResourceBlocks { n_rb: usize, n_embb: usize },
    #[error("slot timing mismatch: {minislots_per_slot} mini-slots of {minislot_s} s do not tile a {slot_s} s slot")]
    SlotTiming {
        minislots_per_slot: usize,
        minislot_s: f64,
        slot_s: f64,
    },
    #[error("config field `{field}` must lie strictly inside (0, 1), got {value}")]
    NotProbability { field: &'static str, value: f64 },
    #[error("penalty exponent p must lie strictly inside (0, 1), got {value}")]
    PenaltyExponent { value: f64 },
    #[error("smoothing decay eta must lie strictly inside (0, 1), got {value}")]
    EtaRange { value: f64 },
    #[error("penalty growth zeta must be greater than 1, got {value}")]
    ZetaRange { value: f64 },
    #[error("penalty schedule needs at least one iteration")]
    NoIterations,
    #[error("failed to read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: key `{key}` given more than once")]
    DuplicateKey { line: usize, key: String },
    #[error("config line {line}: could not parse value `{value}` for key `{key}`: {reason}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
}

/// Schedule parameters for the smoothed p-norm penalty method used by
/// the relaxation-based slot scheduler.
#[derive(Debug, Clone, PartialEq)]
pub struct PsumParams {
    /// Initial penalty weight.
    pub sigma1: f64,
    /// Initial smoothing offset added inside the p-norm.
    pub eps1: f64,
    /// Multiplicative decay applied to the smoothing offset each iteration.
    pub eta: f64,
    /// Multiplicative growth applied to the penalty weight each iteration.
    pub zeta: f64,
    /// Maximum number of penalty iterations per slot.
    pub i_max: u32,
    /// Exponent of the concave p-norm, in (0, 1).
    pub p: f64,
    /// Entries within this distance of {0, 1} count as binary.
    pub binary_tol: f64,
}

impl Default for PsumParams {
    fn default() -> Self {
        Self {
            sigma1: 2.0,
            eps1: 1e-3,
            eta: 0.7,
            zeta: 1.1,
            i_max: 20,
            p: 0.5,
            binary_tol: 1e-6,
        }
    }
}

impl PsumParams {
    fn validate(&self) -> Result<(), ConfigError> {
        for (field, value) in [
            ("psum.sigma1", self.sigma1),
            ("psum.eps1", self.eps1),
            ("psum.binary_tol", self.binary_tol),
        ] {
            if !value.is_finite() {
                return Err(ConfigError::NonFinite { field, value });
            }
            if value <= 0.0 {
                return Err(ConfigError::NonPositive { field, value });
            }
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(ConfigError::PenaltyExponent { value: self.p });
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(ConfigError::EtaRange { value: self.eta });
        }
        if !(self.zeta > 1.0) || !self.zeta.is_finite() {
            return Err(ConfigError::ZetaRange { value: self.zeta });
        }
        if self.i_max == 0 {
            return Err(ConfigError::NoIterations);
        }
        Ok(())
    }
}

/// Full description of one simulated cell.
///
/// All radio powers are stored in dBm as configured; the `_mw`
/// accessors convert on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Number of broadband (slot-granular) users.
    pub n_embb: usize,
    /// Number of schedulable resource blocks per slot.
    pub n_rb: usize,
    /// Bandwidth of one resource block in Hz.
    pub bandwidth_hz: f64,
    /// Slot duration in seconds.
    pub slot_s: f64,
    /// Mini-slot duration in seconds.
    pub minislot_s: f64,
    /// Mini-slots per slot; must tile the slot exactly.
    pub minislots_per_slot: usize,
    /// Horizon in slots.
    pub n_slots: usize,
    /// Transmit power towards broadband users, dBm.
    pub p_embb_dbm: f64,
    /// Transmit power towards low-latency users, dBm.
    pub p_urllc_dbm: f64,
    /// Noise power spectral density, dBm per Hz.
    pub noise_dbm_hz: f64,
    /// Mean of the Gaussian mini-slot arrival count.
    pub arrival_mean: f64,
    /// Standard deviation of the Gaussian mini-slot arrival count.
    pub arrival_std: f64,
    /// Outage probability budget for admission sizing, in (0, 1).
    pub reliability_eps: f64,
    /// Low-latency payload size in bytes.
    pub payload_bytes: u32,
    /// Decoding error probability used by the finite-blocklength rate.
    pub decode_err: f64,
    /// Cell radius in metres; users are dropped uniformly over the disc.
    pub cell_radius_m: f64,
    /// Carrier frequency in Hz, used by the distance-dependent gain.
    pub carrier_hz: f64,
    /// Blocklength in symbols for the finite-blocklength rate. When
    /// `None` it defaults to `minislot_s * bandwidth_hz`.
    pub blocklength_symbols: Option<f64>,
    /// Penalty-method schedule.
    pub psum: PsumParams,
    /// True when `arrival_mean` was set explicitly (in a file or by a
    /// caller) rather than inherited from `arrival_std`.
    pub arrival_mean_explicit: bool,
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

impl Default for SystemConfig {
    /// The reference cell: 10 broadband users, 50 resource blocks of
    /// 180 kHz, 1 ms slots split into eight mini-slots, 21 dBm on both
    /// links and a noise floor of -114 dBm per resource block.
    fn default() -> Self {
        Self {
            n_embb: 10,
            n_rb: 50,
            bandwidth_hz: 180e3,
            slot_s: 1e-3,
            minislot_s: 0.125e-3,
            minislots_per_slot: 8,
            n_slots: 1000,
            p_embb_dbm: 21.0,
            p_urllc_dbm: 21.0,
            // -114 dBm of total noise in one 180 kHz resource block.
            noise_dbm_hz: -114.0 - 10.0 * (180e3f64).log10(),
            arrival_mean: 5.0,
            arrival_std: 5.0,
            reliability_eps: 0.01,
            payload_bytes: 32,
            decode_err: 1e-5,
            cell_radius_m: 250.0,
            carrier_hz: 2.0e9,
            blocklength_symbols: None,
            psum: PsumParams::default(),
            arrival_mean_explicit: false,
        }
    }
}

impl SystemConfig {
    /// Checks every structural invariant. Returns the first violated
    /// invariant.
    pub fn validate(self) -> Result<Self, ConfigError> {
        if self.n_embb == 0 {
            return Err(ConfigError::NoUsers);
        }
        if self.n_rb < self.n_embb {
            return Err(ConfigError::TooFewResourceBlocks {
                n_rb: self.n_rb,
                n_embb: self.n_embb,
            });
        }
        for (field, value) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("slot_s", self.slot_s),
            ("minislot_s", self.minislot_s),
            ("cell_radius_m", self.cell_radius_m),
            ("carrier_hz", self.carrier_hz),
        ] {
            if !value.is_finite() {
                return Err(ConfigError::NonFinite { field, value });
            }
            if value <= 0.0 {
                return Err(ConfigError::NonPositive { field, value });
            }
        }
        for (field, value) in [
            ("p_embb_dbm", self.p_embb_dbm),
            ("p_urllc_dbm", self.p_urllc_dbm),
            ("noise_dbm_hz", self.noise_dbm_hz),
            ("arrival_mean", self.arrival_mean),
        ] {
            if !value.is_finite() {
                return Err(ConfigError::NonFinite { field, value });
            }
        }
        if !self.arrival_std.is_finite() {
            return Err(ConfigError::NonFinite {
                field: "arrival_std",
                value: self.arrival_std,
            });
        }
        if self.arrival_std < 0.0 {
            return Err(ConfigError::NonPositive {
                field: "arrival_std",
                value: self.arrival_std,
            });
        }
        if self.n_slots == 0 {
            return Err(ConfigError::NonPositive {
                field: "n_slots",
                value: 0.0,
            });
        }
        if self.minislots_per_slot == 0 {
            return Err(ConfigError::NonPositive {
                field: "minislots_per_slot",
                value: 0.0,
            });
        }
        let tiled = self.minislots_per_slot as f64 * self.minislot_s;
        if (tiled - self.slot_s).abs() > TIMING_REL_TOL * self.slot_s {
            return Err(ConfigError::SlotTiming {
                minislots_per_slot: self.minislots_per_slot,
                minislot_s: self.minislot_s,
                slot_s: self.slot_s,
            });
        }
        for (field, value) in [
            ("reliability_eps", self.reliability_eps),
            ("decode_err", self.decode_err),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(ConfigError::NotProbability { field, value });
            }
        }
        if let Some(n) = self.blocklength_symbols {
            if !n.is_finite() {
                return Err(ConfigError::NonFinite {
                    field: "blocklength_symbols",
                    value: n,
                });
            }
            if n <= 0.0 {
                return Err(ConfigError::NonPositive {
                    field: "blocklength_symbols",
                    value: n,
                });
            }
        }
        self.psum.validate()?;
        Ok(self)
    }

    /// Broadband transmit power in mW.
    pub fn p_embb_mw(&self) -> f64 {
        dbm_to_mw(self.p_embb_dbm)
    }

    /// Low-latency transmit power in mW.
    pub fn p_urllc_mw(&self) -> f64 {
        dbm_to_mw(self.p_urllc_dbm)
    }

    /// Noise spectral density in mW per Hz.
    pub fn noise_mw_hz(&self) -> f64 {
        dbm_to_mw(self.noise_dbm_hz)
    }

    /// Noise power in one resource block, mW.
    pub fn noise_rb_mw(&self) -> f64 {
        self.noise_mw_hz() * self.bandwidth_hz
    }

    /// Payload size in bits.
    pub fn payload_bits(&self) -> u64 {
        self.payload_bytes as u64 * 8
    }

    /// Blocklength in symbols, applying the mini-slot default.
    pub fn blocklength(&self) -> f64 {
        self.blocklength_symbols
            .unwrap_or(self.minislot_s * self.bandwidth_hz)
    }

    /// Total mini-slots over the horizon.
    pub fn total_minislots(&self) -> u64 {
        self.n_slots as u64 * self.minislots_per_slot as u64
    }

    /// Parses a flat `key = value` config file and validates the result.
    /// Unlisted keys keep their defaults; unknown keys are an error.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str(&text)
    }

    /// Sets one named field from its textual form, as the config parser
    /// and sweep machinery do. `line` is only used in error messages.
    fn set_key(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        fn parse<T: FromStr>(
            key: &str,
            value: &str,
            line: usize,
        ) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::BadValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
                reason: e.to_string(),
            })
        }

        match key {
            "n_embb" => self.n_embb = parse(key, value, line)?,
            "n_rb" => self.n_rb = parse(key, value, line)?,
            "bandwidth_hz" => self.bandwidth_hz = parse(key, value, line)?,
            "slot_s" => self.slot_s = parse(key, value, line)?,
            "minislot_s" => self.minislot_s = parse(key, value, line)?,
            "minislots_per_slot" => self.minislots_per_slot = parse(key, value, line)?,
            "n_slots" => self.n_slots = parse(key, value, line)?,
            "p_embb_dbm" => self.p_embb_dbm = parse(key, value, line)?,
            "p_urllc_dbm" => self.p_urllc_dbm = parse(key, value, line)?,
            "noise_dbm_hz" => self.noise_dbm_hz = parse(key, value, line)?,
            "arrival_mean" => {
                self.arrival_mean = parse(key, value, line)?;
                self.arrival_mean_explicit = true;
            }
            "arrival_std" => {
                self.arrival_std = parse(key, value, line)?;
                if !self.arrival_mean_explicit {
                    self.arrival_mean = self.arrival_std;
                }
            }
            "reliability_eps" => self.reliability_eps = parse(key, value, line)?,
            "payload_bytes" => self.payload_bytes = parse(key, value, line)?,
            "decode_err" => self.decode_err = parse(key, value, line)?,
            "cell_radius_m" => self.cell_radius_m = parse(key, value, line)?,
            "carrier_hz" => self.carrier_hz = parse(key, value, line)?,
            "blocklength_symbols" => {
                self.blocklength_symbols = Some(parse(key, value, line)?)
            }
            "psum.sigma1" => self.psum.sigma1 = parse(key, value, line)?,
            "psum.eps1" => self.psum.eps1 = parse(key, value, line)?,
            "psum.eta" => self.psum.eta = parse(key, value, line)?,
            "psum.zeta" => self.psum.zeta = parse(key, value, line)?,
            "psum.i_max" => self.psum.i_max = parse(key, value, line)?,
            "psum.p" => self.psum.p = parse(key, value, line)?,
            "psum.binary_tol" => self.psum.binary_tol = parse(key, value, line)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }
}

impl FromStr for SystemConfig {
    type Err = ConfigError;

    /// Parses `key = value` lines; `#` starts a comment, blank lines are
    /// skipped. Arrival mean defaults to the arrival standard deviation
    /// unless set explicitly.
    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = SystemConfig::default();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Malformed {
                line: line_no,
                text: raw.trim().to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Malformed {
                    line: line_no,
                    text: raw.trim().to_string(),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey {
                    line: line_no,
                    key: key.to_string(),
                });
            }
            cfg.set_key(key, value, line_no)?;
        }
        cfg.validate()
    }
}

/// Applies one `key=value` override (used by parameter sweeps) and
/// re-validates. Sweeping the arrival standard deviation also moves the
/// mean unless the mean was set explicitly.
pub fn apply_override(
    cfg: &SystemConfig,
    key: &str,
    value: &str,
) -> Result<SystemConfig, ConfigError> {
    let mut next = cfg.clone();
    next.set_key(key, value, 0)?;
    next.validate()
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("allocation shape {rows}x{cols} does not match {n_embb} users x {n_rb} resource blocks")]
    AllocationShape {
        rows: usize,
        cols: usize,
        n_embb: usize,
        n_rb: usize,
    },
    #[error("resource block {rb} is granted to more than one broadband user")]
    RbDoubleGrant { rb: usize },
    #[error("broadband user {ue} holds no resource block")]
    UserStarved { ue: usize },
    #[error("allocation grants {granted} resource blocks but only {n_rb} exist")]
    OverGrant { granted: usize, n_rb: usize },
    #[error("puncture shape {rows}x{cols} does not match {requests} requests x {n_rb} resource blocks")]
    PunctureShape {
        rows: usize,
        cols: usize,
        requests: usize,
        n_rb: usize,
    },
    #[error("resource block {rb} is punctured by more than one request in the same mini-slot")]
    RbDoublePuncture { rb: usize },
    #[error("request {request} holds resource blocks but is not marked served")]
    UnservedNonEmpty { request: usize },
    #[error("mini-slot punctures {punctured} resource blocks but only {n_rb} exist")]
    OverPuncture { punctured: usize, n_rb: usize },
    #[error("request {request} punctures resource block {rb} that no broadband user holds")]
    PunctureUnheld { request: usize, rb: usize },
    #[error("ledger expected {expected} users, got {got}")]
    LedgerShape { expected: usize, got: usize },
    #[error("slot {slot}: accumulated loss {loss} for user {ue} exceeds nominal rate {nominal}")]
    LossExceedsNominal {
        slot: usize,
        ue: usize,
        loss: f64,
        nominal: f64,
    },
    #[error("ledger has no open slot")]
    NoOpenSlot,
    #[error("ledger already has an open slot")]
    SlotAlreadyOpen,
}

/// Binary slot-level grant matrix: `alpha[e][k]` is true when broadband
/// user `e` holds resource block `k` for the slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbbAllocation {
    pub alpha: Vec<Vec<bool>>,
    pub slot_index: usize,
}

impl EmbbAllocation {
    /// Builds contiguous per-user blocks from RB counts, covering
    /// resource blocks from index 0 upward in user order.
    pub fn from_counts(counts: &[usize], n_rb: usize, slot_index: usize) -> Self {
        let mut alpha = vec![vec![false; n_rb]; counts.len()];
        let mut next = 0usize;
        for (e, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                if next < n_rb {
                    alpha[e][next] = true;
                    next += 1;
                }
            }
        }
        Self { alpha, slot_index }
    }

    pub fn n_embb(&self) -> usize {
        self.alpha.len()
    }

    pub fn n_rb(&self) -> usize {
        self.alpha.first().map_or(0, |row| row.len())
    }

    /// Number of resource blocks each user holds.
    pub fn rb_counts(&self) -> Vec<usize> {
        self.alpha
            .iter()
            .map(|row| row.iter().filter(|&&b| b).count())
            .collect()
    }

    /// Indices of the resource blocks user `e` holds, ascending.
    pub fn holdings(&self, e: usize) -> Vec<usize> {
        self.alpha[e]
            .iter()
            .enumerate()
            .filter_map(|(k, &b)| b.then_some(k))
            .collect()
    }

    /// The user holding resource block `k`, if any.
    pub fn owner_of(&self, k: usize) -> Option<usize> {
        (0..self.alpha.len()).find(|&e| self.alpha[e][k])
    }

    /// Checks exclusivity per resource block, the one-block floor per
    /// user, and the total grant budget.
    pub fn validate(&self, n_embb: usize, n_rb: usize) -> Result<(), ModelError> {
        if self.alpha.len() != n_embb || self.alpha.iter().any(|row| row.len() != n_rb) {
            return Err(ModelError::AllocationShape {
                rows: self.alpha.len(),
                cols: self.alpha.first().map_or(0, |r| r.len()),
                n_embb,
                n_rb,
            });
        }
        for k in 0..n_rb {
            let users = self.alpha.iter().filter(|row| row[k]).count();
            if users > 1 {
                return Err(ModelError::RbDoubleGrant { rb: k });
            }
        }
        for (e, row) in self.alpha.iter().enumerate() {
            if !row.iter().any(|&b| b) {
                return Err(ModelError::UserStarved { ue: e });
            }
        }
        let granted: usize = self.rb_counts().iter().sum();
        if granted > n_rb {
            return Err(ModelError::OverGrant { granted, n_rb });
        }
        Ok(())
    }
}

/// One mini-slot of puncturing: which request hit which resource block,
/// and which requests were served at all.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PunctureRecord {
    /// `beta[u][k]` is true when request `u` punctures resource block `k`.
    pub beta: Vec<Vec<bool>>,
    /// Service indicator per request in arrival order.
    pub phi: Vec<bool>,
    pub slot_index: usize,
    pub minislot_index: usize,
}

impl PunctureRecord {
    pub fn empty(requests: usize, n_rb: usize, slot_index: usize, minislot_index: usize) -> Self {
        Self {
            beta: vec![vec![false; n_rb]; requests],
            phi: vec![false; requests],
            slot_index,
            minislot_index,
        }
    }

    /// Resource blocks punctured per broadband user under `alloc`.
    pub fn punctured_per_user(&self, alloc: &EmbbAllocation) -> Vec<u64> {
        let mut out = vec![0u64; alloc.n_embb()];
        for row in &self.beta {
            for (k, &hit) in row.iter().enumerate() {
                if hit {
                    if let Some(e) = alloc.owner_of(k) {
                        out[e] += 1;
                    }
                }
            }
        }
        out
    }

    pub fn total_punctured(&self) -> usize {
        self.beta
            .iter()
            .map(|row| row.iter().filter(|&&b| b).count())
            .sum()
    }

    /// Checks per-block exclusivity, agreement between the service flags
    /// and the puncture rows, the total budget, and containment inside
    /// the slot allocation.
    pub fn validate(&self, alloc: &EmbbAllocation) -> Result<(), ModelError> {
        let n_rb = alloc.n_rb();
        if self.beta.len() != self.phi.len() || self.beta.iter().any(|row| row.len() != n_rb) {
            return Err(ModelError::PunctureShape {
                rows: self.beta.len(),
                cols: self.beta.first().map_or(0, |r| r.len()),
                requests: self.phi.len(),
                n_rb,
            });
        }
        for k in 0..n_rb {
            let hits = self.beta.iter().filter(|row| row[k]).count();
            if hits > 1 {
                return Err(ModelError::RbDoublePuncture { rb: k });
            }
        }
        for (u, row) in self.beta.iter().enumerate() {
            // A served request may puncture nothing (empty payload),
            // but an unserved one must not hold any block.
            if !self.phi[u] && row.iter().any(|&b| b) {
                return Err(ModelError::UnservedNonEmpty { request: u });
            }
            for (k, &hit) in row.iter().enumerate() {
                if hit && alloc.owner_of(k).is_none() {
                    return Err(ModelError::PunctureUnheld { request: u, rb: k });
                }
            }
        }
        let total = self.total_punctured();
        if total > n_rb {
            return Err(ModelError::OverPuncture {
                punctured: total,
                n_rb,
            });
        }
        Ok(())
    }
}

/// Double-entry per-user rate accounting: nominal grants are credited
/// when a slot opens, puncturing losses are debited mini-slot by
/// mini-slot, and the difference accumulates when the slot closes.
#[derive(Debug, Clone, PartialEq)]
pub struct RateLedger {
    n_embb: usize,
    cumulative: Vec<f64>,
    slot_nominal: Vec<f64>,
    slot_loss: Vec<f64>,
    prev_slot_loss: Vec<f64>,
    history: Vec<SlotEntry>,
    open: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct SlotEntry {
    nominal: Vec<f64>,
    loss: Vec<f64>,
}

impl RateLedger {
    pub fn new(n_embb: usize) -> Self {
        Self {
            n_embb,
            cumulative: vec![0.0; n_embb],
            slot_nominal: vec![0.0; n_embb],
            slot_loss: vec![0.0; n_embb],
            prev_slot_loss: vec![0.0; n_embb],
            history: Vec::new(),
            open: false,
        }
    }

    pub fn n_embb(&self) -> usize {
        self.n_embb
    }

    /// Credits the nominal per-slot rates granted by the new slot's
    /// allocation and opens the slot for loss postings.
    pub fn begin_slot(&mut self, nominal: Vec<f64>) -> Result<(), ModelError> {
        if self.open {
            return Err(ModelError::SlotAlreadyOpen);
        }
        if nominal.len() != self.n_embb {
            return Err(ModelError::LedgerShape {
                expected: self.n_embb,
                got: nominal.len(),
            });
        }
        self.slot_nominal = nominal;
        self.slot_loss = vec![0.0; self.n_embb];
        self.open = true;
        Ok(())
    }

    /// Debits puncturing losses for one mini-slot.
    pub fn add_loss(&mut self, loss: &[f64]) -> Result<(), ModelError> {
        if !self.open {
            return Err(ModelError::NoOpenSlot);
        }
        if loss.len() != self.n_embb {
            return Err(ModelError::LedgerShape {
                expected: self.n_embb,
                got: loss.len(),
            });
        }
        for (acc, &l) in self.slot_loss.iter_mut().zip(loss) {
            *acc += l;
        }
        Ok(())
    }

    /// Closes the slot: verifies losses never exceed the nominal grant,
    /// accumulates actual rates, and archives the slot entry.
    pub fn end_slot(&mut self) -> Result<(), ModelError> {
        if !self.open {
            return Err(ModelError::NoOpenSlot);
        }
        for e in 0..self.n_embb {
            let nominal = self.slot_nominal[e];
            let loss = self.slot_loss[e];
            if loss > nominal + LOSS_REL_TOL * nominal.max(1.0) {
                return Err(ModelError::LossExceedsNominal {
                    slot: self.history.len(),
                    ue: e,
                    loss,
                    nominal,
                });
            }
            self.cumulative[e] += (nominal - loss).max(0.0);
        }
        self.prev_slot_loss = self.slot_loss.clone();
        self.history.push(SlotEntry {
            nominal: std::mem::take(&mut self.slot_nominal),
            loss: std::mem::take(&mut self.slot_loss),
        });
        self.slot_nominal = vec![0.0; self.n_embb];
        self.slot_loss = vec![0.0; self.n_embb];
        self.open = false;
        Ok(())
    }

    /// Cumulative actual bits per user over all closed slots.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Losses posted so far inside the currently open slot.
    pub fn slot_loss(&self) -> &[f64] {
        &self.slot_loss
    }

    /// Nominal rates credited for the currently open slot.
    pub fn slot_nominal(&self) -> &[f64] {
        &self.slot_nominal
    }

    /// Losses of the most recently closed slot.
    pub fn prev_slot_loss(&self) -> &[f64] {
        &self.prev_slot_loss
    }

    pub fn slots_closed(&self) -> usize {
        self.history.len()
    }

    /// Recomputes cumulative rates from the archived slot entries and
    /// checks they match the running totals. Used as a conservation
    /// audit by the simulator.
    pub fn replay_matches(&self, tol: f64) -> bool {
        let mut replay = vec![0.0; self.n_embb];
        for entry in &self.history {
            for e in 0..self.n_embb {
                replay[e] += (entry.nominal[e] - entry.loss[e]).max(0.0);
            }
        }
        replay
            .iter()
            .zip(&self.cumulative)
            .all(|(a, b)| (a - b).abs() <= tol * b.abs().max(1.0))
    }
}
