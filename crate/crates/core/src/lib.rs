//! Discrete-time downlink scheduling simulator for a cell in which
//! slot-granular broadband users coexist with sporadic low-latency
//! traffic that punctures already-granted resource blocks at mini-slot
//! granularity.
//!
//! The crate provides:
//!
//! * a system model ([`model`]) with validated configuration, binary
//!   allocation matrices and double-entry rate accounting,
//! * channel and rate laws ([`channel`]) including a finite-blocklength
//!   rate for the punctured short transmissions,
//! * stochastic arrival generation and admission sizing ([`traffic`]),
//! * a dense two-phase simplex solver ([`lp`]),
//! * a transportation solver (least-cost start plus dual improvement,
//!   [`transport`]),
//! * the slot-level fairness scheduler and its apportionment heuristic
//!   ([`embb_sched`]),
//! * the mini-slot puncturing scheduler ([`urllc_sched`]) and five
//!   reference puncturing policies ([`baselines`]),
//! * the simulation loop, metrics and parallel experiment driver
//!   ([`sim`]), and a command-line front end ([`cli`]).

pub mod baselines;
pub mod channel;
pub mod cli;
pub mod embb_sched;
pub mod lp;
pub mod model;
pub mod sim;
pub mod traffic;
pub mod transport;
pub mod urllc_sched;

pub use model::{EmbbAllocation, PsumParams, PunctureRecord, RateLedger, SystemConfig};
pub use sim::{RunResult, SchedulerId, SimOptions};
