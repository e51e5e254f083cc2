//! Low-latency arrival generation, the chance-constraint admission
//! quota, and per-request resource-block demand sizing.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::channel;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("arrival standard deviation must be nonnegative, got {sd}")]
    NegativeStd { sd: f64 },
    #[error("outage budget must lie strictly inside (0, 1), got {eps}")]
    EpsRange { eps: f64 },
    #[error("latency infeasible: payload of {payload_bits} bits exceeds the {capacity_bits:.3} bits all resource blocks can carry in one mini-slot")]
    LatencyInfeasible { payload_bits: u64, capacity_bits: f64 },
}

/// One mini-slot's worth of low-latency arrivals. Requests are kept in
/// arrival order; each entry is the payload in bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UrllcBatch {
    pub arrivals: usize,
    pub requests: Vec<u64>,
    pub minislot_index: usize,
    pub slot_index: usize,
}

impl UrllcBatch {
    /// A batch of `arrivals` identical payloads drawn at the given
    /// mini-slot.
    pub fn uniform(
        arrivals: usize,
        payload_bits: u64,
        slot_index: usize,
        minislot_index: usize,
    ) -> Self {
        Self {
            arrivals,
            requests: vec![payload_bits; arrivals],
            minislot_index,
            slot_index,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals == 0
    }
}

/// Draws the number of arrivals in one mini-slot: a N(μ, sd²) sample
/// rounded to the nearest integer and clamped at zero.
pub fn draw_arrivals<R: Rng + ?Sized>(mu: f64, sd: f64, rng: &mut R) -> Result<u64, TrafficError> {
    if !(sd >= 0.0) {
        return Err(TrafficError::NegativeStd { sd });
    }
    let sample = if sd == 0.0 {
        mu
    } else {
        let normal = Normal::new(mu, sd).expect("finite mean, nonnegative deviation");
        normal.sample(rng)
    };
    Ok(sample.round().max(0.0) as u64)
}

/// Smallest integer n that is at least the (1−ε) quantile of N(μ, sd²).
/// Serving n requests per mini-slot keeps the probability of an arrival
/// burst exceeding capacity at or below ε.
pub fn admission_quota(mu: f64, sd: f64, eps: f64) -> Result<u64, TrafficError> {
    if !(sd >= 0.0) {
        return Err(TrafficError::NegativeStd { sd });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(TrafficError::EpsRange { eps });
    }
    let quantile = mu + sd * channel::q_inv(eps).expect("eps checked in (0, 1)");
    Ok(quantile.ceil().max(0.0) as u64)
}

/// Minimal number of resource blocks whose combined one-mini-slot
/// capacity covers the payload, taking the best blocks first.
pub fn required_rbs(payload_bits: u64, per_rb_rates: &[f64]) -> Result<u32, TrafficError> {
    if payload_bits == 0 {
        return Ok(0);
    }
    let mut rates: Vec<f64> = per_rb_rates.iter().copied().filter(|r| *r > 0.0).collect();
    rates.sort_by(|a, b| b.partial_cmp(a).expect("rates are finite"));
    let mut carried = 0.0;
    for (used, rate) in rates.iter().enumerate() {
        carried += rate;
        if carried >= payload_bits as f64 {
            return Ok(used as u32 + 1);
        }
    }
    Err(TrafficError::LatencyInfeasible {
        payload_bits,
        capacity_bits: carried,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn degenerate_gaussian_is_constant() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(draw_arrivals(3.0, 0.0, &mut rng).unwrap(), 3);
        }
    }

    #[test]
    fn deeply_negative_mean_clamps_to_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            assert_eq!(draw_arrivals(-10.0, 1.0, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn arrival_sample_mean_matches_mu() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 1_000_000u64;
        let total: u64 = (0..n)
            .map(|_| draw_arrivals(5.0, 2.0, &mut rng).unwrap())
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 5.0).abs() < 0.02, "sample mean {mean}");
    }

    #[test]
    fn quota_matches_inverse_normal() {
        // 5 + 2·q_inv(0.01) = 9.653, so the quota is 10.
        assert_eq!(admission_quota(5.0, 2.0, 0.01).unwrap(), 10);
        // A point mass needs exactly its mean.
        assert_eq!(admission_quota(5.0, 0.0, 0.3).unwrap(), 5);
        // The median of the symmetric distribution is the mean.
        assert_eq!(admission_quota(5.0, 2.0, 0.5).unwrap(), 5);
    }

    #[test]
    fn quota_never_goes_negative() {
        assert_eq!(admission_quota(-50.0, 1.0, 0.4).unwrap(), 0);
    }

    #[test]
    fn quota_rejects_bad_eps() {
        assert!(matches!(
            admission_quota(5.0, 2.0, 0.0).unwrap_err(),
            TrafficError::EpsRange { .. }
        ));
        assert!(matches!(
            admission_quota(5.0, 2.0, 1.0).unwrap_err(),
            TrafficError::EpsRange { .. }
        ));
    }

    #[test]
    fn quota_bounds_empirical_violations() {
        let (mu, sd, eps) = (5.0, 2.0, 0.01);
        let quota = admission_quota(mu, sd, eps).unwrap();
        let n = 100_000u64;
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let violations = (0..n)
            .filter(|_| draw_arrivals(mu, sd, &mut rng).unwrap() > quota)
            .count() as f64;
        let bound = eps + 3.0 * (eps / n as f64).sqrt();
        assert!(
            violations / n as f64 <= bound,
            "violation rate {} above {bound}",
            violations / n as f64
        );
    }

    #[test]
    fn single_block_suffices_for_fast_rates() {
        let rates = vec![300.0; 50];
        assert_eq!(required_rbs(256, &rates).unwrap(), 1);
    }

    #[test]
    fn uniform_rates_need_a_ceiling_worth_of_blocks() {
        let rates = vec![100.0; 50];
        assert_eq!(required_rbs(256, &rates).unwrap(), 3);
    }

    #[test]
    fn zero_payload_needs_nothing() {
        assert_eq!(required_rbs(0, &[10.0]).unwrap(), 0);
    }

    #[test]
    fn oversized_payload_is_latency_infeasible() {
        let rates = vec![10.0; 4];
        assert!(matches!(
            required_rbs(256, &rates).unwrap_err(),
            TrafficError::LatencyInfeasible { .. }
        ));
        assert!(matches!(
            required_rbs(8, &[]).unwrap_err(),
            TrafficError::LatencyInfeasible { .. }
        ));
    }

    #[test]
    fn demand_is_monotone_in_payload_and_rates() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..200 {
            let rates: Vec<f64> = (0..12).map(|_| rng.random_range(10.0..500.0)).collect();
            let better: Vec<f64> = rates.iter().map(|r| r * rng.random_range(1.0..3.0)).collect();
            let payload: u64 = rng.random_range(1..2000);
            let base = required_rbs(payload, &rates);
            if let Ok(d) = base {
                // A pointwise faster channel can only shrink the demand.
                assert!(required_rbs(payload, &better).unwrap() <= d);
                // A heavier payload can only grow it.
                if let Ok(d2) = required_rbs(payload + 500, &rates) {
                    assert!(d2 >= d);
                }
            }
        }
    }
}
