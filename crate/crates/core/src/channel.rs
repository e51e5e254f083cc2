//! Path loss, fading, SNR and the two rate laws: a slot-scale Shannon
//! rate for broadband users and a mini-slot finite-blocklength rate for
//! the short punctured transmissions.

use rand::Rng;
use thiserror::Error;

use crate::model::SystemConfig;

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;
const SQRT_2PI: f64 = 2.506628274631000502415765284811;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("path gain is singular at distance {distance_m} m")]
    DistanceSingularity { distance_m: f64 },
    #[error("`{field}` must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("tail probability must lie strictly inside (0, 1), got {p}")]
    ProbabilityRange { p: f64 },
}

/// Free-space (inverse-square) power gain at `distance_m` for a carrier
/// at `frequency_hz`: (λ / 4πd)².
pub fn free_space_gain(distance_m: f64, frequency_hz: f64) -> Result<f64, ChannelError> {
    if !(distance_m > 0.0) {
        return Err(ChannelError::DistanceSingularity { distance_m });
    }
    if !(frequency_hz > 0.0) {
        return Err(ChannelError::NonPositive {
            field: "frequency_hz",
            value: frequency_hz,
        });
    }
    let lambda = SPEED_OF_LIGHT_M_S / frequency_hz;
    let amplitude = lambda / (4.0 * std::f64::consts::PI * distance_m);
    Ok(amplitude * amplitude)
}

/// Squared Rayleigh amplitude with unit mean power, i.e. an Exp(1) draw.
pub fn rayleigh_power_fade<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Inverse-transform sampling; 1-u keeps the argument strictly positive.
    let u: f64 = rng.random();
    -(1.0 - u).ln()
}

/// Squared channel amplitude: free-space propagation times a Rayleigh
/// power fade of unit mean.
pub fn path_gain<R: Rng + ?Sized>(
    distance_m: f64,
    frequency_hz: f64,
    rng: &mut R,
) -> Result<f64, ChannelError> {
    Ok(free_space_gain(distance_m, frequency_hz)? * rayleigh_power_fade(rng))
}

/// Shannon rate of one resource block over one slot, in bits:
/// Δ·B·log2(1 + p·h² / (n0·B)).
pub fn embb_rb_rate(gain: f64, p_tx_mw: f64, n0_mw_hz: f64, b_hz: f64, slot_s: f64) -> f64 {
    debug_assert!(gain >= 0.0 && p_tx_mw > 0.0 && n0_mw_hz > 0.0 && b_hz > 0.0 && slot_s > 0.0);
    let snr = p_tx_mw * gain / (n0_mw_hz * b_hz);
    slot_s * b_hz * (1.0 + snr).log2()
}

/// Standard normal upper-tail probability Q(x) = 0.5·erfc(x/√2).
pub fn q_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Rational approximation to the standard normal quantile (Acklam's
/// coefficients), refined by the caller.
fn probit_estimate(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Inverse of the upper-tail probability: returns x with Q(x) = p.
/// Accurate to |Q(q_inv(p)) − p| ≤ 1e-10 over p ∈ [1e-9, 1−1e-9].
pub fn q_inv(p: f64) -> Result<f64, ChannelError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(ChannelError::ProbabilityRange { p });
    }
    // Q(x) = Φ(−x), so the upper-tail quantile is the negated lower-tail
    // one; the lower-tail branch of the estimate avoids 1−p cancellation
    // for small p.
    let mut x = -probit_estimate(p);
    // Newton corrections against the erfc-based Q; Q'(x) = −φ(x).
    for _ in 0..2 {
        let err = q_tail(x) - p;
        let pdf = (-0.5 * x * x).exp() / SQRT_2PI;
        if pdf > 0.0 {
            x += err / pdf;
        }
    }
    Ok(x)
}

/// Interference-free SNR used in puncturing mode: h²·P_u / (n0·B).
pub fn urllc_snr(gain: f64, p_tx_mw: f64, n0_mw_hz: f64, b_hz: f64) -> f64 {
    p_tx_mw * gain / (n0_mw_hz * b_hz)
}

/// Channel dispersion in puncturing mode: γ / (1 + γ).
pub fn urllc_dispersion(snr: f64) -> f64 {
    snr / (1.0 + snr)
}

/// SINR when the short transmission is superposed on a live broadband
/// grant instead of puncturing it: h²·P_u / (n0·B + h²·P_e). Provided
/// for completeness; every scheduler here punctures.
pub fn urllc_sinr_superposed(gain: f64, p_u_mw: f64, p_e_mw: f64, n0_mw_hz: f64, b_hz: f64) -> f64 {
    p_u_mw * gain / (n0_mw_hz * b_hz + p_e_mw * gain)
}

/// Channel dispersion in superposition mode:
/// h²·P_u / (n0·B + h²·(P_u + P_e)).
pub fn urllc_dispersion_superposed(
    gain: f64,
    p_u_mw: f64,
    p_e_mw: f64,
    n0_mw_hz: f64,
    b_hz: f64,
) -> f64 {
    p_u_mw * gain / (n0_mw_hz * b_hz + (p_u_mw + p_e_mw) * gain)
}

/// Finite-blocklength rate of one punctured resource block over one
/// mini-slot, in bits: δ·[B·log2(1+γ) − √(V/N_b)·Q⁻¹(ε_d)], clamped
/// below at zero. Uses the interference-free SNR and dispersion.
pub fn urllc_rb_rate(
    gain: f64,
    p_tx_mw: f64,
    n0_mw_hz: f64,
    b_hz: f64,
    minislot_s: f64,
    decode_err: f64,
    blocklength: f64,
) -> f64 {
    debug_assert!(gain >= 0.0 && p_tx_mw > 0.0 && n0_mw_hz > 0.0 && b_hz > 0.0);
    debug_assert!(minislot_s > 0.0 && blocklength > 0.0);
    debug_assert!(decode_err > 0.0 && decode_err <= 0.5);
    let snr = urllc_snr(gain, p_tx_mw, n0_mw_hz, b_hz);
    let dispersion = urllc_dispersion(snr);
    let quantile = q_inv(decode_err).expect("decode_err checked in (0, 0.5]");
    let bracket = b_hz * (1.0 + snr).log2() - (dispersion / blocklength).sqrt() * quantile;
    (minislot_s * bracket).max(0.0)
}

/// Per-slot channel snapshot: squared amplitudes and SNRs for the
/// broadband users, their per-(user, block) slot rates, and — once the
/// simulator has a pending batch — per-(request, block) mini-slot rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    /// Squared channel amplitude per broadband user.
    pub gain: Vec<f64>,
    /// Linear SNR per broadband user.
    pub snr: Vec<f64>,
    /// Bits per slot for each (user, resource block) pair.
    pub rb_rate_embb: Vec<Vec<f64>>,
    /// Bits per mini-slot for each (pending request, resource block)
    /// pair; empty until a batch is attached.
    pub rb_rate_urllc: Vec<Vec<f64>>,
}

impl ChannelState {
    /// Builds the broadband part of the snapshot from per-user squared
    /// amplitudes. The rate is flat across blocks because the SNR model
    /// has no per-block term.
    pub fn for_slot(cfg: &SystemConfig, gains: &[f64]) -> Self {
        let snr: Vec<f64> = gains
            .iter()
            .map(|&g| cfg.p_embb_mw() * g / cfg.noise_rb_mw())
            .collect();
        let rb_rate_embb = gains
            .iter()
            .map(|&g| {
                let rate = embb_rb_rate(
                    g,
                    cfg.p_embb_mw(),
                    cfg.noise_mw_hz(),
                    cfg.bandwidth_hz,
                    cfg.slot_s,
                );
                vec![rate; cfg.n_rb]
            })
            .collect();
        Self {
            gain: gains.to_vec(),
            snr,
            rb_rate_embb,
            rb_rate_urllc: Vec::new(),
        }
    }

    pub fn n_embb(&self) -> usize {
        self.rb_rate_embb.len()
    }

    pub fn n_rb(&self) -> usize {
        self.rb_rate_embb.first().map_or(0, |r| r.len())
    }

    /// Attaches the mini-slot rates of the currently pending requests.
    pub fn set_urllc_rows(&mut self, rows: Vec<Vec<f64>>) {
        self.rb_rate_urllc = rows;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn gain_follows_inverse_square_law() {
        let f = 2.0e9;
        let near = free_space_gain(100.0, f).unwrap();
        let far = free_space_gain(200.0, f).unwrap();
        assert!((near / far - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gain_at_reference_distance_is_friis() {
        let f = 2.0e9;
        let lambda = SPEED_OF_LIGHT_M_S / f;
        let expected = (lambda / (4.0 * std::f64::consts::PI)).powi(2);
        let got = free_space_gain(1.0, f).unwrap();
        assert!((got - expected).abs() <= 1e-15 * expected);
    }

    #[test]
    fn zero_distance_is_an_error() {
        assert!(matches!(
            free_space_gain(0.0, 1e9).unwrap_err(),
            ChannelError::DistanceSingularity { .. }
        ));
    }

    #[test]
    fn rayleigh_power_fade_has_unit_mean() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|_| rayleigh_power_fade(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean fade {mean}");
    }

    #[test]
    fn embb_rate_hits_known_snr_points() {
        // p·h² = n0·B, so SNR = 1 and one slot carries Δ·B bits.
        let b = 180e3;
        let n0 = 1e-3;
        let rate = embb_rb_rate(1.0, n0 * b, n0, b, 1e-3);
        assert!((rate - 180.0).abs() < 1e-9);
        // SNR = 3 doubles the spectral efficiency.
        let rate = embb_rb_rate(3.0, n0 * b, n0, b, 1e-3);
        assert!((rate - 360.0).abs() < 1e-9);
        // Vanishing power sends the rate to zero.
        let rate = embb_rb_rate(1.0, 1e-300, n0, b, 1e-3);
        assert!(rate >= 0.0 && rate < 1e-10);
    }

    #[test]
    fn embb_rate_is_monotone_in_gain_and_power() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..200 {
            let g: f64 = rng.random_range(1e-12..1e-6);
            let p: f64 = rng.random_range(1.0..1000.0);
            let base = embb_rb_rate(g, p, 3.9811e-15, 180e3, 1e-3);
            assert!(embb_rb_rate(g * 1.5, p, 3.9811e-15, 180e3, 1e-3) > base);
            assert!(embb_rb_rate(g, p * 1.5, 3.9811e-15, 180e3, 1e-3) > base);
        }
    }

    #[test]
    fn q_inv_median_is_zero() {
        assert_eq!(q_inv(0.5).unwrap(), 0.0);
    }

    #[test]
    fn q_inv_matches_reference_points() {
        // High-precision reference values for Q(x) = p.
        assert!((q_inv(1e-5).unwrap() - 4.264890793922824628).abs() < 1e-9);
        assert!((q_inv(0.01).unwrap() - 2.326347874040841101).abs() < 1e-12);
        assert!((q_inv(0.2).unwrap() - 0.841621233572914205).abs() < 1e-12);
    }

    #[test]
    fn q_inv_is_antisymmetric() {
        let plus = q_inv(0.2).unwrap();
        let minus = q_inv(0.8).unwrap();
        assert!((plus + minus).abs() < 1e-12);
    }

    #[test]
    fn q_inv_round_trips_and_decreases() {
        let mut points = vec![1e-9, 0.9, 0.99, 0.999999, 1.0 - 1e-9];
        let mut p = 1e-9;
        while p < 1.0 - 1e-9 {
            points.push(p);
            p *= 1.7;
        }
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup();
        let mut prev = f64::INFINITY;
        for &p in &points {
            let x = q_inv(p).unwrap();
            assert!((q_tail(x) - p).abs() <= 1e-10, "round trip at p={p}");
            assert!(x < prev, "not strictly decreasing at p={p}");
            prev = x;
        }
    }

    #[test]
    fn q_inv_rejects_degenerate_probabilities() {
        assert!(q_inv(0.0).is_err());
        assert!(q_inv(1.0).is_err());
        assert!(q_inv(-0.3).is_err());
    }

    #[test]
    fn urllc_rate_penalty_vanishes_at_half() {
        let (g, p, n0, b) = (1e-9, 125.9, 3.9811e-15, 180e3);
        let snr = urllc_snr(g, p, n0, b);
        let shannon = 0.125e-3 * b * (1.0 + snr).log2();
        let rate = urllc_rb_rate(g, p, n0, b, 0.125e-3, 0.5, 22.5);
        assert_eq!(rate, shannon);
    }

    #[test]
    fn urllc_rate_is_below_scaled_shannon() {
        let (g, p, n0, b) = (1e-9, 125.9, 3.9811e-15, 180e3);
        let embb = embb_rb_rate(g, p, n0, b, 1e-3);
        for &eps in &[1e-5, 1e-3, 0.1] {
            let urllc = urllc_rb_rate(g, p, n0, b, 0.125e-3, eps, 22.5);
            assert!(urllc < 0.125 * embb);
        }
    }

    #[test]
    fn urllc_rate_grows_with_blocklength() {
        let (g, p, n0, b) = (1e-9, 125.9, 3.9811e-15, 180e3);
        let r2 = urllc_rb_rate(g, p, n0, b, 0.125e-3, 1e-5, 1e2);
        let r4 = urllc_rb_rate(g, p, n0, b, 0.125e-3, 1e-5, 1e4);
        let r6 = urllc_rb_rate(g, p, n0, b, 0.125e-3, 1e-5, 1e6);
        let shannon = 0.125e-3 * b * (1.0 + urllc_snr(g, p, n0, b)).log2();
        assert!(r2 < r4 && r4 < r6 && r6 < shannon);
    }

    #[test]
    fn deep_fade_short_block_clamps_to_zero() {
        // A 1 Hz band at SNR 1e-6: the dispersion penalty dominates the
        // vanishing Shannon term and the clamp engages.
        let rate = urllc_rb_rate(1e-6, 1.0, 1.0, 1.0, 0.125e-3, 1e-5, 22.5);
        assert_eq!(rate, 0.0);
    }

    #[test]
    fn superposition_mode_reduces_sinr() {
        let (g, pu, pe, n0, b) = (1e-9, 125.9, 125.9, 3.9811e-15, 180e3);
        let punctured = urllc_snr(g, pu, n0, b);
        let superposed = urllc_sinr_superposed(g, pu, pe, n0, b);
        assert!(superposed < punctured);
        let v_sup = urllc_dispersion_superposed(g, pu, pe, n0, b);
        let expect = pu * g / (n0 * b + (pu + pe) * g);
        assert!((v_sup - expect).abs() < 1e-18);
        assert!(v_sup < urllc_dispersion(punctured));
    }

    #[test]
    fn channel_state_is_recomputable() {
        let cfg = crate::model::SystemConfig::default().validate().unwrap();
        let gains = vec![1e-9, 2e-9, 5e-10];
        let mut cfg = cfg;
        cfg.n_embb = 3;
        cfg.n_rb = 4;
        let cfg = cfg.validate().unwrap();
        let state = ChannelState::for_slot(&cfg, &gains);
        assert_eq!(state.n_embb(), 3);
        assert_eq!(state.n_rb(), 4);
        for (e, &g) in gains.iter().enumerate() {
            let expect = embb_rb_rate(
                g,
                cfg.p_embb_mw(),
                cfg.noise_mw_hz(),
                cfg.bandwidth_hz,
                cfg.slot_s,
            );
            for k in 0..4 {
                assert!((state.rb_rate_embb[e][k] - expect).abs() < 1e-12);
            }
            let snr = cfg.p_embb_mw() * g / cfg.noise_rb_mw();
            assert!((state.snr[e] - snr).abs() < 1e-12 * snr);
        }
    }
}
