//! Achievable-rate lower bound for the hard-limited `2 x M` channel
//! `r = sign(H x + zeta)`, and the exact capacity of the two-channel case.
//!
//! The bound replaces the quantizer by the linear gain `sqrt(2/pi) D^{-1/2}`
//! (`D = diag R_yy`) plus an effective noise whose covariance follows from the
//! arcsine law, then evaluates the Gaussian log-det rate of that linear model.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frontend::{rotation, DemodConfig};
use crate::linalg::inverse_quadratic_form;
use crate::specfun::{binary_entropy, q_function};

/// Deviation from `[-1, 1]` that is clamped rather than reported.
pub const CORRELATION_SLACK: f64 = 1e-12;

/// Linearized channel seen after the hard limiter.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    /// `H = A B(phi)`.
    pub h: DMatrix<f64>,
    /// Input covariance, `snr * I`.
    pub r_xx: Matrix2<f64>,
    /// Pre-quantization noise covariance `C`.
    pub r_zz: DMatrix<f64>,
    /// `H R_xx H^T + R_zz`.
    pub r_yy: DMatrix<f64>,
    /// `sqrt(2/pi) D^{-1/2} H`.
    pub h_prime: DMatrix<f64>,
    /// Effective noise covariance after quantization.
    pub r_zpzp: DMatrix<f64>,
}

/// Builds the arcsine-law effective channel for input covariance `snr * I`.
pub fn effective_channel(config: &DemodConfig, phase: f64, snr: f64) -> Result<EffectiveChannel> {
    if !(snr >= 0.0 && snr.is_finite()) {
        return Err(Error::Config(format!("SNR {snr} must be finite and non-negative")));
    }
    let m_len = config.channels();
    let (b, _) = rotation(phase);
    let h = &config.a * DMatrix::from_fn(2, 2, |i, j| b[(i, j)]);
    let r_xx = Matrix2::identity() * snr;
    let r_zz = config.c.clone();
    let r_yy = &h * &h.transpose() * snr + &r_zz;

    let mut inv_sd = Vec::with_capacity(m_len);
    for m in 0..m_len {
        let v = r_yy[(m, m)];
        if !(v > 0.0) {
            return Err(Error::Domain(format!("channel {m} has output variance {v}")));
        }
        inv_sd.push(1.0 / v.sqrt());
    }

    let mut normalized = DMatrix::from_fn(m_len, m_len, |i, k| inv_sd[i] * r_yy[(i, k)] * inv_sd[k]);
    for i in 0..m_len {
        for k in 0..m_len {
            let v = normalized[(i, k)];
            if i == k {
                debug_assert!((v - 1.0).abs() <= CORRELATION_SLACK);
                normalized[(i, k)] = 1.0;
            } else if v.abs() > 1.0 + CORRELATION_SLACK || v.is_nan() {
                return Err(Error::Correlation { row: i, col: k, value: v });
            } else {
                normalized[(i, k)] = v.clamp(-1.0, 1.0);
            }
        }
    }

    let r_zpzp = DMatrix::from_fn(m_len, m_len, |i, k| {
        let n = normalized[(i, k)];
        2.0 / PI * (n.asin() - n + inv_sd[i] * r_zz[(i, k)] * inv_sd[k])
    });
    let scale = (2.0 / PI).sqrt();
    let h_prime = DMatrix::from_fn(m_len, 2, |i, j| scale * inv_sd[i] * h[(i, j)]);

    Ok(EffectiveChannel { h, r_xx, r_zz, r_yy, h_prime, r_zpzp })
}

/// `1/2 log2 det(I + R_zpzp^{-1} H' R_xx H'^T)` in bits per channel use.
///
/// Evaluated through the `2 x 2` form `det(I + R_xx^{1/2} H'^T R_zpzp^{-1} H' R_xx^{1/2})`.
pub fn rate_lower_bound(eff: &EffectiveChannel) -> Result<f64> {
    let (g, _) = inverse_quadratic_form(&eff.r_zpzp, &eff.h_prime, 0)?;
    // R_xx is a scaled identity, so its square root commutes with G
    let snr = eff.r_xx[(0, 0)];
    let m = Matrix2::identity() + g * snr;
    let det = m.determinant();
    if !(det > 0.0) {
        return Err(Error::Domain(format!("rate determinant {det} not positive")));
    }
    Ok(0.5 * det.log2().max(0.0))
}

/// Capacity of the hard-limited I/Q channel, `2 (1 - beta(Q(sqrt(snr))))` bits.
pub fn capacity_m2(snr: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return Err(Error::Config(format!("SNR {snr} must be non-negative")));
    }
    Ok(2.0 * (1.0 - binary_entropy(q_function(snr.sqrt()))?))
}

/// One row of the rate-versus-channel-count table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateResult {
    pub channels: usize,
    pub rate_lb: f64,
    pub capacity_m2: f64,
    pub ratio: f64,
}

pub fn rate_result(channels: usize, phase: f64, snr: f64) -> Result<RateResult> {
    let config = DemodConfig::equally_spaced(channels)?;
    let rate_lb = rate_lower_bound(&effective_channel(&config, phase, snr)?)?;
    let capacity_m2 = capacity_m2(snr)?;
    Ok(RateResult { channels, rate_lb, capacity_m2, ratio: rate_lb / capacity_m2 })
}

/// Ratio of the rate bound to the I/Q capacity for `M = 2..=max_channels`.
pub fn rate_ratio_sweep(max_channels: usize, phase: f64, snr: f64) -> Result<Vec<RateResult>> {
    if max_channels < 2 {
        return Err(Error::Config(format!("maximum channel count {max_channels} below 2")));
    }
    (2..=max_channels)
        .into_par_iter()
        .map(|m| rate_result(m, phase, snr))
        .collect()
}
