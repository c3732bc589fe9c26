//! Demodulation geometry: channel matrix, phase rotation, noise covariance
//! and the noiseless snapshot mean with its parameter Jacobian.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::pilot::PilotWaveform;

/// M demodulation channels with offsets `phi_m`.
///
/// Row `m` of `a` is `(cos phi_m, sin phi_m)`; `c = a a^T` is the per-snapshot
/// noise covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodConfig {
    pub offsets: Vec<f64>,
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl DemodConfig {
    /// Equally spaced offsets `pi (m - 1) / M` for `m = 1..=M`.
    pub fn equally_spaced(channels: usize) -> Result<Self> {
        if channels < 2 {
            return Err(Error::Config(format!("need at least 2 channels, got {channels}")));
        }
        let offsets = (0..channels).map(|m| PI * m as f64 / channels as f64).collect();
        Self::with_offsets(offsets)
    }

    pub fn with_offsets(offsets: Vec<f64>) -> Result<Self> {
        if offsets.len() < 2 {
            return Err(Error::Config(format!("need at least 2 channels, got {}", offsets.len())));
        }
        if offsets.iter().any(|o| !o.is_finite()) {
            return Err(Error::Config("demodulation offsets must be finite".into()));
        }
        let m = offsets.len();
        let a = DMatrix::from_fn(m, 2, |i, j| if j == 0 { offsets[i].cos() } else { offsets[i].sin() });
        let c = DMatrix::from_fn(m, m, |i, k| {
            if i == k {
                1.0
            } else {
                (offsets[i] - offsets[k]).cos()
            }
        });
        Ok(Self { offsets, a, c })
    }

    pub fn channels(&self) -> usize {
        self.offsets.len()
    }

    /// Correlation between the noise of channels `m` and `k`.
    pub fn noise_correlation(&self, m: usize, k: usize) -> f64 {
        self.c[(m, k)] / (self.c[(m, m)] * self.c[(k, k)]).sqrt()
    }
}

/// Phase rotation `B(phi)` and its derivative with respect to `phi`.
pub fn rotation(phi: f64) -> (Matrix2<f64>, Matrix2<f64>) {
    let (s, c) = phi.sin_cos();
    (Matrix2::new(c, s, -s, c), Matrix2::new(-s, c, -c, -s))
}

/// Unknown channel parameters plus the attenuation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    /// Channel phase in radians.
    pub phase: f64,
    /// Propagation delay in seconds.
    pub delay: f64,
    /// Linear attenuation `gamma >= 0`.
    pub gain: f64,
}

impl ChannelState {
    pub fn new(phase: f64, delay: f64, gain: f64) -> Result<Self> {
        if !(gain >= 0.0 && gain.is_finite()) {
            return Err(Error::Config(format!("attenuation {gain} must be finite and non-negative")));
        }
        Ok(Self { phase, delay, gain })
    }

    /// State with `gain = 10^(snr_db / 20)`, so that SNR equals `gain^2`.
    pub fn from_snr_db(phase: f64, delay: f64, snr_db: f64) -> Result<Self> {
        Self::new(phase, delay, snr_db_to_gain(snr_db))
    }
}

pub fn snr_db_to_gain(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 20.0)
}

pub fn snr_db_to_linear(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

/// Noiseless direction of one snapshot and its Jacobian over `(phi, tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotModel {
    /// `s_n = A B(phi) x_n(tau)`.
    pub mean: DVector<f64>,
    /// Columns `A dB/dphi x_n` and `A B dx_n/dtau`.
    pub jacobian: DMatrix<f64>,
}

impl SnapshotModel {
    /// Builds the snapshot from the pilot sample pair.
    pub fn from_pilot(config: &DemodConfig, phase: f64, x: Vector2<f64>, dx_dtau: Vector2<f64>) -> Self {
        let (b, db) = rotation(phase);
        let rotated = b * x;
        let d_phase = db * x;
        let d_delay = b * dx_dtau;
        let a = &config.a;
        let m = config.channels();
        let mean = DVector::from_fn(m, |i, _| a[(i, 0)] * rotated[0] + a[(i, 1)] * rotated[1]);
        let jacobian = DMatrix::from_fn(m, 2, |i, j| {
            let col = if j == 0 { &d_phase } else { &d_delay };
            a[(i, 0)] * col[0] + a[(i, 1)] * col[1]
        });
        Self { mean, jacobian }
    }
}

/// Snapshot `n` (0-based) for the given channel state.
pub fn snapshot(
    config: &DemodConfig,
    state: &ChannelState,
    wave: &PilotWaveform,
    n: usize,
) -> Result<SnapshotModel> {
    let s = wave.sample_at(state.delay, n)?;
    Ok(SnapshotModel::from_pilot(config, state.phase, s.value, s.d_tau))
}
