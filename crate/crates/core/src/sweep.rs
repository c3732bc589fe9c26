//! Deterministic parameter sweeps and their CSV encodings.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::capacity::{rate_ratio_sweep, RateResult};
use crate::error::{Error, Result};
use crate::fisher::quantization_loss;
use crate::frontend::{ChannelState, DemodConfig};
use crate::pilot::{PilotSpec, PilotWaveform};

pub const FISHER_HEADER: &str = "snr_db,m,chi_phi_db,chi_tau_db";
pub const CAPACITY_HEADER: &str = "m,rate_lb_bits,capacity_m2_bits,ratio";

/// Default channel counts of the loss sweep.
pub const DEFAULT_CHANNELS: [usize; 5] = [2, 3, 5, 8, 16];

/// Scientific notation with 9 significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.8e}")
}

/// Grid of SNR values times channel counts, plus the pilot and true parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub snr_start_db: f64,
    pub snr_stop_db: f64,
    pub snr_step_db: f64,
    pub m_list: Vec<usize>,
    pub pilot: PilotSpec,
    /// True `(phi, tau)` in radians and seconds.
    pub theta: (f64, f64),
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            snr_start_db: -15.0,
            snr_stop_db: 10.0,
            snr_step_db: 0.5,
            m_list: DEFAULT_CHANNELS.to_vec(),
            pilot: PilotSpec::default(),
            theta: (PI / 8.0, 0.0),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.snr_step_db > 0.0 && self.snr_step_db.is_finite()) {
            return Err(Error::Config(format!("SNR step {} must be positive", self.snr_step_db)));
        }
        if !(self.snr_start_db.is_finite() && self.snr_stop_db.is_finite()) {
            return Err(Error::Config("SNR range must be finite".into()));
        }
        if self.snr_stop_db < self.snr_start_db {
            return Err(Error::Config(format!(
                "SNR stop {} below start {}",
                self.snr_stop_db, self.snr_start_db
            )));
        }
        if self.m_list.is_empty() {
            return Err(Error::Config("empty channel list".into()));
        }
        if let Some(m) = self.m_list.iter().find(|&&m| m < 2) {
            return Err(Error::Config(format!("channel count {m} below 2")));
        }
        if !(self.theta.0.is_finite() && self.theta.1.is_finite()) {
            return Err(Error::Config("true parameters must be finite".into()));
        }
        Ok(())
    }

    /// `start + i * step` for every value not exceeding `stop`.
    pub fn snr_grid(&self) -> Vec<f64> {
        let span = (self.snr_stop_db - self.snr_start_db) / self.snr_step_db;
        let count = (span + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.snr_start_db + i as f64 * self.snr_step_db).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherRow {
    pub snr_db: f64,
    pub m: usize,
    pub chi_phi_db: f64,
    pub chi_tau_db: f64,
    pub jittered_snapshots: usize,
}

/// Quantization losses on every `(SNR, M)` cell, SNR-major, one pilot period of snapshots.
pub fn fisher_sweep(spec: &SweepSpec) -> Result<Vec<FisherRow>> {
    spec.validate()?;
    let wave = PilotWaveform::build(&spec.pilot)?;
    wave.delay_steps(spec.theta.1)?;
    let configs = spec
        .m_list
        .iter()
        .map(|&m| DemodConfig::equally_spaced(m))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(f64, usize)> = spec
        .snr_grid()
        .into_iter()
        .flat_map(|snr| (0..configs.len()).map(move |i| (snr, i)))
        .collect();
    cells
        .into_par_iter()
        .map(|(snr_db, i)| {
            let state = ChannelState::from_snr_db(spec.theta.0, spec.theta.1, snr_db)?;
            let r = quantization_loss(&configs[i], &state, &wave, wave.samples_per_period)?;
            Ok(FisherRow {
                snr_db,
                m: spec.m_list[i],
                chi_phi_db: r.chi_phi_db,
                chi_tau_db: r.chi_tau_db,
                jittered_snapshots: r.jittered_snapshots,
            })
        })
        .collect()
}

pub fn write_fisher_csv<W: Write>(rows: &[FisherRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{FISHER_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", sci(r.snr_db), r.m, sci(r.chi_phi_db), sci(r.chi_tau_db))?;
    }
    Ok(())
}

/// Rate table for `M = 2..=m_max` at one SNR in dB.
pub fn capacity_sweep(m_max: usize, snr_db: f64, phase: f64) -> Result<Vec<RateResult>> {
    if !snr_db.is_finite() {
        return Err(Error::Config(format!("SNR {snr_db} dB is not finite")));
    }
    rate_ratio_sweep(m_max, phase, 10f64.powf(snr_db / 10.0))
}

pub fn write_capacity_csv<W: Write>(rows: &[RateResult], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CAPACITY_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.channels, sci(r.rate_lb), sci(r.capacity_m2), sci(r.ratio))?;
    }
    Ok(())
}
