//! Monte-Carlo gates comparing analytic quantities against the oracle, and a
//! plain-text report of the outcome.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix2, SymmetricEigen};

use crate::capacity::effective_channel;
use crate::error::{Error, Result};
use crate::fisher::{first_moment, independent_channel_fim, pessimistic_fim, second_moment};
use crate::frontend::{snapshot, snr_db_to_linear, ChannelState, DemodConfig};
use crate::mc_oracle::{
    exact_fim_small_m, simulate_moments, simulate_quantization_noise, McConfig, DEFAULT_FD_STEP,
    MAX_EXACT_CHANNELS,
};
use crate::pilot::PilotWaveform;

/// SNRs in dB at which the moment gates run.
pub const MOMENT_SNRS_DB: [f64; 3] = [-15.0, 0.0, 10.0];
/// SNRs in dB at which the pessimism check runs.
pub const PESSIMISM_SNRS_DB: [f64; 3] = [-10.0, -5.0, 0.0];
/// SNR in dB of the quantization-noise covariance gate.
pub const NOISE_SNR_DB: f64 = -15.0;

pub const MOMENT_SIGMAS: f64 = 4.0;
pub const NOISE_SIGMAS: f64 = 3.0;
pub const PESSIMISM_SIGMAS: f64 = 3.0;

/// One analytic-versus-reference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub name: String,
    pub analytic: f64,
    pub reference: f64,
    pub se: f64,
    /// Largest admissible `|analytic - reference|`.
    pub limit: f64,
    pub pass: bool,
}

impl Gate {
    /// Two-sided gate `|analytic - reference| <= sigmas * se`.
    pub fn two_sided(name: String, analytic: f64, reference: f64, se: f64, sigmas: f64) -> Self {
        let limit = sigmas * se;
        let pass = (analytic - reference).abs() <= limit;
        Self { name, analytic, reference, se, limit, pass }
    }

    /// One-sided gate `value >= -sigmas * se`, reported with `reference = 0`.
    pub fn at_least_zero(name: String, value: f64, se: f64, sigmas: f64) -> Self {
        let limit = sigmas * se;
        Self { name, analytic: value, reference: 0.0, se, limit, pass: value >= -limit }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub gates: Vec<Gate>,
    pub notices: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }

    pub fn failures(&self) -> usize {
        self.gates.iter().filter(|g| !g.pass).count()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<44} {:>16} {:>16} {:>12} {:>12}  status",
            "gate", "analytic", "reference", "std_err", "limit"
        )?;
        for g in &self.gates {
            writeln!(
                f,
                "{:<44} {:>16.8e} {:>16.8e} {:>12.4e} {:>12.4e}  {}",
                g.name,
                g.analytic,
                g.reference,
                g.se,
                g.limit,
                if g.pass { "PASS" } else { "FAIL" }
            )?;
        }
        for n in &self.notices {
            writeln!(f, "note: {n}")?;
        }
        writeln!(f, "{} gates, {} failed", self.gates.len(), self.failures())
    }
}

/// Snapshots used by the moment gates: four evenly spaced over one period.
fn probe_snapshots(wave: &PilotWaveform) -> Vec<usize> {
    let n = wave.samples_per_period;
    (0..4).map(|k| k * n / 4).collect()
}

/// Sign mean and covariance against simulation at one channel count.
///
/// The standard error is floored at `1/T`, the resolution of the estimator,
/// so saturated channels with an empirical spread of zero remain testable.
pub fn moment_gates(
    config: &DemodConfig,
    state_phase: f64,
    state_delay: f64,
    wave: &PilotWaveform,
    snrs_db: &[f64],
    mc: &McConfig,
) -> Result<Vec<Gate>> {
    let m = config.channels();
    let floor = 1.0 / mc.trials as f64;
    let mut gates = Vec::new();
    for (si, &snr_db) in snrs_db.iter().enumerate() {
        let state = ChannelState::from_snr_db(state_phase, state_delay, snr_db)?;
        for (pi, n) in probe_snapshots(wave).into_iter().enumerate() {
            let snap = snapshot(config, &state, wave, n)?;
            let mu = first_moment(&snap, config, state.gain)?;
            let r = second_moment(&snap, config, state.gain)?;
            let sub = McConfig { seed: mc.seed ^ ((si as u64) << 32 | pi as u64), ..*mc };
            let est = simulate_moments(&snap, config, state.gain, &sub)?;
            let tag = format!("M={m} snr={snr_db:+}dB n={n}");
            for i in 0..m {
                gates.push(Gate::two_sided(
                    format!("{tag} mu[{i}]"),
                    mu[i],
                    est.mean[i],
                    est.mean_se[i].max(floor),
                    MOMENT_SIGMAS,
                ));
            }
            for i in 0..m {
                for k in i..m {
                    gates.push(Gate::two_sided(
                        format!("{tag} R[{i},{k}]"),
                        r[(i, k)],
                        est.cov[(i, k)],
                        est.cov_se[(i, k)].max(floor),
                        MOMENT_SIGMAS,
                    ));
                }
            }
        }
    }
    Ok(gates)
}

/// Arcsine-law effective noise covariance against simulation.
pub fn noise_gates(config: &DemodConfig, phase: f64, snr_db: f64, mc: &McConfig) -> Result<Vec<Gate>> {
    let snr = snr_db_to_linear(snr_db);
    let eff = effective_channel(config, phase, snr)?;
    let est = simulate_quantization_noise(config, phase, snr, mc)?;
    let m = config.channels();
    let mut gates = Vec::new();
    for i in 0..m {
        for k in i..m {
            gates.push(Gate::two_sided(
                format!("M={m} snr={snr_db:+}dB Rzz'[{i},{k}]"),
                eff.r_zpzp[(i, k)],
                est.cov[(i, k)],
                est.se[(i, k)],
                NOISE_SIGMAS,
            ));
        }
    }
    Ok(gates)
}

/// Outcome of the comparison between exact and moment-based information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PessimismCheck {
    pub exact: Matrix2<f64>,
    pub pessimistic: Matrix2<f64>,
    /// Eigenvalues of `D (F - F~) D` with `D = diag(F~)^{-1/2}`, ascending.
    pub eigenvalues: [f64; 2],
    /// Frobenius norm of the scaled error bound, an upper bound on the eigenvalue error.
    pub se: f64,
}

/// Compares the exact and moment-based information after scaling both
/// parameters to unit pessimistic information.
pub fn pessimism_check(
    config: &DemodConfig,
    state: &ChannelState,
    wave: &PilotWaveform,
    snapshots: usize,
) -> Result<PessimismCheck> {
    let exact = exact_fim_small_m(config, state, wave, snapshots, DEFAULT_FD_STEP)?;
    let pess = pessimistic_fim(config, state, wave, snapshots)?.matrix;
    let d = [pess[(0, 0)], pess[(1, 1)]];
    if !(d[0] > 0.0 && d[1] > 0.0) {
        return Err(Error::SingularFim { which: "pessimistic" });
    }
    let scale = Matrix2::from_diagonal(&nalgebra::Vector2::new(1.0 / d[0].sqrt(), 1.0 / d[1].sqrt()));
    let diff = scale * (exact.matrix - pess) * scale;
    let err = scale * exact.error * scale;
    let eig = SymmetricEigen::new(0.5 * (diff + diff.transpose())).eigenvalues;
    let mut eigenvalues = [eig[0], eig[1]];
    eigenvalues.sort_by(f64::total_cmp);
    Ok(PessimismCheck { exact: exact.matrix, pessimistic: pess, eigenvalues, se: err.norm() })
}

/// Exact-information gates: agreement for `M = 2`, pessimism for `M = 3`.
pub fn exact_fim_gates(
    config: &DemodConfig,
    phase: f64,
    delay: f64,
    wave: &PilotWaveform,
    snrs_db: &[f64],
) -> Result<Vec<Gate>> {
    let m = config.channels();
    let n = wave.samples_per_period;
    let mut gates = Vec::new();
    for &snr_db in snrs_db {
        let state = ChannelState::from_snr_db(phase, delay, snr_db)?;
        if m == 2 {
            let exact = exact_fim_small_m(config, &state, wave, n, DEFAULT_FD_STEP)?;
            let closed = independent_channel_fim(config, &state, wave, n)?;
            for (i, j, label) in [(0, 0, "phi,phi"), (0, 1, "phi,tau"), (1, 1, "tau,tau")] {
                let scale = (closed[(i, i)] * closed[(j, j)]).sqrt();
                gates.push(Gate::two_sided(
                    format!("M=2 snr={snr_db:+}dB F[{label}]/scale"),
                    closed[(i, j)] / scale,
                    exact.matrix[(i, j)] / scale,
                    exact.error[(i, j)] / scale,
                    PESSIMISM_SIGMAS,
                ));
            }
        } else {
            let check = pessimism_check(config, &state, wave, n)?;
            for (i, lambda) in check.eigenvalues.iter().enumerate() {
                gates.push(Gate::at_least_zero(
                    format!("M={m} snr={snr_db:+}dB eig{i}(F-F~)"),
                    *lambda,
                    check.se,
                    PESSIMISM_SIGMAS,
                ));
            }
        }
    }
    Ok(gates)
}

/// Every gate that applies to `channels`, using the default phase `pi/8` at zero delay.
pub fn run_validation(channels: usize, wave: &PilotWaveform, mc: &McConfig) -> Result<ValidationReport> {
    let config = DemodConfig::equally_spaced(channels)?;
    let (phase, delay) = (PI / 8.0, 0.0);
    let mut report = ValidationReport::default();
    report.gates.extend(moment_gates(&config, phase, delay, wave, &MOMENT_SNRS_DB, mc)?);
    let noise_mc = McConfig { seed: mc.seed.wrapping_add(1), ..*mc };
    report.gates.extend(noise_gates(&config, phase, NOISE_SNR_DB, &noise_mc)?);
    if channels <= MAX_EXACT_CHANNELS {
        report.gates.extend(exact_fim_gates(&config, phase, delay, wave, &PESSIMISM_SNRS_DB)?);
    } else {
        report.notices.push(format!(
            "exact Fisher information skipped: needs at most {MAX_EXACT_CHANNELS} channels, got {channels}"
        ));
    }
    Ok(report)
}
