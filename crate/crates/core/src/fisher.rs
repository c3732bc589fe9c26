//! Moments of the hard-limited snapshot, the moment-based Fisher information
//! and the quantization loss against an unquantized I/Q receiver.
//!
//! With `r = sign(gamma s + zeta)` and `zeta ~ N(0, C)`, the per-snapshot
//! information
//!
//! ```text
//! F~_n = (d mu / d theta)^T  R^{-1}  (d mu / d theta)
//! ```
//!
//! never exceeds the exact Fisher information and equals it when the channel
//! noises are independent (`M = 2`). All SNR values follow `SNR = gamma^2`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frontend::{rotation, snapshot, ChannelState, DemodConfig, SnapshotModel};
use crate::linalg::{inverse_quadratic_form, pairwise_sum};
use crate::pilot::PilotWaveform;
use crate::specfun::{bvn_cdf, normal_pdf, q_function, BvnSpec};

/// First and second moments of one quantized snapshot and the mean's Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub jacobian: DMatrix<f64>,
}

fn channel_std(config: &DemodConfig, m: usize) -> Result<f64> {
    let var = config.c[(m, m)];
    if !(var > 0.0) {
        return Err(Error::Domain(format!("channel {m} has noise variance {var}")));
    }
    Ok(var.sqrt())
}

/// `(P(r_m = -1), P(r_m = +1))` per channel, both tails evaluated directly.
fn sign_probabilities(snap: &SnapshotModel, config: &DemodConfig, gain: f64) -> Result<Vec<(f64, f64)>> {
    (0..config.channels())
        .map(|m| {
            let x = gain * snap.mean[m] / channel_std(config, m)?;
            Ok((q_function(x), q_function(-x)))
        })
        .collect()
}

/// `mu_m = 1 - 2 Q(gamma s_m / sqrt(C_mm))`.
pub fn first_moment(snap: &SnapshotModel, config: &DemodConfig, gain: f64) -> Result<DVector<f64>> {
    let p = sign_probabilities(snap, config, gain)?;
    Ok(DVector::from_iterator(p.len(), p.iter().map(|&(minus, plus)| plus - minus)))
}

/// Covariance of the sign vector.
///
/// Diagonal `1 - mu_m^2`; off-diagonal `4 Phi_mk - (1 - mu_m)(1 - mu_k)` where
/// `Phi_mk` is the bivariate normal CDF of `(zeta_m, zeta_k)` at
/// `(-gamma s_m, -gamma s_k)`.
pub fn second_moment(snap: &SnapshotModel, config: &DemodConfig, gain: f64) -> Result<DMatrix<f64>> {
    let m_len = config.channels();
    let p = sign_probabilities(snap, config, gain)?;
    let q: Vec<f64> = p.iter().map(|&(minus, _)| minus).collect();
    let mut r = DMatrix::zeros(m_len, m_len);
    for m in 0..m_len {
        // 1 - mu^2 = 4 Q(x) Q(-x), no cancellation at high SNR
        r[(m, m)] = 4.0 * p[m].0 * p[m].1;
        for k in (m + 1)..m_len {
            let spec = BvnSpec::from_covariance(
                -gain * snap.mean[m],
                -gain * snap.mean[k],
                config.c[(m, m)],
                config.c[(k, k)],
                config.c[(m, k)],
            )?;
            let joint = bvn_cdf(BvnSpec { rho: spec.rho.clamp(-1.0, 1.0), ..spec })?;
            let v = 4.0 * (joint - q[m] * q[k]);
            r[(m, k)] = v;
            r[(k, m)] = v;
        }
    }
    Ok(r)
}

/// `d mu_m / d theta_j = 2 gamma exp(-gamma^2 s_m^2 / (2 C_mm)) / sqrt(2 pi C_mm) * d s_m / d theta_j`.
pub fn moment_jacobian(snap: &SnapshotModel, config: &DemodConfig, gain: f64) -> Result<DMatrix<f64>> {
    let m_len = config.channels();
    let mut out = snap.jacobian.clone();
    for m in 0..m_len {
        let sd = channel_std(config, m)?;
        let scale = 2.0 * gain * normal_pdf(gain * snap.mean[m] / sd) / sd;
        out.row_mut(m).scale_mut(scale);
    }
    Ok(out)
}

pub fn moments(snap: &SnapshotModel, config: &DemodConfig, gain: f64) -> Result<MomentSet> {
    Ok(MomentSet {
        mean: first_moment(snap, config, gain)?,
        cov: second_moment(snap, config, gain)?,
        jacobian: moment_jacobian(snap, config, gain)?,
    })
}

/// Moment-based Fisher information summed over snapshots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PessimisticFim {
    pub matrix: Matrix2<f64>,
    /// Snapshots whose sign covariance needed diagonal jitter.
    pub jittered_snapshots: usize,
}

fn snapshot_term(
    config: &DemodConfig,
    state: &ChannelState,
    wave: &PilotWaveform,
    n: usize,
) -> Result<(Matrix2<f64>, bool)> {
    let snap = snapshot(config, state, wave, n)?;
    let cov = second_moment(&snap, config, state.gain)?;
    let dmu = moment_jacobian(&snap, config, state.gain)?;
    inverse_quadratic_form(&cov, &dmu, n)
}

/// `sum_n (d mu_n)^T R_n^{-1} (d mu_n)` over the first `snapshots` snapshots.
pub fn pessimistic_fim(
    config: &DemodConfig,
    state: &ChannelState,
    wave: &PilotWaveform,
    snapshots: usize,
) -> Result<PessimisticFim> {
    check_snapshots(snapshots)?;
    wave.delay_steps(state.delay)?;
    let terms = (0..snapshots)
        .into_par_iter()
        .map(|n| snapshot_term(config, state, wave, n))
        .collect::<Result<Vec<_>>>()?;
    let jittered_snapshots = terms.iter().filter(|(_, j)| *j).count();
    let mats: Vec<_> = terms.into_iter().map(|(m, _)| m).collect();
    Ok(PessimisticFim { matrix: pairwise_sum(&mats), jittered_snapshots })
}

/// Exact 1-bit Fisher information when the channel noises are independent:
/// `sum_n sum_m (d mu_nm)^T (d mu_nm) / (1 - mu_nm^2)`.
pub fn independent_channel_fim(
    config: &DemodConfig,
    state: &ChannelState,
    wave: &PilotWaveform,
    snapshots: usize,
) -> Result<Matrix2<f64>> {
    check_snapshots(snapshots)?;
    for m in 0..config.channels() {
        for k in 0..m {
            if config.c[(m, k)].abs() > 1e-12 {
                return Err(Error::Unsupported(format!(
                    "channels {k} and {m} have correlated noise ({})",
                    config.c[(m, k)]
                )));
            }
        }
    }
    let terms = (0..snapshots)
        .map(|n| {
            let snap = snapshot(config, state, wave, n)?;
            let mut f = Matrix2::zeros();
            for m in 0..config.channels() {
                let sd = config.c[(m, m)].sqrt();
                let x = state.gain * snap.mean[m] / sd;
                let density = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
                let g0 = 2.0 * state.gain * density / sd * snap.jacobian[(m, 0)];
                let g1 = 2.0 * state.gain * density / sd * snap.jacobian[(m, 1)];
                let var = 4.0 * q_function(x) * q_function(-x);
                f += Matrix2::new(g0 * g0, g0 * g1, g0 * g1, g1 * g1) / var;
            }
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&terms))
}

/// Fisher information of the unquantized two-channel I/Q receiver,
/// `gamma^2 sum_n (d s_n)^T (d s_n)` with `A = I`.
pub fn reference_fim(state: &ChannelState, wave: &PilotWaveform, snapshots: usize) -> Result<Matrix2<f64>> {
    check_snapshots(snapshots)?;
    let steps = wave.delay_steps(state.delay)?;
    let (b, db) = rotation(state.phase);
    let terms: Vec<_> = (0..snapshots)
        .map(|n| {
            let s = wave.sample(n, steps);
            let d_phase = db * s.value;
            let d_delay = b * s.d_tau;
            let cross = d_phase.dot(&d_delay);
            Matrix2::new(d_phase.norm_squared(), cross, cross, d_delay.norm_squared())
        })
        .collect();
    Ok(pairwise_sum(&terms) * (state.gain * state.gain))
}

/// Pessimistic and reference information with the per-parameter losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimResult {
    pub f_tilde: Matrix2<f64>,
    pub f_inf: Matrix2<f64>,
    /// `-10 log10([F~^-1]_11 / [F_inf^-1]_11)`; negative values are losses.
    pub chi_phi_db: f64,
    /// Same for the delay entry.
    pub chi_tau_db: f64,
    pub jittered_snapshots: usize,
}

fn invert_fim(f: &Matrix2<f64>, which: &'static str) -> Result<Matrix2<f64>> {
    let det = f.determinant();
    let scale = f[(0, 0)].abs() * f[(1, 1)].abs();
    if !(det > 1e-14 * scale) || !det.is_finite() {
        return Err(Error::SingularFim { which });
    }
    f.try_inverse().ok_or(Error::SingularFim { which })
}

/// Ratio of CRLB diagonals converted to dB with losses negative.
pub fn loss_db(quantized_crlb: f64, reference_crlb: f64) -> f64 {
    -10.0 * (quantized_crlb / reference_crlb).log10()
}

pub fn quantization_loss(
    config: &DemodConfig,
    state: &ChannelState,
    wave: &PilotWaveform,
    snapshots: usize,
) -> Result<FimResult> {
    let pess = pessimistic_fim(config, state, wave, snapshots)?;
    let f_inf = reference_fim(state, wave, snapshots)?;
    let inv_inf = invert_fim(&f_inf, "reference")?;
    let inv_tilde = invert_fim(&pess.matrix, "pessimistic")?;
    Ok(FimResult {
        f_tilde: pess.matrix,
        f_inf,
        chi_phi_db: loss_db(inv_tilde[(0, 0)], inv_inf[(0, 0)]),
        chi_tau_db: loss_db(inv_tilde[(1, 1)], inv_inf[(1, 1)]),
        jittered_snapshots: pess.jittered_snapshots,
    })
}

fn check_snapshots(snapshots: usize) -> Result<()> {
    if snapshots == 0 {
        return Err(Error::Config("need at least one snapshot".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pilot::{PilotSpec, SequenceKind};
    use approx::assert_relative_eq;
    use nalgebra::Vector2;

    fn small_wave() -> PilotWaveform {
        let spec = PilotSpec {
            symbols: 63,
            symbol_duration: 1.0 / 1.023e6,
            sequence: SequenceKind::SeededRandom { seed: 11 },
            ..PilotSpec::default()
        };
        PilotWaveform::build(&spec).unwrap()
    }

    fn snap(config: &DemodConfig, phi: f64) -> SnapshotModel {
        SnapshotModel::from_pilot(config, phi, Vector2::new(0.9, -0.4), Vector2::new(2.1e6, 0.7e6))
    }

    #[test]
    fn zero_gain_moments() {
        let d = DemodConfig::equally_spaced(3).unwrap();
        let s = snap(&d, 0.3);
        let mu = first_moment(&s, &d, 0.0).unwrap();
        assert_eq!(mu, DVector::zeros(3));
        let r = second_moment(&s, &d, 0.0).unwrap();
        // arcsine law; rho = cos(pi/3) = 0.5 gives 1/3
        assert_relative_eq!(r[(0, 1)], 1.0 / 3.0, epsilon = 1e-14);
        for m in 0..3 {
            for k in 0..3 {
                let rho = d.noise_correlation(m, k);
                assert_relative_eq!(r[(m, k)], 2.0 / PI * rho.asin(), epsilon = 1e-13);
            }
        }
        let dmu = moment_jacobian(&s, &d, 0.0).unwrap();
        assert_eq!(dmu, DMatrix::zeros(3, 2));
        let dmu_small = moment_jacobian(&s, &d, 1e-9).unwrap() / 1e-9;
        assert_relative_eq!(dmu_small, s.jacobian.clone() * (2.0 / PI).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn first_moment_values() {
        let d = DemodConfig::equally_spaced(2).unwrap();
        let s = SnapshotModel::from_pilot(&d, 0.0, Vector2::new(1.0, 0.0), Vector2::zeros());
        let mu = first_moment(&s, &d, 1.0).unwrap();
        assert_relative_eq!(mu[0], 0.682_689_492_137_085_9, epsilon = 1e-15);
        let big = first_moment(&s, &d, 40.0).unwrap();
        assert_eq!(big[0], 1.0);
    }

    #[test]
    fn independent_channels_have_zero_cross_covariance() {
        let d = DemodConfig::equally_spaced(2).unwrap();
        let s = snap(&d, 0.4);
        for g in [0.1, 1.0, 3.0] {
            let r = second_moment(&s, &d, g).unwrap();
            assert!(r[(0, 1)].abs() < 1e-15);
            let mu = first_moment(&s, &d, g).unwrap();
            assert_relative_eq!(r[(0, 0)], 1.0 - mu[0] * mu[0], epsilon = 1e-15);
        }
    }

    #[test]
    fn moment_jacobian_matches_finite_difference() {
        let d = DemodConfig::equally_spaced(5).unwrap();
        let phi = PI / 8.0;
        let h = 1e-6;
        for g in [0.3, 1.0, 3.0] {
            let dmu = moment_jacobian(&snap(&d, phi), &d, g).unwrap();
            let fd = (first_moment(&snap(&d, phi + h), &d, g).unwrap()
                - first_moment(&snap(&d, phi - h), &d, g).unwrap())
                / (2.0 * h);
            for m in 0..5 {
                let exact = dmu[(m, 0)];
                assert!((fd[m] - exact).abs() <= 1e-5 * exact.abs().max(1e-3), "m={m}");
            }
        }
    }

    #[test]
    fn zero_variance_channel_is_a_domain_error() {
        let mut d = DemodConfig::equally_spaced(2).unwrap();
        d.c[(1, 1)] = 0.0;
        let s = snap(&d, 0.0);
        assert!(matches!(first_moment(&s, &d, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn two_channel_fim_is_exact() {
        let wave = small_wave();
        let d = DemodConfig::equally_spaced(2).unwrap();
        let n = wave.samples_per_period;
        for snr_db in [-20.0, 0.0, 10.0] {
            let st = ChannelState::from_snr_db(PI / 8.0, 0.0, snr_db).unwrap();
            let f = pessimistic_fim(&d, &st, &wave, n).unwrap().matrix;
            let exact = independent_channel_fim(&d, &st, &wave, n).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_relative_eq!(f[(i, j)], exact[(i, j)], max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn reference_fim_scales_with_gain_squared() {
        let wave = small_wave();
        let n = wave.samples_per_period;
        let f1 = reference_fim(&ChannelState::new(0.2, 0.0, 1.0).unwrap(), &wave, n).unwrap();
        let f2 = reference_fim(&ChannelState::new(0.2, 0.0, 2.0).unwrap(), &wave, n).unwrap();
        assert_relative_eq!(f2, f1 * 4.0, max_relative = 1e-14);
        let f0 = reference_fim(&ChannelState::new(0.2, 0.0, 0.0).unwrap(), &wave, n).unwrap();
        assert_eq!(f0, Matrix2::zeros());
        let energy: f64 = (0..n).map(|i| wave.sample(i, 0).value.norm_squared()).sum();
        assert_relative_eq!(f1[(0, 0)], energy, max_relative = 1e-13);
    }

    #[test]
    fn silent_pilot_carries_no_information() {
        let d = DemodConfig::equally_spaced(3).unwrap();
        let s = SnapshotModel::from_pilot(&d, 0.5, Vector2::zeros(), Vector2::zeros());
        let cov = second_moment(&s, &d, 2.0).unwrap();
        let dmu = moment_jacobian(&s, &d, 2.0).unwrap();
        let (f, _) = inverse_quadratic_form(&cov, &dmu, 0).unwrap();
        assert_eq!(f, Matrix2::zeros());
    }

    #[test]
    fn low_snr_two_channel_loss_is_two_over_pi() {
        let wave = small_wave();
        let d = DemodConfig::equally_spaced(2).unwrap();
        let n = wave.samples_per_period;
        let st = ChannelState::from_snr_db(PI / 8.0, 0.0, -60.0).unwrap();
        let f = pessimistic_fim(&d, &st, &wave, n).unwrap().matrix;
        let r = reference_fim(&st, &wave, n).unwrap() * (2.0 / PI);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(f[(i, j)], r[(i, j)], max_relative = 1e-3);
            }
        }
    }

    #[test]
    fn zero_gain_reports_singular_reference() {
        let wave = small_wave();
        let d = DemodConfig::equally_spaced(2).unwrap();
        let st = ChannelState::new(0.1, 0.0, 0.0).unwrap();
        let err = quantization_loss(&d, &st, &wave, wave.samples_per_period).unwrap_err();
        assert_eq!(err, Error::SingularFim { which: "reference" });
        assert!(pessimistic_fim(&d, &st, &wave, 0).is_err());
    }
}
