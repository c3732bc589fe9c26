//! Ground truth for the analytic formulas.
//!
//! Two independent routes:
//!
//! * Monte-Carlo simulation of the quantized receiver. The noise is drawn in
//!   its two-dimensional latent form `eta ~ N(0, I_2)` and mapped through `A`,
//!   so the `M`-channel noise has covariance `C = A A^T` by construction.
//!   Trials are split into fixed-size chunks; chunk `i` draws from the ChaCha
//!   stream `i` of the seed and chunk sums are merged in chunk order, so the
//!   output is bit-identical for any thread count.
//! * One-dimensional Gauss–Legendre quadrature of sign-pattern probabilities.
//!   Each pattern of `sign(c + A eta)` is a convex polygon in the latent plane,
//!   so its Gaussian mass reduces to an integral over `eta_1` of a difference
//!   of normal CDFs. Finite differences of these probabilities give the exact
//!   Fisher information for small `M`.

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::capacity::effective_channel;
use crate::error::{Error, Result};
use crate::frontend::{snapshot, ChannelState, DemodConfig, SnapshotModel};
use crate::linalg::pairwise_sum;
use crate::pilot::PilotWaveform;
use crate::specfun::{normal_cdf, normal_pdf, q_function, BvnSpec, GL20};

/// Trials per deterministic work unit.
pub const CHUNK: u64 = 1 << 16;

/// Largest channel count handled by the exact Fisher information.
pub const MAX_EXACT_CHANNELS: usize = 3;

/// Default finite-difference step, in units of the standardized channel mean.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    /// Pair every latent draw with its negation.
    pub antithetic: bool,
}

impl McConfig {
    pub fn new(trials: u64, seed: u64) -> Result<Self> {
        let mc = Self { trials, seed, antithetic: false };
        mc.validate()?;
        Ok(mc)
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("Monte-Carlo needs at least one trial".into()));
        }
        if self.antithetic && self.trials % 2 == 1 {
            return Err(Error::Config("antithetic sampling needs an even trial count".into()));
        }
        Ok(())
    }

    /// `(chunk index, trials in chunk)` in a fixed order.
    fn chunks(&self) -> Vec<(u64, u64)> {
        let full = self.trials / CHUNK;
        let rest = self.trials % CHUNK;
        let mut out: Vec<_> = (0..full).map(|i| (i, CHUNK)).collect();
        if rest > 0 {
            out.push((full, rest));
        }
        out
    }

    fn rng(&self, chunk: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chunk);
        rng
    }
}

fn latent<R: Rng>(rng: &mut R) -> (f64, f64) {
    (rng.sample(StandardNormal), rng.sample(StandardNormal))
}

#[inline]
fn hard_limit(y: f64) -> i64 {
    if y >= 0.0 {
        1
    } else {
        -1
    }
}

/// Empirical sign moments with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub mean_se: DVector<f64>,
    pub cov_se: DMatrix<f64>,
    pub trials: u64,
}

#[derive(Clone)]
struct SignSums {
    first: Vec<i64>,
    second: Vec<i64>,
    // sums of squared antithetic pair means, times 4 to stay integral
    pair_sq: Vec<i64>,
}

impl SignSums {
    fn new(m: usize) -> Self {
        Self { first: vec![0; m], second: vec![0; m * m], pair_sq: vec![0; m] }
    }

    fn add_signs(&mut self, r: &[i64]) {
        let m = r.len();
        for i in 0..m {
            self.first[i] += r[i];
            for k in i..m {
                self.second[i * m + k] += r[i] * r[k];
            }
        }
    }

    fn merge(mut self, other: &Self) -> Self {
        for (a, b) in self.first.iter_mut().zip(&other.first) {
            *a += b;
        }
        for (a, b) in self.second.iter_mut().zip(&other.second) {
            *a += b;
        }
        for (a, b) in self.pair_sq.iter_mut().zip(&other.pair_sq) {
            *a += b;
        }
        self
    }
}

/// Simulates `sign(gain * s + A eta)` and estimates its mean and covariance.
///
/// The covariance uses the unbiased `T / (T - 1)` normalization. Its standard
/// error combines the first-order term `Var[(r_m - mu_m)(r_k - mu_k)] / T`
/// with the second-order term from estimating both means.
pub fn simulate_moments(
    snap: &SnapshotModel,
    config: &DemodConfig,
    gain: f64,
    mc: &McConfig,
) -> Result<MomentEstimate> {
    mc.validate()?;
    if mc.trials < 2 {
        return Err(Error::Config("covariance estimation needs at least two trials".into()));
    }
    let m = config.channels();
    let offset: Vec<f64> = (0..m).map(|i| gain * snap.mean[i]).collect();
    let a = &config.a;

    let partial: Vec<SignSums> = mc
        .chunks()
        .into_par_iter()
        .map(|(chunk, count)| {
            let mut rng = mc.rng(chunk);
            let mut sums = SignSums::new(m);
            let mut r = vec![0i64; m];
            let mut r_neg = vec![0i64; m];
            let draws = if mc.antithetic { count / 2 } else { count };
            for _ in 0..draws {
                let (e1, e2) = latent(&mut rng);
                for i in 0..m {
                    let noise = a[(i, 0)] * e1 + a[(i, 1)] * e2;
                    r[i] = hard_limit(offset[i] + noise);
                    r_neg[i] = hard_limit(offset[i] - noise);
                }
                sums.add_signs(&r);
                if mc.antithetic {
                    sums.add_signs(&r_neg);
                    for i in 0..m {
                        let s = r[i] + r_neg[i];
                        sums.pair_sq[i] += s * s;
                    }
                }
            }
            sums
        })
        .collect();
    let total = partial.iter().fold(SignSums::new(m), |acc, s| acc.merge(s));

    let t = mc.trials as f64;
    // antithetic pairs can be fully correlated for products; count pairs only
    let t_eff = if mc.antithetic { t / 2.0 } else { t };
    let mean = DVector::from_fn(m, |i, _| total.first[i] as f64 / t);
    let mean_se = DVector::from_fn(m, |i, _| {
        if mc.antithetic {
            let pairs = t / 2.0;
            let second = total.pair_sq[i] as f64 / 4.0 / pairs;
            ((second - mean[i] * mean[i]).max(0.0) / pairs).sqrt()
        } else {
            ((1.0 - mean[i] * mean[i]).max(0.0) / t).sqrt()
        }
    });
    let mut cov = DMatrix::zeros(m, m);
    let mut cov_se = DMatrix::zeros(m, m);
    for i in 0..m {
        for k in i..m {
            let e_ik = total.second[i * m + k] as f64 / t;
            let (a_i, a_k) = (mean[i], mean[k]);
            let c = t / (t - 1.0) * (e_ik - a_i * a_k);
            // E[(r_i - a_i)^2 (r_k - a_k)^2] for +-1 variables
            let fourth = (1.0 + a_i * a_i) * (1.0 + a_k * a_k)
                - 2.0 * a_k * a_k * (1.0 + a_i * a_i)
                - 2.0 * a_i * a_i * (1.0 + a_k * a_k)
                + 4.0 * a_i * a_k * e_ik;
            let var_i = 1.0 - a_i * a_i;
            let var_k = 1.0 - a_k * a_k;
            let se = ((fourth - c * c).max(0.0) / t_eff + (var_i * var_k + c * c) / (t_eff * t_eff)).sqrt();
            cov[(i, k)] = c;
            cov[(k, i)] = c;
            cov_se[(i, k)] = se;
            cov_se[(k, i)] = se;
        }
    }
    Ok(MomentEstimate { mean, cov, mean_se, cov_se, trials: mc.trials })
}

/// Pre-quantization snapshots `gain * s + A eta`, one per column.
pub fn simulate_snapshots(
    snap: &SnapshotModel,
    config: &DemodConfig,
    gain: f64,
    count: usize,
    seed: u64,
) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = config.channels();
    let mut out = DMatrix::zeros(m, count);
    for j in 0..count {
        let (e1, e2) = latent(&mut rng);
        for i in 0..m {
            out[(i, j)] = gain * snap.mean[i] + config.a[(i, 0)] * e1 + config.a[(i, 1)] * e2;
        }
    }
    out
}

/// Empirical covariance estimate with per-entry standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub cov: DMatrix<f64>,
    pub se: DMatrix<f64>,
    pub trials: u64,
}

/// Simulates the effective quantization noise `r - H' x` for Gaussian input
/// `x ~ N(0, snr I)`.
///
/// The noise has zero mean by symmetry, so the estimate is the raw second
/// moment.
pub fn simulate_quantization_noise(
    config: &DemodConfig,
    phase: f64,
    snr: f64,
    mc: &McConfig,
) -> Result<CovarianceEstimate> {
    mc.validate()?;
    let eff = effective_channel(config, phase, snr)?;
    let m = config.channels();
    let amp = snr.sqrt();

    let partial: Vec<(Vec<f64>, Vec<f64>)> = mc
        .chunks()
        .into_par_iter()
        .map(|(chunk, count)| {
            let mut rng = mc.rng(chunk);
            let mut s1 = vec![0.0; m * m];
            let mut s2 = vec![0.0; m * m];
            let mut z = vec![0.0; m];
            let mut draw = |x1: f64, x2: f64, e1: f64, e2: f64, s1: &mut [f64], s2: &mut [f64]| {
                for i in 0..m {
                    let y = eff.h[(i, 0)] * x1 + eff.h[(i, 1)] * x2 + config.a[(i, 0)] * e1 + config.a[(i, 1)] * e2;
                    z[i] = hard_limit(y) as f64 - (eff.h_prime[(i, 0)] * x1 + eff.h_prime[(i, 1)] * x2);
                }
                for i in 0..m {
                    for k in i..m {
                        let p = z[i] * z[k];
                        s1[i * m + k] += p;
                        s2[i * m + k] += p * p;
                    }
                }
            };
            let draws = if mc.antithetic { count / 2 } else { count };
            for _ in 0..draws {
                let (u1, u2) = latent(&mut rng);
                let (e1, e2) = latent(&mut rng);
                draw(amp * u1, amp * u2, e1, e2, &mut s1, &mut s2);
                if mc.antithetic {
                    draw(-amp * u1, -amp * u2, -e1, -e2, &mut s1, &mut s2);
                }
            }
            (s1, s2)
        })
        .collect();

    let mut s1 = vec![0.0; m * m];
    let mut s2 = vec![0.0; m * m];
    for (a, b) in &partial {
        for i in 0..m * m {
            s1[i] += a[i];
            s2[i] += b[i];
        }
    }
    let t = mc.trials as f64;
    let t_eff = if mc.antithetic { t / 2.0 } else { t };
    let mut cov = DMatrix::zeros(m, m);
    let mut se = DMatrix::zeros(m, m);
    for i in 0..m {
        for k in i..m {
            let mean = s1[i * m + k] / t;
            let var = (s2[i * m + k] / t - mean * mean).max(0.0);
            cov[(i, k)] = mean;
            cov[(k, i)] = mean;
            se[(i, k)] = (var / t_eff).sqrt();
            se[(k, i)] = se[(i, k)];
        }
    }
    Ok(CovarianceEstimate { cov, se, trials: mc.trials })
}

/// Monte-Carlo estimates `(p, se)` of bivariate normal CDFs sharing one set of draws.
pub fn simulate_bvn(specs: &[BvnSpec], mc: &McConfig) -> Result<Vec<(f64, f64)>> {
    mc.validate()?;
    for s in specs {
        if !(s.rho.abs() <= 1.0) {
            return Err(Error::Domain(format!("correlation {} outside [-1, 1]", s.rho)));
        }
    }
    let coeffs: Vec<(f64, f64, f64, f64)> = specs
        .iter()
        .map(|s| (s.upper_x, s.upper_y, s.rho, (1.0 - s.rho * s.rho).max(0.0).sqrt()))
        .collect();
    let partial: Vec<Vec<u64>> = mc
        .chunks()
        .into_par_iter()
        .map(|(chunk, count)| {
            let mut rng = mc.rng(chunk);
            let mut hits = vec![0u64; coeffs.len()];
            let tally = |z1: f64, w: f64, hits: &mut [u64]| {
                for (h, &(ux, uy, rho, tail)) in hits.iter_mut().zip(&coeffs) {
                    if z1 <= ux && rho * z1 + tail * w <= uy {
                        *h += 1;
                    }
                }
            };
            let draws = if mc.antithetic { count / 2 } else { count };
            for _ in 0..draws {
                let (z1, w) = latent(&mut rng);
                tally(z1, w, &mut hits);
                if mc.antithetic {
                    tally(-z1, -w, &mut hits);
                }
            }
            hits
        })
        .collect();
    let t = mc.trials as f64;
    let t_eff = if mc.antithetic { t / 2.0 } else { t };
    Ok((0..specs.len())
        .map(|j| {
            let hits: u64 = partial.iter().map(|h| h[j]).sum();
            let p = hits as f64 / t;
            (p, (p * (1.0 - p) / t_eff).sqrt())
        })
        .collect())
}

/// Region of the latent plane where `sign(c_m + a_m . eta) = sign_m` for all `m`.
struct PatternRegion {
    // eta_2 > slope * eta_1 + intercept
    lower: Vec<(f64, f64)>,
    // eta_2 < slope * eta_1 + intercept
    upper: Vec<(f64, f64)>,
    eta1_lo: f64,
    eta1_hi: f64,
}

/// Latent-plane half-width beyond which Gaussian mass is ignored.
const LATENT_RADIUS: f64 = 9.0;
/// Longest sub-interval handed to one 20-point Gauss–Legendre rule.
const MAX_PANEL: f64 = 0.75;

impl PatternRegion {
    fn new(config: &DemodConfig, offset: &[f64], pattern: usize) -> Self {
        let mut region = Self {
            lower: Vec::new(),
            upper: Vec::new(),
            eta1_lo: -LATENT_RADIUS,
            eta1_hi: LATENT_RADIUS,
        };
        for (m, &c) in offset.iter().enumerate() {
            let sign = if pattern >> m & 1 == 1 { 1.0 } else { -1.0 };
            let alpha = sign * config.a[(m, 0)];
            let beta = sign * config.a[(m, 1)];
            let kappa = sign * c;
            // alpha eta1 + beta eta2 + kappa > 0
            if beta.abs() <= 1e-14 {
                let bound = -kappa / alpha;
                if alpha > 0.0 {
                    region.eta1_lo = region.eta1_lo.max(bound);
                } else {
                    region.eta1_hi = region.eta1_hi.min(bound);
                }
            } else {
                let line = (-alpha / beta, -kappa / beta);
                if beta > 0.0 {
                    region.lower.push(line);
                } else {
                    region.upper.push(line);
                }
            }
        }
        region
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut points = vec![self.eta1_lo, self.eta1_hi];
        let lines: Vec<_> = self.lower.iter().chain(&self.upper).collect();
        for (i, a) in lines.iter().enumerate() {
            for b in &lines[i + 1..] {
                let ds = a.0 - b.0;
                if ds.abs() > 1e-14 {
                    let x = (b.1 - a.1) / ds;
                    if x > self.eta1_lo && x < self.eta1_hi {
                        points.push(x);
                    }
                }
            }
        }
        points.sort_by(f64::total_cmp);
        points
    }

    fn integrand(&self, eta1: f64) -> f64 {
        let lo = self.lower.iter().map(|&(s, c)| s * eta1 + c).fold(f64::NEG_INFINITY, f64::max);
        let hi = self.upper.iter().map(|&(s, c)| s * eta1 + c).fold(f64::INFINITY, f64::min);
        if hi <= lo {
            return 0.0;
        }
        let mass = if lo >= 0.0 {
            q_function(lo) - q_function(hi)
        } else {
            normal_cdf(hi) - normal_cdf(lo)
        };
        normal_pdf(eta1) * mass
    }

    fn probability(&self) -> f64 {
        if self.eta1_hi <= self.eta1_lo {
            return 0.0;
        }
        let points = self.breakpoints();
        let mut total = 0.0;
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let panels = ((b - a) / MAX_PANEL).ceil().max(1.0) as usize;
            let width = (b - a) / panels as f64;
            for p in 0..panels {
                let lo = a + p as f64 * width;
                let mid = lo + 0.5 * width;
                let half = 0.5 * width;
                let mut acc = 0.0;
                for &(weight, x) in GL20.iter() {
                    acc += weight * (self.integrand(mid + half * x) + self.integrand(mid - half * x));
                }
                total += acc * half;
            }
        }
        total
    }
}

/// Probabilities of all `2^M` sign patterns of `sign(c + A eta)`.
///
/// Bit `m` of the pattern index is set when channel `m` outputs `+1`.
pub fn pattern_probabilities(config: &DemodConfig, offset: &[f64]) -> Vec<f64> {
    (0..1usize << config.channels())
        .map(|p| PatternRegion::new(config, offset, p).probability())
        .collect()
}

/// Monte-Carlo estimates `(p, se)` of the sign-pattern probabilities.
pub fn simulate_pattern_probabilities(
    snap: &SnapshotModel,
    config: &DemodConfig,
    gain: f64,
    mc: &McConfig,
) -> Result<Vec<(f64, f64)>> {
    mc.validate()?;
    let m = config.channels();
    if m > 16 {
        return Err(Error::Unsupported(format!("{m} channels give too many sign patterns")));
    }
    let offset: Vec<f64> = (0..m).map(|i| gain * snap.mean[i]).collect();
    let patterns = 1usize << m;
    let partial: Vec<Vec<u64>> = mc
        .chunks()
        .into_par_iter()
        .map(|(chunk, count)| {
            let mut rng = mc.rng(chunk);
            let mut hits = vec![0u64; patterns];
            let tally = |e1: f64, e2: f64, hits: &mut [u64]| {
                let mut idx = 0;
                for i in 0..m {
                    if offset[i] + config.a[(i, 0)] * e1 + config.a[(i, 1)] * e2 >= 0.0 {
                        idx |= 1 << i;
                    }
                }
                hits[idx] += 1;
            };
            let draws = if mc.antithetic { count / 2 } else { count };
            for _ in 0..draws {
                let (e1, e2) = latent(&mut rng);
                tally(e1, e2, &mut hits);
                if mc.antithetic {
                    tally(-e1, -e2, &mut hits);
                }
            }
            hits
        })
        .collect();
    let t = mc.trials as f64;
    let t_eff = if mc.antithetic { t / 2.0 } else { t };
    Ok((0..patterns)
        .map(|j| {
            let p = partial.iter().map(|h| h[j]).sum::<u64>() as f64 / t;
            (p, (p * (1.0 - p) / t_eff).sqrt())
        })
        .collect())
}

/// Exact Fisher information of the quantized receiver with an error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactFim {
    pub matrix: Matrix2<f64>,
    /// Entry-wise gap between the Richardson-extrapolated and plain central
    /// differences, summed over snapshots.
    pub error: Matrix2<f64>,
}

/// Pattern gradients over `(phi, tau)` at one snapshot, plain and extrapolated.
fn pattern_gradients(
    config: &DemodConfig,
    snap: &SnapshotModel,
    gain: f64,
    step: f64,
) -> (Vec<f64>, Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let m = config.channels();
    let base: Vec<f64> = (0..m).map(|i| gain * snap.mean[i]).collect();
    let probs = pattern_probabilities(config, &base);
    let patterns = probs.len();
    let mut plain = vec![[0.0; 2]; patterns];
    let mut rich = vec![[0.0; 2]; patterns];
    for j in 0..2 {
        let dir: Vec<f64> = (0..m).map(|i| gain * snap.jacobian[(i, j)]).collect();
        let scale = dir.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
        if scale == 0.0 {
            continue;
        }
        let unit: Vec<f64> = dir.iter().map(|d| d / scale).collect();
        let at = |eps: f64| -> Vec<f64> {
            let c: Vec<f64> = base.iter().zip(&unit).map(|(b, u)| b + eps * u).collect();
            pattern_probabilities(config, &c)
        };
        let central = |eps: f64| -> Vec<f64> {
            let (p, q) = (at(eps), at(-eps));
            p.iter().zip(&q).map(|(a, b)| (a - b) / (2.0 * eps)).collect()
        };
        let coarse = central(step);
        let fine = central(0.5 * step);
        for k in 0..patterns {
            plain[k][j] = fine[k] * scale;
            rich[k][j] = (4.0 * fine[k] - coarse[k]) / 3.0 * scale;
        }
    }
    (probs, plain, rich)
}

fn score_outer(probs: &[f64], grads: &[[f64; 2]]) -> Matrix2<f64> {
    let mut f = Matrix2::zeros();
    for (p, g) in probs.iter().zip(grads) {
        if *p > 1e-300 {
            f += Matrix2::new(g[0] * g[0], g[0] * g[1], g[0] * g[1], g[1] * g[1]) / *p;
        }
    }
    f
}

/// Exact Fisher information `sum_n sum_r (d p / d theta)(d p / d theta)^T / p` for `M <= 3`.
///
/// Pattern probabilities come from latent-plane quadrature; their derivatives
/// along the snapshot Jacobian use central differences with Richardson
/// extrapolation, `step` being measured in units of the scaled channel mean.
pub fn exact_fim_small_m(
    config: &DemodConfig,
    state: &ChannelState,
    wave: &PilotWaveform,
    snapshots: usize,
    step: f64,
) -> Result<ExactFim> {
    if config.channels() > MAX_EXACT_CHANNELS {
        return Err(Error::Unsupported(format!(
            "exact Fisher information needs at most {MAX_EXACT_CHANNELS} channels, got {}",
            config.channels()
        )));
    }
    if snapshots == 0 {
        return Err(Error::Config("need at least one snapshot".into()));
    }
    if !(step > 0.0) {
        return Err(Error::Config(format!("finite-difference step {step} must be positive")));
    }
    let terms = (0..snapshots)
        .into_par_iter()
        .map(|n| {
            let snap = snapshot(config, state, wave, n)?;
            let (probs, plain, rich) = pattern_gradients(config, &snap, state.gain, step);
            let f_rich = score_outer(&probs, &rich);
            let f_plain = score_outer(&probs, &plain);
            Ok((f_rich, (f_rich - f_plain).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mats, errs): (Vec<_>, Vec<_>) = terms.into_iter().unzip();
    Ok(ExactFim { matrix: pairwise_sum(&mats), error: pairwise_sum(&errs) })
}
