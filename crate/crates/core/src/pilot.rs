//! Binary pilot sequences and their band-limited periodic baseband waveforms.
//!
//! The transmitter repeats two length-`K` chip sequences with a rectangular
//! chip pulse. The receiver's ideal low-pass filter keeps every Fourier-series
//! harmonic of the period `T = K * T_b` up to the bandwidth `B`. The harmonics
//! of the rectangle train are known in closed form (chip-sequence DFT times
//! the pulse spectrum), so the filtered waveform and its time derivative are
//! exact at every point of the fine grid.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Length of a GPS C/A code.
pub const CA_CODE_LENGTH: usize = 1023;

/// Default chip duration in seconds.
pub const DEFAULT_SYMBOL_DURATION: f64 = 977.52e-9;

/// Default receiver bandwidth in hertz.
pub const DEFAULT_BANDWIDTH: f64 = 1.023e6;

/// Default number of fine-grid points per receiver sample.
pub const DEFAULT_OVERSAMPLE: usize = 16;

/// Relative mismatch tolerated between one period and a whole number of samples.
///
/// The printed chip duration is rounded to 10 ps, which leaves a 3 ppm
/// mismatch against `f_s = 2B`.
pub const COMMENSURABILITY_TOLERANCE: f64 = 1e-5;

// G2 output taps (1-based stage numbers) per PRN, IS-GPS-200 table 3-Ia.
const CA_G2_TAPS: [(usize, usize); 32] = [
    (2, 6),
    (3, 7),
    (4, 8),
    (5, 9),
    (1, 9),
    (2, 10),
    (1, 8),
    (2, 9),
    (3, 10),
    (2, 3),
    (3, 4),
    (5, 6),
    (6, 7),
    (7, 8),
    (8, 9),
    (9, 10),
    (1, 4),
    (2, 5),
    (3, 6),
    (4, 7),
    (5, 8),
    (6, 9),
    (1, 3),
    (4, 6),
    (5, 7),
    (6, 8),
    (7, 9),
    (8, 10),
    (1, 6),
    (2, 7),
    (3, 8),
    (4, 9),
];

/// Generates the GPS C/A code for `prn` in 1..=32 as chip bits (0 or 1).
///
/// G1 = 1 + x^3 + x^10 and G2 = 1 + x^2 + x^3 + x^6 + x^8 + x^9 + x^10, both
/// seeded with all ones.
pub fn ca_code_bits(prn: u8) -> Result<Vec<u8>> {
    let (t1, t2) = *CA_G2_TAPS
        .get(usize::from(prn).wrapping_sub(1))
        .ok_or_else(|| Error::Config(format!("PRN {prn} outside 1..=32")))?;
    let mut g1 = [1u8; 10];
    let mut g2 = [1u8; 10];
    let mut out = Vec::with_capacity(CA_CODE_LENGTH);
    for _ in 0..CA_CODE_LENGTH {
        out.push(g1[9] ^ g2[t1 - 1] ^ g2[t2 - 1]);
        let f1 = g1[2] ^ g1[9];
        let f2 = g2[1] ^ g2[2] ^ g2[5] ^ g2[7] ^ g2[8] ^ g2[9];
        g1.rotate_right(1);
        g2.rotate_right(1);
        g1[0] = f1;
        g2[0] = f2;
    }
    Ok(out)
}

/// Maps chip bits to antipodal symbols with 0 -> +1 and 1 -> -1.
pub fn bits_to_symbols(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect()
}

/// Which pair of binary sequences drives the two pilot inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    /// GPS C/A Gold codes; requires 1023 symbols.
    GoldCode { prn_a: u8, prn_b: u8 },
    /// Independent uniform ±1 symbols from a seeded generator.
    SeededRandom { seed: u64 },
}

/// Configuration of the periodic pilot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotSpec {
    /// Symbols per period.
    pub symbols: usize,
    /// Chip duration in seconds.
    pub symbol_duration: f64,
    /// One-sided receiver bandwidth in hertz; sampling runs at twice this.
    pub bandwidth: f64,
    /// Fine-grid points per receiver sample.
    pub oversample: usize,
    pub sequence: SequenceKind,
}

impl Default for PilotSpec {
    fn default() -> Self {
        Self {
            symbols: CA_CODE_LENGTH,
            symbol_duration: DEFAULT_SYMBOL_DURATION,
            bandwidth: DEFAULT_BANDWIDTH,
            oversample: DEFAULT_OVERSAMPLE,
            sequence: SequenceKind::GoldCode { prn_a: 1, prn_b: 2 },
        }
    }
}

impl PilotSpec {
    pub fn sample_rate(&self) -> f64 {
        2.0 * self.bandwidth
    }

    pub fn period(&self) -> f64 {
        self.symbols as f64 * self.symbol_duration
    }

    fn validate(&self) -> Result<()> {
        if self.symbols == 0 {
            return Err(Error::Config("pilot needs at least one symbol".into()));
        }
        if !(self.symbol_duration > 0.0 && self.symbol_duration.is_finite()) {
            return Err(Error::Config(format!(
                "symbol duration {} must be positive",
                self.symbol_duration
            )));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::Config(format!("bandwidth {} must be positive", self.bandwidth)));
        }
        if self.oversample < 4 {
            return Err(Error::Config(format!(
                "oversample factor {} below the minimum of 4",
                self.oversample
            )));
        }
        Ok(())
    }

    /// Receiver samples per period, provided the period is commensurate with `1/f_s`.
    pub fn samples_per_period(&self) -> Result<usize> {
        self.validate()?;
        let exact = self.period() * self.sample_rate();
        let rounded = exact.round();
        if rounded < 1.0 || (exact - rounded).abs() > COMMENSURABILITY_TOLERANCE * rounded {
            return Err(Error::Config(format!(
                "period of {exact} samples is not a whole number of receiver samples"
            )));
        }
        Ok(rounded as usize)
    }

    /// The two symbol vectors, deterministic given the spec.
    pub fn generate_sequences(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        match self.sequence {
            SequenceKind::GoldCode { prn_a, prn_b } => {
                if self.symbols != CA_CODE_LENGTH {
                    return Err(Error::Config(format!(
                        "Gold codes have {CA_CODE_LENGTH} symbols, spec asks for {}",
                        self.symbols
                    )));
                }
                if prn_a == prn_b {
                    return Err(Error::Config(format!("PRN pair ({prn_a},{prn_b}) is not distinct")));
                }
                Ok((
                    bits_to_symbols(&ca_code_bits(prn_a)?),
                    bits_to_symbols(&ca_code_bits(prn_b)?),
                ))
            }
            SequenceKind::SeededRandom { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                    (0..self.symbols)
                        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                        .collect()
                };
                let b1 = draw(&mut rng);
                let mut b2 = draw(&mut rng);
                while b2 == b1 {
                    b2 = draw(&mut rng);
                }
                Ok((b1, b2))
            }
        }
    }
}

/// One receiver sample of the pilot pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotSample {
    /// `x_n(tau)`.
    pub value: Vector2<f64>,
    /// `d x_n(tau) / d tau`, the negated time derivative.
    pub d_tau: Vector2<f64>,
}

/// Band-limited pilot waveforms over one period on the fine grid.
#[derive(Debug, Clone)]
pub struct PilotWaveform {
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub dx1_dt: Vec<f64>,
    pub dx2_dt: Vec<f64>,
    /// Fine-grid spacing in seconds.
    pub step: f64,
    pub oversample: usize,
    pub samples_per_period: usize,
    pub sample_rate: f64,
    /// Highest harmonic index kept by the low-pass filter.
    pub max_harmonic: usize,
    // Fourier coefficients for harmonics 0..=max_harmonic of each input
    harmonics: [Vec<Complex64>; 2],
}

impl PilotWaveform {
    pub fn build(spec: &PilotSpec) -> Result<Self> {
        let samples_per_period = spec.samples_per_period()?;
        let (b1, b2) = spec.generate_sequences()?;
        let grid = samples_per_period * spec.oversample;
        let period = spec.period();
        let max_harmonic = in_band_harmonics(spec.bandwidth * period).min((samples_per_period - 1) / 2);
        if 2 * max_harmonic >= grid {
            return Err(Error::Config(format!(
                "fine grid of {grid} points cannot hold harmonics up to {max_harmonic}"
            )));
        }

        let mut planner = FftPlanner::<f64>::new();
        let h1 = harmonic_coefficients(&mut planner, &b1, max_harmonic);
        let h2 = harmonic_coefficients(&mut planner, &b2, max_harmonic);
        let (x1, dx1_dt) = synthesize(&mut planner, &h1, grid, period);
        let (x2, dx2_dt) = synthesize(&mut planner, &h2, grid, period);

        Ok(Self {
            b1,
            b2,
            x1,
            x2,
            dx1_dt,
            dx2_dt,
            step: period / grid as f64,
            oversample: spec.oversample,
            samples_per_period,
            sample_rate: spec.sample_rate(),
            max_harmonic,
            harmonics: [h1, h2],
        })
    }

    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.step * self.len() as f64
    }

    /// Converts a delay to a whole number of fine-grid steps.
    pub fn delay_steps(&self, tau: f64) -> Result<i64> {
        let steps = tau / self.step;
        let rounded = steps.round();
        if !steps.is_finite() || (steps - rounded).abs() > 1e-6 {
            return Err(Error::OffGrid { tau, step: self.step });
        }
        Ok(rounded as i64)
    }

    /// Fine-grid index of time `n / f_s - tau`, reduced modulo the period.
    fn grid_index(&self, n: usize, delay_steps: i64) -> usize {
        let len = self.len() as i64;
        let t = (n % self.samples_per_period) as i64 * self.oversample as i64;
        (t - delay_steps).rem_euclid(len) as usize
    }

    /// Pilot sample for snapshot `n` (0-based, time `n / f_s`) at a grid-aligned delay.
    pub fn sample(&self, n: usize, delay_steps: i64) -> PilotSample {
        let i = self.grid_index(n, delay_steps);
        PilotSample {
            value: Vector2::new(self.x1[i], self.x2[i]),
            d_tau: Vector2::new(-self.dx1_dt[i], -self.dx2_dt[i]),
        }
    }

    /// Like [`PilotWaveform::sample`], with the delay given in seconds.
    pub fn sample_at(&self, tau: f64, n: usize) -> Result<PilotSample> {
        Ok(self.sample(n, self.delay_steps(tau)?))
    }

    /// Waveform pair and its time derivative at an arbitrary time, by direct
    /// summation of the Fourier series.
    pub fn evaluate(&self, t: f64) -> (Vector2<f64>, Vector2<f64>) {
        let period = self.period();
        let mut value = [0.0; 2];
        let mut slope = [0.0; 2];
        for (i, coeffs) in self.harmonics.iter().enumerate() {
            value[i] = coeffs[0].re;
            for (h, c) in coeffs.iter().enumerate().skip(1) {
                let w = 2.0 * PI * h as f64 / period;
                let e = Complex64::from_polar(1.0, w * (t % period));
                let term = c * e;
                value[i] += 2.0 * term.re;
                slope[i] -= 2.0 * w * term.im;
            }
        }
        (Vector2::new(value[0], value[1]), Vector2::new(slope[0], slope[1]))
    }

    /// Raw rectangular chip train on the fine grid, for the first or second input.
    pub fn raw_rectangle(&self, second: bool) -> Vec<f64> {
        let b = if second { &self.b2 } else { &self.b1 };
        let len = self.len();
        (0..len).map(|p| b[p * b.len() / len]).collect()
    }

    /// Writes `t_seconds,x1,x2,dx1_dt,dx2_dt` rows for the whole period.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t_seconds,x1,x2,dx1_dt,dx2_dt")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
                i as f64 * self.step,
                self.x1[i],
                self.x2[i],
                self.dx1_dt[i],
                self.dx2_dt[i]
            )?;
        }
        Ok(())
    }
}

/// Filtered waveform and its time derivative on a `grid`-point period.
/// Largest harmonic strictly below the band edge `edge = B T`.
///
/// An edge within [`COMMENSURABILITY_TOLERANCE`] of an integer is taken as
/// that integer, so the harmonic sitting on the edge is dropped.
fn in_band_harmonics(edge: f64) -> usize {
    let nearest = edge.round();
    let edge = if (edge - nearest).abs() <= COMMENSURABILITY_TOLERANCE * nearest.max(1.0) {
        nearest
    } else {
        edge
    };
    (edge.ceil() as usize).saturating_sub(1)
}

/// Fourier coefficients `c_0..=c_H` of the chip train with unit rectangular chips.
fn harmonic_coefficients(planner: &mut FftPlanner<f64>, symbols: &[f64], max_harmonic: usize) -> Vec<Complex64> {
    let k_len = symbols.len();
    let mut spectrum: Vec<Complex64> = symbols.iter().map(|&b| Complex64::new(b, 0.0)).collect();
    planner.plan_fft_forward(k_len).process(&mut spectrum);
    (0..=max_harmonic as i64)
        .map(|h| spectrum[h.rem_euclid(k_len as i64) as usize] / k_len as f64 * rect_pulse_harmonic(h, k_len))
        .collect()
}

/// Real waveform and time derivative on a `grid`-point period from its positive harmonics.
fn synthesize(planner: &mut FftPlanner<f64>, harmonics: &[Complex64], grid: usize, period: f64) -> (Vec<f64>, Vec<f64>) {
    let mut coeff = vec![Complex64::new(0.0, 0.0); grid];
    let mut deriv = vec![Complex64::new(0.0, 0.0); grid];
    for (h, &c) in harmonics.iter().enumerate() {
        let w = Complex64::new(0.0, 2.0 * PI * h as f64 / period);
        coeff[h] = c;
        deriv[h] = c * w;
        if h > 0 {
            coeff[grid - h] = c.conj();
            deriv[grid - h] = (c * w).conj();
        }
    }
    let inverse = planner.plan_fft_inverse(grid);
    inverse.process(&mut coeff);
    inverse.process(&mut deriv);
    (
        coeff.into_iter().map(|c| c.re).collect(),
        deriv.into_iter().map(|c| c.re).collect(),
    )
}

#[cfg(test)]
fn band_limit(
    planner: &mut FftPlanner<f64>,
    symbols: &[f64],
    grid: usize,
    max_harmonic: usize,
    period: f64,
) -> (Vec<f64>, Vec<f64>) {
    let h = harmonic_coefficients(planner, symbols, max_harmonic);
    synthesize(planner, &h, grid, period)
}

/// Fourier factor of a unit chip on `[0, T_b)` at harmonic `h` of a `K`-chip period.
fn rect_pulse_harmonic(h: i64, k_len: usize) -> Complex64 {
    if h == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if h % k_len as i64 == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let z = 2.0 * PI * h as f64 / k_len as f64;
    // (1 - e^{-iz}) / (iz)
    let num = Complex64::new(1.0 - z.cos(), z.sin());
    num / Complex64::new(0.0, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn chips_to_octal(bits: &[u8]) -> u32 {
        bits.iter().take(10).fold(0, |acc, &b| (acc << 1) | u32::from(b))
    }

    #[test]
    fn ca_code_first_chips_match_published_octal() {
        // First ten chips in octal, IS-GPS-200 table 3-Ia.
        let table = [(1u8, 0o1440), (2, 0o1620), (3, 0o1710), (4, 0o1744), (5, 0o1133)];
        for (prn, octal) in table {
            assert_eq!(chips_to_octal(&ca_code_bits(prn).unwrap()), octal, "PRN {prn}");
        }
    }

    #[test]
    fn ca_code_is_balanced_and_periodic_autocorrelation_is_three_valued() {
        let s = bits_to_symbols(&ca_code_bits(1).unwrap());
        let sum: f64 = s.iter().sum();
        assert_eq!(sum, -1.0);
        for lag in 1..CA_CODE_LENGTH {
            let r: f64 = (0..CA_CODE_LENGTH).map(|i| s[i] * s[(i + lag) % CA_CODE_LENGTH]).sum();
            assert!([-1.0, -65.0, 63.0].contains(&r), "lag {lag}: {r}");
        }
    }

    #[test]
    fn bad_prn_is_rejected() {
        assert!(ca_code_bits(0).is_err());
        assert!(ca_code_bits(33).is_err());
    }

    #[test]
    fn gold_code_needs_1023_symbols() {
        let spec = PilotSpec { symbols: 511, ..PilotSpec::default() };
        assert!(matches!(spec.generate_sequences(), Err(Error::Config(_))));
        let same = PilotSpec { sequence: SequenceKind::GoldCode { prn_a: 3, prn_b: 3 }, ..PilotSpec::default() };
        assert!(same.generate_sequences().is_err());
    }

    #[test]
    fn seeded_sequences_are_deterministic_and_distinct() {
        let spec = PilotSpec {
            symbols: 4,
            sequence: SequenceKind::SeededRandom { seed: 1 },
            ..PilotSpec::default()
        };
        let (a1, a2) = spec.generate_sequences().unwrap();
        let (c1, c2) = spec.generate_sequences().unwrap();
        assert_eq!(a1, c1);
        assert_eq!(a2, c2);
        assert_ne!(a1, a2);
        assert!(a1.iter().chain(&a2).all(|v| v.abs() == 1.0));
        let one = PilotSpec { symbols: 1, ..spec };
        let (o1, o2) = one.generate_sequences().unwrap();
        assert_ne!(o1, o2);
    }

    #[test]
    fn default_grid_matches_receiver() {
        let spec = PilotSpec::default();
        assert_eq!(spec.samples_per_period().unwrap(), 2046);
        let wave = PilotWaveform::build(&spec).unwrap();
        assert_eq!(wave.len(), 2046 * 16);
        assert_eq!(wave.max_harmonic, 1022);
        assert_relative_eq!(wave.step, 1.0 / (2.0 * DEFAULT_BANDWIDTH * 16.0), max_relative = 1e-5);
    }

    #[test]
    fn spec_validation() {
        let bad = PilotSpec { oversample: 2, ..PilotSpec::default() };
        assert!(bad.samples_per_period().is_err());
        let off = PilotSpec { symbol_duration: 1.25e-6, ..PilotSpec::default() };
        assert!(matches!(off.samples_per_period(), Err(Error::Config(_))));
        let neg = PilotSpec { bandwidth: -1.0, ..PilotSpec::default() };
        assert!(neg.samples_per_period().is_err());
    }

    #[test]
    fn series_evaluation_matches_grid() {
        let spec = PilotSpec {
            symbols: 31,
            symbol_duration: 1.0 / 1.023e6,
            sequence: SequenceKind::SeededRandom { seed: 11 },
            ..PilotSpec::default()
        };
        let wave = PilotWaveform::build(&spec).unwrap();
        for i in [0, 1, 17, 400, wave.len() - 1] {
            let (v, d) = wave.evaluate(i as f64 * wave.step);
            assert_relative_eq!(v[0], wave.x1[i], epsilon = 1e-12);
            assert_relative_eq!(v[1], wave.x2[i], epsilon = 1e-12);
            assert_relative_eq!(d[0], wave.dx1_dt[i], epsilon = 1e-12 * 1e7);
            assert_relative_eq!(d[1], wave.dx2_dt[i], epsilon = 1e-12 * 1e7);
        }
    }

    #[test]
    fn band_edge_harmonic_is_excluded() {
        assert_eq!(in_band_harmonics(1023.003), 1022);
        assert_eq!(in_band_harmonics(1023.0), 1022);
        assert_eq!(in_band_harmonics(1023.4), 1023);
        assert_eq!(in_band_harmonics(0.5), 0);
    }

    #[test]
    fn constant_sequence_is_dc() {
        let ones = vec![1.0; 8];
        let mut planner = FftPlanner::new();
        let (x, dx) = band_limit(&mut planner, &ones, 8 * 2 * 4, 8, 8e-6);
        for (v, d) in x.iter().zip(&dx) {
            assert!((v - 1.0).abs() < 1e-12);
            assert!(d.abs() < 1e-12);
        }
    }

    #[test]
    fn delay_must_be_on_grid() {
        let spec = PilotSpec {
            symbols: 31,
            sequence: SequenceKind::SeededRandom { seed: 3 },
            symbol_duration: 1.0 / 1.023e6,
            ..PilotSpec::default()
        };
        let wave = PilotWaveform::build(&spec).unwrap();
        assert_eq!(wave.delay_steps(0.0).unwrap(), 0);
        assert_eq!(wave.delay_steps(3.0 * wave.step).unwrap(), 3);
        assert!(matches!(wave.delay_steps(0.5 * wave.step), Err(Error::OffGrid { .. })));
        let s0 = wave.sample_at(0.0, 0).unwrap();
        assert_eq!(s0.value, Vector2::new(wave.x1[0], wave.x2[0]));
        assert_eq!(s0.d_tau, Vector2::new(-wave.dx1_dt[0], -wave.dx2_dt[0]));
        let full = wave.sample_at(wave.period(), 5).unwrap();
        assert_eq!(full, wave.sample_at(0.0, 5).unwrap());
        let shifted = wave.sample(2, 3);
        let idx = 2 * wave.oversample - 3;
        assert_eq!(shifted.d_tau[1], -wave.dx2_dt[idx]);
    }
}
