//! Scalar special functions: Gaussian tail, bivariate normal CDF and binary
//! entropy.
//!
//! The bivariate CDF follows Genz's double-precision rework of the
//! Drezner–Wesolowsky single-integral reduction: fixed-node Gauss–Legendre
//! quadrature of the arcsine integral for moderate correlations, and an
//! expansion around the degenerate distribution for `|rho| > 0.925`.

#![allow(clippy::excessive_precision)]

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Magnitude beyond which an upper integration limit is treated as infinite.
pub const INFINITE_LIMIT: f64 = 1e10;

const TWO_PI: f64 = 2.0 * PI;
const SQRT_TWO_PI: f64 = 2.506_628_274_631_000_5;

/// Gaussian tail probability `Q(x) = P(Z > x)` for `Z ~ N(0, 1)`.
#[inline]
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal CDF, `1 - Q(x)` evaluated without cancellation.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    q_function(-x)
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_TWO_PI
}

/// Arguments of a standard bivariate normal CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvnSpec {
    /// Standardized upper limit of the first coordinate.
    pub upper_x: f64,
    /// Standardized upper limit of the second coordinate.
    pub upper_y: f64,
    /// Correlation coefficient.
    pub rho: f64,
}

impl BvnSpec {
    pub fn new(upper_x: f64, upper_y: f64, rho: f64) -> Self {
        Self { upper_x, upper_y, rho }
    }

    /// Standardizes limits of a zero-mean pair with the given covariance block.
    pub fn from_covariance(
        upper_x: f64,
        upper_y: f64,
        var_x: f64,
        var_y: f64,
        cov_xy: f64,
    ) -> Result<Self> {
        if !(var_x > 0.0 && var_y > 0.0) {
            return Err(Error::Domain(format!(
                "variances must be positive, got {var_x} and {var_y}"
            )));
        }
        let sx = var_x.sqrt();
        let sy = var_y.sqrt();
        Ok(Self::new(upper_x / sx, upper_y / sy, cov_xy / (sx * sy)))
    }
}

// Gauss-Legendre half-rules (weight, abscissa), negative abscissae only, for 6, 12 and 20 points.
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705e+00, -0.9324695142031522e+00),
    (0.3607615730481384e+00, -0.6612093864662647e+00),
    (0.4679139345726904e+00, -0.2386191860831970e+00),
];

const GL12: [(f64, f64); 6] = [
    (0.4717533638651177e-01, -0.9815606342467191e+00),
    (0.1069393259953183e+00, -0.9041172563704750e+00),
    (0.1600783285433464e+00, -0.7699026741943050e+00),
    (0.2031674267230659e+00, -0.5873179542866171e+00),
    (0.2334925365383547e+00, -0.3678314989981802e+00),
    (0.2491470458134029e+00, -0.1252334085114692e+00),
];

pub(crate) const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-01, -0.9931285991850949e+00),
    (0.4060142980038694e-01, -0.9639719272779138e+00),
    (0.6267204833410906e-01, -0.9122344282513259e+00),
    (0.8327674157670475e-01, -0.8391169718222188e+00),
    (0.1019301198172404e+00, -0.7463319064601508e+00),
    (0.1181945319615184e+00, -0.6360536807265150e+00),
    (0.1316886384491766e+00, -0.5108670019508271e+00),
    (0.1420961093183821e+00, -0.3737060887154196e+00),
    (0.1491729864726037e+00, -0.2277858511416451e+00),
    (0.1527533871307259e+00, -0.7652652113349733e-01),
];

fn half_rule(abs_rho: f64) -> &'static [(f64, f64)] {
    if abs_rho < 0.3 {
        &GL6
    } else if abs_rho < 0.75 {
        &GL12
    } else {
        &GL20
    }
}

/// `P(X > h, Y > k)` for a standard bivariate normal with correlation `r`.
fn upper_orthant(h: f64, k: f64, r: f64) -> f64 {
    let rule = half_rule(r.abs());
    let hk = h * k;

    if r.abs() < 0.925 {
        let mut bvn = 0.0;
        if r != 0.0 {
            let hs = 0.5 * (h * h + k * k);
            let asr = 0.5 * r.asin();
            for &(w, x) in rule {
                for sign in [-1.0, 1.0] {
                    let sn = (asr * (sign * x + 1.0)).sin();
                    bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn *= asr / TWO_PI;
        }
        return bvn + q_function(h) * q_function(k);
    }

    let (k, hk) = if r < 0.0 { (-k, -hk) } else { (k, hk) };
    let mut bvn = 0.0;
    if r.abs() < 1.0 {
        let a_sq = (1.0 - r) * (1.0 + r);
        let mut a = a_sq.sqrt();
        let b_sq = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let asr = -0.5 * (b_sq / a_sq + hk);
        if asr > -100.0 {
            bvn = a
                * asr.exp()
                * (1.0 - c * (b_sq - a_sq) * (1.0 - d * b_sq / 5.0) / 3.0
                    + c * d * a_sq * a_sq / 5.0);
        }
        if -hk < 100.0 {
            let b = b_sq.sqrt();
            bvn -= (-0.5 * hk).exp()
                * SQRT_TWO_PI
                * normal_cdf(-b / a)
                * b
                * (1.0 - c * b_sq * (1.0 - d * b_sq / 5.0) / 3.0);
        }
        a *= 0.5;
        for &(w, x) in rule {
            for sign in [-1.0, 1.0] {
                let xs = {
                    let t = a * (sign * x + 1.0);
                    t * t
                };
                let rs = (1.0 - xs).sqrt();
                let asr = -0.5 * (b_sq / xs + hk);
                if asr > -100.0 {
                    bvn += a
                        * w
                        * asr.exp()
                        * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                            - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn /= -TWO_PI;
    }
    if r > 0.0 {
        bvn + q_function(h.max(k))
    } else {
        -bvn + (q_function(h) - q_function(k)).max(0.0)
    }
}

/// Bivariate standard normal CDF `P(Z1 <= upper_x, Z2 <= upper_y)`.
///
/// Limits with magnitude above [`INFINITE_LIMIT`] are treated as infinite.
pub fn bvn_cdf(spec: BvnSpec) -> Result<f64> {
    let BvnSpec { upper_x, upper_y, rho } = spec;
    if rho.is_nan() || rho.abs() > 1.0 {
        return Err(Error::Domain(format!("correlation {rho} outside [-1, 1]")));
    }
    if upper_x.is_nan() || upper_y.is_nan() {
        return Err(Error::Domain("NaN integration limit".into()));
    }
    if upper_x < -INFINITE_LIMIT || upper_y < -INFINITE_LIMIT {
        return Ok(0.0);
    }
    let x_inf = upper_x > INFINITE_LIMIT;
    let y_inf = upper_y > INFINITE_LIMIT;
    match (x_inf, y_inf) {
        (true, true) => return Ok(1.0),
        (true, false) => return Ok(normal_cdf(upper_y)),
        (false, true) => return Ok(normal_cdf(upper_x)),
        (false, false) => {}
    }
    let p = upper_orthant(-upper_x, -upper_y, rho);
    Ok(p.clamp(0.0, 1.0))
}

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::Domain(format!("probability {z} outside [0, 1]")));
    }
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(term(z) + term(1.0 - z))
}
