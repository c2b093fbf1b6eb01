//! Explicit feature map for the additive chi-squared kernel
//! `k(x, y) = sum_i 2 x_i y_i / (x_i + y_i)`.
//!
//! The kernel is homogeneous, so per dimension `k(x, y) = sqrt(xy) K(log y - log x)`
//! with signature `K(l) = sech(l / 2)`. The signature is restricted to one
//! period `[-P/2, P/2]` and expanded as a Fourier series with frequency step
//! `L = 2 pi / P`; keeping the constant term and the first harmonic gives
//! three features per input dimension:
//!
//! ```text
//! [ sqrt(x c0),  sqrt(2 x c1) cos(L log x),  sqrt(2 x c1) sin(L log x) ]
//! ```
//!
//! where `c_j = (1/P) * integral over [-P/2, P/2] of sech(l/2) cos(j L l) dl`.

use std::f64::consts::PI;

use super::RallyError;

/// Features produced per input dimension.
pub const MAP_WIDTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi2Map {
    period: f64,
    freq: f64,
    coeffs: [f64; 2],
}

fn signature(l: f64) -> f64 {
    1.0 / (l / 2.0).cosh()
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(a + i as f64 * h)
        })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

impl Chi2Map {
    pub fn new(period: f64) -> Result<Self, RallyError> {
        if !(period.is_finite() && period > 0.0) {
            return Err(RallyError::BadConfig(format!("chi2 period must be positive, got {period}")));
        }
        let freq = 2.0 * PI / period;
        let half = period / 2.0;
        let coeff = |j: f64| {
            (simpson(|l| signature(l) * (j * freq * l).cos(), -half, half, 2048) / period).max(0.0)
        };
        Ok(Chi2Map {
            period,
            freq,
            coeffs: [coeff(0.0), coeff(1.0)],
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Maps one nonnegative value to its three features.
    #[inline]
    pub fn map_value(&self, x: f64) -> [f64; MAP_WIDTH] {
        if x <= 0.0 {
            return [0.0; MAP_WIDTH];
        }
        let phase = self.freq * x.ln();
        let harmonic = (2.0 * x * self.coeffs[1]).sqrt();
        [(x * self.coeffs[0]).sqrt(), harmonic * phase.cos(), harmonic * phase.sin()]
    }

    pub fn map(&self, x: &[f32]) -> Result<Vec<f32>, RallyError> {
        let mut out = Vec::with_capacity(x.len() * MAP_WIDTH);
        for (i, &v) in x.iter().enumerate() {
            if v < 0.0 || v.is_nan() {
                return Err(RallyError::NegativeInput { index: i, value: v as f64 });
            }
            out.extend(self.map_value(v as f64).iter().map(|&f| f as f32));
        }
        Ok(out)
    }
}

pub fn chi2_feature_map(x: &[f32], period: f64) -> Result<Vec<f32>, RallyError> {
    Chi2Map::new(period)?.map(x)
}

/// The exact additive chi-squared kernel; terms with `x_i + y_i = 0` vanish.
pub fn additive_chi2_kernel(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| if a + b > 0.0 { 2.0 * a * b / (a + b) } else { 0.0 })
        .sum()
}
