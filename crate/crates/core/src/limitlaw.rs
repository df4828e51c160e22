//! The limiting spectral law of the product ensemble.
//!
//! The scaled squared singular values of `X2 X1` converge to the probability
//! measure with density `(4/27) h(4x/27)` on `(0, 27/4)`, where
//!
//! `h(y) = (3 sqrt 3 / 4 pi) [(1+sqrt(1-y))^{1/3} - (1-sqrt(1-y))^{1/3}] / y^{2/3}`.
//!
//! The same `h` gives the asymptotic zero distribution `nu^xi` of the scaled
//! polynomials (support `(0, 27 xi^2/4)`), so one family covers both. The
//! density blows up like `x^{-2/3}` at the hard edge and vanishes like a
//! square root at the soft edge; the CDF cache clusters its nodes there.

use crate::quad::{integrate_interval, QuadError};
use std::f64::consts::PI;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LimitLawError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature failure: {0}")]
    Quad(#[from] QuadError),
}

/// Number of cached CDF nodes.
const CDF_GRID: usize = 4096;

/// `h(y)` on `(0,1)`.
///
/// `1 - sqrt(1-y)` is computed as `y/(1 + sqrt(1-y))` and the cube-root
/// difference switches to its series once `sqrt(1-y) < 1e-4`, where direct
/// evaluation loses half the digits to cancellation.
pub fn h_density(y: f64) -> Result<f64, LimitLawError> {
    if !(y > 0.0 && y < 1.0) {
        return Err(LimitLawError::Domain(format!("h is defined on (0,1), got {y}")));
    }
    let amp = 3.0 * 3.0f64.sqrt() / (4.0 * PI);
    let s = (1.0 - y).sqrt();
    let diff = if s < 1e-4 {
        // (1+s)^{1/3} - (1-s)^{1/3} = 2s/3 + 10 s^3/81 + 44 s^5/729 + ...
        2.0 * s / 3.0 + 10.0 * s.powi(3) / 81.0 + 44.0 * s.powi(5) / 729.0
    } else {
        let t_plus = 1.0 + s;
        let t_minus = y / t_plus;
        t_plus.cbrt() - t_minus.cbrt()
    };
    Ok(amp * diff / y.powf(2.0 / 3.0))
}

/// Density of the limit law with scale `xi`: `(4/(27 xi^2)) h(4x/(27 xi^2))`
/// on `(0, 27 xi^2/4)`, zero elsewhere.
pub fn mu_density(x: f64, xi: f64) -> f64 {
    if !(xi > 0.0) || !x.is_finite() {
        return f64::NAN;
    }
    let scale = 27.0 * xi * xi / 4.0;
    if x <= 0.0 || x >= scale {
        return 0.0;
    }
    let y = x / scale;
    4.0 / (27.0 * xi * xi) * h_density(y).unwrap_or(0.0)
}

/// Upper support endpoint `27 xi^2 / 4`.
pub fn support_end(xi: f64) -> f64 {
    27.0 * xi * xi / 4.0
}

/// CDF of the limit law by edge-substituted quadrature (abs err <= 1e-9).
///
/// This is the direct high-accuracy query; use [`LimitDensity`] for repeated
/// evaluation against a cached grid.
pub fn mu_cdf(x: f64, xi: f64) -> f64 {
    let end = support_end(xi);
    if x <= 0.0 {
        return 0.0;
    }
    if x >= end {
        return 1.0;
    }
    // integrate over whichever side is shorter and use mass 1 on the other
    if x <= 0.5 * end {
        let r = integrate_interval(|t| mu_density(t, xi), 0.0, x, 1e-11, Some((-2.0 / 3.0, 0.0)))
            .expect("mu density is finite on the interior");
        r.value.clamp(0.0, 1.0)
    } else {
        let r = integrate_interval(|t| mu_density(t, xi), x, end, 1e-11, Some((0.0, 0.5)))
            .expect("mu density is finite on the interior");
        (1.0 - r.value).clamp(0.0, 1.0)
    }
}

/// `m`-th moment of the limit law by quadrature (rel err <= 1e-8); scales as
/// `xi^{2m}`.
pub fn mu_moment(m: u32, xi: f64) -> Result<f64, LimitLawError> {
    if m > 20 {
        return Err(LimitLawError::Domain(format!("moments supported up to m = 20, got {m}")));
    }
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(LimitLawError::Domain(format!("xi must be positive, got {xi}")));
    }
    let end = support_end(xi);
    let r = integrate_interval(
        |x| x.powi(m as i32) * mu_density(x, xi),
        0.0,
        end,
        1e-10,
        Some((-2.0 / 3.0, 0.5)),
    )?;
    Ok(r.value)
}

/// Fuss–Catalan number `binom(3m, m)/(2m+1)`: the closed form the moments of
/// the `xi = 1` law follow. Used as a derived oracle after being validated
/// against quadrature.
pub fn fuss_catalan(m: u32) -> f64 {
    let m = m as u64;
    let mut acc = 1.0f64;
    // binom(3m, m) = prod_{i=1..m} (2m+i)/i
    for i in 1..=m {
        acc *= (2 * m + i) as f64 / i as f64;
    }
    acc / (2 * m + 1) as f64
}

/// Marchenko–Pastur density (square case): `sqrt((4-x)/x)/(2 pi)` on `(0,4)`.
pub fn mp_density(x: f64) -> f64 {
    if x <= 0.0 || x >= 4.0 {
        return 0.0;
    }
    ((4.0 - x) / x).sqrt() / (2.0 * PI)
}

/// The limit law with its cached CDF grid.
///
/// Nodes follow `x = end * S(u)` with the quintic smoothstep
/// `S(u) = u^3 (10 - 15u + 6u^2)`, clustering cubically at both edges; the
/// CDF is then nearly linear in `u` at the hard edge. Queries interpolate
/// with monotone cubic Hermite (Fritsch–Carlson) and stay within the grid's
/// cumulative quadrature accuracy (~1e-10).
#[derive(Clone, Debug)]
pub struct LimitDensity {
    xi: f64,
    end: f64,
    xs: Vec<f64>,
    cdf: Vec<f64>,
    slopes: Vec<f64>,
}

impl LimitDensity {
    pub fn new(xi: f64) -> Result<Self, LimitLawError> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(LimitLawError::Domain(format!("xi must be positive, got {xi}")));
        }
        let end = support_end(xi);
        let smooth = |u: f64| u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
        let xs: Vec<f64> = (0..=CDF_GRID)
            .map(|i| end * smooth(i as f64 / CDF_GRID as f64))
            .collect();
        let mut cdf = Vec::with_capacity(xs.len());
        cdf.push(0.0);
        let mut acc = 0.0f64;
        for i in 1..xs.len() {
            let (a, b) = (xs[i - 1], xs[i]);
            let edge = if i == 1 {
                Some((-2.0 / 3.0, 0.0))
            } else if i == xs.len() - 1 {
                Some((0.0, 0.5))
            } else {
                None
            };
            let r = integrate_interval(|t| mu_density(t, xi), a, b, 3e-14, edge)?;
            acc += r.value;
            cdf.push(acc.min(1.0));
        }
        // renormalize the tiny quadrature drift so the grid ends exactly at 1
        let total = *cdf.last().unwrap();
        for v in cdf.iter_mut() {
            *v /= total;
        }
        let slopes = fritsch_carlson_slopes(&xs, &cdf);
        Ok(LimitDensity { xi, end, xs, cdf, slopes })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Support interval `(0, 27 xi^2/4)`.
    pub fn support(&self) -> (f64, f64) {
        (0.0, self.end)
    }

    pub fn density(&self, x: f64) -> f64 {
        mu_density(x, self.xi)
    }

    /// Grid-interpolated CDF; monotone, 0 at 0 and 1 at the soft edge.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= self.end {
            return 1.0;
        }
        let i = self.xs.partition_point(|&v| v <= x).saturating_sub(1);
        let i = i.min(self.xs.len() - 2);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1) = (self.cdf[i], self.cdf[i + 1]);
        let (m0, m1) = (self.slopes[i], self.slopes[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * m1;
        v.clamp(0.0, 1.0)
    }

    pub fn moment(&self, m: u32) -> Result<f64, LimitLawError> {
        mu_moment(m, self.xi)
    }

    /// CSV export `x,pdf,cdf` on a uniform grid of `count` points.
    pub fn write_curve_csv<W: Write>(
        &self,
        mut w: W,
        start: f64,
        stop: f64,
        count: usize,
    ) -> std::io::Result<()> {
        writeln!(w, "x,pdf,cdf")?;
        for i in 0..count {
            let x = if count == 1 {
                start
            } else {
                start + (stop - start) * i as f64 / (count - 1) as f64
            };
            writeln!(w, "{x},{},{}", self.density(x), self.cdf(x))?;
        }
        Ok(())
    }
}

/// Monotonicity-preserving Hermite slopes (Fritsch–Carlson).
fn fritsch_carlson_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut d = vec![0.0f64; n - 1];
    for i in 0..n - 1 {
        d[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    }
    let mut m = vec![0.0f64; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for i in 1..n - 1 {
        m[i] = if d[i - 1] * d[i] <= 0.0 { 0.0 } else { 0.5 * (d[i - 1] + d[i]) };
    }
    for i in 0..n - 1 {
        if d[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
        } else {
            let a = m[i] / d[i];
            let b = m[i + 1] / d[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                m[i] = tau * a * d[i];
                m[i + 1] = tau * b * d[i];
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_interval;

    const SOFT_EDGE: f64 = 27.0 / 4.0;

    #[test]
    fn h_integrates_to_one() {
        let r = integrate_interval(
            |y| h_density(y).unwrap(),
            0.0,
            1.0,
            1e-11,
            Some((-2.0 / 3.0, 0.5)),
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.value - 1.0).abs() <= 1e-10, "int h = {}", r.value);
    }

    #[test]
    fn h_small_y_constant() {
        // y^{2/3} h(y) -> (3 sqrt3/4pi) 2^{1/3} as y -> 0+; the approach rate
        // is (y/2)^{1/3}/2^{1/3} ~ 6.3e-4 at y = 1e-9
        let y = 1e-9f64;
        let c = y.powf(2.0 / 3.0) * h_density(y).unwrap();
        let expect = 3.0 * 3.0f64.sqrt() / (4.0 * PI) * 2.0f64.cbrt();
        let rate = (y / 2.0).cbrt() / 2.0f64.cbrt();
        assert!((c - expect).abs() <= 1.5 * rate * expect);
        assert!((c - expect).abs() <= 1e-3 * expect);
    }

    #[test]
    fn h_vanishes_at_one() {
        assert!(h_density(1.0 - 1e-12).unwrap() < 1e-5);
        assert!(h_density(1.0).is_err());
        assert!(h_density(0.0).is_err());
    }

    #[test]
    fn h_series_switch_is_seamless() {
        // h varies by ~2 eps_s/s relative across the crossover; a branch bug
        // would jump by far more than that
        let eps_s = 1e-9;
        let h_lo = h_density(1.0 - (1e-4f64 - eps_s).powi(2)).unwrap();
        let h_hi = h_density(1.0 - (1e-4f64 + eps_s).powi(2)).unwrap();
        let allowed = 5.0 * (eps_s / 1e-4) * h_hi.abs();
        assert!((h_lo - h_hi).abs() <= allowed);
    }

    #[test]
    fn mu_density_edges_and_scaling() {
        assert_eq!(mu_density(SOFT_EDGE, 1.0), 0.0);
        assert_eq!(mu_density(-1.0, 1.0), 0.0);
        // hard edge constant
        let x = 1e-9f64;
        let c = x.powf(2.0 / 3.0) * mu_density(x, 1.0);
        let expect = 3.0f64.sqrt() / (2.0 * PI);
        assert!((c - expect).abs() <= 1e-3 * expect, "{c} vs {expect}");
        // scaling form
        let lhs = mu_density(2.0, 3.0);
        let rhs = mu_density(2.0 / 9.0, 1.0) / 9.0;
        assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs());
    }

    #[test]
    fn soft_edge_square_root_constant() {
        let x = SOFT_EDGE - 1e-8;
        let c = mu_density(x, 1.0) / (SOFT_EDGE - x).sqrt();
        let expect = 4.0 / (81.0 * PI);
        assert!((c - expect).abs() <= 1e-3 * expect, "{c} vs {expect}");
    }

    #[test]
    fn cdf_endpoints_and_accuracy() {
        assert_eq!(mu_cdf(0.0, 1.0), 0.0);
        assert!((mu_cdf(SOFT_EDGE, 1.0) - 1.0).abs() <= 1e-9);
        let law = LimitDensity::new(1.0).unwrap();
        // direct quadrature vs cached grid on a sweep
        for i in 1..40 {
            let x = SOFT_EDGE * i as f64 / 40.0;
            let direct = mu_cdf(x, 1.0);
            let cached = law.cdf(x);
            assert!(
                (direct - cached).abs() <= 2e-9,
                "cdf mismatch at {x}: {direct} vs {cached}"
            );
        }
    }

    #[test]
    fn cdf_strictly_increasing_inside_support() {
        let law = LimitDensity::new(1.0).unwrap();
        let mut prev = 0.0;
        for i in 1..=100 {
            let x = SOFT_EDGE * i as f64 / 101.0;
            let v = law.cdf(x);
            assert!(v > prev, "cdf not strictly increasing at {x}");
            prev = v;
        }
    }

    #[test]
    fn moments_match_fuss_catalan() {
        let expect = [1.0, 1.0, 3.0, 12.0, 55.0, 273.0];
        for (m, &e) in expect.iter().enumerate() {
            assert_eq!(fuss_catalan(m as u32), e);
            let q = mu_moment(m as u32, 1.0).unwrap();
            assert!(
                (q - e).abs() <= 1e-6 * e,
                "moment {m}: quadrature {q} vs oracle {e}"
            );
        }
    }

    #[test]
    fn moment_scaling_in_xi() {
        let m = 3u32;
        let base = mu_moment(m, 1.0).unwrap();
        let scaled = mu_moment(m, 3.0).unwrap();
        let expect = base * 3.0f64.powi(2 * m as i32);
        assert!((scaled - expect).abs() <= 1e-7 * expect);
    }

    #[test]
    fn marchenko_pastur_baseline() {
        assert_eq!(mp_density(4.0), 0.0);
        assert_eq!(mp_density(0.0), 0.0);
        let mass = integrate_interval(mp_density, 0.0, 4.0, 1e-11, Some((-0.5, 0.5))).unwrap();
        assert!((mass.value - 1.0).abs() <= 1e-10);
        let mean =
            integrate_interval(|x| x * mp_density(x), 0.0, 4.0, 1e-11, Some((-0.5, 0.5))).unwrap();
        assert!((mean.value - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn curve_csv_shape() {
        let law = LimitDensity::new(1.0).unwrap();
        let mut buf = Vec::new();
        law.write_curve_csv(&mut buf, 0.0, SOFT_EDGE, 5).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,pdf,cdf\n"));
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().last().unwrap().ends_with(",0,1"));
    }
}
