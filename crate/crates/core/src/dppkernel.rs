//! The finite-`N` determinantal structure of the product ensemble.
//!
//! The squared singular values form a determinantal point process with
//! correlation kernel
//!
//! `K_N(x, y) = sum_{j<N} h_j^{-1} Q_j(x) p_j(y)`,   `h_j = (j!)^3`,
//!
//! where `p_j` are the biorthogonal polynomials (equal to the multiple
//! orthogonal polynomials `P_j^{(0,0)}`, evaluated through the four-term
//! recurrence) and `Q_j(x) = int w(x,s) q_j(s) ds` is the weighted transform
//! of the monic Laguerre polynomial `q_j`. Since `int s^{i-1} e^{-x/s-s} ds
//! = rho_i(x)`, each `Q_j` expands exactly in the `rho` family with the
//! monomial coefficients of `q_j`; the expansion cancels heavily, so the hot
//! path runs in double-double precision and falls back to a log-scaled sum
//! when magnitudes leave the `f64` range. Kernel summands are assembled from
//! the normalized pairs `Q_j/sqrt(h_j)`, `p_j/sqrt(h_j)` — `(j!)^3`
//! overflows `f64` at `j = 58`, so nothing unnormalized is ever exponentiated.

use crate::dd::Dd;
use crate::logval::LogVal;
use crate::mop;
use crate::quad::{integrate_interval, integrate_semi_infinite_scaled, QuadError};
use crate::specfun::{ln_factorial, rho, rho_dd, rho_mellin_moment};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DppError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature failure: {0}")]
    Quad(#[from] QuadError),
    #[error("special function failure: {0}")]
    SpecFun(#[from] crate::specfun::SpecFunError),
}

/// How kernel summands are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScalingPolicy {
    /// Double-double where every intermediate fits `f64`, log-scaled beyond.
    #[default]
    Auto,
    /// Force the log-scaled path (cheap, loses cancelled digits).
    LogScaled,
}

const MAX_KERNEL_N: usize = 512;
/// Largest kernel size served by the double-double path: the transform sums
/// cancel by ~2.2 bits per degree, which exhausts double-double around
/// degree 45.
const DD_KERNEL_LIMIT: usize = 40;

/// Precomputed, overflow-safe representation of `{q_j, p_j, h_j}` for
/// evaluating `K_N`.
pub struct KernelContext {
    n: usize,
    /// Exact monomial coefficients of monic Laguerre `q_j`, `j < N`.
    laguerre_coeffs: Vec<Vec<BigInt>>,
    /// The same coefficients rounded to double-double (`None` once they
    /// leave `f64` range).
    laguerre_dd: Vec<Vec<Option<Dd>>>,
    /// `(sign, ln|coeff|)` for the log-scaled path.
    laguerre_ln: Vec<Vec<(i8, f64)>>,
    /// Exact monomial coefficients of `p_j`, `j < N`.
    p_coeffs: Vec<mop::ExactPolynomial>,
    /// `ln h_j = 3 ln j!`.
    log_h: Vec<f64>,
    policy: ScalingPolicy,
    /// Big-float coefficient table for sizes beyond the double-double range.
    bf_coeffs: Option<Vec<Vec<astro_float::BigFloat>>>,
    bf_precision: usize,
}

fn bigint_to_dd(b: &BigInt) -> Option<Dd> {
    let hi = b.to_f64()?;
    if !hi.is_finite() {
        return None;
    }
    let lo = (b - BigInt::from_f64(hi)?).to_f64()?;
    if !lo.is_finite() {
        return None;
    }
    Some(Dd::from_f64(hi).add_f64(lo))
}

fn ln_bigint_abs(b: &BigInt) -> f64 {
    if b.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = b.bits();
    if bits <= 900 {
        b.magnitude().to_f64().unwrap().ln()
    } else {
        let shift = bits - 64;
        let top: BigInt = b.abs() >> shift;
        top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
    }
}

impl KernelContext {
    pub fn new(n: usize) -> Result<Self, DppError> {
        Self::with_policy(n, ScalingPolicy::Auto)
    }

    pub fn with_policy(n: usize, policy: ScalingPolicy) -> Result<Self, DppError> {
        if n == 0 || n > MAX_KERNEL_N {
            return Err(DppError::Domain(format!(
                "kernel size must be in 1..={MAX_KERNEL_N}, got {n}"
            )));
        }
        // monic Laguerre by recurrence: q_{j+1} = (x - (2j+1)) q_j - j^2 q_{j-1}
        let mut laguerre_coeffs: Vec<Vec<BigInt>> = Vec::with_capacity(n);
        laguerre_coeffs.push(vec![BigInt::one()]);
        if n > 1 {
            laguerre_coeffs.push(vec![-BigInt::one(), BigInt::one()]);
        }
        for j in 1..n.saturating_sub(1) {
            let (prev, cur) = {
                let cur = &laguerre_coeffs[j];
                let prev = &laguerre_coeffs[j - 1];
                let mut next = vec![BigInt::zero(); j + 2];
                for (i, c) in cur.iter().enumerate() {
                    next[i + 1] += c; // x * q_j
                    next[i] -= BigInt::from(2 * j as u64 + 1) * c;
                }
                for (i, c) in prev.iter().enumerate() {
                    next[i] -= BigInt::from((j * j) as u64) * c;
                }
                (next, ())
            };
            let _ = cur;
            laguerre_coeffs.push(prev);
        }
        let laguerre_dd: Vec<Vec<Option<Dd>>> = laguerre_coeffs
            .iter()
            .map(|row| row.iter().map(bigint_to_dd).collect())
            .collect();
        let laguerre_ln: Vec<Vec<(i8, f64)>> = laguerre_coeffs
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| {
                        let sign = if c.is_zero() {
                            0
                        } else if c.is_negative() {
                            -1
                        } else {
                            1
                        };
                        (sign, ln_bigint_abs(c))
                    })
                    .collect()
            })
            .collect();
        let p_coeffs = (0..n)
            .map(|j| mop::p2_coeffs(j).expect("degree below context bound"))
            .collect();
        let log_h = (0..n).map(|j| 3.0 * ln_factorial(j as u32)).collect();
        let bf_precision = crate::bigf::precision_for_degree(n);
        let bf_coeffs = if policy == ScalingPolicy::Auto && n > DD_KERNEL_LIMIT {
            let ctx = crate::bigf::BfCtx::new(bf_precision);
            Some(
                laguerre_coeffs
                    .iter()
                    .map(|row| row.iter().map(|c| ctx.from_bigint(c)).collect())
                    .collect(),
            )
        } else {
            None
        };
        Ok(KernelContext {
            n,
            laguerre_coeffs,
            laguerre_dd,
            laguerre_ln,
            p_coeffs,
            log_h,
            policy,
            bf_coeffs,
            bf_precision,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log_h(&self, j: usize) -> f64 {
        self.log_h[j]
    }

    pub fn laguerre_coeffs(&self, j: usize) -> &[BigInt] {
        &self.laguerre_coeffs[j]
    }

    pub fn p_polynomial(&self, j: usize) -> &mop::ExactPolynomial {
        &self.p_coeffs[j]
    }

    /// `Q_j(x)` for all `j < N` as log-signed values, sharing one `rho`
    /// family evaluation.
    fn q_all_log(&self, x: f64) -> Result<Vec<LogVal>, DppError> {
        let top = (self.n - 1) as u32;
        if let Some(bf_coeffs) = &self.bf_coeffs {
            let mut ctx = crate::bigf::BfCtx::new(self.bf_precision);
            let rhos = ctx.rho_family(top as usize, x);
            let out = bf_coeffs
                .iter()
                .map(|row| {
                    let mut acc = ctx.from_f64(0.0);
                    for (i, c) in row.iter().enumerate() {
                        acc = acc.add(
                            &c.mul(&rhos[i], self.bf_precision, astro_float::RoundingMode::ToEven),
                            self.bf_precision,
                            astro_float::RoundingMode::ToEven,
                        );
                    }
                    crate::bigf::bf_to_logval(&acc)
                })
                .collect();
            return Ok(out);
        }
        let dd_family = if self.policy == ScalingPolicy::Auto && self.n <= DD_KERNEL_LIMIT + 1 {
            rho_dd(top, x)
        } else {
            None
        };
        if let Some(rhos) = dd_family {
            let mut out = Vec::with_capacity(self.n);
            let mut ok = true;
            'outer: for j in 0..self.n {
                let mut acc = Dd::ZERO;
                for (i, c) in self.laguerre_dd[j].iter().enumerate() {
                    match c {
                        Some(c) => acc = acc.add(c.mul(rhos[i])),
                        None => {
                            ok = false;
                            break 'outer;
                        }
                    }
                }
                if !acc.is_finite() {
                    ok = false;
                    break;
                }
                out.push(LogVal::from_f64(acc.to_f64()));
            }
            if ok {
                return Ok(out);
            }
        }
        // log-scaled fallback: shifted signed accumulation
        let fam = rho(top, x)?;
        let mut out = Vec::with_capacity(self.n);
        for j in 0..self.n {
            let terms: Vec<(i8, f64)> = self.laguerre_ln[j]
                .iter()
                .enumerate()
                .filter(|(_, (s, _))| *s != 0)
                .map(|(i, (s, ln_c))| (*s, ln_c + fam.ln_value(i as u32)))
                .collect();
            let m = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                out.push(LogVal::zero());
                continue;
            }
            let mut pos = 0.0f64;
            let mut neg = 0.0f64;
            for (s, ln_t) in terms {
                let v = (ln_t - m).exp();
                if s > 0 {
                    pos += v;
                } else {
                    neg += v;
                }
            }
            let diff = pos - neg;
            out.push(LogVal::from_f64(diff).scale_ln(m));
        }
        Ok(out)
    }

    /// The Bessel-weighted Laguerre transform `Q_j(x) = int w(x,s) q_j(s) ds`,
    /// evaluated by its exact expansion in the `rho` family.
    pub fn q_transform(&self, j: usize, x: f64) -> Result<LogVal, DppError> {
        if j >= self.n {
            return Err(DppError::Domain(format!("q_transform index {j} >= context size {}", self.n)));
        }
        if !(x > 0.0) {
            return Err(DppError::Domain(format!("q_transform requires x > 0, got {x}")));
        }
        Ok(self.q_all_log(x)?[j])
    }

    /// Kernel value `K_N(x, y)`; every summand is assembled from the
    /// normalized pair `(Q_j/sqrt h_j)(p_j/sqrt h_j)`.
    pub fn kernel_eval(&self, x: f64, y: f64) -> Result<f64, DppError> {
        if !(x > 0.0 && y > 0.0) {
            return Err(DppError::Domain(format!("kernel_eval requires x, y > 0, got ({x}, {y})")));
        }
        let qs = self.q_all_log(x)?;
        let zero = BigRational::zero();
        let ps = mop::eval_sequence_log(self.n - 1, 1, y, &zero, &zero);
        let mut sum = 0.0f64;
        let mut comp = 0.0f64; // Neumaier compensation
        for j in 0..self.n {
            let q = qs[j];
            let p = ps[j];
            if q.is_zero() || p.is_zero() {
                continue;
            }
            let term = (q.sign() * p.sign()) as f64
                * (q.ln_abs() - 0.5 * self.log_h[j] + p.ln_abs() - 0.5 * self.log_h[j]).exp();
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        }
        Ok(sum + comp)
    }

    /// `N * K_N(N^2 x, N^2 x)`, the density-scale kernel diagonal.
    pub fn scaled_diag(&self, x: f64) -> Result<f64, DppError> {
        let n2 = (self.n * self.n) as f64;
        Ok(self.n as f64 * self.kernel_eval(n2 * x, n2 * x)?)
    }

    /// CSV export `x,scaled_diag,mu_density` over a uniform grid.
    pub fn write_diag_csv<W: Write>(
        &self,
        mut w: W,
        start: f64,
        stop: f64,
        count: usize,
    ) -> Result<(), DppError> {
        writeln!(w, "x,scaled_diag,mu_density").map_err(|e| DppError::Domain(e.to_string()))?;
        for i in 0..count {
            let x = if count == 1 {
                start
            } else {
                start + (stop - start) * i as f64 / (count - 1) as f64
            };
            let d = self.scaled_diag(x)?;
            let mu = crate::limitlaw::mu_density(x, 1.0);
            writeln!(w, "{x},{d},{mu}").map_err(|e| DppError::Domain(e.to_string()))?;
        }
        Ok(())
    }
}

/// Biorthogonality residual `|int Q_k p_j dx - delta_jk h_j| / sqrt(h_j h_k)`
/// with the integral done by quadrature (substituted `x = u^2`, exponential
/// tail).
pub fn biorth_check(ctx: &KernelContext, j: usize, k: usize) -> Result<f64, DppError> {
    if j > 30 || k > 30 {
        return Err(DppError::Domain(format!("biorth_check supports j, k <= 30, got ({j}, {k})")));
    }
    if j >= ctx.n || k >= ctx.n {
        return Err(DppError::Domain(format!(
            "biorth_check indices ({j}, {k}) exceed context size {}",
            ctx.n
        )));
    }
    let zero = BigRational::zero();
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let x = u * u;
        let q = ctx.q_all_log(x).map(|qs| qs[k]).unwrap_or_else(|_| LogVal::zero());
        let p = mop::eval_sequence_log(j, 1, x, &zero, &zero)[j];
        if q.is_zero() || p.is_zero() {
            return 0.0;
        }
        (q.sign() * p.sign()) as f64 * (q.ln_abs() + p.ln_abs() + (2.0 * u).ln()).exp()
    };
    let scale = (j as f64 + k as f64 / 2.0 + 4.0).max(4.0);
    let r = integrate_semi_infinite_scaled(integrand, 1e-11, None, scale)?;
    let h_j = (3.0 * ln_factorial(j as u32)).exp();
    let expected = if j == k { h_j } else { 0.0 };
    let norm = (0.5 * (ctx.log_h[j] + ctx.log_h[k])).exp();
    Ok((r.value - expected).abs() / norm)
}

fn validate_points(points: &[f64], max_n: usize) -> Result<(), DppError> {
    if points.is_empty() || points.len() > max_n {
        return Err(DppError::Domain(format!(
            "point configuration size must be 1..={max_n}, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(DppError::Domain("points must be positive and finite".into()));
    }
    Ok(())
}

/// `ln C_N = -ln(N! * prod_{j<N} (j!)^3)`.
fn ln_norm_const(n: usize) -> f64 {
    let mut acc = -ln_factorial(n as u32);
    for j in 0..n {
        acc -= 3.0 * ln_factorial(j as u32);
    }
    acc
}

/// Joint density of the squared singular values in the one-matrix form
/// `C_N Vandermonde(x) det[rho_{j-1}(x_i)]`, log-scaled. Coincident points
/// return exact zero.
pub fn jpdf_one_matrix(points: &[f64]) -> Result<LogVal, DppError> {
    validate_points(points, 6)?;
    let n = points.len();
    // Vandermonde with sign
    let mut vdm = LogVal::one();
    for i in 0..n {
        for j in i + 1..n {
            let d = points[j] - points[i];
            if d == 0.0 {
                return Ok(LogVal::zero());
            }
            vdm = vdm.mul(&LogVal::from_f64(d));
        }
    }
    // det[rho_{j-1}(x_i)] with per-row log shifts
    let mut mat = DMatrix::<f64>::zeros(n, n);
    let mut shift = 0.0f64;
    for i in 0..n {
        let fam = rho((n - 1) as u32, points[i])?;
        let row_max = (0..n).map(|j| fam.ln_value(j as u32)).fold(f64::NEG_INFINITY, f64::max);
        for j in 0..n {
            mat[(i, j)] = (fam.ln_value(j as u32) - row_max).exp();
        }
        shift += row_max;
    }
    let det = mat.lu().determinant();
    let det_log = LogVal::from_f64(det).scale_ln(shift);
    Ok(vdm.mul(&det_log).scale_ln(ln_norm_const(n)))
}

/// The same joint density in determinantal form `(1/N!) det[K_N(x_i, x_j)]`,
/// log-scaled.
pub fn jpdf_kernel_det(points: &[f64]) -> Result<LogVal, DppError> {
    validate_points(points, 6)?;
    let n = points.len();
    let ctx = KernelContext::new(n)?;
    let mut mat = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            mat[(i, j)] = ctx.kernel_eval(points[i], points[j])?;
        }
    }
    let det = mat.lu().determinant();
    Ok(LogVal::from_f64(det).scale_ln(-ln_factorial(n as u32)))
}

/// Exact Mellin Gram determinant `det[(i-1)! (i+j-2)!]_{i,j<=n}`.
pub fn mellin_gram_det(n: usize) -> Result<BigInt, DppError> {
    if n == 0 || n > 8 {
        return Err(DppError::Domain(format!("mellin_gram_det supports 1..=8, got {n}")));
    }
    let m: Vec<Vec<BigInt>> = (1..=n)
        .map(|i| {
            (1..=n)
                .map(|j| rho_mellin_moment((i - 1) as u32, (j - 1) as u32).unwrap())
                .collect()
        })
        .collect();
    Ok(det_bigint(&m))
}

fn det_bigint(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    // Laplace expansion along the first row; n <= 8 keeps this cheap
    let mut acc = BigInt::zero();
    for j in 0..n {
        if m[0][j].is_zero() {
            continue;
        }
        let minor: Vec<Vec<BigInt>> = (1..n)
            .map(|i| (0..n).filter(|&c| c != j).map(|c| m[i][c].clone()).collect())
            .collect();
        let term = &m[0][j] * det_bigint(&minor);
        if j % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

/// Checks the exact normalization identity behind the one-matrix density:
/// the Andreief reduction of its integral equals `N! prod_{j<N} (j!)^3`,
/// i.e. the Mellin Gram determinant equals `prod_{j<N} (j!)^3`.
pub fn normalization_identity(n: usize) -> Result<bool, DppError> {
    let gram = mellin_gram_det(n)?;
    let mut expect = BigInt::one();
    for j in 0..n {
        let f = crate::specfun::factorial(j as u32);
        expect *= &f * &f * &f;
    }
    Ok(gram == expect)
}

/// Report from the exact average-characteristic-polynomial check.
#[derive(Clone, Debug)]
pub struct AvgCharPolyReport {
    pub n: usize,
    /// Coefficients of `E[prod (z - x_i)]`, ascending, exact.
    pub computed: Vec<BigRational>,
    /// Coefficients of `p_N`, ascending, exact.
    pub expected: Vec<BigRational>,
    pub matches: bool,
}

/// Computes `E[prod_i (z - x_i)]` exactly via the Andreief/Mellin reduction
/// (all moments are integers) and compares with `p_N`; supports `N = 1, 2`.
pub fn avg_char_poly_check(n: usize) -> Result<AvgCharPolyReport, DppError> {
    if !(n == 1 || n == 2) {
        return Err(DppError::Domain(format!("avg_char_poly_check supports N = 1 or 2, got {n}")));
    }
    let m = |a: u32, b: u32| BigRational::from_integer(rho_mellin_moment(a, b).unwrap());
    // entries M_{ij}(z) = z m_{i-1, j-1} - m_{i, j-1} as linear polynomials
    let lin = |i: u32, j: u32| -> (BigRational, BigRational) { (-m(i, j - 1), m(i - 1, j - 1)) };
    let mut poly: Vec<BigRational> = match n {
        1 => {
            let (c0, c1) = lin(1, 1);
            vec![c0, c1]
        }
        _ => {
            let a = lin(1, 1);
            let b = lin(1, 2);
            let c = lin(2, 1);
            let d = lin(2, 2);
            // det = a*d - b*c, quadratic in z
            let mut out = vec![BigRational::zero(); 3];
            out[0] = &a.0 * &d.0 - &b.0 * &c.0;
            out[1] = &a.0 * &d.1 + &a.1 * &d.0 - &b.0 * &c.1 - &b.1 * &c.0;
            out[2] = &a.1 * &d.1 - &b.1 * &c.1;
            out
        }
    };
    // normalization C_N N! = 1/prod_{j<N}(j!)^3
    let mut denom = BigRational::one();
    for j in 0..n {
        let f = BigRational::from_integer(crate::specfun::factorial(j as u32));
        denom *= &f * &f * &f;
    }
    for c in poly.iter_mut() {
        *c /= &denom;
    }
    let expected = mop::p2_coeffs(n).unwrap().coeffs;
    let matches = poly == expected;
    Ok(AvgCharPolyReport { n, computed: poly, expected, matches })
}

/// Kernel trace `int K_N(x,x) dx`, which biorthogonality forces to equal `N`.
pub fn kernel_trace(ctx: &KernelContext) -> Result<f64, DppError> {
    let n = ctx.n;
    let scale = ((n * n) as f64 * 7.0).max(4.0);
    let r = integrate_semi_infinite_scaled(
        |x| ctx.kernel_eval(x, x).unwrap_or(f64::NAN),
        1e-9,
        Some(-1.0 / 3.0),
        scale,
    )?;
    Ok(r.value)
}

/// `int_0^inf N K_N(N^2 x, N^2 x) dx` — the trace identity in scaled
/// variables, equal to 1.
pub fn scaled_diag_mass(ctx: &KernelContext) -> Result<f64, DppError> {
    let r = integrate_semi_infinite_scaled(
        |x| ctx.scaled_diag(x).unwrap_or(f64::NAN),
        1e-8,
        Some(-1.0 / 3.0),
        8.0,
    )?;
    Ok(r.value)
}
