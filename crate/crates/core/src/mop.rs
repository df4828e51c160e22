//! Multiple orthogonal polynomials associated with Macdonald functions.
//!
//! `P_k^{(gamma,kappa)}` is the monic type-II multiple orthogonal polynomial
//! for the weight pair `(x^kappa rho_gamma, x^kappa rho_{gamma+1})` on
//! `(0, inf)`. Coefficients are exact rationals; the four-term recurrence
//!
//! `x P_k = P_{k+1} + b_k P_k + c_k P_{k-1} + d_k P_{k-2}`
//!
//! drives both stable scaled evaluation (monomial expansion is hopeless in
//! floating point past degree ~20 because the coefficients reach `(k!)^3`)
//! and zero-finding through the eigenvalues of the associated banded
//! lower-Hessenberg matrix, refined by bracketed Newton steps.

use crate::logval::LogVal;
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::io::Write;
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error)]
pub enum MopError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("failed to separate zeros of degree-{degree} polynomial: worst residual {residual:e} at index {index}")]
    RootSeparation { degree: usize, index: usize, residual: f64 },
}

fn rational(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

fn check_params(kappa: &Rational, gamma: &Rational) -> Result<(), MopError> {
    if *kappa <= rational(-1) {
        return Err(MopError::Domain(format!("kappa must exceed -1, got {kappa}")));
    }
    if *gamma < Rational::zero() {
        return Err(MopError::Domain(format!("gamma must be >= 0, got {gamma}")));
    }
    Ok(())
}

/// Monic polynomial with exact rational coefficients, tagged with its weight
/// parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactPolynomial {
    pub kappa: Rational,
    pub gamma: Rational,
    /// `c_0..c_k` in the monomial basis; `c_k = 1`.
    pub coeffs: Vec<Rational>,
}

impl ExactPolynomial {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, j: usize) -> &Rational {
        &self.coeffs[j]
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs.last().map(|c| c.is_one()).unwrap_or(false)
    }

    /// Horner evaluation in rational arithmetic.
    pub fn eval_exact(&self, x: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// JSON export with decimal-string rationals (`"num"` or `"num/den"`).
    pub fn to_json(&self) -> serde_json::Value {
        fn rat_str(r: &Rational) -> String {
            if r.denom().is_one() {
                r.numer().to_string()
            } else {
                format!("{}/{}", r.numer(), r.denom())
            }
        }
        serde_json::json!({
            "kappa": rat_str(&self.kappa),
            "gamma": rat_str(&self.gamma),
            "degree": self.degree(),
            "coeffs": self.coeffs.iter().map(rat_str).collect::<Vec<_>>(),
        })
    }
}

/// Four-term recurrence coefficients `(b_k, c_k, d_k)` as exact rationals.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrenceTriple {
    pub b: Rational,
    pub c: Rational,
    pub d: Rational,
}

/// Zeros of a scaled polynomial `P_{k,n}(x) = P_k(n^2 x)/n^{2k}`, sorted
/// ascending, together with the worst relative Newton correction left after
/// refinement.
#[derive(Clone, Debug)]
pub struct ZeroSet {
    pub k: usize,
    pub n: u32,
    pub zeros: Vec<f64>,
    pub refinement_residual: f64,
}

/// Uniform probability measure on a finite set of atoms.
#[derive(Clone, Debug)]
pub struct CountingMeasure {
    atoms: Vec<f64>,
}

impl CountingMeasure {
    pub fn from_sorted(atoms: Vec<f64>) -> Self {
        debug_assert!(atoms.windows(2).all(|w| w[0] <= w[1]));
        CountingMeasure { atoms }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weight_per_atom(&self) -> f64 {
        1.0 / self.atoms.len() as f64
    }

    pub fn total_mass(&self) -> f64 {
        1.0
    }

    pub fn moment(&self, m: u32) -> f64 {
        let k = self.atoms.len() as f64;
        self.atoms.iter().map(|z| z.powi(m as i32)).sum::<f64>() / k
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.atoms.partition_point(|&a| a <= x);
        idx as f64 / self.atoms.len() as f64
    }

    /// Sup-distance to a target CDF, evaluated from both sides of every atom.
    /// The lower gap compares against the target just below the atom so step
    /// targets that jump exactly at an atom are handled.
    pub fn ks_distance<F: Fn(f64) -> f64>(&self, target_cdf: F) -> f64 {
        let n = self.atoms.len() as f64;
        let mut worst = 0.0f64;
        for (i, &a) in self.atoms.iter().enumerate() {
            worst = worst.max((target_cdf(a.next_down()) - i as f64 / n).abs());
            worst = worst.max((target_cdf(a) - (i + 1) as f64 / n).abs());
        }
        worst
    }
}

/// Exact monomial coefficients of `P_k^{(gamma,kappa)}`.
///
/// The coefficient of `x^{k-j}` is
/// `a_k(j) = (-1)^j C(k,j) (k+1)_k (k+g+1)_k / ((k+1)_{k-j} (k+g+1)_{k-j})`,
/// built incrementally so the whole table costs `O(k)` rational products.
pub fn coeffs_exact(k: usize, kappa: &Rational, gamma: &Rational) -> Result<ExactPolynomial, MopError> {
    check_params(kappa, gamma)?;
    if k > 2000 {
        return Err(MopError::Domain(format!("degree {k} exceeds 2000")));
    }
    let kg = kappa + gamma;
    let mut coeffs = vec![Rational::zero(); k + 1];
    // walk j = 0..k; a_{j+1} = -a_j * (k-j)/(j+1) * (kappa+k-j) * (kappa+gamma+k-j)
    let mut a = Rational::one();
    coeffs[k] = a.clone();
    for j in 0..k {
        let kmj = rational((k - j) as i64);
        let factor = -(&kmj / rational((j + 1) as i64))
            * (kappa + &kmj)
            * (&kg + &kmj);
        a *= factor;
        coeffs[k - (j + 1)] = a.clone();
    }
    Ok(ExactPolynomial { kappa: kappa.clone(), gamma: gamma.clone(), coeffs })
}

/// Exact coefficients of the biorthogonal polynomial `p_k` for the two-matrix
/// product: coefficient of `x^j` is `(-1)^{k-j} (k!/j!)^3 / (k-j)!`.
pub fn p2_coeffs(k: usize) -> Result<ExactPolynomial, MopError> {
    if k > 2000 {
        return Err(MopError::Domain(format!("degree {k} exceeds 2000")));
    }
    let mut coeffs = vec![Rational::zero(); k + 1];
    let mut c = Rational::one();
    coeffs[k] = c.clone();
    // c_{j} = -c_{j+1} * (j+1)^3 / (k-j)
    for j in (0..k).rev() {
        let jp = rational((j + 1) as i64);
        c = -c * (&jp * &jp * &jp) / rational((k - j) as i64);
        coeffs[j] = c.clone();
    }
    Ok(ExactPolynomial { kappa: Rational::zero(), gamma: Rational::zero(), coeffs })
}

/// Recurrence coefficients from the closed form
/// `b_k = (k+kappa+1)(3k+kappa+2 gamma) - (kappa+1)(gamma-1)`,
/// `c_k = k (k+kappa)(k+kappa+gamma)(3k+2 kappa+gamma)`,
/// `d_k = k(k-1)(k+kappa-1)(k+kappa)(k+kappa+gamma-1)(k+kappa+gamma)`.
pub fn recurrence_coeffs(k: usize, kappa: &Rational, gamma: &Rational) -> Result<RecurrenceTriple, MopError> {
    check_params(kappa, gamma)?;
    let kk = rational(k as i64);
    let one = Rational::one();
    let b = (&kk + kappa + &one) * (rational(3) * &kk + kappa + rational(2) * gamma)
        - (kappa + &one) * (gamma - &one);
    let c = &kk * (&kk + kappa) * (&kk + kappa + gamma) * (rational(3) * &kk + rational(2) * kappa + gamma);
    let d = &kk
        * (&kk - &one)
        * (&kk + kappa - &one)
        * (&kk + kappa)
        * (&kk + kappa + gamma - &one)
        * (&kk + kappa + gamma);
    Ok(RecurrenceTriple { b, c, d })
}

/// Scaled recurrence coefficients `(b_j/n^2, c_j/n^4, d_j/n^6)` for
/// `j = 0..k`, in `f64`.
fn scaled_recurrence_f64(k: usize, n: u32, kappa: &Rational, gamma: &Rational) -> Vec<(f64, f64, f64)> {
    let ka = kappa.to_f64().unwrap();
    let ga = gamma.to_f64().unwrap();
    let n2 = (n as f64) * (n as f64);
    let n4 = n2 * n2;
    let n6 = n4 * n2;
    (0..k)
        .map(|ju| {
            let j = ju as f64;
            let b = (j + ka + 1.0) * (3.0 * j + ka + 2.0 * ga) - (ka + 1.0) * (ga - 1.0);
            let c = j * (j + ka) * (j + ka + ga) * (3.0 * j + 2.0 * ka + ga);
            let d = j * (j - 1.0) * (j + ka - 1.0) * (j + ka) * (j + ka + ga - 1.0) * (j + ka + ga);
            (b / n2, c / n4, d / n6)
        })
        .collect()
}

/// One recurrence sweep: value and derivative of `P_{k,n}` at `x`, with the
/// shared renormalization log-factor.
fn recurrence_eval(coeffs: &[(f64, f64, f64)], x: f64) -> (f64, f64, f64) {
    let k = coeffs.len();
    // s: S_j values, ds: derivatives; index shifts as we walk j = 0..k-1
    let (mut s2, mut s1, mut s0) = (0.0f64, 0.0f64, 1.0f64);
    let (mut d2, mut d1, mut d0) = (0.0f64, 0.0f64, 0.0f64);
    let mut scale_ln = 0.0f64;
    for &(b, c, d) in coeffs.iter().take(k) {
        let s_next = (x - b) * s0 - c * s1 - d * s2;
        let d_next = s0 + (x - b) * d0 - c * d1 - d * d2;
        s2 = s1;
        s1 = s0;
        s0 = s_next;
        d2 = d1;
        d1 = d0;
        d0 = d_next;
        let m = s0.abs().max(s1.abs()).max(s2.abs());
        if m > 1e100 || (m < 1e-100 && m > 0.0) {
            let inv = 1.0 / m;
            s0 *= inv;
            s1 *= inv;
            s2 *= inv;
            d0 *= inv;
            d1 *= inv;
            d2 *= inv;
            scale_ln += m.ln();
        }
    }
    (s0, d0, scale_ln)
}

/// Result of a scaled evaluation: the log-signed value plus a plain `f64`
/// when representable.
#[derive(Clone, Copy, Debug)]
pub struct ScaledEval {
    pub log: LogVal,
    pub value: Option<f64>,
}

/// One recurrence sweep returning `P_{j,n}(x)` for every `j = 0..=k_max` as
/// log-signed values. Shared by the kernel assembly, which needs the whole
/// family at once.
pub(crate) fn eval_sequence_log(
    k_max: usize,
    n: u32,
    x: f64,
    kappa: &Rational,
    gamma: &Rational,
) -> Vec<LogVal> {
    let coeffs = scaled_recurrence_f64(k_max, n, kappa, gamma);
    let mut out = Vec::with_capacity(k_max + 1);
    let (mut s2, mut s1, mut s0) = (0.0f64, 0.0f64, 1.0f64);
    let mut scale_ln = 0.0f64;
    out.push(LogVal::one());
    for &(b, c, d) in coeffs.iter() {
        let s_next = (x - b) * s0 - c * s1 - d * s2;
        s2 = s1;
        s1 = s0;
        s0 = s_next;
        let m = s0.abs().max(s1.abs()).max(s2.abs());
        if m > 1e100 || (m < 1e-100 && m > 0.0) {
            let inv = 1.0 / m;
            s0 *= inv;
            s1 *= inv;
            s2 *= inv;
            scale_ln += m.ln();
        }
        out.push(LogVal::from_f64(s0).scale_ln(scale_ln));
    }
    out
}

/// Evaluates `P_{k,n}(x) = P_k(n^2 x)/n^{2k}` by the four-term recurrence in
/// scaled form with periodic renormalization; never expands the monomial
/// basis in floating point.
pub fn eval_scaled(
    k: usize,
    n: u32,
    x: f64,
    kappa: &Rational,
    gamma: &Rational,
) -> Result<ScaledEval, MopError> {
    check_params(kappa, gamma)?;
    if k > 5000 {
        return Err(MopError::Domain(format!("degree {k} exceeds 5000")));
    }
    if n == 0 {
        return Err(MopError::Domain("scaling parameter n must be positive".into()));
    }
    if !x.is_finite() {
        return Err(MopError::Domain(format!("evaluation point must be finite, got {x}")));
    }
    let coeffs = scaled_recurrence_f64(k, n, kappa, gamma);
    let (val, _dval, scale_ln) = recurrence_eval(&coeffs, x);
    let log = LogVal::from_f64(val).scale_ln(scale_ln);
    Ok(ScaledEval { value: log.to_f64(), log })
}

/// Zeros of `P_{k,n}` as eigenvalues of the banded lower-Hessenberg matrix
/// with rows `(d_j, c_j, b_j, 1)` in scaled form, refined by bracketed
/// Newton iteration on the recurrence evaluation (bisection fallback).
pub fn zeros(k: usize, n: u32, kappa: &Rational, gamma: &Rational) -> Result<ZeroSet, MopError> {
    check_params(kappa, gamma)?;
    if k == 0 || k > 2000 {
        return Err(MopError::Domain(format!("zeros requires 1 <= k <= 2000, got {k}")));
    }
    if n == 0 {
        return Err(MopError::Domain("scaling parameter n must be positive".into()));
    }
    let coeffs = scaled_recurrence_f64(k, n, kappa, gamma);
    let mut h = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        h[(j, j)] = coeffs[j].0;
        if j + 1 < k {
            h[(j, j + 1)] = 1.0;
        }
        if j >= 1 {
            h[(j, j - 1)] = coeffs[j].1;
        }
        if j >= 2 {
            h[(j, j - 2)] = coeffs[j].2;
        }
    }
    let eig = h.complex_eigenvalues();
    let mut estimates: Vec<f64> = eig.iter().map(|c| c.re).collect();
    estimates.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let span = estimates[k - 1] - estimates[0];
    let floor_gap = (span / k as f64).max(1e-12);
    let eval = |x: f64| recurrence_eval(&coeffs, x);

    let mut zeros_out = Vec::with_capacity(k);
    let mut worst_resid = 0.0f64;
    for i in 0..k {
        let lo0 = if i == 0 {
            (estimates[0] - floor_gap).max(0.0)
        } else {
            0.5 * (estimates[i - 1] + estimates[i])
        };
        let hi0 = if i == k - 1 {
            estimates[k - 1] + floor_gap
        } else {
            0.5 * (estimates[i] + estimates[i + 1])
        };
        let (mut lo, mut hi) = (lo0, hi0);
        let (mut flo, _, _) = eval(lo);
        let (fhi, _, _) = eval(hi);
        let bracketed = flo.signum() != fhi.signum() && flo != 0.0 && fhi != 0.0;

        let mut z = estimates[i].clamp(lo, hi);
        let mut residual = f64::INFINITY;
        for _ in 0..80 {
            let (f, df, _) = eval(z);
            if f == 0.0 {
                residual = 0.0;
                break;
            }
            if bracketed {
                if f.signum() == flo.signum() {
                    lo = z;
                    flo = f;
                } else {
                    hi = z;
                }
            }
            let step = f / df;
            residual = (step / z.abs().max(floor_gap)).abs();
            let mut next = z - step;
            if !next.is_finite() || (bracketed && (next <= lo || next >= hi)) {
                next = 0.5 * (lo + hi);
            }
            if (next - z).abs() <= 1e-16 * z.abs().max(floor_gap) {
                z = next;
                break;
            }
            z = next;
        }
        // final residual: relative Newton correction at the reported zero
        let (f, df, _) = eval(z);
        if df != 0.0 {
            residual = (f / df / z.abs().max(floor_gap)).abs();
        }
        worst_resid = worst_resid.max(residual);
        zeros_out.push(z);
    }

    zeros_out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for i in 0..k {
        let bad = zeros_out[i] <= 0.0 || (i > 0 && zeros_out[i] <= zeros_out[i - 1]);
        if bad {
            return Err(MopError::RootSeparation { degree: k, index: i, residual: worst_resid });
        }
    }
    if worst_resid > 1e-10 {
        return Err(MopError::RootSeparation {
            degree: k,
            index: 0,
            residual: worst_resid,
        });
    }
    Ok(ZeroSet { k, n, zeros: zeros_out, refinement_residual: worst_resid })
}

/// Normalized counting measure on the zeros (weight `1/k` each).
pub fn zero_counting_measure(z: &ZeroSet) -> CountingMeasure {
    CountingMeasure::from_sorted(z.zeros.clone())
}

/// Pass/fail report from [`structural_checks`].
#[derive(Clone, Debug)]
pub struct StructuralReport {
    pub k_max: usize,
    /// Strict interlacing of zeros of `P_k` and `P_{k+1}` for all `k < k_max`.
    pub interlacing_ok: bool,
    pub interlacing_failures: Vec<usize>,
    /// Gershgorin bound `sup|b| + sup|c| + sup|d| + 1` against all scaled
    /// zeros at `n = k_max`.
    pub gershgorin_ok: bool,
    pub gershgorin_bound: f64,
    pub max_scaled_zero: f64,
}

impl StructuralReport {
    pub fn all_ok(&self) -> bool {
        self.interlacing_ok && self.gershgorin_ok
    }
}

/// Verifies the zero structure up to degree `k_max`: strict interlacing of
/// consecutive zero sets, and the Gershgorin spectral-radius bound on the
/// scaled zeros. Failures are report entries, not errors.
pub fn structural_checks(k_max: usize, kappa: &Rational, gamma: &Rational) -> Result<StructuralReport, MopError> {
    check_params(kappa, gamma)?;
    if k_max > 500 {
        return Err(MopError::Domain(format!("k_max {k_max} exceeds 500")));
    }
    let mut interlacing_failures = Vec::new();
    if k_max >= 2 {
        let mut prev = zeros(1, 1, kappa, gamma)?;
        for k in 2..=k_max {
            let cur = zeros(k, 1, kappa, gamma)?;
            // zeros of P_{k-1} must fall strictly between consecutive zeros of P_k
            let ok = prev
                .zeros
                .iter()
                .enumerate()
                .all(|(i, &z)| cur.zeros[i] < z && z < cur.zeros[i + 1]);
            if !ok {
                interlacing_failures.push(k);
            }
            prev = cur;
        }
    }

    let n = (k_max.max(1)) as u32;
    let coeffs = scaled_recurrence_f64(k_max.max(1), n, kappa, gamma);
    let sup_b = coeffs.iter().map(|c| c.0.abs()).fold(0.0f64, f64::max);
    let sup_c = coeffs.iter().map(|c| c.1.abs()).fold(0.0f64, f64::max);
    let sup_d = coeffs.iter().map(|c| c.2.abs()).fold(0.0f64, f64::max);
    let bound = sup_b + sup_c + sup_d + 1.0;
    let max_scaled_zero = if k_max >= 1 {
        *zeros(k_max, n, kappa, gamma)?.zeros.last().unwrap()
    } else {
        0.0
    };

    Ok(StructuralReport {
        k_max,
        interlacing_ok: interlacing_failures.is_empty(),
        interlacing_failures,
        gershgorin_ok: max_scaled_zero <= bound,
        gershgorin_bound: bound,
        max_scaled_zero,
    })
}

impl ZeroSet {
    /// CSV export with header `index,zero`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,zero")?;
        for (i, z) in self.zeros.iter().enumerate() {
            writeln!(w, "{i},{z}")?;
        }
        Ok(())
    }
}

// ---- exact polynomial arithmetic used by the identity tests ----

/// `x * p` as a coefficient vector.
pub(crate) fn poly_mul_x(p: &[Rational]) -> Vec<Rational> {
    let mut out = Vec::with_capacity(p.len() + 1);
    out.push(Rational::zero());
    out.extend_from_slice(p);
    out
}

/// `p + s * q` as a coefficient vector.
pub(crate) fn poly_axpy(p: &[Rational], s: &Rational, q: &[Rational]) -> Vec<Rational> {
    let len = p.len().max(q.len());
    let mut out = vec![Rational::zero(); len];
    for (i, c) in p.iter().enumerate() {
        out[i] += c;
    }
    for (i, c) in q.iter().enumerate() {
        out[i] += s * c;
    }
    out
}

pub(crate) fn poly_is_zero(p: &[Rational]) -> bool {
    p.iter().all(|c| c.is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    fn zero_zero() -> (Rational, Rational) {
        (Rational::zero(), Rational::zero())
    }

    #[test]
    fn low_degree_coefficients() {
        let (k0, g0) = zero_zero();
        let p1 = coeffs_exact(1, &k0, &g0).unwrap();
        assert_eq!(p1.coeffs, vec![rational(-1), rational(1)]);
        let p2 = coeffs_exact(2, &k0, &g0).unwrap();
        assert_eq!(p2.coeffs, vec![rational(4), rational(-8), rational(1)]);
        let p3 = coeffs_exact(3, &k0, &g0).unwrap();
        assert_eq!(
            p3.coeffs,
            vec![rational(-36), rational(108), rational(-27), rational(1)]
        );
    }

    #[test]
    fn p2_examples_and_identity_with_multiple_orthogonal_family() {
        let p0 = p2_coeffs(0).unwrap();
        assert_eq!(p0.coeffs, vec![rational(1)]);
        let p2 = p2_coeffs(2).unwrap();
        assert_eq!(p2.coeffs, vec![rational(4), rational(-8), rational(1)]);

        let (k0, g0) = zero_zero();
        for k in 0..=100 {
            let a = p2_coeffs(k).unwrap();
            let b = coeffs_exact(k, &k0, &g0).unwrap();
            assert_eq!(a.coeffs, b.coeffs, "identity fails at degree {k}");
        }
    }

    #[test]
    fn sign_pattern_and_integrality_at_zero_parameters() {
        let p = p2_coeffs(17).unwrap();
        assert!(p.is_monic());
        for (j, c) in p.coeffs.iter().enumerate() {
            assert!(c.denom().is_one(), "coefficient of x^{j} not an integer");
            let expect_neg = (17 - j) % 2 == 1;
            assert_eq!(c.is_negative(), expect_neg, "sign pattern broken at x^{j}");
        }
    }

    #[test]
    fn recurrence_coefficient_values() {
        let (k0, g0) = zero_zero();
        let t = recurrence_coeffs(2, &k0, &g0).unwrap();
        assert_eq!((t.b, t.c, t.d), (rational(19), rational(48), rational(8)));
        let t0 = recurrence_coeffs(0, &k0, &g0).unwrap();
        assert_eq!(t0.b, rational(1));
        // paper Eq. (2.9) at k=1, kappa=1, gamma=2 (validated by the exact
        // identity below): b_1 = 3*8 - 2 = 22
        let t1 = recurrence_coeffs(1, &rational(1), &rational(2)).unwrap();
        assert_eq!(t1.b, rational(22));
        assert_eq!(t1.c, rational(56));
    }

    #[test]
    fn four_term_recurrence_is_exact_polynomial_identity() {
        let kappas = [rational(0), rat(1, 2), rational(1)];
        let gammas = [rational(0), rational(1), rational(2)];
        for kappa in &kappas {
            for gamma in &gammas {
                let polys: Vec<_> = (0..=26)
                    .map(|k| coeffs_exact(k, kappa, gamma).unwrap().coeffs)
                    .collect();
                for k in 2..=25usize {
                    let t = recurrence_coeffs(k, kappa, gamma).unwrap();
                    // x P_k - P_{k+1} - b P_k - c P_{k-1} - d P_{k-2} == 0
                    let mut r = poly_mul_x(&polys[k]);
                    r = poly_axpy(&r, &rational(-1), &polys[k + 1]);
                    r = poly_axpy(&r, &-t.b, &polys[k]);
                    r = poly_axpy(&r, &-t.c, &polys[k - 1]);
                    r = poly_axpy(&r, &-t.d, &polys[k - 2]);
                    assert!(
                        poly_is_zero(&r),
                        "recurrence not exact at k={k}, kappa={kappa}, gamma={gamma}"
                    );
                }
            }
        }
    }

    #[test]
    fn b0_consistency() {
        // x P_0 = P_1 + b_0 P_0 forces b_0 = 1
        let (k0, g0) = zero_zero();
        let p1 = coeffs_exact(1, &k0, &g0).unwrap();
        let b0 = recurrence_coeffs(0, &k0, &g0).unwrap().b;
        // x*1 - (x - 1) - b_0*1 = 0
        assert_eq!(rational(1) - &b0, Rational::zero());
        assert_eq!(p1.coeffs[0], rational(-1));
    }

    #[test]
    fn scaled_coefficient_limits_exact() {
        let (k0, g0) = zero_zero();
        for n in [10usize, 40, 100] {
            let nn = rational(n as i64);
            let t = recurrence_coeffs(n, &k0, &g0).unwrap();
            // c_{N,n} n^4 / N^4 = 3 and d_{N,n} n^6/(N^3 (N-1)^3) = 1 exactly
            let n4 = &nn * &nn * &nn * &nn;
            assert_eq!(t.c / &n4, rational(3));
            let nm1 = rational(n as i64 - 1);
            let n3 = &nn * &nn * &nn;
            assert_eq!(t.d / (&n3 * &nm1 * &nm1 * &nm1), rational(1));
            // b_N per Eq. (2.9): 3N(N+1) + 1
            assert_eq!(t.b, rational((3 * n * (n + 1) + 1) as i64));
        }
    }

    #[test]
    fn eval_scaled_examples() {
        let (k0, g0) = zero_zero();
        let at_root = eval_scaled(1, 1, 1.0, &k0, &g0).unwrap();
        assert!(at_root.value.unwrap().abs() < 1e-14);

        let v = eval_scaled(2, 2, 0.0, &k0, &g0).unwrap();
        assert!((v.value.unwrap() - 0.25).abs() < 1e-14);

        // monic leading behavior: P/x^k = 1 - (sum of zeros)/x + O(x^-2);
        // at k=n=10 the zeros sum to 10, so expect ~1e-5 at x = 1e6
        let k = 10usize;
        let p = eval_scaled(k, 10, 1e6, &k0, &g0).unwrap();
        let ratio = (p.log.ln_abs() - k as f64 * 1e6f64.ln()).exp();
        assert!((ratio - 1.0).abs() < 2e-5, "ratio {ratio}");
        let p7 = eval_scaled(k, 10, 1e7, &k0, &g0).unwrap();
        let ratio7 = (p7.log.ln_abs() - k as f64 * 1e7f64.ln()).exp();
        assert!((ratio7 - 1.0).abs() < 2e-6, "ratio {ratio7}");
    }

    #[test]
    fn eval_scaled_rejects_nan() {
        let (k0, g0) = zero_zero();
        assert!(matches!(
            eval_scaled(3, 1, f64::NAN, &k0, &g0),
            Err(MopError::Domain(_))
        ));
    }

    #[test]
    fn zeros_of_low_degrees() {
        let (k0, g0) = zero_zero();
        let z1 = zeros(1, 1, &k0, &g0).unwrap();
        assert_eq!(z1.zeros.len(), 1);
        assert!((z1.zeros[0] - 1.0).abs() < 1e-12);

        let z2 = zeros(2, 1, &k0, &g0).unwrap();
        let s3 = 3.0f64.sqrt();
        assert!((z2.zeros[0] - (4.0 - 2.0 * s3)).abs() < 1e-12);
        assert!((z2.zeros[1] - (4.0 + 2.0 * s3)).abs() < 1e-12);
        assert!(z2.refinement_residual <= 1e-10);
        // raw value bound is meaningful at low degree
        for &z in &z2.zeros {
            let v = eval_scaled(2, 1, z, &k0, &g0).unwrap().value.unwrap();
            assert!(v.abs() <= 1e-10);
        }
    }

    #[test]
    fn zeros_bulk_stays_under_soft_edge_margin() {
        let (k0, g0) = zero_zero();
        let z = zeros(50, 50, &k0, &g0).unwrap();
        assert!(*z.zeros.last().unwrap() <= 7.0);
        assert!(z.zeros[0] > 0.0);
        assert!(z.refinement_residual <= 1e-10);
    }

    #[test]
    fn counting_measure_examples() {
        let (k0, g0) = zero_zero();
        let m1 = zero_counting_measure(&zeros(1, 1, &k0, &g0).unwrap());
        assert_eq!(m1.atoms().len(), 1);
        assert!((m1.cdf(1.0) - 1.0).abs() < 1e-15);
        assert!((m1.total_mass() - 1.0).abs() < 1e-15);

        let m2 = zero_counting_measure(&zeros(2, 1, &k0, &g0).unwrap());
        assert!((m2.weight_per_atom() - 0.5).abs() < 1e-15);
        // Vieta on x^2 - 8x + 4: mean of zeros = 4
        assert!((m2.moment(1) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ks_of_point_mass_against_itself_is_zero() {
        let m = CountingMeasure::from_sorted(vec![1.0]);
        let d = m.ks_distance(|x| if x >= 1.0 { 1.0 } else { 0.0 });
        assert_eq!(d, 0.0);
    }

    #[test]
    fn structural_report_small_and_trivial() {
        let (k0, g0) = zero_zero();
        let r1 = structural_checks(1, &k0, &g0).unwrap();
        assert!(r1.all_ok());

        let r3 = structural_checks(3, &k0, &g0).unwrap();
        assert!(r3.interlacing_ok);

        let r10 = structural_checks(10, &k0, &g0).unwrap();
        assert!(r10.all_ok(), "report: {r10:?}");
    }

    #[test]
    fn structural_checks_with_rational_parameters() {
        let r = structural_checks(8, &rat(1, 2), &rational(2)).unwrap();
        assert!(r.all_ok(), "report: {r:?}");
    }

    #[test]
    fn csv_and_json_exports() {
        let (k0, g0) = zero_zero();
        let z = zeros(2, 1, &k0, &g0).unwrap();
        let mut buf = Vec::new();
        z.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,zero\n0,"));
        assert_eq!(text.lines().count(), 3);

        let p = coeffs_exact(2, &rat(1, 2), &g0).unwrap();
        let j = p.to_json();
        assert_eq!(j["kappa"], "1/2");
        assert_eq!(j["degree"], 2);
        assert_eq!(j["coeffs"][2], "1");
    }
}
