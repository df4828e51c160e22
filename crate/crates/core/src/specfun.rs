//! Macdonald functions `K_nu`, the `rho` family, the product weight, and
//! exact Mellin moments.
//!
//! `rho_gamma(x) = 2 x^{gamma/2} K_gamma(2 sqrt x)` is the weight family the
//! whole polynomial structure is built on. `K_0`/`K_1` are evaluated in
//! double-double precision (series below the crossover `z = 2`, Steed's
//! continued fraction above it); higher orders follow by the upward
//! recurrence, which is stable for `K`. Magnitudes are carried as
//! `(sign, ln|value|)` because `rho_i(x) -> (i-1)!` as `x -> 0+` overflows
//! `f64` near `i = 170`.

use crate::dd::{self, Dd};
use crate::logval::LogVal;
use num_bigint::BigInt;
use num_traits::One;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecFunError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("result exceeds f64 range: sign {sign}, ln|value| = {ln_abs}")]
    Overflow { sign: i8, ln_abs: f64 },
}

/// A computed value together with the absolute error the evaluation claims.
#[derive(Clone, Copy, Debug)]
pub struct EvalResult {
    pub value: f64,
    pub abs_err_est: f64,
}

/// Largest order accepted by [`bessel_k`].
pub const MAX_BESSEL_ORDER: u32 = 512;
/// Argument range accepted by [`bessel_k`].
pub const BESSEL_Z_RANGE: (f64, f64) = (1e-12, 700.0);

const LN_MAX_F64: f64 = 709.782712893384;

/// Series/continued-fraction crossover for `K_0`, `K_1`.
const K_CROSSOVER: f64 = 2.0;

/// `K_0` and `K_1` by the ascending series, valid for `0 < z <= 2`.
///
/// Uses `K_0 = -(ln(z/2)+g) I_0 + sum_{k>=1} H_k q^k/(k!)^2` and
/// `K_1 = 1/z + (ln(z/2)+g) I_1 - (z/4) sum_{k>=0} (H_k+H_{k+1}) q^k/(k!(k+1)!)`
/// with `q = z^2/4` and `g` the Euler constant.
fn k01_series(z: Dd) -> (Dd, Dd) {
    let q = z.mul(z).mul_f64(0.25);
    let log_term = z.mul_f64(0.5).ln().add(dd::EULER_GAMMA); // ln(z/2) + gamma

    let mut i0 = Dd::ONE;
    let mut i1_body = Dd::ONE; // sum q^k/(k!(k+1)!)
    let mut k0_h = Dd::ZERO; // sum_{k>=1} H_k q^k/(k!)^2
    let mut k1_h = Dd::ONE; // sum (H_k + H_{k+1}) q^k/(k!(k+1)!), k=0 term = 1
    let mut t = Dd::ONE; // q^k/(k!)^2
    let mut u = Dd::ONE; // q^k/(k!(k+1)!)
    let mut h = Dd::ZERO; // H_k
    let mut k = 1.0f64;
    loop {
        t = t.mul(q).div(Dd::from_f64(k * k));
        u = u.mul(q).div(Dd::from_f64(k * (k + 1.0)));
        h = h.add(Dd::from_f64(k).recip()); // H_k
        let h_next = h.add(Dd::from_f64(k + 1.0).recip()); // H_{k+1}
        i0 = i0.add(t);
        i1_body = i1_body.add(u);
        k0_h = k0_h.add(t.mul(h));
        k1_h = k1_h.add(u.mul(h.add(h_next)));
        if t.hi < 1e-36 * i0.hi && u.hi < 1e-36 * i1_body.hi {
            break;
        }
        k += 1.0;
        if k > 60.0 {
            break;
        }
    }
    let i1 = z.mul_f64(0.5).mul(i1_body);
    let k0 = k0_h.sub(log_term.mul(i0));
    let k1 = z.recip().add(log_term.mul(i1)).sub(z.mul_f64(0.25).mul(k1_h));
    (k0, k1)
}

/// Exponentially scaled `(e^z K_0(z), e^z K_1(z))` by Steed's continued
/// fraction (CF2), valid for `z >= 2`.
fn k01_scaled_cf2(z: Dd) -> (Dd, Dd) {
    let a1 = Dd::from_f64(0.25);
    let mut b = z.add_f64(1.0).mul_f64(2.0);
    let mut d = b.recip();
    let mut h = d;
    let mut delh = d;
    let mut q1 = Dd::ZERO;
    let mut q2 = Dd::ONE;
    let mut q = a1;
    let mut c = a1;
    let mut a = a1.neg();
    let mut s = Dd::ONE.add(q.mul(delh));
    // c grows factorially while q2 shrinks; only their product matters, so
    // rebalance by an exact power of two whenever either drifts out of range
    let up = 2.0f64.powi(500);
    let down = 2.0f64.powi(-500);
    for i in 2..=4000u32 {
        a = a.add_f64(-2.0 * (i - 1) as f64);
        c = a.neg().mul(c).div(Dd::from_f64(i as f64));
        let qnew = q1.sub(b.mul(q2)).div(a);
        q1 = q2;
        q2 = qnew;
        q = q.add(c.mul(qnew));
        b = b.add_f64(2.0);
        d = b.add(a.mul(d)).recip();
        delh = b.mul(d).add_f64(-1.0).mul(delh);
        h = h.add(delh);
        let dels = q.mul(delh);
        s = s.add(dels);
        if dels.hi.abs() < 1e-34 * s.hi.abs() {
            break;
        }
        if c.hi.abs() > up {
            c = c.mul_f64(down);
            q1 = q1.mul_f64(up);
            q2 = q2.mul_f64(up);
        } else if q2.hi.abs() < down && q2.hi != 0.0 {
            q1 = q1.mul_f64(up);
            q2 = q2.mul_f64(up);
            c = c.mul_f64(down);
        }
    }
    let h = a1.mul(h);
    let k0s = dd::PI.div(z.mul_f64(2.0)).sqrt().div(s);
    let k1s = k0s.mul(z.add_f64(0.5).sub(h)).div(z);
    (k0s, k1s)
}

/// `(ln K_0(z), ln K_1(z))` for any `z > 0`, immune to under/overflow.
pub(crate) fn ln_k0_k1(z: f64) -> (f64, f64) {
    let zd = Dd::from_f64(z);
    if z <= K_CROSSOVER {
        let (k0, k1) = k01_series(zd);
        (k0.ln().to_f64(), k1.ln().to_f64())
    } else {
        let (k0s, k1s) = k01_scaled_cf2(zd);
        (k0s.ln().sub(zd).to_f64(), k1s.ln().sub(zd).to_f64())
    }
}

/// `(K_0(z), K_1(z))` in double-double; `None` once `e^{-z}` underflows.
pub(crate) fn k0_k1_dd(z: f64) -> Option<(Dd, Dd)> {
    let zd = Dd::from_f64(z);
    if z <= K_CROSSOVER {
        Some(k01_series(zd))
    } else if z < 690.0 {
        let (k0s, k1s) = k01_scaled_cf2(zd);
        let damp = zd.neg().exp();
        Some((k0s.mul(damp), k1s.mul(damp)))
    } else {
        None
    }
}

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn check_bessel_domain(order: u32, z: f64) -> Result<(), SpecFunError> {
    if !z.is_finite() || z < BESSEL_Z_RANGE.0 || z > BESSEL_Z_RANGE.1 {
        return Err(SpecFunError::Domain(format!(
            "bessel_k argument z = {z} outside [{}, {}]",
            BESSEL_Z_RANGE.0, BESSEL_Z_RANGE.1
        )));
    }
    if order > MAX_BESSEL_ORDER {
        return Err(SpecFunError::Domain(format!(
            "bessel_k order {order} exceeds {MAX_BESSEL_ORDER}"
        )));
    }
    Ok(())
}

/// `ln K_order(z)`, finite for the whole accepted domain.
///
/// Orders above 1 use `K_{n+1} = K_{n-1} + (2n/z) K_n` in log space; every
/// term is positive so the upward recurrence is stable.
pub fn bessel_k_ln(order: u32, z: f64) -> Result<f64, SpecFunError> {
    check_bessel_domain(order, z)?;
    let (ln_k0, ln_k1) = ln_k0_k1(z);
    Ok(match order {
        0 => ln_k0,
        1 => ln_k1,
        _ => {
            let ln_z = z.ln();
            let mut prev = ln_k0;
            let mut cur = ln_k1;
            for nu in 1..order {
                let next = logaddexp(prev, (2.0 * nu as f64).ln() - ln_z + cur);
                prev = cur;
                cur = next;
            }
            cur
        }
    })
}

/// Modified Bessel function of the second kind at nonnegative integer order.
///
/// Values that exceed the `f64` range are reported through the
/// [`SpecFunError::Overflow`] channel with their `(sign, ln|value|)`.
pub fn bessel_k(order: u32, z: f64) -> Result<EvalResult, SpecFunError> {
    let ln_k = bessel_k_ln(order, z)?;
    if ln_k > LN_MAX_F64 {
        return Err(SpecFunError::Overflow { sign: 1, ln_abs: ln_k });
    }
    let value = ln_k.exp();
    // dd core, f64 log-recurrence steps, and the final exp each contribute
    // O(eps); the ln->exp conversion scales with |ln K|.
    let rel = 2e-15 + 1.2e-16 * ln_k.abs() + 3e-16 * order as f64;
    Ok(EvalResult { value, abs_err_est: value * rel })
}

/// The family `rho_0(x) .. rho_gamma_max(x)` at a fixed `x > 0`.
///
/// Values are held as `(sign, ln)` pairs (all positive here); [`Self::value`]
/// materializes a plain `f64` when representable.
#[derive(Clone, Debug)]
pub struct RhoFamily {
    gamma_max: u32,
    x: f64,
    values: Vec<LogVal>,
}

impl RhoFamily {
    pub fn gamma_max(&self) -> u32 {
        self.gamma_max
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn log_value(&self, gamma: u32) -> LogVal {
        self.values[gamma as usize]
    }

    pub fn ln_value(&self, gamma: u32) -> f64 {
        self.values[gamma as usize].ln_abs()
    }

    /// `rho_gamma(x)` as a plain real, `None` when it exceeds `f64` range.
    pub fn value(&self, gamma: u32) -> Option<f64> {
        let v = self.values[gamma as usize];
        v.to_f64().filter(|f| f.is_finite())
    }
}

/// Evaluates `rho_gamma(x) = 2 x^{gamma/2} K_gamma(2 sqrt x)` for all orders
/// `0..=gamma_max` via `rho_{g+1} = g rho_g + x rho_{g-1}`.
pub fn rho(gamma_max: u32, x: f64) -> Result<RhoFamily, SpecFunError> {
    if !x.is_finite() || x <= 0.0 {
        return Err(SpecFunError::Domain(format!("rho requires x > 0, got {x}")));
    }
    let z = 2.0 * x.sqrt();
    let (ln_k0, ln_k1) = ln_k0_k1(z);
    let ln2 = std::f64::consts::LN_2;
    let ln_x = x.ln();
    let mut values = Vec::with_capacity(gamma_max as usize + 1);
    values.push(LogVal::from_sign_ln(1, ln2 + ln_k0));
    if gamma_max >= 1 {
        values.push(LogVal::from_sign_ln(1, ln2 + 0.5 * ln_x + ln_k1));
    }
    for gamma in 1..gamma_max {
        let a = (gamma as f64).ln() + values[gamma as usize].ln_abs();
        let b = ln_x + values[gamma as usize - 1].ln_abs();
        values.push(LogVal::from_sign_ln(1, logaddexp(a, b)));
    }
    Ok(RhoFamily { gamma_max, x, values })
}

/// The `rho` family in double-double precision, for cancellation-heavy sums.
///
/// Returns `None` when any member leaves the `f64`-representable range; the
/// caller falls back to the log-scaled path.
pub(crate) fn rho_dd(gamma_max: u32, x: f64) -> Option<Vec<Dd>> {
    if x <= 0.0 {
        return None;
    }
    let xd = Dd::from_f64(x);
    let z = xd.sqrt().mul_f64(2.0);
    let (k0, k1) = k0_k1_dd(z.to_f64())?;
    if k0.hi == 0.0 {
        return None;
    }
    let mut values = Vec::with_capacity(gamma_max as usize + 1);
    values.push(k0.mul_f64(2.0));
    if gamma_max >= 1 {
        values.push(xd.sqrt().mul(k1).mul_f64(2.0));
    }
    for gamma in 1..gamma_max {
        let next = values[gamma as usize]
            .mul_f64(gamma as f64)
            .add(xd.mul(values[gamma as usize - 1]));
        if !next.is_finite() {
            return None;
        }
        values.push(next);
    }
    Some(values)
}

/// The `M = 2` product weight `w(x, y) = y^{-1} exp(-x/y - y)`.
pub fn weight_w2(x: f64, y: f64) -> Result<f64, SpecFunError> {
    if !y.is_finite() || y <= 0.0 {
        return Err(SpecFunError::Domain(format!("weight_w2 requires y > 0, got {y}")));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(SpecFunError::Domain(format!("weight_w2 requires x >= 0, got {x}")));
    }
    Ok((-x / y - y).exp() / y)
}

/// Exact Mellin moment `int_0^inf x^m rho_k(x) dx = m! (m+k)!`.
pub fn rho_mellin_moment(m: u32, k: u32) -> Result<BigInt, SpecFunError> {
    if m > 200 || k > 200 {
        return Err(SpecFunError::Domain(format!(
            "rho_mellin_moment supports m, k <= 200, got ({m}, {k})"
        )));
    }
    Ok(factorial(m) * factorial(m + k))
}

/// `n!` as a big integer.
pub fn factorial(n: u32) -> BigInt {
    let mut acc = BigInt::one();
    for i in 2..=n.max(1) {
        acc *= i;
    }
    acc
}

/// `ln n!` via the log-gamma of the double-double pipeline is overkill here;
/// direct summation is exact to f64 for every size this crate uses.
pub fn ln_factorial(n: u32) -> f64 {
    let mut acc = 0.0f64;
    for i in 2..=n.max(1) {
        acc += (i as f64).ln();
    }
    acc
}
