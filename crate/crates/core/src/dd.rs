//! Double-double arithmetic (~31 significant digits).
//!
//! The Macdonald-transform expansions in [`crate::dppkernel`] sum terms with
//! alternating signs whose magnitudes exceed the result by many orders; plain
//! `f64` loses the answer to cancellation well inside the supported degree
//! range. A [`Dd`] is an unevaluated sum `hi + lo` of two doubles with
//! `|lo| <= ulp(hi)/2`, giving roughly quadruple precision for the basic
//! operations plus the `sqrt`/`exp`/`ln` needed by the Bessel evaluators.

/// Unevaluated sum of two doubles, `hi + lo`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

pub const LN2: Dd = Dd { hi: 0.693_147_180_559_945_3, lo: 2.319_046_813_846_299_6e-17 };
pub const PI: Dd = Dd { hi: 3.141_592_653_589_793, lo: 1.224_646_799_147_353_2e-16 };
/// Euler–Mascheroni constant.
pub const EULER_GAMMA: Dd = Dd { hi: 0.577_215_664_901_532_9, lo: -4.942_915_152_430_645e-18 };

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact ratio of two doubles (e.g. integer-valued numerator/denominator).
    pub fn from_ratio(num: f64, den: f64) -> Dd {
        Dd::from_f64(num).div(Dd::from_f64(den))
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    #[inline]
    pub fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (r1, r2) = quick_two_sum(s1, s2 + t2);
        Dd { hi: r1, lo: r2 }
    }

    #[inline]
    pub fn add_f64(self, b: f64) -> Dd {
        let (s1, s2) = two_sum(self.hi, b);
        let (r1, r2) = quick_two_sum(s1, s2 + self.lo);
        Dd { hi: r1, lo: r2 }
    }

    #[inline]
    pub fn sub(self, b: Dd) -> Dd {
        self.add(b.neg())
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    pub fn mul(self, b: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + self.hi * b.lo + self.lo * b.hi;
        let (r1, r2) = quick_two_sum(p1, p2);
        Dd { hi: r1, lo: r2 }
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, b);
        let (r1, r2) = quick_two_sum(p1, p2 + self.lo * b);
        Dd { hi: r1, lo: r2 }
    }

    pub fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self.sub(b.mul_f64(q1));
        let q2 = r.hi / b.hi;
        let r = r.sub(b.mul_f64(q2));
        let q3 = r.hi / b.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd { hi: s, lo: e }.add_f64(q3)
    }

    pub fn recip(self) -> Dd {
        Dd::ONE.div(self)
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            self.neg()
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        debug_assert!(self.hi > 0.0, "sqrt of negative Dd");
        let x = self.hi.sqrt();
        // one Newton step: y = x + (a - x^2) / (2x)
        let x_dd = Dd::from_f64(x);
        let diff = self.sub(x_dd.mul(x_dd));
        x_dd.add(diff.div(x_dd.mul_f64(2.0)))
    }

    /// `exp(self)`; valid across the full finite-result range.
    pub fn exp(self) -> Dd {
        if self.hi > 710.0 {
            return Dd { hi: f64::INFINITY, lo: 0.0 };
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = self.sub(LN2.mul_f64(k));
        // Taylor series on |r| <= ln2/2; divisions stay in dd to keep the tail
        let mut sum = Dd::ONE.add(r);
        let mut term = r;
        let mut n = 2.0;
        loop {
            term = term.mul(r).div(Dd::from_f64(n));
            sum = sum.add(term);
            if term.hi.abs() < 1e-35 * sum.hi.abs() || n > 40.0 {
                break;
            }
            n += 1.0;
        }
        let scale = libm_ldexp(1.0, k as i32);
        Dd { hi: sum.hi * scale, lo: sum.lo * scale }
    }

    /// Natural log; requires a positive value.
    pub fn ln(self) -> Dd {
        debug_assert!(self.hi > 0.0, "ln of non-positive Dd");
        // Newton iteration from the f64 estimate: y += a*exp(-y) - 1
        let y0 = self.hi.ln();
        let y = Dd::from_f64(y0);
        let e = y.neg().exp();
        let corr = self.mul(e).add_f64(-1.0);
        y.add(corr)
    }

    pub fn powi(self, mut n: u32) -> Dd {
        let mut base = self;
        let mut acc = Dd::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            n >>= 1;
        }
        acc
    }
}

/// `x * 2^n` without a libm dependency.
fn libm_ldexp(x: f64, n: i32) -> f64 {
    // powi on 2.0 is exact for the exponent range used here
    if n >= 0 {
        x * 2.0f64.powi(n)
    } else {
        x / 2.0f64.powi(-n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_ops_beat_f64() {
        // (1 + 2^-40)^2 = 1 + 2^-39 + 2^-80; the 2^-80 tail survives in dd
        let x = Dd::ONE.add_f64(2f64.powi(-40));
        let sq = x.mul(x);
        let expect_lo = 2f64.powi(-80);
        let tail = sq.sub(Dd::ONE).sub(Dd::from_f64(2f64.powi(-39)));
        assert!((tail.to_f64() - expect_lo).abs() < 1e-40);
    }

    #[test]
    fn division_roundtrip() {
        let a = Dd::from_f64(1.0).div(Dd::from_f64(3.0));
        let b = a.mul_f64(3.0);
        assert!((b.to_f64() - 1.0).abs() < 1e-31);
        assert!(b.sub(Dd::ONE).to_f64().abs() < 1e-31);
    }

    #[test]
    fn sqrt_newton() {
        let two = Dd::from_f64(2.0);
        let r = two.sqrt();
        let back = r.mul(r).sub(two);
        assert!(back.to_f64().abs() < 1e-31);
    }

    #[test]
    fn exp_ln_inverse() {
        for &x in &[0.1, 1.0, -3.5, 10.0, -50.0, 300.0] {
            let e = Dd::from_f64(x).exp();
            let back = e.ln();
            assert!(
                (back.to_f64() - x).abs() < 1e-29 * x.abs().max(1.0),
                "exp/ln roundtrip failed at {x}"
            );
        }
    }

    #[test]
    fn exp_matches_f64_leading_digits() {
        let e1 = Dd::from_f64(1.0).exp();
        assert!((e1.to_f64() - std::f64::consts::E).abs() < 1e-15);
        // exp(ln 2) = 2
        let two = LN2.exp();
        assert!(two.sub(Dd::from_f64(2.0)).to_f64().abs() < 1e-31);
    }
}
