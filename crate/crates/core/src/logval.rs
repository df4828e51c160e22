//! Signed log-magnitude scalars.
//!
//! Factorial-scale quantities (`(j!)^3` squared norms, high-order Macdonald
//! values, polynomial evaluations of large degree) overflow `f64` long before
//! the sizes this crate supports. A [`LogVal`] carries such a number as
//! `(sign, ln |value|)` and materializes a plain `f64` only when it fits.

/// A real number stored as a sign and the natural log of its magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogVal {
    sign: i8,
    ln_abs: f64,
}

/// ln of the largest finite `f64`.
const LN_MAX_F64: f64 = 709.782712893384;

impl LogVal {
    pub fn zero() -> Self {
        LogVal { sign: 0, ln_abs: f64::NEG_INFINITY }
    }

    pub fn one() -> Self {
        LogVal { sign: 1, ln_abs: 0.0 }
    }

    /// Builds from an explicit sign and log-magnitude. `sign == 0` forces zero.
    pub fn from_sign_ln(sign: i8, ln_abs: f64) -> Self {
        if sign == 0 || ln_abs == f64::NEG_INFINITY {
            Self::zero()
        } else {
            LogVal { sign: sign.signum(), ln_abs }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::zero()
        } else {
            LogVal { sign: if x > 0.0 { 1 } else { -1 }, ln_abs: x.abs().ln() }
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// ln |value|; `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        self.ln_abs
    }

    /// The value as a plain `f64` when representable without overflow.
    pub fn to_f64(&self) -> Option<f64> {
        if self.sign == 0 {
            return Some(0.0);
        }
        if self.ln_abs > LN_MAX_F64 {
            return None;
        }
        Some(self.sign as f64 * self.ln_abs.exp())
    }

    /// The value as `f64`, saturating to signed infinity on overflow.
    pub fn to_f64_lossy(&self) -> f64 {
        match self.to_f64() {
            Some(v) => v,
            None => self.sign as f64 * f64::INFINITY,
        }
    }

    pub fn neg(&self) -> Self {
        LogVal { sign: -self.sign, ln_abs: self.ln_abs }
    }

    pub fn abs(&self) -> Self {
        LogVal { sign: self.sign.abs(), ln_abs: self.ln_abs }
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.sign == 0 || other.sign == 0 {
            return Self::zero();
        }
        LogVal { sign: self.sign * other.sign, ln_abs: self.ln_abs + other.ln_abs }
    }

    pub fn div(&self, other: &Self) -> Self {
        debug_assert!(other.sign != 0, "division of LogVal by zero");
        if self.sign == 0 {
            return Self::zero();
        }
        LogVal { sign: self.sign * other.sign, ln_abs: self.ln_abs - other.ln_abs }
    }

    /// Multiplies by `exp(t)`, i.e. shifts the log-magnitude.
    pub fn scale_ln(&self, t: f64) -> Self {
        if self.sign == 0 {
            return Self::zero();
        }
        LogVal { sign: self.sign, ln_abs: self.ln_abs + t }
    }

    /// Signed addition in log space.
    pub fn add(&self, other: &Self) -> Self {
        if self.sign == 0 {
            return *other;
        }
        if other.sign == 0 {
            return *self;
        }
        let (big, small) = if self.ln_abs >= other.ln_abs {
            (self, other)
        } else {
            (other, self)
        };
        let d = big.ln_abs - small.ln_abs; // >= 0
        if self.sign == other.sign {
            LogVal { sign: big.sign, ln_abs: big.ln_abs + (-d).exp().ln_1p() }
        } else if d == 0.0 {
            Self::zero()
        } else {
            // ln(1 - e^{-d}) via expm1 for small d
            let ln_diff = (-(-d).exp_m1()).ln();
            LogVal { sign: big.sign, ln_abs: big.ln_abs + ln_diff }
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn roundtrip_and_arithmetic() {
        let a = LogVal::from_f64(3.5);
        let b = LogVal::from_f64(-1.25);
        assert!(close(a.mul(&b).to_f64().unwrap(), -4.375, 1e-15));
        assert!(close(a.add(&b).to_f64().unwrap(), 2.25, 1e-15));
        assert!(close(a.sub(&b).to_f64().unwrap(), 4.75, 1e-15));
        assert!(close(a.div(&b).to_f64().unwrap(), -2.8, 1e-15));
    }

    #[test]
    fn cancellation_to_zero() {
        let a = LogVal::from_f64(7.0);
        assert!(a.sub(&a).is_zero());
        assert_eq!(a.sub(&a).to_f64(), Some(0.0));
    }

    #[test]
    fn overflow_channel() {
        let big = LogVal::from_sign_ln(1, 5000.0);
        assert_eq!(big.to_f64(), None);
        assert_eq!(big.to_f64_lossy(), f64::INFINITY);
        let prod = big.mul(&LogVal::from_sign_ln(-1, 5000.0));
        assert_eq!(prod.sign(), -1);
        assert!(close(prod.ln_abs(), 10000.0, 1e-15));
    }

    #[test]
    fn add_opposite_signs_keeps_larger() {
        let a = LogVal::from_f64(10.0);
        let b = LogVal::from_f64(-2.0);
        let s = a.add(&b);
        assert_eq!(s.sign(), 1);
        assert!(close(s.to_f64().unwrap(), 8.0, 1e-14));
    }
}
