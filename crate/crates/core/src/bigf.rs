//! Arbitrary-precision evaluation of the Macdonald family.
//!
//! The Laguerre-transform expansion `Q_j(x) = sum_i c_{j,i} rho_i(x)` loses
//! roughly `2.2 j` bits to cancellation at kernel scales (`x ~ N^2`), which
//! exceeds double-double well before the supported kernel sizes run out.
//! This module reruns the same Bessel algorithms (ascending series below
//! `z = 2`, Steed's continued fraction above) on [`astro_float`] big floats
//! with precision chosen from the target degree.

use crate::logval::LogVal;
use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::BigInt;

const RM: RoundingMode = RoundingMode::ToEven;

/// Euler–Mascheroni constant to 420 decimal digits.
const EULER_GAMMA_DEC: &str = "5.7721566490153286060651209008240243104215933593992359880576723488486772677766467093694706329174674\
9514631447249807082480960504014486542836224173997644923536253500333742937337737673942792595258247094\
9160087352039481656708532331517766115286211995015079847937450857057400299213547861466940296043254215\
1905877553526733139925401296742051375413954911168510280798423487758720503843109399736137255306088933\
1267600172479537836759e-1";

/// Working-precision context for big-float evaluation.
pub struct BfCtx {
    pub p: usize,
    cc: Consts,
    euler: Option<BigFloat>,
}

/// Precision (bits) needed for degree-`n` transform sums: measured
/// cancellation is ~2.2 bits per degree, plus headroom.
pub fn precision_for_degree(n: usize) -> usize {
    256 + 3 * n
}

impl BfCtx {
    pub fn new(p: usize) -> Self {
        let cc = Consts::new().expect("constants cache");
        BfCtx { p, cc, euler: None }
    }

    fn euler(&mut self) -> BigFloat {
        if self.euler.is_none() {
            self.euler = Some(BigFloat::parse(
                EULER_GAMMA_DEC,
                astro_float::Radix::Dec,
                self.p,
                RM,
                &mut self.cc,
            ));
        }
        self.euler.clone().unwrap()
    }

    pub fn from_f64(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, self.p)
    }

    pub fn from_bigint(&self, b: &BigInt) -> BigFloat {
        // Horner over the base-2^32 digits; exact until rounded to p bits
        let base = self.from_f64(4_294_967_296.0);
        let mut acc = self.from_f64(0.0);
        for d in b.magnitude().iter_u32_digits().rev() {
            acc = acc.mul(&base, self.p, RM).add(&self.from_f64(d as f64), self.p, RM);
        }
        if b.sign() == num_bigint::Sign::Minus {
            acc = acc.neg();
        }
        acc
    }

    fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.p, RM)
    }
    fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, self.p, RM)
    }
    fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.p, RM)
    }
    fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, self.p, RM)
    }
    fn mul_f64(&self, a: &BigFloat, b: f64) -> BigFloat {
        a.mul(&self.from_f64(b), self.p, RM)
    }

    fn exp(&mut self, a: &BigFloat) -> BigFloat {
        a.exp(self.p, RM, &mut self.cc)
    }
    fn ln(&mut self, a: &BigFloat) -> BigFloat {
        a.ln(self.p, RM, &mut self.cc)
    }
    fn pi(&mut self) -> BigFloat {
        self.cc.pi(self.p, RM)
    }

    /// `abs(a) < 2^(exp_threshold)` style magnitude test via the exponent.
    fn below_eps_of(&self, term: &BigFloat, sum: &BigFloat) -> bool {
        if term.is_zero() {
            return true;
        }
        match (term.exponent(), sum.exponent()) {
            (Some(te), Some(se)) => (se as i64 - te as i64) > self.p as i64 + 8,
            _ => false,
        }
    }

    /// `(K_0(z), K_1(z))` by the ascending series, `0 < z <= 2`.
    fn k01_series(&mut self, z: &BigFloat) -> (BigFloat, BigFloat) {
        let quarter = self.from_f64(0.25);
        let q = self.mul(&self.mul(z, z), &quarter);
        let half_z = self.mul_f64(z, 0.5);
        let ln_half = self.ln(&half_z);
        let eu = self.euler();
        let log_term = self.add(&ln_half, &eu);

        let one = self.from_f64(1.0);
        let mut i0 = one.clone();
        let mut i1_body = one.clone();
        let mut k0_h = self.from_f64(0.0);
        let mut k1_h = one.clone();
        let mut t = one.clone();
        let mut u = one.clone();
        let mut h = self.from_f64(0.0);
        let mut k = 1.0f64;
        loop {
            t = self.div(&self.mul(&t, &q), &self.from_f64(k * k));
            u = self.div(&self.mul(&u, &q), &self.from_f64(k * (k + 1.0)));
            h = self.add(&h, &self.div(&one, &self.from_f64(k)));
            let h_next = self.add(&h, &self.div(&one, &self.from_f64(k + 1.0)));
            i0 = self.add(&i0, &t);
            i1_body = self.add(&i1_body, &u);
            k0_h = self.add(&k0_h, &self.mul(&t, &h));
            let hh = self.add(&h, &h_next);
            k1_h = self.add(&k1_h, &self.mul(&u, &hh));
            if self.below_eps_of(&t, &i0) && self.below_eps_of(&u, &i1_body) {
                break;
            }
            k += 1.0;
        }
        let i1 = self.mul(&half_z, &i1_body);
        let k0 = self.sub(&k0_h, &self.mul(&log_term, &i0));
        let zq = self.mul(&quarter, z);
        let k1 = {
            let a = self.div(&one, z);
            let b = self.mul(&log_term, &i1);
            let c = self.mul(&zq, &k1_h);
            self.sub(&self.add(&a, &b), &c)
        };
        (k0, k1)
    }

    /// `(K_0(z), K_1(z))` by Steed's continued fraction, `z >= 2`; the
    /// `c`/`q` auxiliaries are rebalanced like the double-double version.
    fn k01_cf2(&mut self, z: &BigFloat) -> (BigFloat, BigFloat) {
        let one = self.from_f64(1.0);
        let a1 = self.from_f64(0.25);
        let mut b = self.mul_f64(&self.add(z, &one), 2.0);
        let mut d = self.div(&one, &b);
        let mut h = d.clone();
        let mut delh = d.clone();
        let mut q1 = self.from_f64(0.0);
        let mut q2 = one.clone();
        let mut q = a1.clone();
        let mut c = a1.clone();
        let mut a = a1.neg();
        let mut s = self.add(&one, &self.mul(&q, &delh));
        let iters = 4 * self.p.max(64);
        for i in 2..=iters as u64 {
            a = self.sub(&a, &self.from_f64(2.0 * (i - 1) as f64));
            c = self.div(&self.mul(&a.neg(), &c), &self.from_f64(i as f64));
            let qnew = self.div(&self.sub(&q1, &self.mul(&b, &q2)), &a);
            q1 = q2;
            q2 = qnew.clone();
            q = self.add(&q, &self.mul(&c, &qnew));
            b = self.add(&b, &self.from_f64(2.0));
            d = self.div(&one, &self.add(&b, &self.mul(&a, &d)));
            delh = self.mul(&self.sub(&self.mul(&b, &d), &one), &delh);
            h = self.add(&h, &delh);
            let dels = self.mul(&q, &delh);
            s = self.add(&s, &dels);
            if self.below_eps_of(&dels, &s) {
                break;
            }
            // exponent rebalancing, exact power of two
            if let Some(ce) = c.exponent() {
                if ce > 500 {
                    let mut cs = c.clone();
                    cs.set_exponent(ce - 500);
                    c = cs;
                    for v in [&mut q1, &mut q2] {
                        if let Some(e) = v.exponent() {
                            if !v.is_zero() {
                                v.set_exponent(e + 500);
                            }
                        }
                    }
                }
            }
        }
        let h = self.mul(&a1, &h);
        let pi = self.pi();
        let front = {
            let two_z = self.mul_f64(z, 2.0);
            let r = self.div(&pi, &two_z);
            r.sqrt(self.p, RM)
        };
        let damp = self.exp(&z.neg());
        let k0 = self.div(&self.mul(&front, &damp), &s);
        let half = self.from_f64(0.5);
        let num = self.sub(&self.add(z, &half), &h);
        let k1 = self.div(&self.mul(&k0, &num), z);
        (k0, k1)
    }

    /// The `rho` family `rho_0..rho_gamma_max` at `x > 0` in big floats.
    pub fn rho_family(&mut self, gamma_max: usize, x: f64) -> Vec<BigFloat> {
        let xb = self.from_f64(x);
        let sqrt_x = xb.sqrt(self.p, RM);
        let z = self.mul_f64(&sqrt_x, 2.0);
        let (k0, k1) = if x.sqrt() * 2.0 <= 2.0 {
            self.k01_series(&z)
        } else {
            self.k01_cf2(&z)
        };
        let mut out = Vec::with_capacity(gamma_max + 1);
        out.push(self.mul_f64(&k0, 2.0));
        if gamma_max >= 1 {
            let r1 = self.mul(&sqrt_x, &k1);
            out.push(self.mul_f64(&r1, 2.0));
        }
        for gamma in 1..gamma_max {
            let a = self.mul_f64(&out[gamma], gamma as f64);
            let b = self.mul(&xb, &out[gamma - 1]);
            out.push(self.add(&a, &b));
        }
        out
    }
}

/// Sign and natural log of a big float, for the `(sign, ln)` channel.
pub fn bf_to_logval(v: &BigFloat) -> LogVal {
    if v.is_zero() {
        return LogVal::zero();
    }
    let sign = match v.sign() {
        Some(Sign::Neg) => -1i8,
        Some(Sign::Pos) => 1,
        None => return LogVal::zero(),
    };
    let exp = match v.exponent() {
        Some(e) => e as f64,
        None => return LogVal::zero(),
    };
    let words = v.mantissa_digits().unwrap_or(&[]);
    // little-endian words; fraction in [0.5, 1)
    let mut frac = 0.0f64;
    for (i, w) in words.iter().rev().take(2).enumerate() {
        frac += *w as f64 * (2.0f64).powi(-64 * (i as i32 + 1));
    }
    LogVal::from_sign_ln(sign, frac.ln() + exp * std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_matches_dd_pipeline() {
        let mut ctx = BfCtx::new(256);
        for &x in &[0.25f64, 1.0, 7.5, 80.0] {
            let fam_bf = ctx.rho_family(10, x);
            let fam = crate::specfun::rho(10, x).unwrap();
            for i in 0..=10usize {
                let a = bf_to_logval(&fam_bf[i]);
                let b = fam.ln_value(i as u32);
                assert!(
                    (a.ln_abs() - b).abs() <= 1e-12 * b.abs().max(1.0),
                    "rho_{i}({x}): bf ln {} vs dd ln {b}",
                    a.ln_abs()
                );
                assert_eq!(a.sign(), 1);
            }
        }
    }

    #[test]
    fn bigint_conversion_roundtrip() {
        let ctx = BfCtx::new(192);
        let b = BigInt::parse_bytes(b"-123456789012345678901234567890123456789", 10).unwrap();
        let v = ctx.from_bigint(&b);
        let lv = bf_to_logval(&v);
        assert_eq!(lv.sign(), -1);
        let expect_ln = 123456789012345678901234567890123456789f64.ln();
        assert!((lv.ln_abs() - expect_ln).abs() < 1e-12 * expect_ln);
    }

    #[test]
    fn logval_extraction_small_numbers() {
        let ctx = BfCtx::new(192);
        let v = ctx.from_f64(-0.001953125); // -2^-9
        let lv = bf_to_logval(&v);
        assert_eq!(lv.sign(), -1);
        assert!((lv.ln_abs() - (-9.0 * std::f64::consts::LN_2)).abs() < 1e-14);
    }
}
