//! Extended-exponent reals.
//!
//! The neutral construction multiplies plateau widths that shrink like
//! products of kernel coefficients, so monomials such as `x^6 / 6!` on a
//! support of width `1e-94` produce values near `1e-565`. Binary64 flushes
//! those to zero. [`Ext`] keeps a binary64 mantissa and a separate `i64`
//! binary exponent so such quantities keep their full relative precision.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// A real number `mant * 2^exp` with `0.5 <= |mant| < 1`, or exactly zero.
#[derive(Clone, Copy, PartialEq)]
pub struct Ext {
    mant: f64,
    exp: i64,
}

/// Splits a finite nonzero `f64` into a mantissa in `[0.5, 1)` and an exponent.
fn frexp(x: f64) -> (f64, i64) {
    debug_assert!(x.is_finite() && x != 0.0);
    let mut bits = x.to_bits();
    let mut biased = ((bits >> 52) & 0x7ff) as i64;
    let mut shift = 0;
    if biased == 0 {
        // subnormal: lift into the normal range first
        let y = x * f64::from_bits(0x43f0_0000_0000_0000); // 2^64
        bits = y.to_bits();
        biased = ((bits >> 52) & 0x7ff) as i64;
        shift = -64;
    }
    let mant_bits = (bits & !(0x7ff << 52)) | (1022 << 52);
    (f64::from_bits(mant_bits), biased - 1022 + shift)
}

fn ldexp(m: f64, e: i64) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    if e > 1024 {
        return m.signum() * f64::INFINITY;
    }
    if e < -1075 {
        return 0.0 * m.signum();
    }
    if e > 1023 {
        return m * 2.0 * 2f64.powi((e - 1) as i32);
    }
    if e < -1021 {
        // one rounding step into the subnormal range
        return m * 2f64.powi((e + 64) as i32) * 2f64.powi(-64);
    }
    m * 2f64.powi(e as i32)
}

impl Ext {
    pub const ZERO: Ext = Ext { mant: 0.0, exp: 0 };
    pub const ONE: Ext = Ext { mant: 0.5, exp: 1 };

    pub fn new(x: f64) -> Ext {
        assert!(x.is_finite(), "Ext::new on non-finite value {x}");
        if x == 0.0 {
            return Ext::ZERO;
        }
        let (mant, exp) = frexp(x);
        Ext { mant, exp }
    }

    fn from_parts(mant: f64, exp: i64) -> Ext {
        if mant == 0.0 {
            return Ext::ZERO;
        }
        let (m, e) = frexp(mant);
        Ext { mant: m, exp: exp + e }
    }

    /// `exp(x)` without underflow for large negative `x`.
    pub fn exp(x: f64) -> Ext {
        let k = (x / std::f64::consts::LN_2).floor();
        let r = x - k * std::f64::consts::LN_2;
        Ext::from_parts(r.exp(), k as i64)
    }

    /// Nearest binary64 value; flushes to zero (or infinity) outside its range.
    pub fn to_f64(self) -> f64 {
        ldexp(self.mant, self.exp)
    }

    pub fn is_zero(self) -> bool {
        self.mant == 0.0
    }

    pub fn abs(self) -> Ext {
        Ext { mant: self.mant.abs(), exp: self.exp }
    }

    pub fn signum(self) -> f64 {
        if self.mant == 0.0 {
            0.0
        } else {
            self.mant.signum()
        }
    }

    /// Natural logarithm of `|self|`; `-inf` for zero.
    pub fn ln_abs(self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.mant.abs().ln() + self.exp as f64 * std::f64::consts::LN_2
    }

    /// Base-10 exponent estimate, useful for reporting values outside binary64.
    pub fn log10_abs(self) -> f64 {
        self.ln_abs() / std::f64::consts::LN_10
    }

    pub fn sqrt(self) -> Ext {
        assert!(self.mant >= 0.0, "sqrt of negative Ext");
        if self.is_zero() {
            return self;
        }
        if self.exp % 2 == 0 {
            Ext::from_parts(self.mant.sqrt(), self.exp / 2)
        } else {
            Ext::from_parts((2.0 * self.mant).sqrt(), (self.exp - 1) / 2)
        }
    }

    pub fn powi(self, n: u32) -> Ext {
        let mut acc = Ext::ONE;
        let mut base = self;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc *= base;
            }
            base *= base;
            k >>= 1;
        }
        acc
    }

    pub fn recip(self) -> Ext {
        Ext::ONE / self
    }

    pub fn max(self, other: Ext) -> Ext {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Default for Ext {
    fn default() -> Self {
        Ext::ZERO
    }
}

impl From<f64> for Ext {
    fn from(x: f64) -> Self {
        Ext::new(x)
    }
}

impl fmt::Debug for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_f64();
        if self.is_zero() || (v != 0.0 && v.is_finite()) {
            return write!(f, "{v:e}");
        }
        let l = self.log10_abs();
        let e10 = l.floor();
        let m = 10f64.powf(l - e10) * self.signum();
        write!(f, "{m}e{e10}")
    }
}

impl Mul for Ext {
    type Output = Ext;
    fn mul(self, rhs: Ext) -> Ext {
        if self.is_zero() || rhs.is_zero() {
            return Ext::ZERO;
        }
        Ext::from_parts(self.mant * rhs.mant, self.exp + rhs.exp)
    }
}

impl Mul<f64> for Ext {
    type Output = Ext;
    fn mul(self, rhs: f64) -> Ext {
        self * Ext::new(rhs)
    }
}

impl MulAssign for Ext {
    fn mul_assign(&mut self, rhs: Ext) {
        *self = *self * rhs;
    }
}

impl Div for Ext {
    type Output = Ext;
    fn div(self, rhs: Ext) -> Ext {
        assert!(!rhs.is_zero(), "Ext division by zero");
        if self.is_zero() {
            return Ext::ZERO;
        }
        Ext::from_parts(self.mant / rhs.mant, self.exp - rhs.exp)
    }
}

impl Add for Ext {
    type Output = Ext;
    fn add(self, rhs: Ext) -> Ext {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (big, small) = if self.exp >= rhs.exp { (self, rhs) } else { (rhs, self) };
        let d = big.exp - small.exp;
        if d > 110 {
            return big;
        }
        let s = big.mant + ldexp(small.mant, -d);
        Ext::from_parts(s, big.exp)
    }
}

impl AddAssign for Ext {
    fn add_assign(&mut self, rhs: Ext) {
        *self = *self + rhs;
    }
}

impl Neg for Ext {
    type Output = Ext;
    fn neg(self) -> Ext {
        Ext { mant: -self.mant, exp: self.exp }
    }
}

impl Sub for Ext {
    type Output = Ext;
    fn sub(self, rhs: Ext) -> Ext {
        self + (-rhs)
    }
}

impl SubAssign for Ext {
    fn sub_assign(&mut self, rhs: Ext) {
        *self = *self - rhs;
    }
}

impl PartialOrd for Ext {
    fn partial_cmp(&self, other: &Ext) -> Option<Ordering> {
        let d = *self - *other;
        if d.is_zero() {
            Some(Ordering::Equal)
        } else if d.mant > 0.0 {
            Some(Ordering::Greater)
        } else {
            Some(Ordering::Less)
        }
    }
}

impl std::iter::Sum for Ext {
    fn sum<I: Iterator<Item = Ext>>(iter: I) -> Ext {
        iter.fold(Ext::ZERO, |a, b| a + b)
    }
}
