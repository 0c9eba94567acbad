use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use super::ScaledRational;
use crate::error::{Error, Result};

/// Relative precision (in bits) of square-root enclosures unless asked otherwise.
pub const DEFAULT_SQRT_BITS: u32 = 48;

/// A closed interval `[lo, hi]` with exact endpoints.
///
/// Every operation returns an enclosure of the exact image of its inputs.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    lo: ScaledRational,
    hi: ScaledRational,
}

impl Interval {
    pub fn new(lo: ScaledRational, hi: ScaledRational) -> Result<Self> {
        if lo > hi {
            return Err(Error::Precondition(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(x: ScaledRational) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn from_rational(r: &BigRational) -> Self {
        Self::point(ScaledRational::from_rational(r))
    }

    pub fn zero() -> Self {
        Self::point(ScaledRational::zero())
    }

    pub fn lo(&self) -> &ScaledRational {
        &self.lo
    }

    pub fn hi(&self) -> &ScaledRational {
        &self.hi
    }

    pub fn width(&self) -> ScaledRational {
        &self.hi - &self.lo
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: &ScaledRational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_rational(&self, x: &BigRational) -> bool {
        self.contains(&ScaledRational::from_rational(x))
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// Midpoint, exact.
    pub fn mid(&self) -> ScaledRational {
        (&self.lo + &self.hi).mul_pow2(-1).expect("halving stays in range")
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: ScaledRational::min(&self.lo, &other.lo),
            hi: ScaledRational::max(&self.hi, &other.hi),
        }
    }

    pub fn scale(&self, c: &ScaledRational) -> Interval {
        let (a, b) = (&self.lo * c, &self.hi * c);
        if c.is_negative() {
            Interval { lo: b, hi: a }
        } else {
            Interval { lo: a, hi: b }
        }
    }

    pub fn scale_rational(&self, c: &BigRational) -> Interval {
        self.scale(&ScaledRational::from_rational(c))
    }

    /// Enclosure of `{ sqrt(t) : t in self }` whose endpoints are within a
    /// relative error of `2^-bits` of the true roots (exact for perfect squares).
    pub fn sqrt_with_bits(&self, bits: u32) -> Result<Interval> {
        if self.lo.is_negative() {
            return Err(Error::Precondition(format!(
                "sqrt of interval with negative end {}",
                self.lo
            )));
        }
        Ok(Interval {
            lo: sqrt_bound(&self.lo, bits, false),
            hi: sqrt_bound(&self.hi, bits, true),
        })
    }

    pub fn sqrt(&self) -> Result<Interval> {
        self.sqrt_with_bits(DEFAULT_SQRT_BITS)
    }

    /// A rational inside the interval with a short dyadic expansion when one
    /// exists: the exact value for points, else the coarsest `floor(hi)` on a
    /// `2^-k` grid (k a multiple of 8, up to 256) that stays above `lo`, else
    /// the midpoint.
    pub fn representative(&self) -> Result<BigRational> {
        if self.is_point() {
            return self.lo.to_rational();
        }
        let hi = self.hi.to_rational()?;
        for bits in (8..=256).step_by(8) {
            let q = super::floor_dyadic(&hi, bits);
            if self.contains_rational(&q) {
                return Ok(q);
            }
        }
        self.mid().to_rational()
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (self.lo.to_f64(), self.hi.to_f64())
    }
}

/// One-sided rational bound for `sqrt(t)`, `t >= 0`.
fn sqrt_bound(t: &ScaledRational, bits: u32, upper: bool) -> ScaledRational {
    if t.is_zero() {
        return ScaledRational::zero();
    }
    let (mut p, q) = (t.mantissa().numer().clone(), t.mantissa().denom().clone());
    let mut e = t.exp2();
    if e.rem_euclid(2) == 1 {
        p <<= 1usize;
        e -= 1;
    }
    // sqrt(p/q) = sqrt(p q) / q; scale p q by 4^k so the integer root carries enough bits
    let pq = &p * &q;
    let want = 2 * (bits as u64 + 2);
    let k = want.saturating_sub(pq.bits()).div_ceil(2) as usize;
    let scaled = pq << (2 * k);
    let s = scaled.sqrt();
    let exact = &s * &s == scaled;
    let root = if upper && !exact { s + BigInt::one() } else { s };
    let m = BigRational::new(root, q);
    ScaledRational::new(m, e / 2 - k as i64).expect("sqrt halves the exponent")
}

impl Add for &Interval {
    type Output = Interval;
    fn add(self, rhs: &Interval) -> Interval {
        Interval {
            lo: &self.lo + &rhs.lo,
            hi: &self.hi + &rhs.hi,
        }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        &self + &rhs
    }
}

impl Sub for &Interval {
    type Output = Interval;
    fn sub(self, rhs: &Interval) -> Interval {
        Interval {
            lo: &self.lo - &rhs.hi,
            hi: &self.hi - &rhs.lo,
        }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        &self - &rhs
    }
}

impl Neg for &Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval {
            lo: -&self.hi,
            hi: -&self.lo,
        }
    }
}

impl Mul for &Interval {
    type Output = Interval;
    fn mul(self, rhs: &Interval) -> Interval {
        let products = [
            &self.lo * &rhs.lo,
            &self.lo * &rhs.hi,
            &self.hi * &rhs.lo,
            &self.hi * &rhs.hi,
        ];
        let lo = products.iter().min().unwrap().clone();
        let hi = products.iter().max().unwrap().clone();
        Interval { lo, hi }
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.to_f64_pair();
        write!(f, "[{a:.12e}, {b:.12e}]")
    }
}

impl From<ScaledRational> for Interval {
    fn from(x: ScaledRational) -> Self {
        Interval::point(x)
    }
}
