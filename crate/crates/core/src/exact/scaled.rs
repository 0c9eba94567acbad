use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{format_rational, parse_rational};
use crate::error::{Error, Result};

/// Largest power-of-two shift we are willing to materialize when lowering to
/// a plain rational (2^26 bits is 8 MiB per integer).
const MAX_LOWERING_BITS: u64 = 1 << 26;

/// An exact rational `mantissa * 2^exp2`.
///
/// Canonical form: the mantissa is zero with `exp2 == 0`, or both its numerator
/// and denominator are odd. All powers of two live in `exp2`, so values such as
/// `2^-(a^2)` for large `a` cost a handful of bytes.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ScaledRational {
    mantissa: BigRational,
    exp2: i64,
}

fn trailing_zeros(n: &BigInt) -> u64 {
    n.trailing_zeros().unwrap_or(0)
}

impl ScaledRational {
    pub fn zero() -> Self {
        ScaledRational {
            mantissa: BigRational::zero(),
            exp2: 0,
        }
    }

    pub fn one() -> Self {
        ScaledRational {
            mantissa: BigRational::one(),
            exp2: 0,
        }
    }

    /// `2^e`.
    pub fn pow2(e: i64) -> Self {
        ScaledRational {
            mantissa: BigRational::one(),
            exp2: e,
        }
    }

    /// Builds `m * 2^e`, normalizing; fails when the normalized exponent
    /// does not fit in an `i64`.
    pub fn new(m: BigRational, e: i64) -> Result<Self> {
        if m.is_zero() {
            return Ok(Self::zero());
        }
        let tz_n = trailing_zeros(m.numer());
        let tz_d = trailing_zeros(m.denom());
        let numer = m.numer() >> tz_n;
        let denom = m.denom() >> tz_d;
        let shift = tz_n as i128 - tz_d as i128 + e as i128;
        let exp2 = i64::try_from(shift)
            .map_err(|_| Error::ExponentRange(format!("2^{shift} exceeds the 64-bit exponent range")))?;
        Ok(ScaledRational {
            mantissa: BigRational::new_raw(numer, denom),
            exp2,
        })
    }

    pub fn from_rational(r: &BigRational) -> Self {
        Self::new(r.clone(), 0).expect("a materialized rational always has an in-range exponent")
    }

    pub fn from_integer(n: i64) -> Self {
        Self::from_rational(&BigRational::from_integer(BigInt::from(n)))
    }

    pub fn mantissa(&self) -> &BigRational {
        &self.mantissa
    }

    pub fn exp2(&self) -> i64 {
        self.exp2
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.mantissa.is_positive()
    }

    pub fn signum(&self) -> i32 {
        match self.mantissa.numer().sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn abs(&self) -> Self {
        ScaledRational {
            mantissa: self.mantissa.abs(),
            exp2: self.exp2,
        }
    }

    /// Lowers to a plain rational. Refuses shifts beyond 2^26 bits.
    pub fn to_rational(&self) -> Result<BigRational> {
        if self.exp2.unsigned_abs() > MAX_LOWERING_BITS {
            return Err(Error::ExponentRange(format!(
                "2^{} is too large to lower to a plain rational",
                self.exp2
            )));
        }
        let shift = self.exp2.unsigned_abs() as usize;
        let (n, d) = (self.mantissa.numer().clone(), self.mantissa.denom().clone());
        Ok(if self.exp2 >= 0 {
            BigRational::new_raw(n << shift, d)
        } else {
            BigRational::new_raw(n, d << shift)
        })
    }

    /// Binary logarithm estimate `L` with `2^(L-1) < |self| < 2^(L+1)`.
    fn log2_estimate(&self) -> i128 {
        self.mantissa.numer().bits() as i128 - self.mantissa.denom().bits() as i128 + self.exp2 as i128
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero());
        }
        let exp2 = self
            .exp2
            .checked_add(other.exp2)
            .ok_or_else(|| Error::ExponentRange(format!("2^({} + {}) overflows", self.exp2, other.exp2)))?;
        // odd * odd stays odd, so no renormalization of powers of two is needed
        Ok(ScaledRational {
            mantissa: &self.mantissa * &other.mantissa,
            exp2,
        })
    }

    /// Multiplies by `2^e`.
    pub fn mul_pow2(&self, e: i64) -> Result<Self> {
        self.checked_mul(&Self::pow2(e))
    }

    pub fn mul_rational(&self, r: &BigRational) -> Self {
        self * &Self::from_rational(r)
    }

    /// Exact division by a non-zero rational.
    pub fn div_rational(&self, r: &BigRational) -> Self {
        assert!(!r.is_zero(), "division by zero");
        self * &Self::from_rational(&r.recip())
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        ScaledRational {
            mantissa: self.mantissa.recip(),
            exp2: -self.exp2,
        }
    }

    /// Exact sum of many terms.
    ///
    /// Terms are brought to a common exponent and a common odd denominator and
    /// accumulated as one big integer, so the only gcd taken is against the
    /// (small) common denominator. Summation runs in iteration order.
    pub fn sum<'a, I: IntoIterator<Item = &'a ScaledRational>>(terms: I) -> Self {
        let terms: Vec<&ScaledRational> = terms.into_iter().filter(|t| !t.is_zero()).collect();
        match terms.len() {
            0 => return Self::zero(),
            1 => return terms[0].clone(),
            _ => {}
        }
        let e_min = terms.iter().map(|t| t.exp2).min().unwrap();
        let lcm = terms.iter().fold(BigInt::one(), |acc, t| acc.lcm(t.mantissa.denom()));
        let mut acc = BigInt::zero();
        for t in &terms {
            let shift = (t.exp2 as i128 - e_min as i128) as usize;
            let scaled = t.mantissa.numer() * (&lcm / t.mantissa.denom());
            acc += scaled << shift;
        }
        Self::new(BigRational::new(acc, lcm), e_min).expect("sum exponent lies between term exponents")
    }

    pub fn max(a: &Self, b: &Self) -> Self {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    pub fn min(a: &Self, b: &Self) -> Self {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    /// Lossy conversion for display only.
    pub fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        // keep about 64 significant bits of numerator and denominator
        let (n, d) = (self.mantissa.numer(), self.mantissa.denom());
        let sn = n.bits().saturating_sub(64);
        let sd = d.bits().saturating_sub(64);
        let m = (n >> sn).to_f64().unwrap_or(f64::NAN) / (d >> sd).to_f64().unwrap_or(f64::NAN);
        let e = self.exp2 + sn as i64 - sd as i64;
        match e {
            e if e < -2200 => 0.0 * m,
            e if e > 2200 => m * f64::INFINITY,
            e => m * 2f64.powi((e / 2) as i32) * 2f64.powi((e - e / 2) as i32),
        }
    }
}

impl Default for ScaledRational {
    fn default() -> Self {
        Self::zero()
    }
}

impl Ord for ScaledRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.signum(), other.signum());
        if sa != sb {
            return sa.cmp(&sb);
        }
        if sa == 0 {
            return Ordering::Equal;
        }
        let (la, lb) = (self.log2_estimate(), other.log2_estimate());
        let mag = if la + 2 < lb {
            Ordering::Less
        } else if lb + 2 < la {
            Ordering::Greater
        } else {
            // exponents are close relative to mantissa sizes: cross-multiply
            let e_min = self.exp2.min(other.exp2);
            let sh_a = (self.exp2 as i128 - e_min as i128) as usize;
            let sh_b = (other.exp2 as i128 - e_min as i128) as usize;
            let lhs = (self.mantissa.numer().abs() * other.mantissa.denom()) << sh_a;
            let rhs = (other.mantissa.numer().abs() * self.mantissa.denom()) << sh_b;
            lhs.cmp(&rhs)
        };
        if sa > 0 {
            mag
        } else {
            mag.reverse()
        }
    }
}

impl PartialOrd for ScaledRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for ScaledRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*2^{}", format_rational(&self.mantissa), self.exp2)
    }
}

impl fmt::Display for ScaledRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp2 == 0 {
            write!(f, "{}", format_rational(&self.mantissa))
        } else {
            write!(f, "{}*2^{}", format_rational(&self.mantissa), self.exp2)
        }
    }
}

impl Neg for ScaledRational {
    type Output = ScaledRational;
    fn neg(self) -> Self {
        ScaledRational {
            mantissa: -self.mantissa,
            exp2: self.exp2,
        }
    }
}

impl Neg for &ScaledRational {
    type Output = ScaledRational;
    fn neg(self) -> ScaledRational {
        -self.clone()
    }
}

impl Add for &ScaledRational {
    type Output = ScaledRational;
    fn add(self, rhs: &ScaledRational) -> ScaledRational {
        ScaledRational::sum([self, rhs])
    }
}

impl Add for ScaledRational {
    type Output = ScaledRational;
    fn add(self, rhs: ScaledRational) -> ScaledRational {
        &self + &rhs
    }
}

impl Sub for &ScaledRational {
    type Output = ScaledRational;
    fn sub(self, rhs: &ScaledRational) -> ScaledRational {
        let neg = -rhs;
        ScaledRational::sum([self, &neg])
    }
}

impl Sub for ScaledRational {
    type Output = ScaledRational;
    fn sub(self, rhs: ScaledRational) -> ScaledRational {
        &self - &rhs
    }
}

impl Mul for &ScaledRational {
    type Output = ScaledRational;
    fn mul(self, rhs: &ScaledRational) -> ScaledRational {
        self.checked_mul(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl Mul for ScaledRational {
    type Output = ScaledRational;
    fn mul(self, rhs: ScaledRational) -> ScaledRational {
        &self * &rhs
    }
}

impl From<BigRational> for ScaledRational {
    fn from(r: BigRational) -> Self {
        Self::from_rational(&r)
    }
}

impl From<&BigRational> for ScaledRational {
    fn from(r: &BigRational) -> Self {
        Self::from_rational(r)
    }
}

#[derive(Serialize, Deserialize)]
struct ScaledRationalRepr {
    m: String,
    e2: i64,
}

impl Serialize for ScaledRational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ScaledRationalRepr {
            m: format_rational(&self.mantissa),
            e2: self.exp2,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScaledRational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = ScaledRationalRepr::deserialize(d)?;
        let m = parse_rational(&repr.m).map_err(serde::de::Error::custom)?;
        ScaledRational::new(m, repr.e2).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, rat};
    use proptest::prelude::*;

    #[test]
    fn to_f64_survives_huge_mantissas() {
        let big = BigInt::from(3u8).pow(2000);
        let m = BigRational::new(&big + BigInt::one(), big);
        let x = ScaledRational::new(m, -3).unwrap();
        assert!((x.to_f64() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn canonical_form_moves_twos_into_exponent() {
        let x = ScaledRational::from_rational(&rat(12, 5));
        assert_eq!(x.mantissa(), &rat(3, 5));
        assert_eq!(x.exp2(), 2);
        let z = ScaledRational::new(BigRational::zero(), 17).unwrap();
        assert_eq!(z.exp2(), 0);
        assert_eq!(z, ScaledRational::zero());
    }

    #[test]
    fn exponent_overflow_is_rejected() {
        assert!(ScaledRational::new(int(2), i64::MAX).is_err());
        let big = ScaledRational::pow2(i64::MAX - 1);
        assert!(big.checked_mul(&big).is_err());
        assert!(ScaledRational::pow2(1 << 40).to_rational().is_err());
    }

    #[test]
    fn comparisons_across_huge_exponent_gaps() {
        let tiny = ScaledRational::pow2(-(1 << 40));
        let two = ScaledRational::from_integer(2);
        assert!(tiny < two);
        assert!(-&tiny > -two.clone());
        assert!(ScaledRational::zero() < tiny);
        let near = ScaledRational::pow2(-(1 << 40) + 3);
        assert!(tiny < near);
    }

    #[test]
    fn sum_of_dyadic_series() {
        let terms: Vec<_> = (1..=10).map(|k| ScaledRational::pow2(-k)).collect();
        let s = ScaledRational::sum(&terms);
        assert_eq!(s.to_rational().unwrap(), rat(1023, 1024));
    }

    #[test]
    fn json_round_trip() {
        let x = ScaledRational::new(rat(-7, 3), -100).unwrap();
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, r#"{"m":"-7/3","e2":-100}"#);
        let y: ScaledRational = serde_json::from_str(&s).unwrap();
        assert_eq!(x, y);
    }

    fn small_rat() -> impl Strategy<Value = BigRational> {
        (-1000i64..1000, 1i64..1000).prop_map(|(p, q)| rat(p, q))
    }

    proptest! {
        // brute force: lower both sides to plain rationals (cross-multiplication in num-rational)
        #[test]
        fn arithmetic_matches_plain_rationals(a in small_rat(), b in small_rat(), ea in -60i64..60, eb in -60i64..60) {
            let x = ScaledRational::new(a.clone(), ea).unwrap();
            let y = ScaledRational::new(b.clone(), eb).unwrap();
            let two = |e: i64| if e >= 0 { int(1 << e) } else { rat(1, 1 << -e) };
            let (xr, yr) = (&a * two(ea), &b * two(eb));
            prop_assert_eq!((&x + &y).to_rational().unwrap(), &xr + &yr);
            prop_assert_eq!((&x - &y).to_rational().unwrap(), &xr - &yr);
            prop_assert_eq!((&x * &y).to_rational().unwrap(), &xr * &yr);
            prop_assert_eq!(x.abs().to_rational().unwrap(), xr.abs());
            prop_assert_eq!(x.cmp(&y), xr.cmp(&yr));
        }

        #[test]
        fn string_format_round_trip(a in small_rat(), e in -1_000_000i64..1_000_000) {
            let x = ScaledRational::new(a, e).unwrap();
            let s = serde_json::to_string(&x).unwrap();
            let y: ScaledRational = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(x, y);
        }
    }
}
