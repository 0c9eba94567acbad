use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use super::{format_rational, parse_rational};
use crate::error::{Error, Result};

/// Read access to a bounded real sequence indexed from 1.
pub trait Sequence {
    /// The k-th coordinate (k >= 1).
    fn coord(&self, k: usize) -> BigRational;
    /// Every coordinate beyond this index equals [`Sequence::tail`].
    fn horizon(&self) -> usize;
    fn tail(&self) -> BigRational;
    /// Non-zero coordinates at indices `<= horizon`, ascending.
    fn head_entries(&self) -> Vec<(usize, BigRational)>;

    fn sup_norm(&self) -> BigRational {
        self.head_entries()
            .into_iter()
            .map(|(_, v)| v.abs())
            .fold(self.tail().abs(), |m, v| if v > m { v } else { m })
    }

    /// `sum_k x_k v_k` over the (finite) support of `v`.
    fn dot(&self, v: &SparseVec) -> BigRational {
        let mut acc = BigRational::zero();
        for (k, vk) in v.iter() {
            let xk = self.coord(k);
            if !xk.is_zero() {
                acc += xk * vk;
            }
        }
        acc
    }

    fn to_tail_vec(&self) -> TailVec {
        TailVec::new(self.head_entries(), self.tail(), self.horizon()).expect("head entries lie within the horizon")
    }

    /// `S_m x`: the first `m` coordinates.
    fn truncate(&self, m: usize) -> SparseVec {
        let mut out = SparseVec::new();
        for (k, v) in self.head_entries() {
            if k <= m {
                out.set(k, v);
            }
        }
        let t = self.tail();
        if !t.is_zero() {
            for k in self.horizon() + 1..=m {
                out.set(k, t.clone());
            }
        }
        out
    }

    fn is_zero_seq(&self) -> bool {
        self.tail().is_zero() && self.head_entries().is_empty()
    }
}

/// A finitely supported rational sequence (an element of c00(Q)).
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SparseVec {
    entries: BTreeMap<usize, BigRational>,
}

impl SparseVec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from `(index, value)` pairs; zero values are dropped, later
    /// duplicates overwrite earlier ones. Index 0 is rejected.
    pub fn from_entries<I: IntoIterator<Item = (usize, BigRational)>>(it: I) -> Result<Self> {
        let mut v = SparseVec::new();
        for (k, x) in it {
            if k == 0 {
                return Err(Error::Precondition("sequence indices start at 1".into()));
            }
            v.set(k, x);
        }
        Ok(v)
    }

    /// Dense constructor: `values[i]` becomes coordinate `i + 1`.
    pub fn from_dense(values: &[BigRational]) -> Self {
        let mut v = SparseVec::new();
        for (i, x) in values.iter().enumerate() {
            v.set(i + 1, x.clone());
        }
        v
    }

    /// The basis vector `e_k`.
    pub fn unit(k: usize) -> Self {
        assert!(k >= 1, "basis vectors are indexed from 1");
        let mut v = SparseVec::new();
        v.set(k, BigRational::from_integer(1.into()));
        v
    }

    pub fn get(&self, k: usize) -> BigRational {
        self.entries.get(&k).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn set(&mut self, k: usize, x: BigRational) {
        assert!(k >= 1, "sequence indices start at 1");
        if x.is_zero() {
            self.entries.remove(&k);
        } else {
            self.entries.insert(k, x);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &BigRational)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest index in the support; 0 for the zero vector.
    pub fn max_index(&self) -> usize {
        self.entries.keys().next_back().copied().unwrap_or(0)
    }

    pub fn l1_norm(&self) -> BigRational {
        self.entries.values().fold(BigRational::zero(), |acc, v| acc + v.abs())
    }

    pub fn scale(&self, c: &BigRational) -> SparseVec {
        if c.is_zero() {
            return SparseVec::new();
        }
        SparseVec {
            entries: self.entries.iter().map(|(k, v)| (*k, v * c)).collect(),
        }
    }

    pub fn add(&self, other: &SparseVec) -> SparseVec {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            let s = out.get(k) + v;
            out.set(k, s);
        }
        out
    }

    pub fn sub(&self, other: &SparseVec) -> SparseVec {
        self.add(&other.scale(&BigRational::from_integer((-1).into())))
    }

    /// Dense coordinates `1..=d`.
    pub fn to_dense(&self, d: usize) -> Vec<BigRational> {
        (1..=d).map(|k| self.get(k)).collect()
    }
}

impl Sequence for SparseVec {
    fn coord(&self, k: usize) -> BigRational {
        self.get(k)
    }
    fn horizon(&self) -> usize {
        self.max_index()
    }
    fn tail(&self) -> BigRational {
        BigRational::zero()
    }
    fn head_entries(&self) -> Vec<(usize, BigRational)> {
        self.entries.iter().map(|(k, v)| (*k, v.clone())).collect()
    }
    fn dot(&self, v: &SparseVec) -> BigRational {
        // iterate over the smaller support
        let (small, large) = if self.entries.len() <= v.entries.len() {
            (self, v)
        } else {
            (v, self)
        };
        small
            .iter()
            .filter_map(|(k, a)| large.entries.get(&k).map(|b| a * b))
            .fold(BigRational::zero(), |acc, p| acc + p)
    }
}

impl fmt::Debug for SparseVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}: {}", format_rational(v))?;
        }
        f.write_str("}")
    }
}

/// A bounded rational sequence that is constant beyond a horizon; models the
/// elements of l_inf needed for bidual computations.
///
/// Kept in compact form: the horizon is the smallest one for which the tail
/// description is valid, so structural equality is value equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TailVec {
    head: SparseVec,
    tail: BigRational,
    horizon: usize,
}

impl TailVec {
    /// Overrides at indices `<= horizon`, constant `tail` beyond.
    pub fn new<I: IntoIterator<Item = (usize, BigRational)>>(
        head: I,
        tail: BigRational,
        horizon: usize,
    ) -> Result<Self> {
        let head = SparseVec::from_entries(head)?;
        if head.max_index() > horizon {
            return Err(Error::Precondition(format!(
                "override index {} beyond horizon {horizon}",
                head.max_index()
            )));
        }
        let mut v = TailVec { head, tail, horizon };
        v.compact();
        Ok(v)
    }

    pub fn constant(c: BigRational) -> Self {
        TailVec {
            head: SparseVec::new(),
            tail: c,
            horizon: 0,
        }
    }

    pub fn head(&self) -> &SparseVec {
        &self.head
    }

    fn compact(&mut self) {
        while self.horizon > 0 && self.head.get(self.horizon) == self.tail {
            self.head.set(self.horizon, BigRational::zero());
            self.horizon -= 1;
        }
    }

    fn combine(&self, other: &TailVec, f: impl Fn(&BigRational, &BigRational) -> BigRational) -> TailVec {
        let h = self.horizon.max(other.horizon);
        let head = (1..=h).map(|k| (k, f(&self.coord(k), &other.coord(k))));
        TailVec::new(head, f(&self.tail, &other.tail), h).expect("indices within horizon")
    }

    pub fn add(&self, other: &TailVec) -> TailVec {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &TailVec) -> TailVec {
        self.combine(other, |a, b| a - b)
    }

    pub fn scale(&self, c: &BigRational) -> TailVec {
        let head = self.head.iter().map(|(k, v)| (k, v * c));
        TailVec::new(head, &self.tail * c, self.horizon).expect("indices within horizon")
    }

    /// `x + c e_k`.
    pub fn add_unit(&self, k: usize, c: &BigRational) -> TailVec {
        self.add(&SparseVec::from_entries([(k, c.clone())]).expect("k >= 1").into())
    }

    /// The finitely supported vector this is, if the tail vanishes.
    pub fn as_sparse(&self) -> Option<SparseVec> {
        self.tail.is_zero().then(|| self.head.clone())
    }
}

impl Sequence for TailVec {
    fn coord(&self, k: usize) -> BigRational {
        if k > self.horizon {
            self.tail.clone()
        } else {
            self.head.get(k)
        }
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn tail(&self) -> BigRational {
        self.tail.clone()
    }
    fn head_entries(&self) -> Vec<(usize, BigRational)> {
        self.head.head_entries()
    }
}

impl From<SparseVec> for TailVec {
    fn from(v: SparseVec) -> Self {
        let h = v.max_index();
        TailVec {
            head: v,
            tail: BigRational::zero(),
            horizon: h,
        }
    }
}

impl From<&SparseVec> for TailVec {
    fn from(v: &SparseVec) -> Self {
        v.clone().into()
    }
}

impl fmt::Debug for TailVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} then {} beyond {}",
            self.head,
            format_rational(&self.tail),
            self.horizon
        )
    }
}

impl Serialize for SparseVec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.entries.len()))?;
        for (k, v) in self.iter() {
            map.serialize_entry(&k.to_string(), &format_rational(v))?;
        }
        map.end()
    }
}

fn parse_index(key: &str) -> Result<usize> {
    match key.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => Err(Error::Parse(format!("bad sequence index {key:?}"))),
    }
}

fn value_as_rational(v: &Value) -> Result<BigRational> {
    match v {
        Value::String(s) => parse_rational(s),
        Value::Number(n) if n.is_i64() => Ok(BigRational::from_integer(n.as_i64().unwrap().into())),
        other => Err(Error::Parse(format!("expected a \"p/q\" string, got {other}"))),
    }
}

impl<'de> Deserialize<'de> for SparseVec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = BTreeMap::<String, Value>::deserialize(d)?;
        let mut v = SparseVec::new();
        for (k, x) in raw {
            let k = parse_index(&k).map_err(D::Error::custom)?;
            v.set(k, value_as_rational(&x).map_err(D::Error::custom)?);
        }
        Ok(v)
    }
}

impl Serialize for TailVec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.head.support_len() + 2))?;
        for (k, v) in self.head.iter() {
            map.serialize_entry(&k.to_string(), &format_rational(v))?;
        }
        map.serialize_entry("tail", &format_rational(&self.tail))?;
        map.serialize_entry("horizon", &self.horizon)?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for TailVec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let mut raw = BTreeMap::<String, Value>::deserialize(d)?;
        let tail = match raw.remove("tail") {
            Some(t) => value_as_rational(&t).map_err(D::Error::custom)?,
            None => BigRational::zero(),
        };
        let horizon = raw.remove("horizon").map(|h| h.as_u64().map(|h| h as usize));
        let mut head = Vec::new();
        for (k, x) in raw {
            let k = parse_index(&k).map_err(D::Error::custom)?;
            head.push((k, value_as_rational(&x).map_err(D::Error::custom)?));
        }
        let max_k = head.iter().map(|(k, _)| *k).max().unwrap_or(0);
        let horizon = match horizon {
            None => max_k,
            Some(Some(h)) => h,
            Some(None) => return Err(D::Error::custom("horizon must be a non-negative integer")),
        };
        TailVec::new(head, tail, horizon).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, rat};

    fn sv(vals: &[(usize, BigRational)]) -> SparseVec {
        SparseVec::from_entries(vals.iter().cloned()).unwrap()
    }

    #[test]
    fn dot_products() {
        let e1 = SparseVec::unit(1);
        assert_eq!(e1.dot(&e1), int(1));
        let x = sv(&[(1, int(1)), (2, int(1))]);
        let v1 = sv(&[(1, rat(1, 2)), (2, rat(-1, 2))]);
        assert_eq!(x.dot(&v1), int(0));
        let ones = TailVec::constant(int(1));
        assert_eq!(ones.dot(&v1), int(0));
    }

    #[test]
    fn sup_norms() {
        assert_eq!(SparseVec::new().sup_norm(), int(0));
        assert_eq!(sv(&[(1, int(1)), (2, rat(-1, 2))]).sup_norm(), int(1));
        let t = TailVec::new([(1, int(3))], int(1), 1).unwrap();
        assert_eq!(t.sup_norm(), int(3));
        assert_eq!(TailVec::new([(1, rat(1, 2))], int(-2), 4).unwrap().sup_norm(), int(2));
    }

    #[test]
    fn l1_norms() {
        assert_eq!(SparseVec::unit(5).l1_norm(), int(1));
        assert_eq!(sv(&[(1, int(1)), (2, int(-1))]).l1_norm(), int(2));
        let u1 = SparseVec::unit(1);
        assert_eq!(u1.sub(&SparseVec::unit(2)).l1_norm(), int(2));
    }

    #[test]
    fn no_stored_zeros() {
        let v = sv(&[(1, int(0)), (3, int(2))]);
        assert_eq!(v.support_len(), 1);
        assert_eq!(v.max_index(), 3);
        assert!(v.sub(&v).is_zero());
        assert!(SparseVec::from_entries([(0, int(1))]).is_err());
    }

    #[test]
    fn tail_vec_compacts_and_truncates() {
        let t = TailVec::new([(1, int(2)), (2, int(1)), (3, int(1))], int(1), 3).unwrap();
        assert_eq!(t.horizon(), 1);
        assert_eq!(t, TailVec::new([(1, int(2))], int(1), 1).unwrap());
        assert_eq!(t.truncate(3), sv(&[(1, int(2)), (2, int(1)), (3, int(1))]));
        assert!(TailVec::new([(5, int(1))], int(0), 2).is_err());
        let s: TailVec = sv(&[(2, int(4))]).into();
        assert_eq!(s.add(&TailVec::constant(int(1))).coord(7), int(1));
        assert_eq!(s.as_sparse(), Some(sv(&[(2, int(4))])));
    }

    #[test]
    fn json_formats() {
        let v = sv(&[(1, rat(1, 2)), (10, int(-3))]);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"1":"1/2","10":"-3/1"}"#);
        assert_eq!(serde_json::from_str::<SparseVec>(&s).unwrap(), v);
        let t = TailVec::new([(1, int(3))], int(1), 1).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"1":"3/1","tail":"1/1","horizon":1}"#);
        assert_eq!(serde_json::from_str::<TailVec>(&s).unwrap(), t);
        assert!(serde_json::from_str::<SparseVec>(r#"{"0":"1"}"#).is_err());
    }
}
