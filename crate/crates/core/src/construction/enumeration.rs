//! A fixed, explicit bijection `N -> c00(Q)` and the "every element infinitely
//! often" listing built on top of it.
//!
//! * rationals: `0 -> 0`, `2j-1 -> cw(j)`, `2j -> -cw(j)` where `cw` walks the
//!   Calkin-Wilf tree (root `1/1`, bit 0 = left child `a/(a+b)`, bit 1 = right
//!   child `(a+b)/b`);
//! * tuples of naturals: iterated Cantor pairing;
//! * vectors: code 0 is the zero vector, code `c >= 1` unpairs `c - 1` into
//!   `(len - 1, tuple)`; the last coordinate uses rational index `k + 1` so it
//!   is never zero;
//! * listing: index `n >= 1` unpairs `n - 1` into `(occurrence - 1, code)`.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::exact::SparseVec;

/// Cantor pairing `(x + y)(x + y + 1)/2 + y`.
pub fn pair(x: &BigUint, y: &BigUint) -> BigUint {
    let s = x + y;
    (&s * (&s + 1u32)) / 2u32 + y
}

/// Inverse of [`pair`].
pub fn unpair(z: &BigUint) -> (BigUint, BigUint) {
    // w = floor((sqrt(8z + 1) - 1) / 2)
    let w = ((z * 8u32 + 1u32).sqrt() - 1u32) / 2u32;
    let t = (&w * (&w + 1u32)) / 2u32;
    let y = z - t;
    let x = &w - &y;
    (x, y)
}

/// The j-th positive rational of the Calkin-Wilf sequence (j >= 1).
pub fn calkin_wilf(j: &BigUint) -> BigRational {
    assert!(!j.is_zero(), "Calkin-Wilf sequence is indexed from 1");
    let (mut a, mut b) = (BigInt::one(), BigInt::one());
    let bits = j.bits();
    for i in (0..bits - 1).rev() {
        if j.bit(i) {
            a = &a + &b;
        } else {
            b = &a + &b;
        }
    }
    BigRational::new(a, b)
}

/// Position of a positive rational in the Calkin-Wilf sequence.
pub fn calkin_wilf_index(q: &BigRational) -> BigUint {
    assert!(q.is_positive(), "Calkin-Wilf indices exist for positive rationals only");
    let mut a = q.numer().to_biguint().unwrap();
    let mut b = q.denom().to_biguint().unwrap();
    // bits from the leaf up to the root, run-length encoded via Euclid quotients
    let mut runs: Vec<(bool, BigUint)> = Vec::new();
    while !(a.is_one() && b.is_one()) {
        if a < b {
            let k = (&b - 1u32) / &a;
            b -= &k * &a;
            runs.push((false, k));
        } else {
            let k = (&a - 1u32) / &b;
            a -= &k * &b;
            runs.push((true, k));
        }
    }
    let mut j = BigUint::one();
    for (bit, len) in runs.iter().rev() {
        let len = len.to_u64().expect("run length fits in memory");
        j <<= len as usize;
        if *bit {
            j += (BigUint::one() << len as usize) - 1u32;
        }
    }
    j
}

/// The fixed bijection `N -> Q`.
pub fn decode_rational(k: &BigUint) -> BigRational {
    if k.is_zero() {
        return BigRational::zero();
    }
    let (j, odd) = ((k + 1u32) / 2u32, k.is_odd());
    let q = calkin_wilf(&j);
    if odd {
        q
    } else {
        -q
    }
}

pub fn encode_rational(q: &BigRational) -> BigUint {
    if q.is_zero() {
        return BigUint::zero();
    }
    let j = calkin_wilf_index(&q.abs());
    if q.is_positive() {
        j * 2u32 - 1u32
    } else {
        j * 2u32
    }
}

fn decode_tuple(code: &BigUint, len: usize) -> Vec<BigUint> {
    let mut out = Vec::with_capacity(len);
    let mut rest = code.clone();
    for _ in 1..len {
        let (head, tail) = unpair(&rest);
        out.push(head);
        rest = tail;
    }
    out.push(rest);
    out
}

fn encode_tuple(items: &[BigUint]) -> BigUint {
    let (last, init) = items.split_last().expect("non-empty tuple");
    init.iter().rev().fold(last.clone(), |acc, x| pair(x, &acc))
}

/// The fixed bijection `N -> c00(Q)`.
pub fn decode_vector(code: &BigUint) -> SparseVec {
    if code.is_zero() {
        return SparseVec::new();
    }
    let (len_minus_one, tuple) = unpair(&(code - 1u32));
    let len = len_minus_one.to_usize().expect("vector length fits in memory") + 1;
    let ks = decode_tuple(&tuple, len);
    let mut v = SparseVec::new();
    for (i, k) in ks.iter().enumerate() {
        let q = if i + 1 == len {
            decode_rational(&(k + 1u32))
        } else {
            decode_rational(k)
        };
        v.set(i + 1, q);
    }
    v
}

pub fn encode_vector(v: &SparseVec) -> BigUint {
    let len = v.max_index();
    if len == 0 {
        return BigUint::zero();
    }
    let mut ks: Vec<BigUint> = (1..len).map(|i| encode_rational(&v.get(i))).collect();
    ks.push(encode_rational(&v.get(len)) - 1u32);
    pair(&BigUint::from(len - 1), &encode_tuple(&ks)) + 1u32
}

/// The n-th element (n >= 1) of the canonical listing.
pub fn canonical_u(n: &BigUint) -> SparseVec {
    assert!(!n.is_zero(), "listing is indexed from 1");
    let (_, code) = unpair(&(n - 1u32));
    decode_vector(&code)
}

/// Index of the j-th occurrence (j >= 1) of `u` in the canonical listing.
pub fn canonical_locate(u: &SparseVec, occurrence: &BigUint) -> BigUint {
    assert!(!occurrence.is_zero(), "occurrences are counted from 1");
    pair(&(occurrence - 1u32), &encode_vector(u)) + 1u32
}
