//! The data of the perturbed norm: a listing `(u_n)` of `c00(Q)`, admissible exponents
//! `(a_n)`, and the derived unit vectors `v_n` and weights `r_n` with
//!
//! ```text
//! |||x||| = ||x||_inf + sum_n r_n |<x, v_n>|,
//! v_n = (u_n - e_{a_n}) / ||u_n - e_{a_n}||_1,   r_n = 2^{-a_n^2} ||u_n - e_{a_n}||_1.
//! ```

pub mod enumeration;

use std::sync::{Arc, RwLock};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{ScaledRational, SparseVec};

/// How `u_n` is produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// The fixed bijective listing of [`enumeration`].
    Canonical,
    /// A finite list scheduled first, then the canonical listing.
    FrontLoaded(Vec<SparseVec>),
}

/// How `a_n` is chosen.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ARule {
    /// Smallest admissible value; yields an infinite construction.
    #[serde(rename = "minimal")]
    Minimal,
    /// Exactly these exponents; the construction has one term per entry.
    Explicit(Vec<u64>),
}

/// JSON descriptor: `{"scheme": "canonical" | {"front_loaded": [...]}, "a_rule": "minimal" | {"explicit": [...]}}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Descriptor {
    pub scheme: Scheme,
    pub a_rule: ARule,
}

impl Descriptor {
    pub fn canonical() -> Self {
        Descriptor {
            scheme: Scheme::Canonical,
            a_rule: ARule::Minimal,
        }
    }

    pub fn front_loaded(prefix: Vec<SparseVec>) -> Self {
        Descriptor {
            scheme: Scheme::FrontLoaded(prefix),
            a_rule: ARule::Minimal,
        }
    }
}

/// One term of the series.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Term {
    pub n: usize,
    pub u: SparseVec,
    pub a: u64,
    /// `||u_n - e_{a_n}||_1`.
    #[serde(with = "crate::exact::serde_rational")]
    pub weight: BigRational,
    pub v: SparseVec,
    pub r: ScaledRational,
}

/// `n`-th element of the listing under `scheme` (n >= 1).
pub fn enumerate_u(scheme: &Scheme, n: &BigUint) -> SparseVec {
    assert!(!n.is_zero(), "listing is indexed from 1");
    match scheme {
        Scheme::Canonical => enumeration::canonical_u(n),
        Scheme::FrontLoaded(prefix) => match n.to_usize() {
            Some(i) if i <= prefix.len() => prefix[i - 1].clone(),
            _ => enumeration::canonical_u(&(n - BigUint::from(prefix.len()))),
        },
    }
}

/// Index of the `occurrence`-th appearance of `u` (occurrence >= 1).
pub fn locate(scheme: &Scheme, u: &SparseVec, occurrence: &BigUint) -> BigUint {
    assert!(!occurrence.is_zero(), "occurrences are counted from 1");
    match scheme {
        Scheme::Canonical => enumeration::canonical_locate(u, occurrence),
        Scheme::FrontLoaded(prefix) => {
            let hits: Vec<usize> = prefix
                .iter()
                .enumerate()
                .filter(|(_, p)| *p == u)
                .map(|(i, _)| i + 1)
                .collect();
            match occurrence.to_usize() {
                Some(j) if j <= hits.len() => BigUint::from(hits[j - 1]),
                _ => {
                    let rest = occurrence - BigUint::from(hits.len());
                    enumeration::canonical_locate(u, &rest) + BigUint::from(prefix.len())
                }
            }
        }
    }
}

fn floor_plus_one(q: &BigRational) -> BigInt {
    q.floor().to_integer() + 1
}

fn exponent_of(a: u64) -> Result<i64> {
    a.checked_mul(a)
        .and_then(|sq| i64::try_from(sq).ok())
        .map(|sq| -sq)
        .ok_or_else(|| Error::ExponentRange(format!("a_n = {a}: a_n^2 exceeds the 64-bit exponent range")))
}

/// Builds `(v_n, r_n, ||u - e_a||_1)` from `u_n`, `a_n`.
fn derive_term(n: usize, u: SparseVec, a: u64) -> Result<Term> {
    let idx = usize::try_from(a).map_err(|_| Error::ExponentRange(format!("a_n = {a} is not addressable")))?;
    let diff = u.sub(&SparseVec::unit(idx));
    let weight = diff.l1_norm();
    let v = diff.scale(&weight.recip());
    let r = ScaledRational::new(weight.clone(), exponent_of(a)?)?;
    Ok(Term { n, u, a, weight, v, r })
}

/// Which admissibility condition an `(u_n, a_n)` pair violates, if any.
fn admissibility_violation(u: &SparseVec, a: u64, prev: u64) -> Option<String> {
    if a <= prev {
        return Some(format!("a_n = {a} is not larger than a_(n-1) = {prev}"));
    }
    if a as u128 <= u.max_index() as u128 {
        return Some(format!("a_n = {a} is not larger than max supp u_n = {}", u.max_index()));
    }
    if BigRational::from_integer(a.into()) <= u.l1_norm() {
        return Some(format!("a_n = {a} is not larger than ||u_n||_1 = {}", u.l1_norm()));
    }
    None
}

/// A concrete instance of the norm data with a memoized term stream.
#[derive(Debug)]
pub struct ReadConstruction {
    descriptor: Descriptor,
    cache: RwLock<Vec<Arc<Term>>>,
}

impl Clone for ReadConstruction {
    fn clone(&self) -> Self {
        ReadConstruction {
            descriptor: self.descriptor.clone(),
            cache: RwLock::new(self.cache.read().unwrap().clone()),
        }
    }
}

fn serialize_decimal<S: serde::Serializer>(n: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&n.to_string())
}

/// Outcome of [`ReadConstruction::density_witness`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DensityWitness {
    /// Index `k` with `||v_k - w||_1 <= eps`; may be astronomically large.
    #[serde(serialize_with = "serialize_decimal")]
    pub index: BigUint,
    /// Exact `||v_k - w||_1`.
    #[serde(with = "crate::exact::serde_rational")]
    pub discrepancy: BigRational,
    /// `K` when the index came from locating `K w`; `None` when found by scanning.
    pub multiplier: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    /// First index at which the check failed.
    pub first_failure: Option<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub terms_checked: usize,
    pub partial_sum_r: ScaledRational,
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ValidationCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl ReadConstruction {
    pub fn new(descriptor: Descriptor) -> Self {
        ReadConstruction {
            descriptor,
            cache: RwLock::new(Vec::new()),
        }
    }

    /// Canonical listing with minimal exponents.
    pub fn canonical() -> Self {
        Self::new(Descriptor::canonical())
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.descriptor
    }

    /// Number of terms; `None` for an infinite construction.
    pub fn term_count(&self) -> Option<usize> {
        match &self.descriptor.a_rule {
            ARule::Minimal => None,
            ARule::Explicit(list) => Some(list.len()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.term_count().is_some()
    }

    /// Number of terms among the first `n` that actually exist.
    pub fn available(&self, n: usize) -> usize {
        self.term_count().map_or(n, |len| len.min(n))
    }

    pub fn u(&self, n: usize) -> SparseVec {
        enumerate_u(&self.descriptor.scheme, &BigUint::from(n))
    }

    /// `a_n`, checked against every admissibility constraint.
    pub fn assign_a(&self, n: usize) -> Result<u64> {
        Ok(self.term(n)?.a)
    }

    /// The n-th term (n >= 1), extending the memo as needed.
    pub fn term(&self, n: usize) -> Result<Arc<Term>> {
        assert!(n >= 1, "terms are indexed from 1");
        if let Some(len) = self.term_count() {
            if n > len {
                return Err(Error::FiniteConstruction { n, len });
            }
        }
        if let Some(t) = self.cache.read().unwrap().get(n - 1) {
            return Ok(t.clone());
        }
        let mut cache = self.cache.write().unwrap();
        while cache.len() < n {
            let k = cache.len() + 1;
            let prev = cache.last().map_or(1, |t| t.a);
            let u = self.u(k);
            let a = match &self.descriptor.a_rule {
                ARule::Minimal => {
                    let by_support = u.max_index() as u64 + 1;
                    let by_norm = floor_plus_one(&u.l1_norm())
                        .to_u64()
                        .ok_or_else(|| Error::ExponentRange(format!("||u_{k}||_1 is too large")))?;
                    (prev + 1).max(by_support).max(by_norm)
                }
                ARule::Explicit(list) => {
                    let a = list[k - 1];
                    if let Some(why) = admissibility_violation(&u, a, prev) {
                        return Err(Error::Admissibility { n: k, constraint: why });
                    }
                    a
                }
            };
            cache.push(Arc::new(derive_term(k, u, a)?));
        }
        Ok(cache[n - 1].clone())
    }

    /// Terms `1..=min(n, len)`.
    pub fn terms(&self, n: usize) -> Result<Vec<Arc<Term>>> {
        let m = self.available(n);
        if m == 0 {
            return Ok(Vec::new());
        }
        self.term(m)?;
        Ok(self.cache.read().unwrap()[..m].to_vec())
    }

    /// A proven upper bound for `sum_{n > big_n} r_n |<x, v_n>|` over all `x`
    /// with `||x||_inf <= m`.
    ///
    /// Infinite constructions use `m (8/3) (A + 1) 2^{-(A+1)^2}` with `A = a_N`
    /// (`A = 1` for `N = 0`); finite ones sum the remaining weights exactly.
    pub fn tail_bound(&self, big_n: usize, m: &BigRational) -> Result<ScaledRational> {
        if m.is_zero() {
            return Ok(ScaledRational::zero());
        }
        let m = ScaledRational::from_rational(&m.abs());
        match self.term_count() {
            Some(len) => {
                if big_n >= len {
                    return Ok(ScaledRational::zero());
                }
                let terms = self.terms(len)?;
                let rest: Vec<&ScaledRational> = terms[big_n..].iter().map(|t| &t.r).collect();
                Ok(&m * &ScaledRational::sum(rest))
            }
            None => {
                let a = if big_n == 0 { 1 } else { self.term(big_n)?.a };
                let next = a + 1;
                let coeff = BigRational::new(BigInt::from(8u64) * BigInt::from(next), BigInt::from(3));
                let decay = ScaledRational::pow2(exponent_of(next)?);
                Ok(&(&m * &ScaledRational::from_rational(&coeff)) * &decay)
            }
        }
    }

    /// An index `k` with `||v_k - w||_1 <= eps` for a rational `w` on the l1 sphere.
    ///
    /// Scans the first `scan_depth` terms; failing that, locates `K w` with
    /// `K = ceil(2/eps)`, for which `v_k - w = -(w + e_{a_k})/(K + 1)` exactly.
    pub fn density_witness(&self, w: &SparseVec, eps: &BigRational, scan_depth: usize) -> Result<DensityWitness> {
        if w.l1_norm() != BigRational::one() {
            return Err(Error::Precondition(format!("||w||_1 = {} != 1", w.l1_norm())));
        }
        if !eps.is_positive() {
            return Err(Error::Precondition("eps must be positive".into()));
        }
        for t in self.terms(scan_depth)? {
            let d = t.v.sub(w).l1_norm();
            if &d <= eps {
                return Ok(DensityWitness {
                    index: BigUint::from(t.n),
                    discrepancy: d,
                    multiplier: None,
                });
            }
        }
        let k = (BigRational::from_integer(2.into()) / eps).ceil().to_integer();
        let k_u64 = k
            .to_u64()
            .ok_or_else(|| Error::Precondition("eps too small".into()))?
            .max(1);
        let target = w.scale(&BigRational::from_integer(k_u64.into()));
        let index = locate(&self.descriptor.scheme, &target, &BigUint::one());
        if let Some(len) = self.term_count() {
            if index > BigUint::from(len) {
                return Err(Error::DepthExhausted(format!(
                    "witness index {index} lies beyond the {len} terms of this construction"
                )));
            }
        }
        Ok(DensityWitness {
            index,
            discrepancy: BigRational::new(2.into(), BigInt::from(k_u64) + 1),
            multiplier: Some(k_u64),
        })
    }

    /// Checks admissibility and normalization for terms `1..=n` without
    /// failing fast: every violation becomes a report entry.
    pub fn validate(&self, n: usize) -> ValidationReport {
        let n = self.available(n);
        let mut prev = 1u64;
        let mut first = [None::<usize>; 4];
        let mut rs = Vec::with_capacity(n);
        let mut range_error = None;
        for k in 1..=n {
            let (u, a) = match (&self.descriptor.a_rule, self.term(k)) {
                (_, Ok(t)) => (t.u.clone(), t.a),
                (ARule::Explicit(list), Err(Error::Admissibility { .. })) => (self.u(k), list[k - 1]),
                (_, Err(e)) => {
                    range_error = Some(format!("term {k}: {e}"));
                    break;
                }
            };
            let record = |slot: &mut Option<usize>, ok: bool| {
                if !ok && slot.is_none() {
                    *slot = Some(k);
                }
            };
            record(&mut first[0], a > prev);
            record(&mut first[1], a as u128 > u.max_index() as u128);
            record(&mut first[2], BigRational::from_integer(a.into()) > u.l1_norm());
            prev = a;
            match usize::try_from(a)
                .ok()
                .filter(|&i| i >= 1)
                .map(|i| derive_term(k, u, i as u64))
            {
                Some(Ok(t)) => {
                    record(&mut first[3], t.v.l1_norm() == BigRational::one());
                    rs.push(t.r);
                }
                Some(Err(e)) => {
                    range_error = Some(format!("term {k}: {e}"));
                    break;
                }
                None => record(&mut first[3], false),
            }
        }
        let partial = ScaledRational::sum(&rs);
        let sum_ok = partial <= ScaledRational::from_integer(2);
        let names = [
            ("a_strictly_increasing", "a_n > a_(n-1)"),
            ("a_exceeds_support", "a_n > max supp u_n"),
            ("a_exceeds_l1_norm", "a_n > ||u_n||_1"),
            ("v_unit_l1", "||v_n||_1 = 1"),
        ];
        let mut checks: Vec<ValidationCheck> = names
            .iter()
            .zip(first)
            .map(|((name, what), f)| ValidationCheck {
                name: name.to_string(),
                passed: f.is_none(),
                first_failure: f,
                detail: match f {
                    None => format!("{what} for n <= {n}"),
                    Some(k) => format!("{what} fails at n = {k}"),
                },
            })
            .collect();
        checks.push(ValidationCheck {
            name: "partial_sum_r_at_most_2".into(),
            passed: sum_ok,
            first_failure: None,
            detail: format!("sum_(n<={n}) r_n = {:.6e}", partial.to_f64()),
        });
        if let Some(e) = range_error {
            checks.push(ValidationCheck {
                name: "exponent_range".into(),
                passed: false,
                first_failure: None,
                detail: e,
            });
        }
        ValidationReport {
            terms_checked: n,
            partial_sum_r: partial,
            checks,
        }
    }
}
