//! Evaluation of `|||x||| = ||x||_inf + ||R x||_1` with `R x = (r_n <x, v_n>)_n`,
//! its truncations, certified enclosures, the dual norm and one-sided
//! derivatives.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::construction::ReadConstruction;
use crate::error::{Error, Result};
use crate::exact::{Interval, ScaledRational, Sequence, SparseVec};
use crate::lp::{self, LinProgram, LpCertificate, Relation, Sense, VarBound};

/// Hard cap on the number of series terms a certified evaluation may use.
pub const DEFAULT_MAX_TERMS: usize = 1 << 12;

/// The perturbed norm over a fixed construction, together with the truncation policy
/// used when a certified enclosure is requested.
///
/// The base part is the sup norm; the perturbation is the weighted l1 norm of
/// `R x`. Other bases are not instantiated.
#[derive(Clone, Copy, Debug)]
pub struct PerturbedNorm<'a> {
    construction: &'a ReadConstruction,
    max_terms: usize,
}

/// `x*` and the decomposition `f = g + sum_n c_n r_n v_n` attaining the
/// truncated dual norm.
#[derive(Clone, Debug, Serialize)]
pub struct DualNormCertificate {
    #[serde(with = "crate::exact::serde_rational")]
    pub value: BigRational,
    pub terms: usize,
    /// Norming point: `<f, x*> = value * norm_truncated(x*)`.
    pub x_star: SparseVec,
    pub g: SparseVec,
    #[serde(with = "crate::exact::serde_rational_vec")]
    pub c: Vec<BigRational>,
    pub lp: LpCertificate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Smoothness {
    Smooth,
    /// `d(x; h) + d(x; -h) = gap > 0` with `||h||_inf = 1`.
    Kink {
        h: SparseVec,
        #[serde(with = "crate::exact::serde_rational")]
        gap: BigRational,
    },
}

fn sign(q: &BigRational) -> i32 {
    if q.is_positive() {
        1
    } else if q.is_negative() {
        -1
    } else {
        0
    }
}

impl<'a> PerturbedNorm<'a> {
    pub fn new(construction: &'a ReadConstruction) -> Self {
        PerturbedNorm {
            construction,
            max_terms: DEFAULT_MAX_TERMS,
        }
    }

    pub fn with_max_terms(mut self, max_terms: usize) -> Self {
        self.max_terms = max_terms;
        self
    }

    pub fn construction(&self) -> &'a ReadConstruction {
        self.construction
    }

    /// `(v_n, r_n)` for `n <= N` (capped at the construction's length), with
    /// `r_n` lowered to a plain rational.
    pub fn lowered_terms(&self, big_n: usize) -> Result<Vec<(SparseVec, BigRational)>> {
        self.construction
            .terms(big_n)?
            .iter()
            .map(|t| Ok((t.v.clone(), t.r.to_rational()?)))
            .collect()
    }

    /// The base part `||x||_inf`.
    pub fn base_part<S: Sequence>(&self, x: &S) -> BigRational {
        x.sup_norm()
    }

    /// `(r_n <x, v_n>)` for `n <= N`.
    pub fn perturbation<S: Sequence>(&self, x: &S, big_n: usize) -> Result<Vec<ScaledRational>> {
        Ok(self
            .construction
            .terms(big_n)?
            .iter()
            .map(|t| t.r.mul_rational(&x.dot(&t.v)))
            .collect())
    }

    /// `||x||_inf + sum_{n <= N} r_n |<x, v_n>|`, exactly.
    pub fn norm_truncated_scaled<S: Sequence>(&self, x: &S, big_n: usize) -> Result<ScaledRational> {
        let mut parts = vec![ScaledRational::from_rational(&x.sup_norm())];
        parts.extend(self.perturbation(x, big_n)?.into_iter().map(|p| p.abs()));
        Ok(ScaledRational::sum(&parts))
    }

    /// [`Self::norm_truncated_scaled`] lowered to a plain rational.
    pub fn norm_truncated<S: Sequence>(&self, x: &S, big_n: usize) -> Result<BigRational> {
        self.norm_truncated_scaled(x, big_n)?.to_rational()
    }

    /// An enclosure of `|||x|||` of width at most `eps`, and the number of
    /// terms summed exactly.
    pub fn norm_certified_with_terms<S: Sequence>(&self, x: &S, eps: &BigRational) -> Result<(Interval, usize)> {
        if !eps.is_positive() {
            return Err(Error::Precondition("eps must be positive".into()));
        }
        let m = x.sup_norm();
        if m.is_zero() {
            return Ok((Interval::zero(), 0));
        }
        let eps = ScaledRational::from_rational(eps);
        let big_n = match self.construction.term_count() {
            Some(len) => len,
            None => {
                let mut n = 1;
                while self.construction.tail_bound(n, &m)? > eps {
                    n *= 2;
                    if n > self.max_terms {
                        return Err(Error::NoConvergence(format!(
                            "tail bound still above eps after {} terms",
                            self.max_terms
                        )));
                    }
                }
                n
            }
        };
        let partial = self.norm_truncated_scaled(x, big_n)?;
        let tail = self.construction.tail_bound(big_n, &m)?;
        let hi = &partial + &tail;
        Ok((Interval::new(partial, hi)?, big_n))
    }

    pub fn norm_certified<S: Sequence>(&self, x: &S, eps: &BigRational) -> Result<Interval> {
        Ok(self.norm_certified_with_terms(x, eps)?.0)
    }

    /// The truncated dual norm `min t` over `f = g + sum c_n r_n v_n`,
    /// `||g||_1 <= t`, `|c_n| <= t`, with a zero-gap norming point.
    pub fn dual_norm_truncated(&self, f: &SparseVec, big_n: usize) -> Result<DualNormCertificate> {
        let terms = self.lowered_terms(big_n)?;
        let n = terms.len();
        let a_n = if n == 0 {
            0
        } else {
            self.construction.term(n)?.a as usize
        };
        let d = f.max_index().max(a_n);
        // columns: t | g+_k, g-_k (k = 1..d) | c+_n, c-_n
        let nv = 1 + 2 * d + 2 * n;
        let g_col = |k: usize, neg: bool| 1 + 2 * (k - 1) + neg as usize;
        let c_col = |i: usize, neg: bool| 1 + 2 * d + 2 * i + neg as usize;
        let mut objective = vec![BigRational::zero(); nv];
        objective[0] = BigRational::one();
        let mut prog = LinProgram::new(Sense::Minimize, objective, vec![VarBound::NonNegative; nv]);
        let one = BigRational::one();
        let minus_one = -BigRational::one();
        for k in 1..=d {
            let mut row = vec![(g_col(k, false), one.clone()), (g_col(k, true), minus_one.clone())];
            for (i, (v, r)) in terms.iter().enumerate() {
                let vk = v.get(k);
                if !vk.is_zero() {
                    let coef = r * vk;
                    row.push((c_col(i, true), -&coef));
                    row.push((c_col(i, false), coef));
                }
            }
            prog.push_sparse(&row, Relation::Eq, f.get(k));
        }
        let mut l1 = vec![(0, minus_one.clone())];
        l1.extend((1..=d).flat_map(|k| [(g_col(k, false), one.clone()), (g_col(k, true), one.clone())]));
        prog.push_sparse(&l1, Relation::Le, BigRational::zero());
        for i in 0..n {
            prog.push_sparse(
                &[
                    (0, minus_one.clone()),
                    (c_col(i, false), one.clone()),
                    (c_col(i, true), one.clone()),
                ],
                Relation::Le,
                BigRational::zero(),
            );
        }
        let cert = lp::solve_certified(&prog)?;
        let value = cert.value.clone();
        let x_star = SparseVec::from_dense(&cert.dual[..d]);
        let g = SparseVec::from_dense(
            &(1..=d)
                .map(|k| &cert.primal[g_col(k, false)] - &cert.primal[g_col(k, true)])
                .collect::<Vec<_>>(),
        );
        let c: Vec<BigRational> = (0..n)
            .map(|i| &cert.primal[c_col(i, false)] - &cert.primal[c_col(i, true)])
            .collect();
        let out = DualNormCertificate {
            value,
            terms: n,
            x_star,
            g,
            c,
            lp: cert,
        };
        self.check_dual_certificate(f, &out)?;
        Ok(out)
    }

    /// Re-checks a dual-norm certificate from its decomposition and norming
    /// point, without looking at the LP.
    pub fn check_dual_certificate(&self, f: &SparseVec, cert: &DualNormCertificate) -> Result<()> {
        let terms = self.lowered_terms(cert.terms)?;
        if cert.c.len() != terms.len() {
            return Err(Error::Certificate("coefficient count differs from term count".into()));
        }
        let mut rebuilt = cert.g.clone();
        for ((v, r), c) in terms.iter().zip(&cert.c) {
            rebuilt = rebuilt.add(&v.scale(&(r * c)));
            if c.abs() > cert.value {
                return Err(Error::Certificate("|c_n| exceeds the claimed dual norm".into()));
            }
        }
        if &rebuilt != f {
            return Err(Error::Certificate("decomposition does not reproduce f".into()));
        }
        if cert.g.l1_norm() > cert.value {
            return Err(Error::Certificate("||g||_1 exceeds the claimed dual norm".into()));
        }
        let pairing = f.dot(&cert.x_star);
        let norm = self.norm_truncated(&cert.x_star, cert.terms)?;
        if pairing != &cert.value * &norm {
            return Err(Error::Certificate(format!(
                "norming point gives <f, x*> = {pairing}, expected {} * {norm}",
                cert.value
            )));
        }
        if !cert.value.is_zero() && norm != BigRational::one() {
            return Err(Error::Certificate(
                "norming point is not on the truncated unit sphere".into(),
            ));
        }
        Ok(())
    }

    /// Enclosure of the full dual norm of `f` of width at most `eps`, from
    /// `dual_N (1 - tail(N)) <= dual_N / (1 + tail(N)) <= |||f|||* <= dual_N`.
    pub fn dual_norm_bounds(&self, f: &SparseVec, eps: &BigRational) -> Result<Interval> {
        if !eps.is_positive() {
            return Err(Error::Precondition("eps must be positive".into()));
        }
        if f.is_zero() {
            return Ok(Interval::zero());
        }
        let eps = ScaledRational::from_rational(eps);
        let mut big_n = self.construction.term_count().map_or(1, |len| len.max(1));
        loop {
            let upper = ScaledRational::from_rational(&self.dual_norm_truncated(f, big_n)?.value);
            let tail = self.construction.tail_bound(big_n, &BigRational::one())?;
            let width = &upper * &tail;
            if width <= eps {
                let lower = &upper - &width;
                let lower = if lower.is_negative() {
                    ScaledRational::zero()
                } else {
                    lower
                };
                return Interval::new(lower, upper);
            }
            big_n *= 2;
            if big_n > self.max_terms {
                return Err(Error::NoConvergence("dual norm enclosure did not tighten".into()));
            }
        }
    }

    /// One-sided derivative of the truncated norm at `x` in direction `h`.
    pub fn directional_derivative<S: Sequence, T: Sequence>(&self, x: &S, h: &T, big_n: usize) -> Result<BigRational> {
        let m = x.sup_norm();
        if m.is_zero() {
            return Err(Error::Precondition("the norm is not differentiable at 0".into()));
        }
        let mut best: Option<BigRational> = None;
        let mut consider = |k: usize| {
            let xk = x.coord(k);
            if xk.abs() == m {
                let val = if xk.is_positive() { h.coord(k) } else { -h.coord(k) };
                if best.as_ref().is_none_or(|b| val > *b) {
                    best = Some(val);
                }
            }
        };
        for (k, _) in x.head_entries() {
            consider(k);
        }
        if x.tail().abs() == m {
            // the argmax set contains every index past the horizon; h takes
            // finitely many values there
            let upto = x.horizon().max(h.horizon()) + 1;
            for k in x.horizon() + 1..=upto {
                consider(k);
            }
        }
        let mut total = best.expect("argmax set is non-empty");
        for (v, r) in self.lowered_terms(big_n)? {
            let hv = h.dot(&v);
            let part = match sign(&x.dot(&v)) {
                0 => hv.abs(),
                s => BigRational::from_integer(BigInt::from(s)) * hv,
            };
            total += r * part;
        }
        Ok(total)
    }

    /// Searches for a kink of the truncated norm at `x`: first along the
    /// directions `v_n`, then along coordinate directions up to one past the
    /// horizon. Since every non-smooth piece is either a zero of some
    /// `<x, v_n>` or a tie in the sup-norm argmax, this search is exhaustive.
    pub fn smoothness_probe<S: Sequence>(&self, x: &S, big_n: usize) -> Result<Smoothness> {
        if x.sup_norm().is_zero() {
            return Err(Error::Precondition("the norm is not differentiable at 0".into()));
        }
        let mut candidates: Vec<SparseVec> = self.lowered_terms(big_n)?.into_iter().map(|(v, _)| v).collect();
        candidates.extend((1..=x.horizon() + 1).map(SparseVec::unit));
        for h in candidates {
            let h = h.scale(&h.sup_norm().recip());
            let gap = self.directional_derivative(x, &h, big_n)?
                + self.directional_derivative(x, &h.scale(&-BigRational::one()), big_n)?;
            if gap.is_positive() {
                return Ok(Smoothness::Kink { h, gap });
            }
        }
        Ok(Smoothness::Smooth)
    }
}
