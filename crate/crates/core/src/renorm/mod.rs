//! The smooth renorming with unit ball `V = B_X + T(B_l2)`, where
//! `T a = sum_i a_i 2^-i x_i` for finitely many points `x_i` of `B_X`.
//!
//! `X` here is the space normed by the truncation `|||.|||_N`; for a finite
//! construction with `N >= len` this is the full norm. Its dual norm is
//! `||f||_s = |||f|||*_N + ||T* f||_2`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::construction::ReadConstruction;
use crate::error::{Error, Result};
use crate::exact::{rank, trunc_dyadic, Interval, ScaledRational, Sequence, SparseVec, DEFAULT_SQRT_BITS};
use crate::lp::{max_on_ball, solve_certified, LinProgram, Relation, Sense, VarBound};
use crate::norm::PerturbedNorm;

/// Default iteration budget for [`SmoothRenorm::s_gauge`].
pub const GAUGE_BUDGET: usize = 1000;
/// Dyadic precision of cutting-plane normals.
const CUT_BITS: u32 = 40;

#[derive(Clone, Debug)]
pub struct SmoothRenorm<'a> {
    norm: PerturbedNorm<'a>,
    terms: usize,
    points: Vec<SparseVec>,
    dim: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SDualNorm {
    /// `|||f|||*_N`.
    #[serde(with = "crate::exact::serde_rational")]
    pub base: BigRational,
    /// `||T* f||_2^2`.
    #[serde(with = "crate::exact::serde_rational")]
    pub euclid_sq: BigRational,
    pub euclid: Interval,
    pub total: Interval,
}

#[derive(Clone, Debug, Serialize)]
pub struct AdditivityCheck {
    /// `max_{B_X} f`, from the epigraph LP.
    #[serde(with = "crate::exact::serde_rational")]
    pub ball_max: BigRational,
    /// `max_{T(B_l2)} f = ||T* f||_2`.
    pub image_max: Interval,
    pub support_sum: Interval,
    pub direct: Interval,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GaugeResult {
    pub enclosure: Interval,
    pub iterations: usize,
    /// Decomposition `x = u + T a` realizing the upper end.
    pub u: SparseVec,
    #[serde(with = "crate::exact::serde_rational_vec")]
    pub a: Vec<BigRational>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NaCheck {
    pub u_star: SparseVec,
    /// Dyadic approximation of `T* f / ||T* f||_2` with `||a*||_2 <= 1`.
    #[serde(with = "crate::exact::serde_rational_vec")]
    pub a_star: Vec<BigRational>,
    /// `<f, u* + T a*>`, exact.
    #[serde(with = "crate::exact::serde_rational")]
    pub pairing: BigRational,
    pub s_norm: Interval,
    pub passed: bool,
}

fn sum_squares(v: &[BigRational]) -> BigRational {
    v.iter().map(|x| x * x).sum()
}

/// `sqrt(s)` to absolute width at most `eps`.
fn sqrt_within(s: &BigRational, eps: &BigRational) -> Result<Interval> {
    let ratio = (s + BigRational::one()) * BigRational::from_integer(2.into()) / eps;
    let mut bits = DEFAULT_SQRT_BITS.max(ratio.to_f64().map_or(64, |r| r.log2().ceil() as u32 + 2));
    let target = ScaledRational::from_rational(eps);
    loop {
        let iv = Interval::from_rational(s).sqrt_with_bits(bits)?;
        if iv.width() <= target {
            return Ok(iv);
        }
        bits += 16;
    }
}

impl<'a> SmoothRenorm<'a> {
    /// Checks that every point lies in the unit ball of `|||.|||_N`.
    pub fn new(c: &'a ReadConstruction, terms: usize, points: Vec<SparseVec>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Precondition("at least one point is required".into()));
        }
        let norm = PerturbedNorm::new(c);
        let terms = c.available(terms);
        for (i, p) in points.iter().enumerate() {
            let n = norm.norm_truncated(p, terms)?;
            if n > BigRational::one() {
                return Err(Error::Precondition(format!("point {} has norm {n} > 1", i + 1)));
            }
        }
        let a_n = if terms == 0 { 0 } else { c.term(terms)?.a as usize };
        let dim = points.iter().map(|p| p.max_index()).fold(a_n, usize::max);
        Ok(SmoothRenorm {
            norm,
            terms,
            points,
            dim,
        })
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    pub fn points(&self) -> &[SparseVec] {
        &self.points
    }

    /// Coordinates on which all computations take place.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `2^-i` for the i-th point (1-based).
    fn weight(i: usize) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::one() << i)
    }

    pub fn t_apply(&self, a: &[BigRational]) -> Result<SparseVec> {
        if a.len() != self.points.len() {
            return Err(Error::Precondition(format!(
                "coefficient vector of length {} for {} points",
                a.len(),
                self.points.len()
            )));
        }
        Ok(self
            .points
            .iter()
            .zip(a)
            .enumerate()
            .fold(SparseVec::new(), |acc, (i, (p, ai))| {
                acc.add(&p.scale(&(ai * Self::weight(i + 1))))
            }))
    }

    pub fn t_adjoint(&self, f: &SparseVec) -> Vec<BigRational> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| p.dot(f) * Self::weight(i + 1))
            .collect()
    }

    /// Rank of `T*` on functionals supported in the working coordinates.
    pub fn adjoint_rank(&self) -> usize {
        let rows: Vec<Vec<BigRational>> = self.points.iter().map(|p| p.to_dense(self.dim)).collect();
        rank(&rows)
    }

    /// `T*` is one-to-one iff the points span the working coordinates.
    pub fn adjoint_injective(&self) -> bool {
        self.adjoint_rank() == self.dim
    }

    pub fn s_dual_norm(&self, f: &SparseVec, eps: &BigRational) -> Result<SDualNorm> {
        if !eps.is_positive() {
            return Err(Error::Precondition("eps must be positive".into()));
        }
        let base = self.norm.dual_norm_truncated(f, self.terms)?.value;
        let euclid_sq = sum_squares(&self.t_adjoint(f));
        let euclid = sqrt_within(&euclid_sq, eps)?;
        let total = &Interval::from_rational(&base) + &euclid;
        Ok(SDualNorm {
            base,
            euclid_sq,
            euclid,
            total,
        })
    }

    /// The support function of `V` at `f` computed as the sum of the support
    /// functions of `B_X` (ball LP) and `T(B_l2)`, against [`Self::s_dual_norm`].
    pub fn support_additivity_check(&self, f: &SparseVec, eps: &BigRational) -> Result<AdditivityCheck> {
        let ball = max_on_ball(self.norm.construction(), f, self.terms)?;
        let b = self.t_adjoint(f);
        // <f, T a*> at a* = b / ||b||, i.e. ||b||^2 / ||b||
        let sq = sum_squares(&b);
        let image_max = if sq.is_zero() {
            Interval::zero()
        } else {
            let root = sqrt_within(&sq, eps)?;
            let lo = ScaledRational::from_rational(&sq) * root.hi().recip();
            let hi = ScaledRational::from_rational(&sq) * root.lo().recip();
            Interval::new(lo, hi)?
        };
        let support_sum = &Interval::from_rational(&ball.value) + &image_max;
        let direct = self.s_dual_norm(f, eps)?.total;
        let passed = support_sum.overlaps(&direct);
        Ok(AdditivityCheck {
            ball_max: ball.value,
            image_max,
            support_sum,
            direct,
            passed,
        })
    }

    /// Two-sided enclosure of the gauge `mu_V(x) = min { t : x = u + T a,
    /// |||u|||_N <= t, ||a||_2 <= t }`.
    ///
    /// Kelley cutting planes: the LP with `||a||_2 <= t` replaced by finitely
    /// many `<a, w> <= t`, `||w||_2 <= 1`, is a relaxation and gives the lower
    /// end; each LP solution is a decomposition and gives an upper end.
    pub fn s_gauge(&self, x: &SparseVec, tol: &BigRational, budget: usize) -> Result<GaugeResult> {
        if !tol.is_positive() {
            return Err(Error::Precondition("tol must be positive".into()));
        }
        let q = self.points.len();
        let zero_a = vec![BigRational::zero(); q];
        if x.is_zero() {
            return Ok(GaugeResult {
                enclosure: Interval::zero(),
                iterations: 0,
                u: SparseVec::new(),
                a: zero_a,
            });
        }
        let lowered = self.norm.lowered_terms(self.terms)?;
        let d = self.dim.max(x.max_index());
        let mut best_upper = self.norm.norm_truncated(x, self.terms)?;
        let mut best = (x.clone(), zero_a);
        let mut lower = BigRational::zero();
        let unit = |i: usize| {
            (0..q)
                .map(|j| {
                    if i == j {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        };
        let mut cuts: Vec<Vec<BigRational>> = Vec::new();
        for i in 0..q {
            let e: Vec<BigRational> = unit(i);
            cuts.push(e.iter().map(|v| -v).collect());
            cuts.push(e);
        }
        // columns: u_1..u_d (free) | a_1..a_q (free) | t | tau | s_1..s_n
        let n = lowered.len();
        let (a0, t, tau, s0) = (d, d + q, d + q + 1, d + q + 2);
        let nv = s0 + n;
        for iter in 1..=budget {
            let mut objective = vec![BigRational::zero(); nv];
            objective[t] = BigRational::one();
            let mut vars = vec![VarBound::Free; d + q];
            vars.extend(vec![VarBound::NonNegative; 2 + n]);
            let mut prog = LinProgram::new(Sense::Minimize, objective, vars);
            let one = BigRational::one;
            for k in 1..=d {
                let mut row = vec![(k - 1, one())];
                for (i, p) in self.points.iter().enumerate() {
                    let pk = p.get(k);
                    if !pk.is_zero() {
                        row.push((a0 + i, pk * Self::weight(i + 1)));
                    }
                }
                prog.push_sparse(&row, Relation::Eq, x.get(k));
            }
            let mut budget_row = vec![(tau, one()), (t, -one())];
            budget_row.extend(lowered.iter().enumerate().map(|(i, (_, r))| (s0 + i, r.clone())));
            prog.push_sparse(&budget_row, Relation::Le, BigRational::zero());
            for k in 0..d {
                prog.push_sparse(&[(k, one()), (tau, -one())], Relation::Le, BigRational::zero());
                prog.push_sparse(&[(k, -one()), (tau, -one())], Relation::Le, BigRational::zero());
            }
            for (i, (v, _)) in lowered.iter().enumerate() {
                let plus: Vec<_> = v
                    .iter()
                    .map(|(k, vk)| (k - 1, vk.clone()))
                    .chain([(s0 + i, -one())])
                    .collect();
                let minus: Vec<_> = v.iter().map(|(k, vk)| (k - 1, -vk)).chain([(s0 + i, -one())]).collect();
                prog.push_sparse(&plus, Relation::Le, BigRational::zero());
                prog.push_sparse(&minus, Relation::Le, BigRational::zero());
            }
            for w in &cuts {
                let row: Vec<_> = w
                    .iter()
                    .enumerate()
                    .map(|(i, wi)| (a0 + i, wi.clone()))
                    .chain([(t, -one())])
                    .collect();
                prog.push_sparse(&row, Relation::Le, BigRational::zero());
            }
            let cert = solve_certified(&prog)?;
            if cert.value > lower {
                lower = cert.value.clone();
            }
            let u = SparseVec::from_dense(&cert.primal[..d]);
            let a = cert.primal[a0..a0 + q].to_vec();
            let a_sq = sum_squares(&a);
            let root = Interval::from_rational(&a_sq).sqrt()?;
            let a_hi = root.hi().to_rational()?;
            let u_norm = self.norm.norm_truncated(&u, self.terms)?;
            let candidate = if u_norm > a_hi { u_norm } else { a_hi.clone() };
            if candidate < best_upper {
                best_upper = candidate;
                best = (u, a.clone());
            }
            if &best_upper - &lower <= *tol {
                let enclosure = Interval::new(
                    ScaledRational::from_rational(&lower),
                    ScaledRational::from_rational(&best_upper),
                )?;
                return Ok(GaugeResult {
                    enclosure,
                    iterations: iter,
                    u: best.0,
                    a: best.1,
                });
            }
            if a_sq.is_zero() {
                return Err(Error::NoConvergence("cutting planes stalled at a = 0".into()));
            }
            cuts.push(a.iter().map(|ai| trunc_dyadic(&(ai / &a_hi), CUT_BITS)).collect());
        }
        Err(Error::NoConvergence(format!(
            "gauge enclosure [{lower}, {best_upper}] wider than {tol} after {budget} iterations"
        )))
    }

    /// Confirms `x = u + T a` with `|||u|||_N <= 1` and `||a||_2 <= 1`.
    pub fn is_member(&self, x: &SparseVec, u: &SparseVec, a: &[BigRational]) -> Result<bool> {
        Ok(u.add(&self.t_apply(a)?) == *x
            && self.norm.norm_truncated(u, self.terms)? <= BigRational::one()
            && sum_squares(a) <= BigRational::one())
    }

    /// Enclosure of `||f||_s + ||g||_s - ||f + g||_s`.
    pub fn s_strict_convexity_probe(&self, f: &SparseVec, g: &SparseVec, eps: &BigRational) -> Result<Interval> {
        if f == g {
            return Err(Error::Precondition("f and g must differ".into()));
        }
        if !self.adjoint_injective() {
            return Err(Error::Precondition(format!(
                "T* has rank {} on {} coordinates; probe inconclusive",
                self.adjoint_rank(),
                self.dim
            )));
        }
        let third = eps / BigRational::from_integer(3.into());
        let sf = self.s_dual_norm(f, &third)?.total;
        let sg = self.s_dual_norm(g, &third)?.total;
        let sfg = self.s_dual_norm(&f.add(g), &third)?.total;
        Ok(&(&sf + &sg) - &sfg)
    }

    /// Builds the maximizer `u* + T a*` of `f` on `V` from the maximizers on
    /// the two summands and checks that it attains `||f||_s` up to `eps`.
    pub fn na_preservation_check(&self, f: &SparseVec, eps: &BigRational) -> Result<NaCheck> {
        let ball = max_on_ball(self.norm.construction(), f, self.terms)?;
        let b = self.t_adjoint(f);
        let sq = sum_squares(&b);
        let a_star: Vec<BigRational> = if sq.is_zero() {
            vec![BigRational::zero(); b.len()]
        } else {
            let root_hi = Interval::from_rational(&sq)
                .sqrt_with_bits(DEFAULT_SQRT_BITS + 16)?
                .hi()
                .to_rational()?;
            let bits = DEFAULT_SQRT_BITS + 16;
            b.iter().map(|bi| trunc_dyadic(&(bi / &root_hi), bits)).collect()
        };
        if sum_squares(&a_star) > BigRational::one() {
            return Err(Error::Certificate("a* left the Euclidean ball".into()));
        }
        let point = ball.x_star.add(&self.t_apply(&a_star)?);
        let pairing = f.dot(&point);
        let s_norm = self.s_dual_norm(f, eps)?.total;
        let p = ScaledRational::from_rational(&pairing);
        let slack = ScaledRational::from_rational(eps);
        let passed = &p <= s_norm.hi() && &(&p + &slack) >= s_norm.lo();
        Ok(NaCheck {
            u_star: ball.x_star,
            a_star,
            pairing,
            s_norm,
            passed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::tests::toy1;
    use crate::exact::{int, rat};

    fn toy_points() -> Vec<SparseVec> {
        vec![
            SparseVec::from_entries([(1, int(1)), (2, int(1))]).unwrap(),
            SparseVec::from_entries([(1, rat(8, 9)), (2, rat(-8, 9))]).unwrap(),
        ]
    }

    #[test]
    fn operator_and_adjoint() {
        let c = toy1();
        let s = SmoothRenorm::new(&c, 1, toy_points()).unwrap();
        assert_eq!(s.t_apply(&[int(1), int(0)]).unwrap(), toy_points()[0].scale(&rat(1, 2)));
        assert!(s.t_apply(&[int(0), int(0)]).unwrap().is_zero());
        assert_eq!(
            s.t_apply(&[int(1), int(1)]).unwrap(),
            SparseVec::from_entries([(1, rat(13, 18)), (2, rat(5, 18))]).unwrap()
        );
        assert!(s.t_apply(&[int(1)]).is_err());
        assert_eq!(s.t_adjoint(&SparseVec::unit(1)), vec![rat(1, 2), rat(2, 9)]);
        assert_eq!(s.t_adjoint(&SparseVec::new()), vec![int(0), int(0)]);
        assert_eq!(s.adjoint_rank(), 2);
        assert!(s.adjoint_injective());
        let too_big = vec![SparseVec::unit(1).scale(&int(2))];
        assert!(SmoothRenorm::new(&c, 1, too_big).is_err());
    }

    #[test]
    fn toy1_dual_value() {
        let c = toy1();
        let s = SmoothRenorm::new(&c, 1, toy_points()).unwrap();
        let eps = rat(1, 1_000_000_000_000);
        let d = s.s_dual_norm(&SparseVec::unit(1), &eps).unwrap();
        assert_eq!(d.base, int(1));
        assert_eq!(d.euclid_sq, rat(97, 324));
        let expected = 1.0 + 97f64.sqrt() / 18.0;
        let (lo, hi) = d.total.to_f64_pair();
        assert!(lo <= expected + 1e-15 && hi >= expected - 1e-15 && hi - lo < 1e-11);
        let z = s.s_dual_norm(&SparseVec::new(), &eps).unwrap();
        assert_eq!(z.total, Interval::zero());
        let check = s.support_additivity_check(&SparseVec::unit(1), &eps).unwrap();
        assert!(check.passed);
        let na = s.na_preservation_check(&SparseVec::unit(1), &eps).unwrap();
        assert!(na.passed);
        assert_eq!(na.u_star, toy_points()[0]);
    }

    #[test]
    fn gauge_basics() {
        let c = toy1();
        let s = SmoothRenorm::new(&c, 1, toy_points()).unwrap();
        let tol = rat(1, 1_000_000);
        assert_eq!(
            s.s_gauge(&SparseVec::new(), &tol, 10).unwrap().enclosure,
            Interval::zero()
        );
        let g = s.s_gauge(&toy_points()[0], &tol, GAUGE_BUDGET).unwrap();
        assert!(g.enclosure.hi() <= &ScaledRational::one());
        assert!(g.enclosure.width() <= ScaledRational::from_rational(&tol));
    }

    #[test]
    fn strict_convexity_probe_cases() {
        let c = toy1();
        let s = SmoothRenorm::new(&c, 1, toy_points()).unwrap();
        let eps = rat(1, 1_000_000);
        let f = SparseVec::unit(1);
        let g = SparseVec::unit(2);
        assert!(s.s_strict_convexity_probe(&f, &g, &eps).unwrap().lo().is_positive());
        let twice = s.s_strict_convexity_probe(&f, &f.scale(&int(2)), &eps).unwrap();
        assert!(twice.contains(&ScaledRational::zero()));
        assert!(s.s_strict_convexity_probe(&f, &f, &eps).is_err());
        let thin = SmoothRenorm::new(&c, 1, vec![toy_points()[0].clone()]).unwrap();
        assert!(thin.s_strict_convexity_probe(&f, &g, &eps).is_err());
        // T* f = 0 branch
        let na = thin.na_preservation_check(&toy_points()[1], &eps).unwrap();
        assert!(na.a_star.iter().all(|a| a.is_zero()));
        assert!(na.passed);
    }
}
