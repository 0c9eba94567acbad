use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::Serialize;

use super::{require_positive, require_unit};
use crate::construction::ReadConstruction;
use crate::error::{Error, Result};
use crate::exact::{Interval, ScaledRational, Sequence, SparseVec, TailVec};
use crate::lp::max_on_ball;
use crate::norm::PerturbedNorm;

/// Two points `x0 +- rho e_N` of the slice `{x in B : f(x) > 1 - 3 lambda delta}`
/// at sup-distance `2 rho`, `rho = 1/3 - lambda delta`.
#[derive(Clone, Debug, Serialize)]
pub struct RoughnessWitness {
    pub f: SparseVec,
    #[serde(with = "crate::exact::serde_rational")]
    pub lambda: BigRational,
    #[serde(with = "crate::exact::serde_rational")]
    pub delta: BigRational,
    #[serde(with = "crate::exact::serde_rational")]
    pub rho: BigRational,
    /// Truncation used for the norming point.
    pub terms: usize,
    pub x0: SparseVec,
    pub index: usize,
    pub p_plus: SparseVec,
    pub p_minus: SparseVec,
    pub norm_plus: Interval,
    pub norm_minus: Interval,
    #[serde(with = "crate::exact::serde_rational")]
    pub f_plus: BigRational,
    #[serde(with = "crate::exact::serde_rational")]
    pub f_minus: BigRational,
    /// `1 - 3 lambda delta`.
    #[serde(with = "crate::exact::serde_rational")]
    pub slice_level: BigRational,
    #[serde(with = "crate::exact::serde_rational")]
    pub separation: BigRational,
}

fn check_parameters(lambda: &BigRational, delta: &BigRational) -> Result<BigRational> {
    let one = BigRational::one();
    require_positive(lambda, "lambda")?;
    require_positive(delta, "delta")?;
    if lambda >= &one || delta >= &one {
        return Err(Error::Precondition("lambda and delta must lie in (0, 1)".into()));
    }
    let ld = lambda * delta;
    if ld >= BigRational::new(1.into(), 3.into()) {
        return Err(Error::Precondition(format!("lambda * delta = {ld} must be below 1/3")));
    }
    Ok(ld)
}

/// Builds the slice pair from the proof of 2/3-roughness.
///
/// `x0 = (1 - 3 lambda delta / 2) z` for an exact maximizer `z` of `f` over the
/// ball truncated at the first `T` with `tail(T) <= lambda delta / 4`; then
/// `N` runs from just past the supports of `x0` and `f` up to `depth`, and the
/// first `N` for which both perturbed points are certified inside the ball is
/// returned. `f(e_N) = 0` there, so `f(p+-) = f(x0)`.
pub fn roughness_witness(
    c: &ReadConstruction,
    f: &SparseVec,
    lambda: &BigRational,
    delta: &BigRational,
    depth: usize,
    tol: &BigRational,
) -> Result<RoughnessWitness> {
    let ld = check_parameters(lambda, delta)?;
    let norm = PerturbedNorm::new(c);
    require_unit(&norm.dual_norm_bounds(f, tol)?, tol, "f")?;

    let quarter = &ld / BigRational::from_integer(4.into());
    let quarter_s = ScaledRational::from_rational(&quarter);
    let terms = match c.term_count() {
        Some(len) => len,
        None => {
            let mut t = 1;
            while c.tail_bound(t, &BigRational::one())? > quarter_s {
                t += 1;
            }
            t
        }
    };
    let z = max_on_ball(c, f, terms)?.x_star;
    let three_halves = BigRational::new(3.into(), 2.into());
    let x0 = z.scale(&(BigRational::one() - &three_halves * &ld));
    let rho = BigRational::new(1.into(), 3.into()) - &ld;
    let level = BigRational::one() - BigRational::from_integer(3.into()) * &ld;
    let eps = &quarter / BigRational::from_integer(8.into());
    let start = x0.max_index().max(f.max_index()) + 1;
    let one = ScaledRational::one();
    for n in start..=depth.max(start - 1) {
        let bump = SparseVec::unit(n).scale(&rho);
        let p_plus = x0.add(&bump);
        let p_minus = x0.sub(&bump);
        let norm_plus = norm.norm_certified(&p_plus, &eps)?;
        let norm_minus = norm.norm_certified(&p_minus, &eps)?;
        let f_plus = f.dot(&p_plus);
        let f_minus = f.dot(&p_minus);
        if norm_plus.hi() <= &one && norm_minus.hi() <= &one && f_plus > level && f_minus > level {
            let w = RoughnessWitness {
                f: f.clone(),
                lambda: lambda.clone(),
                delta: delta.clone(),
                separation: &rho * BigRational::from_integer(2.into()),
                rho,
                terms,
                x0,
                index: n,
                p_plus,
                p_minus,
                norm_plus,
                norm_minus,
                f_plus,
                f_minus,
                slice_level: level,
            };
            verify_roughness_witness(c, &w)?;
            return Ok(w);
        }
    }
    Err(Error::DepthExhausted(format!(
        "no index N in {start}..={depth} puts both x0 +- rho e_N inside the ball"
    )))
}

/// Re-derives every inequality of a witness from its points alone.
pub fn verify_roughness_witness(c: &ReadConstruction, w: &RoughnessWitness) -> Result<()> {
    let fail = |m: String| Err(Error::Certificate(m));
    let ld = check_parameters(&w.lambda, &w.delta)?;
    let rho = BigRational::new(1.into(), 3.into()) - &ld;
    if rho != w.rho {
        return fail(format!("rho = {} but 1/3 - lambda delta = {rho}", w.rho));
    }
    let bump = SparseVec::unit(w.index).scale(&rho);
    if w.p_plus != w.x0.add(&bump) || w.p_minus != w.x0.sub(&bump) {
        return fail("points are not x0 +- rho e_N".into());
    }
    let level = BigRational::one() - BigRational::from_integer(3.into()) * &ld;
    let norm = PerturbedNorm::new(c);
    let eps = BigRational::new(1.into(), (1u64 << 50).into());
    for (name, p) in [("p+", &w.p_plus), ("p-", &w.p_minus)] {
        let iv = norm.norm_certified(p, &eps)?;
        if iv.hi() > &ScaledRational::one() {
            return fail(format!("|||{name}||| may exceed 1: upper end {:e}", iv.hi().to_f64()));
        }
        if w.f.dot(p) <= level {
            return fail(format!("f({name}) = {} is not above {level}", w.f.dot(p)));
        }
    }
    let sep = w.p_plus.sub(&w.p_minus).sup_norm();
    if sep != w.separation || sep != &rho * BigRational::from_integer(2.into()) {
        return fail(format!("separation {sep} differs from 2 rho"));
    }
    Ok(())
}

/// `2 rho`, a lower bound for the diameter of the slice
/// `{x in B : f(x) > 1 - 3 lambda delta}`, backed by a generated witness.
pub fn slice_diameter_lower(
    c: &ReadConstruction,
    f: &SparseVec,
    lambda: &BigRational,
    delta: &BigRational,
    depth: usize,
    tol: &BigRational,
) -> Result<BigRational> {
    Ok(roughness_witness(c, f, lambda, delta, depth, tol)?.separation)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConormCheck {
    #[serde(with = "crate::exact::serde_rational")]
    pub lhs: BigRational,
    #[serde(with = "crate::exact::serde_rational")]
    pub rhs: BigRational,
    pub passed: bool,
}

/// `||u + rho e_m||_inf = max(||u||_inf, rho)` for `m` past the support of `u`.
pub fn conorm_check(u: &SparseVec, rho: &BigRational, m: usize) -> Result<ConormCheck> {
    if m <= u.max_index() {
        return Err(Error::Precondition(format!(
            "m = {m} is not beyond max supp u = {}",
            u.max_index()
        )));
    }
    if rho.is_negative() {
        return Err(Error::Precondition("rho must be non-negative".into()));
    }
    let lhs = TailVec::from(u.add(&SparseVec::unit(m).scale(rho))).sup_norm();
    let un = u.sup_norm();
    let rhs = if &un > rho { un } else { rho.clone() };
    Ok(ConormCheck {
        passed: lhs == rhs,
        lhs,
        rhs,
    })
}
