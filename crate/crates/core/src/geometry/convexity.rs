use num_rational::BigRational;
use num_traits::Signed;
use serde::Serialize;

use super::require_unit;
use crate::construction::ReadConstruction;
use crate::error::{Error, Result};
use crate::exact::{Interval, ScaledRational, Sequence, TailVec};
use crate::norm::PerturbedNorm;

/// A separating index `k` for two unit vectors of the bidual ball.
///
/// Since `|<x + y, v_k>| = |<x, v_k>| + |<y, v_k>| - 2 min(|<x, v_k>|, |<y, v_k>|)`
/// when the two pairings have opposite signs, `2 - |||x + y|||` is at least
/// `gap_lower - slack`, where `slack` absorbs how far `|||x||| + |||y|||` may
/// exceed 2.
#[derive(Clone, Debug, Serialize)]
pub struct StrictConvexityCert {
    pub k: usize,
    #[serde(with = "crate::exact::serde_rational")]
    pub x_dot: BigRational,
    #[serde(with = "crate::exact::serde_rational")]
    pub y_dot: BigRational,
    /// `2 r_k min(|<x, v_k>|, |<y, v_k>|)`.
    pub gap_lower: ScaledRational,
    pub slack: ScaledRational,
    /// Direct enclosure of `2 - |||x + y|||`.
    pub defect: Interval,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum StrictConvexityOutcome {
    Certified(StrictConvexityCert),
    NotFound { search_depth: usize },
}

/// Enclosure of `2 - |||x + y|||` of width at most `eps`.
pub fn midpoint_gap(c: &ReadConstruction, x: &TailVec, y: &TailVec, eps: &BigRational) -> Result<Interval> {
    let s = PerturbedNorm::new(c).norm_certified(&x.add(y), eps)?;
    let two = ScaledRational::from_integer(2);
    Interval::new(&two - s.hi(), &two - s.lo())
}

/// Scans `v_1, ..., v_depth` in listing order for the first direction on
/// which `x` and `y` pair with opposite signs.
pub fn strict_convexity_certificate(
    c: &ReadConstruction,
    x: &TailVec,
    y: &TailVec,
    search_depth: usize,
    tol: &BigRational,
) -> Result<StrictConvexityOutcome> {
    if x == y {
        return Err(Error::Precondition("x and y must be distinct".into()));
    }
    let norm = PerturbedNorm::new(c);
    let eps = super::default_eps();
    let nx = norm.norm_certified(x, &eps)?;
    let ny = norm.norm_certified(y, &eps)?;
    require_unit(&nx, tol, "x")?;
    require_unit(&ny, tol, "y")?;
    for t in c.terms(search_depth)? {
        let a = x.dot(&t.v);
        let b = y.dot(&t.v);
        if (&a * &b).is_negative() {
            let m = if a.abs() < b.abs() { a.abs() } else { b.abs() };
            let gap_lower = t.r.mul_rational(&(m * BigRational::from_integer(2.into())));
            let excess = &(nx.hi() + ny.hi()) - &ScaledRational::from_integer(2);
            let slack = if excess.is_positive() {
                excess
            } else {
                ScaledRational::zero()
            };
            let defect = midpoint_gap(c, x, y, &eps)?;
            if defect.lo() < &(&gap_lower - &slack) {
                return Err(Error::Certificate(format!(
                    "direct defect {:e} contradicts the gap bound {:e} at k = {}",
                    defect.lo().to_f64(),
                    gap_lower.to_f64(),
                    t.n
                )));
            }
            return Ok(StrictConvexityOutcome::Certified(StrictConvexityCert {
                k: t.n,
                x_dot: a,
                y_dot: b,
                gap_lower,
                slack,
                defect,
            }));
        }
    }
    Ok(StrictConvexityOutcome::NotFound { search_depth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::tests::toy1;
    use crate::exact::{int, rat, SparseVec};

    fn tv(vals: &[(usize, BigRational)]) -> TailVec {
        SparseVec::from_entries(vals.iter().cloned()).unwrap().into()
    }

    #[test]
    fn toy1_pair() {
        let c = toy1();
        let s = rat(32, 35);
        let x = tv(&[(1, s.clone()), (2, &s * rat(-1, 2))]);
        let y = tv(&[(1, &s * rat(-1, 2)), (2, s.clone())]);
        let out = strict_convexity_certificate(&c, &x, &y, 1, &rat(1, 1000)).unwrap();
        let StrictConvexityOutcome::Certified(cert) = out else {
            panic!("expected a certificate")
        };
        assert_eq!(cert.k, 1);
        assert_eq!(cert.gap_lower.to_rational().unwrap(), rat(6, 35));
        assert!(cert.slack.is_zero());
        assert_eq!(cert.defect, Interval::from_rational(&rat(54, 35)));
        assert_eq!(
            midpoint_gap(&c, &x, &x, &rat(1, 100))
                .unwrap()
                .lo()
                .to_rational()
                .unwrap(),
            int(0)
        );
    }

    #[test]
    fn toy1_unseparated_pair() {
        let c = toy1();
        let x = tv(&[(1, int(1)), (2, int(1))]);
        let raw = SparseVec::from_entries([(1, int(1)), (2, rat(9, 10))]).unwrap();
        let n = PerturbedNorm::new(&c).norm_truncated(&raw, 1).unwrap();
        let y: TailVec = raw.scale(&n.recip()).into();
        let out = strict_convexity_certificate(&c, &x, &y, 1, &rat(1, 1000)).unwrap();
        assert!(matches!(out, StrictConvexityOutcome::NotFound { search_depth: 1 }));
        assert!(strict_convexity_certificate(&c, &x, &x, 1, &rat(1, 1000)).is_err());
        // antipodal pair: defect is the full 2
        let gap = midpoint_gap(&c, &x, &x.scale(&int(-1)), &rat(1, 100)).unwrap();
        assert_eq!(gap, Interval::from_rational(&int(2)));
    }
}
