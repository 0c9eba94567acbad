use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use super::default_eps;
use crate::construction::ReadConstruction;
use crate::error::{Error, Result};
use crate::exact::{Interval, ScaledRational, Sequence, SparseVec, TailVec};
use crate::norm::PerturbedNorm;

/// `x_m = (|||x||| / |||S_m x|||) S_m x` for an eventually constant `x`.
#[derive(Clone, Debug, Serialize)]
pub struct Goldstine {
    pub m: usize,
    pub x_m: SparseVec,
    #[serde(with = "crate::exact::serde_rational")]
    pub scale: BigRational,
    pub norm_xbar: Interval,
    pub norm_xm: Interval,
    /// Leading coordinates with `x_m(k) = scale * x(k)`.
    pub agreement: usize,
    /// Leading coordinates with `x_m(k) = x(k)`.
    pub exact_agreement: usize,
}

pub fn goldstine_approximants(c: &ReadConstruction, xbar: &TailVec, m: usize) -> Result<Goldstine> {
    let norm = PerturbedNorm::new(c);
    let eps = default_eps();
    let norm_xbar = norm.norm_certified(xbar, &eps)?;
    let head = xbar.truncate(m);
    let (x_m, scale) = if head.is_zero() {
        (
            SparseVec::new(),
            if xbar.is_zero_seq() {
                BigRational::one()
            } else {
                BigRational::zero()
            },
        )
    } else {
        let num = norm_xbar.representative()?;
        let den = norm.norm_certified(&head, &eps)?.representative()?;
        let scale = num / den;
        (head.scale(&scale), scale)
    };
    let norm_xm = norm.norm_certified(&x_m, &eps)?;
    let count = |f: &dyn Fn(usize) -> bool| (1..=m).take_while(|&k| f(k)).count();
    let agreement = count(&|k| x_m.get(k) == &scale * xbar.coord(k));
    let exact_agreement = count(&|k| x_m.get(k) == xbar.coord(k));
    Ok(Goldstine {
        m,
        x_m,
        scale,
        norm_xbar,
        norm_xm,
        agreement,
        exact_agreement,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub m: usize,
    pub norm: Interval,
    #[serde(with = "crate::exact::serde_rational")]
    pub sup: BigRational,
}

/// Both sequences `|||z_m|||` and `||z_m||_inf` along a probe family, and
/// whether each settles over the second half of the grid.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceProbe {
    pub rows: Vec<ConvergenceRow>,
    pub norm_settles: bool,
    pub sup_settles: bool,
    /// Whether the two verdicts agree.
    pub equivalence_holds: bool,
}

impl ConvergenceProbe {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,norm_lo,norm_hi,sup\n");
        for r in &self.rows {
            let (lo, hi) = r.norm.to_f64_pair();
            out.push_str(&format!(
                "{},{lo},{hi},{}\n",
                r.m,
                num_traits::ToPrimitive::to_f64(&r.sup).unwrap_or(f64::NAN)
            ));
        }
        out
    }
}

/// Tabulates `z_m = S_m x` over `m_list`; with `bump = Some(beta)` the family
/// becomes `z_m = S_m x + beta e_{m+1}` for odd `m`, whose sup norms oscillate
/// when `beta > 3 ||x||_inf`. A sequence "settles" when its spread over the
/// second half of the grid is at most `tol`.
pub fn norm_convergence_probe(
    c: &ReadConstruction,
    xbar: &TailVec,
    m_list: &[usize],
    bump: Option<&BigRational>,
    tol: &BigRational,
) -> Result<ConvergenceProbe> {
    if m_list.is_empty() {
        return Err(Error::Precondition("m_list is empty".into()));
    }
    let norm = PerturbedNorm::new(c);
    let eps = default_eps();
    let mut rows = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let mut z = xbar.truncate(m);
        if let Some(beta) = bump {
            if m % 2 == 1 {
                z.set(m + 1, beta.clone());
            }
        }
        rows.push(ConvergenceRow {
            m,
            norm: norm.norm_certified(&z, &eps)?,
            sup: z.sup_norm(),
        });
    }
    let tail = &rows[rows.len() / 2..];
    let tol_s = ScaledRational::from_rational(tol);
    let hull = tail.iter().skip(1).fold(tail[0].norm.clone(), |h, r| h.hull(&r.norm));
    let norm_settles = hull.width() <= tol_s;
    let (lo, hi) = tail
        .iter()
        .fold((tail[0].sup.clone(), tail[0].sup.clone()), |(lo, hi), r| {
            (
                if r.sup < lo { r.sup.clone() } else { lo },
                if r.sup > hi { r.sup.clone() } else { hi },
            )
        });
    let sup_settles = hi - lo <= *tol;
    Ok(ConvergenceProbe {
        rows,
        norm_settles,
        sup_settles,
        equivalence_holds: norm_settles == sup_settles,
    })
}
