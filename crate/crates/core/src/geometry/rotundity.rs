use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::{default_eps, require_positive, require_unit};
use crate::construction::ReadConstruction;
use crate::error::{Error, Result};
use crate::exact::{Interval, Sequence, SparseVec};
use crate::norm::PerturbedNorm;

#[derive(Clone, Debug, Serialize)]
pub struct LurRow {
    pub m: usize,
    /// The normalizer used for `y_m = (x + rho e_m) / nu_m`.
    #[serde(with = "crate::exact::serde_rational")]
    pub nu: BigRational,
    pub y_norm: Interval,
    pub sum_norm: Interval,
    pub diff_norm: Interval,
}

/// Unit vectors `y_m` with `|||x + y_m||| -> 2` that stay a fixed distance from `x`.
#[derive(Clone, Debug, Serialize)]
pub struct LurFailureReport {
    pub x: SparseVec,
    #[serde(with = "crate::exact::serde_rational")]
    pub rho: BigRational,
    pub rows: Vec<LurRow>,
}

impl LurFailureReport {
    /// `m, sum_lo, sum_hi, diff_lo, diff_hi` as CSV, decimal floats.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,sum_norm_lo,sum_norm_hi,diff_norm_lo,diff_norm_hi\n");
        for r in &self.rows {
            let (sl, sh) = r.sum_norm.to_f64_pair();
            let (dl, dh) = r.diff_norm.to_f64_pair();
            out.push_str(&format!("{},{sl},{sh},{dl},{dh}\n", r.m));
        }
        out
    }
}

fn normalized_bump(
    norm: &PerturbedNorm<'_>,
    x: &SparseVec,
    rho: &BigRational,
    m: usize,
    eps: &BigRational,
) -> Result<(SparseVec, BigRational)> {
    let raw = x.add(&SparseVec::unit(m).scale(rho));
    let nu = norm.norm_certified(&raw, eps)?.representative()?;
    Ok((raw.scale(&nu.recip()), nu))
}

fn check_bump_parameters(x: &SparseVec, rho: &BigRational, m_list: &[usize]) -> Result<()> {
    require_positive(rho, "rho")?;
    if rho > &x.sup_norm() {
        return Err(Error::Precondition(format!(
            "rho = {rho} exceeds ||x||_inf = {}",
            x.sup_norm()
        )));
    }
    if let Some(m) = m_list.iter().find(|&&m| m <= x.max_index()) {
        return Err(Error::Precondition(format!(
            "m = {m} is not beyond max supp x = {}",
            x.max_index()
        )));
    }
    Ok(())
}

/// For each `m`, `y_m = (x + rho e_m) / |||x + rho e_m|||` and enclosures of
/// `|||x + y_m|||` and `|||y_m - x|||`.
pub fn lur_failure_report(
    c: &ReadConstruction,
    x: &SparseVec,
    rho: &BigRational,
    m_list: &[usize],
    tol: &BigRational,
) -> Result<LurFailureReport> {
    let norm = PerturbedNorm::new(c);
    let eps = default_eps();
    require_unit(&norm.norm_certified(x, &eps)?, tol, "x")?;
    check_bump_parameters(x, rho, m_list)?;
    let mut rows = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let (y, nu) = normalized_bump(&norm, x, rho, m, &eps)?;
        rows.push(LurRow {
            m,
            nu,
            y_norm: norm.norm_certified(&y, &eps)?,
            sum_norm: norm.norm_certified(&x.add(&y), &eps)?,
            diff_norm: norm.norm_certified(&y.sub(x), &eps)?,
        });
    }
    Ok(LurFailureReport {
        x: x.clone(),
        rho: rho.clone(),
        rows,
    })
}

/// How the probe sequence `y_m` is generated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeFamily {
    /// `y_m = (x + rho e_m) / |||x + rho e_m|||`, converging coordinatewise to `x / |||x|||`.
    Perturbed {
        #[serde(with = "crate::exact::serde_rational")]
        rho: BigRational,
    },
    /// `y_m = y` for every `m`.
    Constant { y: SparseVec },
}

#[derive(Clone, Debug, Serialize)]
pub struct WlurRow {
    pub m: usize,
    #[serde(with = "crate::exact::serde_rational")]
    pub sup_x_plus_y: BigRational,
    #[serde(with = "crate::exact::serde_rational")]
    pub sup_y: BigRational,
    /// `||x||_inf + ||y_m||_inf - ||x + y_m||_inf`.
    #[serde(with = "crate::exact::serde_rational")]
    pub residual: BigRational,
}

#[derive(Clone, Debug, Serialize)]
pub struct EqualityResidual {
    pub n: usize,
    /// `|<x, v_n>| + |<y, v_n>| - |<x + y, v_n>|` for the coordinatewise limit `y`.
    #[serde(with = "crate::exact::serde_rational")]
    pub residual: BigRational,
}

#[derive(Clone, Debug, Serialize)]
pub struct WlurProbeReport {
    pub x: SparseVec,
    pub family: ProbeFamily,
    pub rows: Vec<WlurRow>,
    /// Values at the last probe index, standing in for the limits.
    #[serde(with = "crate::exact::serde_rational")]
    pub limit_sup_x_plus_y: BigRational,
    #[serde(with = "crate::exact::serde_rational")]
    pub limit_sup_y: BigRational,
    /// Sup-norm equality residual at the last probe index.
    #[serde(with = "crate::exact::serde_rational")]
    pub limit_residual: BigRational,
    pub limit_y: SparseVec,
    pub series_residuals: Vec<EqualityResidual>,
    /// `a` with `lim ||y_m||_inf = a ||x||_inf`.
    #[serde(with = "crate::exact::serde_rational")]
    pub a: BigRational,
}

impl WlurProbeReport {
    pub fn max_series_residual(&self) -> BigRational {
        self.series_residuals
            .iter()
            .map(|r| r.residual.clone())
            .max()
            .unwrap_or_else(BigRational::zero)
    }
}

/// Measures the two equalities forced by `|||x + y_m||| -> 2`: equality in the
/// sup-norm triangle inequality in the limit, and termwise equality
/// `|<x + y, v_n>| = |<x, v_n>| + |<y, v_n>|` for `n <= n_report`.
pub fn wlur_probe(
    c: &ReadConstruction,
    x: &SparseVec,
    family: &ProbeFamily,
    m_list: &[usize],
    n_report: usize,
) -> Result<WlurProbeReport> {
    if m_list.is_empty() {
        return Err(Error::Precondition("m_list is empty".into()));
    }
    if x.is_zero() {
        return Err(Error::Precondition("x must be non-zero".into()));
    }
    let norm = PerturbedNorm::new(c);
    let eps = default_eps();
    let (ys, limit_y) = match family {
        ProbeFamily::Perturbed { rho } => {
            check_bump_parameters(x, rho, m_list)?;
            let ys = m_list
                .iter()
                .map(|&m| normalized_bump(&norm, x, rho, m, &eps).map(|(y, _)| y))
                .collect::<Result<Vec<_>>>()?;
            let nu = norm.norm_certified(x, &eps)?.representative()?;
            (ys, x.scale(&nu.recip()))
        }
        ProbeFamily::Constant { y } => (vec![y.clone(); m_list.len()], y.clone()),
    };
    let sx = x.sup_norm();
    let rows: Vec<WlurRow> = m_list
        .iter()
        .zip(&ys)
        .map(|(&m, y)| {
            let sup_x_plus_y = x.add(y).sup_norm();
            let sup_y = y.sup_norm();
            let residual = &sx + &sup_y - &sup_x_plus_y;
            WlurRow {
                m,
                sup_x_plus_y,
                sup_y,
                residual,
            }
        })
        .collect();
    let last = rows.last().expect("non-empty");
    let series_residuals = c
        .terms(n_report)?
        .iter()
        .map(|t| {
            let a = x.dot(&t.v);
            let b = limit_y.dot(&t.v);
            EqualityResidual {
                n: t.n,
                residual: a.abs() + b.abs() - (a + b).abs(),
            }
        })
        .collect();
    Ok(WlurProbeReport {
        x: x.clone(),
        family: family.clone(),
        limit_sup_x_plus_y: last.sup_x_plus_y.clone(),
        limit_sup_y: last.sup_y.clone(),
        limit_residual: last.residual.clone(),
        a: &last.sup_y / &sx,
        rows,
        limit_y,
        series_residuals,
    })
}
