//! Exact rational linear programming with checkable certificates.
//!
//! Every optimal solve returns a primal point, dual multipliers and the common
//! objective value; infeasible programs return a Farkas combination and
//! unbounded ones a feasible point plus an improving ray. [`verify`] re-checks
//! any of these by substitution, independently of the solver.

mod ball;
mod simplex;

pub use ball::{
    annihilator_distance, best_approximation, check_best_approximation, max_on_ball, quotient_norm, BallMaximizer,
    BestApproximation,
};

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[serde(alias = "min")]
    Minimize,
    #[serde(alias = "max")]
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarBound {
    /// `x_j >= 0`
    #[serde(alias = "nonneg")]
    NonNegative,
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    #[serde(with = "crate::exact::serde_rational_vec")]
    pub row: Vec<BigRational>,
    pub relation: Relation,
    #[serde(with = "crate::exact::serde_rational")]
    pub rhs: BigRational,
}

/// `sense c.x` subject to dense rational rows and per-variable sign bounds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinProgram {
    pub sense: Sense,
    #[serde(with = "crate::exact::serde_rational_vec")]
    pub objective: Vec<BigRational>,
    pub vars: Vec<VarBound>,
    pub constraints: Vec<Constraint>,
}

/// Optimality certificate.
///
/// Dual sign convention, per row: for a minimization `<=` rows carry `y <= 0`
/// and `>=` rows `y >= 0`; for a maximization the signs flip. Columns satisfy
/// `(A^T y)_j <= c_j` (min) or `>= c_j` (max) for non-negative variables and
/// equality for free ones, and `b.y = c.x`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpCertificate {
    #[serde(with = "crate::exact::serde_rational_vec")]
    pub primal: Vec<BigRational>,
    #[serde(with = "crate::exact::serde_rational_vec")]
    pub dual: Vec<BigRational>,
    #[serde(with = "crate::exact::serde_rational")]
    pub value: BigRational,
}

/// Non-negative multipliers on the rows written in `<=` orientation (`>=` rows
/// negated, `=` rows unrestricted) whose combination reads `0 <= -1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FarkasWitness {
    #[serde(with = "crate::exact::serde_rational_vec")]
    pub multipliers: Vec<BigRational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnboundedWitness {
    #[serde(with = "crate::exact::serde_rational_vec")]
    pub point: Vec<BigRational>,
    #[serde(with = "crate::exact::serde_rational_vec")]
    pub ray: Vec<BigRational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum LpOutcome {
    Optimal(LpCertificate),
    Unbounded(UnboundedWitness),
    Infeasible(FarkasWitness),
}

impl LpOutcome {
    pub fn optimal(self) -> Result<LpCertificate> {
        match self {
            LpOutcome::Optimal(c) => Ok(c),
            LpOutcome::Unbounded(_) => Err(Error::Unbounded),
            LpOutcome::Infeasible(_) => Err(Error::Infeasible),
        }
    }
}

impl LinProgram {
    pub fn new(sense: Sense, objective: Vec<BigRational>, vars: Vec<VarBound>) -> Self {
        assert_eq!(objective.len(), vars.len());
        LinProgram {
            sense,
            objective,
            vars,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn push(&mut self, row: Vec<BigRational>, relation: Relation, rhs: BigRational) {
        assert_eq!(row.len(), self.num_vars(), "row width must match the variable count");
        self.constraints.push(Constraint { row, relation, rhs });
    }

    /// Sparse convenience form of [`LinProgram::push`].
    pub fn push_sparse(&mut self, coeffs: &[(usize, BigRational)], relation: Relation, rhs: BigRational) {
        let mut row = vec![BigRational::zero(); self.num_vars()];
        for (j, c) in coeffs {
            row[*j] += c;
        }
        self.push(row, relation, rhs);
    }

    fn validate_shape(&self) -> Result<()> {
        if self.objective.len() != self.vars.len() {
            return Err(Error::Parse("objective and vars differ in length".into()));
        }
        if let Some(c) = self.constraints.iter().find(|c| c.row.len() != self.vars.len()) {
            return Err(Error::Parse(format!(
                "constraint row of width {} for {} variables",
                c.row.len(),
                self.vars.len()
            )));
        }
        Ok(())
    }
}

fn dot(a: &[BigRational], b: &[BigRational]) -> BigRational {
    a.iter()
        .zip(b)
        .filter(|(x, y)| !x.is_zero() && !y.is_zero())
        .map(|(x, y)| x * y)
        .sum()
}

/// Exact two-phase simplex with Bland's rule.
pub fn solve_lp(lp: &LinProgram) -> Result<LpOutcome> {
    lp.validate_shape()?;
    Ok(simplex::solve(lp))
}

/// Solves and insists on an optimum whose certificate passes [`verify`].
pub fn solve_certified(lp: &LinProgram) -> Result<LpCertificate> {
    let outcome = solve_lp(lp)?;
    verify(lp, &outcome)?;
    outcome.optimal()
}

fn primal_feasible(lp: &LinProgram, x: &[BigRational]) -> std::result::Result<(), String> {
    if x.len() != lp.num_vars() {
        return Err("primal point has the wrong length".into());
    }
    for (j, (xj, b)) in x.iter().zip(&lp.vars).enumerate() {
        if *b == VarBound::NonNegative && xj.is_negative() {
            return Err(format!("x_{j} = {xj} < 0"));
        }
    }
    for (i, c) in lp.constraints.iter().enumerate() {
        let lhs = dot(&c.row, x);
        let ok = match c.relation {
            Relation::Le => lhs <= c.rhs,
            Relation::Ge => lhs >= c.rhs,
            Relation::Eq => lhs == c.rhs,
        };
        if !ok {
            return Err(format!("row {i} violated: {lhs} vs {}", c.rhs));
        }
    }
    Ok(())
}

/// `A^T y`.
fn transpose_apply(lp: &LinProgram, y: &[BigRational]) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); lp.num_vars()];
    for (c, yi) in lp.constraints.iter().zip(y) {
        if yi.is_zero() {
            continue;
        }
        for (o, a) in out.iter_mut().zip(&c.row) {
            if !a.is_zero() {
                *o += a * yi;
            }
        }
    }
    out
}

/// Re-checks an outcome by exact substitution.
pub fn verify(lp: &LinProgram, outcome: &LpOutcome) -> Result<()> {
    verify_inner(lp, outcome).map_err(Error::Certificate)
}

fn verify_inner(lp: &LinProgram, outcome: &LpOutcome) -> std::result::Result<(), String> {
    let m = lp.constraints.len();
    match outcome {
        LpOutcome::Optimal(cert) => {
            primal_feasible(lp, &cert.primal)?;
            if cert.dual.len() != m {
                return Err("dual vector has the wrong length".into());
            }
            // orient everything as a minimization
            let flip = lp.sense == Sense::Maximize;
            for (i, (c, y)) in lp.constraints.iter().zip(&cert.dual).enumerate() {
                let y = if flip { -y } else { y.clone() };
                let ok = match c.relation {
                    Relation::Le => !y.is_positive(),
                    Relation::Ge => !y.is_negative(),
                    Relation::Eq => true,
                };
                if !ok {
                    return Err(format!("dual multiplier {i} has the wrong sign"));
                }
            }
            let aty = transpose_apply(lp, &cert.dual);
            for (j, ((a, c), b)) in aty.iter().zip(&lp.objective).zip(&lp.vars).enumerate() {
                let (a, c) = if flip { (-a, -c) } else { (a.clone(), c.clone()) };
                let ok = match b {
                    VarBound::NonNegative => a <= c,
                    VarBound::Free => a == c,
                };
                if !ok {
                    return Err(format!("dual constraint for column {j} violated"));
                }
            }
            let primal_value = dot(&lp.objective, &cert.primal);
            let rhs: Vec<BigRational> = lp.constraints.iter().map(|c| c.rhs.clone()).collect();
            let dual_value = dot(&rhs, &cert.dual);
            if primal_value != cert.value || dual_value != cert.value {
                return Err(format!(
                    "duality gap: primal {primal_value}, dual {dual_value}, claimed {}",
                    cert.value
                ));
            }
            Ok(())
        }
        LpOutcome::Infeasible(w) => {
            if w.multipliers.len() != m {
                return Err("Farkas vector has the wrong length".into());
            }
            let mut y = Vec::with_capacity(m);
            for (c, l) in lp.constraints.iter().zip(&w.multipliers) {
                match c.relation {
                    Relation::Le => y.push(l.clone()),
                    Relation::Ge => y.push(-l),
                    Relation::Eq => y.push(l.clone()),
                }
                if c.relation != Relation::Eq && l.is_negative() {
                    return Err("negative Farkas multiplier on an inequality".into());
                }
            }
            let aty = transpose_apply(lp, &y);
            for (j, (a, b)) in aty.iter().zip(&lp.vars).enumerate() {
                let ok = match b {
                    VarBound::NonNegative => !a.is_negative(),
                    VarBound::Free => a.is_zero(),
                };
                if !ok {
                    return Err(format!("Farkas combination fails on column {j}"));
                }
            }
            let rhs: Vec<BigRational> = lp.constraints.iter().map(|c| c.rhs.clone()).collect();
            if !dot(&rhs, &y).is_negative() {
                return Err("Farkas combination does not produce a contradiction".into());
            }
            Ok(())
        }
        LpOutcome::Unbounded(w) => {
            primal_feasible(lp, &w.point)?;
            if w.ray.len() != lp.num_vars() {
                return Err("ray has the wrong length".into());
            }
            for (j, (d, b)) in w.ray.iter().zip(&lp.vars).enumerate() {
                if *b == VarBound::NonNegative && d.is_negative() {
                    return Err(format!("ray leaves x_{j} >= 0"));
                }
            }
            for (i, c) in lp.constraints.iter().enumerate() {
                let ad = dot(&c.row, &w.ray);
                let ok = match c.relation {
                    Relation::Le => !ad.is_positive(),
                    Relation::Ge => !ad.is_negative(),
                    Relation::Eq => ad.is_zero(),
                };
                if !ok {
                    return Err(format!("ray leaves row {i}"));
                }
            }
            let gain = dot(&lp.objective, &w.ray);
            let improving = match lp.sense {
                Sense::Minimize => gain.is_negative(),
                Sense::Maximize => gain.is_positive(),
            };
            if !improving {
                return Err("ray does not improve the objective".into());
            }
            Ok(())
        }
    }
}
