//! Witness generators and certified checks for the geometry of the perturbed norm:
//! strict convexity of the bidual ball, 2/3-rough slices, failure of LUR,
//! the WLUR equalities and Goldstine approximants of bidual elements.

mod bidual;
mod convexity;
mod rotundity;
mod roughness;

pub use bidual::{goldstine_approximants, norm_convergence_probe, ConvergenceProbe, ConvergenceRow, Goldstine};
pub use convexity::{midpoint_gap, strict_convexity_certificate, StrictConvexityCert, StrictConvexityOutcome};
pub use rotundity::{
    lur_failure_report, wlur_probe, EqualityResidual, LurFailureReport, LurRow, ProbeFamily, WlurProbeReport, WlurRow,
};
pub use roughness::{
    conorm_check, roughness_witness, slice_diameter_lower, verify_roughness_witness, ConormCheck, RoughnessWitness,
};

use num_rational::BigRational;
use num_traits::Signed;

use crate::error::{Error, Result};
use crate::exact::{Interval, ScaledRational};

/// Default width for certified norm enclosures inside witness generators.
pub fn default_eps() -> BigRational {
    BigRational::new(1.into(), (1u64 << 40).into())
}

/// Fails unless `iv` meets `[1 - tol, 1 + tol]`.
pub(crate) fn require_unit(iv: &Interval, tol: &BigRational, what: &str) -> Result<()> {
    let one = BigRational::from_integer(1.into());
    let lo = ScaledRational::from_rational(&(&one - tol));
    let hi = ScaledRational::from_rational(&(&one + tol));
    if iv.hi() < &lo || iv.lo() > &hi {
        return Err(Error::Precondition(format!(
            "{what} has norm in [{:.9}, {:.9}], not within {} of 1",
            iv.lo().to_f64(),
            iv.hi().to_f64(),
            tol
        )));
    }
    Ok(())
}

pub(crate) fn require_positive(q: &BigRational, what: &str) -> Result<()> {
    if !q.is_positive() {
        return Err(Error::Precondition(format!("{what} must be positive")));
    }
    Ok(())
}
