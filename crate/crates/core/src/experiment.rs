//! Batch experiments: a JSON config in, a self-describing JSON report and
//! CSV series out. Reports are byte-identical across runs and thread counts.

use std::fs;
use std::path::Path;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::construction::{Descriptor, ReadConstruction};
use crate::error::{Error, Result};
use crate::exact::{Interval, ScaledRational, SparseVec, TailVec};
use crate::geometry::{
    conorm_check, goldstine_approximants, lur_failure_report, norm_convergence_probe, roughness_witness,
    strict_convexity_certificate, wlur_probe, ProbeFamily, StrictConvexityOutcome,
};
use crate::lp::{solve_lp, verify, LinProgram};
use crate::norm::PerturbedNorm;
use crate::renorm::{SmoothRenorm, GAUGE_BUDGET};

pub const SCHEMA_VERSION: &str = "1.0.0";

/// Environment variable capping the worker threads of a batch.
pub const THREADS_ENV: &str = "READSPACE_THREADS";

pub fn report_schema_version() -> &'static str {
    SCHEMA_VERSION
}

fn default_eps() -> BigRational {
    BigRational::new(1.into(), 1_000_000_000.into())
}

fn default_tol() -> BigRational {
    BigRational::new(1.into(), 1_000_000.into())
}

fn default_terms() -> usize {
    16
}

fn default_depth() -> usize {
    64
}

fn default_true() -> bool {
    true
}

/// Tolerances and truncation limits shared by every experiment of a batch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    /// Width of certified norm enclosures.
    #[serde(default = "default_eps", with = "crate::exact::serde_rational")]
    pub eps: BigRational,
    /// Acceptance slack for comparisons against a target value.
    #[serde(default = "default_tol", with = "crate::exact::serde_rational")]
    pub tol: BigRational,
    /// Number of series terms for truncated computations.
    #[serde(default = "default_terms")]
    pub terms: usize,
    /// Search depth for witness generators.
    #[serde(default = "default_depth")]
    pub depth: usize,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            eps: default_eps(),
            tol: default_tol(),
            terms: default_terms(),
            depth: default_depth(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// Term table for the first `terms` indices.
    Construct,
    Norm {
        x: TailVec,
    },
    DualNorm {
        f: SparseVec,
    },
    LpSolve {
        program: LinProgram,
    },
    StrictConvexity {
        x: TailVec,
        y: TailVec,
    },
    RoughnessWitness {
        f: SparseVec,
        #[serde(with = "crate::exact::serde_rational")]
        lambda: BigRational,
        #[serde(with = "crate::exact::serde_rational")]
        delta: BigRational,
    },
    LurWitness {
        x: SparseVec,
        #[serde(with = "crate::exact::serde_rational")]
        rho: BigRational,
        m: Vec<usize>,
        /// Required closeness of the last row to `|||x + y||| = 2`, `|||y - x||| = rho`.
        #[serde(default, with = "crate::exact::serde_opt_rational")]
        slack: Option<BigRational>,
    },
    WlurProbe {
        x: SparseVec,
        family: ProbeFamily,
        m: Vec<usize>,
        /// Whether the equalities are expected to hold (false for control families).
        #[serde(default = "default_true")]
        expect_equality: bool,
    },
    Goldstine {
        x: TailVec,
        m: usize,
        m_list: Vec<usize>,
        #[serde(default, with = "crate::exact::serde_opt_rational")]
        bump: Option<BigRational>,
    },
    ConormCheck {
        u: SparseVec,
        #[serde(with = "crate::exact::serde_rational")]
        rho: BigRational,
        m: usize,
    },
    RenormDual {
        points: Vec<SparseVec>,
        f: SparseVec,
    },
    RenormGauge {
        points: Vec<SparseVec>,
        x: SparseVec,
    },
    RenormAdditivity {
        points: Vec<SparseVec>,
        f: SparseVec,
    },
    RenormNa {
        points: Vec<SparseVec>,
        f: SparseVec,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Construct => "construct",
            Experiment::Norm { .. } => "norm",
            Experiment::DualNorm { .. } => "dual_norm",
            Experiment::LpSolve { .. } => "lp_solve",
            Experiment::StrictConvexity { .. } => "strict_convexity",
            Experiment::RoughnessWitness { .. } => "roughness_witness",
            Experiment::LurWitness { .. } => "lur_witness",
            Experiment::WlurProbe { .. } => "wlur_probe",
            Experiment::Goldstine { .. } => "goldstine",
            Experiment::ConormCheck { .. } => "conorm_check",
            Experiment::RenormDual { .. } => "renorm_dual",
            Experiment::RenormGauge { .. } => "renorm_gauge",
            Experiment::RenormAdditivity { .. } => "renorm_additivity",
            Experiment::RenormNa { .. } => "renorm_na",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must equal [`SCHEMA_VERSION`] when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<String>,
    pub construction: Descriptor,
    #[serde(default)]
    pub defaults: Defaults,
    pub experiments: Vec<Experiment>,
    /// Directory receiving `report.json` and the CSV series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn single(construction: Descriptor, experiment: Experiment) -> Self {
        ExperimentConfig {
            schema_version: None,
            construction,
            defaults: Defaults::default(),
            experiments: vec![experiment],
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        if let Some(v) = &cfg.schema_version {
            if v != SCHEMA_VERSION {
                return Err(Error::Parse(format!(
                    "config schema {v} does not match {SCHEMA_VERSION}"
                )));
            }
        }
        if cfg.defaults.eps <= BigRational::zero() || cfg.defaults.tol <= BigRational::zero() {
            return Err(Error::Parse("eps and tol must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    /// A certified check failed or a certificate could not be produced.
    Fail,
    /// The parameters violate a precondition.
    Invalid,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub index: usize,
    pub kind: String,
    pub status: Status,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub result: Value,
    /// File name of the CSV series, relative to the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<String>,
    #[serde(skip)]
    pub csv: Option<String>,
}

impl Record {
    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub construction: Descriptor,
    pub defaults: Defaults,
    pub records: Vec<Record>,
}

impl Report {
    /// 0 when every check passed, 2 when any experiment had invalid
    /// parameters, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.records.iter().any(|r| r.status == Status::Invalid) {
            2
        } else if self.records.iter().any(|r| r.status == Status::Fail) {
            1
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `report.json` and every CSV series into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Parse(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        fs::write(dir.join("report.json"), self.to_json()).map_err(io)?;
        for r in &self.records {
            if let (Some(name), Some(csv)) = (&r.series, &r.csv) {
                fs::write(dir.join(name), csv).map_err(io)?;
            }
        }
        Ok(())
    }

    /// One line per failing or invalid record, naming the failed checks.
    pub fn failures(&self) -> Vec<String> {
        self.records
            .iter()
            .filter(|r| r.status != Status::Pass)
            .map(|r| {
                let what = match &r.error {
                    Some(e) => e.clone(),
                    None => format!("failed checks: {}", r.failed_checks().join(", ")),
                };
                format!("experiment {} ({}): {what}", r.index, r.kind)
            })
            .collect()
    }
}

/// Checks that `text` is a report of the current schema.
pub fn validate_report(text: &str) -> Result<Report> {
    let raw: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("report: {e}")))?;
    match raw.get("schema_version").and_then(Value::as_str) {
        Some(SCHEMA_VERSION) => {}
        Some(other) => {
            return Err(Error::Parse(format!(
                "report schema {other} does not match {SCHEMA_VERSION}"
            )))
        }
        None => return Err(Error::Parse("report has no schema_version".into())),
    }
    serde_json::from_value(raw).map_err(|e| Error::Parse(format!("report: {e}")))
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs the batch on a pool capped by [`THREADS_ENV`].
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    run_with_threads(config, threads_from_env())
}

pub fn run_with_threads(config: &ExperimentConfig, threads: Option<usize>) -> Result<Report> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    let construction = ReadConstruction::new(config.construction.clone());
    let records = pool.install(|| {
        config
            .experiments
            .par_iter()
            .enumerate()
            .map(|(i, e)| run_one(&construction, &config.defaults, i + 1, e))
            .collect()
    });
    Ok(Report {
        schema_version: SCHEMA_VERSION.into(),
        construction: config.construction.clone(),
        defaults: config.defaults.clone(),
        records,
    })
}

struct Outcome {
    checks: Vec<Check>,
    result: Value,
    csv: Option<String>,
}

impl Outcome {
    fn new<T: Serialize>(result: &T) -> Self {
        Outcome {
            checks: Vec::new(),
            result: serde_json::to_value(result).expect("result serializes"),
            csv: None,
        }
    }

    fn check(mut self, name: &str, passed: bool) -> Self {
        self.checks.push(Check {
            name: name.into(),
            passed,
        });
        self
    }

    fn csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }
}

fn run_one(c: &ReadConstruction, d: &Defaults, index: usize, e: &Experiment) -> Record {
    let kind = e.kind().to_string();
    match execute(c, d, e) {
        Ok(out) => {
            let status = if out.checks.iter().all(|c| c.passed) {
                Status::Pass
            } else {
                Status::Fail
            };
            let series = out.csv.as_ref().map(|_| format!("{index:03}_{kind}.csv"));
            Record {
                index,
                kind,
                status,
                checks: out.checks,
                error: None,
                result: out.result,
                series,
                csv: out.csv,
            }
        }
        Err(err) => {
            let status = match err {
                Error::Precondition(_)
                | Error::Parse(_)
                | Error::Admissibility { .. }
                | Error::FiniteConstruction { .. }
                | Error::ExponentRange(_) => Status::Invalid,
                _ => Status::Fail,
            };
            Record {
                index,
                kind,
                status,
                checks: Vec::new(),
                error: Some(err.to_string()),
                result: Value::Null,
                series: None,
                csv: None,
            }
        }
    }
}

/// `|a - b| <= tol` for two enclosures, in the weakest sense: some pair of
/// members is that close.
fn within(a: &Interval, b: &Interval, tol: &BigRational) -> bool {
    let t = ScaledRational::from_rational(tol);
    a.lo() <= &(b.hi() + &t) && b.lo() <= &(a.hi() + &t)
}

pub fn term_table_csv(c: &ReadConstruction, n: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["n", "a_n", "r_n", "v_n"]).map_err(fail)?;
    for t in c.terms(n)? {
        let r = serde_json::to_string(&t.r).expect("serializes");
        let v = serde_json::to_string(&t.v).expect("serializes");
        w.write_record([t.n.to_string(), t.a.to_string(), r, v]).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

fn execute(c: &ReadConstruction, d: &Defaults, e: &Experiment) -> Result<Outcome> {
    let norm = PerturbedNorm::new(c);
    Ok(match e {
        Experiment::Construct => {
            let report = c.validate(c.available(d.terms));
            let passed = report.passed();
            Outcome::new(&report)
                .check("admissible", passed)
                .csv(term_table_csv(c, c.available(d.terms))?)
        }
        Experiment::Norm { x } => {
            let (iv, terms) = norm.norm_certified_with_terms(x, &d.eps)?;
            let width_ok = iv.width() <= ScaledRational::from_rational(&d.eps);
            Outcome::new(&serde_json::json!({ "interval": iv, "terms": terms })).check("width", width_ok)
        }
        Experiment::DualNorm { f } => {
            let cert = norm.dual_norm_truncated(f, c.available(d.terms))?;
            let verified = norm.check_dual_certificate(f, &cert).is_ok();
            Outcome::new(&cert).check("certificate", verified)
        }
        Experiment::LpSolve { program } => {
            let outcome = solve_lp(program)?;
            let verified = verify(program, &outcome).is_ok();
            Outcome::new(&outcome).check("certificate", verified)
        }
        Experiment::StrictConvexity { x, y } => {
            let out = strict_convexity_certificate(c, x, y, d.depth, &d.tol)?;
            let found = matches!(out, StrictConvexityOutcome::Certified(_));
            Outcome::new(&out).check("separating_direction", found)
        }
        Experiment::RoughnessWitness { f, lambda, delta } => {
            let w = roughness_witness(c, f, lambda, delta, d.depth, &d.tol)?;
            Outcome::new(&w).check("witness", true)
        }
        Experiment::LurWitness { x, rho, m, slack } => {
            let rep = lur_failure_report(c, x, rho, m, &d.tol)?;
            let slack = slack.clone().unwrap_or_else(|| BigRational::new(1.into(), 100.into()));
            let last = rep
                .rows
                .last()
                .ok_or_else(|| Error::Precondition("m is empty".into()))?;
            let two = BigRational::from_integer(2.into());
            let sum_ok = last.sum_norm.lo() >= &ScaledRational::from_rational(&(&two - &slack));
            let diff_ok = last.diff_norm.lo() >= &ScaledRational::from_rational(&(rho - &slack));
            let csv = rep.to_csv();
            Outcome::new(&rep)
                .check("sum_near_two", sum_ok)
                .check("separated", diff_ok)
                .csv(csv)
        }
        Experiment::WlurProbe {
            x,
            family,
            m,
            expect_equality,
        } => {
            let rep = wlur_probe(c, x, family, m, c.available(d.terms))?;
            let holds = rep.limit_residual.is_zero() && rep.max_series_residual().is_zero();
            Outcome::new(&rep).check("equalities_as_expected", holds == *expect_equality)
        }
        Experiment::Goldstine { x, m, m_list, bump } => {
            let g = goldstine_approximants(c, x, *m)?;
            let probe = norm_convergence_probe(c, x, m_list, bump.as_ref(), &d.tol)?;
            let norms = within(&g.norm_xm, &g.norm_xbar, &d.tol);
            let coords = g.agreement == *m;
            let csv = probe.to_csv();
            let equivalence = probe.equivalence_holds;
            Outcome::new(&serde_json::json!({ "approximant": g, "convergence": probe }))
                .check("norm_matches", norms)
                .check("coordinates_agree", coords)
                .check("convergence_equivalence", equivalence)
                .csv(csv)
        }
        Experiment::ConormCheck { u, rho, m } => {
            let r = conorm_check(u, rho, *m)?;
            let passed = r.passed;
            Outcome::new(&r).check("conorm", passed)
        }
        Experiment::RenormDual { points, f } => {
            let s = SmoothRenorm::new(c, d.terms, points.clone())?;
            let dual = s.s_dual_norm(f, &d.eps)?;
            let lower_ok = dual.total.lo() >= &ScaledRational::from_rational(&dual.base);
            Outcome::new(&dual).check("dominates_base", lower_ok)
        }
        Experiment::RenormGauge { points, x } => {
            let s = SmoothRenorm::new(c, d.terms, points.clone())?;
            let g = s.s_gauge(x, &d.tol, GAUGE_BUDGET)?;
            let base = norm.norm_truncated(x, s.terms())?;
            let spread: BigRational = (1..=points.len())
                .map(|i| BigRational::new(1.into(), num_bigint::BigInt::one() << i))
                .sum::<BigRational>()
                + BigRational::one();
            let upper_ok = g.enclosure.hi() <= &ScaledRational::from_rational(&base);
            let lower_ok = g.enclosure.lo().mul_rational(&spread) >= ScaledRational::from_rational(&base);
            let k = g_scale(&g)?;
            let member = s.is_member(&x.scale(&k), &g.u.scale(&k), &scale_vec(&g.a, &k))?;
            Outcome::new(&serde_json::json!({ "gauge": g, "base_norm": crate::exact::format_rational(&base) }))
                .check("below_base_norm", upper_ok)
                .check("above_scaled_base_norm", lower_ok)
                .check("decomposition", member)
        }
        Experiment::RenormAdditivity { points, f } => {
            let s = SmoothRenorm::new(c, d.terms, points.clone())?;
            let r = s.support_additivity_check(f, &d.eps)?;
            let passed = r.passed;
            Outcome::new(&r).check("additivity", passed)
        }
        Experiment::RenormNa { points, f } => {
            let s = SmoothRenorm::new(c, d.terms, points.clone())?;
            let r = s.na_preservation_check(f, &d.eps)?;
            let passed = r.passed;
            Outcome::new(&r).check("attained", passed)
        }
    })
}

/// `1 / hi` of a gauge enclosure, so that `x / hi` has a unit decomposition.
fn g_scale(g: &crate::renorm::GaugeResult) -> Result<BigRational> {
    let hi = g.enclosure.hi().to_rational()?;
    Ok(if hi.is_zero() { BigRational::one() } else { hi.recip() })
}

fn scale_vec(v: &[BigRational], s: &BigRational) -> Vec<BigRational> {
    v.iter().map(|x| x * s).collect()
}
