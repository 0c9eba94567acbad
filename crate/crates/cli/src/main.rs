use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_rational::BigRational;
use readspace::construction::{Descriptor, ReadConstruction};
use readspace::exact::{parse_rational, SparseVec, TailVec};
use readspace::experiment::{run, term_table_csv, Experiment, ExperimentConfig, Report};
use readspace::geometry::ProbeFamily;
use readspace::lp::LinProgram;
use readspace::Error;

#[derive(Parser)]
#[command(
    name = "readspace",
    version,
    about = "Certified experiments on a rough renorming of c0"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Width of certified norm enclosures, as "p/q" or a decimal.
    #[arg(long, global = true)]
    eps: Option<String>,
    /// Series terms for truncated computations.
    #[arg(long, global = true)]
    terms: Option<usize>,
    /// Search depth for witness generators.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Acceptance slack for certified comparisons.
    #[arg(long, global = true)]
    tol: Option<String>,
    /// Directory for report.json and CSV series; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WithConfig {
    /// Construction descriptor JSON.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Term table n, a_n, r_n, v_n as CSV.
    Construct(WithConfig),
    /// Certified enclosure of |||x|||.
    Norm {
        #[command(flatten)]
        c: WithConfig,
        #[arg(long)]
        vec: PathBuf,
    },
    /// Truncated dual norm with its LP certificate.
    Dualnorm {
        #[command(flatten)]
        c: WithConfig,
        #[arg(long)]
        vec: PathBuf,
    },
    /// Exact linear programming.
    Lp {
        #[command(subcommand)]
        cmd: LpCommand,
    },
    /// Separating-direction certificate for a pair of unit vectors.
    CertifyStrictConvexity {
        #[command(flatten)]
        c: WithConfig,
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
    },
    /// Two far-apart points in a thin slice.
    RoughnessWitness {
        #[command(flatten)]
        c: WithConfig,
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        lambda: String,
        #[arg(long)]
        delta: String,
    },
    /// Table of |||x + y_m||| and |||y_m - x||| for y_m = (x + rho e_m) / norm.
    LurWitness {
        #[command(flatten)]
        c: WithConfig,
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        rho: String,
        /// Indices as "a..b" (inclusive) or a comma list.
        #[arg(long)]
        m: String,
    },
    /// Equality residuals along a probe family.
    WlurProbe {
        #[command(flatten)]
        c: WithConfig,
        #[arg(long)]
        x: PathBuf,
        /// Perturbed family with this rho.
        #[arg(long, conflicts_with = "y", required_unless_present = "y")]
        rho: Option<String>,
        /// Constant family y_m = y.
        #[arg(long)]
        y: Option<PathBuf>,
        #[arg(long)]
        m: String,
        /// The family is a control that should violate the equalities.
        #[arg(long)]
        control: bool,
    },
    /// Goldstine approximant and norm-convergence table for a tail vector.
    Goldstine {
        #[command(flatten)]
        c: WithConfig,
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        m_list: String,
        #[arg(long)]
        bump: Option<String>,
    },
    /// ||u + rho e_m||_inf = max(||u||_inf, rho).
    ConormCheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        rho: String,
        #[arg(long)]
        m: usize,
    },
    /// The smooth renorming built from a finite point set.
    RenormSmooth {
        #[command(subcommand)]
        cmd: RenormCommand,
    },
    /// Batch of experiments from a full config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum LpCommand {
    Solve { file: PathBuf },
}

#[derive(Args)]
struct RenormArgs {
    #[command(flatten)]
    c: WithConfig,
    /// JSON list of sparse vectors.
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    vec: PathBuf,
}

#[derive(Subcommand)]
enum RenormCommand {
    Dual(RenormArgs),
    Gauge(RenormArgs),
    CheckAdditivity(RenormArgs),
    CheckNa(RenormArgs),
}

type Res<T> = std::result::Result<T, Error>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Res<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// `"p/q"`, an integer, or an exact decimal such as `0.25` or `1e-6`.
fn rational(s: &str) -> Res<BigRational> {
    if let Ok(r) = parse_rational(s) {
        return Ok(r);
    }
    let bad = || Error::Parse(format!("not a rational or decimal: {s:?}"));
    let t = s.trim().to_ascii_lowercase();
    let (mant, exp) = match t.split_once('e') {
        Some((m, e)) => (m.to_string(), e.parse::<i32>().map_err(|_| bad())?),
        None => (t.clone(), 0),
    };
    let (int_part, frac) = mant.split_once('.').unwrap_or((&mant, ""));
    let digits: BigInt = format!("{int_part}{frac}").parse().map_err(|_| bad())?;
    let shift = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    Ok(if shift >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, shift as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-shift) as usize))
    })
}

fn index_list(s: &str) -> Res<Vec<usize>> {
    let bad = || Error::Parse(format!("bad index list {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        return if a <= b { Ok((a..=b).collect()) } else { Err(bad()) };
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn build(cli: &Cli) -> Res<(ExperimentConfig, bool)> {
    let single = |c: &WithConfig, e: Experiment| -> Res<ExperimentConfig> {
        Ok(ExperimentConfig::single(read_json::<Descriptor>(&c.config)?, e))
    };
    let mut csv_to_stdout = false;
    let mut cfg = match &cli.command {
        Command::Construct(c) => {
            csv_to_stdout = true;
            single(c, Experiment::Construct)?
        }
        Command::Norm { c, vec } => single(
            c,
            Experiment::Norm {
                x: read_json::<TailVec>(vec)?,
            },
        )?,
        Command::Dualnorm { c, vec } => single(c, Experiment::DualNorm { f: read_json(vec)? })?,
        Command::Lp {
            cmd: LpCommand::Solve { file },
        } => ExperimentConfig::single(
            Descriptor::canonical(),
            Experiment::LpSolve {
                program: read_json::<LinProgram>(file)?,
            },
        ),
        Command::CertifyStrictConvexity { c, x, y } => single(
            c,
            Experiment::StrictConvexity {
                x: read_json(x)?,
                y: read_json(y)?,
            },
        )?,
        Command::RoughnessWitness { c, f, lambda, delta } => single(
            c,
            Experiment::RoughnessWitness {
                f: read_json(f)?,
                lambda: rational(lambda)?,
                delta: rational(delta)?,
            },
        )?,
        Command::LurWitness { c, x, rho, m } => single(
            c,
            Experiment::LurWitness {
                x: read_json(x)?,
                rho: rational(rho)?,
                m: index_list(m)?,
                slack: None,
            },
        )?,
        Command::WlurProbe {
            c,
            x,
            rho,
            y,
            m,
            control,
        } => {
            let family = match (rho, y) {
                (Some(r), _) => ProbeFamily::Perturbed { rho: rational(r)? },
                (None, Some(y)) => ProbeFamily::Constant { y: read_json(y)? },
                (None, None) => return Err(Error::Parse("one of --rho, --y is required".into())),
            };
            single(
                c,
                Experiment::WlurProbe {
                    x: read_json(x)?,
                    family,
                    m: index_list(m)?,
                    expect_equality: !control,
                },
            )?
        }
        Command::Goldstine { c, x, m, m_list, bump } => single(
            c,
            Experiment::Goldstine {
                x: read_json(x)?,
                m: *m,
                m_list: index_list(m_list)?,
                bump: bump.as_deref().map(rational).transpose()?,
            },
        )?,
        Command::ConormCheck { config, u, rho, m } => {
            let d = match config {
                Some(p) => read_json(p)?,
                None => Descriptor::canonical(),
            };
            ExperimentConfig::single(
                d,
                Experiment::ConormCheck {
                    u: read_json(u)?,
                    rho: rational(rho)?,
                    m: *m,
                },
            )
        }
        Command::RenormSmooth { cmd } => {
            let (a, make): (&RenormArgs, MakeRenorm) = match cmd {
                RenormCommand::Dual(a) => (a, |points, f| Experiment::RenormDual { points, f }),
                RenormCommand::Gauge(a) => (a, |points, x| Experiment::RenormGauge { points, x }),
                RenormCommand::CheckAdditivity(a) => (a, |points, f| Experiment::RenormAdditivity { points, f }),
                RenormCommand::CheckNa(a) => (a, |points, f| Experiment::RenormNa { points, f }),
            };
            single(&a.c, make(read_json(&a.points)?, read_json(&a.vec)?))?
        }
        Command::Run { config } => ExperimentConfig::load(config)?,
    };
    let g = &cli.global;
    if let Some(e) = &g.eps {
        cfg.defaults.eps = rational(e)?;
    }
    if let Some(t) = &g.tol {
        cfg.defaults.tol = rational(t)?;
    }
    if let Some(n) = g.terms {
        cfg.defaults.terms = n;
    }
    if let Some(d) = g.depth {
        cfg.defaults.depth = d;
    }
    if let Some(out) = &g.out {
        cfg.output_dir = Some(out.display().to_string());
    }
    if cfg.defaults.eps <= BigRational::from_integer(0.into()) {
        return Err(Error::Parse("--eps must be positive".into()));
    }
    Ok((cfg, csv_to_stdout))
}

fn emit(report: &Report, cfg: &ExperimentConfig, csv_to_stdout: bool) -> Res<()> {
    match &cfg.output_dir {
        Some(dir) => {
            report.write_to(Path::new(dir))?;
            eprintln!("wrote {}", Path::new(dir).join("report.json").display());
        }
        None if csv_to_stdout => {
            let c = ReadConstruction::new(cfg.construction.clone());
            print!("{}", term_table_csv(&c, c.available(cfg.defaults.terms))?);
        }
        None => print!("{}", report.to_json()),
    }
    Ok(())
}

type MakeRenorm = fn(Vec<SparseVec>, SparseVec) -> Experiment;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, csv_to_stdout) = match build(&cli) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit(&report, &cfg, csv_to_stdout) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    for line in report.failures() {
        eprintln!("{line}");
    }
    ExitCode::from(report.exit_code() as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_numbers_and_lists() {
        assert_eq!(rational("1/3").unwrap(), BigRational::new(1.into(), 3.into()));
        assert_eq!(rational("1e-6").unwrap(), BigRational::new(1.into(), 1_000_000.into()));
        assert_eq!(rational("0.25").unwrap(), BigRational::new(1.into(), 4.into()));
        assert_eq!(rational("-1.5e1").unwrap(), BigRational::from_integer((-15).into()));
        assert!(rational("abc").is_err());
        assert_eq!(index_list("3..5").unwrap(), vec![3, 4, 5]);
        assert_eq!(index_list("7, 9").unwrap(), vec![7, 9]);
        assert!(index_list("5..3").is_err());
    }
}
