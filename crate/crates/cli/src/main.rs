//! `fsrk`: tableau dumps, stability scans, integration runs and convergence
//! studies for fractional-step Runge-Kutta schemes.
//!
//! Exit codes: 0 success, 2 usage or scheme error, 3 numerical failure
//! (divergence, failed stage solve, pole proximity).

mod spec;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use fsrk::integrator::{convergence_order, reference_trajectory, AdditiveOdeProblem};
use fsrk::problems::{ForcedDecay, LogisticSplit};
use fsrk::{
    brusselator, build_compact, build_extended, integrate, product_stability, scan_region,
    BrusselatorParams, FsrkError, FsrkScheme, GridSpec, Intercept, LinearSplitProblem,
    RayRestriction,
};
use num_complex::Complex64;

use spec::SchemeSpecFile;

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const THREADS_ENV: &str = "FSRK_THREADS";

#[derive(Parser)]
#[command(
    name = "fsrk",
    version,
    about = "Fractional-step Runge-Kutta schemes as GARK methods"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the GARK tableau of a scheme.
    Tableau {
        scheme: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Compact)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan |R| along a ray and report intercept, poles and holes.
    Stability {
        scheme: PathBuf,
        /// Operator weights `w1,..,wN` with `z_l = w_l z`.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        ray: Vec<f64>,
        /// `re_min,re_max,im_min,im_max,n_re,n_im`, or `auto`.
        #[arg(long, default_value = "auto", allow_hyphen_values = true, value_parser = parse_grid)]
        grid: GridArg,
        /// Region CSV; the metadata sidecar goes next to it as `*.meta.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a built-in problem.
    Integrate {
        scheme: PathBuf,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        dt: f64,
        /// Keep every `stride`-th step in the CSV.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the order from final-time errors at several step sizes.
    Converge {
        scheme: PathBuf,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        dts: Vec<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Extended,
    Compact,
    Text,
    Json,
}

#[derive(Clone, Debug)]
enum GridArg {
    Auto,
    Fixed(GridSpec),
}

fn parse_grid(s: &str) -> Result<GridArg, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("grid must be `auto` or `re_min,re_max,im_min,im_max,n_re,n_im`".into());
    }
    if s.eq_ignore_ascii_case("auto") {
        return Ok(GridArg::Auto);
    }
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(format!(
            "grid needs 6 comma-separated values, got {}",
            parts.len()
        ));
    }
    let f = |i: usize| {
        parts[i]
            .parse::<f64>()
            .map_err(|e| format!("`{}`: {e}", parts[i]))
    };
    let n = |i: usize| {
        parts[i]
            .parse::<usize>()
            .map_err(|e| format!("`{}`: {e}", parts[i]))
    };
    GridSpec::new((f(0)?, f(1)?), (f(2)?, f(3)?), n(4)?, n(5)?)
        .map(GridArg::Fixed)
        .map_err(|e| e.to_string())
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemKind {
    Brusselator,
    Linear,
    Logistic,
    ForcedDecay,
}

#[derive(clap::Args)]
struct ProblemArgs {
    #[arg(long, value_enum)]
    problem: ProblemKind,
    /// Final time; defaults to the problem's own.
    #[arg(long = "T")]
    t_end: Option<f64>,
    /// Brusselator grid points.
    #[arg(long, default_value_t = 101)]
    nx: usize,
    /// Brusselator parameters as JSON (`alpha`, `beta`, `d1`, `d2`, `t_end`).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Per-operator rates of the linear problem.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "-1,-1"
    )]
    lambda: Vec<f64>,
}

impl ProblemArgs {
    fn build(&self) -> anyhow::Result<Box<dyn AdditiveOdeProblem>> {
        let end = |default: f64| self.t_end.unwrap_or(default);
        if let Some(t) = self.t_end {
            if !(t >= 0.0 && t.is_finite()) {
                bail!(FsrkError::Invalid(format!(
                    "final time must be non-negative, got {t}"
                )));
            }
        }
        Ok(match self.problem {
            ProblemKind::Brusselator => {
                let mut params = match &self.params {
                    Some(p) => {
                        serde_json::from_str::<BrusselatorParams>(&std::fs::read_to_string(p)?)
                            .with_context(|| format!("parsing {}", p.display()))?
                    }
                    None => BrusselatorParams::default(),
                };
                params.t_end = end(params.t_end);
                Box::new(brusselator(self.nx, params)?)
            }
            ProblemKind::Linear => Box::new(LinearSplitProblem {
                lambda: self
                    .lambda
                    .iter()
                    .map(|&l| Complex64::new(l, 0.0))
                    .collect(),
                y0: Complex64::new(1.0, 0.0),
                span: (0.0, end(1.0)),
            }),
            ProblemKind::Logistic => {
                let d = LogisticSplit::default();
                Box::new(LogisticSplit {
                    span: (d.span.0, end(d.span.1)),
                    ..d
                })
            }
            ProblemKind::ForcedDecay => {
                let d = ForcedDecay::default();
                Box::new(ForcedDecay {
                    span: (d.span.0, end(d.span.1)),
                    ..d
                })
            }
        })
    }

    /// Closed form where available, otherwise a refined unsplit run.
    fn exact_final(
        &self,
        problem: &dyn AdditiveOdeProblem,
        finest: f64,
    ) -> anyhow::Result<Vec<f64>> {
        let t = problem.span().1;
        Ok(match self.problem {
            ProblemKind::Linear => LinearSplitProblem {
                lambda: self
                    .lambda
                    .iter()
                    .map(|&l| Complex64::new(l, 0.0))
                    .collect(),
                y0: Complex64::new(1.0, 0.0),
                span: problem.span(),
            }
            .exact(t),
            ProblemKind::Logistic => LogisticSplit::default().exact(t),
            ProblemKind::ForcedDecay => ForcedDecay::default().exact(t),
            ProblemKind::Brusselator => reference_trajectory(problem, finest, usize::MAX)?
                .final_state()
                .to_vec(),
        })
    }
}

fn load_scheme(path: &Path) -> anyhow::Result<FsrkScheme> {
    SchemeSpecFile::load(path)?.build()
}

fn check_operators(scheme: &FsrkScheme, problem: &dyn AdditiveOdeProblem) -> anyhow::Result<()> {
    if scheme.operators() != problem.operators() {
        bail!(FsrkError::Dimension(format!(
            "scheme splits {} operators but the problem has {}",
            scheme.operators(),
            problem.operators()
        )));
    }
    Ok(())
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sidecar(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Tableau {
            scheme,
            format,
            out,
        } => {
            let s = load_scheme(&scheme)?;
            let text = match format {
                Format::Extended => build_extended(&s)?.to_text(),
                Format::Compact => build_compact(&s)?.to_text(),
                Format::Text => {
                    let t = build_extended(&s)?;
                    let check = t.check_internal_consistency();
                    let mut head = format!(
                        "{}\n{} stages, {} operators\n",
                        s.label(),
                        t.total_stages,
                        t.operators
                    );
                    match check.witness {
                        None => head.push_str("internally consistent\n\n"),
                        Some((row, l, m)) => head.push_str(&format!(
                            "not internally consistent: row {} sums differ for operators {} and {}\n\n",
                            t.rows[row].label(),
                            l + 1,
                            m + 1
                        )),
                    }
                    head + &t.compact().to_text()
                }
                Format::Json => serde_json::to_string_pretty(&build_extended(&s)?)? + "\n",
            };
            let mut w = output(out.as_deref())?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        Command::Stability {
            scheme,
            ray,
            grid,
            out,
        } => {
            let s = load_scheme(&scheme)?;
            if ray.len() != s.operators() {
                bail!(FsrkError::Dimension(format!(
                    "ray has {} weights for {} operators",
                    ray.len(),
                    s.operators()
                )));
            }
            let f = product_stability(&s);
            let ray = RayRestriction::new(ray)?;
            let grid = match grid {
                GridArg::Auto => GridSpec::auto(&f, &ray),
                GridArg::Fixed(g) => g,
            };
            let scan = scan_region(&f, &ray, grid);
            let holes = scan.detect_holes();
            println!("scheme: {}", s.label());
            match scan.intercept {
                Some(Intercept::Finite(x)) => println!("intercept: {x:.6}"),
                Some(Intercept::Unbounded) => println!("intercept: unbounded"),
                None => println!("intercept: undefined (unstable next to the origin)"),
            }
            println!("poles: {}", scan.poles.len());
            for p in &scan.poles {
                println!(
                    "  {:.6}{:+.6}i  operator {}  multiplicity {}",
                    p.z.re,
                    p.z.im,
                    p.operator + 1,
                    p.multiplicity
                );
            }
            println!("holes: {}", holes.len());
            for h in &holes {
                print!(
                    "  re [{:.4}, {:.4}] im [{:.4}, {:.4}]  {} cells",
                    h.re_range.0, h.re_range.1, h.im_range.0, h.im_range.1, h.cells
                );
                match h.nearest_pole {
                    Some(z) => println!("  nearest pole {:.5}{:+.5}i", z.re, z.im),
                    None => println!(),
                }
            }
            if let Some(path) = out {
                let mut w = output(Some(&path))?;
                scan.write_csv(&mut w)?;
                w.flush()?;
                let meta = sidecar(&path);
                std::fs::write(
                    &meta,
                    serde_json::to_string_pretty(&scan.metadata())? + "\n",
                )
                .with_context(|| format!("writing {}", meta.display()))?;
            }
        }
        Command::Integrate {
            scheme,
            problem,
            dt,
            stride,
            out,
        } => {
            let s = load_scheme(&scheme)?;
            let p = problem.build()?;
            check_operators(&s, p.as_ref())?;
            let r = integrate(&s, p.as_ref(), dt, stride)?;
            let mut w = output(out.as_deref())?;
            r.write_csv(&mut w)?;
            w.flush()?;
            if let Some(path) = &out {
                let meta = r.metadata(&s, &p.name(), dt);
                std::fs::write(sidecar(path), serde_json::to_string_pretty(&meta)? + "\n")?;
            }
            if r.diverged {
                eprintln!(
                    "error: solution diverged at t = {}",
                    r.divergence_time
                        .map_or_else(|| "?".into(), |t| t.to_string())
                );
                return Ok(EXIT_NUMERICAL);
            }
        }
        Command::Converge {
            scheme,
            problem,
            dts,
        } => {
            if dts.len() < 3 {
                bail!(FsrkError::Invalid(format!(
                    "convergence study needs at least 3 step sizes, got {}",
                    dts.len()
                )));
            }
            let s = load_scheme(&scheme)?;
            let p = problem.build()?;
            check_operators(&s, p.as_ref())?;
            let finest = dts.iter().copied().fold(f64::INFINITY, f64::min);
            let exact = problem.exact_final(p.as_ref(), finest)?;
            let rep = convergence_order(&s, p.as_ref(), &exact, &dts)?;
            println!("scheme: {}", s.label());
            println!("{:>12}  {:>12}", "dt", "error");
            for (dt, e) in rep.dts.iter().zip(&rep.errors) {
                println!("{dt:>12.6e}  {e:>12.6e}");
            }
            println!("order: {:.4}", rep.order);
            if rep.precision_floor {
                println!(
                    "warning: the smallest step reaches rounding level; the slope is unreliable"
                );
            }
        }
    }
    Ok(0)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<FsrkError>() {
        Some(
            FsrkError::PoleProximity { .. }
            | FsrkError::StageSolve { .. }
            | FsrkError::DegenerateRay,
        ) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a thread count, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = configure_threads().and_then(|()| run(cli));
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
