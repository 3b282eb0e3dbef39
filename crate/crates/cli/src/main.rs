mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use bklab::dyadic::{linearize, maximal_function, Scalar};
use bklab::report::{to_json, write_study_csv};
use bklab::search::{brute_force_oracle, convergence_study, local_search, SearchOptions};
use bklab::transforms::{evaluate, g_phi, GPhiRecord};
use bklab::verify::{run_suite, Suite};
use bklab::{BellmanParams, Error, StepFunction, TreeSpec};
use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use serde::Serialize;

use config::FileConfig;

const Q_MIN: f64 = 1e-3;
const Q_MAX: f64 = 1.0 - 1e-3;

#[derive(Parser, Debug)]
#[command(
    name = "bklab",
    version,
    about = "Bellman function of the dyadic maximal operator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bellman value h·c with c, τ and k₀.
    Bellman {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        io: OutArgs,
    },
    /// Tree maximal function of a step function.
    Maximal {
        #[command(flatten)]
        input: PhiArgs,
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        io: OutArgs,
    },
    /// S_φ with averages, weights and the sets A(φ, I).
    Linearize {
        #[command(flatten)]
        input: PhiArgs,
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        io: OutArgs,
    },
    /// Two-valued replacement g_φ on the excess set.
    Gphi {
        #[command(flatten)]
        input: PhiArgs,
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long = "L", visible_alias = "big-l")]
        threshold: Option<f64>,
        /// Depth of the grid carrying the supports.
        #[arg(long)]
        refine: Option<u32>,
        #[command(flatten)]
        io: OutArgs,
    },
    /// Randomized check suites.
    Verify {
        /// inequalities, linearization or gphi.
        #[arg(long)]
        suite: Option<String>,
        /// Number of random instances.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        io: OutArgs,
    },
    /// Search for a near-extremal function at one depth.
    Search {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Enumerate a quantized grid of this size instead of searching.
        #[arg(long)]
        grid: Option<u32>,
        #[command(flatten)]
        io: OutArgs,
    },
    /// Search at increasing depths and tabulate the trend.
    Study {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        m: Option<u32>,
        /// Comma-separated ascending depths.
        #[arg(long, value_delimiter = ',')]
        depths: Option<Vec<u32>>,
        #[command(flatten)]
        search: SearchArgs,
        /// Also write the depth table as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        io: OutArgs,
    },
    /// Objective, eigenfunction residual and excess set of a step function.
    Residual {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        input: PhiArgs,
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        io: OutArgs,
    },
}

#[derive(Args, Debug)]
struct ParamArgs {
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    f: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long = "L", visible_alias = "big-l")]
    threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct TreeArgs {
    /// Branching factor.
    #[arg(long)]
    m: Option<u32>,
    /// Tree depth N.
    #[arg(long, visible_alias = "big-n")]
    depth: Option<u32>,
}

#[derive(Args, Debug)]
struct PhiArgs {
    /// Step function as a JSON array of pieces.
    #[arg(long)]
    phi: Option<PathBuf>,
    /// Read values as exact rationals.
    #[arg(long)]
    exact: bool,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Args, Debug)]
struct OutArgs {
    /// TOML file with defaults for any flag.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json, or csv for study.
    #[arg(long)]
    format: Option<String>,
}

enum Failure {
    Usage(String),
    Run(Error),
    /// A verification suite found violations.
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Check(_) => 2,
            Failure::Run(e) if e.is_io() => 4,
            Failure::Run(e) if e.is_convergence_failure() => 3,
            Failure::Run(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Run(e) => write!(f, "error: {e}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}

fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Outcome<T> {
    flag.or(file)
        .ok_or_else(|| Failure::Usage(format!("missing --{name} (flag or config key)")))
}

fn load_config(io: &OutArgs, command: &str) -> Outcome<FileConfig> {
    let Some(path) = &io.config else {
        return Ok(FileConfig::default());
    };
    let cfg = FileConfig::load(path).map_err(Failure::Usage)?;
    match &cfg.command {
        Some(c) if c != command => Err(Failure::Usage(format!(
            "config file is for command {c:?}, not {command:?}"
        ))),
        _ => Ok(cfg),
    }
}

fn check_q(q: f64) -> Outcome<f64> {
    if (Q_MIN..=Q_MAX).contains(&q) {
        Ok(q)
    } else {
        Err(Failure::Run(Error::Domain {
            name: "q",
            value: q,
            constraint: "1e-3 <= q <= 1 - 1e-3",
        }))
    }
}

fn params(args: &ParamArgs, cfg: &FileConfig) -> Outcome<BellmanParams> {
    let q = check_q(required(args.q, cfg.q, "q")?)?;
    let f = required(args.f, cfg.f, "f")?;
    let h = required(args.h, cfg.h, "h")?;
    let l = required(args.threshold, cfg.threshold, "L")?;
    Ok(BellmanParams::new(q, f, h, l)?)
}

fn tree(args: &TreeArgs, cfg: &FileConfig) -> Outcome<TreeSpec> {
    let m = args.m.or(cfg.m).unwrap_or(2);
    let depth = required(args.depth, cfg.depth, "depth")?;
    Ok(TreeSpec::new(m, depth)?)
}

fn search_options(args: &SearchArgs, cfg: &FileConfig) -> (u64, SearchOptions) {
    let d = SearchOptions::default();
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let options = SearchOptions {
        restarts: args.restarts.or(cfg.restarts).unwrap_or(d.restarts),
        budget: args.budget.or(cfg.budget).unwrap_or(d.budget),
    };
    (seed, options)
}

fn read_phi<T: Scalar>(args: &PhiArgs, cfg: &FileConfig, m: u32) -> Outcome<StepFunction<T>> {
    let path = required(args.phi.clone(), cfg.phi.clone(), "phi")?;
    let text = std::fs::read_to_string(&path).map_err(Error::from)?;
    Ok(StepFunction::from_json_str(m, &text)?)
}

fn exact(args: &PhiArgs, cfg: &FileConfig) -> bool {
    args.exact || cfg.exact.unwrap_or(false)
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Json,
    Csv,
}

fn format(io: &OutArgs, cfg: &FileConfig, csv_allowed: bool) -> Outcome<Format> {
    match io
        .format
        .as_deref()
        .or(cfg.format.as_deref())
        .unwrap_or("json")
    {
        "json" => Ok(Format::Json),
        "csv" if csv_allowed => Ok(Format::Csv),
        other => Err(Failure::Usage(format!(
            "--format {other:?} is not supported here (expected json{})",
            if csv_allowed { " or csv" } else { "" }
        ))),
    }
}

fn output(io: &OutArgs, cfg: &FileConfig) -> Outcome<Box<dyn Write>> {
    Ok(match io.out.as_ref().or(cfg.out.as_ref()) {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(Error::from)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit<T: Serialize>(report: &T, io: &OutArgs, cfg: &FileConfig) -> Outcome<()> {
    format(io, cfg, false)?;
    let text = to_json(report)?;
    let mut out = output(io, cfg)?;
    out.write_all(text.as_bytes()).map_err(Error::from)?;
    out.flush().map_err(Error::from)?;
    Ok(())
}

#[derive(Serialize)]
struct GPhiOutput {
    g: StepFunction<f64>,
    record: GPhiRecord,
}

fn run(command: Command) -> Outcome<()> {
    match command {
        Command::Bellman { params: p, io } => {
            let cfg = load_config(&io, "bellman")?;
            emit(&params(&p, &cfg)?.summary()?, &io, &cfg)
        }
        Command::Maximal { input, tree: t, io } => {
            let cfg = load_config(&io, "maximal")?;
            let spec = tree(&t, &cfg)?;
            if exact(&input, &cfg) {
                let phi = read_phi::<BigRational>(&input, &cfg, spec.m)?;
                emit(&maximal_function(&phi, &spec)?, &io, &cfg)
            } else {
                let phi = read_phi::<f64>(&input, &cfg, spec.m)?;
                emit(&maximal_function(&phi, &spec)?, &io, &cfg)
            }
        }
        Command::Linearize { input, tree: t, io } => {
            let cfg = load_config(&io, "linearize")?;
            let spec = tree(&t, &cfg)?;
            let json = if exact(&input, &cfg) {
                linearize(&read_phi::<BigRational>(&input, &cfg, spec.m)?, &spec)?.to_json()
            } else {
                linearize(&read_phi::<f64>(&input, &cfg, spec.m)?, &spec)?.to_json()
            };
            emit(&json, &io, &cfg)
        }
        Command::Gphi {
            input,
            tree: t,
            q,
            threshold,
            refine,
            io,
        } => {
            let cfg = load_config(&io, "gphi")?;
            let spec = tree(&t, &cfg)?;
            let q = check_q(required(q, cfg.q, "q")?)?;
            let l = required(threshold, cfg.threshold, "L")?;
            let phi = read_phi::<f64>(&input, &cfg, spec.m)?;
            let (g, record) = g_phi(&phi, l, q, &spec, refine.or(cfg.refine))?;
            emit(&GPhiOutput { g, record }, &io, &cfg)
        }
        Command::Verify {
            suite,
            n,
            seed,
            tree: t,
            io,
        } => {
            let cfg = load_config(&io, "verify")?;
            let suite: Suite = required(suite, cfg.suite.clone(), "suite")?
                .parse()
                .map_err(Failure::Usage)?;
            let instances = n.or(cfg.n).unwrap_or(100);
            let seed = seed.or(cfg.seed).unwrap_or(0);
            let default_depth = if suite == Suite::Linearization { 5 } else { 6 };
            let spec = TreeSpec::new(
                t.m.or(cfg.m).unwrap_or(2),
                t.depth.or(cfg.depth).unwrap_or(default_depth),
            )?;
            let summary = run_suite(suite, instances, seed, &spec)?;
            emit(&summary, &io, &cfg)?;
            if summary.passed() {
                Ok(())
            } else {
                Err(Failure::Check(format!(
                    "{} violations in suite {}",
                    summary.violations,
                    suite.name()
                )))
            }
        }
        Command::Search {
            params: p,
            tree: t,
            search,
            grid,
            io,
        } => {
            let cfg = load_config(&io, "search")?;
            let params = params(&p, &cfg)?;
            let spec = tree(&t, &cfg)?;
            let report = match grid.or(cfg.grid) {
                Some(g) => brute_force_oracle(&params, &spec, g)?,
                None => {
                    let (seed, options) = search_options(&search, &cfg);
                    local_search(&params, &spec, seed, &options)?
                }
            };
            emit(&report, &io, &cfg)
        }
        Command::Study {
            params: p,
            m,
            depths,
            search,
            csv,
            io,
        } => {
            let cfg = load_config(&io, "study")?;
            let params = params(&p, &cfg)?;
            let m = m.or(cfg.m).unwrap_or(2);
            let depths = depths
                .or(cfg.depths.clone())
                .unwrap_or_else(|| vec![4, 6, 8]);
            let (seed, options) = search_options(&search, &cfg);
            let fmt = format(&io, &cfg, true)?;
            let study = convergence_study(&params, m, &depths, seed, &options)?;
            if let Some(path) = csv.or(cfg.csv.clone()) {
                write_study_csv(File::create(path).map_err(Error::from)?, &study)?;
            }
            match fmt {
                Format::Json => emit(&study, &io, &cfg),
                Format::Csv => Ok(write_study_csv(output(&io, &cfg)?, &study)?),
            }
        }
        Command::Residual {
            params: p,
            input,
            tree: t,
            io,
        } => {
            let cfg = load_config(&io, "residual")?;
            let params = params(&p, &cfg)?;
            let spec = tree(&t, &cfg)?;
            let phi = read_phi::<f64>(&input, &cfg, spec.m)?;
            emit(&evaluate(&phi, &params, &spec)?, &io, &cfg)
        }
    }
}
