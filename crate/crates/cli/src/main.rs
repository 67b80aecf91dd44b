//! `salesgame`: solve, verify and simulate the location-then-price game
//! from the command line.
//!
//! Exit codes: 0 ok, 1 verification failed, 2 bad input, 3 regime or
//! variant mismatch.

mod docs;
mod sweep;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use salesgame::location::solve_spe;
use salesgame::oracle::{simulate, simulate_prices, verify_location_equilibrium, verify_price_equilibrium};
use salesgame::price::{solve, Variant};
use salesgame::{GameError, LocationPair, MarketParams};

use docs::{ClassifyDoc, PriceDoc, SpeDoc};

#[derive(Parser)]
#[command(name = "salesgame", version, about = "Location-then-price competition with informed switchers")]
struct Cli {
    /// Worker threads for scans, simulations and sweeps.
    #[arg(long, global = true, env = "SALESGAME_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report price and location regimes and the threshold locations.
    Classify(InstanceArgs),
    /// Construct the price-subgame equilibrium (with --z1/--z2) or the
    /// location-stage equilibria.
    Solve(InstanceArgs),
    /// Solve, then scan for profitable deviations.
    Verify(VerifyArgs),
    /// Monte Carlo play of the equilibrium.
    Simulate(SimulateArgs),
    /// Evaluate a task over an (x, y) grid and emit CSV.
    Sweep(sweep::SweepArgs),
}

#[derive(Args, Clone)]
struct InstanceArgs {
    /// Mass of informed switchers at 1/2.
    #[arg(long)]
    x: Option<f64>,
    /// Switchers' reservation value.
    #[arg(long)]
    y: Option<f64>,
    #[arg(long, requires = "z2")]
    z1: Option<f64>,
    #[arg(long, requires = "z1")]
    z2: Option<f64>,
    #[arg(long, value_enum, default_value_t = VariantArg::Asymmetric)]
    variant: VariantArg,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 4001)]
    grid: usize,
    /// Deviation budget; defaults to 10·range/grid for prices and 1e-6 for
    /// locations.
    #[arg(long)]
    eps: Option<f64>,
    /// Verify a stored price-equilibrium document instead of solving.
    #[arg(long = "strategy-in", value_name = "PATH")]
    strategy_file: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Asymmetric,
    Symmetric,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Asymmetric => Variant::Asymmetric,
            VariantArg::Symmetric => Variant::SymmetricPair,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<GameError> for Failure {
    fn from(e: GameError) -> Failure {
        let code = match e {
            GameError::VariantUnavailable { .. } | GameError::WrongRegime => 3,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn bad_input(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type Outcome = Result<u8, Failure>;

impl InstanceArgs {
    fn params(&self) -> Result<MarketParams, Failure> {
        match (self.x, self.y) {
            (Some(x), Some(y)) => Ok(MarketParams::new(x, y)?),
            _ => Err(bad_input("--x and --y are required")),
        }
    }

    fn locations(&self) -> Result<Option<LocationPair>, Failure> {
        match (self.z1, self.z2) {
            (Some(z1), Some(z2)) => Ok(Some(LocationPair::new(z1, z2)?)),
            _ => Ok(None),
        }
    }
}

fn emit(out: &Option<PathBuf>, body: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, body).map_err(|e| bad_input(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .map_err(|e| bad_input(format!("stdout: {e}")))
        }
    }
}

fn to_json<T: serde::Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

/// Renders a header and rows as RFC 4180 CSV.
fn csv_table<R: IntoIterator<Item = Vec<String>>>(header: &[&str], rows: R) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn run_classify(args: &InstanceArgs) -> Outcome {
    let params = args.params()?;
    let loc = args.locations()?;
    let doc = ClassifyDoc::new(&params, loc.as_ref());
    emit(&args.out, &to_json(&doc))?;
    Ok(0)
}

fn run_solve(args: &InstanceArgs) -> Outcome {
    let params = args.params()?;
    match args.locations()? {
        Some(loc) => {
            let eq = solve(&params, &loc, args.variant.into())?;
            let body = match args.format {
                Format::Json => to_json(&PriceDoc::new(params, eq)),
                Format::Csv => docs::price_csv(&eq),
            };
            emit(&args.out, &body)?;
        }
        None => {
            let spe = solve_spe(&params)?;
            let body = match args.format {
                Format::Json => to_json(&SpeDoc::new(&params, spe)),
                Format::Csv => docs::spe_csv(&spe),
            };
            emit(&args.out, &body)?;
        }
    }
    Ok(0)
}

fn run_verify(args: &VerifyArgs) -> Outcome {
    if let Some(path) = &args.strategy_file {
        let text = fs::read_to_string(path).map_err(|e| bad_input(format!("{}: {e}", path.display())))?;
        let doc: PriceDoc =
            serde_json::from_str(&text).map_err(|e| bad_input(format!("{}: {e}", path.display())))?;
        let eq = doc.equilibrium;
        let report = verify_price_equilibrium(&doc.params, &eq.locations, &eq, args.grid, args.eps);
        emit(&args.instance.out, &to_json(&report))?;
        return Ok(u8::from(!report.pass));
    }
    let params = args.instance.params()?;
    match args.instance.locations()? {
        Some(loc) => {
            let eq = solve(&params, &loc, args.instance.variant.into())?;
            let report = verify_price_equilibrium(&params, &loc, &eq, args.grid, args.eps);
            emit(&args.instance.out, &to_json(&report))?;
            Ok(u8::from(!report.pass))
        }
        None => {
            let spe = solve_spe(&params)?;
            let eps = args.eps.unwrap_or(1e-6);
            let reports: Vec<_> = spe
                .equilibria
                .iter()
                .map(|eq| verify_location_equilibrium(&params, eq, args.grid, eps))
                .collect();
            let pass = reports.iter().all(|r| r.pass);
            emit(&args.instance.out, &to_json(&reports))?;
            Ok(u8::from(!pass))
        }
    }
}

fn run_simulate(args: &SimulateArgs) -> Outcome {
    if args.samples == 0 {
        return Err(bad_input("--samples must be at least 1"));
    }
    let params = args.instance.params()?;
    let body = match args.instance.locations()? {
        Some(loc) => {
            let eq = solve(&params, &loc, args.instance.variant.into())?;
            to_json(&simulate_prices(&params, &eq, args.samples, args.seed))
        }
        None => {
            let spe = solve_spe(&params)?;
            to_json(&simulate(&params, &spe, args.samples, args.seed))
        }
    };
    emit(&args.instance.out, &body)?;
    Ok(0)
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Classify(a) => run_classify(a),
        Command::Solve(a) => run_solve(a),
        Command::Verify(a) => run_verify(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Sweep(a) => sweep::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
