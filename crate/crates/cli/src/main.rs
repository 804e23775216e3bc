//! `ffnet`: analyze, reduce, and generate layered agent networks, sweep
//! random ensembles, simulate the final estimator, and run the self-checks.
//!
//! Exit codes: 0 success (and "ideal" for analyze), 1 definite negative
//! verdict (non-ideal network, failed verification), 2 any error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ffnet_core::ensemble::{self, SweepSpec};
use ffnet_core::net::{self, PrecisionVector};
use ffnet_core::{analysis, estimation, oracle, report, VerifyLevel};

/// Default master seed, fixed so identical invocations produce identical
/// output files ("ffnet" packed into the high bytes). Never wall-clock.
const DEFAULT_SEED: u64 = 0x6666_6e65_7400_0001;

#[derive(Parser)]
#[command(name = "ffnet", version, about = "Exact estimation analysis for layered agent networks")]
struct Cli {
    /// Master seed: a u64 (decimal or 0x-hex), or "random" to draw one and
    /// print it on stderr. Default: 0x66666e6574000001.
    #[arg(long, global = true)]
    seed: Option<String>,

    /// Worker threads for sweeps and enumerations (default: all cores).
    /// Results are identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output format where a choice exists (sweep: csv default, json
    /// optional; everything else prints json).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full report on one network file: validity, final weights and
    /// variance, ideality verdict with certificate, motif witness.
    /// Exit 0 ideal, 1 non-ideal, 2 error.
    Analyze {
        /// Network JSON file.
        network: PathBuf,
    },
    /// Remove redundant listening from a three-layer network and write the
    /// result; the final estimate is unchanged.
    Reduce {
        network: PathBuf,
        out: PathBuf,
    },
    /// Write a synthetic network file.
    Generate {
        #[command(subcommand)]
        kind: Generate,
    },
    /// Measure the fraction of ideal networks over a grid of layer sizes
    /// and edge probabilities.
    Sweep(SweepArgs),
    /// Monte Carlo run of the final estimator on one network.
    Simulate(SimulateArgs),
    /// Run the self-check suite; exit 0 only if every check passes.
    Verify {
        #[arg(value_enum, default_value_t = Level::Quick)]
        level: Level,
    },
}

#[derive(Subcommand)]
enum Generate {
    /// Hub-and-spokes: n relays each hear a shared central source plus one
    /// private source (n+1 sources total), all at unit precision.
    Ring {
        out: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Each cross-layer edge drawn independently with probability p.
    Random {
        out: PathBuf,
        /// Comma-separated explicit layer sizes, e.g. 100,90.
        #[arg(long, value_delimiter = ',', required = true)]
        layers: Vec<usize>,
        #[arg(long)]
        p: f64,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep spec {layer_size_grid, probabilities, trials,
    /// master_seed}; the file's master_seed wins over --seed.
    #[arg(long, conflicts_with_all = ["layers", "p", "trials"])]
    spec: Option<PathBuf>,
    /// Semicolon-separated size lists, e.g. "20,18;20,22".
    #[arg(long)]
    layers: Option<String>,
    /// Comma-separated edge probabilities.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    /// Networks drawn per (sizes, p) cell.
    #[arg(long)]
    trials: Option<u64>,
    /// Output file (written whole, then renamed into place). Default: stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    network: PathBuf,
    /// True value of the observed scalar.
    #[arg(long, default_value_t = 0.0)]
    true_s: f64,
    #[arg(long)]
    trials: u64,
    /// Comma-separated per-source measurement biases (default: unbiased).
    #[arg(long, value_delimiter = ',')]
    bias: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Quick,
    Full,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("setting up the thread pool")?;
    }
    let seed = resolve_seed(cli.seed.as_deref())?;
    let format = cli.format;
    if format == Some(Format::Csv) && !matches!(cli.cmd, Cmd::Sweep(_)) {
        bail!("csv output is only available for sweep");
    }

    match cli.cmd {
        Cmd::Analyze { network } => {
            let (network, precisions) = load(&network)?;
            let report = report::analyze(&network, &precisions)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.ideal {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Cmd::Reduce { network, out } => {
            let (network, precisions) = load(&network)?;
            let reduced = analysis::reduce(&network)?;
            save(&reduced, &precisions, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Generate { kind } => {
            let (network, out) = match kind {
                Generate::Ring { out, n } => (analysis::ring_network(n)?, out),
                Generate::Random { out, layers, p } => {
                    (ensemble::random_network(&layers, p, seed)?, out)
                }
            };
            let precisions = PrecisionVector::ones(network.layer_size(1));
            save(&network, &precisions, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Sweep(args) => {
            let spec = sweep_spec(&args, seed)?;
            let results = ensemble::sweep(&spec)?;
            let bytes = if format == Some(Format::Json) {
                let mut text = serde_json::to_string_pretty(&results)?;
                text.push('\n');
                text.into_bytes()
            } else {
                let mut buf = Vec::new();
                ensemble::write_sweep_csv(&mut buf, &results, spec.master_seed)?;
                buf
            };
            match args.out {
                Some(path) => write_atomic(&path, &bytes)?,
                None => print!("{}", String::from_utf8_lossy(&bytes)),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Simulate(args) => {
            let (network, precisions) = load(&args.network)?;
            let summary = estimation::simulate(
                &network,
                &precisions,
                args.true_s,
                args.bias.as_deref(),
                args.trials,
                seed,
            )?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { level } => {
            let level = match level {
                Level::Quick => VerifyLevel::Quick,
                Level::Full => VerifyLevel::Full,
            };
            let report = oracle::run_verification(level);
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn resolve_seed(arg: Option<&str>) -> Result<u64> {
    let Some(arg) = arg else {
        return Ok(DEFAULT_SEED);
    };
    if arg == "random" {
        let seed: u64 = rand::random();
        eprintln!("seed: {seed}");
        return Ok(seed);
    }
    let parsed = match arg.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => arg.parse(),
    };
    parsed.with_context(|| format!("bad seed {arg:?} (want a u64 or \"random\")"))
}

fn load(path: &Path) -> Result<(net::LayeredNetwork, PrecisionVector)> {
    net::load(path).with_context(|| format!("reading {}", path.display()))
}

fn save(network: &net::LayeredNetwork, precisions: &PrecisionVector, path: &Path) -> Result<()> {
    net::save(network, precisions, path).with_context(|| format!("writing {}", path.display()))
}

fn sweep_spec(args: &SweepArgs, seed: u64) -> Result<SweepSpec> {
    if let Some(path) = &args.spec {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let spec: SweepSpec =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(spec);
    }
    let grid = args
        .layers
        .as_deref()
        .context("sweep needs --spec or --layers/--p/--trials")?;
    let layer_size_grid = grid
        .split(';')
        .map(parse_sizes)
        .collect::<Result<Vec<_>>>()?;
    if args.p.is_empty() {
        bail!("sweep needs at least one probability in --p");
    }
    Ok(SweepSpec {
        layer_size_grid,
        probabilities: args.p.clone(),
        trials: args.trials.context("sweep needs --trials")?,
        master_seed: seed,
    })
}

fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .with_context(|| format!("bad layer size {s:?}"))
        })
        .collect()
}

/// Full write to a sibling temp file, then rename, so a crash never leaves a
/// truncated output behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let ctx = || format!("writing {}", path.display());
    fs::write(&tmp, bytes).with_context(ctx)?;
    fs::rename(&tmp, path).with_context(ctx)?;
    Ok(())
}
