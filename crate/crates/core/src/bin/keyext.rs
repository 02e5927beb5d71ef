use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use keyext::classical::{tradeoff_curve, write_curve_csv, CurveKind};
use keyext::harness::{plot_curves, run_attack, sweep, verify, ExperimentConfig, PlotStyle, SweepAxis, VerifyOptions, VerifySuite};
use keyext::Result;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

/// Offline-Simon key recovery experiments on FX-style ciphers.
#[derive(Parser)]
#[command(name = "keyext", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the trials of one config and write the JSON report.
    Attack {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's report path; `-` for stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a config over a list of values of one axis and write a CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, num_args = 0.., allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's csv path; `-` for stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the reference trade-off curves as CSV.
    Bounds {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        kappa: u32,
        /// log2 D values; defaults to 0, 1/2, ..., n.
        #[arg(long, num_args = 1..)]
        grid: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a curve or sweep CSV as SVG.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
    /// Run the invariant suites; exits nonzero if any check fails.
    Verify {
        #[arg(long, num_args = 1..)]
        suite: Vec<VerifySuite>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)?;
        }
        _ => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Attack { config, seed, out } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let report = run_attack(&config)?;
            emit(out.as_deref().or(config.report.as_deref()), &report.to_json()?)?;
            let s = &report.summary;
            eprintln!("{}/{} trials recovered the key", s.successes, s.trials);
            Ok(if s.trials > 0 && s.successes == 0 { EXIT_FAILURE } else { 0 })
        }
        Command::Sweep { config, axis, values, seed, out } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let table = sweep(&config, axis, &values)?;
            emit(out.as_deref().or(config.csv.as_deref()), &table.to_csv()?)?;
            Ok(0)
        }
        Command::Bounds { n, kappa, grid, out } => {
            let grid = if grid.is_empty() { (0..=2 * n).map(|i| i as f64 / 2.0).collect() } else { grid };
            let mut points = Vec::new();
            for kind in CurveKind::ALL {
                points.extend(tradeoff_curve(kind, n, kappa, &grid)?);
            }
            let mut csv = Vec::new();
            write_curve_csv(&points, n, &mut csv)?;
            emit(out.as_deref(), &String::from_utf8_lossy(&csv))?;
            Ok(0)
        }
        Command::Plot { input, out, title } => {
            let csv = fs::read_to_string(&input)?;
            let mut style = PlotStyle::default();
            if let Some(t) = title {
                style.title = t;
            }
            emit(Some(&out), &plot_curves(&csv, &style)?)?;
            Ok(0)
        }
        Command::Verify { suite, seed } => {
            let summary = verify(&suite, &VerifyOptions { seed, ..Default::default() })?;
            let mut json = serde_json::to_string_pretty(&summary)?;
            json.push('\n');
            emit(None, &json)?;
            Ok(if summary.passed { 0 } else { EXIT_FAILURE })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
