use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chordlab::lab::{self, ExperimentSpec};
use chordlab::theory::TheoryParams;
use chordlab::Error;

/// Chord-under-churn laboratory: simulate, predict, compare.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Worker threads for trials.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Overrides the spec's seed base.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every grid point of an experiment spec and compare with theory.
    Run { spec: PathBuf },
    /// Compare the simulation rows of a result directory with theory.
    Compare { dir: PathBuf },
    /// Write plot-ready series for one quantity, e.g. w1, d2, fk, p_bu2, lookup.
    PlotData {
        dir: PathBuf,
        #[arg(long)]
        quantity: String,
    },
    /// Print predictions for one parameter point.
    Predict {
        /// Key-space size, a power of two.
        #[arg(long = "K", default_value_t = 1 << 20)]
        k: u64,
        #[arg(long = "N", default_value_t = 1000)]
        n: usize,
        #[arg(long = "S", default_value_t = 6)]
        s: usize,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        alpha: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ (Error::Spec(_) | Error::InvalidParameter { .. } | Error::InvalidKeySpace(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// `Ok(false)` means the run finished but some comparison failed.
fn execute(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run { spec } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            if let Some(seed) = cli.seed {
                spec.seed_base = seed;
            }
            if let Some(out) = cli.out {
                spec.out = out;
            }
            let outcome = lab::run(&spec, cli.jobs)?;
            for res in &outcome.results {
                if res.aborted() > 0 {
                    eprintln!(
                        "r={} alpha={} N={}: {} trial(s) abandoned after exhausting the repair budget",
                        res.point.r,
                        res.point.alpha,
                        res.point.nodes,
                        res.aborted()
                    );
                }
            }
            println!("results in {}", outcome.out.display());
            println!("{}", outcome.report.summary());
            Ok(outcome.report.all_passed())
        }
        Command::Compare { dir } => {
            let report = lab::compare(&dir)?;
            for row in report.rows.iter().filter(|r| r.pass == Some(false)) {
                println!(
                    "FAIL {}{} r={} alpha={} N={}: theory {:.4e} sim {:.4e} ({})",
                    row.quantity, row.index, row.r, row.alpha, row.nodes, row.theory, row.sim, row.rule
                );
            }
            println!("{}", report.summary());
            Ok(report.all_passed())
        }
        Command::PlotData { dir, quantity } => {
            let out = cli.out.unwrap_or_else(|| dir.clone());
            for path in lab::emit_plot_data(&dir, &quantity, &out)? {
                println!("{}", path.display());
            }
            Ok(true)
        }
        Command::Predict { k, n, s, r, alpha } => {
            if !k.is_power_of_two() || k < 2 {
                return Err(Error::InvalidParameter { field: "K", reason: "must be a power of two".into() });
            }
            let params = TheoryParams::new(k.trailing_zeros(), n, s, r, alpha)?;
            print!("{}", lab::predict_table(&params)?);
            Ok(true)
        }
    }
}
