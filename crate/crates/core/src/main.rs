use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gomt::cli::{exit_code, run, Overrides, RunSummary, Scenario, OUTPUT_DIR_ENV};

/// Runs a steering, ground-cost, transport, or ensemble scenario and writes
/// its CSV and JSON artifacts.
#[derive(Debug, Parser)]
#[command(name = "gomt", version)]
struct Args {
    /// Scenario file (TOML).
    scenario: PathBuf,

    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory; overrides the scenario's `output_dir`.
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = Scenario::load(&args.scenario).and_then(|mut scenario| {
        scenario.apply(&Overrides {
            seed: args.seed,
            output_dir: args.out.clone(),
        });
        let out = scenario.resolved_output_dir();
        run(&scenario, &out).map(|summary| (summary, out))
    });
    match result {
        Ok((summary, out)) => {
            report(&summary);
            println!("artifacts written to {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gomt: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn report(summary: &RunSummary) {
    match summary {
        RunSummary::Steer(s) => println!(
            "steer: cost {:.9} terminal error {:.3e}",
            s.total_cost, s.terminal_error
        ),
        RunSummary::GroundCost(g) => println!(
            "ground cost: numeric {:.9} in [{:.9}, {:.9}] verdict {:?}",
            g.numeric_cost, g.lower_bound, g.upper_bound, g.verdict
        ),
        RunSummary::Transport(t) => println!(
            "transport: cost {:.9} via {} (residuals {:.1e}/{:.1e})",
            t.coupling.transport_cost,
            t.coupling.solver,
            t.coupling.row_residual,
            t.coupling.col_residual
        ),
        RunSummary::Ensemble(e) => println!(
            "ensemble: realized {:.9} / transport {:.9} = {:.6}, {} failures",
            e.realized_cost,
            e.transport_cost,
            e.cost_ratio,
            e.failures.len()
        ),
    }
}
