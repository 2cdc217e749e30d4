//! `htc`: relaxation bounds, the convex-concave procedure and exactness
//! diagnostics for hydro-thermal coordination cases.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "htc", version, about = "Semidefinite relaxations of hydro-thermal coordination")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Plain lifted relaxation.
    Shor,
    /// Lifted relaxation tightened by McCormick rows.
    #[value(name = "shor+rlt")]
    ShorRlt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    /// Rank-one ratios, maximum generation, sign conditions, definiteness.
    Exactness,
    /// Whether hydro alone could cover each period's load.
    Maxgen,
    /// Off-diagonal signs of the structure matrices.
    Signs,
}

/// Options shared by every command.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Case file (JSON), or `paranaiba` / `mini` for the bundled cases.
    pub case: String,
    /// Directory receiving the artifacts.
    #[arg(long, default_value = "htc-out")]
    pub out: PathBuf,
    /// Primal and dual feasibility tolerance of the solver.
    #[arg(long)]
    pub feas_tol: Option<f64>,
    /// Relative duality-gap tolerance of the solver.
    #[arg(long)]
    pub gap_tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lower bound of a relaxation, its schedule and rank-one report.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "shor+rlt")]
        mode: Mode,
    },
    /// Convex-concave procedure from the tightened relaxation.
    Ccp {
        #[command(flatten)]
        common: Common,
        /// Stop once the change of the thermal cost blocks is at most this.
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        /// Largest number of convexified subproblems.
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        /// Keep the McCormick rows in the convexified subproblems.
        #[arg(long)]
        cuts_in_ccp: bool,
        /// Also write the objective trace as an SVG plot.
        #[arg(long)]
        plot: bool,
    },
    /// Exactness diagnostics.
    Check {
        #[arg(value_enum)]
        which: Check,
        #[command(flatten)]
        common: Common,
    },
    /// Brute-force grid optimum and the bound sandwich.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Grid points per free discharge.
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
    /// Write a relaxation in SDPA sparse format.
    ExportSdpa {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "shor+rlt")]
        mode: Mode,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { common, mode } => commands::solve(&common, mode),
        Command::Ccp { common, eps, max_iter, cuts_in_ccp, plot } => {
            commands::ccp(&common, eps, max_iter, cuts_in_ccp, plot)
        }
        Command::Check { which, common } => commands::check(&common, which),
        Command::Oracle { common, grid } => commands::oracle(&common, grid),
        Command::ExportSdpa { common, mode } => commands::export_sdpa(&common, mode),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
