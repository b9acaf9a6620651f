//! `sepvar`: build, verify and compare separable constant-curvature metrics
//! from forest specifications.

mod report;
mod run;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sepvar::scalar::Tag;

#[derive(Parser, Debug)]
#[command(name = "sepvar", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed for every sampled point and momentum.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Number of random sample points.
    #[arg(long, global = true, default_value_t = 10)]
    pub samples: usize,
    /// Scalar tag: `exact` rationals or `float` complex doubles.
    #[arg(long, global = true, default_value = "exact")]
    pub tag: Tag,
    /// Tolerance for float residuals relative to `1 + scale`; exact residuals must vanish.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the forest conditions.
    Validate { spec: PathBuf },
    /// Coordinate layout, curvature and metric entries.
    Build {
        spec: PathBuf,
        /// Comma-separated rational point; random points otherwise.
        #[arg(long)]
        point: Option<String>,
    },
    /// Constant-curvature residual.
    Curvature { spec: PathBuf },
    /// Every geometric residual suite.
    Verify { spec: PathBuf },
    /// Killing equation for every family and commutation of the integrals.
    Killing { spec: PathBuf },
    /// Closed-form Stäckel matrix and the residual of `S·I = P`.
    Stackel {
        spec: PathBuf,
        #[arg(long)]
        point: Option<String>,
    },
    /// Flat or generalised flat coordinates with their Gram matrix.
    Flat {
        spec: PathBuf,
        /// Rewrite complex coordinates as real combinations.
        #[arg(long)]
        real: bool,
    },
    /// Decide whether two specs are related by moves, with a witness.
    Equiv { first: PathBuf, second: PathBuf },
    /// Canonical representative of the equivalence class.
    Canon { spec: PathBuf },
    /// Integrate the geodesic flow and report the drift of every integral.
    Geodesic {
        spec: PathBuf,
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        momentum: Option<String>,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, default_value_t = 1.0)]
        time: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run::run(&cli) {
        Ok(report) => {
            let text = match cli.format {
                Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
                Format::Text => report.to_text(),
            };
            // a closed pipe is not an error worth reporting
            let _ = std::io::stdout().write_all(text.as_bytes());
            if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
