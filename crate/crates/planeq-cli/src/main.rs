use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use planeq_cli::commands::{self, InvariantFailure};
use planeq_cli::config::{ExperimentConfig, InvalidConfig, Overrides};
use planeq_cli::output::OutDir;
use planeq_cli::suite::{run_suite, SuiteOptions};

const EXIT_INVARIANT: u8 = 2;
const EXIT_UNSUPPORTED: u8 = 3;

#[derive(Parser)]
#[command(name = "planeq", version, about = "Equilibrium measures, planar orthogonal polynomials and critical trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Quadrature orders as "nr,nt,eps" (nt = 0 for automatic).
    #[arg(long, global = true)]
    quad: Option<String>,
    /// Polynomial degree n.
    #[arg(long, global = true)]
    degree: Option<usize>,
    /// Ratio N/n.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Support geometry: JSON, boundary CSV and SVG.
    Support,
    /// Orthogonal polynomials up to the degree.
    Orthopoly {
        /// Also write the quadrature grid as a binary cache.
        #[arg(long)]
        save_grid: bool,
    },
    /// Zeros of P_n.
    Zeros,
    /// Checks of the dbar problem for Y_k.
    DbarCheck {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Critical trajectories of the Schwarz function jump.
    Trajectory,
    /// Weighted Fekete points.
    Fekete {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Zero potential against the equilibrium potential.
    Compare,
    /// Runs the acceptance suite.
    Verify {
        /// Fast subset only.
        #[arg(long)]
        quick: bool,
        /// Perturb the closed-form geometries (negative control).
        #[arg(long)]
        corrupt_geometry: bool,
    },
    /// All stages for one configuration.
    Pipeline,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<InvariantFailure>() {
            return EXIT_INVARIANT;
        }
        if cause.is::<InvalidConfig>() {
            return EXIT_UNSUPPORTED;
        }
        if let Some(err) = cause.downcast_ref::<planeq::Error>() {
            use planeq::Error::*;
            if matches!(err, Unsupported(_) | NotImplemented(_) | InvalidParameter(_) | InvalidOrders(_) | NoRoot(_) | Degenerate(_)) {
                return EXIT_UNSUPPORTED;
            }
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    cfg.apply(&Overrides {
        quad: cli.quad.clone(),
        degree: cli.degree,
        gamma: cli.gamma,
        seed: cli.seed,
    });
    cfg.validate()?;
    let mut out = OutDir::create(&cli.out)?;
    match cli.command {
        Command::Support => commands::support(&cfg, &mut out),
        Command::Orthopoly { save_grid } => commands::orthopoly(&cfg, &mut out, save_grid),
        Command::Zeros => commands::zeros(&cfg, &mut out),
        Command::DbarCheck { k } => commands::dbar_check(&cfg, &mut out, k.unwrap_or(cfg.dbar_k)),
        Command::Trajectory => commands::trajectory(&cfg, &mut out),
        Command::Fekete { n, seeds } => commands::fekete(&cfg, &mut out, n.unwrap_or(cfg.fekete_n), seeds.unwrap_or(cfg.fekete_seeds)),
        Command::Compare => commands::compare(&cfg, &mut out),
        Command::Verify { quick, corrupt_geometry } => {
            let opts = SuiteOptions {
                quick,
                corrupt_geometry,
                seed: cfg.seed,
            };
            let report = run_suite(&opts, |o| println!("{}", o.line()));
            out.json("verify.json", &report)?;
            if report.pass {
                Ok(())
            } else {
                Err(InvariantFailure(report.failed.join(", ")).into())
            }
        }
        Command::Pipeline => commands::pipeline(&cfg, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
