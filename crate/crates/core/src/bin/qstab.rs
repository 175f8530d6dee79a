use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qstab::cli::{run, Command, Overrides, RunConfig, EXIT_CONFIG};
use qstab::io::read_config;

/// Robust mean-square stability certificates for open quantum systems.
#[derive(Parser)]
#[command(name = "qstab", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Check the model structure and the series' self-adjointness.
    Validate,
    /// Run the full certification pipeline and write the certificate.
    Certify,
    /// Write the OPA admissible region curve and a sector-scan mask.
    OpaRegion,
    /// Simulate the master equation and test the mean-square bound.
    Simulate,
    /// Certify over a range of one parameter.
    Sweep,
    /// Verify the Lyapunov operator identities on a truncated Fock space.
    CheckIdentities,
}

#[derive(Args)]
struct Flags {
    /// JSON config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    kappa1: Option<f64>,
    #[arg(long, global = true)]
    kappa2: Option<f64>,
    #[arg(long, global = true)]
    chi: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    delta1: Option<f64>,
    #[arg(long, global = true)]
    delta2: Option<f64>,
    /// Fock truncation per mode.
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long = "t-final", global = true)]
    t_final: Option<f64>,
    /// Points per axis of the sector-scan grid.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Samples along the region curve.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Output path prefix.
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Riccati regularization override.
    #[arg(long, global = true)]
    eps: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let f = cli.flags;
    let file = match f.config.as_deref().map(read_config).transpose() {
        Ok(file) => file,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let command = match cli.command {
        Cmd::Validate => Command::Validate,
        Cmd::Certify => Command::Certify,
        Cmd::OpaRegion => Command::OpaRegion,
        Cmd::Simulate => Command::Simulate,
        Cmd::Sweep => Command::Sweep,
        Cmd::CheckIdentities => Command::CheckIdentities,
    };
    let overrides = Overrides {
        kappa1: f.kappa1,
        kappa2: f.kappa2,
        chi: f.chi,
        gamma: f.gamma,
        delta1: f.delta1,
        delta2: f.delta2,
        dim: f.dim,
        dt: f.dt,
        t_final: f.t_final,
        grid: f.grid,
        samples: f.samples,
        out: f.out,
        seed: f.seed,
        eps: f.eps,
    };
    ExitCode::from(run(&RunConfig::new(command, file, &overrides)) as u8)
}
