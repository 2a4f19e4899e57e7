//! `kvqe`: VQE, potential-energy scans, quasiparticle bands and diagnostics
//! for crystal integral files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kvqe::AnsatzVariant;

mod commands;
mod config;
mod svg;

#[derive(Parser, Debug)]
#[command(name = "kvqe", version, about = "UCC-VQE toolkit for periodic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent points
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// bUCCSD-Real, iUCCSD, bUCCD-Real or iUCCD
    #[arg(long, global = true)]
    pub variant: Option<AnsatzVariant>,
    /// Keep only momentum-conserving excitations
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub momentum_filter: Option<bool>,
    /// Start from a seeded random perturbation instead of zero amplitudes
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub gtol: Option<f64>,
    /// Skip SVG output
    #[arg(long, global = true)]
    pub no_svg: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimize the ansatz for one integral file
    Vqe {
        files: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Scan several geometries and compare against HF and FCI
    Pec {
        files: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Quasiparticle bands from the VQE state by subspace expansion
    Bands {
        files: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Crystal momentum and fidelity diagnostics
    Diag {
        files: Vec<PathBuf>,
        /// Reuse parameters from a vqe_result.json
        #[arg(long, conflicts_with = "hf")]
        result: Option<PathBuf>,
        /// Diagnose the Hartree-Fock state
        #[arg(long)]
        hf: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Check integral files and, optionally, the reference manifest
    Validate {
        files: Vec<PathBuf>,
        /// Verify checksums and references in a refdata directory
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Vqe { files, common } => commands::vqe(&common, &files),
        Command::Pec { files, common } => commands::pec(&common, &files),
        Command::Bands { files, common } => commands::bands(&common, &files),
        Command::Diag { files, result, hf, common } => {
            let source = match (result, hf) {
                (Some(p), _) => commands::DiagSource::Result(p),
                (None, true) => commands::DiagSource::HartreeFock,
                (None, false) => commands::DiagSource::Inline,
            };
            commands::diag(&common, &files, source)
        }
        Command::Validate { files, manifest } => commands::validate(&files, manifest.as_deref()),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
