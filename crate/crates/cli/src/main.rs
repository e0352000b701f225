mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CheckArgs, MeshArgs};
use config::CommonArgs;

/// Hybrid high-order solver for `eps Δ²u - Δu = f` on 2D polytopal meshes
/// with curved boundary faces.
#[derive(Parser, Debug)]
#[command(name = "hho2d", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve once and print a CSV row.
    Run(CommonArgs),
    /// Solve on a mesh family for each eps and report convergence rates.
    Convergence(CommonArgs),
    /// Flag boundary-layer cells from the Hessian of the reconstruction.
    FlagLayer(CommonArgs),
    /// Run the property suites.
    Check(CheckArgs),
    /// Print mesh statistics and optionally re-export the mesh.
    Mesh(MeshArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => commands::cmd_run(a),
        Command::Convergence(a) => commands::cmd_convergence(a),
        Command::FlagLayer(a) => commands::cmd_flag_layer(a),
        Command::Check(a) => commands::cmd_check(a),
        Command::Mesh(a) => commands::cmd_mesh(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hho2d: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
