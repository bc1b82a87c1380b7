use std::path::PathBuf;
use std::process::ExitCode;

use calib_cli::{commands, CliError};
use clap::{Args, Parser, Subcommand};

/// Extrinsic calibration between a LiDAR and cameras from planar boards.
#[derive(Debug, Parser)]
#[command(name = "calib", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset with ground truth.
    Simulate(Common),
    /// LiDAR-to-camera extrinsics from board corners (Kabsch, averaged over scans).
    #[command(name = "calibrate-3d3d")]
    Calibrate3d3d(Common),
    /// LiDAR-to-camera extrinsics from 2D-3D correspondences (PnP).
    #[command(name = "calibrate-2d3d")]
    Calibrate2d3d(Common),
    /// Camera-to-camera transform through a shared LiDAR.
    Chain(Common),
    /// Merge two clouds with a transform and score the overlap.
    Fuse(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(c) => {
            let o = commands::simulate(&c.config, c.seed, &c.out)?;
            println!(
                "simulated {} files into {}",
                o.written.len(),
                c.out.display()
            );
        }
        Command::Calibrate3d3d(c) => {
            let o = commands::calibrate_3d3d(&c.config, c.seed, &c.out)?;
            println!("{} scans, rmse {:.6} m", o.runs.len(), o.result.rmse);
        }
        Command::Calibrate2d3d(c) => {
            let o = commands::calibrate_2d3d(&c.config, c.seed, &c.out)?;
            println!("rmse {:.4} px", o.result.rmse);
        }
        Command::Chain(c) => {
            let o = commands::chain(&c.config, c.seed, &c.out)?;
            println!("{} -> {}", o.transform.from_frame(), o.transform.to_frame());
        }
        Command::Fuse(c) => {
            let o = commands::fuse_clouds(&c.config, c.seed, &c.out)?;
            println!(
                "{} points, mean distance {:.4} m",
                o.merged_points, o.report.mean_distance
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CALIB_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
