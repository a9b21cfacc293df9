use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use angio_cli::commands::{cli_analyze_segment, cli_auto, cli_eval_phantoms, cli_prepare, load_config, parse_point};
use angio_cli::service::serve;
use angio_core::evalmetrics::MATCH_RADIUS;
use angio_core::Point2;

#[derive(Parser)]
#[command(name = "angio", version, about = "Coronary angiogram stenosis analysis")]
struct Cli {
    /// `key = value` configuration file; defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `rng_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Preprocess, contour and detect ridges; writes the intermediate images.
    Prepare { image: PathBuf },
    /// Whole-tree tracking and stenosis detection.
    Auto { image: PathBuf },
    /// Track and grade the segment between two points.
    AnalyzeSegment {
        image: PathBuf,
        #[arg(long, value_parser = parse_point)]
        start: Point2,
        #[arg(long, value_parser = parse_point)]
        end: Point2,
    },
    /// Evaluate detection and diameters on the synthetic phantom suite.
    EvalPhantoms {
        #[arg(long, default_value_t = MATCH_RADIUS)]
        radius: f64,
        /// Also write each phantom as PGM with its truth JSON.
        #[arg(long)]
        save_phantoms: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::Prepare { image } => cli_prepare(&image, &cfg, &cli.out),
        Command::Auto { image } => {
            let report = cli_auto(&image, &cfg, &cli.out)?;
            println!(
                "{} segments, {} findings -> {}",
                report.segments.len(),
                report.findings.len(),
                cli.out.display()
            );
            Ok(())
        }
        Command::AnalyzeSegment { image, start, end } => {
            let route = cli_analyze_segment(&image, start, end, &cfg, &cli.out)?;
            println!(
                "{} points ({:?}), {} findings -> {}",
                route.route.len(),
                route.chosen_direction,
                route.findings.len(),
                cli.out.display()
            );
            Ok(())
        }
        Command::EvalPhantoms { radius, save_phantoms } => {
            let eval = cli_eval_phantoms(&cfg, cfg.rng_seed, radius, &cli.out, save_phantoms)?;
            print!("{}", eval.to_text());
            Ok(())
        }
        Command::Serve { port, static_dir } => tokio::runtime::Runtime::new()?.block_on(serve(port, static_dir, cfg)),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
