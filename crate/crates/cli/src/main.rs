use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use declqr_cli::analysis::AnalysisOptions;
use declqr_cli::output::fmt_g;
use declqr_cli::{commands, load_scenario};

#[derive(Parser)]
#[command(name = "declqr", version, about = "Decentralized LQR synthesis and robustness analysis")]
struct Cli {
    /// Scenario file, or a built-in: counterexample, counterexample-rho,
    /// diamond-random (parameters as in `counterexample:beta=0.5,rho=10`)
    #[arg(long, global = true, default_value = "counterexample")]
    scenario: String,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Frequency grid size for the Kalman checks
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Seed for randomly generated scenarios
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Absolute tolerance on gain-margin endpoints
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the decentralized controller
    Synth,
    /// Full robustness analysis with text and JSON reports
    Analyze,
    /// Stability sweep over two parameters (CSV + SVG heatmap)
    Sweep,
    /// Gain and phase margins of every input channel
    Margins,
}

fn run(cli: Cli) -> Result<ExitCode> {
    let scenario = load_scenario(&cli.scenario, cli.seed)?;
    let dir = commands::out_dir(&scenario, cli.out.as_deref());
    let mut opts = AnalysisOptions::for_scenario(&scenario);
    if let Some(n) = cli.grid {
        anyhow::ensure!(n > 0, "--grid must be positive");
        opts.grid_points = n;
    }
    if let Some(t) = cli.tol {
        anyhow::ensure!(t > 0.0, "--tol must be positive");
        opts.gain_tol = t;
    }
    match cli.command {
        Command::Synth => {
            let (text, path) = commands::synth(&scenario, &dir)?;
            print!("{text}");
            eprintln!("wrote {}", path.display());
        }
        Command::Analyze => {
            let (report, txt, json) = commands::analyze(&scenario, &opts, &dir)?;
            print!("{}", report.to_text());
            eprintln!("wrote {} and {}", txt.display(), json.display());
            if report.hypothesis_violated() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Sweep => {
            let (csv, svg, stable, total) = commands::sweep(&scenario, &dir)?;
            println!("{stable} of {total} cells stable");
            eprintln!("wrote {} and {}", csv.display(), svg.display());
        }
        Command::Margins => {
            let (doc, path) = commands::margins(&scenario, &opts, &dir)?;
            for g in &doc.gain_margins {
                println!(
                    "channel {}: gain ({}, {}]{}",
                    g.channel,
                    fmt_g(g.k_lo),
                    fmt_g(g.k_hi),
                    if g.upper_window_limited { " (window max)" } else { "" }
                );
            }
            for p in &doc.phase_margins {
                match (&p.phase_deg, &p.error) {
                    (Some(phi), _) => println!("channel {}: phase +/-{} deg", p.channel, fmt_g(*phi)),
                    (None, Some(e)) => println!("channel {}: phase unavailable ({e})", p.channel),
                    _ => {}
                }
            }
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
