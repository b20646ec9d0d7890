use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qpcd::config::PipelineConfig;
use qpcd::pipeline::{cmd_detect, cmd_eval, cmd_generate, cmd_plot, with_thread_limit};

/// Change point detection in quasi-periodic signals.
///
/// Exit status: 0 no change detected, 2 change detected (detect), 1 error.
/// QPCD_THREADS caps the number of worker threads.
#[derive(Parser)]
#[command(name = "qpcd", version)]
struct Cli {
    /// JSON configuration file; defaults apply to absent keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for corpus generation and the bootstrap.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Dotted-key override, e.g. `detector.stride=8`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VAL")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write an SVG plot per detection.
    #[arg(long, global = true)]
    svg: bool,
    /// Solve every transport problem exactly.
    #[arg(long = "exact-ot", global = true)]
    exact_ot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus with a manifest.
    Generate {
        #[arg(long, default_value_t = 42)]
        count: usize,
    },
    /// Run detection on a CSV file or a corpus directory.
    Detect { input: PathBuf },
    /// Score saved results against a corpus manifest.
    Eval {
        corpus: PathBuf,
        /// Results directory; repeat for several runs.
        #[arg(long = "results", required = true)]
        results: Vec<PathBuf>,
    },
    /// Render the SVG of a saved result.
    Plot { result: PathBuf },
}

fn config(cli: &Cli) -> qpcd::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.svg {
        cfg.io.svg = true;
    }
    if cli.exact_ot {
        cfg.detector.exact = Some(true);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> qpcd::Result<u8> {
    let cfg = config(cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Generate { count } => {
            let dir = out.unwrap_or(std::path::Path::new("corpus"));
            let m = with_thread_limit(|| cmd_generate(&cfg, *count, dir))??;
            println!("wrote {} series to {}", m.entries.len(), dir.display());
            Ok(0)
        }
        Command::Detect { input } => {
            let reports = with_thread_limit(|| cmd_detect(&cfg, input, out))??;
            let mut code = 0;
            for r in &reports {
                println!(
                    "{}\tT={:.6e}\tthreshold={:.6e}\tchange={}\tflagged={:?}",
                    r.name,
                    r.result.statistic.value,
                    r.result.threshold,
                    r.result.change_detected,
                    r.result.flagged
                );
                if r.exit_code() == 2 {
                    code = 2;
                }
            }
            if out.is_none() && reports.len() == 1 {
                println!("{}", reports[0].to_json());
            }
            Ok(code)
        }
        Command::Eval { corpus, results } => {
            let report = cmd_eval(corpus, results, out)?;
            print!("{}", report.to_table());
            Ok(0)
        }
        Command::Plot { result } => {
            let path = cmd_plot(result, out)?;
            println!("wrote {}", path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
