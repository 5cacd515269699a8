use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use ncsim::output::{fmt_sig9, write_run_dir};
use ncsim::{parse_scenario, preset, run, Error, Mode, ScenarioConfig, SimulationResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Ifs,
    Nonfs,
    Both,
}

/// Simulate control loops sharing a priority-driven bus.
#[derive(Debug, Parser)]
#[command(name = "ncsim", version)]
struct Cli {
    /// Built-in scenario (scenario-1 or scenario-2)
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// JSON scenario file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    mode: ModeArg,
    /// Output directory; each mode gets its own subdirectory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the run length in seconds
    #[arg(long)]
    duration: Option<f64>,
    /// Override the logging grid in seconds
    #[arg(long)]
    log_grid: Option<f64>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::Design { .. } => 2,
        Error::NumericalBlowUp { .. } => 3,
        Error::Io(_) => 1,
        _ => 1,
    }
}

fn load(cli: &Cli) -> Result<ScenarioConfig, Error> {
    let mut cfg = match (&cli.preset, &cli.config) {
        (Some(name), _) => preset(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            parse_scenario(&text)?
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    if let Some(d) = cli.duration {
        cfg.duration = d;
    }
    if let Some(g) = cli.log_grid {
        cfg.log_grid = g;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(label: &str, result: &SimulationResult) {
    let s = &result.summary;
    println!("[{label}]");
    println!(
        "{:>6} {:>14} {:>10} {:>10} {:>8} {:>8}",
        "loop", "iae", "generated", "delivered", "dropped", "late"
    );
    for (i, m) in s.metrics.loops.iter().enumerate() {
        println!(
            "{:>6} {:>14} {:>10} {:>10} {:>8} {:>8}",
            i + 1,
            fmt_sig9(m.iae),
            m.generated,
            m.delivered,
            m.dropped,
            m.late
        );
    }
    println!(
        "  total iae                     {}",
        fmt_sig9(s.total_iae())
    );
    println!(
        "  mean utilization (2nd half)   {}",
        fmt_sig9(s.mean_utilization_final_half)
    );
    println!(
        "  miss ratio (run)              {}",
        fmt_sig9(s.run_miss_ratio)
    );
    println!(
        "  miss ratio (final window)     {}",
        fmt_sig9(s.final_window_miss_ratio)
    );
    println!(
        "  bus busy fraction             {}",
        fmt_sig9(s.bus_busy_fraction)
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let modes: Vec<(Mode, &str)> = match cli.mode {
        ModeArg::Ifs => vec![(Mode::Ifs, "ifs")],
        ModeArg::Nonfs => vec![(Mode::NonFs, "nonfs")],
        ModeArg::Both => vec![(Mode::NonFs, "nonfs"), (Mode::Ifs, "ifs")],
    };

    let results: Vec<Result<SimulationResult, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = modes
            .iter()
            .map(|&(mode, _)| {
                let mut cfg = cfg.clone();
                cfg.mode = mode;
                s.spawn(move || run(&cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });

    let mut code = 0u8;
    for ((_, label), result) in modes.iter().zip(results) {
        match result {
            Ok(result) => {
                if let Err(e) = write_run_dir(&cli.out.join(label), &result) {
                    eprintln!("error: writing {label} output: {e}");
                    code = code.max(1);
                    continue;
                }
                print_summary(label, &result);
            }
            Err(e) => {
                eprintln!("error ({label}): {e}");
                code = code.max(exit_code(&e));
            }
        }
    }
    ExitCode::from(code)
}
