//! `ringdps` — scenario-driven CLI for the ring-demodulated DPS-QKD link
//! simulator. Subcommands cover single runs, rate/QBER calibration, the
//! budget and fiber sweeps, transmitter comparison, stability traces, and
//! ring spectrum export.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ringdps_core::ring::{self, RingParams};
use ringdps_core::{Result, SimError};
use ringdps_sim::calibrate::{self, CalibrationOutcome};
use ringdps_sim::engine::Prepared;
use ringdps_sim::output;
use ringdps_sim::scenario::ScenarioConfig;
use ringdps_sim::sweeps::{self, EvalMode};

#[derive(Parser)]
#[command(name = "ringdps", about = "Micro-ring DPS-QKD link simulator", version)]
struct Cli {
    /// Rayon worker threads (0 = automatic).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of frame repetitions.
    #[arg(long)]
    reps: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print the sifted-key summary.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Use the analytic evaluator instead of Monte Carlo detection.
        #[arg(long)]
        analytic: bool,
    },
    /// Fit the residual loss and leak fraction to a target rate and QBER.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 25.3e3)]
        target_rate: f64,
        #[arg(long, default_value_t = 0.0401)]
        target_qber: f64,
        /// Write the calibration outcome as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the scenario with calibration constants filled in.
        #[arg(long)]
        write_scenario: Option<PathBuf>,
    },
    /// Sweep the budget-emulating VOA.
    SweepBudget {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 10.0)]
        to: f64,
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        #[arg(long)]
        monte_carlo: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep an SMF28 span length on top of the scenario.
    SweepFiber {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated lengths in meters (0 = no span).
        #[arg(long, default_value = "0,128,256,330,512,768,1024")]
        lengths: String,
        #[arg(long)]
        monte_carlo: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the MZM+PM scenario against a VCSEL scenario back-to-back.
    TxCompare {
        #[command(flatten)]
        common: CommonArgs,
        /// VCSEL scenario JSON file.
        #[arg(long)]
        vcsel_config: PathBuf,
        #[arg(long)]
        monte_carlo: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo acquisition split into per-interval key statistics.
    Stability {
        #[command(flatten)]
        common: CommonArgs,
        /// Interval length, seconds.
        #[arg(long, default_value_t = 0.02)]
        interval: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the fitted through-port transmission spectrum.
    ExportSpectrum {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = -5e9)]
        from_hz: f64,
        #[arg(long, default_value_t = 5e9)]
        to_hz: f64,
        #[arg(long, default_value_t = 1001)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(common: &CommonArgs) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| SimError::config(format!("{}: {e}", common.config.display())))?;
    let mut cfg = ScenarioConfig::from_json(&text)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = common.reps {
        cfg.n_repetitions = reps;
    }
    Ok(cfg)
}

fn write_file(path: &PathBuf, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| SimError::config(format!("{}: {e}", path.display())))
}

fn eval_mode(monte_carlo: bool) -> EvalMode {
    if monte_carlo {
        EvalMode::MonteCarlo
    } else {
        EvalMode::Analytic
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| SimError::config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Run { common, analytic } => {
            let cfg = load_config(&common)?;
            let prep = Prepared::build(&cfg)?;
            let (outcome, sync_line) = if analytic {
                (prep.analytic(0.0, 0.0), String::from("synchronized=analytic"))
            } else {
                let (o, sync) = prep.monte_carlo(0.0, 0.0, 0)?;
                (o, format!("synchronized={} confidence={:.2}", sync.synchronized, sync.confidence))
            };
            let s = outcome.stats;
            println!("raw_rate_bps={:.3}", s.raw_rate_bps);
            println!("qber={:.6}", s.qber);
            println!("n_sifted={} n_errors={}", s.n_sifted, s.n_errors);
            println!("pass={}", outcome.pass);
            println!("secured_capacity_bps={:.3e}", outcome.secured_capacity_bps);
            println!("{sync_line}");
            if prep.vcsel_clipped {
                eprintln!("warning: VCSEL drive clipped at zero current");
            }
        }
        Command::Calibrate { common, target_rate, target_qber, out, write_scenario } => {
            let cfg = load_config(&common)?;
            let cal = calibrate::calibrate(&cfg, target_rate, target_qber)?;
            print_calibration(&cal);
            if let Some(path) = out {
                write_file(
                    &path,
                    &serde_json::to_string_pretty(&cal)
                        .expect("calibration serialization cannot fail"),
                )?;
            }
            if let Some(path) = write_scenario {
                let mut updated = cfg;
                calibrate::apply(&mut updated, &cal);
                write_file(&path, &updated.to_json())?;
            }
        }
        Command::SweepBudget { common, from, to, step, monte_carlo, out } => {
            if !(step > 0.0) || to < from {
                return Err(SimError::config("need step > 0 and to >= from"));
            }
            let cfg = load_config(&common)?;
            let prep = Prepared::build(&cfg)?;
            let n = ((to - from) / step).round() as usize;
            let budgets: Vec<f64> = (0..=n).map(|k| from + k as f64 * step).collect();
            let rows = sweeps::sweep_budget(&prep, &budgets, eval_mode(monte_carlo))?;
            write_file(&out, &output::budget_csv(&rows))?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::SweepFiber { common, lengths, monte_carlo, out } => {
            let cfg = load_config(&common)?;
            let prep = Prepared::build(&cfg)?;
            let lengths: Vec<f64> = lengths
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| SimError::config(format!("length '{s}': {e}")))
                })
                .collect::<Result<_>>()?;
            let rows = sweeps::sweep_fiber(&prep, &lengths, eval_mode(monte_carlo))?;
            write_file(&out, &output::fiber_csv(&rows))?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::TxCompare { common, vcsel_config, monte_carlo, out } => {
            let ideal = load_config(&common)?;
            let vcsel_text = fs::read_to_string(&vcsel_config)
                .map_err(|e| SimError::config(format!("{}: {e}", vcsel_config.display())))?;
            let vcsel = ScenarioConfig::from_json(&vcsel_text)?;
            let rows = sweeps::tx_compare(&ideal, &vcsel, eval_mode(monte_carlo))?;
            write_file(&out, &output::tx_csv(&rows))?;
            for r in &rows {
                println!(
                    "{}: rate={:.3} b/s qber={:.4} pass={}",
                    r.label, r.raw_rate_bps, r.qber, r.pass
                );
            }
        }
        Command::Stability { common, interval, out } => {
            let cfg = load_config(&common)?;
            let prep = Prepared::build(&cfg)?;
            let series = prep.stability(interval, 0)?;
            write_file(&out, &output::stability_csv(&series))?;
            println!("wrote {} intervals to {}", series.len(), out.display());
        }
        Command::ExportSpectrum { common, from_hz, to_hz, points, out } => {
            if points < 2 || to_hz <= from_hz {
                return Err(SimError::config("need at least 2 points and to > from"));
            }
            let cfg = load_config(&common)?;
            let spec = cfg.ring.spectral_spec();
            let fitted = ring::fit_params(&spec)?;
            let params = RingParams { detune_hz: cfg.ring.detune_hz, ..fitted };
            let rows: Vec<(f64, f64)> = (0..points)
                .map(|k| {
                    let f = from_hz + (to_hz - from_hz) * k as f64 / (points - 1) as f64;
                    let t2 = ring::cw_transmission(&params, f - params.detune_hz).norm_sqr();
                    (f, 10.0 * t2.log10() - spec.il_db)
                })
                .collect();
            write_file(&out, &output::spectrum_csv(&rows))?;
            println!("wrote {} points to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn print_calibration(cal: &CalibrationOutcome) {
    println!("residual_loss_db={:.6}", cal.residual_loss_db);
    println!("leak_fraction={:.6e}", cal.leak_fraction);
    println!("achieved_rate_bps={:.3}", cal.achieved_rate_bps);
    println!("achieved_qber={:.6}", cal.achieved_qber);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ SimError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e @ SimError::Numerical(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
