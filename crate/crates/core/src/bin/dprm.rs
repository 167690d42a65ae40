use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use dp_robust_mean::datagen::{corrupt, sample_gaussian, CountMode};
use dp_robust_mean::estimators::{dp_mean_with, dp_robust_mean_with, dp_winsorized_mean_with};
use dp_robust_mean::harness::{
    calibrate_c, excess_error_table, run_sweep, write_records_csv, write_table_csv, AdversarySpec, ExperimentConfig,
};
use dp_robust_mean::{Dataset64, Error, Method, PrivacyParams, ReleaseMode, RobustConfig, Vector, WinsorizeConfig};

const SEED_ENV: &str = "DPRM_SEED";

#[derive(Parser)]
#[command(name = "dprm", version, about = "Differentially private robust mean estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a (possibly corrupted) N(0, I) dataset as headerless CSV.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        /// Corruption level; 0 disables corruption.
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        /// none | constant_cluster[:m] | directional_spread[:m] | subtractive_only
        #[arg(long, default_value = "constant_cluster:10")]
        adversary: String,
        /// Draw the corrupted count from Binomial(n, gamma) or fix it at round(gamma n).
        #[arg(long, value_enum, default_value_t = Count::Binomial)]
        count: Count,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the corruption plan as JSON to this path.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Estimate one private mean from a CSV dataset; prints one JSON line.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "dp_robust")]
        method: String,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        /// Confidence parameter, also the Gaussian mechanism's delta.
        #[arg(long, default_value_t = 0.05)]
        tau: f64,
        #[arg(long, default_value_t = 1.0)]
        c_thresh: f64,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 10.0)]
        range_bound: f64,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        /// Include the pre-noise mean and filter diagnostics (NOT private).
        #[arg(long)]
        diagnostic: bool,
    },
    /// Run a parameter sweep from a config file; writes per-trial CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Records CSV path; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the per-(n, d) aggregate table here.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Overrides base_seed from the config file.
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
        /// Record wall-clock runtimes (output is then not reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Print the calibrated threshold constant C.
    Calibrate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        #[arg(long, default_value_t = 0.95)]
        quantile: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Count {
    Binomial,
    Fixed,
}

/// Usage and configuration problems exit with 1, everything else with 2.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Parse(_) | Error::Domain(_) => 1,
        _ => 2,
    }
}

fn output(path: Option<&PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Synth {
            n,
            d,
            gamma,
            adversary,
            count,
            seed,
            out,
            plan,
        } => {
            let truth = Vector::<f64>::zeros(d.max(1));
            let clean = sample_gaussian(n, d, &truth, seed)?;
            let spec: AdversarySpec = adversary.parse()?;
            let (data, corruption) = match spec.build(d) {
                Some(adv) if gamma > 0.0 => {
                    let mode = match count {
                        Count::Binomial => CountMode::Binomial,
                        Count::Fixed => CountMode::Fixed,
                    };
                    let (data, p) = corrupt(&clean, &truth, gamma, &adv, mode, seed.wrapping_add(1))?;
                    (data, Some(p))
                }
                _ => (clean, None),
            };
            let mut w = output(out.as_ref())?;
            data.write_csv(&mut w)?;
            w.flush()?;
            if let Some(path) = plan {
                let body = serde_json::to_string(&corruption).map_err(|e| Error::Parse(e.to_string()))?;
                std::fs::write(path, body + "\n")?;
            }
        }
        Command::Estimate {
            input,
            method,
            gamma,
            tau,
            c_thresh,
            epsilon,
            alpha,
            range_bound,
            seed,
            diagnostic,
        } => {
            let method: Method = method.parse()?;
            let data = Dataset64::read_csv(BufReader::new(File::open(&input)?))?;
            let mode = if diagnostic {
                ReleaseMode::Diagnostic
            } else {
                ReleaseMode::Release
            };
            let report = match method {
                Method::DpRobust => {
                    let cfg = RobustConfig::new(gamma, tau, c_thresh)?;
                    dp_robust_mean_with(&data, &cfg, epsilon, seed, mode)?
                }
                Method::DpPlain => dp_mean_with(&data, tau, c_thresh, epsilon, seed, mode)?,
                Method::DpWinsorized => {
                    let wcfg = WinsorizeConfig { alpha, range_bound };
                    let params = PrivacyParams::new(epsilon, tau)?;
                    dp_winsorized_mean_with(&data, &wcfg, &params, seed, mode)?
                }
            };
            for w in &report.warnings {
                log::warn!("{w}");
            }
            let line = json!({
                "method": method,
                "params": {
                    "n": data.n(), "d": data.d(), "gamma": gamma, "tau": tau, "c_thresh": c_thresh,
                    "epsilon": epsilon, "alpha": alpha, "range_bound": range_bound, "seed": seed,
                    "diagnostic": diagnostic,
                },
                "result": report,
            });
            println!("{line}");
        }
        Command::Sweep {
            config,
            out,
            table,
            seed,
            timing,
        } => {
            let text =
                std::fs::read_to_string(&config).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
            let mut cfg = ExperimentConfig::parse(&text)?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            cfg.record_timing |= timing;
            let records = run_sweep(&cfg)?;
            let mut w = output(out.as_ref())?;
            write_records_csv(&records, &mut w)?;
            w.flush()?;
            if let Some(path) = table {
                write_table_csv(&excess_error_table(&records), BufWriter::new(File::create(path)?))?;
            }
            let failed = records.iter().filter(|r| !r.is_ok()).count();
            if failed > 0 {
                log::warn!("{failed} of {} trials failed", records.len());
            }
        }
        Command::Calibrate {
            n,
            d,
            gamma,
            quantile,
            trials,
            seed,
        } => {
            let cal = calibrate_c(n, d, gamma, quantile, trials, seed)?;
            if cal.saturated {
                log::warn!("requested quantile not reached; pass fraction {}", cal.pass_fraction);
            }
            println!("{}", cal.c_thresh);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
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
            ExitCode::from(exit_code(&e))
        }
    }
}
