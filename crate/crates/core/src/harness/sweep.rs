use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use crate::datagen::{corrupt, sample_gaussian, CountMode};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::estimators::{
    dp_mean_with, dp_robust_mean_with, dp_winsorized_mean_with, EstimateReport, Method, ReleaseMode,
};
use crate::filter::Termination;
use crate::harness::config::ExperimentConfig;
use crate::linalg::Vector;
use crate::privacy::PrivacyParams;
use crate::seed::{label, mix};
use crate::sensitivity::RobustConfig;

pub const CSV_HEADER: &str = "method,n,d,gamma,epsilon,tau,c_thresh,trial,seed,l2_error,robust_l2_error,\
noise_sigma,iterations,removed_count,runtime_ms,bound_used,planted_count,terminated_by,status";

/// One estimator run inside a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub method: Method,
    pub n: usize,
    pub d: usize,
    /// Filter gamma for `dp_robust` (config gamma) and `dp_plain` (1/n);
    /// the input's corruption level for `dp_winsorized`.
    pub gamma: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub c_thresh: f64,
    pub trial: usize,
    pub seed: u64,
    /// `||private mean - true mean||_2`.
    pub l2_error: f64,
    /// Pre-noise error; diagnostic only.
    pub robust_l2_error: f64,
    pub noise_sigma: f64,
    pub iterations: usize,
    pub removed_count: usize,
    pub runtime_ms: f64,
    pub bound_used: f64,
    pub planted_count: usize,
    pub terminated_by: Option<Termination>,
    /// `None` for a completed trial, otherwise the error message.
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    fn csv_line(&self, out: &mut String) {
        let term = match self.terminated_by {
            Some(Termination::Certificate) => "certificate",
            Some(Termination::FallbackExhausted) => "fallback_exhausted",
            Some(Termination::MaxIterations) => "max_iterations",
            None => "",
        };
        let status = match &self.error {
            None => "ok".to_string(),
            Some(e) => format!("error: {}", e.replace([',', '\n', '"'], " ")),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.n,
            self.d,
            self.gamma,
            self.epsilon,
            self.tau,
            self.c_thresh,
            self.trial,
            self.seed,
            self.l2_error,
            self.robust_l2_error,
            self.noise_sigma,
            self.iterations,
            self.removed_count,
            self.runtime_ms,
            self.bound_used,
            self.planted_count,
            term,
            status
        )
        .expect("write to String");
    }
}

/// Writes records with a header row. Floats use the shortest decimal that
/// round-trips, so output is byte-stable for identical records.
pub fn write_records_csv<W: Write>(records: &[TrialRecord], mut writer: W) -> Result<()> {
    let mut buf = String::with_capacity(128 * (records.len() + 1));
    buf.push_str(CSV_HEADER);
    buf.push('\n');
    for r in records {
        r.csv_line(&mut buf);
    }
    writer.write_all(buf.as_bytes())?;
    Ok(())
}

/// Seed for one method's noise in one trial.
pub fn trial_seed(base_seed: u64, n: usize, d: usize, trial: usize, method: Method) -> u64 {
    base_seed ^ mix(&[n as u64, d as u64, trial as u64, label(method.as_str())])
}

fn data_seed(base_seed: u64, n: usize, d: usize, trial: usize, what: &str) -> u64 {
    mix(&[base_seed, n as u64, d as u64, trial as u64, label(what)])
}

/// Runs every `(n, d, trial, method)` combination with true mean 0.
///
/// All methods in a trial see the same clean sample; `dp_robust` (and the
/// baselines, if `corrupt_baselines`) get its corrupted version. A failing
/// trial yields a record with `error` set and the sweep continues. Records
/// are ordered by `(n, d, trial, method)` as listed in the config.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let mut records =
        Vec::with_capacity(config.n_values.len() * config.d_values.len() * config.trials * config.methods.len());
    for &n in &config.n_values {
        for &d in &config.d_values {
            for trial in 0..config.trials {
                run_trial(config, n, d, trial, &mut records);
            }
        }
    }
    Ok(records)
}

fn run_trial(config: &ExperimentConfig, n: usize, d: usize, trial: usize, records: &mut Vec<TrialRecord>) {
    let truth = Vector::<f64>::zeros(d);
    let base = config.base_seed;

    let prepared = sample_gaussian(n, d, &truth, data_seed(base, n, d, trial, "sample")).and_then(|clean| {
        let corrupted = match config.adversary.build(d) {
            Some(adv) => Some(corrupt(
                &clean,
                &truth,
                config.gamma,
                &adv,
                CountMode::Binomial,
                data_seed(base, n, d, trial, "corrupt"),
            )?),
            None => None,
        };
        Ok((clean, corrupted))
    });

    for &method in &config.methods {
        let seed = trial_seed(base, n, d, trial, method);
        let mut record = TrialRecord {
            method,
            n,
            d,
            gamma: match method {
                Method::DpRobust => config.gamma,
                Method::DpPlain => 1.0 / n as f64,
                Method::DpWinsorized if config.corrupt_baselines && config.adversary.build(d).is_some() => config.gamma,
                Method::DpWinsorized => 0.0,
            },
            epsilon: config.epsilon,
            tau: config.tau,
            c_thresh: config.c_thresh,
            trial,
            seed,
            l2_error: f64::NAN,
            robust_l2_error: f64::NAN,
            noise_sigma: f64::NAN,
            iterations: 0,
            removed_count: 0,
            runtime_ms: 0.0,
            bound_used: f64::NAN,
            planted_count: 0,
            terminated_by: None,
            error: None,
        };

        let (clean, corrupted) = match &prepared {
            Ok(p) => p,
            Err(e) => {
                record.error = Some(e.to_string());
                records.push(record);
                continue;
            }
        };
        let use_corrupted = method == Method::DpRobust || config.corrupt_baselines;
        let (input, planted): (&Dataset<f64>, usize) = match corrupted {
            Some((data, plan)) if use_corrupted => (data, plan.m_prime),
            _ => (clean, 0),
        };
        record.planted_count = planted;

        let started = Instant::now();
        let result = run_method(config, method, input, seed);
        let elapsed = started.elapsed();
        match result {
            Ok(report) => {
                record.l2_error = report.private_mean.distance(&truth);
                record.robust_l2_error = report.robust_mean.as_ref().map_or(f64::NAN, |m| m.distance(&truth));
                record.noise_sigma = report.noise_sigma();
                record.bound_used = report.bound_used;
                if let Some(diag) = &report.filter_diag {
                    record.iterations = diag.iterations;
                    record.removed_count = diag.removed_indices.len();
                    record.terminated_by = Some(diag.terminated_by);
                }
                if config.record_timing {
                    record.runtime_ms = elapsed.as_secs_f64() * 1e3;
                }
            }
            Err(e) => record.error = Some(e.to_string()),
        }
        if let Some(e) = &record.error {
            log::warn!("trial failed: method={method} n={n} d={d} trial={trial}: {e}");
        }
        records.push(record);
    }
}

fn run_method(
    config: &ExperimentConfig,
    method: Method,
    data: &Dataset<f64>,
    seed: u64,
) -> Result<EstimateReport<f64>> {
    let mode = ReleaseMode::Diagnostic;
    match method {
        Method::DpRobust => {
            let cfg = RobustConfig::new(config.gamma, config.tau, config.c_thresh)?;
            dp_robust_mean_with(data, &cfg, config.epsilon, seed, mode)
        }
        Method::DpPlain => dp_mean_with(data, config.tau, config.c_thresh, config.epsilon, seed, mode),
        Method::DpWinsorized => {
            let params = PrivacyParams::new(config.epsilon, config.tau)?;
            dp_winsorized_mean_with(data, &config.winsorize, &params, seed, mode)
        }
    }
}
