//! Experiment runner behind the `dprm` binary: parameter sweeps over
//! `(n, d)`, constant calibration, and aggregation into comparison tables.

pub mod calibrate;
pub mod config;
pub mod sweep;
pub mod table;

pub use calibrate::{c_grid, calibrate_c, Calibration};
pub use config::{AdversarySpec, ExperimentConfig};
pub use sweep::{run_sweep, trial_seed, write_records_csv, TrialRecord, CSV_HEADER};
pub use table::{excess_error_table, median, write_table_csv, AggregateRow, ErrorSummary};
