use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::estimators::Method;
use crate::harness::sweep::TrialRecord;

/// Order statistics of one method's errors in one `(n, d)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub mean: f64,
}

impl ErrorSummary {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }

    /// Panics on an empty slice.
    pub fn from_values(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        ErrorSummary {
            count: v.len(),
            median: quantile_sorted(&v, 0.5),
            q1: quantile_sorted(&v, 0.25),
            q3: quantile_sorted(&v, 0.75),
            mean: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

/// Linear-interpolation quantile of sorted data (`h = (n - 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    ErrorSummary::from_values(values).median
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub n: usize,
    pub d: usize,
    pub per_method: BTreeMap<Method, ErrorSummary>,
    /// `median(dp_winsorized) - median(dp_robust)`.
    pub excess_vs_robust: Option<f64>,
    /// `median(dp_winsorized) - median(dp_plain)`.
    pub excess_vs_plain: Option<f64>,
}

/// Aggregates completed records per `(n, d)`, sorted by `(n, d)`.
///
/// Only trials for which every method present in the cell completed are
/// used; the rest are skipped with a warning.
pub fn excess_error_table(records: &[TrialRecord]) -> Vec<AggregateRow> {
    let mut cells: BTreeMap<(usize, usize), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.n, r.d)).or_default().push(r);
    }

    cells
        .into_iter()
        .map(|((n, d), recs)| {
            let methods: BTreeSet<Method> = recs.iter().map(|r| r.method).collect();
            let mut by_trial: BTreeMap<usize, BTreeMap<Method, f64>> = BTreeMap::new();
            for r in recs.iter().filter(|r| r.is_ok()) {
                by_trial.entry(r.trial).or_default().insert(r.method, r.l2_error);
            }
            let all_trials: BTreeSet<usize> = recs.iter().map(|r| r.trial).collect();
            let paired: Vec<&BTreeMap<Method, f64>> = by_trial.values().filter(|m| m.len() == methods.len()).collect();
            let skipped = all_trials.len() - paired.len();
            if skipped > 0 {
                log::warn!("n={n} d={d}: skipped {skipped} unpaired trial(s)");
            }

            let per_method: BTreeMap<Method, ErrorSummary> = methods
                .iter()
                .filter(|_| !paired.is_empty())
                .map(|&m| {
                    let values: Vec<f64> = paired.iter().map(|t| t[&m]).collect();
                    (m, ErrorSummary::from_values(&values))
                })
                .collect();
            let excess =
                |other: Method| Some(per_method.get(&Method::DpWinsorized)?.median - per_method.get(&other)?.median);
            AggregateRow {
                n,
                d,
                excess_vs_robust: excess(Method::DpRobust),
                excess_vs_plain: excess(Method::DpPlain),
                per_method,
            }
        })
        .collect()
}

/// One row per `(n, d)`; per-method columns for every known method, empty
/// where a method was not run.
pub fn write_table_csv<W: Write>(rows: &[AggregateRow], mut writer: W) -> Result<()> {
    let mut buf = String::from("n,d");
    for m in Method::ALL {
        write!(buf, ",{m}_count,{m}_median,{m}_iqr,{m}_mean").unwrap();
    }
    buf.push_str(",excess_vs_robust,excess_vs_plain\n");
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for row in rows {
        write!(buf, "{},{}", row.n, row.d).unwrap();
        for m in Method::ALL {
            match row.per_method.get(&m) {
                Some(s) => write!(buf, ",{},{},{},{}", s.count, s.median, s.iqr(), s.mean).unwrap(),
                None => buf.push_str(",,,,"),
            }
        }
        writeln!(buf, ",{},{}", opt(row.excess_vs_robust), opt(row.excess_vs_plain)).unwrap();
    }
    writer.write_all(buf.as_bytes())?;
    Ok(())
}
