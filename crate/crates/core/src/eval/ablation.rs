//! Impairment ablation: one denoiser per training-set variant, all scored
//! on the same fully impaired test set.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::write_atomic;
use crate::error::{Error, Result};
use crate::estimators::Method;
use crate::eval::sweep::{aggregate_rows, point_records, score_records, SweepOptions, SweepRow};
use crate::generate::GeneratorContext;
use crate::impairments::Toggles;
use crate::nn::DenoiserModel;

pub const BASELINE_CASE: &str = "All";
pub const IMPACT_LABEL: &str = "Max. Impact";
pub const ABLATION_CSV_HEADER: &str = "snr_db,case,nmse_db,ser,n_records,seed";

/// Standard cases and the impairment stage each one drops from its
/// training data.
pub fn standard_cases() -> Vec<(&'static str, Toggles)> {
    let all = Toggles::all_on();
    vec![
        (BASELINE_CASE, all),
        ("TO Off", Toggles { to: false, ..all }),
        ("Filt. Off", Toggles { filter: false, ..all }),
        ("Scaling Off", Toggles { ant_scale: false, ..all }),
    ]
}

/// Reference NMSE (dB) for annotating reports, per SNR in
/// [`REFERENCE_SNR_DB`].
pub const REFERENCE_SNR_DB: [f64; 7] = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0];
pub const REFERENCE_NMSE_DB: [(&str, [f64; 7]); 4] = [
    ("All", [-10.35, -15.49, -20.18, -24.40, -27.50, -29.25, -30.05]),
    ("TO Off", [-9.56, -14.98, -19.95, -24.15, -27.10, -28.67, -29.32]),
    ("Filt. Off", [-10.31, -15.32, -20.00, -24.18, -27.27, -28.99, -29.72]),
    ("Scaling Off", [-9.70, -15.31, -20.06, -24.25, -27.23, -28.80, -29.43]),
];
pub const REFERENCE_MAX_IMPACT_DB: [(&str, f64); 3] = [("TO Off", 0.79), ("Filt. Off", 0.33), ("Scaling Off", 0.65)];

pub fn reference_nmse_db(case: &str, snr_db: f64) -> Option<f64> {
    let col = REFERENCE_SNR_DB.iter().position(|&s| s == snr_db)?;
    REFERENCE_NMSE_DB.iter().find(|(c, _)| *c == case).map(|(_, v)| v[col])
}

pub fn reference_max_impact_db(case: &str) -> Option<f64> {
    REFERENCE_MAX_IMPACT_DB.iter().find(|(c, _)| *c == case).map(|(_, v)| *v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    /// Case-major, one row per (case, SNR).
    pub rows: Vec<SweepRow>,
    pub baseline: String,
    /// Worst-case NMSE loss of each non-baseline case against the baseline.
    pub impacts: Vec<(String, f64)>,
    pub seed: u64,
}

impl AblationReport {
    pub fn impact(&self, case: &str) -> Option<f64> {
        self.impacts.iter().find(|(c, _)| c == case).map(|(_, v)| *v)
    }

    /// CSV with one data row per (case, SNR) and a final impact row whose
    /// `nmse_db` cell lists `case=impact` pairs.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{ABLATION_CSV_HEADER}").unwrap();
        for r in &self.rows {
            writeln!(s, "{}", r.csv_line()).unwrap();
        }
        let impacts: Vec<String> = self.impacts.iter().map(|(c, v)| format!("{c}={v:.2}")).collect();
        let total: usize = self.rows.iter().map(|r| r.n_records).sum();
        writeln!(s, ",{IMPACT_LABEL},{},,{total},{}", impacts.join(";"), self.seed).unwrap();
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    /// Human-readable table with reference values alongside where known.
    pub fn render(&self) -> String {
        let mut cases: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !cases.contains(&r.label.as_str()) {
                cases.push(&r.label);
            }
        }
        let mut snrs: Vec<f64> = self.rows.iter().map(|r| r.snr_db).collect();
        snrs.sort_by(|a, b| a.total_cmp(b));
        snrs.dedup();
        let mut s = String::new();
        write!(s, "{:>8}", "SNR").unwrap();
        for c in &cases {
            write!(s, " | {:>20}", c).unwrap();
        }
        writeln!(s).unwrap();
        let cell = |v: f64, r: Option<f64>| match r {
            Some(r) => format!("{v:>8.2} (ref {r:>6.2})"),
            None => format!("{v:>20.2}"),
        };
        for &snr in &snrs {
            write!(s, "{snr:>8}").unwrap();
            for c in &cases {
                let v = self.rows.iter().find(|r| r.label == *c && r.snr_db == snr).map(|r| r.nmse_db);
                match v {
                    Some(v) => write!(s, " | {}", cell(v, reference_nmse_db(c, snr))).unwrap(),
                    None => write!(s, " | {:>20}", "").unwrap(),
                }
            }
            writeln!(s).unwrap();
        }
        write!(s, "{IMPACT_LABEL:>8}").unwrap();
        for c in &cases {
            match self.impact(c) {
                Some(v) => write!(s, " | {}", cell(v, reference_max_impact_db(c))).unwrap(),
                None => write!(s, " | {:>20}", "N/A").unwrap(),
            }
        }
        writeln!(s).unwrap();
        s
    }
}

/// Scores every case's model on one shared test set generated from
/// `test` with every impairment enabled.
pub fn ablation_run(
    cases: &[(String, &DenoiserModel)],
    test: &GeneratorContext,
    snr_grid: &[f64],
    opts: &SweepOptions,
) -> Result<AblationReport> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("no ablation cases".into()));
    }
    if snr_grid.is_empty() {
        return Err(Error::InvalidArgument("empty SNR grid".into()));
    }
    if opts.records_per_point == 0 {
        return Err(Error::InvalidArgument("records_per_point must be positive".into()));
    }
    let mut names: Vec<&str> = cases.iter().map(|(n, _)| n.as_str()).collect();
    names.sort();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("duplicate ablation case names".into()));
    }
    let mut test = test.clone();
    test.impairments.toggles = Toggles::all_on();

    let test_sets = snr_grid
        .iter()
        .enumerate()
        .map(|(pi, &snr)| point_records(&test, snr, pi, opts.records_per_point, opts.seed))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(cases.len() * snr_grid.len());
    for (name, model) in cases {
        for (&snr, records) in snr_grid.iter().zip(&test_sets) {
            let scores = score_records(records, &test.grid, &[Method::Ai], Some(model), opts)?;
            aggregate_rows(&mut rows, snr, std::slice::from_ref(name), &scores, opts.seed);
        }
    }

    let baseline = cases
        .iter()
        .find(|(n, _)| n == BASELINE_CASE)
        .unwrap_or(&cases[0])
        .0
        .clone();
    let series = |case: &str| -> Vec<f64> { rows.iter().filter(|r| r.label == case).map(|r| r.nmse_db).collect() };
    let base = series(&baseline);
    let impacts = cases
        .iter()
        .filter(|(n, _)| *n != baseline)
        .map(|(n, _)| {
            let worst = series(n)
                .iter()
                .zip(&base)
                .map(|(c, b)| c - b)
                .fold(f64::NEG_INFINITY, f64::max);
            (n.clone(), worst)
        })
        .collect();
    Ok(AblationReport {
        rows,
        baseline,
        impacts,
        seed: opts.seed,
    })
}
