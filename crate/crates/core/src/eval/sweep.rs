use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::{write_atomic, DatasetRecord};
use crate::error::{Error, Result};
use crate::estimators::{interpolate_freq, run_pipeline, Method, PilotObservation, PipelineOptions};
use crate::eval::link::{ser_link, SerStats};
use crate::eval::metrics::{effective_truth, linear_to_db, nmse_linear};
use crate::generate::GeneratorContext;
use crate::grid::CarrierGrid;
use crate::nn::DenoiserModel;
use crate::seed::{self, stream};

pub const SWEEP_CSV_HEADER: &str = "snr_db,method,nmse_db,ser,n_records,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    /// Estimation method, or case name in ablation reports.
    pub label: String,
    pub nmse_db: f64,
    pub ser: Option<f64>,
    pub n_records: usize,
    pub seed: u64,
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        let ser = self.ser.map(|s| format!("{s:.6e}")).unwrap_or_default();
        format!(
            "{},{},{:.4},{},{},{}",
            self.snr_db, self.label, self.nmse_db, ser, self.n_records, self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn row(&self, snr_db: f64, label: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.snr_db == snr_db && r.label == label)
    }

    /// NMSE column of one method in grid order.
    pub fn nmse_series(&self, label: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.label == label)
            .map(|r| (r.snr_db, r.nmse_db))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{SWEEP_CSV_HEADER}").unwrap();
        for r in &self.rows {
            writeln!(s, "{}", r.csv_line()).unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Records generated per SNR point; ignored for dataset sources,
    /// which use every record at the point.
    pub records_per_point: usize,
    pub seed: u64,
    pub compute_ser: bool,
    pub pipeline: PipelineOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            records_per_point: 100,
            seed: 0,
            compute_ser: true,
            pipeline: PipelineOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SweepSource<'a> {
    Generator(&'a GeneratorContext),
    Dataset {
        grid: &'a CarrierGrid,
        records: &'a [DatasetRecord],
    },
}

/// Per-method NMSE (linear) and link statistics for one record.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordScore {
    pub nmse: Vec<f64>,
    pub ser: Vec<Option<SerStats>>,
}

pub fn score_record(
    record: &DatasetRecord,
    grid: &CarrierGrid,
    methods: &[Method],
    model: Option<&DenoiserModel>,
    opts: &SweepOptions,
) -> Result<RecordScore> {
    let obs = PilotObservation::from_record(record, grid, seed::derive(record.draw.seed, stream::PILOTS, 0))?;
    let truth = effective_truth(record, grid);
    let truth_full = if opts.compute_ser {
        Some(interpolate_freq(&truth, &record.mask, grid, Method::Ls)?)
    } else {
        None
    };
    let mut nmse = Vec::with_capacity(methods.len());
    let mut ser = Vec::with_capacity(methods.len());
    for &m in methods {
        let out = run_pipeline(&obs, grid, m, model, &opts.pipeline)?;
        nmse.push(nmse_linear(&out.pilots, &truth, &record.mask)?);
        ser.push(match &truth_full {
            Some(t) => Some(ser_link(
                &out.estimate,
                t,
                grid,
                record.snr_db(),
                seed::derive(record.draw.seed, stream::LINK, 0),
            )?),
            None => None,
        });
    }
    Ok(RecordScore { nmse, ser })
}

/// Scores records in parallel; the result order follows `records`.
pub fn score_records(
    records: &[DatasetRecord],
    grid: &CarrierGrid,
    methods: &[Method],
    model: Option<&DenoiserModel>,
    opts: &SweepOptions,
) -> Result<Vec<RecordScore>> {
    records
        .par_iter()
        .map(|r| score_record(r, grid, methods, model, opts))
        .collect()
}

/// Appends one row per method, aggregating in record order.
pub(crate) fn aggregate_rows(
    rows: &mut Vec<SweepRow>,
    snr_db: f64,
    labels: &[String],
    scores: &[RecordScore],
    seed: u64,
) {
    for (mi, label) in labels.iter().enumerate() {
        let mean = scores.iter().map(|s| s.nmse[mi]).sum::<f64>() / scores.len() as f64;
        let ser = scores.iter().try_fold(SerStats::default(), |mut acc, s| {
            acc.merge(s.ser[mi]?);
            Some(acc)
        });
        rows.push(SweepRow {
            snr_db,
            label: label.clone(),
            nmse_db: linear_to_db(mean),
            ser: ser.map(|s| s.ser()),
            n_records: scores.len(),
            seed,
        });
    }
}

/// Sorted distinct SNRs present in a dataset.
pub fn dataset_snr_grid(records: &[DatasetRecord]) -> Vec<f64> {
    let mut snrs: Vec<f64> = records.iter().map(|r| r.snr_db()).collect();
    snrs.sort_by(|a, b| a.total_cmp(b));
    snrs.dedup();
    snrs
}

/// Records used for SNR point `index` of a generator sweep.
pub fn point_records(ctx: &GeneratorContext, snr_db: f64, index: usize, n: usize, root_seed: u64) -> Result<Vec<DatasetRecord>> {
    ctx.at_snr(snr_db)
        .generate(n, seed::derive(root_seed, stream::SNR_POINT, index as u64))
}

pub fn snr_sweep(
    source: SweepSource<'_>,
    methods: &[Method],
    snr_grid: &[f64],
    model: Option<&DenoiserModel>,
    opts: &SweepOptions,
) -> Result<SweepReport> {
    if snr_grid.is_empty() {
        return Err(Error::InvalidArgument("empty SNR grid".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidArgument("empty method list".into()));
    }
    if methods.contains(&Method::Ai) && model.is_none() {
        return Err(Error::InvalidArgument("method AI needs a model".into()));
    }
    let labels: Vec<String> = methods.iter().map(|m| m.to_string()).collect();
    let mut rows = Vec::with_capacity(snr_grid.len() * methods.len());
    for (pi, &snr) in snr_grid.iter().enumerate() {
        let (grid, records) = match source {
            SweepSource::Generator(ctx) => {
                if opts.records_per_point == 0 {
                    return Err(Error::InvalidArgument("records_per_point must be positive".into()));
                }
                (&ctx.grid, point_records(ctx, snr, pi, opts.records_per_point, opts.seed)?)
            }
            SweepSource::Dataset { grid, records } => {
                let picked: Vec<DatasetRecord> = records.iter().filter(|r| r.snr_db() == snr).cloned().collect();
                if picked.is_empty() {
                    return Err(Error::InvalidArgument(format!("dataset has no records at {snr} dB")));
                }
                (grid, picked)
            }
        };
        let scores = score_records(&records, grid, methods, model, opts)?;
        aggregate_rows(&mut rows, snr, &labels, &scores, opts.seed);
    }
    Ok(SweepReport { rows })
}
