//! Scoring: NMSE, the QPSK link proxy, SNR sweeps and impairment ablations.

pub mod ablation;
pub mod link;
pub mod metrics;
pub mod sweep;

pub use ablation::{ablation_run, standard_cases, AblationReport};
pub use link::{ser_link, SerStats};
pub use metrics::{effective_truth, linear_to_db, nmse_db, nmse_linear, NMSE_FLOOR_DB};
pub use sweep::{dataset_snr_grid, score_record, snr_sweep, SweepOptions, SweepReport, SweepRow, SweepSource};
