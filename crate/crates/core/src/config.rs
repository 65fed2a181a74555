//! JSON run configurations. Relative paths resolve against the directory
//! of the config file.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::channel::ProfileSpec;
use crate::error::{Error, Result};
use crate::estimators::{Method, PipelineOptions};
use crate::eval::SweepOptions;
use crate::generate::{AllocationSpec, GeneratorContext};
use crate::grid::{build_grid, GridConfig};
use crate::impairments::{default_snr_grid, ImpairmentSettings, Toggles};

/// Reads and parses a JSON config. Parse errors carry line and column.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn base_dir(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn default_records() -> usize {
    100
}
fn default_true() -> bool {
    true
}
fn default_methods() -> Vec<Method> {
    vec![Method::Ls, Method::Mmse]
}

fn scenario(
    grid: &GridConfig,
    profile: &ProfileSpec,
    doppler_hz: Option<f64>,
    impairments: &ImpairmentSettings,
    allocation: Option<AllocationSpec>,
    base: &Path,
) -> Result<GeneratorContext> {
    let grid = build_grid(grid)?;
    let mut profile = profile.resolve(base)?;
    if let Some(fd) = doppler_hz {
        profile = profile.with_doppler(fd)?;
    }
    let imp = impairments.resolve(&grid, base)?;
    GeneratorContext::new(grid, profile, imp, allocation)
}

fn check_snr_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("snr_grid_db is empty".into()));
    }
    if grid.iter().any(|s| s.is_nan()) {
        return Err(Error::Config("snr_grid_db contains NaN".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    #[serde(default = "default_snr_grid")]
    pub snr_grid_db: Vec<f64>,
    #[serde(default = "default_records")]
    pub records_per_point: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_true")]
    pub ser: bool,
    /// MMSE takes its noise level from the record SNR instead of
    /// estimating it.
    #[serde(default = "default_true")]
    pub known_snr: bool,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            snr_grid_db: default_snr_grid(),
            records_per_point: default_records(),
            methods: default_methods(),
            ser: true,
            known_snr: true,
        }
    }
}

impl SweepSettings {
    pub fn options(&self, seed: u64) -> SweepOptions {
        SweepOptions {
            records_per_point: self.records_per_point,
            seed,
            compute_ser: self.ser,
            pipeline: PipelineOptions {
                use_nominal_snr: self.known_snr,
                ..PipelineOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSettings {
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// Configuration shared by `generate`, `import` and `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub profile: ProfileSpec,
    #[serde(default)]
    pub doppler_hz: Option<f64>,
    #[serde(default)]
    pub impairments: ImpairmentSettings,
    #[serde(default)]
    pub allocation: Option<AllocationSpec>,
    #[serde(default = "default_records")]
    pub n_records: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default)]
    pub paths: PathSettings,
    #[serde(skip)]
    pub base: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = load_json(path)?;
        cfg.rebase(&base_dir(path));
        cfg.validate()?;
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        for p in [&mut self.paths.dataset, &mut self.paths.model, &mut self.paths.report]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        self.base = Some(base.to_path_buf());
    }

    /// Semantic checks on top of the JSON schema.
    pub fn validate(&self) -> Result<()> {
        if self.n_records == 0 {
            return Err(Error::Config("n_records must be positive".into()));
        }
        if self.sweep.records_per_point == 0 {
            return Err(Error::Config("sweep.records_per_point must be positive".into()));
        }
        if self.sweep.methods.is_empty() {
            return Err(Error::Config("sweep.methods is empty".into()));
        }
        check_snr_grid(&self.sweep.snr_grid_db)?;
        // resolves grid, profile and impairments, surfacing their errors now
        self.generator()?;
        Ok(())
    }

    pub fn generator(&self) -> Result<GeneratorContext> {
        scenario(
            &self.grid,
            &self.profile,
            self.doppler_hz,
            &self.impairments,
            self.allocation,
            self.base.as_deref().unwrap_or(Path::new(".")),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationCaseConfig {
    pub name: String,
    pub model: PathBuf,
    /// Impairment stages of the case's training data, for the trainer;
    /// defaults to the standard case of the same name.
    #[serde(default)]
    pub train_toggles: Option<Toggles>,
}

/// Configuration of `ablate`. The scenario fields describe the test set;
/// its toggles are forced on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub profile: ProfileSpec,
    #[serde(default)]
    pub doppler_hz: Option<f64>,
    #[serde(default)]
    pub impairments: ImpairmentSettings,
    #[serde(default)]
    pub allocation: Option<AllocationSpec>,
    #[serde(default = "default_snr_grid")]
    pub snr_grid_db: Vec<f64>,
    #[serde(default = "default_records")]
    pub records_per_point: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ser: bool,
    pub cases: Vec<AblationCaseConfig>,
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(skip)]
    pub base: Option<PathBuf>,
}

impl AblationConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = load_json(path)?;
        let base = base_dir(path);
        for c in &mut cfg.cases {
            if c.model.is_relative() {
                c.model = base.join(&c.model);
            }
        }
        if let Some(r) = &mut cfg.report {
            if r.is_relative() {
                *r = base.join(&*r);
            }
        }
        cfg.base = Some(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_snr_grid(&self.snr_grid_db)?;
        if self.records_per_point == 0 {
            return Err(Error::Config("records_per_point must be positive".into()));
        }
        if self.cases.is_empty() {
            return Err(Error::Config("no ablation cases".into()));
        }
        let mut names: Vec<&str> = self.cases.iter().map(|c| c.name.as_str()).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate case {:?}", w[0])));
        }
        self.test_generator()?;
        Ok(())
    }

    pub fn test_generator(&self) -> Result<GeneratorContext> {
        let mut imp = self.impairments.clone();
        imp.toggles = Toggles::all_on();
        scenario(
            &self.grid,
            &self.profile,
            self.doppler_hz,
            &imp,
            self.allocation,
            self.base.as_deref().unwrap_or(Path::new(".")),
        )
    }

    pub fn options(&self, seed: u64) -> SweepOptions {
        SweepOptions {
            records_per_point: self.records_per_point,
            seed,
            compute_ser: self.ser,
            pipeline: PipelineOptions::default(),
        }
    }
}
