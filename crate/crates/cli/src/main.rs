use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cebench::config::{AblationConfig, RunConfig};
use cebench::dataset::{encode_dataset, import_external_cfr, read_dataset, write_atomic, DatasetHeader};
use cebench::estimators::{parse_methods, Method};
use cebench::eval::{ablation_run, dataset_snr_grid, snr_sweep, standard_cases, SweepSource};
use cebench::grid::build_grid;
use cebench::nn::{load_model, pack_batch, DenoiserModel, Tensor4};
use cebench::{CfrTensor, Complex64, Error, Shape};

const SCHEMA_HELP: &str = "\
Config schema: docs/config-schema.md
  run config (generate, import, eval): grid, profile, doppler_hz, impairments,
    allocation, n_records, seed, sweep {snr_grid_db, records_per_point, methods,
    ser, known_snr}, paths {dataset, model, report}
  ablation config (ablate): grid, profile, doppler_hz, impairments, allocation,
    snr_grid_db, records_per_point, seed, ser, cases [{name, model,
    train_toggles}], report
Exit codes: 0 ok, 1 config or parse error, 2 I/O error, 3 missing model";

#[derive(Parser)]
#[command(name = "cebench", version, about = "Uplink OFDM channel-estimation workbench", after_help = SCHEMA_HELP)]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run config
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; overrides the config
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize an impaired dataset
    #[command(after_help = SCHEMA_HELP)]
    Generate {
        #[command(flatten)]
        common: Common,
        /// Impair the channels of a truth-only dataset instead of drawing new ones
        #[arg(long)]
        from_dataset: Option<PathBuf>,
    },
    /// Convert externally generated CFRs (CSV) to a truth-only dataset
    #[command(after_help = SCHEMA_HELP)]
    Import {
        /// CSV file, one row per (symbol, antenna) slice of re,im pairs
        csv: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score estimators on a dataset or a generated SNR sweep
    #[command(after_help = SCHEMA_HELP)]
    Eval {
        #[command(flatten)]
        common: Common,
        /// Dataset to score; without it records are generated per SNR point
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Comma-separated subset of LS,MMSE,AI
        #[arg(long)]
        methods: Option<String>,
        /// Denoiser weight file for AI
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Impairment ablation over per-case denoisers
    #[command(after_help = SCHEMA_HELP)]
    Ablate {
        #[command(flatten)]
        common: Common,
    },
    /// Run the inference-engine self checks, optionally on a weight file
    #[command(name = "infer-check", after_help = SCHEMA_HELP)]
    InferCheck {
        /// Weight file to validate and time
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print version and file-format versions
    #[command(after_help = SCHEMA_HELP)]
    Version,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => 2,
            Error::MissingArtifact { .. } => 3,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type CmdResult = Result<(), Failure>;

fn load_run_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io(io) => fail(2, format!("cannot read config {}: {io}", p.display())),
            other => other.into(),
        }),
        None => Ok(RunConfig::default()),
    }
}

fn read_input_dataset(path: &Path) -> Result<(DatasetHeader, Vec<cebench::dataset::DatasetRecord>), Failure> {
    read_dataset(path).map_err(|e| fail(2, format!("cannot read dataset {}: {e}", path.display())))
}

fn load_required_model(path: &Path, what: &str) -> Result<DenoiserModel, Failure> {
    if !path.exists() {
        return Err(fail(3, format!("{what}: model file {} not found", path.display())));
    }
    load_model(path).map_err(|e| match e {
        Error::Io(io) => fail(2, format!("{what}: {io}")),
        other => fail(1, format!("{what}: {other}")),
    })
}

fn out_path(common: &Common, fallback: Option<&PathBuf>, what: &str) -> Result<PathBuf, Failure> {
    common
        .out
        .clone()
        .or_else(|| fallback.cloned())
        .ok_or_else(|| fail(1, format!("no output path: pass --out or set {what} in the config")))
}

fn cmd_generate(common: &Common, from_dataset: Option<&Path>) -> CmdResult {
    let cfg = load_run_config(common.config.as_deref())?;
    let seed = common.seed.unwrap_or(cfg.seed);
    let out = out_path(common, cfg.paths.dataset.as_ref(), "paths.dataset")?;
    let ctx = cfg.generator()?;
    let records = match from_dataset {
        Some(src) => {
            let (header, truth) = read_input_dataset(src)?;
            if header.grid != ctx.grid.config() {
                return Err(fail(1, "grid of the source dataset differs from the config grid"));
            }
            ctx.impair_records(&truth, seed)?
        }
        None => ctx.generate(cfg.n_records, seed)?,
    };
    let mut header = DatasetHeader::new(&ctx.grid, Some(ctx.impairments.toggles), seed);
    header.description = match from_dataset {
        Some(src) => format!("impaired from {}", src.display()),
        None => format!("profile {:?}", cfg.profile),
    };
    let encoded = encode_dataset(&header, &records)?;
    write_atomic(&out, &encoded.bytes)?;
    let digest = hex::encode(Sha256::digest(encoded.payload()));
    println!(
        "wrote {} records to {} ({} bytes); payload sha256 {digest}",
        records.len(),
        out.display(),
        encoded.bytes.len()
    );
    Ok(())
}

fn cmd_import(csv: &Path, common: &Common) -> CmdResult {
    let cfg = load_run_config(common.config.as_deref())?;
    let out = out_path(common, cfg.paths.dataset.as_ref(), "paths.dataset")?;
    let grid = build_grid(&cfg.grid)?;
    let records = import_external_cfr(csv, &grid).map_err(|e| match e {
        Error::Io(io) => fail(2, format!("cannot read {}: {io}", csv.display())),
        other => fail(1, format!("{}: {other}", csv.display())),
    })?;
    let mut header = DatasetHeader::new(&grid, None, common.seed.unwrap_or(cfg.seed));
    header.description = format!("imported from {}", csv.display());
    let encoded = encode_dataset(&header, &records)?;
    write_atomic(&out, &encoded.bytes)?;
    println!("imported {} truth-only records to {}", records.len(), out.display());
    Ok(())
}

fn cmd_eval(common: &Common, dataset: Option<&Path>, methods: Option<&str>, model: Option<&Path>) -> CmdResult {
    let cfg = load_run_config(common.config.as_deref())?;
    let seed = common.seed.unwrap_or(cfg.seed);
    let out = out_path(common, cfg.paths.report.as_ref(), "paths.report")?;
    let methods: Vec<Method> = match methods {
        Some(list) => parse_methods(list)?,
        None => cfg.sweep.methods.clone(),
    };
    let model_path = model.map(Path::to_path_buf).or_else(|| cfg.paths.model.clone());
    let model = if methods.contains(&Method::Ai) {
        let p = model_path.ok_or_else(|| fail(3, "method AI needs a model: pass --model"))?;
        Some(load_required_model(&p, "AI")?)
    } else {
        None
    };
    let opts = cfg.sweep.options(seed);
    let started = Instant::now();
    let dataset_path = dataset.map(Path::to_path_buf).or_else(|| cfg.paths.dataset.clone());
    let report = match dataset_path {
        Some(path) => {
            let (header, records) = read_input_dataset(&path)?;
            if !header.has_observations {
                return Err(fail(1, "dataset is truth-only; run generate --from-dataset first"));
            }
            let grid = build_grid(&header.grid)?;
            let snrs = dataset_snr_grid(&records);
            snr_sweep(
                SweepSource::Dataset {
                    grid: &grid,
                    records: &records,
                },
                &methods,
                &snrs,
                model.as_ref(),
                &opts,
            )?
        }
        None => {
            let ctx = cfg.generator()?;
            snr_sweep(
                SweepSource::Generator(&ctx),
                &methods,
                &cfg.sweep.snr_grid_db,
                model.as_ref(),
                &opts,
            )?
        }
    };
    report.write_csv(&out)?;
    print!("{}", report.to_csv());
    println!(
        "wrote {} rows to {} in {:.2} s",
        report.rows.len(),
        out.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_ablate(common: &Common) -> CmdResult {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| fail(1, "ablate needs --config"))?;
    let cfg = AblationConfig::load(path).map_err(|e| match e {
        Error::Io(io) => fail(2, format!("cannot read config {}: {io}", path.display())),
        other => other.into(),
    })?;
    let seed = common.seed.unwrap_or(cfg.seed);
    let out = out_path(common, cfg.report.as_ref(), "report")?;
    let mut models = Vec::with_capacity(cfg.cases.len());
    for case in &cfg.cases {
        models.push(load_required_model(&case.model, &format!("case {:?}", case.name))?);
    }
    let cases: Vec<(String, &DenoiserModel)> = cfg.cases.iter().map(|c| c.name.clone()).zip(models.iter()).collect();
    let standard = standard_cases();
    for c in &cfg.cases {
        let toggles = c
            .train_toggles
            .or_else(|| standard.iter().find(|(n, _)| *n == c.name).map(|(_, t)| *t));
        if let Some(t) = toggles {
            println!("case {:?}: training impairments {}", c.name, t.summary());
        }
    }
    let report = ablation_run(&cases, &cfg.test_generator()?, &cfg.snr_grid_db, &cfg.options(seed))?;
    report.write_csv(&out)?;
    print!("{}", report.render());
    println!("wrote {} rows to {}", report.rows.len() + 1, out.display());
    Ok(())
}

fn random_input(shape: Shape, seed: u64) -> CfrTensor {
    // cheap deterministic pattern; the checks only need non-trivial values
    let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = move || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        (x >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    CfrTensor::from_fn(shape, |_, _, _| Complex64::new(next(), next()))
}

fn cmd_infer_check(model: Option<&Path>, seed: u64) -> CmdResult {
    let mut all_ok = true;
    let mut report = |name: &str, ok: bool, detail: String| {
        all_ok &= ok;
        println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    };

    let shape = Shape::new(3, 72, 2);
    let x = pack_batch(&[&random_input(shape, seed)])?;
    let fixture = DenoiserModel::identity_fixture(3, 2, 3)?;
    let err = fixture.infer(&x)?.max_abs_diff(&x);
    report("identity fixture", err < 1e-6, format!("max abs error {err:.3e}"));

    let round = DenoiserModel::decode(&fixture.encode()?)?;
    report("weight round trip", round == fixture, "encode/decode bit-exact".into());

    let zero = Tensor4::zeros(x.dims());
    let y = fixture.infer(&zero)?;
    report(
        "zero input",
        y.data().iter().all(|&v| v == 0.0),
        "zero biases map zero to zero".into(),
    );

    if let Some(path) = model {
        let m = load_required_model(path, "infer-check")?;
        let a = m.architecture();
        println!(
            "loaded {}: N_sym={}, N_ant={}, F={}, kernel={}, {} parameters",
            path.display(),
            a.n_sym,
            a.n_ant,
            a.features,
            a.kernel,
            a.n_params()
        );
        let n_p = 1638;
        let batch: Vec<CfrTensor> = (0..8)
            .map(|b| random_input(Shape::new(a.n_sym, n_p, a.n_ant), seed + b))
            .collect();
        let refs: Vec<&CfrTensor> = batch.iter().collect();
        let input = pack_batch(&refs)?;
        let started = Instant::now();
        let out = m.infer(&input)?;
        let secs = started.elapsed().as_secs_f64();
        report(
            "loaded model output finite",
            out.data().iter().all(|v| v.is_finite()),
            format!("{} values", out.data().len()),
        );
        report(
            "loaded model deterministic",
            m.infer(&input)? == out,
            "repeat inference is bit-identical".into(),
        );
        println!("throughput: {:.1} records/s ({n_p} pilots per record)", batch.len() as f64 / secs);
    }
    if all_ok {
        Ok(())
    } else {
        Err(fail(1, "inference self checks failed"))
    }
}

fn cmd_version() {
    println!("cebench {}", env!("CARGO_PKG_VERSION"));
    println!(
        "dataset format {} v{}",
        String::from_utf8_lossy(&cebench::dataset::DATASET_MAGIC),
        cebench::dataset::DATASET_VERSION
    );
    println!(
        "weight format {} v{}",
        String::from_utf8_lossy(&cebench::nn::WEIGHT_MAGIC),
        cebench::nn::WEIGHT_VERSION
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Generate { common, from_dataset } => cmd_generate(common, from_dataset.as_deref()),
        Command::Import { csv, common } => cmd_import(csv, common),
        Command::Eval {
            common,
            dataset,
            methods,
            model,
        } => cmd_eval(common, dataset.as_deref(), methods.as_deref(), model.as_deref()),
        Command::Ablate { common } => cmd_ablate(common),
        Command::InferCheck { model, seed } => cmd_infer_check(model.as_deref(), *seed),
        Command::Version => {
            cmd_version();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
