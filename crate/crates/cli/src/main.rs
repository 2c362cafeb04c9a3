//! `speclust`: generate Gaussian mixture instances, cluster them with the
//! spectral algorithms, run seeded Monte Carlo sweeps with rate fits, and
//! verify the supporting perturbation and distribution facts.
//!
//! Exit codes: 0 success (and, for `verify`, all checks passing), 2 config
//! or input error, 3 rate fit infeasible (no two grid points with positive
//! mean loss), 1 internal error or failed verification check.

mod io;
mod svg;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use speclust::gmm::{sample_instance, GmmInstance, GmmSpec};
use speclust::harness::{fit_rate, run_sweep, Algorithm, RateFit, SweepConfig, TrialRecord};
use speclust::kmeans::KMeansConfig;
use speclust::metrics::misclustering_loss;
use speclust::verify::{run_suite, VerifySuiteConfig};
use speclust::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or missing input: exit code 2.
    Config(String),
    /// Rate fit infeasible: exit code 3.
    FitInfeasible(String),
    /// Everything else: exit code 1.
    Internal(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::FitInfeasible(m) | CliError::Internal(m) => {
                write!(f, "{m}")
            }
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::FitInfeasible(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InsufficientUncensored { .. } => CliError::FitInfeasible(e.to_string()),
            CoreError::SvdNoConvergence { .. } | CoreError::NonFiniteInput => {
                CliError::Internal(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Parser)]
#[command(
    name = "speclust",
    about = "Spectral clustering on Gaussian mixtures: generation, clustering, rate sweeps, lemma verification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config for the subcommand (see README for schemas).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 auto-detects. Output is identical either way.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Encoding for record and label tables.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Clustering algorithm override (alg1 | alg2 | alg3).
    #[arg(long, global = true)]
    algorithm: Option<String>,
    /// Seed override (replaces the config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one instance and write X.csv, z_star.csv, centers.csv, spec.json.
    Generate,
    /// Cluster a generated directory (or an inline spec) and write labels,
    /// centers and a summary.
    Cluster,
    /// Run a delta sweep: records, rate fits, and an SVG rate plot.
    Sweep,
    /// Fit the rate from an existing records file.
    Fit,
    /// Run the lemma verification suite and write verify.json.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    fs::create_dir_all(&cli.out).map_err(|e| io::io_err(&cli.out, e))?;
    match cli.command {
        Command::Generate => cmd_generate(cli),
        Command::Cluster => cmd_cluster(cli),
        Command::Sweep => cmd_sweep(cli),
        Command::Fit => cmd_fit(cli),
        Command::Verify => cmd_verify(cli),
    }
}

fn load_config<T: serde::de::DeserializeOwned>(cli: &Cli, what: &str) -> Result<T, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("--config <{what}.json> is required")))?;
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("missing-input: {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid-spec: {}: {e}", path.display())))
}

fn algorithm_override(cli: &Cli) -> Result<Option<Algorithm>, CliError> {
    cli.algorithm
        .as_deref()
        .map(|s| Algorithm::parse(s).map_err(CliError::from))
        .transpose()
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

fn cmd_generate(cli: &Cli) -> Result<(), CliError> {
    let mut spec: GmmSpec = load_config(cli, "gmm-spec")?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    let inst = sample_instance(&spec)?;
    write_instance(&cli.out, &inst)?;
    eprintln!(
        "generated n={} p={} k={} delta={} into {}",
        spec.n,
        spec.p,
        spec.k,
        spec.delta,
        cli.out.display()
    );
    Ok(())
}

fn write_instance(dir: &Path, inst: &GmmInstance) -> Result<(), CliError> {
    io::write_matrix_csv(&dir.join("X.csv"), &inst.x)?;
    io::write_labels(&dir.join("z_star.csv"), &inst.z_star)?;
    io::write_matrix_csv(&dir.join("centers.csv"), &inst.centers)?;
    io::write_json(&dir.join("spec.json"), &inst.spec)
}

// ---------------------------------------------------------------------------
// cluster
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterConfig {
    /// Directory holding X.csv (and optionally z_star.csv, spec.json).
    #[serde(default)]
    input_dir: Option<PathBuf>,
    /// Inline spec for generate-then-cluster.
    #[serde(default)]
    spec: Option<GmmSpec>,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    algorithm: Option<Algorithm>,
    #[serde(default)]
    kmeans: KMeansConfig,
}

#[derive(Serialize)]
struct ClusterSummary {
    loss: Option<f64>,
    objective: f64,
    algorithm: String,
    k: usize,
}

fn cmd_cluster(cli: &Cli) -> Result<(), CliError> {
    let config: ClusterConfig = load_config(cli, "cluster-config")?;
    let (x, truth, spec_k) = match (&config.spec, &config.input_dir) {
        (Some(spec), _) => {
            let mut spec = spec.clone();
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let inst = sample_instance(&spec)?;
            (inst.x.clone(), Some(inst.z_star.clone()), Some(spec.k))
        }
        (None, Some(dir)) => {
            let x_path = dir.join("X.csv");
            if !x_path.exists() {
                return Err(CliError::Config(format!(
                    "missing-input: {} not found",
                    x_path.display()
                )));
            }
            let x = io::read_matrix_csv(&x_path)?;
            let truth = match dir.join("z_star.csv").exists() {
                true => Some(io::read_labels(&dir.join("z_star.csv"))?),
                false => None,
            };
            let spec_k = match dir.join("spec.json").exists() {
                true => {
                    let text = fs::read_to_string(dir.join("spec.json"))
                        .map_err(|e| io::io_err(&dir.join("spec.json"), e))?;
                    let spec: GmmSpec = serde_json::from_str(&text)
                        .map_err(|e| CliError::Config(format!("invalid-spec: spec.json: {e}")))?;
                    Some(spec.k)
                }
                false => None,
            };
            (x, truth, spec_k)
        }
        (None, None) => {
            return Err(CliError::Config(
                "missing-input: cluster config needs input_dir or an inline spec".into(),
            ))
        }
    };
    let k = config
        .k
        .or(spec_k)
        .ok_or_else(|| CliError::Config("invalid-spec: k not given and no spec.json".into()))?;
    let algorithm = algorithm_override(cli)?
        .or(config.algorithm)
        .unwrap_or(Algorithm::Alg1);
    let mut kmeans = config.kmeans.clone();
    if let Some(seed) = cli.seed {
        kmeans.seed = seed;
    }

    let out = algorithm.run(&x, k, &kmeans)?;
    let loss = match &truth {
        Some(z_star) => Some(misclustering_loss(&out.labels, z_star, k)?.loss),
        None => None,
    };
    match cli.format {
        Format::Csv => io::write_labels(&cli.out.join("labels.csv"), &out.labels)?,
        Format::Json => io::write_json(&cli.out.join("labels.json"), &out.labels)?,
    }
    io::write_matrix_csv(&cli.out.join("centers_hat.csv"), &out.centers_ambient)?;
    io::write_json(
        &cli.out.join("summary.json"),
        &ClusterSummary {
            loss,
            objective: out.objective,
            algorithm: algorithm.name().to_string(),
            k,
        },
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep and fit
// ---------------------------------------------------------------------------

fn cmd_sweep(cli: &Cli) -> Result<(), CliError> {
    let mut config: SweepConfig = load_config(cli, "sweep-config")?;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(alg) = algorithm_override(cli)? {
        config.algorithms = vec![alg];
    }
    config.validate()?;
    let records = run_sweep(&config)?;
    write_records(cli, &records)?;
    write_fits(cli, &records, &config.algorithms)?;
    Ok(())
}

fn cmd_fit(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <records.csv> is required".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("missing-input: {}: {e}", path.display())))?;
    let records = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str::<Vec<RecordRow>>(&text)
            .map_err(|e| CliError::Config(format!("invalid records json: {e}")))?
            .into_iter()
            .map(RecordRow::into_record)
            .collect(),
        _ => io::records_from_csv(&text)?,
    };
    let algorithms = match algorithm_override(cli)? {
        Some(a) => vec![a],
        None => {
            let mut present: Vec<Algorithm> = Vec::new();
            for r in &records {
                if !present.contains(&r.algorithm) {
                    present.push(r.algorithm);
                }
            }
            present.sort();
            present
        }
    };
    if algorithms.is_empty() {
        return Err(CliError::Config("no records to fit".into()));
    }
    write_fits(cli, &records, &algorithms)?;
    Ok(())
}

fn write_records(cli: &Cli, records: &[TrialRecord]) -> Result<(), CliError> {
    match cli.format {
        Format::Csv => {
            let path = cli.out.join("records.csv");
            fs::write(&path, io::records_to_csv(records)).map_err(|e| io::io_err(&path, e))
        }
        Format::Json => {
            let rows: Vec<RecordRow> = records.iter().map(RecordRow::from_record).collect();
            io::write_json(&cli.out.join("records.json"), &rows)
        }
    }
}

/// Row shape used for the JSON record encoding; mirrors the CSV columns.
#[derive(Serialize, Deserialize)]
struct RecordRow {
    delta: f64,
    trial: usize,
    algorithm: Algorithm,
    loss: f64,
    objective: f64,
    elapsed_ms: f64,
    seed: u64,
}

impl RecordRow {
    fn from_record(r: &TrialRecord) -> Self {
        RecordRow {
            delta: r.delta,
            trial: r.trial_index,
            algorithm: r.algorithm,
            loss: r.loss,
            objective: r.objective,
            elapsed_ms: 0.0,
            seed: r.seed_used,
        }
    }

    fn into_record(self) -> TrialRecord {
        TrialRecord {
            delta: self.delta,
            trial_index: self.trial,
            algorithm: self.algorithm,
            loss: self.loss,
            objective: self.objective,
            elapsed_ms: self.elapsed_ms,
            seed_used: self.seed,
        }
    }
}

fn write_fits(cli: &Cli, records: &[TrialRecord], algorithms: &[Algorithm]) -> Result<(), CliError> {
    let mut fits: BTreeMap<String, RateFit> = BTreeMap::new();
    let mut series = Vec::new();
    for &alg in algorithms {
        let fit = fit_rate(records, alg)?;
        series.push(svg::RateSeries {
            name: alg.name().to_string(),
            points: mean_log_points(records, alg),
            fit: fit_rate(records, alg)?,
        });
        fits.insert(alg.name().to_string(), fit);
    }
    io::write_json(&cli.out.join("ratefit.json"), &fits)?;
    let path = cli.out.join("rate.svg");
    fs::write(&path, svg::rate_plot(&series)).map_err(|e| io::io_err(&path, e))?;
    Ok(())
}

fn mean_log_points(records: &[TrialRecord], algorithm: Algorithm) -> Vec<(f64, f64)> {
    let mut by_delta: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.algorithm == algorithm) {
        if !r.loss.is_finite() {
            continue;
        }
        let e = by_delta.entry(r.delta.to_bits()).or_insert((r.delta, 0.0, 0));
        e.1 += r.loss;
        e.2 += 1;
    }
    let mut pts: Vec<(f64, f64)> = by_delta
        .values()
        .filter(|(_, sum, count)| *sum > 0.0 && *count > 0)
        .map(|(d, sum, count)| (d * d, (sum / *count as f64).ln()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn cmd_verify(cli: &Cli) -> Result<(), CliError> {
    let mut config: VerifySuiteConfig = match &cli.config {
        Some(_) => load_config(cli, "verify-config")?,
        None => VerifySuiteConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let report = run_suite(&config)?;
    io::write_json(&cli.out.join("verify.json"), &report)?;
    for check in &report.checks {
        eprintln!(
            "{:<28} {:>7}  margin {:+.4e}  {}",
            check.name,
            format!("{:?}", check.status).to_lowercase(),
            check.margin,
            check.detail
        );
    }
    if report.all_pass {
        Ok(())
    } else {
        Err(CliError::Internal("verification checks failed".into()))
    }
}
