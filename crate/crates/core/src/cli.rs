//! `stmcap` command line.
//!
//! Every subcommand resolves one [`ExperimentConfig`]: the preset for the
//! subcommand and `--scale`, replaced by `--config` if given (a config file or
//! a previous run's `manifest.json`), then patched by `key=value` overrides
//! (`network.nodes=64`, `solver.max_iterations=5000`, ...) and `--seed`.
//! Values parse as JSON and fall back to plain strings.
//!
//! Exit status is 2 for usage and config errors, 1 for runtime failures (and
//! for unconverged solves under `--strict`), 0 otherwise. `STMCAP_THREADS`
//! caps the worker pool.

use std::ffi::OsString;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::bases::{BasisKind, SparsityBasis, DEFAULT_LEVELS};
use crate::bounds::{bound_curve, calibrate_rip, crossing_length, geometric_grid, BoundParams};
use crate::error::Error;
use crate::experiments::svg::{LinePlot, Series, PALETTE};
use crate::experiments::{
    default_output_dir, derive_seed, run_experiment, ExperimentConfig, ExperimentKind, Scale,
};
use crate::network::Network;
use crate::rip::{exact_rip, probe_rip};

pub const THREADS_ENV: &str = "STMCAP_THREADS";
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(
    name = "stmcap",
    version,
    about = "Short-term memory capacity of linear recurrent networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the configured network and export W, z and the eigenvalues.
    BuildNet(RunArgs),
    /// Recover a full input history from the final state.
    Recover(RunArgs),
    /// Recovery phase diagram over (M/N, k/M) for each basis.
    Phase(RunArgs),
    /// Proxy-recovery error vs window length, with the bound overlaid.
    Optlen(RunArgs),
    /// Estimate RIP constants of the operator for `signal_length` columns.
    RipProbe {
        #[command(flatten)]
        run: RunArgs,
        /// Enumerate every support instead of sampling.
        #[arg(long)]
        exact: bool,
        /// Sampled supports (default 1000).
        #[arg(long)]
        samples: Option<usize>,
        /// Support size (defaults to the config's sparsity).
        #[arg(long)]
        sparsity: Option<usize>,
    },
    /// Print the mutual coherence of a basis with the Fourier grid.
    Coherence {
        #[arg(long)]
        basis: BasisKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_LEVELS)]
        levels: usize,
    },
    /// Evaluate the recovery bound over window lengths.
    BoundCurve {
        #[command(flatten)]
        run: RunArgs,
        /// Skip calibration and use this delta (requires --c).
        #[arg(long, requires = "c")]
        delta: Option<f64>,
        #[arg(long, requires = "delta")]
        c: Option<f64>,
        /// Largest input magnitude (default 1).
        #[arg(long)]
        s_max: Option<f64>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Experiment config or manifest JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed (default: the config's, 0 for presets).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory (default: `output_dir` from the config, else `runs/<kind>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit 1 if any solve fails to converge.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value = "desk")]
    pub scale: Scale,
    /// `key=value` config overrides, dotted keys for nested fields.
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub versions: serde_json::Map<String, Value>,
    pub subcommand: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    /// Subcommand flags outside the config; reused when re-running from
    /// this manifest unless given again.
    pub arguments: Value,
    pub outputs: Vec<String>,
    pub solver_failures: usize,
    pub summary: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct RipArguments {
    exact: bool,
    samples: usize,
    sparsity: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct BoundArguments {
    delta: Option<f64>,
    c: Option<f64>,
    s_max: f64,
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// status. Messages go to stdout and stderr.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_threads();
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn dispatch(command: &Command) -> Result<i32, CliError> {
    match command {
        Command::Coherence { basis, n, levels } => {
            let b = SparsityBasis::with_levels(*basis, *n, *levels)
                .map_err(|e| CliError::Config(e.to_string()))?;
            println!("{:?}", b.default_coherence()?);
            Ok(0)
        }
        Command::Recover(run) => experiment(run, ExperimentKind::FiniteRecovery, "recover"),
        Command::Phase(run) => experiment(run, ExperimentKind::PhaseDiagram, "phase"),
        Command::Optlen(run) => experiment(run, ExperimentKind::OptimalLength, "optlen"),
        Command::BuildNet(run) => {
            let config = resolve_config(run, ExperimentKind::FiniteRecovery, false)?;
            let dir = prepare_dir(run, &config, "build_net")?;
            let network = seeded_network(&config)?;
            let outputs = export_network(&network, &dir)?;
            let summary = serde_json::json!({
                "nodes": network.nodes(),
                "decay": network.decay(),
                "eigenvector_norm": network.eigenvector_norm(),
            });
            finish(
                run,
                "build-net",
                &config,
                &dir,
                Value::Null,
                outputs,
                0,
                summary,
            )
        }
        Command::RipProbe {
            run,
            exact,
            samples,
            sparsity,
        } => {
            let config = resolve_config(run, ExperimentKind::FiniteRecovery, false)?;
            let previous: Option<RipArguments> = manifest_arguments(run, "rip-probe")?;
            let args = RipArguments {
                exact: *exact || previous.is_some_and(|a| a.exact),
                samples: samples.or(previous.map(|a| a.samples)).unwrap_or(1000),
                sparsity: sparsity.or(previous.and_then(|a| a.sparsity)),
            };
            let dir = prepare_dir(run, &config, "rip_probe")?;
            let network = seeded_network(&config)?;
            let basis = config
                .basis()
                .map_err(|e| CliError::Config(e.to_string()))?;
            let op = network.assemble_operator(config.signal_length)?.matrix;
            let s = args.sparsity.unwrap_or(config.sparsity).max(1);
            let est = if args.exact {
                exact_rip(&op, &basis, s)?
            } else {
                probe_rip(&op, &basis, s, args.samples, derive_seed(config.seed, &[3]))?
            };
            let mut w = csv::Writer::from_path(dir.join("rip.csv"))?;
            w.write_record([
                "sparsity",
                "method",
                "c_hat",
                "delta_hat",
                "min_ratio",
                "max_ratio",
            ])?;
            w.write_record([
                s.to_string(),
                if args.exact {
                    "exact".into()
                } else {
                    format!("probe:{}", args.samples)
                },
                est.c_hat.to_string(),
                est.delta_hat.to_string(),
                est.min_ratio.to_string(),
                est.max_ratio.to_string(),
            ])?;
            w.flush()?;
            println!("delta_hat={} c_hat={}", est.delta_hat, est.c_hat);
            let summary = serde_json::to_value(est)?;
            let arguments = serde_json::to_value(args)?;
            finish(
                run,
                "rip-probe",
                &config,
                &dir,
                arguments,
                vec!["rip.csv".into()],
                0,
                summary,
            )
        }
        Command::BoundCurve {
            run,
            delta,
            c,
            s_max,
        } => {
            let config = resolve_config(run, ExperimentKind::OptimalLength, false)?;
            let previous: Option<BoundArguments> = manifest_arguments(run, "bound-curve")?;
            let args = match (delta, c) {
                (Some(_), Some(_)) => BoundArguments {
                    delta: *delta,
                    c: *c,
                    s_max: s_max.or(previous.map(|a| a.s_max)).unwrap_or(1.0),
                },
                _ => BoundArguments {
                    delta: previous.and_then(|a| a.delta),
                    c: previous.and_then(|a| a.c),
                    s_max: s_max.or(previous.map(|a| a.s_max)).unwrap_or(1.0),
                },
            };
            let dir = prepare_dir(run, &config, "bound_curve")?;
            let network = seeded_network(&config)?;
            let (delta, c, calibration) = match (args.delta, args.c) {
                (Some(d), Some(c)) => (d, c, None),
                _ => {
                    let est = calibrate_rip(
                        &network,
                        config.optlen.calibration_sparsity,
                        config.optlen.calibration_samples,
                        derive_seed(config.seed, &[3]),
                    )?;
                    (est.delta_hat, est.c_hat, Some(est))
                }
            };
            let mut p = BoundParams::new(
                network.nodes(),
                config.network.decay,
                config.sparsity as f64,
                args.s_max,
                delta,
                c,
            );
            p.alpha = config.optlen.alpha;
            p.beta = config.optlen.beta;
            p.rho = config.optlen.rho;
            p.u_norm = network.eigenvector_norm();
            p.validate().map_err(|e| CliError::Config(e.to_string()))?;
            let hi = (config.signal_length as f64).max(3.0);
            let curve = bound_curve(
                &p,
                &geometric_grid(2.0, hi, config.optlen.bound_grid.max(2)),
            )?;
            curve.write_csv(File::create(dir.join("bound_curve.csv"))?)?;
            let mut series = Series::new(
                "total",
                curve.points.iter().map(|q| (q.l, q.total)).collect(),
                PALETTE[1],
            );
            series.markers = false;
            let plot = LinePlot {
                title: format!("Recovery bound, M = {}, k = {}, q = {}", p.nodes, p.k, p.q),
                x_label: "L".into(),
                y_label: "bound".into(),
                log_y: true,
                series: vec![series],
            };
            fs::write(dir.join("bound_curve.svg"), plot.render())?;
            let minima = curve.local_minima();
            println!("local minima at L = {minima:?}");
            let summary = serde_json::json!({
                "params": p,
                "calibration": calibration,
                "crossing_length": crossing_length(&p),
                "local_minima": minima,
            });
            finish(
                run,
                "bound-curve",
                &config,
                &dir,
                serde_json::to_value(args)?,
                vec!["bound_curve.csv".into(), "bound_curve.svg".into()],
                0,
                summary,
            )
        }
    }
}

fn experiment(run: &RunArgs, kind: ExperimentKind, name: &str) -> Result<i32, CliError> {
    let config = resolve_config(run, kind, true)?;
    let dir = prepare_dir(run, &config, kind.name())?;
    let out = run_experiment(&config, &dir)?;
    println!("{}", serde_json::to_string(&out.summary)?);
    finish(
        run,
        name,
        &config,
        &dir,
        Value::Null,
        out.outputs,
        out.solver_failures,
        out.summary,
    )
}

fn seeded_network(config: &ExperimentConfig) -> Result<Network, CliError> {
    let mut spec = config.network.clone();
    spec.seed = derive_seed(config.seed, &[0]);
    spec.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Network::build(&spec)?)
}

fn prepare_dir(
    run: &RunArgs,
    config: &ExperimentConfig,
    fallback: &str,
) -> Result<PathBuf, CliError> {
    let dir = match (&run.out, &config.output_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => d.clone(),
        (None, None) if fallback == config.kind.name() => default_output_dir(config),
        (None, None) => PathBuf::from("runs").join(fallback),
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    run: &RunArgs,
    subcommand: &str,
    config: &ExperimentConfig,
    dir: &Path,
    arguments: Value,
    outputs: Vec<String>,
    solver_failures: usize,
    summary: Value,
) -> Result<i32, CliError> {
    let manifest = Manifest {
        tool: "stmcap".into(),
        versions: [("stmcap".to_string(), Value::from(env!("CARGO_PKG_VERSION")))]
            .into_iter()
            .collect(),
        subcommand: subcommand.into(),
        seed: config.seed,
        config_sha256: config_hash(config)?,
        config: config.clone(),
        arguments,
        outputs,
        solver_failures,
        summary,
    };
    fs::write(
        dir.join(MANIFEST_NAME),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    if run.strict && solver_failures > 0 {
        eprintln!("{solver_failures} solve(s) did not converge");
        return Ok(1);
    }
    Ok(0)
}

/// SHA-256 of the config's compact JSON serialization.
pub fn config_hash(config: &ExperimentConfig) -> Result<String, CliError> {
    let text = serde_json::to_string(config)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

/// Builds the run config from the preset, `--config`, overrides and `--seed`.
/// `kind` picks the preset; with `require_kind` a config of another kind is
/// rejected.
pub fn resolve_config(
    run: &RunArgs,
    kind: ExperimentKind,
    require_kind: bool,
) -> Result<ExperimentConfig, CliError> {
    let mut value = match &run.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            match v {
                Value::Object(mut m) if m.contains_key("config_sha256") => {
                    m.remove("config").unwrap_or(Value::Null)
                }
                other => other,
            }
        }
        None => serde_json::to_value(ExperimentConfig::preset(kind, run.scale))?,
    };
    for o in &run.overrides {
        apply_override(&mut value, o)?;
    }
    let text = value.to_string();
    let de = &mut serde_json::Deserializer::from_str(&text);
    let mut config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.inner()))
    })?;
    if require_kind && config.kind != kind {
        return Err(CliError::Config(format!(
            "config kind is {} but the subcommand runs {kind}",
            config.kind
        )));
    }
    if let Some(seed) = run.seed {
        config.seed = seed;
    }
    config
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

/// Subcommand flags recorded in the manifest passed as `--config`, if it
/// came from the same subcommand.
fn manifest_arguments<T: DeserializeOwned>(
    run: &RunArgs,
    subcommand: &str,
) -> Result<Option<T>, CliError> {
    let Some(path) = &run.config else {
        return Ok(None);
    };
    let v: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    if v.get("config_sha256").is_none()
        || v.get("subcommand").and_then(Value::as_str) != Some(subcommand)
    {
        return Ok(None);
    }
    match v.get("arguments") {
        None | Some(Value::Null) => Ok(None),
        Some(a) => serde_json::from_value(a.clone())
            .map(Some)
            .map_err(|e| CliError::Config(format!("manifest arguments: {e}"))),
    }
}

fn apply_override(root: &mut Value, text: &str) -> Result<(), CliError> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{text}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            CliError::Config(format!(
                "override `{key}`: `{part}` is not inside an object"
            ))
        })?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Err(CliError::Config(format!("empty override key in `{text}`")))
}

fn export_network(network: &Network, dir: &Path) -> Result<Vec<String>, CliError> {
    let m = network.nodes();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(dir.join("weights.csv"))?;
    for i in 0..m {
        w.write_record((0..m).map(|j| network.weights()[(i, j)].to_string()))?;
    }
    w.flush()?;

    let mut z = csv::Writer::from_path(dir.join("feedforward.csv"))?;
    z.write_record(["node", "z"])?;
    for (i, v) in network.feedforward().iter().enumerate() {
        z.write_record([i.to_string(), v.to_string()])?;
    }
    z.flush()?;

    let mut e = csv::Writer::from_path(dir.join("eigenvalues.csv"))?;
    e.write_record(["index", "re", "im", "modulus", "phase"])?;
    for (i, v) in network.eigenvalues().iter().enumerate() {
        e.write_record([
            i.to_string(),
            v.re.to_string(),
            v.im.to_string(),
            v.norm().to_string(),
            v.arg().to_string(),
        ])?;
    }
    e.flush()?;
    Ok(vec![
        "weights.csv".into(),
        "feedforward.csv".into(),
        "eigenvalues.csv".into(),
    ])
}
