use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use rstcnn::analysis::CertificateStatus;
use rstcnn::basis::{build_basis, sample_filter_bank, BankGrid, SpatialKind};
use rstcnn::data::{make_rs_dataset, read_idx, write_idx};
use rstcnn::harness::{
    basis_validate, bounds_report, run_equivariance_sweep, run_stability_trials, sweep_csv,
    BoundsConfig, DataSource, StabilityConfig, SweepConfig, DATA_DIR_ENV,
};
use rstcnn::net::{ConfigFile, NetworkConfig};
use rstcnn::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;
const EXIT_PARSE: u8 = 4;

/// Roto-scale-translation equivariant networks: basis checks, filter banks,
/// equivariance sweeps and stability certificates.
#[derive(Parser)]
#[command(name = "rstcnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spatial, angular and scale basis checks.
    Basis {
        #[command(subcommand)]
        action: BasisCmd,
    },
    /// Sampled filter banks.
    Bank {
        #[command(subcommand)]
        action: BankCmd,
    },
    /// Equivariance experiments.
    Equi {
        #[command(subcommand)]
        action: EquiCmd,
    },
    /// Deformation-stability certificates.
    Stab {
        #[command(subcommand)]
        action: StabCmd,
    },
    /// Filter integral bounds.
    Bounds {
        #[command(subcommand)]
        action: BoundsCmd,
    },
    /// Dataset construction.
    Data {
        #[command(subcommand)]
        action: DataCmd,
    },
}

#[derive(Subcommand)]
enum BasisCmd {
    /// Gram matrix and Laplacian residual of the first K spatial modes.
    Validate {
        #[arg(long, default_value = "fb")]
        basis: SpatialKind,
        #[arg(long = "K", default_value_t = 10)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BankCmd {
    /// Sample a filter bank and write it as an RSTBANK1 file.
    Build(BankArgs),
}

#[derive(Args)]
struct BankArgs {
    /// Network config; the bank of `--layer` is built from it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// 1-based layer index used with `--config`.
    #[arg(long, default_value_t = 1)]
    layer: usize,
    #[arg(long, default_value = "fb")]
    basis: SpatialKind,
    #[arg(long = "K", default_value_t = 10)]
    k: usize,
    #[arg(long = "N_r", default_value_t = 8)]
    n_rot: usize,
    #[arg(long = "N_s", default_value_t = 9)]
    n_scale: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    t: f64,
    #[arg(long = "L", default_value_t = 11)]
    stencil: usize,
    #[arg(long, default_value_t = 0)]
    j: i32,
    #[arg(long)]
    out: PathBuf,
}

/// Group element flags; any one given overrides the configured element.
#[derive(Args)]
struct GroupArgs {
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    vx: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    vy: Option<f64>,
}

impl GroupArgs {
    fn apply(&self, g: &mut rstcnn::group::GroupElement) {
        let eta = self.eta.unwrap_or(g.eta);
        let beta = self.beta.unwrap_or(g.beta);
        let v = [self.vx.unwrap_or(g.v[0]), self.vy.unwrap_or(g.v[1])];
        *g = rstcnn::group::GroupElement::new(eta, beta, v);
    }
}

#[derive(Subcommand)]
enum EquiCmd {
    /// Per-layer equivariance error over a (K, L_alpha, seed) grid, as CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Named preset used when no config is given.
    #[arg(long, default_value = "fig3")]
    preset: String,
    /// Sweep config (TOML, or a previous CSV/JSON artifact).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Network config replacing the sweep's network template.
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long = "K", value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long = "L_alpha", value_delimiter = ',')]
    l_alphas: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[command(flatten)]
    g: GroupArgs,
    #[arg(long)]
    image_size: Option<usize>,
    #[arg(long)]
    inputs_per_seed: Option<usize>,
    #[arg(long)]
    margin: Option<usize>,
    /// IDX image file; relative paths resolve against the data directory.
    #[arg(long)]
    idx: Option<PathBuf>,
    /// Use synthetic blob inputs even if the config names an IDX file.
    #[arg(long, conflicts_with = "idx")]
    synthetic: bool,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum StabCmd {
    /// Seeded deformation-stability trials, as JSON.
    Trials(StabArgs),
}

#[derive(Args)]
struct StabArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Requested sup |grad tau| levels.
    #[arg(long, value_delimiter = ',')]
    grad: Option<Vec<f64>>,
    #[command(flatten)]
    g: GroupArgs,
    #[arg(long)]
    max_freq: Option<u32>,
    #[arg(long)]
    image_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BoundsCmd {
    /// Filter integrals of A2-normalized random coefficient draws, as JSON.
    Report(BoundsArgs),
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DataCmd {
    /// Randomly rotate and rescale an IDX image set.
    RsMake {
        /// IDX images; relative paths resolve against the data directory.
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 56)]
        upsize: usize,
        /// Output IDX images.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        out_labels: Option<PathBuf>,
    },
}

enum Failure {
    Lib(Error),
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::CountMismatch { .. } => EXIT_PARSE,
        Error::Cell { source, .. } => exit_code(source),
        _ => EXIT_CONFIG,
    }
}

fn data_path(p: &Path) -> PathBuf {
    if p.is_relative() && !p.exists() {
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            return Path::new(&dir).join(p);
        }
    }
    p.to_path_buf()
}

/// Experiment configs load from TOML, from JSON, or from the `# config:`
/// line of a CSV artifact. JSON reports nest the config under `config`.
fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let bad = |e: String| Error::Config(format!("{}: {e}", path.display()));
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => {
            let line = text
                .lines()
                .find_map(|l| l.strip_prefix("# config: "))
                .ok_or_else(|| bad("no `# config:` line".into()))?;
            serde_json::from_str(line).map_err(|e| bad(e.to_string()))
        }
        Some("json") => {
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
            let v = match v.get("config") {
                Some(c) => c.clone(),
                None => v,
            };
            serde_json::from_value(v).map_err(|e| bad(e.to_string()))
        }
        _ => toml::from_str(&text).map_err(|e| bad(e.to_string())),
    }
}

fn load_network(path: &Path) -> Result<ConfigFile, Error> {
    let file: ConfigFile = load_config(path)?;
    file.resolve()?;
    Ok(file)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Basis {
            action: BasisCmd::Validate { basis, k, out },
        } => {
            let v = basis_validate(basis, k)?;
            emit(out.as_deref(), &json(&v))?;
        }
        Command::Bank {
            action: BankCmd::Build(a),
        } => {
            let (kind, k, grid) = match &a.config {
                Some(p) => {
                    let cfg = NetworkConfig::from_path(p)?;
                    let spec = cfg.layers.get(a.layer.wrapping_sub(1)).ok_or_else(|| {
                        Error::Config(format!("layer {} outside 1..={}", a.layer, cfg.depth()))
                    })?;
                    let grid = BankGrid {
                        n_rot: cfg.n_rot,
                        n_scale: cfg.n_scale,
                        t: cfg.t,
                        stencil: spec.stencil,
                        layer_scale: spec.layer_scale,
                    };
                    (cfg.spatial_kind, spec.k, grid)
                }
                None => (
                    a.basis,
                    a.k,
                    BankGrid {
                        n_rot: a.n_rot,
                        n_scale: a.n_scale,
                        t: a.t,
                        stencil: a.stencil,
                        layer_scale: a.j,
                    },
                ),
            };
            let basis = build_basis(kind, k, 0, 1)?;
            sample_filter_bank(&basis, &grid)?.save(&a.out)?;
        }
        Command::Equi {
            action: EquiCmd::Sweep(a),
        } => {
            let mut cfg: SweepConfig = match &a.config {
                Some(p) => load_config(p)?,
                None if a.preset == "fig3" => SweepConfig::fig3(),
                None => return Err(Error::Config(format!("unknown preset `{}`", a.preset)).into()),
            };
            if let Some(p) = &a.network {
                cfg.network = load_network(p)?;
            }
            if let Some(v) = a.ks {
                cfg.ks = v;
            }
            if let Some(v) = a.l_alphas {
                cfg.l_alphas = v;
            }
            if let Some(v) = a.seeds {
                cfg.seeds = v;
            }
            a.g.apply(&mut cfg.g);
            if let Some(v) = a.image_size {
                cfg.image_size = v;
            }
            if let Some(v) = a.inputs_per_seed {
                cfg.inputs_per_seed = v;
            }
            if let Some(v) = a.margin {
                cfg.margin = v;
            }
            if let Some(p) = &a.idx {
                cfg.data = DataSource::Idx { images: data_path(p) };
            } else if a.synthetic {
                cfg.data = DataSource::Synthetic;
            }
            cfg.workers = a.workers;
            let rows = run_equivariance_sweep(&cfg)?;
            emit(a.out.as_deref(), &sweep_csv(&cfg, &rows))?;
        }
        Command::Stab {
            action: StabCmd::Trials(a),
        } => {
            let mut cfg: StabilityConfig = match &a.config {
                Some(p) => load_config(p)?,
                None => StabilityConfig::default_trials(),
            };
            if let Some(p) = &a.network {
                cfg.network = load_network(p)?;
            }
            if let Some(v) = a.seeds {
                cfg.seeds = v;
            }
            if let Some(v) = a.grad {
                cfg.grad_levels = v;
            }
            a.g.apply(&mut cfg.g);
            if let Some(v) = a.max_freq {
                cfg.max_freq = v;
            }
            if let Some(v) = a.image_size {
                cfg.image_size = v;
            }
            cfg.workers = a.workers;
            let trials = run_stability_trials(&cfg)?;
            let report = serde_json::json!({ "config": cfg, "trials": trials });
            emit(a.out.as_deref(), &json(&report))?;
            let bad = trials
                .iter()
                .filter(|t| t.report.status == CertificateStatus::Violation)
                .count();
            if bad > 0 {
                return Err(Failure::Violation(format!(
                    "{bad} of {} trials violate the stability certificate",
                    trials.len()
                )));
            }
        }
        Command::Bounds {
            action: BoundsCmd::Report(a),
        } => {
            let mut cfg: BoundsConfig = match &a.config {
                Some(p) => load_config(p)?,
                None => BoundsConfig::default(),
            };
            if let Some(p) = &a.network {
                cfg.network = load_network(p)?;
            }
            if let Some(v) = a.seeds {
                cfg.draws = v;
            }
            cfg.workers = a.workers;
            let report = bounds_report(&cfg)?;
            emit(a.out.as_deref(), &json(&report))?;
            if report.worst_ratio > 1.02 {
                return Err(Failure::Violation(format!(
                    "filter integrals reach {:.4} times A",
                    report.worst_ratio
                )));
            }
        }
        Command::Data {
            action:
                DataCmd::RsMake {
                    images,
                    labels,
                    seed,
                    upsize,
                    out,
                    out_labels,
                },
        } => {
            let labels = labels.map(|p| data_path(&p));
            let set = read_idx(data_path(&images), labels.as_deref())?;
            let rs = make_rs_dataset(&set, seed, upsize);
            write_idx(&rs, &out, out_labels.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("violation: {msg}");
            ExitCode::from(EXIT_VIOLATION)
        }
    }
}
