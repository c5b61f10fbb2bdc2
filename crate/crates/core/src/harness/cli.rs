use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::blocks::block_stats;
use crate::error::{Error, Result};
use crate::filters::{apply_filter, BlockFilter, Filter};
use crate::hulls::HullVariant;
use crate::model::{observe, Observation, OperatorSpectrum};
use crate::montecarlo::{derive_seed, Execution};
use crate::stein::{block_energies, penalized_stein_filter, ure_filter};

use super::config::{ConfigSource, ExperimentConfig, SEED_ENV};
use super::experiment::{
    build_scheme, build_signal, build_spectrum, run_checks, run_hull, run_oracle_ratio, tags,
    Instance,
};
use super::report::{check_table, hull_rows, HULL_HEADER};

const DEFAULT_B_GRID: &str = "0,0.25,0.5,1,2,4,8,16,32,64,128,256,512,1024";

#[derive(Parser, Debug)]
#[command(
    name = "steinhull",
    version,
    about = "Penalized blockwise Stein estimation and risk-hull checks for the Gaussian sequence model",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Shared {
    /// Configuration file of `key = value` lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override any configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long, value_name = "LIST")]
    epsilon_grid: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    b_scale: Option<String>,
    #[arg(long)]
    n_max: Option<String>,
    /// Signal kind: zero, spike, power_smooth, exp_smooth, explicit.
    #[arg(long)]
    signal: Option<String>,
    #[arg(long, value_name = "LIST")]
    signal_params: Option<String>,
    /// Penalty kind: mc, ct or none.
    #[arg(long)]
    penalty: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    /// Master seed (overrides STEINHULL_SEED and the config file).
    #[arg(long)]
    seed: Option<String>,
    /// Output path; standard output when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<String>,
    /// Run replications on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    #[value(name = "V", alias = "v")]
    V,
    #[value(name = "W", alias = "w")]
    W,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EstimatorArg {
    Stein,
    Ure,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the block scheme and per-block statistics.
    Blocks {
        #[command(flatten)]
        shared: Shared,
    },
    /// Simulate one observation.
    Simulate {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, value_name = "FILE")]
        spectrum_out: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        signal_out: Option<PathBuf>,
    },
    /// Compute the data-driven filter from an observation file.
    Estimate {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, value_name = "FILE")]
        obs: PathBuf,
        /// Spectrum CSV; defaults to the configured power spectrum.
        #[arg(long, value_name = "FILE")]
        spectrum: Option<PathBuf>,
        /// Where to write the coefficient estimate.
        #[arg(long, value_name = "FILE")]
        estimate_out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "stein")]
        estimator: EstimatorArg,
    },
    /// Print per-block penalties.
    Penalty {
        #[command(flatten)]
        shared: Shared,
        /// Constant inside the logarithm of the lower bound.
        #[arg(long, default_value_t = 1.0)]
        lemma2_c: f64,
    },
    /// Monte-Carlo hull verification over a grid of B values.
    VerifyHull {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, value_enum, default_value = "both")]
        variant: VariantArg,
        #[arg(long, value_delimiter = ',', default_value = DEFAULT_B_GRID)]
        b_grid: Vec<f64>,
        /// Residual constant; measured from the penalty when absent.
        #[arg(long)]
        c2: Option<f64>,
    },
    /// Risk of the estimators relative to the oracles across the epsilon grid.
    OracleRatio {
        #[command(flatten)]
        shared: Shared,
    },
    /// Assumption checks across the epsilon grid.
    Check {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, default_value_t = 0.3)]
        ratio_eta: f64,
    },
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_config(
    shared: &Shared,
    seed_env: Option<&str>,
    require_signal: bool,
) -> Result<ExperimentConfig> {
    let mut src = match &shared.config {
        Some(p) => ConfigSource::from_text(&read_file(p)?, &p.display().to_string())?,
        None => ConfigSource::new(),
    };
    src.apply_seed_env(seed_env)?;
    for a in &shared.set {
        src.set_assignment(a, format!("--set {a}"))?;
    }
    let flags = [
        ("epsilon", "--epsilon", &shared.epsilon),
        ("epsilon_grid", "--epsilon-grid", &shared.epsilon_grid),
        ("beta", "--beta", &shared.beta),
        ("b_scale", "--b-scale", &shared.b_scale),
        ("n_max", "--n-max", &shared.n_max),
        ("signal.kind", "--signal", &shared.signal),
        ("signal.params", "--signal-params", &shared.signal_params),
        ("penalty.kind", "--penalty", &shared.penalty),
        ("reps", "--reps", &shared.reps),
        ("master_seed", "--seed", &shared.seed),
        ("out", "--out", &shared.out),
    ];
    for (key, flag, value) in flags {
        if let Some(v) = value {
            src.set(key, v, flag)?;
        }
    }
    src.build(require_signal)
}

fn execution(shared: &Shared) -> Execution {
    if shared.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn emit(config: &ExperimentConfig, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match &config.out {
        Some(p) => write_file(p, text),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn run(command: Command, seed_env: Option<&str>, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Blocks { shared } => {
            let config = load_config(&shared, seed_env, false)?;
            let inst = Instance::build(&config, single(&config)?, false, execution(&shared))?;
            emit(&config, &inst.stats.to_csv(), stdout)
        }
        Command::Simulate {
            shared,
            spectrum_out,
            signal_out,
        } => {
            let config = load_config(&shared, seed_env, true)?;
            let eps = config.single_epsilon()?;
            let spectrum = build_spectrum(&config)?;
            let signal = build_signal(&config)?;
            let mut stream = crate::montecarlo::NoiseStream::new(derive_seed(
                derive_seed(config.master_seed, 0),
                tags::OBSERVATION,
            ));
            let obs = observe(&spectrum, &signal, eps, &mut stream)?;
            if let Some(p) = spectrum_out {
                write_file(&p, &spectrum.to_csv())?;
            }
            if let Some(p) = signal_out {
                write_file(&p, &signal.to_csv())?;
            }
            emit(&config, &obs.to_csv(), stdout)
        }
        Command::Estimate {
            shared,
            obs,
            spectrum,
            estimate_out,
            estimator,
        } => {
            let mut config = load_config(&shared, seed_env, false)?;
            let obs = Observation::from_csv(&read_file(&obs)?)?;
            config.epsilon_grid = vec![obs.epsilon];
            config.n_max = obs.len();
            let spectrum = match spectrum {
                Some(p) => OperatorSpectrum::from_csv(&read_file(&p)?)?,
                None => build_spectrum(&config)?,
            };
            let scheme = build_scheme(&config, obs.epsilon, &spectrum)?;
            let stats = block_stats(&scheme, &spectrum, obs.epsilon)?;
            let inst = Instance {
                index: 0,
                epsilon: obs.epsilon,
                seed: derive_seed(config.master_seed, 0),
                spectrum,
                stats,
                signal: None,
                execution: execution(&shared),
            };
            let energies = block_energies(&obs, &inst.stats.scheme, &inst.spectrum)?;
            let filter: BlockFilter = match estimator {
                EstimatorArg::Stein => {
                    penalized_stein_filter(&energies, &inst.stats, &inst.penalty(&config.penalty)?)?
                }
                EstimatorArg::Ure => ure_filter(&energies, &inst.stats)?,
            };
            if let Some(p) = estimate_out {
                write_file(&p, &apply_filter(&filter, &obs, &inst.spectrum)?.to_csv())?;
            }
            emit(&config, &filter.to_csv(), stdout)
        }
        Command::Penalty { shared, lemma2_c } => {
            let config = load_config(&shared, seed_env, false)?;
            let inst = Instance::build(&config, single(&config)?, false, execution(&shared))?;
            let pen = inst.penalty(&config.penalty)?;
            emit(&config, &pen.to_csv(&inst.stats, lemma2_c), stdout)
        }
        Command::VerifyHull {
            shared,
            variant,
            b_grid,
            c2,
        } => {
            let config = load_config(&shared, seed_env, true)?;
            let variants: &[HullVariant] = match variant {
                VariantArg::V => &[HullVariant::V],
                VariantArg::W => &[HullVariant::W],
                VariantArg::Both => &[HullVariant::V, HullVariant::W],
            };
            let profiles = run_hull(&config, execution(&shared), variants, &b_grid, c2)?;
            let mut text = format!("{HULL_HEADER}\n");
            for p in &profiles {
                text.push_str(&hull_rows(p));
            }
            emit(&config, &text, stdout)?;
            if profiles.iter().any(|p| p.selected().is_none()) {
                return Err(Error::NoGridPointHolds {
                    tried: b_grid.len(),
                });
            }
            Ok(())
        }
        Command::OracleRatio { shared } => {
            let config = load_config(&shared, seed_env, true)?;
            let report = run_oracle_ratio(&config, execution(&shared))?;
            emit(&config, &report.to_csv(), stdout)
        }
        Command::Check { shared, ratio_eta } => {
            let config = load_config(&shared, seed_env, false)?;
            let rows = run_checks(&config, execution(&shared), ratio_eta)?;
            emit(&config, &check_table(&rows), stdout)
        }
    }
}

fn single(config: &ExperimentConfig) -> Result<usize> {
    config.single_epsilon().map(|_| 0)
}

/// Like [`cli_dispatch`] with an explicit value for `STEINHULL_SEED`.
pub fn cli_dispatch_with_env<I, T>(
    args: I,
    seed_env: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return u8::try_from(code).unwrap_or(2);
        }
    };
    match run(cli.command, seed_env, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the exit status.
pub fn cli_dispatch<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let seed = std::env::var(SEED_ENV).ok();
    cli_dispatch_with_env(args, seed.as_deref(), stdout, stderr)
}
