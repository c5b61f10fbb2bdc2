//! Per-epsilon pipelines shared by the CLI subcommands.
//!
//! Every random quantity is drawn from a seed derived from
//! `(master_seed, epsilon index, purpose tag)`, so outputs depend only on the
//! configuration and never on scheduling.

use crate::blocks::{block_stats, custom_scheme, weakly_geometric_scheme, BlockScheme, BlockStats};
use crate::error::{Error, Result};
use crate::filters::{
    apply_filter, blockwise_oracle_risk, loss, monotone_oracle, quadratic_risk, tail_beyond,
    BlockFilter,
};
use crate::hulls::{hull_profile, HullProfile, HullVariant};
use crate::model::{make_signal, observe, power_spectrum, OperatorSpectrum, SignalCoefficients};
use crate::montecarlo::{derive_seed, Execution, McEstimate, MonteCarlo, NoiseStream};
use crate::penalties::{check_a1, check_a2, ct_penalty, mc_penalty, PenaltyValues};
use crate::stein::{block_energies, penalized_stein_filter, ure_filter};

use super::config::{ExperimentConfig, PenaltySpec, SchemeSpec};
use super::report::{guarded_ratio, CheckRow, Estimator, RiskReport, RiskRow, Status};

pub mod tags {
    pub const PENALTY: u64 = 1;
    pub const SIMULATION: u64 = 2;
    pub const CONSTANT: u64 = 3;
    pub const HULL: u64 = 4;
    pub const OBSERVATION: u64 = 5;
}

pub fn build_spectrum(config: &ExperimentConfig) -> Result<OperatorSpectrum> {
    power_spectrum(config.beta, config.b_scale, config.n_max)
}

pub fn build_signal(config: &ExperimentConfig) -> Result<SignalCoefficients> {
    let spec = config.signal_spec()?;
    make_signal(spec.kind, &spec.params, config.n_max)
}

pub fn build_scheme(
    config: &ExperimentConfig,
    epsilon: f64,
    spectrum: &OperatorSpectrum,
) -> Result<BlockScheme> {
    match &config.scheme {
        SchemeSpec::WeaklyGeometric => weakly_geometric_scheme(epsilon, spectrum),
        SchemeSpec::Explicit(b) => custom_scheme(b.clone()),
    }
}

/// Everything fixed for one grid value.
#[derive(Debug, Clone)]
pub struct Instance {
    pub index: usize,
    pub epsilon: f64,
    /// Seed for this grid value; purposes derive from it via [`tags`].
    pub seed: u64,
    pub spectrum: OperatorSpectrum,
    pub stats: BlockStats,
    pub signal: Option<SignalCoefficients>,
    pub execution: Execution,
}

impl Instance {
    pub fn build(
        config: &ExperimentConfig,
        index: usize,
        with_signal: bool,
        execution: Execution,
    ) -> Result<Self> {
        let epsilon = *config
            .epsilon_grid
            .get(index)
            .ok_or_else(|| Error::param("index", "outside the epsilon grid"))?;
        let spectrum = build_spectrum(config)?;
        let scheme = build_scheme(config, epsilon, &spectrum)?;
        let stats = block_stats(&scheme, &spectrum, epsilon)?;
        let signal = if with_signal {
            Some(build_signal(config)?)
        } else {
            None
        };
        Ok(Self {
            index,
            epsilon,
            seed: derive_seed(config.master_seed, index as u64),
            spectrum,
            stats,
            signal,
            execution,
        })
    }

    pub fn mc(&self, reps: usize, tag: u64) -> MonteCarlo {
        MonteCarlo::new(reps, derive_seed(self.seed, tag)).with_execution(self.execution)
    }

    pub fn stream(&self, tag: u64) -> NoiseStream {
        NoiseStream::new(derive_seed(self.seed, tag))
    }

    pub fn signal(&self) -> Result<&SignalCoefficients> {
        self.signal
            .as_ref()
            .ok_or_else(|| Error::config("signal.kind", "a signal is required (set signal.kind)"))
    }

    pub fn penalty(&self, spec: &PenaltySpec) -> Result<PenaltyValues> {
        match *spec {
            PenaltySpec::Ct { gamma } => ct_penalty(&self.stats, gamma),
            PenaltySpec::Mc { alpha, level, reps } => mc_penalty(
                &self.stats,
                alpha,
                level,
                &self.mc(reps, tags::PENALTY),
                None,
            ),
            PenaltySpec::None => Ok(PenaltyValues::zeros(self.stats.num_blocks())),
        }
    }
}

/// Spectrum and signal cut at `N`, with the discarded energy kept as tail.
fn truncate(
    inst: &Instance,
    signal: &SignalCoefficients,
) -> Result<(OperatorSpectrum, SignalCoefficients)> {
    let n = inst.stats.n();
    let spectrum = OperatorSpectrum::new(inst.spectrum.values()[..n].to_vec())?;
    let signal = SignalCoefficients::new(signal.theta[..n].to_vec())
        .with_tail_energy(tail_beyond(signal, n))?;
    Ok((spectrum, signal))
}

fn blockwise_loss(
    filter: &BlockFilter,
    obs: &crate::model::Observation,
    spectrum: &OperatorSpectrum,
    signal: &SignalCoefficients,
) -> Result<f64> {
    loss(&apply_filter(filter, obs, spectrum)?, signal)
}

/// Monte-Carlo risk of the penalized Stein and URE estimators against both
/// oracles, one pair of rows per grid value.
pub fn run_oracle_ratio(config: &ExperimentConfig, execution: Execution) -> Result<RiskReport> {
    let mut report = RiskReport::default();
    for index in 0..config.epsilon_grid.len() {
        let inst = Instance::build(config, index, true, execution)?;
        let full_signal = inst.signal()?;
        let pen = inst.penalty(&config.penalty)?;
        let (spectrum, signal) = truncate(&inst, full_signal)?;
        let stats = &inst.stats;
        let eps = inst.epsilon;

        let draws = inst
            .mc(config.reps, tags::SIMULATION)
            .run(|s| -> Result<(f64, f64)> {
                let obs = observe(&spectrum, &signal, eps, s)?;
                let energies = block_energies(&obs, &stats.scheme, &spectrum)?;
                let stein = penalized_stein_filter(&energies, stats, &pen)?;
                let ure = ure_filter(&energies, stats)?;
                Ok((
                    blockwise_loss(&stein, &obs, &spectrum, &signal)?,
                    blockwise_loss(&ure, &obs, &spectrum, &signal)?,
                ))
            });
        let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;
        let (stein, ure): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();

        let oracle_b = blockwise_oracle_risk(full_signal, stats)?;
        let mono = monotone_oracle(full_signal, &inst.spectrum, eps, config.n_max)?;
        let oracle_m = quadratic_risk(&mono, full_signal, &inst.spectrum, eps)?;

        for (estimator, samples, max_rel) in [
            (Estimator::PenalizedStein, &stein, pen.max_relative(stats)),
            (Estimator::Ure, &ure, 0.0),
        ] {
            let est = McEstimate::from_samples(samples);
            report.rows.push(RiskRow {
                epsilon: eps,
                estimator,
                mc_risk: est.mean,
                mc_std_error: est.std_error,
                oracle_risk_blockwise: oracle_b,
                oracle_risk_monotone: oracle_m,
                ratio_blockwise: guarded_ratio(est.mean, oracle_b),
                ratio_monotone: guarded_ratio(est.mean, oracle_m),
                max_pen_over_sigma2: max_rel,
                rho_eps: stats.rho,
            });
        }
    }
    Ok(report)
}

/// Assumption checks over the grid with `phi_j = pen_j / sigma_j^2`.
pub fn run_checks(
    config: &ExperimentConfig,
    execution: Execution,
    ratio_eta: f64,
) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let mut a2 = Vec::new();
    for index in 0..config.epsilon_grid.len() {
        let inst = Instance::build(config, index, false, execution)?;
        let stats = &inst.stats;
        let eps = inst.epsilon;
        let pen = inst.penalty(&config.penalty)?;
        let phi: Vec<f64> = pen
            .pen
            .iter()
            .zip(&stats.sigma2)
            .map(|(p, s)| p / s)
            .collect();
        if phi.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::config(
                "penalty.kind",
                "assumption checks need a positive penalty on every block",
            ));
        }
        let a1 = check_a1(stats, &phi)?;
        let slack = phi
            .iter()
            .zip(&stats.delta)
            .map(|(p, d)| p - (1.0 - 4.0 * d))
            .fold(f64::NEG_INFINITY, f64::max);
        let rep = check_a2(stats, &pen, &inst.mc(config.reps, tags::CONSTANT))?;
        a2.push((eps, rep.sum_over_eps2, rep.std_error));
        let ratio = crate::blocks::check_ratio_condition(stats, ratio_eta)?;
        rows.extend([
            CheckRow {
                epsilon: eps,
                check: "a1_lhs",
                value: a1.lhs,
                std_error: 0.0,
                status: Status::Info,
            },
            CheckRow {
                epsilon: eps,
                check: "a1_side_condition",
                value: slack,
                std_error: 0.0,
                status: Status::from_bool(a1.side_condition_holds),
            },
            CheckRow {
                epsilon: eps,
                check: "a2_sum_over_eps2",
                value: rep.sum_over_eps2,
                std_error: rep.std_error,
                status: Status::Info,
            },
            CheckRow {
                epsilon: eps,
                check: "ratio_condition",
                value: ratio.worst_ratio,
                std_error: 0.0,
                status: if ratio.vacuous {
                    Status::Info
                } else {
                    Status::from_bool(ratio.holds)
                },
            },
        ]);
    }
    if a2.len() > 1 {
        a2.sort_by(|a, b| b.0.total_cmp(&a.0));
        let worst = a2
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) - 3.0 * w[0].2.hypot(w[1].2))
            .fold(f64::NEG_INFINITY, f64::max);
        rows.push(CheckRow {
            epsilon: f64::NAN,
            check: "a2_nonincreasing",
            value: worst,
            std_error: 0.0,
            status: Status::from_bool(worst <= 0.0),
        });
    }
    Ok(rows)
}

/// Default `C2`: the measured `sum_j E[eta_j - pen_j]_+ / epsilon^2`.
pub fn measured_c2(inst: &Instance, pen: &PenaltyValues, reps: usize) -> Result<f64> {
    Ok(check_a2(&inst.stats, pen, &inst.mc(reps.max(10_000), tags::CONSTANT))?.sum_over_eps2)
}

/// Hull profiles over `grid` for each variant, all on the same draws.
pub fn run_hull(
    config: &ExperimentConfig,
    execution: Execution,
    variants: &[HullVariant],
    grid: &[f64],
    c2: Option<f64>,
) -> Result<Vec<HullProfile>> {
    config.single_epsilon()?;
    let inst = Instance::build(config, 0, true, execution)?;
    let pen = inst.penalty(&config.penalty)?;
    let c2 = match c2 {
        Some(c) => c,
        None => measured_c2(&inst, &pen, config.reps)?,
    };
    let mc = inst.mc(config.reps, tags::HULL);
    variants
        .iter()
        .map(|&v| hull_profile(inst.signal()?, &inst.stats, &pen, c2, v, &mc, grid))
        .collect()
}
