//! Penalty families, the block noise functional `eta_j`, and the bounds and
//! assumption checks that govern how large a penalty must be.

use std::fmt;
use std::fmt::Write as _;

use crate::blocks::BlockStats;
use crate::error::{ensure_len, Error, Result};
use crate::model::SignalCoefficients;
use crate::montecarlo::{McEstimate, MonteCarlo, NoiseStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    Ct,
    Mc,
    Explicit,
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PenaltyKind::Ct => "ct",
            PenaltyKind::Mc => "mc",
            PenaltyKind::Explicit => "explicit",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyParams {
    Ct { gamma: f64 },
    Mc { alpha: f64, level: f64, reps: usize },
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyValues {
    pub pen: Vec<f64>,
    pub params: PenaltyParams,
    /// Set for `gamma = 1/2`, where the exponential-sum condition on
    /// `phi_j = Delta_j^gamma` is known to fail.
    pub boundary_gamma: bool,
}

impl PenaltyValues {
    pub fn explicit(pen: Vec<f64>) -> Result<Self> {
        if let Some(j) = pen.iter().position(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::param(
                "pen",
                format!("pen_{} = {} must be finite and nonnegative", j + 1, pen[j]),
            ));
        }
        Ok(Self {
            pen,
            params: PenaltyParams::Explicit,
            boundary_gamma: false,
        })
    }

    pub fn zeros(num_blocks: usize) -> Self {
        Self {
            pen: vec![0.0; num_blocks],
            params: PenaltyParams::Explicit,
            boundary_gamma: false,
        }
    }

    pub fn kind(&self) -> PenaltyKind {
        match self.params {
            PenaltyParams::Ct { .. } => PenaltyKind::Ct,
            PenaltyParams::Mc { .. } => PenaltyKind::Mc,
            PenaltyParams::Explicit => PenaltyKind::Explicit,
        }
    }

    pub fn len(&self) -> usize {
        self.pen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pen.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            pen: self.pen.iter().map(|p| p * factor).collect(),
            params: PenaltyParams::Explicit,
            boundary_gamma: false,
        }
    }

    /// `max_j pen_j / sigma_j^2`.
    pub fn max_relative(&self, stats: &BlockStats) -> f64 {
        self.pen
            .iter()
            .zip(&stats.sigma2)
            .map(|(p, s)| p / s)
            .fold(0.0, f64::max)
    }

    /// `j,pen_j,kind,lemma2_bound,sigma2_j`.
    pub fn to_csv(&self, stats: &BlockStats, lemma2_c: f64) -> String {
        let mut s = String::from("j,pen_j,kind,lemma2_bound,sigma2_j\n");
        for (j, p) in self.pen.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                j + 1,
                p,
                self.kind(),
                lemma2_bound(stats, j, lemma2_c),
                stats.sigma2[j]
            );
        }
        s
    }

    pub(crate) fn check_against(&self, stats: &BlockStats) -> Result<()> {
        ensure_len(stats.num_blocks(), self.pen.len())
    }
}

/// `pen_j = Delta_j^gamma sigma_j^2` for `0 < gamma <= 1/2`.
pub fn ct_penalty(stats: &BlockStats, gamma: f64) -> Result<PenaltyValues> {
    if !(gamma > 0.0 && gamma <= 0.5) {
        return Err(Error::param(
            "gamma",
            format!("must lie in (0, 1/2], got {gamma}"),
        ));
    }
    let pen = stats
        .delta
        .iter()
        .zip(&stats.sigma2)
        .map(|(d, s)| d.powf(gamma) * s)
        .collect();
    Ok(PenaltyValues {
        pen,
        params: PenaltyParams::Ct { gamma },
        boundary_gamma: gamma == 0.5,
    })
}

/// One draw of the block noise functionals for a whole scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockNoiseDraw {
    /// `eta_j = sum_{k in I_j} epsilon^2 b_k^{-2} (xi_k^2 - 1)`
    pub eta: Vec<f64>,
    /// `X_j = epsilon sum_{k in I_j} theta_k b_k^{-1} xi_k`; zero without a signal.
    pub cross: Vec<f64>,
    /// `sum_{k in I_j} epsilon^2 b_k^{-2} xi_k^2`
    pub noise_energy: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

/// Draws `xi_1..xi_N` in index order and aggregates them per block.
pub fn draw_eta(
    stats: &BlockStats,
    signal: Option<&SignalCoefficients>,
    stream: &mut NoiseStream,
) -> Result<BlockNoiseDraw> {
    if let Some(s) = signal {
        if s.len() < stats.n() {
            return Err(Error::LengthMismatch {
                expected: stats.n(),
                found: s.len(),
            });
        }
    }
    let j_count = stats.num_blocks();
    let mut eta = Vec::with_capacity(j_count);
    let mut cross = Vec::with_capacity(j_count);
    let mut noise_energy = Vec::with_capacity(j_count);
    for (j, r) in stats.scheme.ranges().enumerate() {
        let mut energy = 0.0;
        let mut x = 0.0;
        for i in r {
            let v = stats.index_variance[i];
            let xi = stream.gaussian();
            energy += v * xi * xi;
            if let Some(s) = signal {
                x += s.theta[i] * v.sqrt() * xi;
            }
        }
        noise_energy.push(energy);
        eta.push(energy - stats.sigma2[j]);
        cross.push(x);
    }
    Ok(BlockNoiseDraw {
        eta,
        cross,
        noise_energy,
        seed: stream.seed(),
        stream: stream.stream(),
    })
}

/// A single draw of `eta_j` for block `j` (0-based).
pub fn draw_block_eta(stats: &BlockStats, j: usize, stream: &mut NoiseStream) -> f64 {
    stats
        .block_variances(j)
        .iter()
        .map(|v| {
            let xi = stream.gaussian();
            v * (xi * xi - 1.0)
        })
        .sum()
}

fn block_eta_sample(stats: &BlockStats, j: usize, mc: &MonteCarlo) -> Vec<f64> {
    mc.child(j as u64).run(|s| draw_block_eta(stats, j, s))
}

/// Monte-Carlo estimate of `E[eta_j - pen_j]_+`.
pub fn excess_expectation(
    stats: &BlockStats,
    j: usize,
    pen_j: f64,
    mc: &MonteCarlo,
) -> Result<McEstimate> {
    stats.check_block(j)?;
    mc.require_reps(1_000)?;
    let excess: Vec<f64> = block_eta_sample(stats, j, mc)
        .into_iter()
        .map(|e| (e - pen_j).max(0.0))
        .collect();
    Ok(McEstimate::from_samples(&excess))
}

/// Empirical tail functional `u -> mean(eta 1{eta >= u})` over a fixed
/// sample. Exactly nonincreasing for `u >= 0`.
#[derive(Debug, Clone)]
pub struct TailFunctional {
    /// Sample sorted in decreasing order.
    sorted: Vec<f64>,
    /// `prefix[i] = sum of the i largest values`.
    prefix: Vec<f64>,
}

impl TailFunctional {
    pub fn new(mut sample: Vec<f64>) -> Self {
        sample.sort_by(|a, b| b.total_cmp(a));
        let mut prefix = Vec::with_capacity(sample.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for x in &sample {
            acc += x;
            prefix.push(acc);
        }
        Self {
            sorted: sample,
            prefix,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        let count = self.sorted.partition_point(|&x| x >= u);
        self.prefix[count] / self.sorted.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.sorted.first().copied().unwrap_or(0.0)
    }

    /// `inf{u >= 0 : eval(u) <= level}` by bisection to absolute tolerance `tol`.
    /// The returned value satisfies `eval(U) <= level`, and `eval(U - tol) > level`
    /// whenever `U > 0`.
    pub fn threshold(&self, level: f64, tol: f64) -> f64 {
        if self.eval(0.0) <= level {
            return 0.0;
        }
        let mut lo = 0.0;
        let mut hi = self.max() + tol;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) <= level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// `U_j = inf{u : E eta_j 1{eta_j >= u} <= level}` estimated from `mc.reps`
/// draws of block `j`. `tol` defaults to `1e-9 sigma_j^2`.
pub fn tail_threshold(
    stats: &BlockStats,
    j: usize,
    level: f64,
    mc: &MonteCarlo,
    tol: Option<f64>,
) -> Result<f64> {
    stats.check_block(j)?;
    if !(level > 0.0) {
        return Err(Error::param(
            "level",
            format!("must be positive, got {level}"),
        ));
    }
    let tol = tol.unwrap_or(1e-9 * stats.sigma2[j]);
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let functional = TailFunctional::new(block_eta_sample(stats, j, mc));
    Ok(functional.threshold(level, tol))
}

/// `pen_j = (1 + alpha) U_j` with `level` defaulting to `epsilon^2`.
pub fn mc_penalty(
    stats: &BlockStats,
    alpha: f64,
    level: Option<f64>,
    mc: &MonteCarlo,
    tol: Option<f64>,
) -> Result<PenaltyValues> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::param(
            "alpha",
            format!("must be nonnegative, got {alpha}"),
        ));
    }
    mc.require_reps(10_000)?;
    let level = level.unwrap_or(stats.epsilon * stats.epsilon);
    let pen = (0..stats.num_blocks())
        .map(|j| tail_threshold(stats, j, level, mc, tol).map(|u| (1.0 + alpha) * u))
        .collect::<Result<Vec<_>>>()?;
    Ok(PenaltyValues {
        pen,
        params: PenaltyParams::Mc {
            alpha,
            level,
            reps: mc.reps,
        },
        boundary_gamma: false,
    })
}

/// Exclusive upper limit for `delta` in [`lemma1_bound`]: `1 / (2 max_k epsilon^2 b_k^{-2})`.
pub fn lemma1_delta_limit(stats: &BlockStats, j: usize) -> f64 {
    0.5 / stats.max_var[j]
}

/// Exponential-moment bound on `E[eta_j - pen_j]_+`:
///
/// `delta^{-1} exp{-delta pen + delta^2 Sigma_j^2 + 4 delta^3 sum v_k^3 / (1 - 2 delta v_max)}`
/// with `v_k = epsilon^2 b_k^{-2}` and `v_max` the largest `v_k` in the block.
pub fn lemma1_bound(stats: &BlockStats, j: usize, pen_j: f64, delta: f64) -> Result<f64> {
    stats.check_block(j)?;
    let limit = lemma1_delta_limit(stats, j);
    if !(delta > 0.0 && delta < limit) {
        return Err(Error::param(
            "delta",
            format!("must lie in (0, {limit}) for this block, got {delta}"),
        ));
    }
    let cubic: f64 = stats.block_variances(j).iter().map(|v| v * v * v).sum();
    let exponent = -delta * pen_j
        + delta * delta * stats.big_sigma2[j]
        + 4.0 * delta.powi(3) * cubic / (1.0 - 2.0 * delta * stats.max_var[j]);
    Ok(exponent.exp() / delta)
}

/// `sqrt(2 Sigma_j^2 log(C epsilon^{-4} Sigma_j^2))`, or 0 when the log is not positive.
pub fn lemma2_bound(stats: &BlockStats, j: usize, c: f64) -> f64 {
    let s2 = stats.big_sigma2[j];
    let log = (c * stats.epsilon.powi(-4) * s2).ln();
    if log > 0.0 {
        (2.0 * s2 * log).sqrt()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A1Report {
    /// `sum_j max_{k in I_j} b_k^{-2} exp[-phi_j^2 / (16 Delta_j (1 + 2 sqrt(phi_j)))]`
    pub lhs: f64,
    /// `phi_j <= 1 - 4 Delta_j` on every block.
    pub side_condition_holds: bool,
}

pub fn check_a1(stats: &BlockStats, phi: &[f64]) -> Result<A1Report> {
    ensure_len(stats.num_blocks(), phi.len())?;
    if let Some(j) = phi.iter().position(|p| !(*p > 0.0)) {
        return Err(Error::param(
            "phi",
            format!("phi_{} must be positive", j + 1),
        ));
    }
    let e2 = stats.epsilon * stats.epsilon;
    let mut lhs = 0.0;
    let mut side = true;
    for (j, &p) in phi.iter().enumerate() {
        let d = stats.delta[j];
        let max_inv_sq = stats.max_var[j] / e2;
        lhs += max_inv_sq * (-(p * p) / (16.0 * d * (1.0 + 2.0 * p.sqrt()))).exp();
        side &= p <= 1.0 - 4.0 * d;
    }
    Ok(A1Report {
        lhs,
        side_condition_holds: side,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A2Report {
    /// `sum_j E[eta_j - pen_j]_+ / epsilon^2`
    pub sum_over_eps2: f64,
    pub std_error: f64,
    /// `sum_j E[eta_j - 2 pen_j]_+ / epsilon^2`, the quantity the V-hull needs.
    pub double_pen_sum_over_eps2: f64,
    pub double_pen_std_error: f64,
}

pub fn check_a2(stats: &BlockStats, pen: &PenaltyValues, mc: &MonteCarlo) -> Result<A2Report> {
    pen.check_against(stats)?;
    mc.require_reps(10_000)?;
    let e2 = stats.epsilon * stats.epsilon;
    let (mut sum, mut var, mut sum2, mut var2) = (0.0, 0.0, 0.0, 0.0);
    for (j, &p) in pen.pen.iter().enumerate() {
        let sample = block_eta_sample(stats, j, mc);
        let single: Vec<f64> = sample.iter().map(|e| (e - p).max(0.0)).collect();
        let double: Vec<f64> = sample.iter().map(|e| (e - 2.0 * p).max(0.0)).collect();
        let a = McEstimate::from_samples(&single);
        let b = McEstimate::from_samples(&double);
        sum += a.mean;
        var += a.std_error * a.std_error;
        sum2 += b.mean;
        var2 += b.std_error * b.std_error;
    }
    Ok(A2Report {
        sum_over_eps2: sum / e2,
        std_error: var.sqrt() / e2,
        double_pen_sum_over_eps2: sum2 / e2,
        double_pen_std_error: var2.sqrt() / e2,
    })
}
