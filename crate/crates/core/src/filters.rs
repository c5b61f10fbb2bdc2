//! Linear filters `theta_hat_k = lambda_k b_k^{-1} y_k`, their exact risk,
//! and the blockwise and monotone oracles.

use crate::blocks::{BlockScheme, BlockStats};
use crate::csvio::write_indexed;
use crate::error::{ensure_len, Error, Result};
use crate::model::{check_epsilon, Observation, OperatorSpectrum, SignalCoefficients};

pub trait Filter {
    /// Number of leading indices the filter may be nonzero on.
    fn support(&self) -> usize;

    /// Per-index coefficients `lambda_1..lambda_n`, zero past the support.
    fn expand(&self, n: usize) -> Vec<f64>;

    /// `k,lambda_k` over the filter's support.
    fn to_csv(&self) -> String {
        write_indexed("lambda_k", &self.expand(self.support()))
    }
}

fn check_unit_interval(lam: &[f64]) -> Result<()> {
    match lam.iter().position(|l| !(0.0..=1.0).contains(l)) {
        Some(i) => Err(Error::param(
            "lambda",
            format!("coefficient {} = {} outside [0, 1]", i + 1, lam[i]),
        )),
        None => Ok(()),
    }
}

/// A filter constant on each block and zero past `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFilter {
    scheme: BlockScheme,
    lam: Vec<f64>,
}

impl BlockFilter {
    pub fn new(scheme: BlockScheme, lam: Vec<f64>) -> Result<Self> {
        ensure_len(scheme.num_blocks(), lam.len())?;
        check_unit_interval(&lam)?;
        Ok(Self { scheme, lam })
    }

    pub(crate) fn new_unchecked(scheme: BlockScheme, lam: Vec<f64>) -> Self {
        debug_assert!(lam.iter().all(|l| (0.0..=1.0).contains(l)));
        Self { scheme, lam }
    }

    pub fn zeros(scheme: &BlockScheme) -> Self {
        Self {
            lam: vec![0.0; scheme.num_blocks()],
            scheme: scheme.clone(),
        }
    }

    pub fn scheme(&self) -> &BlockScheme {
        &self.scheme
    }

    pub fn lam(&self) -> &[f64] {
        &self.lam
    }

    /// Nonincreasing across blocks, hence also a member of the monotone class.
    pub fn is_monotone(&self) -> bool {
        self.lam.windows(2).all(|w| w[1] <= w[0])
    }
}

impl Filter for BlockFilter {
    fn support(&self) -> usize {
        self.scheme.n()
    }

    fn expand(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (r, &l) in self.scheme.ranges().zip(&self.lam) {
            let end = r.end.min(n);
            if r.start < end {
                out[r.start..end].fill(l);
            }
        }
        out
    }
}

/// `1 >= lambda_1 >= lambda_2 >= ... >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneFilter {
    lam: Vec<f64>,
}

impl MonotoneFilter {
    pub fn new(lam: Vec<f64>) -> Result<Self> {
        check_unit_interval(&lam)?;
        if let Some(i) = lam.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::param(
                "lambda",
                format!(
                    "monotone filter increases between k = {} and k = {}",
                    i + 1,
                    i + 2
                ),
            ));
        }
        Ok(Self { lam })
    }

    pub fn lam(&self) -> &[f64] {
        &self.lam
    }
}

impl Filter for MonotoneFilter {
    fn support(&self) -> usize {
        self.lam.len()
    }

    fn expand(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        let m = n.min(self.lam.len());
        out[..m].copy_from_slice(&self.lam[..m]);
        out
    }
}

fn check_support(filter: &impl Filter, n: usize) -> Result<()> {
    if filter.support() > n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: filter.support(),
        });
    }
    Ok(())
}

/// The estimate `theta_hat_k = lambda_k b_k^{-1} y_k`.
pub fn apply_filter(
    filter: &impl Filter,
    obs: &Observation,
    spectrum: &OperatorSpectrum,
) -> Result<SignalCoefficients> {
    ensure_len(spectrum.len(), obs.len())?;
    check_support(filter, obs.len())?;
    let lam = filter.expand(obs.len());
    let theta = lam
        .iter()
        .zip(&obs.y)
        .zip(spectrum.values())
        .map(|((l, y), b)| if *l == 0.0 { 0.0 } else { l * y / b })
        .collect();
    Ok(SignalCoefficients::new(theta))
}

/// `R(theta, lambda) = sum (1 - lambda_k)^2 theta_k^2 + epsilon^2 sum lambda_k^2 b_k^{-2}`,
/// plus the signal's declared tail energy.
pub fn quadratic_risk(
    filter: &impl Filter,
    signal: &SignalCoefficients,
    spectrum: &OperatorSpectrum,
    epsilon: f64,
) -> Result<f64> {
    ensure_len(spectrum.len(), signal.len())?;
    check_support(filter, signal.len())?;
    check_epsilon(epsilon)?;
    let e2 = epsilon * epsilon;
    let lam = filter.expand(signal.len());
    let risk: f64 = lam
        .iter()
        .zip(&signal.theta)
        .enumerate()
        .map(|(i, (l, t))| (1.0 - l) * (1.0 - l) * t * t + e2 * l * l * spectrum.inv_sq(i))
        .sum();
    Ok(risk + signal.tail_energy)
}

/// `||estimate - signal||^2` plus the signal's tail energy.
pub fn loss(estimate: &SignalCoefficients, signal: &SignalCoefficients) -> Result<f64> {
    ensure_len(signal.len(), estimate.len())?;
    let d: f64 = estimate
        .theta
        .iter()
        .zip(&signal.theta)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(d + signal.tail_energy)
}

/// `||theta||^2_(j)` for every block.
pub fn block_signal_energy(signal: &SignalCoefficients, scheme: &BlockScheme) -> Result<Vec<f64>> {
    if signal.len() < scheme.n() {
        return Err(Error::LengthMismatch {
            expected: scheme.n(),
            found: signal.len(),
        });
    }
    Ok(scheme
        .ranges()
        .map(|r| signal.theta[r].iter().map(|t| t * t).sum())
        .collect())
}

/// `sum_{k > N} theta_k^2` plus the declared tail energy.
pub fn tail_beyond(signal: &SignalCoefficients, n: usize) -> f64 {
    signal.theta.iter().skip(n).map(|t| t * t).sum::<f64>() + signal.tail_energy
}

/// The risk minimizer over blockwise constant filters:
/// `lambda_j = ||theta||^2_(j) / (sigma_j^2 + ||theta||^2_(j))`.
pub fn blockwise_oracle(signal: &SignalCoefficients, stats: &BlockStats) -> Result<BlockFilter> {
    let energy = block_signal_energy(signal, &stats.scheme)?;
    let lam = energy
        .iter()
        .zip(&stats.sigma2)
        .map(|(t, s)| t / (s + t))
        .collect();
    Ok(BlockFilter::new_unchecked(stats.scheme.clone(), lam))
}

/// `R(theta, lambda^0)` in closed form.
pub fn blockwise_oracle_risk(signal: &SignalCoefficients, stats: &BlockStats) -> Result<f64> {
    let energy = block_signal_energy(signal, &stats.scheme)?;
    let blocks: f64 = energy
        .iter()
        .zip(&stats.sigma2)
        .map(|(t, s)| if *t == 0.0 { 0.0 } else { s * t / (s + t) })
        .sum();
    Ok(blocks + tail_beyond(signal, stats.n()))
}

/// The exact risk minimizer over nonincreasing filters on `1..=n_max`.
///
/// The risk is `sum w_k (lambda_k - a_k)^2 + const` with
/// `a_k = theta_k^2 / (theta_k^2 + epsilon^2 b_k^{-2})` and
/// `w_k = theta_k^2 + epsilon^2 b_k^{-2}`, so the minimizer is the weighted
/// antitonic regression of `a` computed by pool-adjacent-violators.
pub fn monotone_oracle(
    signal: &SignalCoefficients,
    spectrum: &OperatorSpectrum,
    epsilon: f64,
    n_max: usize,
) -> Result<MonotoneFilter> {
    check_epsilon(epsilon)?;
    if n_max == 0 {
        return Err(Error::param("n_max", "must be at least 1"));
    }
    let avail = signal.len().min(spectrum.len());
    if n_max > avail {
        return Err(Error::LengthMismatch {
            expected: n_max,
            found: avail,
        });
    }
    let e2 = epsilon * epsilon;
    let (targets, weights): (Vec<f64>, Vec<f64>) = (0..n_max)
        .map(|i| {
            let t2 = signal.theta[i] * signal.theta[i];
            let w = t2 + e2 * spectrum.inv_sq(i);
            (t2 / w, w)
        })
        .unzip();
    let lam = antitonic_regression(&targets, &weights)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    Ok(MonotoneFilter { lam })
}

/// Weighted least-squares projection onto nonincreasing sequences.
/// Adjacent pools with equal means are merged, scanning left to right.
pub fn antitonic_regression(values: &[f64], weights: &[f64]) -> Vec<f64> {
    debug_assert_eq!(values.len(), weights.len());
    // (weighted sum, total weight, count)
    let mut pools: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        pools.push((v * w, w, 1));
        while pools.len() >= 2 {
            let (s1, w1, c1) = pools[pools.len() - 1];
            let (s0, w0, c0) = pools[pools.len() - 2];
            if s0 / w0 <= s1 / w1 {
                pools.pop();
                *pools.last_mut().unwrap() = (s0 + s1, w0 + w1, c0 + c1);
            } else {
                break;
            }
        }
    }
    pools
        .into_iter()
        .flat_map(|(s, w, c)| std::iter::repeat_n(s / w, c))
        .collect()
}
