//! Unbiased-risk and penalized blockwise Stein filters.

use crate::blocks::{BlockScheme, BlockStats};
use crate::error::{ensure_len, Error, Result};
use crate::filters::BlockFilter;
use crate::model::{Observation, OperatorSpectrum};
use crate::penalties::PenaltyValues;

/// `||y~||^2_(j) = sum_{k in I_j} b_k^{-2} y_k^2`, whose expectation is
/// `||theta||^2_(j) + sigma_j^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEnergies {
    pub scheme: BlockScheme,
    pub epsilon: f64,
    pub y_energy: Vec<f64>,
}

pub fn block_energies(
    obs: &Observation,
    scheme: &BlockScheme,
    spectrum: &OperatorSpectrum,
) -> Result<BlockEnergies> {
    ensure_len(spectrum.len(), obs.len())?;
    if scheme.n() > obs.len() {
        return Err(Error::LengthMismatch {
            expected: scheme.n(),
            found: obs.len(),
        });
    }
    let y_energy = scheme
        .ranges()
        .map(|r| r.map(|i| spectrum.inv_sq(i) * obs.y[i] * obs.y[i]).sum())
        .collect();
    Ok(BlockEnergies {
        scheme: scheme.clone(),
        epsilon: obs.epsilon,
        y_energy,
    })
}

fn same_scheme(energies: &BlockEnergies, stats: &BlockStats) -> Result<()> {
    if energies.scheme == stats.scheme {
        Ok(())
    } else {
        Err(Error::SchemeMismatch)
    }
}

/// `(1 - threshold / energy)_+`, zero for an empty block.
fn shrink(energy: f64, threshold: f64) -> f64 {
    if energy > 0.0 {
        (1.0 - threshold / energy).max(0.0)
    } else {
        0.0
    }
}

/// Minimizer of the unbiased risk estimate over blockwise constant filters.
pub fn ure_filter(energies: &BlockEnergies, stats: &BlockStats) -> Result<BlockFilter> {
    same_scheme(energies, stats)?;
    let lam = energies
        .y_energy
        .iter()
        .zip(&stats.sigma2)
        .map(|(e, s)| shrink(*e, *s))
        .collect();
    Ok(BlockFilter::new_unchecked(stats.scheme.clone(), lam))
}

/// `lambda*_j = (1 - (sigma_j^2 + pen_j) / ||y~||^2_(j))_+`.
pub fn penalized_stein_filter(
    energies: &BlockEnergies,
    stats: &BlockStats,
    pen: &PenaltyValues,
) -> Result<BlockFilter> {
    same_scheme(energies, stats)?;
    pen.check_against(stats)?;
    let lam = energies
        .y_energy
        .iter()
        .zip(&stats.sigma2)
        .zip(&pen.pen)
        .map(|((e, s), p)| shrink(*e, s + p))
        .collect();
    Ok(BlockFilter::new_unchecked(stats.scheme.clone(), lam))
}

/// Penalized unbiased risk estimate
/// `sum_j (lambda_j^2 - 2 lambda_j)(||y~||^2_(j) - sigma_j^2) + lambda_j^2 sigma_j^2 + 2 lambda_j pen_j`.
/// With `pen = None` this is the plain estimate `U(y, lambda)`.
pub fn u_p(
    energies: &BlockEnergies,
    stats: &BlockStats,
    pen: Option<&PenaltyValues>,
    filter: &BlockFilter,
) -> Result<f64> {
    same_scheme(energies, stats)?;
    if filter.scheme() != &stats.scheme {
        return Err(Error::SchemeMismatch);
    }
    if let Some(p) = pen {
        p.check_against(stats)?;
    }
    Ok((0..stats.num_blocks())
        .map(|j| {
            let l = filter.lam()[j];
            let p = pen.map_or(0.0, |p| p.pen[j]);
            block_criterion(l, energies.y_energy[j], stats.sigma2[j], p)
        })
        .sum())
}

#[inline]
pub(crate) fn block_criterion(lam: f64, y_energy: f64, sigma2: f64, pen: f64) -> f64 {
    (lam * lam - 2.0 * lam) * (y_energy - sigma2) + lam * lam * sigma2 + 2.0 * lam * pen
}
