//! Block schemes `K_0 = 1 < K_1 < ... < K_J = N + 1` and per-block noise statistics.

use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::model::{check_epsilon, OperatorSpectrum};

/// Smallest integer strictly greater than `x`, so `strict_ceil(3.0) == 4`.
pub fn strict_ceil(x: f64) -> i64 {
    x.floor() as i64 + 1
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockScheme {
    boundaries: Vec<usize>,
}

impl BlockScheme {
    /// Boundaries are the 1-based `K_0..K_J`; block `j` covers `K_{j-1}..K_j - 1`.
    pub fn new(boundaries: Vec<usize>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidScheme(
                "need at least two boundaries (one block)".into(),
            ));
        }
        if boundaries[0] != 1 {
            return Err(Error::InvalidScheme(format!(
                "first boundary must be 1, got {}",
                boundaries[0]
            )));
        }
        if let Some(w) = boundaries.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidScheme(format!(
                "boundaries must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { boundaries })
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// Number of blocks `J`.
    pub fn num_blocks(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// Last estimated index `N`.
    pub fn n(&self) -> usize {
        self.boundaries[self.boundaries.len() - 1] - 1
    }

    /// 0-based index range of block `j` (0-based).
    pub fn range(&self, j: usize) -> Range<usize> {
        self.boundaries[j] - 1..self.boundaries[j + 1] - 1
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.boundaries.windows(2).map(|w| w[0] - 1..w[1] - 1)
    }

    /// Block lengths `T_j`.
    pub fn lengths(&self) -> Vec<usize> {
        self.boundaries.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

pub fn custom_scheme(boundaries: Vec<usize>) -> Result<BlockScheme> {
    BlockScheme::new(boundaries)
}

/// Parameters of the weakly geometric block family at noise level `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeaklyGeometric {
    pub epsilon: f64,
    /// `nu = strict_ceil(log(1/epsilon))`
    pub nu: i64,
    /// `kappa = 1 / log(nu)`
    pub kappa: f64,
}

impl WeaklyGeometric {
    pub fn new(epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        let nu = strict_ceil(-epsilon.ln());
        if nu < 2 {
            return Err(Error::param(
                "epsilon",
                format!("weakly geometric blocks need epsilon <= 1/e (nu = {nu} leaves kappa undefined)"),
            ));
        }
        Ok(Self {
            epsilon,
            nu,
            kappa: 1.0 / (nu as f64).ln(),
        })
    }

    /// Untruncated length `T_j` for 1-based `j`.
    pub fn length(&self, j: usize) -> usize {
        let nu = self.nu as f64;
        let t = if j <= 1 {
            strict_ceil(nu)
        } else {
            strict_ceil(nu * (1.0 + self.kappa).powi(j as i32 - 1))
        };
        t as usize
    }

    /// `N-bar = max{m : sum_{k<=m} b_k^{-2} <= epsilon^{-2} kappa^{-3}}`.
    ///
    /// The spectrum must extend past `N-bar` so that maximality is certified.
    pub fn n_bar(&self, spectrum: &OperatorSpectrum) -> Result<usize> {
        let limit = self.epsilon.powi(-2) * self.kappa.powi(-3);
        let mut acc = 0.0;
        for i in 0..spectrum.len() {
            acc += spectrum.inv_sq(i);
            if acc > limit {
                return Ok(i);
            }
        }
        Err(Error::SpectrumTooShort {
            needed: spectrum.len() + 1,
            available: spectrum.len(),
        })
    }

    /// Geometric blocks up to `J = min{j : K_j > N-bar}`, with the last block
    /// clipped so that `K_J = N-bar + 1`.
    pub fn scheme(&self, spectrum: &OperatorSpectrum) -> Result<BlockScheme> {
        let n_bar = self.n_bar(spectrum)?;
        if n_bar == 0 {
            return Err(Error::InvalidScheme(format!(
                "b_1^(-2) already exceeds the bandwidth limit at epsilon = {}",
                self.epsilon
            )));
        }
        let mut k = vec![1usize];
        let mut j = 1;
        while *k.last().unwrap() <= n_bar {
            let next = k.last().unwrap() + self.length(j);
            k.push(next);
            j += 1;
        }
        *k.last_mut().unwrap() = n_bar + 1;
        if k[k.len() - 2] == n_bar + 1 {
            k.pop();
        }
        BlockScheme::new(k)
    }
}

pub fn weakly_geometric_scheme(epsilon: f64, spectrum: &OperatorSpectrum) -> Result<BlockScheme> {
    WeaklyGeometric::new(epsilon)?.scheme(spectrum)
}

/// Per-block noise quantities for a scheme, spectrum and noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    pub scheme: BlockScheme,
    pub epsilon: f64,
    /// `epsilon^2 b_k^{-2}` for `k = 1..=N`.
    pub index_variance: Vec<f64>,
    /// `sigma_j^2 = epsilon^2 sum b_k^{-2}`
    pub sigma2: Vec<f64>,
    /// `Sigma_j^2 = epsilon^4 sum b_k^{-4}`
    pub big_sigma2: Vec<f64>,
    /// `max_{k in I_j} epsilon^2 b_k^{-2}`
    pub max_var: Vec<f64>,
    /// `Delta_j = max_var_j / sigma_j^2`
    pub delta: Vec<f64>,
    /// `rho_eps = max_j sqrt(Delta_j)`
    pub rho: f64,
}

impl BlockStats {
    pub fn num_blocks(&self) -> usize {
        self.sigma2.len()
    }

    pub fn n(&self) -> usize {
        self.scheme.n()
    }

    pub(crate) fn check_block(&self, j: usize) -> Result<()> {
        if j < self.num_blocks() {
            Ok(())
        } else {
            Err(Error::param(
                "block",
                format!("block index {j} out of range (J = {})", self.num_blocks()),
            ))
        }
    }

    pub(crate) fn block_variances(&self, j: usize) -> &[f64] {
        &self.index_variance[self.scheme.range(j)]
    }

    /// `j,K_start,K_end,T_j,sigma2_j,Sigma2_j,Delta_j` rows with a
    /// `rho_eps=..,N=..,J=..` footer.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("j,K_start,K_end,T_j,sigma2_j,Sigma2_j,Delta_j\n");
        for (j, r) in self.scheme.ranges().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                j + 1,
                r.start + 1,
                r.end,
                r.len(),
                self.sigma2[j],
                self.big_sigma2[j],
                self.delta[j]
            );
        }
        let _ = writeln!(
            s,
            "rho_eps={},N={},J={}",
            self.rho,
            self.n(),
            self.num_blocks()
        );
        s
    }
}

pub fn block_stats(
    scheme: &BlockScheme,
    spectrum: &OperatorSpectrum,
    epsilon: f64,
) -> Result<BlockStats> {
    check_epsilon(epsilon)?;
    if spectrum.len() < scheme.n() {
        return Err(Error::SpectrumTooShort {
            needed: scheme.n(),
            available: spectrum.len(),
        });
    }
    let e2 = epsilon * epsilon;
    let index_variance: Vec<f64> = (0..scheme.n()).map(|i| e2 * spectrum.inv_sq(i)).collect();
    let j_count = scheme.num_blocks();
    let mut sigma2 = Vec::with_capacity(j_count);
    let mut big_sigma2 = Vec::with_capacity(j_count);
    let mut max_var = Vec::with_capacity(j_count);
    for r in scheme.ranges() {
        let v = &index_variance[r];
        sigma2.push(v.iter().sum::<f64>());
        big_sigma2.push(v.iter().map(|x| x * x).sum::<f64>());
        max_var.push(v.iter().copied().fold(0.0, f64::max));
    }
    let delta: Vec<f64> = max_var.iter().zip(&sigma2).map(|(m, s)| m / s).collect();
    let rho = delta.iter().copied().fold(0.0, f64::max).sqrt();
    Ok(BlockStats {
        scheme: scheme.clone(),
        epsilon,
        index_variance,
        sigma2,
        big_sigma2,
        max_var,
        delta,
        rho,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioReport {
    pub holds: bool,
    pub worst_ratio: f64,
    /// Single-block scheme: no consecutive pair exists.
    pub vacuous: bool,
}

/// `max_{j<J} sigma_{j+1}^2 / sigma_j^2 <= 1 + eta`.
pub fn check_ratio_condition(stats: &BlockStats, eta: f64) -> Result<RatioReport> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::param(
            "eta",
            format!("must lie in (0, 1/2), got {eta}"),
        ));
    }
    if stats.num_blocks() < 2 {
        return Ok(RatioReport {
            holds: true,
            worst_ratio: f64::NAN,
            vacuous: true,
        });
    }
    let worst_ratio = stats
        .sigma2
        .windows(2)
        .map(|w| w[1] / w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RatioReport {
        holds: worst_ratio <= 1.0 + eta,
        worst_ratio,
        vacuous: false,
    })
}
