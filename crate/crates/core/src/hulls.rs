//! Risk hulls on blockwise constant filters and their Monte-Carlo verification.
//!
//! For a noise draw, the loss of a blockwise filter decomposes per block as
//! `(1 - l)^2 ||theta||^2_(j) + l^2 S_j - 2 l (1 - l) X_j` where `S_j` is the
//! weighted noise energy and `X_j` the signal/noise cross term. Loss minus
//! hull is therefore a quadratic in each `l = lambda_j`, and its supremum over
//! `[0, 1]^J` separates into `J` one-dimensional maximizations.

use std::fmt;
use std::str::FromStr;

use crate::blocks::BlockStats;
use crate::error::{Error, Result};
use crate::filters::{block_signal_energy, blockwise_oracle_risk, tail_beyond, BlockFilter};
use crate::model::SignalCoefficients;
use crate::montecarlo::{McEstimate, MonteCarlo};
use crate::penalties::{draw_eta, BlockNoiseDraw, PenaltyValues};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HullVariant {
    /// Penalty enters as `2 lambda_j pen_j`.
    V,
    /// Penalty enters as `lambda_j^2 pen_j`.
    W,
}

impl fmt::Display for HullVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HullVariant::V => "V",
            HullVariant::W => "W",
        })
    }
}

impl FromStr for HullVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V" | "v" => Ok(HullVariant::V),
            "W" | "w" => Ok(HullVariant::W),
            other => Err(Error::UnknownKind {
                what: "hull variant",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HullSpec {
    pub pen: PenaltyValues,
    /// Multiplier of `rho_eps`.
    pub b: f64,
    /// Residual term is `c2 epsilon^2`.
    pub c2: f64,
    pub variant: HullVariant,
}

impl HullSpec {
    pub fn new(pen: PenaltyValues, b: f64, c2: f64, variant: HullVariant) -> Result<Self> {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::param(
                "B",
                format!("must be finite and nonnegative, got {b}"),
            ));
        }
        if !(c2 >= 0.0 && c2.is_finite()) {
            return Err(Error::param(
                "C2",
                format!("must be finite and nonnegative, got {c2}"),
            ));
        }
        Ok(Self {
            pen,
            b,
            c2,
            variant,
        })
    }
}

/// Signal-dependent quantities shared by every hull evaluation.
#[derive(Debug, Clone)]
pub struct HullEvaluator<'a> {
    spec: &'a HullSpec,
    stats: &'a BlockStats,
    signal: &'a SignalCoefficients,
    theta2: Vec<f64>,
    tail: f64,
    oracle_risk: f64,
}

impl<'a> HullEvaluator<'a> {
    pub fn new(
        spec: &'a HullSpec,
        signal: &'a SignalCoefficients,
        stats: &'a BlockStats,
    ) -> Result<Self> {
        spec.pen.check_against(stats)?;
        Ok(Self {
            theta2: block_signal_energy(signal, &stats.scheme)?,
            tail: tail_beyond(signal, stats.n()),
            oracle_risk: blockwise_oracle_risk(signal, stats)?,
            spec,
            stats,
            signal,
        })
    }

    fn inflation(&self) -> f64 {
        1.0 + self.spec.b * self.stats.rho
    }

    fn residual(&self) -> f64 {
        self.spec.c2 * self.stats.epsilon * self.stats.epsilon
            + self.spec.b * self.stats.rho * self.oracle_risk
    }

    fn penalty_term(&self, j: usize, l: f64) -> f64 {
        match self.spec.variant {
            HullVariant::V => 2.0 * l * self.spec.pen.pen[j],
            HullVariant::W => l * l * self.spec.pen.pen[j],
        }
    }

    pub fn value(&self, filter: &BlockFilter) -> Result<f64> {
        if filter.scheme() != &self.stats.scheme {
            return Err(Error::SchemeMismatch);
        }
        let blocks: f64 = filter
            .lam()
            .iter()
            .enumerate()
            .map(|(j, &l)| {
                (1.0 - l) * (1.0 - l) * self.theta2[j]
                    + l * l * self.stats.sigma2[j]
                    + self.penalty_term(j, l)
            })
            .sum();
        Ok(self.inflation() * (blocks + self.tail) + self.residual())
    }

    /// Coefficients `(a, b, k)` of `l -> a l^2 + b l + k`, the block-`j`
    /// contribution to loss minus hull.
    pub fn block_quadratic(&self, j: usize, draw: &BlockNoiseDraw) -> (f64, f64, f64) {
        let c = self.inflation();
        let t2 = self.theta2[j];
        let x = draw.cross[j];
        let pen = self.spec.pen.pen[j];
        let mut a = t2 + draw.noise_energy[j] + 2.0 * x - c * t2 - c * self.stats.sigma2[j];
        let mut b = -2.0 * t2 - 2.0 * x + 2.0 * c * t2;
        match self.spec.variant {
            HullVariant::V => b -= 2.0 * c * pen,
            HullVariant::W => a -= c * pen,
        }
        (a, b, t2 - c * t2)
    }

    /// `max_{l in [0,1]}` of the block-`j` quadratic.
    pub fn block_sup(&self, j: usize, draw: &BlockNoiseDraw) -> f64 {
        let (a, b, k) = self.block_quadratic(j, draw);
        let mut best = k.max(a + b + k);
        if a < 0.0 {
            let l = -b / (2.0 * a);
            if l > 0.0 && l < 1.0 {
                best = best.max(k - b * b / (4.0 * a));
            }
        }
        best
    }

    /// The exact `sup_lambda [loss(lambda) - hull(lambda)]` for one draw.
    pub fn sup(&self, draw: &BlockNoiseDraw) -> f64 {
        let blocks: f64 = (0..self.stats.num_blocks())
            .map(|j| self.block_sup(j, draw))
            .sum();
        // Loss carries the tail once; the hull carries it inflated.
        blocks + self.tail - self.inflation() * self.tail - self.residual()
    }

    pub fn signal(&self) -> &SignalCoefficients {
        self.signal
    }
}

pub fn hull_value(
    spec: &HullSpec,
    signal: &SignalCoefficients,
    stats: &BlockStats,
    filter: &BlockFilter,
) -> Result<f64> {
    HullEvaluator::new(spec, signal, stats)?.value(filter)
}

pub fn sup_loss_minus_hull(
    spec: &HullSpec,
    signal: &SignalCoefficients,
    stats: &BlockStats,
    draw: &BlockNoiseDraw,
) -> Result<f64> {
    if draw.eta.len() != stats.num_blocks() {
        return Err(Error::LengthMismatch {
            expected: stats.num_blocks(),
            found: draw.eta.len(),
        });
    }
    Ok(HullEvaluator::new(spec, signal, stats)?.sup(draw))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullCheck {
    pub mean: f64,
    pub std_error: f64,
    /// `mean + 3 std_error <= 0`
    pub holds: bool,
}

impl From<McEstimate> for HullCheck {
    fn from(e: McEstimate) -> Self {
        Self {
            mean: e.mean,
            std_error: e.std_error,
            holds: e.mean + 3.0 * e.std_error <= 0.0,
        }
    }
}

/// Monte-Carlo estimate of `E sup_lambda [loss - hull]`.
pub fn verify_hull(
    spec: &HullSpec,
    signal: &SignalCoefficients,
    stats: &BlockStats,
    mc: &MonteCarlo,
) -> Result<HullCheck> {
    mc.require_reps(1_000)?;
    let eval = HullEvaluator::new(spec, signal, stats)?;
    // Length was checked by the evaluator; draws cannot fail past this point.
    let sups = mc.run(|s| eval.sup(&draw_eta(stats, Some(signal), s).expect("signal covers N")));
    Ok(McEstimate::from_samples(&sups).into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HullProfile {
    pub variant: HullVariant,
    pub c2: f64,
    /// `(B, check)` for each grid value, in grid order.
    pub points: Vec<(f64, HullCheck)>,
}

impl HullProfile {
    /// Smallest grid `B` whose check holds.
    pub fn selected(&self) -> Option<f64> {
        self.points.iter().find(|(_, c)| c.holds).map(|(b, _)| *b)
    }
}

/// Runs [`verify_hull`] for every `B` in `grid`, reusing the same draws.
#[allow(clippy::too_many_arguments)]
pub fn hull_profile(
    signal: &SignalCoefficients,
    stats: &BlockStats,
    pen: &PenaltyValues,
    c2: f64,
    variant: HullVariant,
    mc: &MonteCarlo,
    grid: &[f64],
) -> Result<HullProfile> {
    if grid.is_empty() {
        return Err(Error::param("grid", "must contain at least one value"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("grid", "must be strictly increasing"));
    }
    let points = grid
        .iter()
        .map(|&b| {
            let spec = HullSpec::new(pen.clone(), b, c2, variant)?;
            Ok((b, verify_hull(&spec, signal, stats, mc)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HullProfile {
        variant,
        c2,
        points,
    })
}

/// Smallest `B` on `grid` for which the hull inequality holds.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_b(
    signal: &SignalCoefficients,
    stats: &BlockStats,
    pen: &PenaltyValues,
    c2: f64,
    variant: HullVariant,
    mc: &MonteCarlo,
    grid: &[f64],
) -> Result<(f64, HullProfile)> {
    let profile = hull_profile(signal, stats, pen, c2, variant, mc, grid)?;
    match profile.selected() {
        Some(b) => Ok((b, profile)),
        None => Err(Error::NoGridPointHolds { tried: grid.len() }),
    }
}
