//! Sequence-model primitives: operator spectrum, true signal, observation.
//!
//! All user-facing indices are 1-based; vectors are stored 0-based.

use std::str::FromStr;

use crate::csvio::{self, write_indexed};
use crate::error::{ensure_len, Error, Result};
use crate::montecarlo::NoiseStream;

/// Singular values `b_1 >= b_2 >= ... > 0` of the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpectrum {
    b: Vec<f64>,
    beta: Option<f64>,
}

impl OperatorSpectrum {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::param("b", "spectrum must be non-empty"));
        }
        if let Some(k) = b.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::param(
                "b",
                format!("b_{} = {} is not a positive finite value", k + 1, b[k]),
            ));
        }
        if let Some(k) = b.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::param(
                "b",
                format!("spectrum increases between k = {} and k = {}", k + 1, k + 2),
            ));
        }
        Ok(Self { b, beta: None })
    }

    /// `b_k = scale * k^(-beta)` for `k = 1..=n_max`.
    pub fn power(beta: f64, scale: f64, n_max: usize) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::param(
                "beta",
                format!("must be positive, got {beta}"),
            ));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::param(
                "scale",
                format!("must be positive, got {scale}"),
            ));
        }
        if n_max == 0 {
            return Err(Error::param("n_max", "must be at least 1"));
        }
        let b = (1..=n_max)
            .map(|k| scale * (k as f64).powf(-beta))
            .collect();
        Ok(Self {
            b,
            beta: Some(beta),
        })
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.b
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    /// `b_k^{-2}` for the 0-based index `i`.
    #[inline]
    pub fn inv_sq(&self, i: usize) -> f64 {
        let b = self.b[i];
        1.0 / (b * b)
    }

    pub fn to_csv(&self) -> String {
        write_indexed("b_k", &self.b)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        Self::new(csvio::read_indexed(text, "b_k", "spectrum")?.values)
    }
}

pub fn power_spectrum(beta: f64, scale: f64, n_max: usize) -> Result<OperatorSpectrum> {
    OperatorSpectrum::power(beta, scale, n_max)
}

/// True coefficients `theta_k`, plus energy declared beyond `n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalCoefficients {
    pub theta: Vec<f64>,
    pub tail_energy: f64,
}

impl SignalCoefficients {
    pub fn new(theta: Vec<f64>) -> Self {
        Self {
            theta,
            tail_energy: 0.0,
        }
    }

    pub fn with_tail_energy(mut self, tail_energy: f64) -> Result<Self> {
        if !(tail_energy >= 0.0 && tail_energy.is_finite()) {
            return Err(Error::param(
                "tail_energy",
                "must be finite and nonnegative",
            ));
        }
        self.tail_energy = tail_energy;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// `||theta||^2` including the declared tail.
    pub fn energy(&self) -> f64 {
        self.theta.iter().map(|t| t * t).sum::<f64>() + self.tail_energy
    }

    pub fn to_csv(&self) -> String {
        write_indexed("theta_k", &self.theta)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        Ok(Self::new(
            csvio::read_indexed(text, "theta_k", "signal")?.values,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    Zero,
    Spike,
    PowerSmooth,
    ExpSmooth,
    Explicit,
}

impl FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "spike" => Ok(Self::Spike),
            "power_smooth" => Ok(Self::PowerSmooth),
            "exp_smooth" => Ok(Self::ExpSmooth),
            "explicit" => Ok(Self::Explicit),
            other => Err(Error::UnknownKind {
                what: "signal kind",
                value: other.to_string(),
            }),
        }
    }
}

fn arity(kind: &str, params: &[f64], n: usize) -> Result<()> {
    if params.len() != n {
        return Err(Error::param(
            "signal.params",
            format!("{kind} takes {n} parameter(s), got {}", params.len()),
        ));
    }
    Ok(())
}

/// Deterministic test signals.
///
/// * `spike`: `[index, amplitude]` with a 1-based index.
/// * `power_smooth`: `[A, s]`, `theta_k = A k^{-s}`, `s > 1/2`.
/// * `exp_smooth`: `[A, s]`, `theta_k = A e^{-s k}`.
/// * `explicit`: the full coefficient list, of length `n_max`.
pub fn make_signal(kind: SignalKind, params: &[f64], n_max: usize) -> Result<SignalCoefficients> {
    if n_max == 0 {
        return Err(Error::param("n_max", "must be at least 1"));
    }
    let theta = match kind {
        SignalKind::Zero => {
            arity("zero", params, 0)?;
            vec![0.0; n_max]
        }
        SignalKind::Spike => {
            arity("spike", params, 2)?;
            let idx = params[0];
            if idx.fract() != 0.0 || idx < 1.0 || idx > n_max as f64 {
                return Err(Error::param(
                    "signal.params",
                    format!("spike index {idx} outside 1..={n_max}"),
                ));
            }
            let mut t = vec![0.0; n_max];
            t[idx as usize - 1] = params[1];
            t
        }
        SignalKind::PowerSmooth => {
            arity("power_smooth", params, 2)?;
            let (a, s) = (params[0], params[1]);
            if !(s > 0.5) {
                return Err(Error::param(
                    "signal.params",
                    format!("exponent s = {s} must exceed 1/2"),
                ));
            }
            (1..=n_max).map(|k| a * (k as f64).powf(-s)).collect()
        }
        SignalKind::ExpSmooth => {
            arity("exp_smooth", params, 2)?;
            let (a, s) = (params[0], params[1]);
            if !(s > 0.0) {
                return Err(Error::param(
                    "signal.params",
                    format!("rate s = {s} must be positive"),
                ));
            }
            (1..=n_max).map(|k| a * (-s * k as f64).exp()).collect()
        }
        SignalKind::Explicit => {
            arity("explicit", params, n_max)?;
            params.to_vec()
        }
    };
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::param("signal.params", "coefficients must be finite"));
    }
    Ok(SignalCoefficients::new(theta))
}

/// `y_k = b_k theta_k + epsilon xi_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: Vec<f64>,
    pub epsilon: f64,
    pub seed: u64,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `k,y_k` rows followed by an `epsilon=<value>,seed=<value>` line.
    pub fn to_csv(&self) -> String {
        let mut s = write_indexed("y_k", &self.y);
        s.push_str(&format!("epsilon={},seed={}\n", self.epsilon, self.seed));
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let f = csvio::read_indexed(text, "y_k", "observation")?;
        let missing = |key: &str| Error::Parse {
            source_name: "observation".into(),
            line: 0,
            message: format!("missing or invalid `{key}` in footer"),
        };
        let epsilon: f64 = f
            .footer
            .get("epsilon")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| missing("epsilon"))?;
        let seed: u64 = f
            .footer
            .get("seed")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| missing("seed"))?;
        check_epsilon(epsilon)?;
        Ok(Self {
            y: f.values,
            epsilon,
            seed,
        })
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "epsilon",
            format!("must be positive, got {epsilon}"),
        ))
    }
}

pub fn observe(
    spectrum: &OperatorSpectrum,
    signal: &SignalCoefficients,
    epsilon: f64,
    stream: &mut NoiseStream,
) -> Result<Observation> {
    ensure_len(spectrum.len(), signal.len())?;
    check_epsilon(epsilon)?;
    let y = spectrum
        .values()
        .iter()
        .zip(&signal.theta)
        .map(|(b, t)| b * t + epsilon * stream.gaussian())
        .collect();
    Ok(Observation {
        y,
        epsilon,
        seed: stream.seed(),
    })
}
