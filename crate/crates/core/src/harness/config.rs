//! Flat `key=value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Later layers (environment, command-line flags) override the file through
//! [`ConfigSource::set`].
//!
//! | key | default |
//! |---|---|
//! | `epsilon` / `epsilon_grid` | `0.1,0.05,0.02,0.01` |
//! | `beta`, `b_scale` | `1`, `1` |
//! | `n_max` | `1000` |
//! | `signal.kind`, `signal.params` | required where a signal is used |
//! | `scheme`, `boundaries` | `weakly_geometric` |
//! | `penalty.kind` | `mc` (`ct`, `none`) |
//! | `penalty.gamma` | `0.25` |
//! | `penalty.alpha`, `penalty.level`, `penalty.reps` | `0.5`, `epsilon^2`, `10000` |
//! | `reps` | `10000` |
//! | `master_seed` | `0` (env `STEINHULL_SEED` overrides) |
//! | `out` | standard output |

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::blocks::{custom_scheme, WeaklyGeometric};
use crate::error::{Error, Result};
use crate::model::SignalKind;

pub const KEYS: [&str; 17] = [
    "epsilon",
    "epsilon_grid",
    "beta",
    "b_scale",
    "n_max",
    "signal.kind",
    "signal.params",
    "scheme",
    "boundaries",
    "penalty.kind",
    "penalty.gamma",
    "penalty.alpha",
    "penalty.level",
    "penalty.reps",
    "reps",
    "master_seed",
    "out",
];

pub const SEED_ENV: &str = "STEINHULL_SEED";

pub const DEFAULT_EPSILON_GRID: [f64; 4] = [0.1, 0.05, 0.02, 0.01];
pub const DEFAULT_REPS: usize = 10_000;
pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_GAMMA: f64 = 0.25;
pub const DEFAULT_N_MAX: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemeSpec {
    WeaklyGeometric,
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PenaltySpec {
    Ct {
        gamma: f64,
    },
    Mc {
        alpha: f64,
        level: Option<f64>,
        reps: usize,
    },
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub epsilon_grid: Vec<f64>,
    pub beta: f64,
    pub b_scale: f64,
    pub n_max: usize,
    pub signal: Option<SignalSpec>,
    pub scheme: SchemeSpec,
    pub penalty: PenaltySpec,
    pub reps: usize,
    pub master_seed: u64,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// The grid must hold exactly one value.
    pub fn single_epsilon(&self) -> Result<f64> {
        match self.epsilon_grid.as_slice() {
            [e] => Ok(*e),
            grid => Err(Error::config(
                "epsilon",
                format!(
                    "this command needs a single epsilon, got {} values",
                    grid.len()
                ),
            )),
        }
    }

    pub fn signal_spec(&self) -> Result<&SignalSpec> {
        self.signal
            .as_ref()
            .ok_or_else(|| Error::config("signal.kind", "a signal is required (set signal.kind)"))
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: String,
}

/// Raw assignments with their origin, before validation.
#[derive(Debug, Clone, Default)]
pub struct ConfigSource {
    entries: BTreeMap<&'static str, Entry>,
}

fn known_key(key: &str) -> Option<&'static str> {
    KEYS.iter().copied().find(|k| *k == key)
}

impl ConfigSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_text(text: &str, source_name: &str) -> Result<Self> {
        let mut src = Self::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                source_name: source_name.to_string(),
                line,
                message,
            };
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, found `{content}`")))?;
            let (k, v) = (k.trim(), v.trim());
            let key = known_key(k).ok_or_else(|| parse_err(format!("unknown key `{k}`")))?;
            if let Some(prev) = src.entries.get(key) {
                return Err(parse_err(format!(
                    "duplicate key `{key}` (first set at {})",
                    prev.origin
                )));
            }
            src.entries.insert(
                key,
                Entry {
                    value: v.to_string(),
                    origin: format!("{source_name} line {line}"),
                },
            );
        }
        Ok(src)
    }

    /// Sets or overrides `key`.
    pub fn set(&mut self, key: &str, value: &str, origin: impl Into<String>) -> Result<()> {
        let origin = origin.into();
        let key = known_key(key.trim())
            .ok_or_else(|| Error::config(origin.clone(), format!("unknown key `{key}`")))?;
        // A single epsilon replaces a grid and vice versa.
        match key {
            "epsilon" => {
                self.entries.remove("epsilon_grid");
            }
            "epsilon_grid" => {
                self.entries.remove("epsilon");
            }
            _ => {}
        }
        self.entries.insert(
            key,
            Entry {
                value: value.trim().to_string(),
                origin,
            },
        );
        Ok(())
    }

    /// Parses `key=value`.
    pub fn set_assignment(&mut self, assignment: &str, origin: impl Into<String>) -> Result<()> {
        let origin = origin.into();
        let (k, v) = assignment.split_once('=').ok_or_else(|| {
            Error::config(
                origin.clone(),
                format!("expected key=value, found `{assignment}`"),
            )
        })?;
        self.set(k, v, origin)
    }

    /// Applies the seed override from the environment, if present.
    pub fn apply_seed_env(&mut self, value: Option<&str>) -> Result<()> {
        match value {
            Some(v) => self.set("master_seed", v, format!("environment {SEED_ENV}")),
            None => Ok(()),
        }
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|e| {
                e.value.parse::<T>().map_err(|err| {
                    Error::config(e.origin.clone(), format!("{key}: `{}`: {err}", e.value))
                })
            })
            .transpose()
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|e| {
                e.value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>().map_err(|err| {
                            Error::config(e.origin.clone(), format!("{key}: `{s}`: {err}"))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    fn origin(&self, key: &str) -> String {
        self.get(key)
            .map_or_else(|| format!("default {key}"), |e| e.origin.clone())
    }

    fn reject_unless(&self, key: &str, allowed: bool, reason: &str) -> Result<()> {
        match self.get(key) {
            Some(e) if !allowed => Err(Error::config(e.origin.clone(), format!("{key} {reason}"))),
            _ => Ok(()),
        }
    }

    /// Validates and fills defaults. `require_signal` makes a missing
    /// `signal.kind` an error.
    pub fn build(&self, require_signal: bool) -> Result<ExperimentConfig> {
        let epsilon_grid = match (
            self.parsed::<f64>("epsilon")?,
            self.list::<f64>("epsilon_grid")?,
        ) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    self.origin("epsilon_grid"),
                    "set either epsilon or epsilon_grid, not both",
                ))
            }
            (Some(e), None) => vec![e],
            (None, Some(g)) => g,
            (None, None) => DEFAULT_EPSILON_GRID.to_vec(),
        };
        let eps_origin = if self.get("epsilon").is_some() {
            self.origin("epsilon")
        } else {
            self.origin("epsilon_grid")
        };
        if epsilon_grid.is_empty() {
            return Err(Error::config(eps_origin, "epsilon grid is empty"));
        }
        if let Some(e) = epsilon_grid.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::config(
                eps_origin,
                format!("epsilon must lie in (0, 1), got {e}"),
            ));
        }

        let beta = self.parsed::<f64>("beta")?.unwrap_or(1.0);
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::config(
                self.origin("beta"),
                format!("beta must be positive, got {beta}"),
            ));
        }
        let b_scale = self.parsed::<f64>("b_scale")?.unwrap_or(1.0);
        if !(b_scale > 0.0 && b_scale.is_finite()) {
            return Err(Error::config(
                self.origin("b_scale"),
                format!("b_scale must be positive, got {b_scale}"),
            ));
        }
        let n_max = self.parsed::<usize>("n_max")?.unwrap_or(DEFAULT_N_MAX);
        if n_max == 0 {
            return Err(Error::config(
                self.origin("n_max"),
                "n_max must be at least 1",
            ));
        }

        let signal = match self.get("signal.kind") {
            Some(e) => {
                let kind = e
                    .value
                    .parse::<SignalKind>()
                    .map_err(|err| Error::config(e.origin.clone(), err.to_string()))?;
                let params = self.list::<f64>("signal.params")?.unwrap_or_default();
                Some(SignalSpec { kind, params })
            }
            None => {
                self.reject_unless("signal.params", false, "given without signal.kind")?;
                None
            }
        };
        if require_signal && signal.is_none() {
            return Err(Error::config(
                "signal.kind",
                "a signal is required (set signal.kind)",
            ));
        }

        let scheme_name = self
            .get("scheme")
            .map_or("weakly_geometric", |e| e.value.as_str());
        let scheme = match scheme_name {
            "weakly_geometric" => {
                self.reject_unless("boundaries", false, "requires scheme = explicit")?;
                for &e in &epsilon_grid {
                    WeaklyGeometric::new(e)
                        .map_err(|err| Error::config(eps_origin.clone(), err.to_string()))?;
                }
                SchemeSpec::WeaklyGeometric
            }
            "explicit" => {
                let b = self.list::<usize>("boundaries")?.ok_or_else(|| {
                    Error::config(
                        self.origin("scheme"),
                        "scheme = explicit requires boundaries",
                    )
                })?;
                custom_scheme(b.clone())
                    .map_err(|err| Error::config(self.origin("boundaries"), err.to_string()))?;
                SchemeSpec::Explicit(b)
            }
            other => {
                return Err(Error::config(
                    self.origin("scheme"),
                    format!("unknown scheme `{other}` (expected weakly_geometric or explicit)"),
                ))
            }
        };

        let kind = self.get("penalty.kind").map_or("mc", |e| e.value.as_str());
        self.reject_unless(
            "penalty.gamma",
            kind == "ct",
            "applies only to penalty.kind = ct",
        )?;
        for key in ["penalty.alpha", "penalty.level", "penalty.reps"] {
            self.reject_unless(key, kind == "mc", "applies only to penalty.kind = mc")?;
        }
        let penalty = match kind {
            "ct" => {
                let gamma = self
                    .parsed::<f64>("penalty.gamma")?
                    .unwrap_or(DEFAULT_GAMMA);
                if !(gamma > 0.0 && gamma <= 0.5) {
                    return Err(Error::config(
                        self.origin("penalty.gamma"),
                        format!("penalty.gamma must lie in (0, 1/2], got {gamma}"),
                    ));
                }
                PenaltySpec::Ct { gamma }
            }
            "mc" => {
                let alpha = self
                    .parsed::<f64>("penalty.alpha")?
                    .unwrap_or(DEFAULT_ALPHA);
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return Err(Error::config(
                        self.origin("penalty.alpha"),
                        format!("penalty.alpha must be nonnegative, got {alpha}"),
                    ));
                }
                let level = self.parsed::<f64>("penalty.level")?;
                if let Some(l) = level {
                    if !(l > 0.0 && l.is_finite()) {
                        return Err(Error::config(
                            self.origin("penalty.level"),
                            format!("penalty.level must be positive, got {l}"),
                        ));
                    }
                }
                let reps = self
                    .parsed::<usize>("penalty.reps")?
                    .unwrap_or(DEFAULT_REPS);
                if reps < 10_000 {
                    return Err(Error::config(
                        self.origin("penalty.reps"),
                        format!("penalty.reps must be at least 10000, got {reps}"),
                    ));
                }
                PenaltySpec::Mc { alpha, level, reps }
            }
            "none" => PenaltySpec::None,
            other => {
                return Err(Error::config(
                    self.origin("penalty.kind"),
                    format!("unknown penalty.kind `{other}` (expected ct, mc or none)"),
                ))
            }
        };

        let reps = self.parsed::<usize>("reps")?.unwrap_or(DEFAULT_REPS);
        if reps == 0 {
            return Err(Error::config(
                self.origin("reps"),
                "reps must be at least 1",
            ));
        }
        let master_seed = self.parsed::<u64>("master_seed")?.unwrap_or(0);
        let out = self
            .get("out")
            .filter(|e| !e.value.is_empty() && e.value != "-")
            .map(|e| PathBuf::from(&e.value));

        Ok(ExperimentConfig {
            epsilon_grid,
            beta,
            b_scale,
            n_max,
            signal,
            scheme,
            penalty,
            reps,
            master_seed,
            out,
        })
    }
}

/// Parses a configuration file that must define a signal.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    ConfigSource::from_text(text, "config")?.build(true)
}
