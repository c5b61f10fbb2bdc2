//! Deterministic random streams and replication machinery.
//!
//! Every replication `i` of a Monte-Carlo run draws from its own ChaCha8
//! stream `(seed, i)`, so results do not depend on how replications are
//! scheduled across threads. Aggregation always happens over the
//! index-ordered vector of per-replication values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A reproducible source of standard Gaussian draws.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    /// Stream number `stream` under master `seed`. Distinct stream numbers
    /// give non-overlapping ChaCha sequences.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    #[inline]
    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.gaussian();
        }
    }
}

/// Mixes a master seed with a tag into an independent child seed (splitmix64).
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon work-stealing over replications. Without the `parallel`
    /// feature this runs sequentially.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Replication count, master seed and scheduling for one Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub reps: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl MonteCarlo {
    pub fn new(reps: usize, seed: u64) -> Self {
        Self {
            reps,
            seed,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    /// Same reps and scheduling under a child seed.
    pub fn child(&self, tag: u64) -> Self {
        Self {
            seed: derive_seed(self.seed, tag),
            ..*self
        }
    }

    pub(crate) fn require_reps(&self, min: usize) -> Result<()> {
        if self.reps < min {
            return Err(Error::param(
                "reps",
                format!("at least {min} replications required, got {}", self.reps),
            ));
        }
        Ok(())
    }

    /// Runs `f` once per replication on stream `(seed, i)` and returns the
    /// results in replication order.
    pub fn run<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut NoiseStream) -> T + Sync + Send,
    {
        let one = |i: usize| {
            let mut stream = NoiseStream::substream(self.seed, i as u64);
            f(&mut stream)
        };
        match self.execution {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..self.reps).into_par_iter().map(one).collect()
            }
            _ => (0..self.reps).map(one).collect(),
        }
    }

    /// Convenience: mean and standard error of a scalar statistic.
    pub fn estimate<F>(&self, f: F) -> McEstimate
    where
        F: Fn(&mut NoiseStream) -> f64 + Sync + Send,
    {
        McEstimate::from_samples(&self.run(f))
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub reps: usize,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                reps: 0,
            };
        }
        let mean = neumaier_sum(samples.iter().copied()) / n as f64;
        let std_error = if n > 1 {
            let ss = neumaier_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            reps: n,
        }
    }

    pub fn variance(&self) -> f64 {
        self.std_error * self.std_error * self.reps as f64
    }
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Recursive pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1..=8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}
