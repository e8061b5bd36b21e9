//! Observation grids, path batches, and the seeding policy.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Result, SfouError};

/// Uniform observation grid 0 = t_0 < t_1 < ... < t_n = T.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    steps: usize,
    times: Vec<f64>,
}

/// Build a uniform grid with t_i = i T / n.
pub fn build_grid(t_max: f64, steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(t_max, steps)
}

impl TimeGrid {
    pub fn new(t_max: f64, steps: usize) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(SfouError::domain(format!(
                "grid horizon must be positive and finite, got {t_max}"
            )));
        }
        if steps < 2 {
            return Err(SfouError::domain(format!(
                "grid needs at least 2 steps, got {steps}"
            )));
        }
        let times = (0..=steps)
            .map(|i| t_max * i as f64 / steps as f64)
            .collect();
        Ok(TimeGrid {
            t_max,
            steps,
            times,
        })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.steps as f64
    }

    /// All n + 1 grid times including both endpoints.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Midpoint of subinterval j, i.e. (t_j + t_{j+1}) / 2.
    pub fn midpoint(&self, j: usize) -> f64 {
        0.5 * (self.times[j] + self.times[j + 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    SubFbm,
    Sfou,
    Wiener,
    Martingale,
}

/// How a batch was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenMethod {
    Cholesky,
    FbmFold,
    KernelWiener,
    ExpEuler,
    PlainEuler,
}

/// Sub-fBm simulation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubfbmMethod {
    /// Exact in distribution at the grid points.
    #[default]
    Cholesky,
    /// Fold a two-sided fBm: zeta(t) = (W_H(t) + W_H(-t)) / sqrt(2).
    FbmFold,
    /// Discretized Wiener-integral representation (biased; cross-check only).
    KernelWiener,
}

/// Time stepping for the drift recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SfouScheme {
    /// X_{i+1} = e^(theta dt) X_i + increment (exact drift propagation).
    #[default]
    ExpEuler,
    /// X_{i+1} = (1 + theta dt) X_i + increment.
    PlainEuler,
}

impl From<SubfbmMethod> for GenMethod {
    fn from(m: SubfbmMethod) -> Self {
        match m {
            SubfbmMethod::Cholesky => GenMethod::Cholesky,
            SubfbmMethod::FbmFold => GenMethod::FbmFold,
            SubfbmMethod::KernelWiener => GenMethod::KernelWiener,
        }
    }
}

impl From<SfouScheme> for GenMethod {
    fn from(s: SfouScheme) -> Self {
        match s {
            SfouScheme::ExpEuler => GenMethod::ExpEuler,
            SfouScheme::PlainEuler => GenMethod::PlainEuler,
        }
    }
}

/// A batch of simulated paths over a common grid; row r is replicate r.
#[derive(Debug, Clone)]
pub struct PathBatch {
    pub grid: TimeGrid,
    /// reps x (n + 1) values, each row starting at exactly 0.
    pub values: Vec<Vec<f64>>,
    pub kind: PathKind,
    pub h: f64,
    pub theta: Option<f64>,
    pub seed: u64,
    pub method: GenMethod,
}

impl PathBatch {
    pub fn reps(&self) -> usize {
        self.values.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(SfouError::domain("path batch has no replicates"));
        }
        for (r, row) in self.values.iter().enumerate() {
            if row.len() != self.grid.steps() + 1 {
                return Err(SfouError::GridMismatch(format!(
                    "replicate {r} has {} values for a grid of {} points",
                    row.len(),
                    self.grid.steps() + 1
                )));
            }
            if row[0] != 0.0 {
                return Err(SfouError::domain(format!(
                    "replicate {r} does not start at 0 (got {})",
                    row[0]
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(SfouError::numeric(format!(
                    "replicate {r} contains non-finite value {v}"
                )));
            }
        }
        Ok(())
    }
}

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const PILOT_TAG: u64 = 0x7069_6C6F_745F_7365; // distinguishes pilot streams

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(SPLITMIX_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Replicate-indexed stream derivation: replicate r draws from a ChaCha12
/// generator seeded with the SplitMix64 finalizer applied to
/// master_seed + (r + 1) * 0x9E3779B97F4A7C15. Distinct replicates get
/// distinct streams; the same (master_seed, r) always yields the same path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPolicy {
    master_seed: u64,
}

impl SeedPolicy {
    pub fn new(master_seed: u64) -> Self {
        SeedPolicy { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_seed(&self, rep: usize) -> u64 {
        splitmix64(
            self.master_seed
                .wrapping_add((rep as u64).wrapping_add(1).wrapping_mul(SPLITMIX_GAMMA)),
        )
    }

    pub fn stream_rng(&self, rep: usize) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(self.stream_seed(rep))
    }

    /// Seed-disjoint policy for pilot runs, so pilot-estimated norming
    /// constants stay independent of the main sample.
    pub fn pilot(&self) -> SeedPolicy {
        SeedPolicy {
            master_seed: splitmix64(self.master_seed ^ PILOT_TAG),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_values() {
        let g = build_grid(1.0, 4).unwrap();
        assert_eq!(g.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.dt(), 0.25);
        assert_eq!(g.midpoint(0), 0.125);

        let g = build_grid(10.0, 1000).unwrap();
        assert!((g.dt() - 0.01).abs() < 1e-15);
        assert_eq!(g.times().len(), 1001);
        assert_eq!(*g.times().last().unwrap(), 10.0);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(build_grid(1.0, 0).is_err());
        assert!(build_grid(1.0, 1).is_err());
        assert!(build_grid(0.0, 10).is_err());
        assert!(build_grid(-2.0, 10).is_err());
        assert!(build_grid(f64::INFINITY, 10).is_err());
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let policy = SeedPolicy::new(42);
        let s0 = policy.stream_seed(0);
        let s1 = policy.stream_seed(1);
        assert_ne!(s0, s1);
        assert_eq!(policy.stream_seed(0), s0);
        assert_ne!(policy.pilot().stream_seed(0), s0);

        use rand::Rng;
        let a: f64 = policy.stream_rng(7).random();
        let b: f64 = policy.stream_rng(7).random();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn batch_validation_catches_bad_rows() {
        let grid = build_grid(1.0, 2).unwrap();
        let mut batch = PathBatch {
            grid,
            values: vec![vec![0.0, 1.0, 2.0]],
            kind: PathKind::SubFbm,
            h: 0.7,
            theta: None,
            seed: 1,
            method: GenMethod::Cholesky,
        };
        assert!(batch.validate().is_ok());
        batch.values[0][0] = 0.1;
        assert!(batch.validate().is_err());
        batch.values[0][0] = 0.0;
        batch.values[0][2] = f64::NAN;
        assert!(batch.validate().is_err());
    }
}
