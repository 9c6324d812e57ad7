//! Seeded simulation of the chain and the experiments built on it.
//!
//! All randomness lives here: the dynamics take noise as an input. Every
//! estimator takes an explicit seed, and parallel work derives its streams
//! from `(seed, index)` (see [`crate::rng`]), so results are identical for any
//! worker count.

mod drift;
mod experiments;
mod sweep;

pub use drift::{drift_report, empirical_drift, sample_region_state};
pub use experiments::{
    growth_slope, hitting_probability, two_chain_convergence, z_monotonicity, ChainSpec,
    Convergence, GrowthReport, MonotonicityReport, Rect,
};
pub use sweep::{
    assess_stability, sweep, ExperimentConfig, StabilityVerdict, SweepGrid, SweepPoint, SweepRow,
    Verdict, VerdictThresholds,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{step_at, Params, Region, State, StepRecord};
use crate::rng::NoiseSource;
use crate::stats::{quantile_sorted, sort_f64, Running};

/// Coordinates beyond this magnitude count as divergence.
pub const OVERFLOW_GUARD: f64 = 1e300;

/// Quantile levels reported in [`CoordStats`].
pub const QUANTILE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("chain diverged at step {step}: state ({}, {}) exceeds the {OVERFLOW_GUARD:e} guard", state.r, state.z)]
    Diverged { step: u64, state: State },
}

/// A chain with its own noise stream.
#[derive(Debug, Clone)]
pub struct Chain {
    params: Params,
    state: State,
    noise: NoiseSource,
    t: u64,
}

impl Chain {
    pub fn new(params: Params, x0: State, seed: u64) -> Self {
        Self {
            params,
            state: x0,
            noise: NoiseSource::new(seed, 0, params.sigma()),
            t: 0,
        }
    }

    pub fn state(&self) -> State {
        self.state
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// Runs one slot and returns its record (which holds the pre-step state).
    pub fn advance(&mut self) -> Result<StepRecord, SimError> {
        let n = self.noise.draw();
        let (next, record) = step_at(&self.params, self.state, n, self.t);
        self.t += 1;
        if !(next.r.abs() <= OVERFLOW_GUARD && next.z <= OVERFLOW_GUARD) {
            return Err(SimError::Diverged {
                step: self.t,
                state: next,
            });
        }
        self.state = next;
        Ok(record)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: Params,
    pub x0: State,
    /// Number of transitions; records cover slots `0..steps`.
    pub steps: u64,
    /// Slots discarded before statistics are collected.
    pub burn_in: u64,
    pub seed: u64,
    /// Keep every n-th step record.
    pub record_every: u64,
}

impl SimConfig {
    /// Config with the default burn-in of 10% of `steps` and no thinning.
    pub fn new(params: Params, x0: State, steps: u64, seed: u64) -> Self {
        Self {
            params,
            x0,
            steps,
            burn_in: steps / 10,
            seed,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.steps <= self.burn_in {
            return Err(SimError::InvalidConfig(format!(
                "steps ({}) must exceed burn_in ({})",
                self.steps, self.burn_in
            )));
        }
        if self.record_every == 0 {
            return Err(SimError::InvalidConfig("record_every must be >= 1".into()));
        }
        self.x0
            .validate()
            .map_err(|e| SimError::InvalidConfig(format!("x0: {e}")))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordStats {
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    /// `(level, value)` pairs at [`QUANTILE_LEVELS`].
    pub quantiles: Vec<(f64, f64)>,
}

impl CoordStats {
    fn from_samples(running: &Running, mut samples: Vec<f64>) -> Self {
        sort_f64(&mut samples);
        Self {
            mean: running.mean(),
            variance: running.variance(),
            min: running.min(),
            max: running.max(),
            quantiles: QUANTILE_LEVELS
                .iter()
                .map(|&q| (q, quantile_sorted(&samples, q)))
                .collect(),
        }
    }
}

/// Fraction of post-burn-in slots spent in each region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

impl Occupancy {
    pub fn get(&self, region: Region) -> f64 {
        match region {
            Region::D1 => self.d1,
            Region::D2 => self.d2,
            Region::D3 => self.d3,
            Region::D4 => self.d4,
        }
    }

    pub fn total(&self) -> f64 {
        self.d1 + self.d2 + self.d3 + self.d4
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    /// Number of post-burn-in slots summarized.
    pub samples: u64,
    pub r: CoordStats,
    pub z: CoordStats,
    pub occupancy: Occupancy,
    /// Mean frustrated demand `F`.
    pub mean_frustrated: f64,
    /// Mean expressed backlog `B`.
    pub mean_backlog_expressed: f64,
    /// `X(steps)`.
    pub final_state: State,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub stats: TrajectoryStats,
    /// Thinned step records, when requested.
    pub records: Option<Vec<StepRecord>>,
}

/// Runs the chain for `cfg.steps` slots.
pub fn simulate(cfg: &SimConfig, keep_records: bool) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let mut chain = Chain::new(cfg.params, cfg.x0, cfg.seed);
    let kept = (cfg.steps - cfg.burn_in) as usize;
    let mut r_samples = Vec::with_capacity(kept);
    let mut z_samples = Vec::with_capacity(kept);
    let (mut r_run, mut z_run) = (Running::new(), Running::new());
    let (mut f_run, mut b_run) = (Running::new(), Running::new());
    let mut visits = [0u64; 4];
    let mut records = keep_records.then(Vec::new);

    for t in 0..cfg.steps {
        let rec = chain.advance()?;
        if let Some(out) = records.as_mut() {
            if t % cfg.record_every == 0 {
                out.push(rec);
            }
        }
        if t >= cfg.burn_in {
            r_run.push(rec.state.r);
            z_run.push(rec.state.z);
            r_samples.push(rec.state.r);
            z_samples.push(rec.state.z);
            f_run.push(rec.f_frustrated);
            b_run.push(rec.b_expr);
            visits[rec.region.index()] += 1;
        }
    }

    let n = kept as f64;
    let stats = TrajectoryStats {
        samples: kept as u64,
        r: CoordStats::from_samples(&r_run, r_samples),
        z: CoordStats::from_samples(&z_run, z_samples),
        occupancy: Occupancy {
            d1: visits[0] as f64 / n,
            d2: visits[1] as f64 / n,
            d3: visits[2] as f64 / n,
            d4: visits[3] as f64 / n,
        },
        mean_frustrated: f_run.mean(),
        mean_backlog_expressed: b_run.mean(),
        final_state: chain.state(),
    };
    Ok(SimOutput { stats, records })
}
