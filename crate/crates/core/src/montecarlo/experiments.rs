use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Chain, SimError};
use crate::dynamics::{Params, State};
use crate::rng::derive_seed;
use crate::stats::{ks_distance, median, ols_slope, Estimate, Running};

/// Starting point and seed of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub x0: State,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    /// KS distance between the post-burn-in reserve marginals.
    Distance(f64),
    /// A chain hit the overflow guard; the distance test does not apply.
    Diverged { step: u64 },
}

impl Convergence {
    pub fn distance(&self) -> Option<f64> {
        match *self {
            Convergence::Distance(d) => Some(d),
            Convergence::Diverged { .. } => None,
        }
    }
}

fn reserve_marginal(p: &Params, chain: ChainSpec, steps: u64, burn_in: u64) -> Result<Vec<f64>, SimError> {
    let mut c = Chain::new(*p, chain.x0, chain.seed);
    let mut out = Vec::with_capacity(steps.saturating_sub(burn_in) as usize);
    for t in 0..steps {
        let rec = c.advance()?;
        if t >= burn_in {
            out.push(rec.state.r);
        }
    }
    Ok(out)
}

/// Runs two chains side by side and compares their reserve marginals.
///
/// Identical specs give identical samples and distance 0.
pub fn two_chain_convergence(
    p: &Params,
    a: ChainSpec,
    b: ChainSpec,
    steps: u64,
    burn_in: u64,
) -> Result<Convergence, SimError> {
    if steps <= burn_in {
        return Err(SimError::InvalidConfig(format!(
            "steps ({steps}) must exceed burn_in ({burn_in})"
        )));
    }
    let (ra, rb) = rayon::join(
        || reserve_marginal(p, a, steps, burn_in),
        || reserve_marginal(p, b, steps, burn_in),
    );
    match (ra, rb) {
        (Ok(ra), Ok(rb)) => Ok(Convergence::Distance(ks_distance(&ra, &rb))),
        (Err(SimError::Diverged { step, .. }), _) | (_, Err(SimError::Diverged { step, .. })) => {
            Ok(Convergence::Diverged { step })
        }
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// Median per-seed slope; `None` when every seed was excluded.
    pub median_slope: Option<f64>,
    pub slopes: Vec<f64>,
    /// Seeds that hit the overflow guard before `t_hi`.
    pub excluded: usize,
}

/// Least-squares slope of `log(1 + Z(t))` over `t ∈ [t_lo, t_hi]`, per seed,
/// and the median across seeds.
///
/// `log(1 + Z)` coincides with `log Z` once the backlog is large and stays
/// finite when the backlog empties, so stable chains give slopes near 0.
pub fn growth_slope(
    p: &Params,
    x0: State,
    t_lo: u64,
    t_hi: u64,
    n_seeds: usize,
    seed: u64,
) -> Result<GrowthReport, SimError> {
    if t_hi <= t_lo {
        return Err(SimError::InvalidConfig(format!(
            "growth window [{t_lo}, {t_hi}] is empty"
        )));
    }
    let per_seed: Vec<Option<f64>> = (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let mut c = Chain::new(*p, x0, derive_seed(seed, i as u64));
            let mut ts = Vec::with_capacity((t_hi - t_lo + 1) as usize);
            let mut ys = Vec::with_capacity(ts.capacity());
            for t in 0..=t_hi {
                if t >= t_lo {
                    ts.push(t as f64);
                    ys.push(c.state().z.ln_1p());
                }
                if t < t_hi {
                    c.advance().ok()?;
                }
            }
            Some(ols_slope(&ts, &ys))
        })
        .collect();
    let slopes: Vec<f64> = per_seed.iter().flatten().copied().collect();
    Ok(GrowthReport {
        median_slope: median(&slopes),
        excluded: n_seeds - slopes.len(),
        slopes,
    })
}

/// Closed rectangle `[r_min, r_max] × [z_min, z_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub r_min: f64,
    pub r_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Rect {
    pub fn contains(&self, x: State) -> bool {
        (self.r_min..=self.r_max).contains(&x.r) && (self.z_min..=self.z_max).contains(&x.z)
    }
}

/// Fraction of seeds whose trajectory visits `target` at some `t ∈ [0, horizon]`.
/// A chain that diverges first counts as a miss.
pub fn hitting_probability(
    p: &Params,
    x0: State,
    target: Rect,
    horizon: u64,
    n_seeds: usize,
    seed: u64,
) -> Estimate {
    let hits: Vec<bool> = (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let mut c = Chain::new(*p, x0, derive_seed(seed, i as u64));
            for _ in 0..horizon {
                if target.contains(c.state()) {
                    return true;
                }
                if c.advance().is_err() {
                    return false;
                }
            }
            target.contains(c.state())
        })
        .collect();
    let mut acc = Running::new();
    hits.iter().for_each(|&h| acc.push(if h { 1.0 } else { 0.0 }));
    acc.estimate()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Slots with `Z(t+1) < Z(t)`.
    pub violations: u64,
    pub steps_run: u64,
    /// Step at which the overflow guard stopped the run.
    pub diverged_at: Option<u64>,
}

/// Counts backlog decreases along one trajectory of up to `steps` slots.
pub fn z_monotonicity(p: &Params, x0: State, steps: u64, seed: u64) -> MonotonicityReport {
    let mut c = Chain::new(*p, x0, seed);
    let mut violations = 0;
    for _ in 0..steps {
        let before = c.state().z;
        match c.advance() {
            Ok(_) => {
                if c.state().z < before {
                    violations += 1;
                }
            }
            Err(SimError::Diverged { step, state }) => {
                if state.z < before {
                    violations += 1;
                }
                return MonotonicityReport {
                    violations,
                    steps_run: step,
                    diverged_at: Some(step),
                };
            }
            Err(_) => unreachable!("advance only fails on divergence"),
        }
    }
    MonotonicityReport {
        violations,
        steps_run: steps,
        diverged_at: None,
    }
}
