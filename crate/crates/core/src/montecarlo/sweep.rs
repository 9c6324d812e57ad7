use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiments::{growth_slope, two_chain_convergence, z_monotonicity, ChainSpec, Convergence};
use super::SimError;
use crate::dynamics::{Params, ParamSet, Regime, State};
use crate::rng::derive_seed;

/// Decision thresholds for [`assess_stability`]. These are experiment
/// settings, not model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerdictThresholds {
    /// Two chains whose reserve marginals are closer than this (KS) count as mixed.
    pub ks_max: f64,
    /// A median `log(1+Z)` growth rate above this counts as divergence.
    pub slope_min: f64,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        Self {
            ks_max: 0.05,
            slope_min: 0.03,
        }
    }
}

/// Settings shared by every point of a stability sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub steps: u64,
    /// Defaults to 10% of `steps`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    pub seed: u64,
    /// Start of the first convergence chain.
    pub x0: State,
    /// Start of the second convergence chain, far from the first.
    pub distant_x0: State,
    /// Start of the growth-rate runs; deep in the frustration region.
    pub growth_x0: State,
    pub t_lo: u64,
    pub t_hi: u64,
    pub growth_seeds: usize,
    pub thresholds: VerdictThresholds,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            steps: 200_000,
            burn_in: None,
            seed: 0,
            x0: State::ORIGIN,
            distant_x0: State::new(-50.0, 100.0),
            growth_x0: State::new(-100.0, 0.0),
            t_lo: 200,
            t_hi: 500,
            growth_seeds: 32,
            thresholds: VerdictThresholds::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn burn_in(&self) -> u64 {
        self.burn_in.unwrap_or(self.steps / 10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    StableConsistent,
    UnstableConsistent,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::StableConsistent => "stable-consistent",
            Verdict::UnstableConsistent => "unstable-consistent",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub regime: Regime,
    /// `None` when a convergence chain diverged.
    pub ks_distance: Option<f64>,
    pub chains_diverged: bool,
    pub logz_slope: Option<f64>,
    /// Growth seeds that contributed to the median slope.
    pub seeds_used: usize,
    pub monotonicity_violations: u64,
    pub verdict: Verdict,
}

/// Runs the convergence and growth experiments at one parameter point.
///
/// Unstable-consistent: the backlog grows faster than `slope_min` from the
/// distant start, or a chain diverges. Otherwise stable-consistent when the
/// two chains mix (KS below `ks_max`), and inconclusive when they do not.
///
/// Growth takes precedence because a finite run can look mixed while the
/// chain is only metastable near the target reserve.
pub fn assess_stability(p: &Params, cfg: &ExperimentConfig) -> Result<StabilityVerdict, SimError> {
    let conv = two_chain_convergence(
        p,
        ChainSpec { x0: cfg.x0, seed: derive_seed(cfg.seed, 0) },
        ChainSpec { x0: cfg.distant_x0, seed: derive_seed(cfg.seed, 1) },
        cfg.steps,
        cfg.burn_in(),
    )?;
    let growth = growth_slope(
        p,
        cfg.growth_x0,
        cfg.t_lo,
        cfg.t_hi,
        cfg.growth_seeds,
        derive_seed(cfg.seed, 2),
    )?;
    let mono = z_monotonicity(p, cfg.growth_x0, cfg.t_hi, derive_seed(cfg.seed, 3));

    let ks = conv.distance();
    let diverged = matches!(conv, Convergence::Diverged { .. });
    let th = cfg.thresholds;
    let stable = ks.is_some_and(|d| d < th.ks_max);
    let unstable = diverged || growth.median_slope.is_some_and(|s| s > th.slope_min);
    let verdict = if unstable {
        Verdict::UnstableConsistent
    } else if stable {
        Verdict::StableConsistent
    } else {
        Verdict::Inconclusive
    };
    Ok(StabilityVerdict {
        regime: p.regime(),
        ks_distance: ks,
        chains_diverged: diverged,
        logz_slope: growth.median_slope,
        seeds_used: growth.slopes.len(),
        monotonicity_violations: mono.violations,
        verdict,
    })
}

/// Grid over `μ`, optionally crossed with `λ` and `r*`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub mu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_star: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub mu: f64,
    pub lambda: f64,
    pub r_star: f64,
}

impl SweepGrid {
    /// Points in row-major order: `λ` outermost, then `r*`, then `μ`.
    pub fn points(&self, base: &ParamSet) -> Vec<SweepPoint> {
        let lambdas = self.lambda.clone().unwrap_or_else(|| vec![base.lambda]);
        let r_stars = self.r_star.clone().unwrap_or_else(|| vec![base.r_star]);
        let mut out = Vec::with_capacity(lambdas.len() * r_stars.len() * self.mu.len());
        for &lambda in &lambdas {
            for &r_star in &r_stars {
                for &mu in &self.mu {
                    out.push(SweepPoint { mu, lambda, r_star });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: SweepPoint,
    /// Per-point failure (invalid parameters, bad config) as a message.
    pub outcome: Result<StabilityVerdict, String>,
}

/// Assesses every grid point. Point `i` uses seed `derive_seed(cfg.seed, i)`,
/// so rows are reproducible and independent of the rayon pool size.
pub fn sweep(grid: &SweepGrid, base: &ParamSet, cfg: &ExperimentConfig) -> Vec<SweepRow> {
    grid.points(base)
        .into_par_iter()
        .enumerate()
        .map(|(i, point)| {
            let raw = ParamSet {
                mu: point.mu,
                lambda: point.lambda,
                r_star: point.r_star,
                ..*base
            };
            let point_cfg = ExperimentConfig {
                seed: derive_seed(cfg.seed, i as u64),
                ..*cfg
            };
            let outcome = raw
                .validate()
                .map_err(|e| e.to_string())
                .and_then(|p| assess_stability(&p, &point_cfg).map_err(|e| e.to_string()));
            SweepRow { point, outcome }
        })
        .collect()
}
