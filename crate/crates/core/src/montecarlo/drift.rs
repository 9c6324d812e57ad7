use rand::Rng;

use crate::dynamics::{step, Params, Region, State};
use crate::lyapunov::{lyap_h, DriftReport};
use crate::rng::{ChainRng, NoiseSource};
use crate::stats::{Estimate, Running};

/// Sample mean of `H(X(1)) - H(x)` over `n` independent transitions from `x`.
pub fn empirical_drift(p: &Params, x: State, n: u64, seed: u64) -> Estimate {
    let here = lyap_h(p, x);
    let mut noise = NoiseSource::new(seed, 0, p.sigma());
    let mut acc = Running::new();
    for _ in 0..n {
        let (next, _) = step(p, x, noise.draw());
        acc.push(lyap_h(p, next) - here);
    }
    acc.estimate()
}

/// Exact, closed-form and (when `mc_samples > 0`) Monte Carlo drift at `x`.
pub fn drift_report(p: &Params, x: State, mc_samples: u64, seed: u64) -> DriftReport {
    let mc = (mc_samples > 0).then(|| empirical_drift(p, x, mc_samples, seed));
    DriftReport::new(p, x, mc)
}

/// Uniform state in `region`, with `z ∈ [0, extent]`. Unbounded reserve
/// intervals are truncated at distance `extent` from their finite edge.
pub fn sample_region_state(p: &Params, region: Region, extent: f64, rng: &mut ChainRng) -> State {
    let (lo, hi) = match region {
        Region::D1 => (-extent, 0.0),
        Region::D2 => (0.0, p.ramp_up_edge()),
        Region::D3 => (p.ramp_up_edge(), p.ramp_down_edge()),
        Region::D4 => (p.ramp_down_edge(), p.ramp_down_edge() + extent),
    };
    let r = rng.random_range(lo..hi);
    let z = rng.random_range(0.0..=extent);
    State::new(r, z)
}
