//! Delayed heating and the sign of evaporation.
//!
//! A single-zone building obeys `d(t)·ε = K(T(t) - θ(t)) + C(T(t) - T(t-1))`.
//! Two scenarios are compared over slots `1..=τ`: one where the natural demand
//! `D(t)` is always served (temperatures `T*`), and one where `F(t)` of it is
//! frustrated for `t < τ` and caught up at `τ` so that `T(τ) = T*(τ)`. The
//! backlog left at `τ`, `Z(τ)`, is whatever catch-up energy exceeds `D(τ)`.
//!
//! With a constant coefficient of performance the backlog always shrinks:
//! `Z(τ) - Z(τ-1) = -(K/ε) Σ_{t<τ} (T*(t) - T(t)) ≤ 0`. A heat pump whose
//! catch-up runs at a degraded COP `ε' < ε` adds `(1 - ε'/ε)(D(τ) + Z(τ))`,
//! which can make the change positive.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThermalError {
    #[error("invalid building: {0}")]
    InvalidBuilding(&'static str),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("heating model only: slot energy {0} is negative")]
    Cooling(f64),
    #[error("infeasible scenario: catch-up energy D(tau)+Z(tau) = {0} is negative")]
    Infeasible(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Building {
    /// Leakiness `K` (power per °C).
    pub k_leak: f64,
    /// Thermal inertia `C` (energy per °C).
    pub c_inertia: f64,
    /// Coefficient of performance `ε`.
    pub eps: f64,
}

impl Building {
    pub fn validate(&self) -> Result<(), ThermalError> {
        if !(self.k_leak > 0.0 && self.k_leak.is_finite()) {
            return Err(ThermalError::InvalidBuilding("k_leak must be > 0"));
        }
        if !(self.c_inertia > 0.0 && self.c_inertia.is_finite()) {
            return Err(ThermalError::InvalidBuilding("c_inertia must be > 0"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(ThermalError::InvalidBuilding("eps must be > 0"));
        }
        Ok(())
    }

    /// Energy needed to go from `t_prev` to `t_next` against outside `theta`
    /// at coefficient of performance `cop`.
    pub fn required_energy(&self, t_prev: f64, t_next: f64, theta: f64, cop: f64) -> f64 {
        (self.k_leak * (t_next - theta) + self.c_inertia * (t_next - t_prev)) / cop
    }
}

/// Room temperature after one slot in which `energy` is consumed.
pub fn temp_step(b: &Building, t_prev: f64, theta: f64, energy: f64) -> Result<f64, ThermalError> {
    if energy < 0.0 {
        return Err(ThermalError::Cooling(energy));
    }
    Ok((energy * b.eps + b.k_leak * theta + b.c_inertia * t_prev) / (b.k_leak + b.c_inertia))
}

/// Inputs for one pair of scenarios. Series are indexed from slot 1:
/// `theta[0] = θ(1)`, `demand[0] = D(1)`, `frustration[0] = F(1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalScenario {
    pub theta: Vec<f64>,
    pub demand: Vec<f64>,
    /// `T(0) = T*(0)`.
    pub t0_temp: f64,
    /// Catch-up slot `τ ≥ 1`.
    pub tau: usize,
    /// `F(1..τ-1)`; may be omitted in heat-pump mode, where all demand is frustrated.
    #[serde(default)]
    pub frustration: Vec<f64>,
    /// Degraded COP `ε'(τ)` of the catch-up slot (heat-pump mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_prime: Option<f64>,
    /// Optional heuristic, not a physical model: when `eps_prime` is absent,
    /// `ε'(τ) = ε·(1 - cop_slope·(T*(τ) - T(τ-1)))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cop_slope: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThermalMode {
    ConstantCop,
    HeatPump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaporationLedger {
    pub mode: ThermalMode,
    /// `T*(0..=τ)`.
    pub t_star: Vec<f64>,
    /// `T(0..τ)`.
    pub t_constrained: Vec<f64>,
    /// `Z(τ-1) = Σ F(t)`.
    pub z_tau_minus_1: f64,
    /// `D(τ) + Z(τ)`.
    pub catch_up_energy: f64,
    /// COP of the catch-up slot.
    pub catch_up_cop: f64,
    pub z_tau: f64,
    /// `Z(τ) - Z(τ-1)`, from the scenario runs.
    pub delta_z: f64,
    /// The same change from the closed-form identity.
    pub delta_z_identity: f64,
    /// `|delta_z - delta_z_identity|` relative to the largest energy in the ledger.
    pub identity_residual: f64,
}

impl ThermalScenario {
    fn validate(&self) -> Result<(), ThermalError> {
        let bad = |m: String| Err(ThermalError::InvalidScenario(m));
        if self.tau == 0 {
            return bad("tau must be >= 1".into());
        }
        if self.theta.len() < self.tau || self.demand.len() < self.tau {
            return bad(format!(
                "theta and demand need at least tau = {} entries (got {} and {})",
                self.tau,
                self.theta.len(),
                self.demand.len()
            ));
        }
        let series = self.theta.iter().chain(&self.demand).chain(&self.frustration);
        if !self.t0_temp.is_finite() || series.clone().any(|x| !x.is_finite()) {
            return bad("all series values must be finite".into());
        }
        if let Some(t) = self.demand[..self.tau].iter().position(|&d| d < 0.0) {
            return bad(format!("demand at slot {} is negative", t + 1));
        }
        Ok(())
    }

    fn unconstrained(&self, b: &Building) -> Result<Vec<f64>, ThermalError> {
        let mut t_star = Vec::with_capacity(self.tau + 1);
        t_star.push(self.t0_temp);
        for t in 0..self.tau {
            let next = temp_step(b, t_star[t], self.theta[t], self.demand[t])?;
            t_star.push(next);
        }
        Ok(t_star)
    }

    /// Gaps `T*(t) - T(t)` for `t < τ`. Subtracting the two scenarios' balances
    /// gives `(K+C)·gap(t) = ε·F(t) + C·gap(t-1)`, which keeps the gap
    /// nonnegative under rounding.
    fn gaps(&self, b: &Building, frustration: &[f64]) -> Vec<f64> {
        let mut gaps = Vec::with_capacity(self.tau);
        gaps.push(0.0);
        for (t, &f) in frustration.iter().enumerate() {
            gaps.push((f * b.eps + b.c_inertia * gaps[t]) / (b.k_leak + b.c_inertia));
        }
        gaps
    }
}

fn ledger(
    b: &Building,
    s: &ThermalScenario,
    mode: ThermalMode,
    frustration: &[f64],
    cop_for: impl Fn(&[f64], &[f64]) -> Result<f64, ThermalError>,
) -> Result<EvaporationLedger, ThermalError> {
    let tau = s.tau;
    let t_star = s.unconstrained(b)?;
    let gaps = s.gaps(b, frustration);
    let temps: Vec<f64> = t_star.iter().zip(&gaps).map(|(ts, g)| ts - g).collect();
    let cop = cop_for(&t_star, &temps)?;
    // Catch-up restores T*(τ) from T(τ-1). Against the unconstrained balance
    // at τ this reads (D(τ) + Z(τ))·ε' = D(τ)·ε + C·gap(τ-1).
    let d_tau = s.demand[tau - 1];
    let z_tau = (d_tau * (b.eps - cop) + b.c_inertia * gaps[tau - 1]) / cop;
    let catch_up = d_tau + z_tau;
    if catch_up < 0.0 {
        return Err(ThermalError::Infeasible(catch_up));
    }
    let z_prev: f64 = frustration.iter().sum();
    let delta_z = z_tau - z_prev;

    let gap: f64 = gaps[1..].iter().sum();
    let mut identity = -(b.k_leak / b.eps) * gap;
    if mode == ThermalMode::HeatPump {
        identity += (1.0 - cop / b.eps) * catch_up;
    }
    let scale = [delta_z.abs(), identity.abs(), z_prev, catch_up, d_tau]
        .into_iter()
        .fold(f64::MIN_POSITIVE, f64::max);
    Ok(EvaporationLedger {
        mode,
        t_star,
        t_constrained: temps,
        z_tau_minus_1: z_prev,
        catch_up_energy: catch_up,
        catch_up_cop: cop,
        z_tau,
        delta_z,
        delta_z_identity: identity,
        identity_residual: (delta_z - identity).abs() / scale,
    })
}

/// Constant-COP comparison. `eps_prime` and `cop_slope` are ignored.
pub fn run_scenario_pair(b: &Building, s: &ThermalScenario) -> Result<EvaporationLedger, ThermalError> {
    b.validate()?;
    s.validate()?;
    let n = s.tau - 1;
    if s.frustration.len() != n {
        return Err(ThermalError::InvalidScenario(format!(
            "frustration needs tau-1 = {n} entries, got {}",
            s.frustration.len()
        )));
    }
    for (t, (&f, &d)) in s.frustration.iter().zip(&s.demand).enumerate() {
        if !(0.0..=d).contains(&f) {
            return Err(ThermalError::InvalidScenario(format!(
                "frustration at slot {} must lie in [0, {d}], got {f}",
                t + 1
            )));
        }
    }
    ledger(b, s, ThermalMode::ConstantCop, &s.frustration, |_, _| Ok(b.eps))
}

/// Heat-pump comparison with full frustration before `τ` and a degraded
/// catch-up COP.
pub fn run_heat_pump_scenario(b: &Building, s: &ThermalScenario) -> Result<EvaporationLedger, ThermalError> {
    b.validate()?;
    s.validate()?;
    let full = &s.demand[..s.tau - 1];
    if !s.frustration.is_empty() && s.frustration.as_slice() != full {
        return Err(ThermalError::InvalidScenario(
            "heat-pump mode requires full frustration, F(t) = D(t) for t < tau".into(),
        ));
    }
    let cop_for = |t_star: &[f64], temps: &[f64]| {
        let cop = match (s.eps_prime, s.cop_slope) {
            (Some(e), _) => e,
            (None, Some(c)) => b.eps * (1.0 - c * (t_star[s.tau] - temps[s.tau - 1])),
            (None, None) => {
                return Err(ThermalError::InvalidScenario(
                    "heat-pump mode needs eps_prime or cop_slope".into(),
                ))
            }
        };
        if !(cop > 0.0 && cop <= b.eps) {
            return Err(ThermalError::InvalidScenario(format!(
                "catch-up COP must lie in (0, eps = {}], got {cop}",
                b.eps
            )));
        }
        Ok(cop)
    };
    ledger(b, s, ThermalMode::HeatPump, full, cop_for)
}
