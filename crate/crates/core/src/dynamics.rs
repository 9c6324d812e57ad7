//! The reserve/backlog Markov chain.
//!
//! The state is `x = (R, Z)`: the reserve (supply minus expressed demand) and
//! the latent backlogged demand. One slot of the chain is
//!
//! ```text
//! R' = R - λ[R]⁻ + λ(λ+μ)Z + H(R) + N
//! Z' = [R]⁻ + (1-λ-μ)Z
//! ```
//!
//! where `[R]⁻ = max(-R, 0)` is the frustrated demand and
//! `H(R) = max(min(ζ, r* - R), -ξ)` is the threshold control. The reserve axis
//! splits into four intervals on which the update is affine; see [`Region`]
//! and [`affine_piece`].

use std::fmt;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{two_sum, ExactSum};

/// Unvalidated parameter bundle, as read from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSet {
    pub lambda: f64,
    pub mu: f64,
    pub zeta: f64,
    pub xi: f64,
    pub r_star: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid parameter `{field}`: {constraint}")]
pub struct ParamError {
    pub field: &'static str,
    pub constraint: &'static str,
}

impl ParamError {
    fn new(field: &'static str, constraint: &'static str) -> Self {
        Self { field, constraint }
    }
}

/// Sign class of the evaporation rate, which decides the long-run behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `μ > 0`: positive Harris recurrent under any threshold policy.
    Positive,
    /// `μ = 0`: no stability claim.
    Zero,
    /// `-λ < μ < 0`: non-positive.
    NegativeMild,
    /// `μ ≤ -λ`: the backlog can never decrease.
    NegativeTrivial,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Positive => "positive",
            Regime::Zero => "zero",
            Regime::NegativeMild => "negative_mild",
            Regime::NegativeTrivial => "negative_trivial",
        })
    }
}

/// Validated model constants.
///
/// Construct with [`Params::new`] or [`ParamSet::validate`]. Serializes as a
/// [`ParamSet`] and re-validates on deserialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamSet", into = "ParamSet")]
pub struct Params {
    lambda: f64,
    mu: f64,
    zeta: f64,
    xi: f64,
    r_star: f64,
    sigma: f64,
    gamma: f64,
    /// `λ(λ+μ)`, shared by every route that needs it so they see the same `f64`.
    coupling: f64,
    regime: Regime,
}

impl ParamSet {
    /// Checks the model constraints and returns the first one violated.
    ///
    /// `σ = 0` is accepted and gives the deterministic skeleton of the chain.
    pub fn validate(self) -> Result<Params, ParamError> {
        let ParamSet {
            lambda,
            mu,
            zeta,
            xi,
            r_star,
            sigma,
        } = self;
        let finite = [
            ("lambda", lambda),
            ("mu", mu),
            ("zeta", zeta),
            ("xi", xi),
            ("r_star", r_star),
            ("sigma", sigma),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(ParamError::new(name, "must be finite"));
            }
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(ParamError::new("lambda", "lambda must be in (0, 1)"));
        }
        if zeta <= 0.0 {
            return Err(ParamError::new("zeta", "zeta must be > 0"));
        }
        if xi <= 0.0 {
            return Err(ParamError::new("xi", "xi must be > 0"));
        }
        if sigma < 0.0 {
            return Err(ParamError::new("sigma", "sigma must be >= 0"));
        }
        if r_star <= zeta {
            return Err(ParamError::new("r_star", "r_star must be > zeta"));
        }
        if lambda + mu >= 1.0 {
            return Err(ParamError::new("mu", "lambda+mu must be < 1"));
        }
        let regime = if mu > 0.0 {
            Regime::Positive
        } else if mu == 0.0 {
            Regime::Zero
        } else if mu > -lambda {
            Regime::NegativeMild
        } else {
            Regime::NegativeTrivial
        };
        Ok(Params {
            lambda,
            mu,
            zeta,
            xi,
            r_star,
            sigma,
            gamma: 1.0 - lambda - mu,
            coupling: lambda * (lambda + mu),
            regime,
        })
    }
}

impl TryFrom<ParamSet> for Params {
    type Error = ParamError;

    fn try_from(raw: ParamSet) -> Result<Self, Self::Error> {
        raw.validate()
    }
}

impl From<Params> for ParamSet {
    fn from(p: Params) -> Self {
        p.raw()
    }
}

impl Params {
    pub fn new(
        lambda: f64,
        mu: f64,
        zeta: f64,
        xi: f64,
        r_star: f64,
        sigma: f64,
    ) -> Result<Self, ParamError> {
        ParamSet {
            lambda,
            mu,
            zeta,
            xi,
            r_star,
            sigma,
        }
        .validate()
    }

    pub fn raw(&self) -> ParamSet {
        ParamSet {
            lambda: self.lambda,
            mu: self.mu,
            zeta: self.zeta,
            xi: self.xi,
            r_star: self.r_star,
            sigma: self.sigma,
        }
    }

    /// Same constants with a different evaporation rate.
    pub fn with_mu(&self, mu: f64) -> Result<Self, ParamError> {
        ParamSet { mu, ..self.raw() }.validate()
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self, ParamError> {
        ParamSet {
            sigma,
            ..self.raw()
        }
        .validate()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn zeta(&self) -> f64 {
        self.zeta
    }
    pub fn xi(&self) -> f64 {
        self.xi
    }
    pub fn r_star(&self) -> f64 {
        self.r_star
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    /// `1 - λ - μ`, the per-slot retention factor of the backlog.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// `λ(λ+μ)`, the weight of the backlog in the reserve update.
    pub fn coupling(&self) -> f64 {
        self.coupling
    }
    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Lower edge of the tracking region, `r* - ζ`.
    pub fn ramp_up_edge(&self) -> f64 {
        self.r_star - self.zeta
    }

    /// Lower edge of the ramp-down region, `r* + ξ`.
    pub fn ramp_down_edge(&self) -> f64 {
        self.r_star + self.xi
    }
}

/// A point of the chain: reserve `r` and latent backlog `z ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct State {
    pub r: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("state coordinates must be finite, got ({r}, {z})")]
    NonFinite { r: f64, z: f64 },
    #[error("backlog z must be >= 0, got {0}")]
    NegativeBacklog(f64),
}

impl State {
    pub const ORIGIN: State = State { r: 0.0, z: 0.0 };

    pub const fn new(r: f64, z: f64) -> Self {
        Self { r, z }
    }

    pub fn validate(self) -> Result<Self, StateError> {
        if !self.r.is_finite() || !self.z.is_finite() {
            return Err(StateError::NonFinite {
                r: self.r,
                z: self.z,
            });
        }
        if self.z < 0.0 {
            return Err(StateError::NegativeBacklog(self.z));
        }
        Ok(self)
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.r, self.z)
    }

    pub fn from_vector(v: &Vector2<f64>) -> Self {
        Self { r: v[0], z: v[1] }
    }
}

impl From<(f64, f64)> for State {
    fn from((r, z): (f64, f64)) -> Self {
        Self { r, z }
    }
}

/// The four reserve intervals on which the chain is affine.
///
/// Intervals are left-closed and right-open:
/// `D1 = (-∞, 0)`, `D2 = [0, r*-ζ)`, `D3 = [r*-ζ, r*+ξ)`, `D4 = [r*+ξ, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    /// Frustration active, ramp-up saturated.
    D1,
    /// Ramp-up saturated.
    D2,
    /// Target reserve reachable in one slot.
    D3,
    /// Ramp-down saturated.
    D4,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::D1, Region::D2, Region::D3, Region::D4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::D1 => "D1",
            Region::D2 => "D2",
            Region::D3 => "D3",
            Region::D4 => "D4",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "D1" => Ok(Region::D1),
            "D2" => Ok(Region::D2),
            "D3" => Ok(Region::D3),
            "D4" => Ok(Region::D4),
            other => Err(format!("unknown region {other:?}")),
        }
    }
}

pub fn classify_region(p: &Params, x: State) -> Region {
    if x.r < 0.0 {
        Region::D1
    } else if x.r < p.ramp_up_edge() {
        Region::D2
    } else if x.r < p.ramp_down_edge() {
        Region::D3
    } else {
        Region::D4
    }
}

/// Real-time purchase increment `max(min(ζ, r* - r), -ξ)`.
pub fn ramp_control(p: &Params, r: f64) -> f64 {
    (p.r_star - r).min(p.zeta).max(-p.xi)
}

/// One affine piece `x ↦ a·x + b` of the chain (noise excluded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePiece {
    pub a: Matrix2<f64>,
    /// Rounding residual of each entry of `a`; `a + a_residual` is the exact
    /// matrix. Non-zero only for the `1 + λ` entry of the D1 piece.
    pub a_residual: Matrix2<f64>,
    pub b: Vector2<f64>,
}

impl AffinePiece {
    /// `a·x + b` in plain floating point.
    pub fn apply(&self, x: State) -> State {
        State::from_vector(&(self.a * x.as_vector() + self.b))
    }
}

pub fn affine_piece(p: &Params, region: Region) -> AffinePiece {
    let c = p.coupling;
    let g = p.gamma;
    let zero = Matrix2::zeros();
    match region {
        Region::D1 => {
            let (diag, diag_lo) = two_sum(1.0, p.lambda);
            AffinePiece {
                a: Matrix2::new(diag, c, -1.0, g),
                a_residual: Matrix2::new(diag_lo, 0.0, 0.0, 0.0),
                b: Vector2::new(p.zeta, 0.0),
            }
        }
        Region::D2 => AffinePiece {
            a: Matrix2::new(1.0, c, 0.0, g),
            a_residual: zero,
            b: Vector2::new(p.zeta, 0.0),
        },
        Region::D3 => AffinePiece {
            a: Matrix2::new(0.0, c, 0.0, g),
            a_residual: zero,
            b: Vector2::new(p.r_star, 0.0),
        },
        Region::D4 => AffinePiece {
            a: Matrix2::new(1.0, c, 0.0, g),
            a_residual: zero,
            b: Vector2::new(-p.xi, 0.0),
        },
    }
}

/// Everything observable about one slot of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    /// State at the start of the slot.
    pub state: State,
    pub region: Region,
    /// Noise `N(t+1)` driving the transition out of this slot.
    pub noise: f64,
    /// Expressed backlog `B(t) = λZ(t)`.
    pub b_expr: f64,
    /// Frustrated demand `F(t) = [R(t)]⁻`.
    pub f_frustrated: f64,
    /// Control increment `H(t)`.
    pub h_control: f64,
}

/// Piecewise-scalar transition. Each coordinate is the correctly rounded
/// value of the exact real update.
pub fn step(p: &Params, x: State, noise: f64) -> (State, StepRecord) {
    step_at(p, x, noise, 0)
}

pub(crate) fn step_at(p: &Params, x: State, noise: f64, t: u64) -> (State, StepRecord) {
    debug_assert!(x.z >= 0.0, "backlog must be nonnegative");
    let State { r, z } = x;
    let frustrated = (-r).max(0.0);

    let mut r_next = ExactSum::new();
    r_next
        .add(r)
        .add_product(-p.lambda, frustrated)
        .add_product(p.coupling, z);
    let region = classify_region(p, x);
    match region {
        Region::D1 | Region::D2 => {
            r_next.add(p.zeta);
        }
        Region::D3 => {
            // Tracking: H = r* - r, kept unrounded.
            r_next.add(p.r_star).add(-r);
        }
        Region::D4 => {
            r_next.add(-p.xi);
        }
    }
    r_next.add(noise);

    let mut z_next = ExactSum::new();
    z_next.add(frustrated).add_product(p.gamma, z);

    let next = State {
        r: r_next.value(),
        z: z_next.value(),
    };
    let record = StepRecord {
        t,
        state: x,
        region,
        noise,
        b_expr: p.lambda * z,
        f_frustrated: frustrated,
        h_control: ramp_control(p, r),
    };
    (next, record)
}

/// Matrix-form transition `A_i·x + b_i + (n, 0)`, evaluated exactly and
/// rounded once per coordinate.
pub fn step_matrix(p: &Params, x: State, noise: f64) -> State {
    let piece = affine_piece(p, classify_region(p, x));
    let v = x.as_vector();
    let row = |i: usize, extra: f64| {
        let mut acc = ExactSum::new();
        for j in 0..2 {
            acc.add_product(piece.a[(i, j)], v[j]);
            if piece.a_residual[(i, j)] != 0.0 {
                acc.add_product(piece.a_residual[(i, j)], v[j]);
            }
        }
        acc.add(piece.b[i]).add(extra);
        acc.value()
    };
    State {
        r: row(0, noise),
        z: row(1, 0.0),
    }
}
