//! Lyapunov functions and one-step drifts of the chain.
//!
//! The quadratic function `H(r, z) = (r + λz)² + (r + (λ+μ)z)²` has drift
//! `≤ -1` outside a bounded set whenever `μ > 0`. Its exact drift is computed
//! here from the quadratic form; the closed-form region expressions obtained
//! in the eigen-coordinates of the affine pieces are provided separately
//! ([`drift_closed_form`]) so the two can be checked against each other.
//!
//! For `-λ < μ < 0` the logarithmic function of the second eigen-coordinate
//! ([`log_lyap`]) has positive drift far out, which is what makes the chain
//! non-positive.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{affine_piece, classify_region, Params, Region, State};
use crate::rng::NoiseSource;
use crate::stats::{Estimate, Running};

/// Relative tolerance for exact-formula agreement.
pub const DRIFT_REL_TOL: f64 = 1e-9;
/// Absolute slack allowed when checking `exact <= bound`.
pub const BOUND_SLACK: f64 = 1e-9;
/// Monte Carlo agreement window, in standard errors.
pub const MC_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LyapunovError {
    #[error("the eigenbasis of the frustration piece needs mu != 0")]
    ZeroEvaporation,
    #[error("negative-drift geometry needs mu > 0 (got {0})")]
    GeometryUndefined(f64),
    #[error("the logarithmic Lyapunov function needs -lambda < mu < 0 (got mu = {0})")]
    NotMildlyUnstable(f64),
}

/// `H(x) = xᵀ Q x` with `Q = [[2, 2λ+μ], [2λ+μ, λ²+(λ+μ)²]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadForm {
    pub q: Matrix2<f64>,
}

impl QuadForm {
    pub fn new(p: &Params) -> Self {
        let (l, m) = (p.lambda(), p.mu());
        let off = 2.0 * l + m;
        Self {
            q: Matrix2::new(2.0, off, off, l * l + (l + m) * (l + m)),
        }
    }

    pub fn eval(&self, x: State) -> f64 {
        let v = x.as_vector();
        v.dot(&(self.q * v))
    }
}

/// The quadratic Lyapunov function, as a sum of two squares.
pub fn lyap_h(p: &Params, x: State) -> f64 {
    let a = x.r + p.lambda() * x.z;
    let b = x.r + (p.lambda() + p.mu()) * x.z;
    a * a + b * b
}

/// A point in eigen-coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Coords {
    pub u: f64,
    pub v: f64,
}

impl Coords {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Eigen-decompositions `A1 = M1 Λ1 M1⁻¹` and `A2 = A4 = M2 Λ2 M2⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis {
    pub m1: Matrix2<f64>,
    pub m1_inv: Matrix2<f64>,
    pub lambda1: Matrix2<f64>,
    pub m2: Matrix2<f64>,
    pub m2_inv: Matrix2<f64>,
    pub lambda2: Matrix2<f64>,
}

impl Basis {
    pub fn new(p: &Params) -> Result<Self, LyapunovError> {
        let (l, m) = (p.lambda(), p.mu());
        if m == 0.0 {
            return Err(LyapunovError::ZeroEvaporation);
        }
        Ok(Self {
            m1: Matrix2::new(-l - m, -l, 1.0, 1.0),
            m1_inv: Matrix2::new(-1.0 / m, -l / m, 1.0 / m, (l + m) / m),
            lambda1: Matrix2::new(1.0, 0.0, 0.0, 1.0 - m),
            m2: Matrix2::new(1.0, -l, 0.0, 1.0),
            m2_inv: Matrix2::new(1.0, l, 0.0, 1.0),
            lambda2: Matrix2::new(1.0, 0.0, 0.0, p.gamma()),
        })
    }

    /// `M1 Λ1 M1⁻¹`.
    pub fn a1(&self) -> Matrix2<f64> {
        self.m1 * self.lambda1 * self.m1_inv
    }

    /// `M2 Λ2 M2⁻¹`.
    pub fn a2(&self) -> Matrix2<f64> {
        self.m2 * self.lambda2 * self.m2_inv
    }
}

/// `y = M1⁻¹ x`: `u = -(r + λz)/μ`, `v = (r + (λ+μ)z)/μ`.
pub fn to_y1(p: &Params, x: State) -> Result<Coords, LyapunovError> {
    let m = p.mu();
    if m == 0.0 {
        return Err(LyapunovError::ZeroEvaporation);
    }
    Ok(Coords {
        u: -(x.r + p.lambda() * x.z) / m,
        v: (x.r + (p.lambda() + m) * x.z) / m,
    })
}

/// `x = M1 y`.
pub fn from_y1(p: &Params, y: Coords) -> State {
    let l = p.lambda();
    State {
        r: -(l + p.mu()) * y.u - l * y.v,
        z: y.u + y.v,
    }
}

/// `y = M2⁻¹ x = (r + λz, z)`.
pub fn to_y2(p: &Params, x: State) -> Coords {
    Coords {
        u: x.r + p.lambda() * x.z,
        v: x.z,
    }
}

/// `x = M2 y`.
pub fn from_y2(p: &Params, y: Coords) -> State {
    State {
        r: y.u - p.lambda() * y.v,
        z: y.v,
    }
}

/// `H` in the first eigen-coordinates: `μ²(u² + v²)`.
pub fn w1(p: &Params, y: Coords) -> f64 {
    p.mu() * p.mu() * (y.u * y.u + y.v * y.v)
}

/// `H` in the second eigen-coordinates: `u² + (u + μv)²`.
pub fn w2(p: &Params, y: Coords) -> f64 {
    let s = y.u + p.mu() * y.v;
    y.u * y.u + s * s
}

/// Exact one-step drift `E_x H(X(1)) - H(x)`.
///
/// Noise only enters the reserve coordinate, and it appears once in each of
/// the two squares of `H`, hence the `2σ²` term.
pub fn drift_exact(p: &Params, x: State) -> f64 {
    let qf = QuadForm::new(p);
    let next = affine_piece(p, classify_region(p, x)).apply(x);
    qf.eval(next) + 2.0 * p.sigma() * p.sigma() - qf.eval(x)
}

/// Drift in D1, in `M1` coordinates (exact).
pub fn drift_w1(p: &Params, y: Coords) -> f64 {
    let (m, z, s) = (p.mu(), p.zeta(), p.sigma());
    -m.powi(3) * (2.0 - m) * y.v * y.v + 2.0 * z * m * (1.0 - m) * y.v - 2.0 * z * m * y.u
        + 2.0 * (z * z + s * s)
}

/// Drift in D2, in `M2` coordinates (exact). Each of the two squares of `H`
/// contributes its own `2ζu + ζ² + σ²`.
pub fn drift_w2(p: &Params, y: Coords) -> f64 {
    let (l, m, z, s) = (p.lambda(), p.mu(), p.zeta(), p.sigma());
    let (u, v) = (y.u, y.v);
    2.0 * z * u + z * z + s * s - m * m * (2.0 - (l + m)) * (l + m) * v * v
        - 2.0 * m * (l + m) * u * v
        + 2.0 * z * u
        + 2.0 * m * (1.0 - l - m) * z * v
        + z * z
        + s * s
}

/// Drift in D4, in `M2` coordinates (exact).
pub fn drift_w4(p: &Params, y: Coords) -> f64 {
    let (l, m, x, s) = (p.lambda(), p.mu(), p.xi(), p.sigma());
    let (u, v) = (y.u, y.v);
    -2.0 * x * u + x * x + s * s - m * m * (2.0 - (l + m)) * (l + m) * v * v
        - 2.0 * m * (l + m) * u * v
        - 2.0 * x * u
        - 2.0 * m * (1.0 - l - m) * x * v
        + x * x
        + s * s
}

/// Upper bound on the D2 drift as a function of `v = z` alone.
///
/// Holds on D2 when `μ(λ+μ) ≥ 0`.
pub fn drift_bound_d2(p: &Params, v: f64) -> f64 {
    d2_bound_poly(p).eval(v)
}

/// Upper bound on the drift in D3. Holds when `2λ + μ ≥ 0`.
pub fn drift_bound_d3(p: &Params, x: State) -> f64 {
    let e = Ellipse::new(p);
    let (rs, s) = (p.r_star(), p.sigma());
    2.0 * (rs * rs + s * s - x.r * x.r) + 2.0 * e.beta * x.z - e.alpha * x.z * x.z
}

/// Upper bound on the D4 drift, in `M2` coordinates. Holds when `μ(λ+μ) ≥ 0`.
pub fn drift_bound_d4(p: &Params, y: Coords) -> f64 {
    let (l, m, x, s) = (p.lambda(), p.mu(), p.xi(), p.sigma());
    let (u, v) = (y.u, y.v);
    2.0 * s * s + 2.0 * x * x
        - 4.0 * x * u
        - (2.0 * m * (l + m) * p.r_star() + 2.0 * x * m) * v
        - m * (l + m) * (l + m) * (2.0 - m) * v * v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    Exact,
    UpperBound,
}

impl DriftKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DriftKind::Exact => "exact",
            DriftKind::UpperBound => "upper_bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormDrift {
    pub value: f64,
    pub kind: DriftKind,
}

/// Region-specific closed form: exact in D1 and D2, an upper bound in D3 and D4.
pub fn drift_closed_form(p: &Params, x: State) -> Result<ClosedFormDrift, LyapunovError> {
    let (value, kind) = match classify_region(p, x) {
        Region::D1 => (drift_w1(p, to_y1(p, x)?), DriftKind::Exact),
        Region::D2 => (drift_w2(p, to_y2(p, x)), DriftKind::Exact),
        Region::D3 => (drift_bound_d3(p, x), DriftKind::UpperBound),
        Region::D4 => (drift_bound_d4(p, to_y2(p, x)), DriftKind::UpperBound),
    };
    Ok(ClosedFormDrift { value, kind })
}

/// Exact drift next to its closed form and a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub state: State,
    pub region: Region,
    pub exact: f64,
    /// `None` where the closed form does not apply (D1 with `μ = 0`).
    pub closed_form: Option<ClosedFormDrift>,
    pub mc: Option<Estimate>,
    /// Exact forms agree to [`DRIFT_REL_TOL`]; bounds hold up to [`BOUND_SLACK`].
    pub closed_form_ok: Option<bool>,
    /// `|exact - mc| <= MC_SIGMAS * stderr`.
    pub mc_ok: Option<bool>,
}

impl DriftReport {
    pub fn new(p: &Params, x: State, mc: Option<Estimate>) -> Self {
        let exact = drift_exact(p, x);
        let closed_form = drift_closed_form(p, x).ok();
        let closed_form_ok = closed_form.map(|pd| match pd.kind {
            DriftKind::Exact => {
                (exact - pd.value).abs() <= DRIFT_REL_TOL * exact.abs().max(pd.value.abs()).max(1.0)
            }
            DriftKind::UpperBound => exact <= pd.value + BOUND_SLACK,
        });
        let mc_ok = mc.map(|e| e.within(exact, MC_SIGMAS));
        Self {
            state: x,
            region: classify_region(p, x),
            exact,
            closed_form,
            mc,
            closed_form_ok,
            mc_ok,
        }
    }
}

/// `a v² + b v + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadratic {
    pub fn eval(&self, v: f64) -> f64 {
        (self.a * v + self.b) * v + self.c
    }

    /// Real roots in increasing order, if any.
    pub fn roots(&self) -> Option<(f64, f64)> {
        let Quadratic { a, b, c } = *self;
        if a == 0.0 {
            if b == 0.0 {
                return None;
            }
            let r = -c / b;
            return Some((r, r));
        }
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
        Some((r1.min(r2), r1.max(r2)))
    }
}

fn d2_bound_poly(p: &Params) -> Quadratic {
    let (l, m, z, s) = (p.lambda(), p.mu(), p.zeta(), p.sigma());
    Quadratic {
        a: -m * (l + m) * (l + m) * (2.0 - m),
        b: 2.0 * z * (2.0 * l + m * (1.0 - l - m)),
        c: 2.0 * s * s - 2.0 * z * z + 4.0 * z * p.r_star(),
    }
}

/// The level curve where the D3 drift bound equals -1:
/// `2r² + α(z - β/α)² = 1 + 2r*² + 2σ² + β²/α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    /// `(λ+μ)² μ (2-μ)`
    pub alpha: f64,
    /// `r*(λ + (λ+μ)(1-μ))`
    pub beta: f64,
    /// Right-hand side `1 + 2r*² + 2σ² + β²/α`.
    pub radius: f64,
}

impl Ellipse {
    pub fn new(p: &Params) -> Self {
        let (l, m, rs, s) = (p.lambda(), p.mu(), p.r_star(), p.sigma());
        let alpha = (l + m) * (l + m) * m * (2.0 - m);
        let beta = rs * (l + (l + m) * (1.0 - m));
        Self {
            alpha,
            beta,
            radius: 1.0 + 2.0 * rs * rs + 2.0 * s * s + beta * beta / alpha,
        }
    }

    pub fn contains(&self, x: State) -> bool {
        let dz = x.z - self.beta / self.alpha;
        2.0 * x.r * x.r + self.alpha * dz * dz < self.radius
    }
}

/// The sets `C1..C4` outside of which the quadratic drift is at most -1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativeDriftGeometry {
    /// `DW1 > -1` iff `u < g1(v)` (D1, `M1` coordinates).
    pub g1: Quadratic,
    /// D2 drift bound is `<= -1` for `z >= v_plus`.
    pub v_plus: f64,
    /// D4 drift bound is `< -1` iff `u > g4(v)` (`M2` coordinates).
    pub g4: Quadratic,
    pub ellipse: Ellipse,
    params: Params,
}

pub fn negative_drift_geometry(p: &Params) -> Result<NegativeDriftGeometry, LyapunovError> {
    let (l, m, z, x, s) = (p.lambda(), p.mu(), p.zeta(), p.xi(), p.sigma());
    if m <= 0.0 {
        return Err(LyapunovError::GeometryUndefined(m));
    }
    let g1 = Quadratic {
        a: -m * m * (2.0 - m) / (2.0 * z),
        b: 1.0 - m,
        c: (2.0 * (z * z + s * s) + 1.0) / (2.0 * z * m),
    };
    let g4 = Quadratic {
        a: -m * (l + m) * (l + m) * (2.0 - m) / (4.0 * x),
        b: -(2.0 * m * (l + m) * p.r_star() + 2.0 * x * m) / (4.0 * x),
        c: (2.0 * s * s + 2.0 * x * x + 1.0) / (4.0 * x),
    };
    let shifted = Quadratic {
        c: d2_bound_poly(p).c + 1.0,
        ..d2_bound_poly(p)
    };
    let v_plus = shifted.roots().map_or(0.0, |(_, hi)| hi.max(0.0));
    Ok(NegativeDriftGeometry {
        g1,
        v_plus,
        g4,
        ellipse: Ellipse::new(p),
        params: *p,
    })
}

impl NegativeDriftGeometry {
    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Whether `x` lies in `C1 ∪ C2 ∪ C3 ∪ C4`.
    pub fn in_c_union(&self, x: State) -> bool {
        let p = &self.params;
        match classify_region(p, x) {
            Region::D1 => {
                // μ > 0 is guaranteed by construction
                let y = to_y1(p, x).expect("mu > 0");
                y.u < self.g1.eval(y.v)
            }
            Region::D2 => x.z < self.v_plus,
            Region::D3 => self.ellipse.contains(x),
            Region::D4 => {
                let y = to_y2(p, x);
                y.u < self.g4.eval(y.v)
            }
        }
    }
}

/// `log v` for `v ≥ 1`, else 0.
pub fn log_lyap(y: Coords) -> f64 {
    if y.v >= 1.0 {
        y.v.ln()
    } else {
        0.0
    }
}

/// Monte Carlo drift of [`log_lyap`] at second coordinate `v`, under the
/// frustration-piece evolution `V' = (1-μ)V + (N+ζ)/μ`.
pub fn log_drift_numeric(
    p: &Params,
    v: f64,
    n_samples: u64,
    seed: u64,
) -> Result<Estimate, LyapunovError> {
    let m = p.mu();
    if !(m < 0.0 && m > -p.lambda()) {
        return Err(LyapunovError::NotMildlyUnstable(m));
    }
    let here = log_lyap(Coords::new(0.0, v));
    let mut noise = NoiseSource::new(seed, 0, p.sigma());
    let mut acc = Running::new();
    for _ in 0..n_samples {
        let v_next = (1.0 - m) * v + (noise.draw() + p.zeta()) / m;
        acc.push(log_lyap(Coords::new(0.0, v_next)) - here);
    }
    Ok(acc.estimate())
}

/// `‖A - B‖_max`.
pub fn max_abs_diff(a: &Matrix2<f64>, b: &Matrix2<f64>) -> f64 {
    (a - b).abs().max()
}
