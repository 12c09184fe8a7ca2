//! Physical types and equations of motion for the Chaplygin sleigh with a
//! movable control mass.
//!
//! The controlled system is written in terms of the momenta `p1` (angular
//! momentum about the contact point) and `p2` (linear momentum along the
//! blade), with the quasivelocities `xi1`, `xi2`, `eta` recovered from the
//! momenta and the instantaneous position/velocity of the control mass in
//! the body frame. The classical uncontrolled sleigh is provided for
//! reference and verification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Masses, inertia and the classical centre-of-mass offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SleighParams {
    /// Sleigh (skate) mass `M`.
    #[serde(rename = "M")]
    pub sleigh_mass: f64,
    /// Control mass `m`.
    #[serde(rename = "m")]
    pub control_mass: f64,
    /// Moment of inertia `I` about the contact point.
    #[serde(rename = "I")]
    pub inertia: f64,
    /// Offset `l` of the centre of mass along the blade; only used by the
    /// classical model.
    #[serde(rename = "l", default)]
    pub offset: f64,
}

impl SleighParams {
    pub fn new(sleigh_mass: f64, control_mass: f64, inertia: f64) -> Self {
        Self {
            sleigh_mass,
            control_mass,
            inertia,
            offset: 0.0,
        }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sleigh_mass.is_finite()
            && self.control_mass.is_finite()
            && self.inertia.is_finite()
            && self.offset.is_finite()
            && self.sleigh_mass > 0.0
            && self.control_mass >= 0.0
            && self.inertia > 0.0
            && self.offset >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "sleigh parameters must satisfy M > 0, m >= 0, I > 0, l >= 0 (got {self:?})"
            )))
        }
    }

    /// The shared denominator `(M+m)(I+m a^2) + M m b^2` of the
    /// quasivelocity expressions.
    #[inline]
    pub fn denominator(&self, a: f64, b: f64) -> f64 {
        let (big_m, m, i) = (self.sleigh_mass, self.control_mass, self.inertia);
        (big_m + m) * (i + m * a * a) + big_m * m * b * b
    }
}

impl Default for SleighParams {
    /// `m = 1`, `M = 2`, `I = 3`, the values used for every published arc.
    fn default() -> Self {
        Self::new(2.0, 1.0, 3.0)
    }
}

/// State of the controlled sleigh. `theta` is never wrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SleighState {
    pub p1: f64,
    pub p2: f64,
    pub theta: f64,
    pub x: f64,
    pub y: f64,
    /// Body-frame ordinate of the control mass when it is a state variable
    /// (general control family).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

impl SleighState {
    pub fn new(p1: f64, p2: f64, theta: f64, x: f64, y: f64) -> Self {
        Self {
            p1,
            p2,
            theta,
            x,
            y,
            b: None,
        }
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = Some(b);
        self
    }

    pub fn is_finite(&self) -> bool {
        [self.p1, self.p2, self.theta, self.x, self.y]
            .iter()
            .chain(self.b.iter())
            .all(|v| v.is_finite())
    }

    /// Packs the state into the integrator layout `[p1, p2, theta, x, y, b]`.
    /// `b` is zero when absent.
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.p1,
            self.p2,
            self.theta,
            self.x,
            self.y,
            self.b.unwrap_or(0.0),
        ]
    }

    pub fn from_array(v: &[f64; 6], has_b: bool) -> Self {
        Self {
            p1: v[0],
            p2: v[1],
            theta: v[2],
            x: v[3],
            y: v[4],
            b: has_b.then_some(v[5]),
        }
    }
}

/// Instantaneous position and velocity of the control mass in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlSample {
    pub a: f64,
    pub b: f64,
    pub da: f64,
    pub db: f64,
}

impl ControlSample {
    pub fn new(a: f64, b: f64, da: f64, db: f64) -> Self {
        Self { a, b, da, db }
    }
}

/// Body-frame angular rate `xi1`, blade speed `xi2` and transverse
/// quasivelocity `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quasivelocities {
    pub xi1: f64,
    pub xi2: f64,
    pub eta: f64,
}

/// Blade speed `v` and angular velocity `omega` of the classical sleigh.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassicalState {
    pub v: f64,
    pub omega: f64,
}

/// Time derivative of the controlled state (without the `b` component).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateRate {
    pub p1: f64,
    pub p2: f64,
    pub theta: f64,
    pub x: f64,
    pub y: f64,
}

pub fn quasivelocities(
    state: &SleighState,
    ctrl: &ControlSample,
    params: &SleighParams,
) -> Quasivelocities {
    let (big_m, m, i) = (params.sleigh_mass, params.control_mass, params.inertia);
    let ControlSample { a, b, da, db } = *ctrl;
    let (p1, p2) = (state.p1, state.p2);
    let den = params.denominator(a, b);

    let xi1 = ((big_m + m) * (p1 - m * a * db) + m * b * (p2 + big_m * da)) / den;
    let xi2 =
        (m * (b * (p1 - m * a * db) - (i + m * a * a) * da) + (i + m * (a * a + b * b)) * p2) / den;
    let eta = ((big_m * m * b * b + i * (big_m + m)) * db
        + a * ((big_m + m) * p1 + m * b * (p2 + big_m * da)))
        / den;
    Quasivelocities { xi1, xi2, eta }
}

/// Rate of the controlled state given already-evaluated quasivelocities.
#[inline]
pub fn rates_from(q: &Quasivelocities, theta: f64, params: &SleighParams) -> StateRate {
    let m = params.control_mass;
    let (s, c) = theta.sin_cos();
    StateRate {
        p1: -m * q.eta * q.xi2,
        p2: m * q.eta * q.xi1,
        theta: q.xi1,
        x: q.xi2 * c,
        y: q.xi2 * s,
    }
}

pub fn controlled_rhs(
    state: &SleighState,
    ctrl: &ControlSample,
    params: &SleighParams,
) -> StateRate {
    let q = quasivelocities(state, ctrl, params);
    rates_from(&q, state.theta, params)
}

/// Right-hand side of the classical sleigh, returned as `(dv, domega)`.
pub fn classical_rhs(state: &ClassicalState, params: &SleighParams) -> (f64, f64) {
    let (big_m, i, l) = (params.sleigh_mass, params.inertia, params.offset);
    let dv = l * state.omega * state.omega;
    let domega = -big_m * l * state.omega * state.v / (i + big_m * l * l);
    (dv, domega)
}

/// `v^2/2 + (I + M l^2) omega^2 / (2M)`, conserved along the classical flow.
pub fn classical_invariant(state: &ClassicalState, params: &SleighParams) -> f64 {
    let (big_m, i, l) = (params.sleigh_mass, params.inertia, params.offset);
    0.5 * state.v * state.v + 0.5 * (i + big_m * l * l) / big_m * state.omega * state.omega
}

/// Speed of the contact point relative to the ice; equal to `xi2`.
pub fn speed(state: &SleighState, ctrl: &ControlSample, params: &SleighParams) -> f64 {
    quasivelocities(state, ctrl, params).xi2
}

/// Kinetic energy of the skate on a circle of radius `r`:
/// `M v^2 / 2 + p1^2 / (2I)` with `p1 = M v r`.
pub fn skate_energy(xi2: f64, r: f64, params: &SleighParams) -> f64 {
    let (big_m, i) = (params.sleigh_mass, params.inertia);
    let p1 = big_m * xi2 * r;
    0.5 * big_m * xi2 * xi2 + p1 * p1 / (2.0 * i)
}

/// Kinetic energy of the control mass.
pub fn mass_energy(q: &Quasivelocities, ctrl: &ControlSample, params: &SleighParams) -> f64 {
    let m = params.control_mass;
    let ControlSample { a, b, da, db } = *ctrl;
    let Quasivelocities { xi1, xi2, .. } = *q;
    0.5 * m
        * (da * da
            + db * db
            + xi1 * xi1 * (a * a + b * b)
            + xi2 * xi2
            + 2.0 * xi1 * (a * db - da * b)
            + 2.0 * xi2 * (da - b * xi1))
}

/// `(M+m) p1 + m b p2`; vanishes exactly when the sleigh can glide on a
/// straight line at constant speed with the control mass frozen.
pub fn straight_line_residual(
    state: &SleighState,
    ctrl: &ControlSample,
    params: &SleighParams,
) -> f64 {
    (params.sleigh_mass + params.control_mass) * state.p1 + params.control_mass * ctrl.b * state.p2
}

/// Spatial position of the control mass, `(x, y) + R(theta) (a, b)`.
pub fn control_mass_position(state: &SleighState, ctrl: &ControlSample) -> (f64, f64) {
    let (s, c) = state.theta.sin_cos();
    (
        state.x + ctrl.a * c - ctrl.b * s,
        state.y + ctrl.a * s + ctrl.b * c,
    )
}
