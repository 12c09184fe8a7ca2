//! Control laws for the movable mass.
//!
//! Two families are supported: the circular law `a = A cos wt`,
//! `b = A sin wt`, and the general law where only `a(t)` is prescribed and
//! `b` is carried as a state variable whose rate keeps the trajectory on a
//! circle of the requested radius.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ControlSample, SleighParams, SleighState};

/// Default guard on the denominator of the `b`-rate equation.
pub const DEFAULT_SINGULAR_EPS: f64 = 1e-8;

/// Mass moving on a body-frame circle of radius `|amplitude|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularControl {
    pub amplitude: f64,
    pub omega: f64,
}

impl CircularControl {
    pub fn new(amplitude: f64, omega: f64) -> Self {
        Self { amplitude, omega }
    }

    pub fn eval(&self, t: f64) -> ControlSample {
        let (s, c) = (self.omega * t).sin_cos();
        let a = self.amplitude;
        let w = self.omega;
        ControlSample {
            a: a * c,
            b: a * s,
            da: -a * w * s,
            db: a * w * c,
        }
    }
}

/// `a(t) = a1 + a2 sin wt + a3 cos wt`; `b` follows from the arc constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralControl {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub omega: f64,
}

impl GeneralControl {
    pub fn new(a1: f64, a2: f64, a3: f64, omega: f64) -> Self {
        Self { a1, a2, a3, omega }
    }

    /// Returns `(a, da)`.
    pub fn eval_a(&self, t: f64) -> (f64, f64) {
        let (s, c) = (self.omega * t).sin_cos();
        let a = self.a1 + self.a2 * s + self.a3 * c;
        let da = self.omega * (self.a2 * c - self.a3 * s);
        (a, da)
    }

    /// First time `t` with `a(t) = 0` strictly after `t0` in the direction of
    /// `dir` (sign), or `None` if `a` never vanishes there.
    pub fn first_zero(&self, t0: f64, dir: f64) -> Option<f64> {
        let amp = self.a2.hypot(self.a3);
        if self.omega == 0.0 || amp == 0.0 {
            let a = self.a1 + self.a3;
            return (a == 0.0).then_some(t0);
        }
        if self.a1.abs() > amp {
            return None;
        }
        // a = a1 + amp sin(w t + phi)
        let phi = self.a3.atan2(self.a2);
        let base = (-self.a1 / amp).asin();
        let period = std::f64::consts::TAU / self.omega.abs();
        let mut best: Option<f64> = None;
        for root in [base, std::f64::consts::PI - base] {
            // times where w t + phi = root + 2 pi k
            let t_ref = (root - phi) / self.omega;
            let k = ((t0 - t_ref) / period).floor();
            for j in -1..=2 {
                let t = t_ref + (k + j as f64) * period;
                let ahead = (t - t0) * dir;
                if ahead > 0.0 && best.is_none_or(|b| ahead < (b - t0) * dir) {
                    best = Some(t);
                }
            }
        }
        best
    }

    /// `a(t)` stays away from zero for all `t` iff `a1^2 > a2^2 + a3^2`.
    pub fn is_regular(&self) -> bool {
        regularity_check(self)
    }
}

pub fn regularity_check(ctrl: &GeneralControl) -> bool {
    ctrl.a1 * ctrl.a1 > ctrl.a2 * ctrl.a2 + ctrl.a3 * ctrl.a3
}

/// Arc radius together with the conserved combination `p1 + r p2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcConstraint {
    pub radius: f64,
    pub momentum: f64,
}

impl ArcConstraint {
    pub fn from_state(radius: f64, state: &SleighState) -> Self {
        Self {
            radius,
            momentum: state.p1 + radius * state.p2,
        }
    }

    /// `p2` implied by the conserved combination for a given `p1`.
    pub fn p2_for(&self, p1: f64) -> f64 {
        (self.momentum - p1) / self.radius
    }

    pub fn residual(&self, state: &SleighState) -> f64 {
        state.p1 + self.radius * state.p2 - self.momentum
    }
}

/// Rate of `b` that keeps `xi2 = r xi1` given `a`, `da` and the state.
pub fn bdot(
    state: &SleighState,
    a: f64,
    da: f64,
    r: f64,
    params: &SleighParams,
    eps: f64,
) -> Result<f64> {
    let (big_m, m, i) = (params.sleigh_mass, params.control_mass, params.inertia);
    let b = state.b.unwrap_or(0.0);
    let (p1, p2) = (state.p1, state.p2);
    let den = m * m * a * b - r * (big_m + m) * m * a;
    if den.abs() <= eps || !den.is_finite() {
        return Err(Error::SingularControl {
            a,
            denominator: den,
            threshold: eps,
        });
    }
    let num = m * b * p1 - m * da * (i + m * a * a) + p2 * (i + m * (a * a + b * b))
        - r * (big_m + m) * p1
        - r * m * b * (p2 + big_m * da);
    Ok(num / den)
}

/// Which control family an arc task uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlFamily {
    Circular,
    General,
}

impl ControlFamily {
    pub fn n_params(self) -> usize {
        match self {
            ControlFamily::Circular => 2,
            ControlFamily::General => 4,
        }
    }

    pub fn build(self, params: &[f64]) -> Result<Control> {
        if params.len() != self.n_params() || params.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{self:?} control expects {} finite parameters, got {params:?}",
                self.n_params()
            )));
        }
        Ok(match self {
            ControlFamily::Circular => {
                Control::Circular(CircularControl::new(params[0], params[1]))
            }
            ControlFamily::General => Control::General(GeneralControl::new(
                params[0], params[1], params[2], params[3],
            )),
        })
    }
}

/// Common evaluation interface for both families.
pub trait ControlLaw {
    /// Control sample at time `t`. `r` is the arc radius the sleigh is
    /// meant to trace.
    fn sample(
        &self,
        t: f64,
        state: &SleighState,
        r: f64,
        params: &SleighParams,
    ) -> Result<ControlSample>;

    /// Whether `b` is integrated as part of the state.
    fn carries_b(&self) -> bool;

    /// Whether the law itself enforces `xi2 = r xi1`.
    fn enforces_arc(&self) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Control {
    Circular(CircularControl),
    General(GeneralControl),
}

impl Control {
    pub fn family(&self) -> ControlFamily {
        match self {
            Control::Circular(_) => ControlFamily::Circular,
            Control::General(_) => ControlFamily::General,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Control::Circular(c) => vec![c.amplitude, c.omega],
            Control::General(g) => vec![g.a1, g.a2, g.a3, g.omega],
        }
    }
}

impl ControlLaw for Control {
    fn sample(
        &self,
        t: f64,
        state: &SleighState,
        r: f64,
        params: &SleighParams,
    ) -> Result<ControlSample> {
        match self {
            Control::Circular(c) => Ok(c.eval(t)),
            Control::General(g) => {
                let (a, da) = g.eval_a(t);
                let db = bdot(state, a, da, r, params, DEFAULT_SINGULAR_EPS)?;
                Ok(ControlSample {
                    a,
                    b: state.b.unwrap_or(0.0),
                    da,
                    db,
                })
            }
        }
    }

    fn carries_b(&self) -> bool {
        matches!(self, Control::General(_))
    }

    fn enforces_arc(&self) -> bool {
        matches!(self, Control::General(_))
    }
}
