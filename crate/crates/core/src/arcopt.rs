//! Single circular-arc traces: forward/backward shooting to zero speed,
//! length- and point-based costs, and the parameter search.
//!
//! An arc is grown from an interior state in both time directions; each
//! half stops where the blade speed `xi2` vanishes, so the concatenated arc
//! begins and ends at rest and can be joined to neighbours with a finite
//! turn.

use serde::{Deserialize, Serialize};

use crate::controls::{bdot, Control, ControlFamily, ControlLaw, DEFAULT_SINGULAR_EPS};
use crate::error::{Error, Result};
use crate::geometry::{self, ArcLengthCurve, CircleFit, Point};
use crate::model::{
    quasivelocities, rates_from, ControlSample, Quasivelocities, SleighParams, SleighState,
};
use crate::ode::{integrate, IntegratorConfig, OdeSolution, Trajectory};
use crate::optim::{nelder_mead, NelderMeadConfig};

/// Minimum length of each half of an arc.
pub const MIN_HALF_LENGTH: f64 = 1e-6;

const N: usize = 7;
// integration layout: p1, p2, theta, x, y, b, signed arc length
const S: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Length(f64),
    Point([f64; 2]),
}

/// How the circular family is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcDynamics {
    /// Turning rate slaved to the blade speed, `xi1 = xi2 / r`: the trace
    /// is an exact circle and `p1 + r p2` is conserved.
    #[default]
    Constrained,
    /// Blade speed slaved to the turning rate, `xi2 = r xi1`.
    ConstrainedTurn,
    /// Unmodified equations of motion; circularity is only as good as the
    /// chosen controls.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iter: usize,
    pub max_evals: usize,
    /// Number of simplex restarts from the incumbent.
    pub restarts: usize,
    pub initial_step: f64,
    /// Cost above which the search is reported as failed.
    pub cost_threshold: f64,
    /// The search stops once the cost drops below this.
    pub cost_target: f64,
    /// Weight of the missing-rest penalty used while searching.
    pub rest_weight: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iter: 600,
            max_evals: 1200,
            restarts: 3,
            initial_step: 0.25,
            cost_threshold: 1e-3,
            cost_target: 1e-14,
            rest_weight: 10.0,
        }
    }
}

fn default_p() -> f64 {
    2.0
}

fn default_eps() -> f64 {
    DEFAULT_SINGULAR_EPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcTask {
    #[serde(default)]
    pub name: String,
    /// Integration horizon per direction.
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "r")]
    pub radius: f64,
    pub target: Target,
    pub init: SleighState,
    #[serde(default)]
    pub params: SleighParams,
    pub family: ControlFamily,
    pub guess: Vec<f64>,
    #[serde(default = "default_p")]
    pub p_exp: f64,
    #[serde(default)]
    pub dynamics: ArcDynamics,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Guard on the `b`-rate denominator; zero only rejects an exact zero.
    #[serde(default = "default_eps")]
    pub singular_eps: f64,
}

impl ArcTask {
    pub fn new(
        horizon: f64,
        radius: f64,
        target: Target,
        init: SleighState,
        family: ControlFamily,
        guess: Vec<f64>,
    ) -> Self {
        Self {
            name: String::new(),
            horizon,
            radius,
            target,
            init,
            params: SleighParams::default(),
            family,
            guess,
            p_exp: default_p(),
            dynamics: ArcDynamics::default(),
            integrator: IntegratorConfig::default(),
            optimizer: OptimizerConfig::default(),
            singular_eps: DEFAULT_SINGULAR_EPS,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.integrator.validate()?;
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon T must be positive, got {}", self.horizon));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius r must be positive, got {}", self.radius));
        }
        if !(self.p_exp > 1.0 && self.p_exp.is_finite()) {
            return bad(format!("cost exponent must exceed 1, got {}", self.p_exp));
        }
        if !(self.singular_eps >= 0.0 && self.singular_eps.is_finite()) {
            return bad(format!(
                "singular guard must be non-negative, got {}",
                self.singular_eps
            ));
        }
        if !self.init.is_finite() {
            return bad("initial state must be finite".into());
        }
        if self.family == ControlFamily::General && self.init.b.is_none() {
            return bad("general control family needs an initial b".into());
        }
        match self.target {
            Target::Length(l) if !(l > 0.0 && l.is_finite()) => {
                return bad(format!("target length must be positive, got {l}"))
            }
            Target::Point(p) if !p.iter().all(|v| v.is_finite()) => {
                return bad("target point must be finite".into())
            }
            _ => {}
        }
        self.family.build(&self.guess).map(|_| ())
    }

    /// The conserved combination `p1 + r p2` at the initial state.
    pub fn momentum(&self) -> f64 {
        self.init.p1 + self.radius * self.init.p2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArcSolution {
    /// Initial state to forward rest, ascending time.
    pub forward: Trajectory,
    /// Initial state to backward rest, descending time.
    pub backward: Trajectory,
    /// Backward rest to forward rest, ascending time.
    pub combined: Trajectory,
    pub length: f64,
    pub cost: f64,
    pub opt_params: Vec<f64>,
    pub opt_error: f64,
    pub evaluations: usize,
}

impl ArcSolution {
    pub fn start_point(&self) -> Point {
        let s = self.combined.states.first().expect("non-empty arc");
        (s.x, s.y)
    }

    pub fn end_point(&self) -> Point {
        let s = self.combined.states.last().expect("non-empty arc");
        (s.x, s.y)
    }

    /// Largest `|xi2|` at the two ends of the combined arc.
    pub fn end_speed(&self) -> f64 {
        let a = self.combined.first_speed().unwrap_or(0.0).abs();
        let b = self.combined.last_speed().unwrap_or(0.0).abs();
        a.max(b)
    }

    pub fn circle_fit(&self) -> Result<CircleFit> {
        geometry::fit_circle(&self.combined.points())
    }
}

/// Right-hand side and pointwise diagnostics for one arc task.
struct ArcSystem<'a> {
    task: &'a ArcTask,
    control: Control,
}

impl ArcSystem<'_> {
    fn unpack(&self, y: &[f64; N]) -> SleighState {
        let mut s = SleighState::new(y[0], y[1], y[2], y[3], y[4]);
        if self.control.carries_b() {
            s.b = Some(y[5]);
        }
        s
    }

    fn sample(&self, t: f64, state: &SleighState) -> Result<ControlSample> {
        match self.control {
            Control::General(g) => {
                let (a, da) = g.eval_a(t);
                let db = bdot(
                    state,
                    a,
                    da,
                    self.task.radius,
                    &self.task.params,
                    self.task.singular_eps,
                )?;
                Ok(ControlSample::new(a, state.b.unwrap_or(0.0), da, db))
            }
            _ => self
                .control
                .sample(t, state, self.task.radius, &self.task.params),
        }
    }

    fn point(&self, t: f64, y: &[f64; N]) -> Result<(SleighState, ControlSample, Quasivelocities)> {
        let state = self.unpack(y);
        let ctrl = self.sample(t, &state)?;
        let mut q = quasivelocities(&state, &ctrl, &self.task.params);
        if matches!(self.control, Control::Circular(_)) {
            match self.task.dynamics {
                ArcDynamics::Constrained => q.xi1 = q.xi2 / self.task.radius,
                ArcDynamics::ConstrainedTurn => q.xi2 = q.xi1 * self.task.radius,
                ArcDynamics::Free => {}
            }
        }
        Ok((state, ctrl, q))
    }

    fn rhs(&self, t: f64, y: &[f64; N], dy: &mut [f64; N], dir: f64) -> Result<()> {
        let (state, ctrl, q) = self.point(t, y)?;
        let r = rates_from(&q, state.theta, &self.task.params);
        dy[0] = r.p1;
        dy[1] = r.p2;
        dy[2] = r.theta;
        dy[3] = r.x;
        dy[4] = r.y;
        dy[5] = if self.control.carries_b() {
            ctrl.db
        } else {
            0.0
        };
        dy[S] = dir * q.xi2.abs();
        Ok(())
    }

    fn speed(&self, t: f64, y: &[f64; N]) -> f64 {
        self.point(t, y).map(|(_, _, q)| q.xi2).unwrap_or(f64::NAN)
    }

    fn y0(&self) -> [f64; N] {
        let mut y = [0.0; N];
        y[..6].copy_from_slice(&self.task.init.to_array());
        y
    }

    fn solve(&self, dir: f64, cfg: &IntegratorConfig) -> Result<OdeSolution<N>> {
        self.solve_until(dir, self.task.horizon, cfg)
    }

    fn solve_until(
        &self,
        dir: f64,
        horizon: f64,
        cfg: &IntegratorConfig,
    ) -> Result<OdeSolution<N>> {
        let mut event = |t: f64, y: &[f64; N]| self.speed(t, y);
        integrate(
            |t, y: &[f64; N], dy: &mut [f64; N]| self.rhs(t, y, dy, dir),
            self.y0(),
            (0.0, dir * horizon),
            cfg,
            Some(&mut event),
        )
    }

    /// Horizon for the search: the task horizon, cut just short of the
    /// first zero of `a(t)` for the general family so the search never
    /// integrates into the singular point of the `b` equation.
    fn search_horizon(&self, dir: f64) -> f64 {
        let t_max = self.task.horizon;
        match self.control {
            Control::General(g) => match g.first_zero(0.0, dir) {
                Some(tz) => {
                    let margin = 1e-3 * (1.0 / g.omega.abs().max(1e-12)).min(1.0);
                    (tz.abs() - margin).min(t_max)
                }
                None => t_max,
            },
            _ => t_max,
        }
    }

    fn trajectory(&self, sol: &OdeSolution<N>) -> Result<Trajectory> {
        let mut traj = Trajectory::default();
        for (t, y) in sol.times.iter().zip(&sol.states) {
            let (state, ctrl, q) = self.point(*t, y)?;
            traj.times.push(*t);
            traj.states.push(state);
            traj.quasis.push(q);
            traj.controls.push(ctrl);
            traj.arclen.push(y[S].abs());
        }
        Ok(traj)
    }

    /// Where a half run ends for the search: at the rest event if there is
    /// one, else at the slowest point. Returns the end state and the speed
    /// left there.
    fn soft_end(&self, sol: &OdeSolution<N>) -> ([f64; N], f64) {
        if sol.event.is_some() {
            return (sol.y_end(), 0.0);
        }
        let speeds: Vec<f64> = sol
            .times
            .iter()
            .zip(&sol.states)
            .map(|(t, y)| self.speed(*t, y).abs())
            .collect();
        let Some(k) = (0..speeds.len()).min_by(|&a, &b| speeds[a].total_cmp(&speeds[b])) else {
            return (sol.y_end(), f64::INFINITY);
        };
        // golden-section refinement between the neighbouring samples
        let lo = sol.times[k.saturating_sub(1)];
        let hi = sol.times[(k + 1).min(sol.times.len() - 1)];
        let f = |t: f64| {
            sol.eval(t)
                .map(|y| self.speed(t, &y).abs())
                .unwrap_or(f64::INFINITY)
        };
        let (mut a, mut b) = (lo, hi);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..40 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
        }
        let t = 0.5 * (a + b);
        match sol.eval(t) {
            Some(y) if f(t) < speeds[k] => (y, f(t)),
            _ => (sol.states[k], speeds[k]),
        }
    }
}

fn half_name(dir: f64) -> &'static str {
    if dir > 0.0 {
        "forward"
    } else {
        "backward"
    }
}

/// Integrates both halves of the arc with the given control parameters.
pub fn simulate_arc(task: &ArcTask, control_params: &[f64]) -> Result<ArcSolution> {
    task.validate()?;
    let control = task.family.build(control_params)?;
    let sys = ArcSystem { task, control };

    let mut halves = Vec::with_capacity(2);
    for dir in [1.0, -1.0] {
        let sol = sys.solve(dir, &task.integrator)?;
        let traj = sys.trajectory(&sol)?;
        if traj.total_length() < MIN_HALF_LENGTH {
            return Err(Error::DegenerateArc(format!(
                "{} half has length {:e}",
                half_name(dir),
                traj.total_length()
            )));
        }
        if sol.event.is_none() {
            return Err(Error::NoTerminalRest {
                direction: half_name(dir),
                speed: traj.last_speed().unwrap_or(f64::NAN).abs(),
            });
        }
        halves.push(traj);
    }
    let backward = halves.pop().expect("two halves");
    let forward = halves.pop().expect("two halves");
    let combined = backward.reverse_normalize().concat(&forward);
    let length = forward.total_length() + backward.total_length();

    let mut sol = ArcSolution {
        forward,
        backward,
        combined,
        length,
        cost: 0.0,
        opt_params: control_params.to_vec(),
        opt_error: 0.0,
        evaluations: 0,
    };
    sol.cost = match task.target {
        Target::Length(l) => cost_length(&sol, l, task.p_exp),
        Target::Point([x, y]) => cost_point(&sol, x, y, task.p_exp),
    };
    sol.opt_error = sol.cost;
    Ok(sol)
}

/// `int |xi2| dt` along the trajectory.
pub fn arc_length(traj: &Trajectory) -> f64 {
    match (traj.arclen.first(), traj.arclen.last()) {
        (Some(a), Some(b)) => (b - a).abs(),
        _ => 0.0,
    }
}

pub fn cost_length(sol: &ArcSolution, target_length: f64, p: f64) -> f64 {
    (sol.length - target_length).abs().powf(p)
}

/// Squared distance from the forward rest point to the target, raised to `p`.
pub fn cost_point(sol: &ArcSolution, x: f64, y: f64, p: f64) -> f64 {
    let end = sol.forward.states.last().expect("non-empty forward half");
    ((end.x - x).powi(2) + (end.y - y).powi(2)).powf(p)
}

/// Search cost assigned to parameters whose arc does not come to rest.
/// Any arc that does come to rest scores below it.
pub const NO_REST_COST: f64 = 1e3;

/// Search objective. Arcs whose halves come to rest score their target
/// cost. Otherwise the score is [`NO_REST_COST`] plus the weighted speed
/// left at the slowest point of each unfinished half, which steers the
/// simplex towards parameters where the arc does stop.
pub fn search_cost(task: &ArcTask, control_params: &[f64]) -> f64 {
    let Ok(control) = task.family.build(control_params) else {
        return f64::INFINITY;
    };
    let sys = ArcSystem { task, control };
    let cfg = IntegratorConfig {
        interior_samples: 0,
        ..task.integrator
    };
    // both halves must come to rest even for point targets, whose cost
    // only looks at the forward end
    let mut length = 0.0;
    let mut leftover = 0.0;
    let mut fwd_end = [0.0; N];
    for dir in [1.0, -1.0] {
        let horizon = sys.search_horizon(dir);
        if horizon <= 0.0 {
            return 10.0 * NO_REST_COST;
        }
        let sol = match sys.solve_until(dir, horizon, &cfg) {
            Ok(s) => s,
            // solver failures rank below every arc that could be integrated
            Err(_) => return 10.0 * NO_REST_COST,
        };
        let (end, rest) = sys.soft_end(&sol);
        length += end[S].abs();
        leftover += rest;
        if dir > 0.0 {
            fwd_end = end;
        }
    }
    if leftover > 0.0 {
        return NO_REST_COST + task.optimizer.rest_weight * leftover;
    }
    match task.target {
        Target::Length(l) => (length - l).abs().powf(task.p_exp),
        Target::Point([x, y]) => {
            ((fwd_end[3] - x).powi(2) + (fwd_end[4] - y).powi(2)).powf(task.p_exp)
        }
    }
}

/// Searches the control parameters from `task.guess` and returns the arc
/// at the best parameters found, however large its cost.
pub fn search_arc(task: &ArcTask) -> Result<ArcSolution> {
    task.validate()?;
    let oc = task.optimizer;
    let nm = NelderMeadConfig {
        max_iter: oc.max_iter,
        max_evals: oc.max_evals,
        f_target: oc.cost_target,
        initial_step: oc.initial_step,
        zero_step: oc.initial_step,
        ..Default::default()
    };
    let mut evaluations = 0;
    let mut x = task.guess.clone();
    let mut fx = search_cost(task, &x);
    evaluations += 1;
    for round in 0..=oc.restarts {
        let cfg = NelderMeadConfig {
            initial_step: nm.initial_step / (1u32 << round.min(8)) as f64,
            ..nm
        };
        let m = nelder_mead(|p| search_cost(task, p), &x, &cfg);
        evaluations += m.evaluations;
        let improved = m.f < fx;
        if improved {
            x = m.x;
            fx = m.f;
        }
        log::debug!("arc '{}' round {round}: cost {fx:e} at {x:?}", task.name);
        if fx <= oc.cost_target || (!improved && round > 0) {
            break;
        }
    }

    let mut sol = simulate_arc(task, &x)?;
    sol.evaluations = evaluations;
    Ok(sol)
}

/// [`search_arc`], failing when the best cost exceeds the configured
/// threshold.
pub fn optimize_arc(task: &ArcTask) -> Result<ArcSolution> {
    let sol = search_arc(task)?;
    let oc = task.optimizer;
    if !(sol.cost <= oc.cost_threshold) {
        return Err(Error::OptimizationFailed {
            cost: sol.cost,
            threshold: oc.cost_threshold,
            iterations: sol.evaluations,
        });
    }
    Ok(sol)
}

impl ArcLengthCurve for Trajectory {
    fn length(&self) -> f64 {
        arc_length(self)
    }

    fn point_at(&self, s: f64) -> Point {
        let s0 = self.arclen.first().copied().unwrap_or(0.0);
        let s = (s0 + s).clamp(s0.min(self.total_length()), s0.max(self.total_length()));
        self.resample(&[s])
            .map(|v| v[0])
            .unwrap_or((f64::NAN, f64::NAN))
    }
}

/// `L^p` deviation of the traced trajectory from a target curve.
pub fn deviation_lp(traj: &Trajectory, target: &dyn ArcLengthCurve, p: f64) -> f64 {
    geometry::lp_deviation(traj, target, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn arc1() -> ArcTask {
        ArcTask::new(
            6.0,
            1.2,
            Target::Length(1.1 * 1.2 * PI),
            SleighState::new(2.0, 3.0, 0.0, 0.0, -1.2),
            ControlFamily::Circular,
            vec![1.0, 1.0],
        )
    }

    #[test]
    fn validation() {
        let mut t = arc1();
        assert!(t.validate().is_ok());
        t.radius = 0.0;
        assert!(t.validate().is_err());
        let mut t = arc1();
        t.p_exp = 1.0;
        assert!(t.validate().is_err());
        let mut t = arc1();
        t.family = ControlFamily::General;
        t.guess = vec![1.0; 4];
        assert!(t.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = arc1().named("arc1");
        let s = serde_json::to_string(&t).unwrap();
        let back: ArcTask = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let minimal: ArcTask = serde_json::from_str(
            r#"{"T": 6, "r": 1.2, "target": {"length": 4.1}, "family": "circular",
                "init": {"p1": 2, "p2": 3, "theta": 0, "x": 0, "y": -1.2}, "guess": [1, 1]}"#,
        )
        .unwrap();
        assert_eq!(minimal.p_exp, 2.0);
        assert_eq!(minimal.params, SleighParams::default());
    }

    #[test]
    fn cost_examples() {
        let mut sol = ArcSolution {
            forward: Trajectory::default(),
            backward: Trajectory::default(),
            combined: Trajectory::default(),
            length: 4.0,
            cost: 0.0,
            opt_params: vec![],
            opt_error: 0.0,
            evaluations: 0,
        };
        let ld = 1.1 * 1.2 * PI;
        assert_relative_eq!(cost_length(&sol, ld, 2.0), 0.02158, epsilon = 1e-5);
        assert_eq!(cost_length(&sol, 4.0, 2.0), 0.0);
        assert!(cost_length(&sol, 4.5, 2.0) > cost_length(&sol, 4.2, 2.0));
        sol.forward
            .states
            .push(SleighState::new(0.0, 0.0, 0.0, 1.0, 0.0));
        assert_relative_eq!(cost_point(&sol, 0.0, 0.0, 1.5), 1.0);
        assert_eq!(cost_point(&sol, 1.0, 0.0, 2.0), 0.0);
    }

    #[test]
    fn arc_length_of_sampled_circle() {
        let mut t = Trajectory::default();
        let r = 1.2;
        for i in 0..=400 {
            let th = 2.0 * PI * i as f64 / 400.0;
            t.times.push(th);
            t.states
                .push(SleighState::new(0.0, 0.0, th, r * th.sin(), -r * th.cos()));
            t.quasis.push(Quasivelocities::default());
            t.controls.push(ControlSample::default());
            t.arclen.push(r * th);
        }
        assert_relative_eq!(arc_length(&t), 2.4 * PI, epsilon = 1e-12);
        let dtheta = t.states.last().unwrap().theta - t.states[0].theta;
        assert!((arc_length(&t) - r * dtheta.abs()).abs() < 1e-6);
        assert_eq!(arc_length(&Trajectory::default()), 0.0);
    }

    #[test]
    fn constrained_arc_is_circle_with_conserved_momentum() {
        let task = arc1();
        // any parameters will do for the geometry; the search is tested elsewhere
        let sys = ArcSystem {
            task: &task,
            control: task.family.build(&[0.8, 3.3]).unwrap(),
        };
        let sol = sys.solve(1.0, &task.integrator).unwrap();
        let traj = sys.trajectory(&sol).unwrap();
        let p0 = task.momentum();
        for s in &traj.states {
            let d = (s.x * s.x + s.y * s.y).sqrt();
            assert!((d - 1.2).abs() < 1e-8, "radius {d}");
            assert!((s.p1 + 1.2 * s.p2 - p0).abs() < 1e-9 * (1.0 + p0.abs()));
        }
        // arc length and turning agree: ds = r dtheta
        let dth = traj.states.last().unwrap().theta - traj.states[0].theta;
        assert!((traj.total_length() - 1.2 * dth.abs()).abs() < 1e-7);
    }

    #[test]
    fn zero_speed_start_is_degenerate() {
        // circular control with A = 0 and p2 = 0: the sleigh never moves
        let mut task = arc1();
        task.init = SleighState::new(0.0, 0.0, 0.0, 0.0, -1.2);
        let err = simulate_arc(&task, &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateArc(_)), "{err:?}");
    }
}
