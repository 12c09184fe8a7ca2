//! Adaptive Dormand–Prince 5(4) integration with dense output and terminal
//! events, plus the sampled sleigh trajectory type.
//!
//! Integration runs in either time direction: a span `(t0, t1)` with
//! `t1 < t0` is integrated with negative steps. Events are scalar functions
//! of `(t, y)`; integration stops at the first sign change, located by
//! bracketing on the continuous extension of the accepted step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ControlSample, Quasivelocities, SleighState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on |h|.
    pub max_step: f64,
    /// Bound on |event| at the reported event time.
    pub event_tol: f64,
    /// Extra dense-output samples stored inside every accepted step.
    pub interior_samples: usize,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step: 0.05,
            event_tol: 1e-8,
            interior_samples: 1,
            max_steps: 200_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.rel_tol, self.abs_tol, self.max_step, self.event_tol]
            .iter()
            .all(|v| *v > 0.0 && !v.is_nan());
        if ok && self.max_steps > 0 {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "integrator tolerances must be positive: {self:?}"
            )))
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous extension of one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let mut out = [0.0; N];
        for i in 0..N {
            let r = &self.r;
            out[i] = r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i])));
        }
        out
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.h > 0.0 {
            (self.t0, self.t1())
        } else {
            (self.t1(), self.t0)
        };
        t >= lo && t <= hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHit {
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct OdeSolution<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub steps: Vec<DenseStep<N>>,
    pub event: Option<EventHit>,
    pub rejected: usize,
}

impl<const N: usize> OdeSolution<N> {
    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("solution has at least one sample")
    }

    pub fn y_end(&self) -> [f64; N] {
        *self
            .states
            .last()
            .expect("solution has at least one sample")
    }

    /// Dense evaluation anywhere inside the integrated span.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        if self.steps.is_empty() {
            return (t == self.times[0]).then_some(self.states[0]);
        }
        let fwd = self.steps[0].h > 0.0;
        // steps are ordered along the integration direction
        let idx = self
            .steps
            .partition_point(|s| if fwd { s.t1() < t } else { s.t1() > t });
        let step = self.steps.get(idx)?;
        step.contains(t).then(|| step.eval(t))
    }
}

pub type EventFn<'a, const N: usize> = &'a mut dyn FnMut(f64, &[f64; N]) -> f64;

fn error_norm<const N: usize>(
    err: &[f64; N],
    y0: &[f64; N],
    y1: &[f64; N],
    cfg: &IntegratorConfig,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs().max(y1[i].abs());
        let e = err[i] / sc;
        acc += e * e;
    }
    (acc / N as f64).sqrt()
}

fn all_finite<const N: usize>(v: &[f64; N]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// Integrates `y' = rhs(t, y)` over `t_span`, optionally stopping at the
/// first zero crossing of `event`.
///
/// When `|event(t0)| <= event_tol` the first accepted step is a grace
/// interval during which crossings are ignored, so trajectories may start on
/// the event surface.
pub fn integrate<const N: usize, F>(
    mut rhs: F,
    y0: [f64; N],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
    mut event: Option<EventFn<'_, N>>,
) -> Result<OdeSolution<N>>
where
    F: FnMut(f64, &[f64; N], &mut [f64; N]) -> Result<()>,
{
    cfg.validate()?;
    let (t0, t_end) = t_span;
    if t0 == t_end || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidInput(format!(
            "degenerate time span ({t0}, {t_end})"
        )));
    }
    if !all_finite(&y0) {
        return Err(Error::NonFiniteState { t: t0 });
    }
    let dir = (t_end - t0).signum();

    let mut k1 = [0.0; N];
    rhs(t0, &y0, &mut k1)?;
    if !all_finite(&k1) {
        return Err(Error::NonFiniteState { t: t0 });
    }

    let mut sol = OdeSolution {
        times: vec![t0],
        states: vec![y0],
        steps: Vec::new(),
        event: None,
        rejected: 0,
    };

    let mut g_prev = event.as_mut().map(|g| g(t0, &y0));
    let mut grace = matches!(g_prev, Some(v) if v.abs() <= cfg.event_tol);

    let mut h = dir * initial_step(&mut rhs, t0, &y0, &k1, dir, cfg)?.min((t_end - t0).abs());
    let mut t = t0;
    let mut y = y0;
    let mut accepted = 0usize;
    let mut last_rejected = false;

    let mut k2 = [0.0; N];
    let mut k3 = [0.0; N];
    let mut k4 = [0.0; N];
    let mut k5 = [0.0; N];
    let mut k6 = [0.0; N];
    let mut k7 = [0.0; N];

    loop {
        if accepted + sol.rejected >= cfg.max_steps {
            return Err(Error::TooManySteps {
                steps: cfg.max_steps,
                t_end,
            });
        }
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h.abs() < h_min {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        // do not overshoot the end of the span
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }

        let y2 = axpy(&y, h, &[(A21, &k1)]);
        rhs(t + C2 * h, &y2, &mut k2)?;
        let y3 = axpy(&y, h, &[(A31, &k1), (A32, &k2)]);
        rhs(t + C3 * h, &y3, &mut k3)?;
        let y4 = axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        rhs(t + C4 * h, &y4, &mut k4)?;
        let y5 = axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        rhs(t + C5 * h, &y5, &mut k5)?;
        let y6 = axpy(
            &y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        rhs(t + h, &y6, &mut k6)?;
        let y_new = axpy(
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        rhs(t + h, &y_new, &mut k7)?;

        let mut err = [0.0; N];
        for i in 0..N {
            err[i] =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let finite = all_finite(&y_new) && all_finite(&k7) && all_finite(&err);
        let en = if finite {
            error_norm(&err, &y, &y_new, cfg)
        } else {
            f64::INFINITY
        };

        if en > 1.0 {
            sol.rejected += 1;
            last_rejected = true;
            let fac = if en.is_finite() {
                (0.9 * en.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            let h_next = h * fac;
            if !finite && h_next.abs() < h_min {
                return Err(Error::NonFiniteState { t });
            }
            h = h_next;
            continue;
        }

        // accepted
        let mut r = [[0.0; N]; 5];
        for i in 0..N {
            let dy = y_new[i] - y[i];
            let bspl = h * k1[i] - dy;
            r[0][i] = y[i];
            r[1][i] = dy;
            r[2][i] = bspl;
            r[3][i] = dy - h * k7[i] - bspl;
            r[4][i] =
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let step = DenseStep { t0: t, h, r };
        let t_new = t + h;
        accepted += 1;

        if let Some(g) = event.as_mut() {
            if let Some(hit) = scan_step(&step, g, g_prev.unwrap_or(f64::NAN), grace, cfg) {
                let y_hit = step.eval(hit.t);
                let interior = cfg.interior_samples;
                push_interior(&mut sol, &step, interior, Some(hit.t));
                sol.steps.push(step);
                sol.times.push(hit.t);
                sol.states.push(y_hit);
                sol.event = Some(hit);
                return Ok(sol);
            }
            g_prev = Some(g(t_new, &y_new));
            grace = false;
        }

        push_interior(&mut sol, &step, cfg.interior_samples, None);
        sol.steps.push(step);
        sol.times.push(t_new);
        sol.states.push(y_new);

        if (t_new - t_end) * dir >= 0.0 {
            return Ok(sol);
        }

        t = t_new;
        y = y_new;
        k1 = k7;

        let fac = if en == 0.0 {
            5.0
        } else {
            (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
        };
        let fac = if last_rejected { fac.min(1.0) } else { fac };
        last_rejected = false;
        h = dir * (h.abs() * fac).min(cfg.max_step);
    }
}

fn push_interior<const N: usize>(
    sol: &mut OdeSolution<N>,
    step: &DenseStep<N>,
    n: usize,
    stop: Option<f64>,
) {
    let t_last = stop.unwrap_or_else(|| step.t1());
    let span = t_last - step.t0;
    for j in 1..=n {
        let t = step.t0 + span * j as f64 / (n + 1) as f64;
        sol.times.push(t);
        sol.states.push(step.eval(t));
    }
}

/// Looks for the first zero crossing of `g` inside `step`. The interior is
/// probed at a few dense-output points so a pair of crossings within one
/// step is not missed.
fn scan_step<const N: usize>(
    step: &DenseStep<N>,
    g: &mut dyn FnMut(f64, &[f64; N]) -> f64,
    g_start: f64,
    grace: bool,
    cfg: &IntegratorConfig,
) -> Option<EventHit> {
    if grace {
        return None;
    }
    const PROBES: usize = 4;
    let mut ta = step.t0;
    let mut ga = g_start;
    for j in 1..=PROBES {
        let tb = step.t0 + step.h * j as f64 / PROBES as f64;
        let gb = g(tb, &step.eval(tb));
        if ga.is_finite() && gb.is_finite() && (ga * gb <= 0.0) && ga != 0.0 {
            return Some(refine_root(step, g, (ta, ga), (tb, gb), cfg.event_tol));
        }
        ta = tb;
        ga = gb;
    }
    None
}

/// Illinois-modified regula falsi on the dense output.
fn refine_root<const N: usize>(
    step: &DenseStep<N>,
    g: &mut dyn FnMut(f64, &[f64; N]) -> f64,
    (mut ta, mut ga): (f64, f64),
    (mut tb, mut gb): (f64, f64),
    tol: f64,
) -> EventHit {
    if gb == 0.0 {
        return EventHit { t: tb, value: 0.0 };
    }
    let mut side = 0i8;
    let mut best = if ga.abs() < gb.abs() {
        (ta, ga)
    } else {
        (tb, gb)
    };
    for _ in 0..200 {
        let tc = (ta * gb - tb * ga) / (gb - ga);
        let tc = if tc.is_finite() && (tc - ta) * (tc - tb) <= 0.0 {
            tc
        } else {
            0.5 * (ta + tb)
        };
        let gc = g(tc, &step.eval(tc));
        if gc.abs() < best.1.abs() {
            best = (tc, gc);
        }
        let width = (tb - ta).abs();
        if gc.abs() <= 0.1 * tol || width <= 4.0 * f64::EPSILON * tc.abs().max(1.0) {
            break;
        }
        if gc * gb < 0.0 {
            ta = tb;
            ga = gb;
            tb = tc;
            gb = gc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            tb = tc;
            gb = gc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    EventHit {
        t: best.0,
        value: best.1,
    }
}

fn initial_step<const N: usize, F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    cfg: &IntegratorConfig,
) -> Result<f64>
where
    F: FnMut(f64, &[f64; N], &mut [f64; N]) -> Result<()>,
{
    let scale = |i: usize| cfg.abs_tol + cfg.rel_tol * y0[i].abs();
    let norm = |v: &[f64; N]| -> f64 {
        ((0..N).map(|i| (v[i] / scale(i)).powi(2)).sum::<f64>() / N as f64).sqrt()
    };
    let d0 = norm(y0);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(cfg.max_step);
    let y1 = axpy(y0, dir * h0, &[(1.0, f0)]);
    let mut f1 = [0.0; N];
    rhs(t0 + dir * h0, &y1, &mut f1)?;
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    let h = (100.0 * h0).min(h1).min(cfg.max_step);
    Ok(if h.is_finite() && h > 0.0 { h } else { 1e-6 })
}

/// Time-ordered samples of a sleigh solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SleighState>,
    pub quasis: Vec<Quasivelocities>,
    pub controls: Vec<ControlSample>,
    /// Cumulative arc length from the first sample.
    pub arclen: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.arclen.last().copied().unwrap_or(0.0)
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.states.iter().map(|s| (s.x, s.y)).collect()
    }

    pub fn first_speed(&self) -> Option<f64> {
        self.quasis.first().map(|q| q.xi2)
    }

    pub fn last_speed(&self) -> Option<f64> {
        self.quasis.last().map(|q| q.xi2)
    }

    /// Whether time decreases along the samples.
    pub fn is_backward(&self) -> bool {
        self.times.len() >= 2 && self.times[self.times.len() - 1] < self.times[0]
    }

    /// Positions at the requested arc lengths, interpolating linearly in
    /// the cumulative arc length.
    pub fn resample(&self, s_values: &[f64]) -> Result<Vec<(f64, f64)>> {
        if self.is_empty() {
            return Err(Error::InvalidInput(
                "cannot resample an empty trajectory".into(),
            ));
        }
        let total = self.total_length();
        let slack = 1e-12 * total.max(1.0);
        s_values
            .iter()
            .map(|&s| {
                if !(s >= -slack && s <= total + slack) {
                    return Err(Error::OutOfRange {
                        value: s,
                        lo: 0.0,
                        hi: total,
                    });
                }
                let s = s.clamp(0.0, total);
                let j = self.arclen.partition_point(|&v| v < s);
                if j == 0 {
                    let st = &self.states[0];
                    return Ok((st.x, st.y));
                }
                if j >= self.len() {
                    let st = self.states.last().unwrap();
                    return Ok((st.x, st.y));
                }
                let (s0, s1) = (self.arclen[j - 1], self.arclen[j]);
                let w = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
                let (a, b) = (&self.states[j - 1], &self.states[j]);
                Ok((a.x + w * (b.x - a.x), a.y + w * (b.y - a.y)))
            })
            .collect()
    }

    /// Orders samples by ascending time and restarts the arc length at the
    /// new first sample. Already-ascending trajectories are returned as is.
    pub fn reverse_normalize(&self) -> Trajectory {
        if !self.is_backward() {
            return self.clone();
        }
        let total = self.total_length();
        Trajectory {
            times: self.times.iter().rev().copied().collect(),
            states: self.states.iter().rev().copied().collect(),
            quasis: self.quasis.iter().rev().copied().collect(),
            controls: self.controls.iter().rev().copied().collect(),
            arclen: self.arclen.iter().rev().map(|s| total - s).collect(),
        }
    }

    /// Appends `other`, dropping its first sample when it coincides with
    /// our last one, and offsets its arc length.
    pub fn concat(&self, other: &Trajectory) -> Trajectory {
        let mut out = self.clone();
        let offset = self.total_length();
        let skip = match (self.states.last(), other.states.first()) {
            (Some(a), Some(b)) => {
                usize::from(a.x == b.x && a.y == b.y && self.times.last() == other.times.first())
            }
            _ => 0,
        };
        out.times.extend(other.times.iter().skip(skip));
        out.states.extend(other.states.iter().skip(skip));
        out.quasis.extend(other.quasis.iter().skip(skip));
        out.controls.extend(other.controls.iter().skip(skip));
        out.arclen
            .extend(other.arclen.iter().skip(skip).map(|s| s + offset));
        out
    }
}
