//! Assembly of optimized arcs into complete figures.
//!
//! Arcs start and end at rest, so consecutive arcs may meet with any turn
//! of the blade. Placement is therefore a matter of rigid motions: each arc
//! is rotated to the chosen heading and translated onto the previous end
//! point. Repeated units are laid out by rotating copies about the unique
//! point that maps a unit's start onto its end, which closes a ring of `n`
//! copies exactly.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::arcopt::{search_arc, ArcSolution, ArcTask};
use crate::error::{Error, Result};
use crate::geometry::{dist, polyline_hausdorff, rotate_about, wrap_angle, Point};
use crate::model::{control_mass_position, mass_energy, skate_energy, SleighParams};
use crate::ode::Trajectory;

/// Rotation about the origin followed by a translation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: f64,
    pub translation: (f64, f64),
}

impl RigidTransform {
    pub fn new(rotation: f64, translation: (f64, f64)) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    /// Rotation by `angle` about `center`.
    pub fn about(center: Point, angle: f64) -> Self {
        let moved = rotate_about(center, (0.0, 0.0), angle);
        Self::new(angle, (center.0 - moved.0, center.1 - moved.1))
    }

    pub fn apply(&self, p: Point) -> Point {
        let (s, c) = self.rotation.sin_cos();
        (
            c * p.0 - s * p.1 + self.translation.0,
            s * p.0 + c * p.1 + self.translation.1,
        )
    }

    /// `self` applied after `first`.
    pub fn after(&self, first: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation + first.rotation,
            self.apply(first.translation),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.is_finite()
            && self.translation.0.is_finite()
            && self.translation.1.is_finite()
    }
}

/// Moves a trajectory rigidly. Positions and headings change; momenta,
/// quasivelocities and body-frame controls do not.
pub fn transform(traj: &Trajectory, g: &RigidTransform) -> Trajectory {
    let mut out = traj.clone();
    for s in &mut out.states {
        let (x, y) = g.apply((s.x, s.y));
        s.x = x;
        s.y = y;
        s.theta += g.rotation;
    }
    out
}

/// Transform placing `traj` so that it starts at `at` with heading `heading`.
fn placement(traj: &Trajectory, at: Point, heading: f64) -> Result<RigidTransform> {
    let s0 = traj
        .states
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot place an empty trajectory".into()))?;
    let rotation = heading - s0.theta;
    let rotated = RigidTransform::new(rotation, (0.0, 0.0)).apply((s0.x, s0.y));
    Ok(RigidTransform::new(
        rotation,
        (at.0 - rotated.0, at.1 - rotated.1),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub name: String,
    pub traj: Trajectory,
}

/// Junction between consecutive pieces of a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Join {
    /// Index of the piece that ends here.
    pub index: usize,
    pub gap: f64,
    /// Change of blade heading across the join, in `(-pi, pi]`.
    pub turn: f64,
    /// Larger of the two blade speeds meeting here.
    pub speed: f64,
}

/// A chain of pieces joined end to start.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternCurve {
    pub name: String,
    pub pieces: Vec<Piece>,
    pub joins: Vec<Join>,
    pub closed: bool,
}

impl PatternCurve {
    pub fn points(&self) -> Vec<Point> {
        let mut pts: Vec<Point> = Vec::new();
        for p in &self.pieces {
            pts.extend(p.traj.points());
        }
        pts
    }

    pub fn length(&self) -> f64 {
        self.pieces.iter().map(|p| p.traj.total_length()).sum()
    }

    pub fn max_gap(&self) -> f64 {
        self.joins.iter().map(|j| j.gap).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub curves: Vec<PatternCurve>,
    pub center: Point,
    pub join_tol: f64,
    /// Fold count of the rotational symmetry, 1 for none.
    pub repeat: usize,
    /// Hausdorff distance between the figure and its copy rotated by
    /// `2 pi / repeat` about `center` (0 when `repeat == 1`).
    pub symmetry_residual: f64,
}

impl Pattern {
    pub fn curve(&self, name: &str) -> Option<&PatternCurve> {
        self.curves.iter().find(|c| c.name == name)
    }

    pub fn pieces(&self) -> impl Iterator<Item = (&PatternCurve, &Piece)> {
        self.curves
            .iter()
            .flat_map(|c| c.pieces.iter().map(move |p| (c, p)))
    }

    pub fn max_join_gap(&self) -> f64 {
        self.curves
            .iter()
            .map(PatternCurve::max_gap)
            .fold(0.0, f64::max)
    }
}

/// Checks that consecutive pieces meet at rest and records the turn at each
/// junction. With `closed`, the last piece must also meet the first.
pub fn join(
    name: &str,
    pieces: Vec<Piece>,
    join_tol: f64,
    speed_tol: f64,
    closed: bool,
) -> Result<PatternCurve> {
    if !(join_tol > 0.0) || !(speed_tol > 0.0) {
        return Err(Error::InvalidInput(
            "join tolerances must be positive".into(),
        ));
    }
    if let Some(p) = pieces.iter().find(|p| p.traj.is_empty()) {
        return Err(Error::InvalidInput(format!("piece '{}' is empty", p.name)));
    }
    let n = pieces.len();
    let count = if closed { n } else { n.saturating_sub(1) };
    let mut joins = Vec::with_capacity(count);
    for i in 0..count {
        let (a, b) = (&pieces[i].traj, &pieces[(i + 1) % n].traj);
        let (ea, sb) = (a.states.last().unwrap(), b.states.first().unwrap());
        let gap = dist((ea.x, ea.y), (sb.x, sb.y));
        if !(gap <= join_tol) {
            return Err(Error::JoinGap {
                index: i,
                gap,
                tol: join_tol,
            });
        }
        let speed = a
            .last_speed()
            .unwrap_or(0.0)
            .abs()
            .max(b.first_speed().unwrap_or(0.0).abs());
        if !(speed <= speed_tol) {
            return Err(Error::NonzeroJoinSpeed {
                index: i,
                speed,
                tol: speed_tol,
            });
        }
        joins.push(Join {
            index: i,
            gap,
            turn: wrap_angle(sb.theta - ea.theta),
            speed,
        });
    }
    Ok(PatternCurve {
        name: name.to_string(),
        pieces,
        joins,
        closed,
    })
}

/// Chains `unit` end to start, turning by `turn` at each internal junction.
fn chain(unit: &[(&str, &Trajectory)], turn: f64) -> Result<Vec<Piece>> {
    let mut out: Vec<Piece> = Vec::with_capacity(unit.len());
    for &(name, traj) in unit {
        let g = match out.last() {
            None => RigidTransform::identity(),
            Some(prev) => {
                let end = prev.traj.states.last().expect("non-empty piece");
                placement(traj, (end.x, end.y), end.theta + turn)?
            }
        };
        out.push(Piece {
            name: name.to_string(),
            traj: transform(traj, &g),
        });
    }
    Ok(out)
}

fn centroid(pts: &[Point]) -> Point {
    let n = pts.len().max(1) as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    (sx / n, sy / n)
}

/// Centre and signed angle of the rotation by `2 pi / n` taking `start` to
/// `end`, choosing the side opposite to `bulge` so copies point outwards.
fn ring_rotation(start: Point, end: Point, bulge: Point, n: usize) -> Result<(Point, f64)> {
    let chord = dist(start, end);
    if !(chord > 0.0) {
        return Err(Error::DegenerateArc(
            "unit starts and ends at the same point".into(),
        ));
    }
    let phi = TAU / n as f64;
    let (dx, dy) = ((end.0 - start.0) / chord, (end.1 - start.1) / chord);
    let left = (-dy, dx);
    let mid = (0.5 * (start.0 + end.0), 0.5 * (start.1 + end.1));
    let side = (bulge.0 - mid.0) * left.0 + (bulge.1 - mid.1) * left.1;
    // a positive rotation moves points anticlockwise, so its centre lies to
    // the left of start -> end
    let sign = if side > 0.0 { -1.0 } else { 1.0 };
    let offset = 0.5 * chord / (0.5 * phi).tan();
    let center = (
        mid.0 + sign * offset * left.0,
        mid.1 + sign * offset * left.1,
    );
    Ok((center, sign * phi))
}

/// `n` copies of `unit` rotated about its ring centre, relocated so the ring
/// is centred on `center` and the first copy starts in direction `phase`.
fn ring(
    name: &str,
    unit: &[(&str, &Trajectory)],
    turn: f64,
    n: usize,
    placement_hint: Option<(Point, f64)>,
) -> Result<(Vec<Piece>, Point)> {
    let base = chain(unit, turn)?;
    if n == 1 {
        let pts: Vec<Point> = base.iter().flat_map(|p| p.traj.points()).collect();
        return Ok((base, centroid(&pts)));
    }
    let start = {
        let s = base[0].traj.states[0];
        (s.x, s.y)
    };
    let end = {
        let s = base.last().unwrap().traj.states.last().unwrap();
        (s.x, s.y)
    };
    let pts: Vec<Point> = base.iter().flat_map(|p| p.traj.points()).collect();
    let (c, step) = ring_rotation(start, end, centroid(&pts), n)?;

    // move the ring to the requested centre and phase
    let shift = match placement_hint {
        None => RigidTransform::identity(),
        Some((target, phase)) => {
            let current = (start.1 - c.1).atan2(start.0 - c.0);
            let spin = RigidTransform::about(c, phase - current);
            RigidTransform::new(0.0, (target.0 - c.0, target.1 - c.1)).after(&spin)
        }
    };
    let center = shift.apply(c);
    let mut pieces = Vec::with_capacity(n * base.len());
    for k in 0..n {
        let g = RigidTransform::about(c, step * k as f64);
        let g = shift.after(&g);
        for p in &base {
            pieces.push(Piece {
                name: format!("{name}{}:{}", k + 1, p.name),
                traj: transform(&p.traj, &g),
            });
        }
    }
    Ok((pieces, center))
}

/// Arc tasks and layout of a double-flower figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowerSpec {
    pub arc1: ArcTask,
    pub arc2: ArcTask,
    pub arc3: ArcTask,
    #[serde(default)]
    pub layout: FlowerConfig,
}

impl FlowerSpec {
    /// Searches the three arcs concurrently.
    pub fn solve_arcs(&self) -> Result<[ArcSolution; 3]> {
        let tasks = [&self.arc1, &self.arc2, &self.arc3];
        let mut sols: Vec<ArcSolution> = tasks
            .par_iter()
            .map(|t| search_arc(t))
            .collect::<Result<_>>()?;
        let c = sols.pop().expect("three arcs");
        let b = sols.pop().expect("three arcs");
        let a = sols.pop().expect("three arcs");
        Ok([a, b, c])
    }
}

/// Layout parameters of the double flower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowerConfig {
    pub repeat: usize,
    /// Absolute join tolerance; `None` uses `join_tol_rel` times the
    /// figure diameter.
    pub join_tol: Option<f64>,
    pub join_tol_rel: f64,
    /// Blade turn at the cusps inside a leaf.
    pub cusp_turn: f64,
    /// Largest blade speed allowed at a join.
    pub speed_tol: f64,
}

impl Default for FlowerConfig {
    fn default() -> Self {
        Self {
            repeat: 8,
            join_tol: None,
            join_tol_rel: 1e-3,
            cusp_turn: PI,
            speed_tol: 1e-8,
        }
    }
}

fn diameter(pts: &[Point]) -> f64 {
    let (mut lo, mut hi) = (
        (f64::INFINITY, f64::INFINITY),
        (f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for p in pts {
        lo = (lo.0.min(p.0), lo.1.min(p.1));
        hi = (hi.0.max(p.0), hi.1.max(p.1));
    }
    if pts.is_empty() {
        0.0
    } else {
        dist(lo, hi)
    }
}

/// The double flower: an inner ring of `arc1` copies and an outer ring of
/// leaves, each leaf being `arc3`, `arc2`, `arc3` joined at cusps.
pub fn double_flower(
    arc1: &ArcSolution,
    arc2: &ArcSolution,
    arc3: &ArcSolution,
    cfg: &FlowerConfig,
) -> Result<Pattern> {
    let n = cfg.repeat;
    if n == 0 {
        return Err(Error::InvalidInput(
            "flower needs at least one repeat".into(),
        ));
    }
    let (inner, center) = ring("petal", &[("arc1", &arc1.combined)], cfg.cusp_turn, n, None)?;
    let phase = {
        let s = inner[0].traj.states[0];
        (s.y - center.1).atan2(s.x - center.0)
    };
    let leaf = [
        ("arc3", &arc3.combined),
        ("arc2", &arc2.combined),
        ("arc3", &arc3.combined),
    ];
    let (outer, _) = ring("leaf", &leaf, cfg.cusp_turn, n, Some((center, phase)))?;

    let all: Vec<Point> = inner
        .iter()
        .chain(&outer)
        .flat_map(|p| p.traj.points())
        .collect();
    let join_tol = cfg.join_tol.unwrap_or(cfg.join_tol_rel * diameter(&all));
    let closed = n > 1;
    let inner = join("inner", inner, join_tol, cfg.speed_tol, closed)?;
    let outer = join("outer", outer, join_tol, cfg.speed_tol, closed)?;

    let mut pattern = Pattern {
        curves: vec![inner, outer],
        center,
        join_tol,
        repeat: n,
        symmetry_residual: 0.0,
    };
    pattern.symmetry_residual = symmetry_residual(&pattern, n);
    Ok(pattern)
}

/// Largest Hausdorff distance between each curve and its rotation by
/// `2 pi / n` about the centre of its join points.
pub fn symmetry_residual(pattern: &Pattern, n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    pattern
        .curves
        .iter()
        .map(|c| {
            let joints: Vec<Point> = c
                .pieces
                .iter()
                .filter_map(|p| p.traj.states.first().map(|s| (s.x, s.y)))
                .collect();
            let center = centroid(&joints);
            let pts = c.points();
            let rotated: Vec<Point> = pts
                .iter()
                .map(|&p| rotate_about(p, center, TAU / n as f64))
                .collect();
            polyline_hausdorff(&pts, &rotated)
        })
        .fold(0.0, f64::max)
}

/// Path of the control mass in the plane, `(x, y) + R(theta) (a, b)`.
pub fn control_mass_path(traj: &Trajectory) -> Vec<Point> {
    traj.states
        .iter()
        .zip(&traj.controls)
        .map(|(s, c)| control_mass_position(s, c))
        .collect()
}

pub const DEFAULT_SPIKE_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyProfile {
    pub times: Vec<f64>,
    pub skate: Vec<f64>,
    pub mass: Vec<f64>,
    pub max_mass_energy: f64,
    pub median_mass_energy: f64,
    pub spike_factor: f64,
    /// Set when the control-mass energy exceeds `spike_factor` times its
    /// median somewhere on the arc.
    pub spike: bool,
}

pub fn energy_profile(sol: &ArcSolution, r: f64, params: &SleighParams) -> EnergyProfile {
    trajectory_energy(&sol.combined, r, params, DEFAULT_SPIKE_FACTOR)
}

pub fn trajectory_energy(
    traj: &Trajectory,
    r: f64,
    params: &SleighParams,
    spike_factor: f64,
) -> EnergyProfile {
    let skate: Vec<f64> = traj
        .quasis
        .iter()
        .map(|q| skate_energy(q.xi2, r, params))
        .collect();
    let mass: Vec<f64> = traj
        .quasis
        .iter()
        .zip(&traj.controls)
        .map(|(q, c)| mass_energy(q, c, params))
        .collect();
    let max_mass_energy = mass.iter().copied().fold(0.0, f64::max);
    let median_mass_energy = median(&mass);
    let spike = max_mass_energy > spike_factor * median_mass_energy;
    EnergyProfile {
        times: traj.times.clone(),
        skate,
        mass,
        max_mass_energy,
        median_mass_energy,
        spike_factor,
        spike,
    }
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len() / 2;
    if s.len() % 2 == 1 {
        s[k]
    } else {
        0.5 * (s[k - 1] + s[k])
    }
}
