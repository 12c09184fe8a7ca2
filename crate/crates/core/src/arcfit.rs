//! Approximation of sampled planar curves by circular arcs.
//!
//! A target curve is cut at its cusps into smooth segments; each segment is
//! covered by biarcs, pairs of tangent-continuous circular arcs matching the
//! positions and tangents at both ends of a piece. The pieces are bisected
//! until every biarc lies within the requested distance of the samples, so
//! the result is a G1 arc spline with a checked error bound.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, ArcLengthCurve, Point};

/// Radius used to represent straight pieces.
pub const R_MAX: f64 = 1e6;
pub const DEFAULT_MAX_DEPTH: usize = 20;
/// Chord turning angle above which a sample is treated as a cusp.
pub const DEFAULT_CUSP_ANGLE: f64 = PI / 6.0;

/// Ordered samples with cumulative chord length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCurve {
    pub points: Vec<Point>,
    /// Chord-length parameter, `s[0] = 0`.
    pub s: Vec<f64>,
    /// Sample indices where the curve may turn abruptly.
    #[serde(default)]
    pub cusp_indices: Vec<usize>,
    #[serde(default)]
    pub closed: bool,
}

/// Attaches the cumulative chord length to `points`, dropping consecutive
/// repeats.
pub fn arclength_parametrize(points: &[Point]) -> Result<TargetCurve> {
    if points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(Error::InvalidInput("curve samples must be finite".into()));
    }
    let mut pts: Vec<Point> = Vec::with_capacity(points.len());
    for &p in points {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    if pts.len() < 2 {
        return Err(Error::DuplicatePoints);
    }
    let mut s = Vec::with_capacity(pts.len());
    s.push(0.0);
    for w in pts.windows(2) {
        s.push(s.last().unwrap() + dist(w[0], w[1]));
    }
    Ok(TargetCurve {
        points: pts,
        s,
        cusp_indices: vec![],
        closed: false,
    })
}

impl TargetCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.s.last().copied().unwrap_or(0.0)
    }

    pub fn with_cusps(mut self, mut cusps: Vec<usize>) -> Result<Self> {
        cusps.sort_unstable();
        if let Some(&c) = cusps.iter().find(|&&c| c >= self.len()) {
            return Err(Error::OutOfRange {
                value: c as f64,
                lo: 0.0,
                hi: (self.len() - 1) as f64,
            });
        }
        self.cusp_indices = cusps;
        Ok(self)
    }

    /// Interior samples where consecutive chords turn by more than `angle`.
    pub fn detect_cusps(&self, angle: f64) -> Vec<usize> {
        (1..self.len().saturating_sub(1))
            .filter(|&i| {
                let (a, b, c) = (self.points[i - 1], self.points[i], self.points[i + 1]);
                let (u, v) = ((b.0 - a.0, b.1 - a.1), (c.0 - b.0, c.1 - b.1));
                let turn = (u.0 * v.1 - u.1 * v.0).atan2(u.0 * v.0 + u.1 * v.1);
                turn.abs() > angle
            })
            .collect()
    }

    /// Points at uniformly spaced chord length, `n >= 2` of them.
    pub fn resample_uniform(&self, n: usize) -> Vec<Point> {
        let n = n.max(2);
        let total = self.total_length();
        (0..n)
            .map(|i| self.point_at(total * i as f64 / (n - 1) as f64))
            .collect()
    }

    /// Unit tangent at sample `i` from a three-point difference in `s`.
    pub fn tangent(&self, i: usize) -> Point {
        let n = self.len();
        let d = if n == 2 {
            let (a, b) = (self.points[0], self.points[1]);
            (b.0 - a.0, b.1 - a.1)
        } else {
            // quadratic through three neighbours, differentiated at sample i
            let j = i.clamp(1, n - 2);
            let (s0, s1, s2) = (self.s[j - 1], self.s[j], self.s[j + 1]);
            let (h1, h2) = (s1 - s0, s2 - s1);
            let x = self.s[i];
            let w0 = (2.0 * x - s1 - s2) / (h1 * (h1 + h2));
            let w1 = -(2.0 * x - s0 - s2) / (h1 * h2);
            let w2 = (2.0 * x - s0 - s1) / (h2 * (h1 + h2));
            let (p0, p1, p2) = (self.points[j - 1], self.points[j], self.points[j + 1]);
            (
                w0 * p0.0 + w1 * p1.0 + w2 * p2.0,
                w0 * p0.1 + w1 * p1.1 + w2 * p2.1,
            )
        };
        let norm = d.0.hypot(d.1);
        (d.0 / norm, d.1 / norm)
    }

    fn slice(&self, i0: usize, i1: usize) -> TargetCurve {
        let s0 = self.s[i0];
        TargetCurve {
            points: self.points[i0..=i1].to_vec(),
            s: self.s[i0..=i1].iter().map(|v| v - s0).collect(),
            cusp_indices: vec![],
            closed: false,
        }
    }
}

impl ArcLengthCurve for TargetCurve {
    fn length(&self) -> f64 {
        self.total_length()
    }

    fn point_at(&self, s: f64) -> Point {
        let s = s.clamp(0.0, self.total_length());
        let j = self.s.partition_point(|&v| v < s).clamp(1, self.len() - 1);
        let (s0, s1) = (self.s[j - 1], self.s[j]);
        let w = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        let (a, b) = (self.points[j - 1], self.points[j]);
        (a.0 + w * (b.0 - a.0), a.1 + w * (b.1 - a.1))
    }
}

/// Cuts the curve at its cusps. Neighbouring segments share the cusp
/// sample and each segment's parameter starts at 0. For closed curves the
/// segment through the end wraps around to the first cusp.
pub fn split_at_cusps(curve: &TargetCurve) -> Result<Vec<TargetCurve>> {
    let n = curve.len();
    if n < 2 {
        return Err(Error::DuplicatePoints);
    }
    let mut cuts: Vec<usize> = curve.cusp_indices.clone();
    cuts.sort_unstable();
    for w in cuts.windows(2) {
        if w[0] == w[1] {
            return Err(Error::EmptySegment(w[0], w[1]));
        }
    }
    if let Some(&c) = cuts.iter().find(|&&c| c >= n) {
        return Err(Error::OutOfRange {
            value: c as f64,
            lo: 0.0,
            hi: (n - 1) as f64,
        });
    }
    if curve.closed && !cuts.is_empty() {
        // walk from the first cusp round to itself
        let first = cuts[0];
        let mut order: Vec<Point> = curve.points[first..].to_vec();
        let wraps = curve.points.first() == curve.points.last();
        order.extend(&curve.points[usize::from(wraps)..=first]);
        let rolled = arclength_parametrize(&order)?;
        let shift = |c: usize| {
            if c >= first {
                c - first
            } else {
                c + n - first - usize::from(wraps)
            }
        };
        let mut inner: Vec<usize> = cuts.iter().map(|&c| shift(c)).collect();
        inner.retain(|&c| c != 0);
        let open = TargetCurve {
            cusp_indices: inner,
            closed: false,
            ..rolled
        };
        return split_at_cusps(&open);
    }
    cuts.retain(|&c| c != 0 && c != n - 1);
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(n - 1);
    Ok(bounds.windows(2).map(|w| curve.slice(w[0], w[1])).collect())
}

/// Circular arc with points `center + r (cos psi, sin psi)` for `psi`
/// running from `psi_start` to `psi_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularArcSpec {
    pub center: Point,
    pub r: f64,
    pub psi_start: f64,
    pub psi_end: f64,
    /// +1 anticlockwise, -1 clockwise.
    pub orientation: f64,
}

impl CircularArcSpec {
    /// Arc leaving `p` with unit tangent `t` and ending at `q`. Nearly
    /// straight chords become arcs of radius [`R_MAX`].
    pub fn from_tangent(p: Point, t: Point, q: Point) -> Result<CircularArcSpec> {
        let c = (q.0 - p.0, q.1 - p.1);
        let cc = c.0 * c.0 + c.1 * c.1;
        if !(cc > 0.0) {
            return Err(Error::InvalidInput(
                "arc end coincides with its start".into(),
            ));
        }
        let cross = t.0 * c.1 - t.1 * c.0;
        let dot = t.0 * c.0 + t.1 * c.1;
        let curvature = 2.0 * cross / cc;
        let orientation = if cross >= 0.0 { 1.0 } else { -1.0 };
        let (r, sweep) = if curvature.abs() * R_MAX <= 1.0 {
            (R_MAX, cc.sqrt() / R_MAX)
        } else {
            (1.0 / curvature.abs(), 2.0 * cross.abs().atan2(dot))
        };
        let normal = (-t.1 * orientation, t.0 * orientation);
        let center = (p.0 + r * normal.0, p.1 + r * normal.1);
        let psi_start = (p.1 - center.1).atan2(p.0 - center.0);
        Ok(CircularArcSpec {
            center,
            r,
            psi_start,
            psi_end: psi_start + orientation * sweep,
            orientation,
        })
    }

    pub fn sweep(&self) -> f64 {
        (self.psi_end - self.psi_start).abs()
    }

    pub fn arc_length(&self) -> f64 {
        self.r * self.sweep()
    }

    pub fn is_straight(&self) -> bool {
        self.r >= R_MAX
    }

    pub fn at_angle(&self, psi: f64) -> Point {
        (
            self.center.0 + self.r * psi.cos(),
            self.center.1 + self.r * psi.sin(),
        )
    }

    pub fn start(&self) -> Point {
        self.at_angle(self.psi_start)
    }

    pub fn end(&self) -> Point {
        self.at_angle(self.psi_end)
    }

    /// Direction of travel at normal angle `psi`, as an angle.
    pub fn heading(&self, psi: f64) -> f64 {
        psi + self.orientation * PI / 2.0
    }

    /// Distance from `p` to the arc.
    pub fn distance(&self, p: Point) -> f64 {
        let ang = (p.1 - self.center.1).atan2(p.0 - self.center.0);
        // angle travelled from the start to the direction of p
        let along = (self.orientation * (ang - self.psi_start)).rem_euclid(TAU);
        if along <= self.sweep() {
            (dist(p, self.center) - self.r).abs()
        } else {
            dist(p, self.start()).min(dist(p, self.end()))
        }
    }
}

/// Chain of arcs traversed in order.
impl ArcLengthCurve for [CircularArcSpec] {
    fn length(&self) -> f64 {
        self.iter().map(CircularArcSpec::arc_length).sum()
    }

    fn point_at(&self, s: f64) -> Point {
        let mut rest = s.max(0.0);
        for (k, a) in self.iter().enumerate() {
            let l = a.arc_length();
            if rest <= l || k + 1 == self.len() {
                let psi = a.psi_start + a.orientation * rest.min(l) / a.r;
                return a.at_angle(psi);
            }
            rest -= l;
        }
        (f64::NAN, f64::NAN)
    }
}

/// Two arcs through `p0` (tangent `t0`) and `p1` (tangent `t1`), meeting
/// tangentially, using equal tangent-arm lengths.
pub fn biarc(p0: Point, t0: Point, p1: Point, t1: Point) -> Result<[CircularArcSpec; 2]> {
    let v = (p1.0 - p0.0, p1.1 - p0.1);
    let t = (t0.0 + t1.0, t0.1 + t1.1);
    let vv = v.0 * v.0 + v.1 * v.1;
    let vt = v.0 * t.0 + v.1 * t.1;
    let denom = 2.0 * (1.0 - (t0.0 * t1.0 + t0.1 * t1.1));
    let d = if denom.abs() < 1e-12 {
        if vt <= 0.0 {
            return Err(Error::InvalidInput(
                "biarc end tangents are incompatible".into(),
            ));
        }
        vv / (2.0 * vt)
    } else {
        (-vt + (vt * vt + denom * vv).sqrt()) / denom
    };
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidInput(
            "biarc has no positive tangent arm".into(),
        ));
    }
    let q0 = (p0.0 + d * t0.0, p0.1 + d * t0.1);
    let q1 = (p1.0 - d * t1.0, p1.1 - d * t1.1);
    let joint = (0.5 * (q0.0 + q1.0), 0.5 * (q0.1 + q1.1));
    let first = CircularArcSpec::from_tangent(p0, t0, joint)?;
    // the second arc is built backwards from p1 and then reversed
    let back = CircularArcSpec::from_tangent(p1, (-t1.0, -t1.1), joint)?;
    let second = CircularArcSpec {
        psi_start: back.psi_end,
        psi_end: back.psi_start,
        orientation: -back.orientation,
        ..back
    };
    Ok([first, second])
}

/// Largest distance from a segment sample to the arc spline.
pub fn fit_error(arcs: &[CircularArcSpec], segment: &TargetCurve) -> f64 {
    segment
        .points
        .iter()
        .map(|&p| {
            arcs.iter()
                .map(|a| a.distance(p))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn piece_fit(seg: &TargetCurve, i0: usize, i1: usize) -> Result<([CircularArcSpec; 2], f64)> {
    let arcs = biarc(
        seg.points[i0],
        seg.tangent(i0),
        seg.points[i1],
        seg.tangent(i1),
    )?;
    let err = seg.points[i0..=i1]
        .iter()
        .map(|&p| arcs[0].distance(p).min(arcs[1].distance(p)))
        .fold(0.0, f64::max);
    Ok((arcs, err))
}

/// Adaptive biarc approximation of a smooth segment to within `tol`.
pub fn biarc_fit(segment: &TargetCurve, tol: f64) -> Result<Vec<CircularArcSpec>> {
    biarc_fit_depth(segment, tol, DEFAULT_MAX_DEPTH)
}

pub fn biarc_fit_depth(
    segment: &TargetCurve,
    tol: f64,
    max_depth: usize,
) -> Result<Vec<CircularArcSpec>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "fit tolerance must be positive, got {tol}"
        )));
    }
    if segment.len() < 2 {
        return Err(Error::DuplicatePoints);
    }
    // a single arc through all samples is used when it already fits
    if let Some(arc) = single_arc(segment, tol) {
        return Ok(vec![arc]);
    }
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    let mut stack = vec![(0usize, segment.len() - 1, 0usize)];
    let mut done: Vec<(usize, [CircularArcSpec; 2])> = Vec::new();
    while let Some((i0, i1, depth)) = stack.pop() {
        let fitted = piece_fit(segment, i0, i1);
        if let Ok((arcs, err)) = fitted {
            if err <= tol {
                done.push((i0, arcs));
                continue;
            }
            worst = worst.max(err);
        }
        if depth >= max_depth || i1 - i0 < 2 {
            return Err(Error::FitFailed {
                tol,
                error: worst,
                depth,
            });
        }
        // split at the sample nearest the middle of the piece
        let mid_s = 0.5 * (segment.s[i0] + segment.s[i1]);
        let mut im = segment
            .s
            .partition_point(|&v| v < mid_s)
            .clamp(i0 + 1, i1 - 1);
        if im > i0 + 1 && mid_s - segment.s[im - 1] < segment.s[im] - mid_s {
            im -= 1;
        }
        stack.push((im, i1, depth + 1));
        stack.push((i0, im, depth + 1));
    }
    done.sort_by_key(|d| d.0);
    for (_, arcs) in done {
        out.extend(arcs);
    }
    Ok(out)
}

/// Biarcs on `pieces` pieces of (nearly) equal chord length.
pub fn biarc_fit_uniform(segment: &TargetCurve, pieces: usize) -> Result<Vec<CircularArcSpec>> {
    if pieces == 0 || segment.len() < pieces + 1 {
        return Err(Error::InvalidInput(format!(
            "cannot cut {} samples into {pieces} pieces",
            segment.len()
        )));
    }
    let total = segment.total_length();
    let mut idx: Vec<usize> = (0..=pieces)
        .map(|k| {
            let target = total * k as f64 / pieces as f64;
            let j = segment
                .s
                .partition_point(|&v| v < target)
                .min(segment.len() - 1);
            if j > 0 && target - segment.s[j - 1] < segment.s[j] - target {
                j - 1
            } else {
                j
            }
        })
        .collect();
    idx.dedup();
    let mut out = Vec::with_capacity(2 * pieces);
    for w in idx.windows(2) {
        out.extend(piece_fit(segment, w[0], w[1])?.0);
    }
    Ok(out)
}

/// The arc through the first, middle and last samples, if it fits. A
/// segment is a single G1 piece between cusps, so no tangent matching with
/// neighbours is needed.
fn single_arc(seg: &TargetCurve, tol: f64) -> Option<CircularArcSpec> {
    let (p, q) = (seg.points[0], *seg.points.last()?);
    let m = seg.points[seg.len() / 2];
    let (b, c) = ((m.0 - p.0, m.1 - p.1), (q.0 - p.0, q.1 - p.1));
    let d = 2.0 * (b.0 * c.1 - b.1 * c.0);
    let (bb, cc) = (b.0 * b.0 + b.1 * b.1, c.0 * c.0 + c.1 * c.1);
    let circumradius = bb.sqrt() * cc.sqrt() * dist(m, q) / d.abs();
    let arc = if !(circumradius < R_MAX) {
        let n = cc.sqrt();
        CircularArcSpec::from_tangent(p, (c.0 / n, c.1 / n), q).ok()?
    } else {
        let ux = (c.1 * bb - b.1 * cc) / d;
        let uy = (b.0 * cc - c.0 * bb) / d;
        let center = (p.0 + ux, p.1 + uy);
        let orientation = d.signum();
        let psi_start = (p.1 - center.1).atan2(p.0 - center.0);
        let psi_q = (q.1 - center.1).atan2(q.0 - center.0);
        let sweep = (orientation * (psi_q - psi_start)).rem_euclid(TAU);
        CircularArcSpec {
            center,
            r: ux.hypot(uy),
            psi_start,
            psi_end: psi_start + orientation * sweep,
            orientation,
        }
    };
    (arc.r.is_finite() && fit_error(&[arc], seg) <= tol).then_some(arc)
}

/// Fits every smooth segment of the curve.
pub fn fit_curve(curve: &TargetCurve, tol: f64) -> Result<Vec<Vec<CircularArcSpec>>> {
    split_at_cusps(curve)?
        .iter()
        .map(|s| biarc_fit(s, tol))
        .collect()
}
