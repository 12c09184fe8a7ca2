//! Small planar-geometry helpers shared by the arc, fitting and pattern code.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Point = (f64, f64);

pub fn dist(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// A planar curve that can be evaluated by arc length.
pub trait ArcLengthCurve {
    fn length(&self) -> f64;
    /// Point at arc length `s`, `0 <= s <= length()`.
    fn point_at(&self, s: f64) -> Point;
}

/// `int_0^S |x1 - x2|^p + |y1 - y2|^p ds` with `S` the shorter of the two
/// lengths, by composite Simpson quadrature.
pub fn lp_deviation(a: &dyn ArcLengthCurve, b: &dyn ArcLengthCurve, p: f64) -> f64 {
    let s_max = a.length().min(b.length());
    if s_max <= 0.0 {
        return 0.0;
    }
    let n = 2000;
    let h = s_max / n as f64;
    let f = |s: f64| {
        let (pa, pb) = (a.point_at(s), b.point_at(s));
        (pa.0 - pb.0).abs().powf(p) + (pa.1 - pb.1).abs().powf(p)
    };
    let mut acc = f(0.0) + f(s_max);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleFit {
    pub center: Point,
    pub radius: f64,
    /// Largest `| |p - c| - R |` over the fitted points.
    pub max_residual: f64,
    pub rms_residual: f64,
}

/// Least-squares circle through `points`: an algebraic (Kåsa) estimate
/// refined by Gauss–Newton on the geometric distances.
pub fn fit_circle(points: &[Point]) -> Result<CircleFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "circle fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    // centre the data for conditioning
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let pts: Vec<Point> = points.iter().map(|p| (p.0 - mx, p.1 - my)).collect();

    // x^2 + y^2 = 2 cx x + 2 cy y + k
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for &(x, y) in &pts {
        let row = Vector3::new(2.0 * x, 2.0 * y, 1.0);
        ata += row * row.transpose();
        atb += row * (x * x + y * y);
    }
    let sol = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::InvalidInput("circle fit: points are collinear".into()))?;
    let (mut cx, mut cy) = (sol[0], sol[1]);
    let mut r = (sol[2] + cx * cx + cy * cy).sqrt();
    if !r.is_finite() {
        return Err(Error::InvalidInput(
            "circle fit: points are collinear".into(),
        ));
    }

    for _ in 0..50 {
        let m = pts.len();
        let mut jac = DMatrix::<f64>::zeros(m, 3);
        let mut res = DVector::<f64>::zeros(m);
        for (i, &(x, y)) in pts.iter().enumerate() {
            let d = (x - cx).hypot(y - cy);
            if d == 0.0 {
                continue;
            }
            res[i] = d - r;
            jac[(i, 0)] = -(x - cx) / d;
            jac[(i, 1)] = -(y - cy) / d;
            jac[(i, 2)] = -1.0;
        }
        let Ok(step) = jac.clone().svd(true, true).solve(&(-res), 1e-14) else {
            break;
        };
        cx += step[0];
        cy += step[1];
        r += step[2];
        if step.norm() <= 1e-15 * (1.0 + r) {
            break;
        }
    }

    let residuals: Vec<f64> = pts
        .iter()
        .map(|&(x, y)| (x - cx).hypot(y - cy) - r)
        .collect();
    let max_residual = residuals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rms_residual = (residuals.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    Ok(CircleFit {
        center: (cx + mx, cy + my),
        radius: r.abs(),
        max_residual,
        rms_residual,
    })
}

/// Rotation of `p` by `angle` about `center`.
pub fn rotate_about(p: Point, center: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    let (dx, dy) = (p.0 - center.0, p.1 - center.1);
    (center.0 + c * dx - s * dy, center.1 + s * dx + c * dy)
}

/// Largest distance from a point of `a` to the nearest point of `b` and
/// vice versa, over sample sets.
pub fn hausdorff(a: &[Point], b: &[Point]) -> f64 {
    let one_sided = |u: &[Point], v: &[Point]| {
        u.iter()
            .map(|p| v.iter().map(|q| dist(*p, *q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

/// Distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0);
    dist(p, (a.0 + t * vx, a.1 + t * vy))
}

/// Hausdorff distance between two polylines, measuring each vertex against
/// the other polyline's segments.
pub fn polyline_hausdorff(a: &[Point], b: &[Point]) -> f64 {
    let one_sided = |u: &[Point], v: &[Point]| {
        u.iter()
            .map(|p| {
                if v.len() == 1 {
                    return dist(*p, v[0]);
                }
                v.windows(2)
                    .map(|w| point_segment_distance(*p, w[0], w[1]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() {
            0.0
        } else {
            f64::INFINITY
        };
    }
    one_sided(a, b).max(one_sided(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    struct Line {
        y: f64,
        len: f64,
    }

    impl ArcLengthCurve for Line {
        fn length(&self) -> f64 {
            self.len
        }
        fn point_at(&self, s: f64) -> Point {
            (s, self.y)
        }
    }

    #[test]
    fn deviation_of_offset_lines() {
        let a = Line { y: 0.0, len: 3.0 };
        let b = Line { y: 0.5, len: 4.0 };
        assert_relative_eq!(lp_deviation(&a, &b, 2.0), 3.0 * 0.25, epsilon = 1e-12);
        assert_eq!(lp_deviation(&a, &a, 2.0), 0.0);
    }

    #[test]
    fn exact_circle_fit() {
        let pts: Vec<Point> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.05;
                (3.0 + 1.2 * t.cos(), -1.0 + 1.2 * t.sin())
            })
            .collect();
        let fit = fit_circle(&pts).unwrap();
        assert_relative_eq!(fit.radius, 1.2, epsilon = 1e-12);
        assert_relative_eq!(fit.center.0, 3.0, epsilon = 1e-12);
        assert_relative_eq!(fit.center.1, -1.0, epsilon = 1e-12);
        assert!(fit.max_residual < 1e-12);
    }

    #[test]
    fn collinear_points_rejected() {
        let pts: Vec<Point> = (0..10).map(|i| (i as f64, 2.0 * i as f64)).collect();
        assert!(fit_circle(&pts).is_err());
        assert!(fit_circle(&pts[..2]).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(-PI / 2.0), -PI / 2.0);
        assert_relative_eq!(wrap_angle(2.0 * PI + 0.1), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn rotation_quarter_turn() {
        let p = rotate_about((1.0, 0.0), (0.0, 0.0), PI / 2.0);
        assert!(p.0.abs() < 1e-15);
        assert_relative_eq!(p.1, 1.0);
    }

    #[test]
    fn hausdorff_basic() {
        let a = [(0.0, 0.0), (1.0, 0.0)];
        let b = [(0.0, 0.5), (1.0, 0.5)];
        assert_relative_eq!(hausdorff(&a, &b), 0.5);
        assert_relative_eq!(polyline_hausdorff(&a, &b), 0.5);
        assert_relative_eq!(polyline_hausdorff(&[(0.5, 0.0)], &a), 0.5);
    }

    proptest! {
        #[test]
        fn noisy_arc_fit_close(cx in -5.0..5.0f64, cy in -5.0..5.0f64, r in 0.2..5.0f64,
                               start in 0.0..6.0f64, sweep in 1.0..6.0f64) {
            let pts: Vec<Point> = (0..40)
                .map(|i| {
                    let t = start + sweep * i as f64 / 39.0;
                    let rr = r * (1.0 + 1e-6 * ((i * 7919) % 13) as f64 / 13.0);
                    (cx + rr * t.cos(), cy + rr * t.sin())
                })
                .collect();
            let fit = fit_circle(&pts).unwrap();
            prop_assert!((fit.radius - r).abs() < 1e-4 * r);
            prop_assert!(fit.max_residual < 1e-5 * r);
        }
    }
}
