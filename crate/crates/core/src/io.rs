//! File formats: trajectory and energy CSV, SVG renderings.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::arcfit::CircularArcSpec;
use crate::arcopt::ArcSolution;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::model::{ControlSample, Quasivelocities, SleighState};
use crate::ode::Trajectory;
use crate::pattern::{EnergyProfile, Pattern};

pub const TRAJECTORY_COLUMNS: [&str; 14] = [
    "t", "p1", "p2", "theta", "x", "y", "xi1", "xi2", "eta", "arclen", "a", "b", "da", "db",
];

pub const ENERGY_COLUMNS: [&str; 3] = ["t", "skate_energy", "mass_energy"];

// 17 significant digits: enough to read every f64 back exactly
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_COLUMNS)?;
    for i in 0..traj.len() {
        let (s, q, c) = (&traj.states[i], &traj.quasis[i], &traj.controls[i]);
        let row = [
            traj.times[i],
            s.p1,
            s.p2,
            s.theta,
            s.x,
            s.y,
            q.xi1,
            q.xi2,
            q.eta,
            traj.arclen[i],
            c.a,
            c.b,
            c.da,
            c.db,
        ];
        w.write_record(row.iter().map(|v| num(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory written by [`write_trajectory_csv`]. The state's own
/// `b` is left unset; the control column carries it.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRAJECTORY_COLUMNS {
        return Err(Error::Parse(format!(
            "unexpected trajectory columns {header:?}"
        )));
    }
    let mut traj = Trajectory::default();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))?;
        if v.len() != TRAJECTORY_COLUMNS.len() {
            return Err(Error::Parse(format!(
                "row {}: expected 14 fields",
                line + 1
            )));
        }
        traj.times.push(v[0]);
        traj.states
            .push(SleighState::new(v[1], v[2], v[3], v[4], v[5]));
        traj.quasis.push(Quasivelocities {
            xi1: v[6],
            xi2: v[7],
            eta: v[8],
        });
        traj.arclen.push(v[9]);
        traj.controls
            .push(ControlSample::new(v[10], v[11], v[12], v[13]));
    }
    Ok(traj)
}

pub fn write_energy_csv<W: Write>(profile: &EnergyProfile, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ENERGY_COLUMNS)?;
    for ((t, s), m) in profile.times.iter().zip(&profile.skate).zip(&profile.mass) {
        w.write_record([num(*t), num(*s), num(*m)])?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column `x,y` curve samples. A header row is optional.
pub fn read_points_csv<R: Read>(input: R) -> Result<Vec<Point>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut pts = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!(
                "line {}: expected two columns",
                line + 1
            )));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => pts.push((x, y)),
            _ if line == 0 => {}
            _ => {
                return Err(Error::Parse(format!(
                    "line {}: not a number pair",
                    line + 1
                )))
            }
        }
    }
    Ok(pts)
}

/// One polyline of an SVG drawing.
#[derive(Debug, Clone, PartialEq)]
pub struct SvgPath {
    pub class: String,
    pub points: Vec<Point>,
}

/// Renders paths as `<path>` elements and overlays as `<polyline>`s, with
/// the y axis pointing up and a 5 % margin around the data.
pub fn render_svg(paths: &[SvgPath], overlays: &[SvgPath]) -> String {
    let all = || paths.iter().chain(overlays).flat_map(|p| p.points.iter());
    let (mut lo, mut hi) = (
        (f64::INFINITY, f64::INFINITY),
        (f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for p in all() {
        lo = (lo.0.min(p.0), lo.1.min(p.1));
        hi = (hi.0.max(p.0), hi.1.max(p.1));
    }
    let (x0, y0, w, h) = if lo.0.is_finite() {
        let (w, h) = (hi.0 - lo.0, hi.1 - lo.1);
        let pad = |d: f64, other: f64| {
            if d > 0.0 {
                0.05 * d
            } else {
                0.05 * other.max(1.0)
            }
        };
        let (mx, my) = (pad(w, h), pad(h, w));
        (lo.0 - mx, -hi.1 - my, w + 2.0 * mx, h + 2.0 * my)
    } else {
        (0.0, 0.0, 1.0, 1.0)
    };
    let stroke = 0.003 * w.max(h);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}">"#,
        x0, y0, w, h
    );
    let _ = writeln!(
        s,
        "<style>path,polyline{{fill:none;stroke-width:{stroke}}} .inner{{stroke:#1f4e9c}} .outer{{stroke:#b02a2a}} \
         .arc{{stroke:#777}} .forward{{stroke:#2a9c3f}} .backward{{stroke:#2a5fd0}}</style>"
    );
    for p in paths {
        if p.points.is_empty() {
            continue;
        }
        let mut d = String::new();
        for (i, q) in p.points.iter().enumerate() {
            let _ = write!(d, "{}{} {}", if i == 0 { "M" } else { " L" }, q.0, -q.1);
        }
        let _ = writeln!(s, r#"<path class="{}" d="{}"/>"#, p.class, d);
    }
    for p in overlays {
        let pts: Vec<String> = p
            .points
            .iter()
            .map(|q| format!("{},{}", q.0, -q.1))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="{}" points="{}"/>"#,
            p.class,
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

/// A single arc: one path for the whole arc, with its backward and forward
/// halves drawn over it.
pub fn arc_svg(sol: &ArcSolution) -> String {
    let arc = SvgPath {
        class: "arc".into(),
        points: sol.combined.points(),
    };
    let halves = [
        SvgPath {
            class: "backward".into(),
            points: sol.backward.points(),
        },
        SvgPath {
            class: "forward".into(),
            points: sol.forward.points(),
        },
    ];
    render_svg(&[arc], &halves)
}

/// One path per placed arc, classed by the curve it belongs to.
pub fn pattern_svg(pattern: &Pattern) -> String {
    let paths: Vec<SvgPath> = pattern
        .pieces()
        .map(|(c, p)| SvgPath {
            class: c.name.clone(),
            points: p.traj.points(),
        })
        .collect();
    render_svg(&paths, &[])
}

/// Fitted arcs drawn over the target samples.
pub fn fit_svg(target: &[Point], arcs: &[CircularArcSpec]) -> String {
    let paths: Vec<SvgPath> = arcs
        .iter()
        .map(|a| {
            let n = ((a.sweep() / 0.02).ceil() as usize).clamp(2, 2000);
            let pts = (0..=n)
                .map(|i| a.at_angle(a.psi_start + (a.psi_end - a.psi_start) * i as f64 / n as f64))
                .collect();
            SvgPath {
                class: "arc".into(),
                points: pts,
            }
        })
        .collect();
    render_svg(
        &paths,
        &[SvgPath {
            class: "target".into(),
            points: target.to_vec(),
        }],
    )
}
