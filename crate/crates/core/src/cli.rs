//! Command-line front end.
//!
//! Every command reads one input file, does all of its work in memory and
//! only then writes its outputs, so a failing run leaves no partial files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::arcfit::{self, arclength_parametrize, fit_error, CircularArcSpec, DEFAULT_CUSP_ANGLE};
use crate::arcopt::{optimize_arc, simulate_arc, ArcSolution, ArcTask};
use crate::error::{Error, Result};
use crate::io;
use crate::pattern::{double_flower, trajectory_energy, FlowerSpec, DEFAULT_SPIKE_FACTOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Integrate an arc task at the parameters in its `guess`.
    Simulate,
    /// Search the control parameters of an arc task.
    Optimize,
    /// Fit circular arcs to a sampled curve.
    Fit,
    /// Optimize three arcs and assemble the double flower.
    Pattern,
    /// Energy profile of an arc task at its `guess` parameters.
    Energy,
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "skate-trace",
    version,
    about = "Trace skating figures with a controlled Chaplygin sleigh"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    #[command(flatten)]
    pub config: RunConfig,
}

#[derive(Debug, Clone, clap::Args, PartialEq)]
pub struct RunConfig {
    /// Task file (JSON), or curve samples (CSV) for `fit`.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Tolerance overrides, e.g. `--tol rel_tol=1e-10`.
    #[arg(long = "tol", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Cusp sample indices for `fit`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub cusps: Vec<usize>,
    /// Treat the `fit` curve as closed.
    #[arg(long)]
    pub closed: bool,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            out: out.into(),
            overrides: vec![],
            cusps: vec![],
            closed: false,
        }
    }
}

/// Parsed `--tol` overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides(BTreeMap<String, f64>);

const TASK_KEYS: [&str; 10] = [
    "rel_tol",
    "abs_tol",
    "event_tol",
    "max_step",
    "singular_eps",
    "cost_threshold",
    "cost_target",
    "max_evals",
    "max_iter",
    "restarts",
];
const OTHER_KEYS: [&str; 5] = [
    "join_tol",
    "join_tol_rel",
    "fit_tol",
    "cusp_angle",
    "spike_factor",
];

impl Overrides {
    pub fn parse(items: &[String]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for item in items {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("override '{item}' is not KEY=VALUE")))?;
            let k = k.trim();
            if !TASK_KEYS.contains(&k) && !OTHER_KEYS.contains(&k) {
                return Err(Error::Parse(format!("unknown override key '{k}'")));
            }
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("override '{k}' has a non-numeric value")))?;
            map.insert(k.to_string(), v);
        }
        Ok(Self(map))
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn apply(&self, task: &mut ArcTask) {
        for (k, &v) in &self.0 {
            let count = v.max(0.0).round() as usize;
            match k.as_str() {
                "rel_tol" => task.integrator.rel_tol = v,
                "abs_tol" => task.integrator.abs_tol = v,
                "event_tol" => task.integrator.event_tol = v,
                "max_step" => task.integrator.max_step = v,
                "singular_eps" => task.singular_eps = v,
                "cost_threshold" => task.optimizer.cost_threshold = v,
                "cost_target" => task.optimizer.cost_target = v,
                "max_evals" => task.optimizer.max_evals = count,
                "max_iter" => task.optimizer.max_iter = count,
                "restarts" => task.optimizer.restarts = count,
                _ => {}
            }
        }
    }
}

/// Files produced by a run, held in memory until the run has succeeded.
#[derive(Debug, Default)]
struct Outputs(Vec<(String, Vec<u8>)>);

impl Outputs {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.0.push((name.to_string(), bytes));
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    fn trajectory(&mut self, name: &str, traj: &crate::ode::Trajectory) -> Result<()> {
        let mut buf = Vec::new();
        io::write_trajectory_csv(traj, &mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    fn write(self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::with_capacity(self.0.len());
        for (name, bytes) in self.0 {
            let p = dir.join(name);
            fs::write(&p, bytes)?;
            paths.push(p);
        }
        Ok(paths)
    }
}

fn read_task(cfg: &RunConfig, ov: &Overrides) -> Result<ArcTask> {
    let text = fs::read_to_string(&cfg.input)?;
    let mut task: ArcTask = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", cfg.input.display())))?;
    ov.apply(&mut task);
    task.validate()?;
    Ok(task)
}

fn arc_summary(task: &ArcTask, sol: &ArcSolution) -> serde_json::Value {
    let drift = sol
        .combined
        .states
        .iter()
        .map(|s| (s.p1 + task.radius * s.p2 - task.momentum()).abs())
        .fold(0.0, f64::max);
    let fit = sol.circle_fit().ok();
    json!({
        "name": task.name,
        "params": sol.opt_params,
        "cost": sol.cost,
        "length": sol.length,
        "forward_length": sol.forward.total_length(),
        "backward_length": sol.backward.total_length(),
        "start_speed": sol.combined.first_speed(),
        "end_speed": sol.combined.last_speed(),
        "evaluations": sol.evaluations,
        "momentum_drift": drift,
        "circle_fit": fit.map(|f| json!({
            "center": [f.center.0, f.center.1],
            "radius": f.radius,
            "max_residual": f.max_residual,
        })),
    })
}

fn arc_outputs(
    out: &mut Outputs,
    task: &ArcTask,
    sol: &ArcSolution,
    summary_name: &str,
) -> Result<()> {
    out.trajectory("arc.csv", &sol.combined)?;
    out.trajectory("forward.csv", &sol.forward)?;
    out.trajectory("backward.csv", &sol.backward)?;
    out.add("arc.svg", io::arc_svg(sol).into_bytes());
    out.json(summary_name, &arc_summary(task, sol))
}

/// Runs one command and returns the files written.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ov = Overrides::parse(&cfg.overrides)?;
    let mut out = Outputs::default();
    match command {
        Command::Simulate => {
            let task = read_task(cfg, &ov)?;
            let sol = simulate_arc(&task, &task.guess)?;
            arc_outputs(&mut out, &task, &sol, "summary.json")?;
        }
        Command::Optimize => {
            let task = read_task(cfg, &ov)?;
            let sol = optimize_arc(&task)?;
            arc_outputs(&mut out, &task, &sol, "optimized.json")?;
        }
        Command::Energy => {
            let task = read_task(cfg, &ov)?;
            let sol = simulate_arc(&task, &task.guess)?;
            let factor = ov.get("spike_factor").unwrap_or(DEFAULT_SPIKE_FACTOR);
            let prof = trajectory_energy(&sol.combined, task.radius, &task.params, factor);
            let mut buf = Vec::new();
            io::write_energy_csv(&prof, &mut buf)?;
            out.add("energy.csv", buf);
            out.json(
                "energy.json",
                &json!({
                    "max_mass_energy": prof.max_mass_energy,
                    "median_mass_energy": prof.median_mass_energy,
                    "spike_factor": prof.spike_factor,
                    "spike": prof.spike,
                }),
            )?;
        }
        Command::Fit => {
            let pts = io::read_points_csv(fs::File::open(&cfg.input)?)?;
            let mut curve = arclength_parametrize(&pts)?;
            curve.closed = cfg.closed;
            let cusps = if cfg.cusps.is_empty() {
                curve.detect_cusps(
                    ov.get("cusp_angle")
                        .map_or(DEFAULT_CUSP_ANGLE, f64::to_radians),
                )
            } else {
                cfg.cusps.clone()
            };
            let curve = curve.with_cusps(cusps)?;
            let segments = arcfit::split_at_cusps(&curve)?;
            let diag = diagonal(&curve.points);
            let tol = ov
                .get("fit_tol")
                .unwrap_or(1e-3 * diag.max(f64::MIN_POSITIVE));
            let mut all: Vec<CircularArcSpec> = Vec::new();
            let mut report = Vec::new();
            for seg in &segments {
                let arcs = arcfit::biarc_fit(seg, tol)?;
                report.push(json!({
                    "samples": seg.len(),
                    "length": seg.total_length(),
                    "arcs": arcs,
                    "error": fit_error(&arcs, seg),
                }));
                all.extend(arcs);
            }
            out.json("arcs.json", &json!({ "tol": tol, "segments": report }))?;
            out.add("fit.svg", io::fit_svg(&curve.points, &all).into_bytes());
        }
        Command::Pattern => {
            let text = fs::read_to_string(&cfg.input)?;
            let mut spec: FlowerSpec = serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("{}: {e}", cfg.input.display())))?;
            for t in [&mut spec.arc1, &mut spec.arc2, &mut spec.arc3] {
                ov.apply(t);
                t.validate()?;
            }
            if let Some(v) = ov.get("join_tol") {
                spec.layout.join_tol = Some(v);
            }
            if let Some(v) = ov.get("join_tol_rel") {
                spec.layout.join_tol_rel = v;
            }
            let [a1, a2, a3] = spec.solve_arcs()?;
            let tasks = [&spec.arc1, &spec.arc2, &spec.arc3];
            for (t, s) in tasks.iter().zip([&a1, &a2, &a3]) {
                if !(s.cost <= t.optimizer.cost_threshold) {
                    log::warn!(
                        "arc '{}' cost {:e} is above the threshold {:e}",
                        t.name,
                        s.cost,
                        t.optimizer.cost_threshold
                    );
                }
            }
            let pattern = double_flower(&a1, &a2, &a3, &spec.layout)?;
            for (i, s) in [&a1, &a2, &a3].iter().enumerate() {
                out.trajectory(&format!("arc{}.csv", i + 1), &s.combined)?;
            }
            out.add("pattern.svg", io::pattern_svg(&pattern).into_bytes());
            let curves: Vec<_> = pattern
                .curves
                .iter()
                .map(|c| {
                    json!({
                        "name": c.name,
                        "pieces": c.pieces.len(),
                        "length": c.length(),
                        "joins": c.joins,
                    })
                })
                .collect();
            out.json(
                "pattern.json",
                &json!({
                    "arcs": tasks.iter().zip([&a1, &a2, &a3]).map(|(t, s)| arc_summary(t, s)).collect::<Vec<_>>(),
                    "center": [pattern.center.0, pattern.center.1],
                    "join_tol": pattern.join_tol,
                    "max_join_gap": pattern.max_join_gap(),
                    "symmetry_residual": pattern.symmetry_residual,
                    "curves": curves,
                }),
            )?;
        }
    }
    out.write(&cfg.out)
}

fn diagonal(pts: &[crate::geometry::Point]) -> f64 {
    let fold = |f: fn(f64, f64) -> f64, init: f64, sel: fn(&crate::geometry::Point) -> f64| {
        pts.iter().map(sel).fold(init, f)
    };
    let (x0, x1) = (
        fold(f64::min, f64::INFINITY, |p| p.0),
        fold(f64::max, f64::NEG_INFINITY, |p| p.0),
    );
    let (y0, y1) = (
        fold(f64::min, f64::INFINITY, |p| p.1),
        fold(f64::max, f64::NEG_INFINITY, |p| p.1),
    );
    (x1 - x0).hypot(y1 - y0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_and_apply() {
        let ov = Overrides::parse(&["rel_tol=1e-10".into(), "restarts = 2".into()]).unwrap();
        assert_eq!(ov.get("rel_tol"), Some(1e-10));
        let mut task: ArcTask = serde_json::from_str(
            r#"{"T": 6, "r": 1.2, "target": {"length": 4.1}, "family": "circular",
                "init": {"p1": 2, "p2": 3, "theta": 0, "x": 0, "y": -1.2}, "guess": [1, 1]}"#,
        )
        .unwrap();
        ov.apply(&mut task);
        assert_eq!(task.integrator.rel_tol, 1e-10);
        assert_eq!(task.optimizer.restarts, 2);
        assert!(Overrides::parse(&["bogus=1".into()]).is_err());
        assert!(Overrides::parse(&["rel_tol".into()]).is_err());
        assert!(Overrides::parse(&["rel_tol=x".into()]).is_err());
    }

    #[test]
    fn parses_command_line() {
        let cli = Cli::try_parse_from([
            "skate-trace",
            "fit",
            "--input",
            "c.csv",
            "--out",
            "o",
            "--tol",
            "fit_tol=0.01",
            "--cusps",
            "3,7",
        ])
        .unwrap();
        assert_eq!(cli.command, Command::Fit);
        assert_eq!(cli.config.cusps, vec![3, 7]);
        assert_eq!(cli.config.overrides, vec!["fit_tol=0.01".to_string()]);
        assert!(
            Cli::try_parse_from(["skate-trace", "dance", "--input", "a", "--out", "b"]).is_err()
        );
    }
}
