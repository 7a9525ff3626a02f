use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use nalgebra::DVector;
use resforge::bench::{bench_csv, run_bench};
use resforge::evaluation::{compare_report, comparison_csv, impulse_torque_test, report_csv, Trajectory};
use resforge::forcespace::{force_polytope, residual_force_polytope, ResidualMode};
use resforge::geometry::dump_polytope;
use resforge::model::{load_model_file, Rectangle, RobotModel};
use resforge::transcription::{build_problem, solve, Scenario, Solution};

use crate::svg::{self, HLine, Panel, Series};

pub const EXIT_NOT_CONVERGED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn input(msg: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_INPUT,
            error: anyhow!("{msg}"),
        }
    }
}

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure {
        code: EXIT_INPUT,
        error: e.into(),
    }
}

/// Files are assembled in memory and only written once every input checked out.
struct Outputs {
    files: Vec<(PathBuf, String)>,
}

impl Outputs {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add(&mut self, name: impl Into<PathBuf>, contents: String) {
        self.files.push((name.into(), contents));
    }

    fn write(self, dir: &Path) -> Result<(), Failure> {
        for (name, contents) in self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))
                    .map_err(input)?;
            }
            std::fs::write(&path, contents)
                .with_context(|| format!("writing {}", path.display()))
                .map_err(input)?;
        }
        Ok(())
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn trace_csv(sol: &Solution) -> String {
    let mut out = String::from("iteration,objective,feasibility\n");
    for (i, (f, c)) in sol.objective_trace.iter().zip(&sol.feasibility_trace).enumerate() {
        let _ = writeln!(out, "{i},{},{}", num(*f), num(*c));
    }
    out
}

/// Link polylines (base, joint origins, end-effector) for one configuration.
fn chain_points(model: &RobotModel, q: &DVector<f64>) -> Vec<[f64; 3]> {
    let frames = model.frames(q);
    let mut pts = vec![[0.0; 3]];
    pts.extend(frames.origins.iter().skip(1).map(|o| [o.x, o.y, o.z]));
    let e = frames.end_effector.translation;
    pts.push([e.x, e.y, e.z]);
    pts
}

fn surface_outline(r: &Rectangle) -> Vec<[f64; 3]> {
    let c = r.corner();
    let (u, v) = (r.edge_u(), r.edge_v());
    [c, c + u, c + u + v, c + v, c]
        .iter()
        .map(|p| [p.x, p.y, p.z])
        .collect()
}

fn trajectory_svg(model: &RobotModel, sol: &Solution, surface: &Rectangle) -> String {
    let projections: &[(usize, usize, &str)] = if model.task_dim() == 2 {
        &[(0, 1, "y (m)")]
    } else {
        &[(0, 1, "y (m)"), (0, 2, "z (m)")]
    };
    let outline = surface_outline(surface);
    let panels = projections
        .iter()
        .map(|&(a, b, y_label)| {
            let mut series: Vec<Series> = sol
                .q
                .iter()
                .zip(&sol.mesh_times)
                .map(|(q, t)| {
                    let pts = chain_points(model, &DVector::from_column_slice(q));
                    Series::new(
                        format!("t={t:.2}"),
                        pts.iter().map(|p| p[a]).collect(),
                        pts.iter().map(|p| p[b]).collect(),
                    )
                })
                .collect();
            let mut s = Series::new(
                "surface",
                outline.iter().map(|p| p[a]).collect(),
                outline.iter().map(|p| p[b]).collect(),
            );
            s.dashed = true;
            series.push(s);
            let plane = if b == 1 { "xy" } else { "xz" };
            Panel {
                title: format!("{} motion, objective {} ({plane})", model.name(), sol.objective.label()),
                x_label: "x (m)".into(),
                y_label: y_label.into(),
                series,
                equal_axes: true,
                markers: true,
                ..Panel::default()
            }
        })
        .collect::<Vec<_>>();
    svg::render(&panels)
}

fn polytope_dumps(
    out: &mut Outputs,
    problem_model: &RobotModel,
    sol: &Solution,
    mode: ResidualMode,
) -> Result<(), Failure> {
    let traj = Trajectory::from_solution(sol).map_err(input)?;
    for k in 0..traj.mesh_points() {
        let q = traj.q(k);
        let fp = force_polytope(problem_model, q).map_err(input)?;
        out.add(format!("polytopes/force_{k:02}.txt"), dump_polytope(&fp));
        match residual_force_polytope(problem_model, q, traj.torque(k), mode) {
            Ok(rp) => out.add(format!("polytopes/residual_{k:02}.txt"), dump_polytope(&rp)),
            Err(e) => out.add(format!("polytopes/residual_{k:02}.txt"), format!("# {e}\n")),
        }
    }
    Ok(())
}

pub fn optimize(scenario_path: &Path, dir: &Path, dump: bool, seed: Option<u64>) -> Result<bool, Failure> {
    let mut scenario = Scenario::load(scenario_path).map_err(input)?;
    if let Some(s) = seed {
        scenario.doc.solver.seed = s;
    }
    let problem = build_problem(&scenario).map_err(input)?;
    let sol = solve(&problem, scenario.solver()).map_err(input)?;
    let mut out = Outputs::new();
    let json = serde_json::to_string_pretty(&sol).map_err(input)?;
    out.add("solution.json", json + "\n");
    out.add("trace.csv", trace_csv(&sol));
    out.add(
        "trajectory.svg",
        trajectory_svg(&scenario.model, &sol, scenario.surface()),
    );
    if dump {
        polytope_dumps(&mut out, &scenario.model, &sol, scenario.residual_mode())?;
    }
    out.write(dir)?;
    println!(
        "objective {} = {} ({}, {} iterations, feasibility {:.3e})",
        sol.objective.label(),
        num(sol.objective_value),
        sol.status,
        sol.iterations,
        sol.final_feasibility()
    );
    if !sol.converged {
        return Ok(false);
    }
    Ok(true)
}

/// Labels from file names; `dir/solution.json` is labelled `dir`.
fn labels(paths: &[PathBuf]) -> Vec<String> {
    let mut seen = HashSet::new();
    paths
        .iter()
        .map(|p| {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
            let parent = p.parent().and_then(|d| d.file_name()).and_then(|s| s.to_str());
            let base = match (stem, parent) {
                ("solution", Some(d)) => d.to_string(),
                _ => stem.to_string(),
            };
            let base = base.replace(',', "_");
            let mut label = base.clone();
            let mut i = 2;
            while !seen.insert(label.clone()) {
                label = format!("{base}_{i}");
                i += 1;
            }
            label
        })
        .collect()
}

fn load_trajectory(path: &Path) -> Result<Trajectory, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(input)?;
    let sol: Solution = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(input)?;
    Trajectory::from_solution(&sol)
        .with_context(|| format!("in {}", path.display()))
        .map_err(input)
}

fn impulse_direction(d: Vec<f64>, m: usize) -> Result<DVector<f64>, Failure> {
    let d = DVector::from_vec(d);
    if d.len() != m {
        return Err(Failure::input(format!(
            "direction needs {m} components, got {}",
            d.len()
        )));
    }
    if !(d.norm() > 0.0 && d.iter().all(|x| x.is_finite())) {
        return Err(Failure::input("direction must be a nonzero finite vector"));
    }
    Ok(d.normalize())
}

fn check_peak(f_peak: f64) -> Result<f64, Failure> {
    if f_peak.is_finite() && f_peak >= 0.0 {
        Ok(f_peak)
    } else {
        Err(Failure::input("f-peak must be finite and non-negative"))
    }
}

pub fn evaluate(
    model_path: &Path,
    paths: &[PathBuf],
    dir: &Path,
    impulse: Option<(Vec<f64>, f64)>,
    mode: ResidualMode,
) -> Result<(), Failure> {
    if paths.is_empty() {
        return Err(Failure::input("no trajectories given"));
    }
    let model = load_model_file(model_path).map_err(input)?;
    let impulse = match impulse {
        Some((d, f_peak)) => Some((impulse_direction(d, model.task_dim())?, check_peak(f_peak)?)),
        None => None,
    };
    let named: Vec<(String, Trajectory)> = labels(paths)
        .into_iter()
        .zip(paths)
        .map(|(l, p)| load_trajectory(p).map(|t| (l, t)))
        .collect::<Result<_, _>>()?;
    let cmp = compare_report(&model, &named, mode).map_err(input)?;
    let mut out = Outputs::new();
    out.add("robustness.csv", comparison_csv(&cmp));
    let radius_panel = Panel {
        title: "Largest admissible force over time".into(),
        x_label: "t (s)".into(),
        y_label: "radius (N)".into(),
        series: cmp
            .entries
            .iter()
            .map(|e| Series::new(e.label.clone(), cmp.times.clone(), e.radii.radii.clone()))
            .collect(),
        ..Panel::default()
    };
    out.add("robustness.svg", svg::render(&[radius_panel]));
    let mut summary = String::new();
    for e in &cmp.entries {
        let _ = writeln!(
            summary,
            "{}: mean radius {:.6} N, min {:.6} N",
            e.label,
            e.radii.mean(),
            e.radii.min()
        );
    }

    if let Some((d, f_peak)) = impulse {
        let mut csv = String::new();
        let mut reports = Vec::new();
        for (label, traj) in &named {
            let report = impulse_torque_test(&model, traj, &d, f_peak, mode).map_err(input)?;
            let body = report_csv(&report);
            let mut lines = body.lines();
            let header = lines.next().unwrap_or_default();
            if csv.is_empty() {
                let _ = writeln!(csv, "trajectory,{header}");
            }
            for line in lines {
                let _ = writeln!(csv, "{label},{line}");
            }
            let _ = writeln!(
                summary,
                "{label}: impulse peak |tau|/tau_lim {:.6}, saturated {}",
                report.peak_normalized(),
                report.any_saturated()
            );
            reports.push((label.clone(), report));
        }
        out.add("impulse.csv", csv);
        let panels: Vec<Panel> = (0..model.dof())
            .map(|i| Panel {
                title: format!("Joint {} under {f_peak} N impulse", i + 1),
                x_label: "t (s)".into(),
                y_label: "tau / tau_lim".into(),
                series: reports
                    .iter()
                    .map(|(label, r)| {
                        Series::new(
                            label.clone(),
                            r.times.clone(),
                            r.normalized.iter().map(|row| row[i]).collect(),
                        )
                    })
                    .collect(),
                hlines: vec![
                    HLine {
                        y: 1.0,
                        label: "limit".into(),
                    },
                    HLine {
                        y: -1.0,
                        label: "limit".into(),
                    },
                ],
                ..Panel::default()
            })
            .collect();
        out.add("impulse.svg", svg::render(&panels));
    }
    out.write(dir)?;
    print!("{summary}");
    Ok(())
}

pub fn bench(model_path: &Path, samples: usize, seed: u64, dir: &Path) -> Result<(), Failure> {
    let model = load_model_file(model_path).map_err(input)?;
    let rows = run_bench(&model, samples, seed).map_err(input)?;
    let csv = bench_csv(&rows);
    print!("{csv}");
    let mut out = Outputs::new();
    out.add("bench.csv", csv);
    out.write(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_from_paths() {
        let paths = [
            PathBuf::from("runs/E/solution.json"),
            PathBuf::from("runs/A/solution.json"),
            PathBuf::from("x/a,b.json"),
            PathBuf::from("y/a,b.json"),
        ];
        assert_eq!(labels(&paths), vec!["E", "A", "a_b", "a_b_2"]);
    }
}
