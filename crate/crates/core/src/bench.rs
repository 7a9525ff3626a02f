//! Timing of the geometry kernel and of one evaluation of each objective.

use std::time::Instant;

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::forcespace::{force_context, force_polytope, residual_force_polytope, ForceError, ResidualMode};
use crate::geometry::{inscribed_radius_at, intersect, make_cone, volume, Cone};
use crate::model::{ModelError, Rectangle, RobotModel};
use crate::transcription::{
    build_problem, ConeAxes, ConeSpec, Field, NlpProblem, Objective, Scenario, ScenarioDoc, SolverOptions,
    TranscriptionError,
};

const CONE_APERTURE_DEG: f64 = 20.0;
/// Nominal torques are drawn within this fraction of the limits.
const TORQUE_FRACTION: f64 = 0.5;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("samples must be at least 1")]
    NoSamples,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Force(#[from] ForceError),
    #[error(transparent)]
    Transcription(#[from] TranscriptionError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub operation: String,
    pub mean_us: f64,
    pub std_us: f64,
    pub samples: usize,
}

impl BenchRow {
    fn from_times(operation: &str, times_us: &[f64]) -> Self {
        let n = times_us.len() as f64;
        let mean = times_us.iter().sum::<f64>() / n;
        let var = if times_us.len() > 1 {
            times_us.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            operation: operation.to_string(),
            mean_us: mean,
            std_us: var.sqrt(),
            samples: times_us.len(),
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = std::hint::black_box(f());
    (out, start.elapsed().as_secs_f64() * 1e6)
}

fn random_q(model: &RobotModel, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let (lo, hi) = model.q_bounds();
    DVector::from_iterator(model.dof(), (0..model.dof()).map(|i| rng.gen_range(lo[i]..=hi[i])))
}

fn random_tau(model: &RobotModel, rng: &mut ChaCha8Rng) -> DVector<f64> {
    model
        .tau_limits()
        .map(|l| rng.gen_range(-1.0..=1.0) * TORQUE_FRACTION * l)
}

fn random_direction(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let d = DVector::from_iterator(dim, (0..dim).map(|_| rng.gen_range(-1.0..=1.0)));
        let n = d.norm();
        if n > 0.1 && n <= 1.0 {
            return d / n;
        }
    }
}

/// A task between two random reachable points, on a rectangle through both.
fn synthetic_scenario(model: &RobotModel, rng: &mut ChaCha8Rng) -> Result<Scenario, BenchError> {
    let (p_i, p_f) = loop {
        let a = model.forward_kinematics(&random_q(model, rng))?;
        let b = model.forward_kinematics(&random_q(model, rng))?;
        if (&a - &b).norm() > 1e-3 {
            break (a, b);
        }
    };
    let (a, b) = (model.embed(&p_i), model.embed(&p_f));
    let u = b - a;
    let least = (0..3).min_by(|&i, &j| u[i].abs().total_cmp(&u[j].abs())).unwrap();
    let w = u.cross(&Vector3::ith(least, 1.0)).normalize();
    let surface = Rectangle::new(a - u * 0.1 - w * 0.5, u * 1.2, w)?;
    let m = model.task_dim();
    let doc = ScenarioDoc {
        model: model.name().to_string(),
        p_i: p_i.as_slice().to_vec(),
        p_f: p_f.as_slice().to_vec(),
        surface,
        duration: 1.0,
        segments: 10,
        objective: Objective::A,
        cone: Some(ConeSpec {
            axis: ConeAxes::Constant(random_direction(m, rng).as_slice().to_vec()),
            half_aperture_deg: CONE_APERTURE_DEG,
            facets: crate::geometry::DEFAULT_CONE_FACETS,
        }),
        payload_mass: 0.0,
        residual_mode: ResidualMode::SymmetricShrink,
        solver: SolverOptions::default(),
    };
    Ok(Scenario::with_model(doc, model.clone())?)
}

fn random_xi(p: &NlpProblem, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let model = p.model();
    let l = &p.layout;
    let mut xi = DVector::zeros(l.len());
    for k in 0..l.mesh_points() {
        l.set(&mut xi, k, Field::Q, &random_q(model, rng));
        if k < l.segments() {
            l.set(&mut xi, k, Field::Tau, &random_tau(model, rng));
        }
    }
    xi
}

/// Times every operation `samples` times at random states drawn from `seed`.
/// Rows: force polytope, residual polytope, inscribed ball, intersection,
/// volume, then g_A through g_F.
pub fn run_bench(model: &RobotModel, samples: usize, seed: u64) -> Result<Vec<BenchRow>, BenchError> {
    if samples == 0 {
        return Err(BenchError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = model.task_dim();
    let origin = DVector::zeros(m);
    let mut t_force = Vec::with_capacity(samples);
    let mut t_residual = Vec::with_capacity(samples);
    let mut t_ball = Vec::with_capacity(samples);
    let mut t_intersect = Vec::with_capacity(samples);
    let mut t_volume = Vec::with_capacity(samples);
    for _ in 0..samples {
        let q = loop {
            let q = random_q(model, &mut rng);
            if !force_context(model, &q)?.is_singular() {
                break q;
            }
        };
        let tau = random_tau(model, &mut rng);
        let cone = Cone::new(
            origin.clone(),
            random_direction(m, &mut rng),
            CONE_APERTURE_DEG.to_radians(),
            crate::geometry::DEFAULT_CONE_FACETS,
        )
        .expect("valid cone");
        let (fp, t) = timed(|| force_polytope(model, &q));
        fp?;
        t_force.push(t);
        let (rp, t) = timed(|| residual_force_polytope(model, &q, &tau, ResidualMode::SymmetricShrink));
        let rp = rp?;
        t_residual.push(t);
        t_ball.push(timed(|| inscribed_radius_at(&rp, &origin)).1);
        let hcone = make_cone(&cone);
        let (inter, t) = timed(|| intersect(&rp, &hcone));
        t_intersect.push(t);
        t_volume.push(timed(|| volume(&inter)).1);
    }
    let mut rows = vec![
        BenchRow::from_times("force_polytope", &t_force),
        BenchRow::from_times("residual_polytope", &t_residual),
        BenchRow::from_times("inscribed_ball", &t_ball),
        BenchRow::from_times("intersection", &t_intersect),
        BenchRow::from_times("volume", &t_volume),
    ];
    let base = synthetic_scenario(model, &mut rng)?;
    for objective in Objective::ALL {
        let p = build_problem(&base.with_objective(objective, None)?)?;
        let times: Vec<f64> = (0..samples)
            .map(|_| {
                let xi = random_xi(&p, &mut rng);
                timed(|| p.objective_value(&xi)).1
            })
            .collect();
        rows.push(BenchRow::from_times(&format!("g_{}", objective.label()), &times));
    }
    Ok(rows)
}

/// CSV with header `operation,mean_us,std_us,samples`.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("operation,mean_us,std_us,samples\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.3},{:.3},{}\n",
            r.operation, r.mean_us, r.std_us, r.samples
        ));
    }
    out
}

/// Mean time of a row by operation name.
pub fn mean_of(rows: &[BenchRow], operation: &str) -> Option<f64> {
    rows.iter().find(|r| r.operation == operation).map(|r| r.mean_us)
}
