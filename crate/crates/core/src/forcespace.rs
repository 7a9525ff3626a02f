//! Force polytopes, residual force polytopes and the scalar robustness metrics
//! derived from them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    inscribed_radius_at, intersect, make_cone, map_box, volume, AxisBox, Cone, GeometryError, Polytope,
};
use crate::model::{ModelError, RobotModel};

/// Singular values below `σ_max · PINV_RTOL` are treated as zero.
pub const PINV_RTOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ForceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("joint {joint}: nominal torque {tau} exceeds its limit {limit}")]
    InfeasibleNominal { joint: usize, tau: f64, limit: f64 },
    #[error("{what}: expected length {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// How the nominal torque reduces the joint force box.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    /// `[-(τ_lim - |τ|), τ_lim - |τ|]`: a centered box inside the joint force box.
    #[default]
    SymmetricShrink,
    /// `[-τ_lim - τ, τ_lim - τ]`: the exact set of admissible torque increments.
    ExactTranslate,
}

/// Jacobian data at one configuration.
#[derive(Debug, Clone)]
pub struct ForceContext {
    /// m × n end-effector Jacobian.
    pub j: DMatrix<f64>,
    /// m × n pseudoinverse of Jᵀ.
    pub jpinv_t: DMatrix<f64>,
    pub rank: usize,
    pub ee_position: DVector<f64>,
}

impl ForceContext {
    pub fn from_jacobian(j: DMatrix<f64>, ee_position: DVector<f64>) -> Self {
        let (m, n) = j.shape();
        let svd = j.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let cutoff = smax * PINV_RTOL;
        let u = svd.u.as_ref().unwrap();
        let v_t = svd.v_t.as_ref().unwrap();
        let mut jpinv_t = DMatrix::zeros(m, n);
        let mut rank = 0;
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s > cutoff && s > 0.0 {
                rank += 1;
                // Jᵀ = V Σ Uᵀ, so (Jᵀ)⁺ = U Σ⁺ Vᵀ.
                jpinv_t += u.column(k) * v_t.row(k) / s;
            }
        }
        Self {
            j,
            jpinv_t,
            rank,
            ee_position,
        }
    }

    pub fn task_dim(&self) -> usize {
        self.j.nrows()
    }

    pub fn dof(&self) -> usize {
        self.j.ncols()
    }

    pub fn is_singular(&self) -> bool {
        self.rank < self.task_dim()
    }
}

pub fn force_context(model: &RobotModel, q: &DVector<f64>) -> Result<ForceContext, ForceError> {
    let j = model.jacobian(q)?;
    let ee = model.forward_kinematics(q)?;
    Ok(ForceContext::from_jacobian(j, ee))
}

/// f = (Jᵀ)⁺ τ.
pub fn task_force_from_torques(ctx: &ForceContext, tau: &DVector<f64>) -> DVector<f64> {
    &ctx.jpinv_t * tau
}

/// τ = Jᵀ f.
pub fn torques_for_task_force(ctx: &ForceContext, f: &DVector<f64>) -> DVector<f64> {
    ctx.j.transpose() * f
}

pub fn joint_force_box(model: &RobotModel) -> AxisBox {
    AxisBox::symmetric(&model.tau_limits())
}

pub fn residual_box(tau_lim: &DVector<f64>, tau_nom: &DVector<f64>, mode: ResidualMode) -> Result<AxisBox, ForceError> {
    if tau_nom.len() != tau_lim.len() {
        return Err(ForceError::Dimension {
            what: "tau_nom",
            expected: tau_lim.len(),
            got: tau_nom.len(),
        });
    }
    for (i, (&t, &l)) in tau_nom.iter().zip(tau_lim.iter()).enumerate() {
        if !(t.abs() <= l) {
            return Err(ForceError::InfeasibleNominal {
                joint: i + 1,
                tau: t,
                limit: l,
            });
        }
    }
    Ok(match mode {
        ResidualMode::SymmetricShrink => {
            let r = tau_lim - tau_nom.abs();
            AxisBox::symmetric(&r)
        }
        ResidualMode::ExactTranslate => AxisBox {
            lb: -tau_lim - tau_nom,
            ub: tau_lim - tau_nom,
        },
    })
}

pub fn force_polytope_at(ctx: &ForceContext, tau_lim: &DVector<f64>) -> Polytope {
    map_box(&ctx.jpinv_t, &AxisBox::symmetric(tau_lim))
}

pub fn residual_polytope_at(
    ctx: &ForceContext,
    tau_lim: &DVector<f64>,
    tau_nom: &DVector<f64>,
    mode: ResidualMode,
) -> Result<Polytope, ForceError> {
    Ok(map_box(&ctx.jpinv_t, &residual_box(tau_lim, tau_nom, mode)?))
}

pub fn force_polytope(model: &RobotModel, q: &DVector<f64>) -> Result<Polytope, ForceError> {
    Ok(force_polytope_at(&force_context(model, q)?, &model.tau_limits()))
}

pub fn residual_force_polytope(
    model: &RobotModel,
    q: &DVector<f64>,
    tau_nom: &DVector<f64>,
    mode: ResidualMode,
) -> Result<Polytope, ForceError> {
    residual_polytope_at(&force_context(model, q)?, &model.tau_limits(), tau_nom, mode)
}

/// w′ = √det(J W² Jᵀ) with W = diag(1/τ_lim).
pub fn scaled_manipulability_at(ctx: &ForceContext, tau_lim: &DVector<f64>) -> f64 {
    let w = DMatrix::from_diagonal(&tau_lim.map(|t| 1.0 / t));
    let jw = &ctx.j * w;
    let sv = jw.singular_values();
    let smax = sv.max();
    if smax == 0.0 || sv.iter().any(|&s| s <= smax * PINV_RTOL) {
        return 0.0;
    }
    sv.iter().product()
}

pub fn scaled_manipulability(model: &RobotModel, q: &DVector<f64>) -> Result<f64, ForceError> {
    Ok(scaled_manipulability_at(&force_context(model, q)?, &model.tau_limits()))
}

/// Radius of the largest zero-centered ball inside the force polytope, or
/// inside the residual force polytope when a nominal torque is given.
pub fn metric_ball_at(
    ctx: &ForceContext,
    tau_lim: &DVector<f64>,
    tau_nom: Option<&DVector<f64>>,
    mode: ResidualMode,
) -> Result<f64, ForceError> {
    let p = match tau_nom {
        Some(t) => residual_polytope_at(ctx, tau_lim, t, mode)?,
        None => force_polytope_at(ctx, tau_lim),
    };
    Ok(inscribed_radius_at(&p, &DVector::zeros(ctx.task_dim())))
}

pub fn metric_ball(
    model: &RobotModel,
    q: &DVector<f64>,
    tau_nom: Option<&DVector<f64>>,
    mode: ResidualMode,
) -> Result<f64, ForceError> {
    metric_ball_at(&force_context(model, q)?, &model.tau_limits(), tau_nom, mode)
}

/// Volume of the residual force polytope inside a disturbance cone.
pub fn metric_cone_volume_at(
    ctx: &ForceContext,
    tau_lim: &DVector<f64>,
    tau_nom: &DVector<f64>,
    mode: ResidualMode,
    cone: &Cone,
) -> Result<f64, ForceError> {
    if cone.dim() != ctx.task_dim() {
        return Err(ForceError::Dimension {
            what: "cone",
            expected: ctx.task_dim(),
            got: cone.dim(),
        });
    }
    let p = residual_polytope_at(ctx, tau_lim, tau_nom, mode)?;
    if p.is_degenerate() {
        return Ok(0.0);
    }
    Ok(volume(&intersect(&p, &make_cone(cone))))
}

pub fn metric_cone_volume(
    model: &RobotModel,
    q: &DVector<f64>,
    tau_nom: &DVector<f64>,
    mode: ResidualMode,
    cone: &Cone,
) -> Result<f64, ForceError> {
    metric_cone_volume_at(&force_context(model, q)?, &model.tau_limits(), tau_nom, mode, cone)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_models::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    fn bent() -> DVector<f64> {
        dv(&[0.0, FRAC_PI_2])
    }

    fn unit_2r() -> RobotModel {
        planar2r_limits([1.0, 1.0])
    }

    #[test]
    fn context_of_bent_2r() {
        let ctx = force_context(&planar2r(), &bent()).unwrap();
        assert_relative_eq!(
            ctx.j,
            DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, 1.0, 0.0]),
            epsilon = 1e-12
        );
        // Exact inverse of Jᵀ = [[−1, 1], [−1, 0]].
        assert_relative_eq!(
            ctx.jpinv_t,
            DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, -1.0]),
            epsilon = 1e-12
        );
        assert_eq!(ctx.rank, 2);
        assert_relative_eq!(
            task_force_from_torques(&ctx, &dv(&[1.0, 0.0])),
            dv(&[0.0, 1.0]),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            torques_for_task_force(&ctx, &dv(&[0.0, 1.0])),
            dv(&[1.0, 0.0]),
            epsilon = 1e-12
        );
        assert_eq!(task_force_from_torques(&ctx, &dv(&[0.0, 0.0])), dv(&[0.0, 0.0]));
        assert_eq!(torques_for_task_force(&ctx, &dv(&[0.0, 0.0])), dv(&[0.0, 0.0]));
    }

    #[test]
    fn identity_context() {
        let ctx = ForceContext::from_jacobian(DMatrix::identity(2, 2), dv(&[0.0, 0.0]));
        assert_relative_eq!(ctx.jpinv_t, DMatrix::identity(2, 2), epsilon = 1e-15);
        assert_relative_eq!(
            task_force_from_torques(&ctx, &dv(&[3.0, 4.0])),
            dv(&[3.0, 4.0]),
            epsilon = 1e-15
        );
        let p = force_polytope_at(&ctx, &dv(&[1.0, 1.0]));
        assert_relative_eq!(volume(&p), 4.0, epsilon = 1e-12);
        assert_relative_eq!(scaled_manipulability_at(&ctx, &dv(&[1.0, 1.0])), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn stretched_2r_is_rank_one() {
        let model = unit_2r();
        let q = dv(&[0.0, 0.0]);
        assert_eq!(force_context(&model, &q).unwrap().rank, 1);
        assert!(force_polytope(&model, &q).unwrap().is_degenerate());
        assert_eq!(metric_ball(&model, &q, None, ResidualMode::default()).unwrap(), 0.0);
        assert_eq!(scaled_manipulability(&model, &q).unwrap(), 0.0);
        let cone = Cone::new(dv(&[0.0, 0.0]), dv(&[0.0, 1.0]), FRAC_PI_4, 8).unwrap();
        assert_eq!(
            metric_cone_volume(&model, &q, &dv(&[0.0, 0.0]), ResidualMode::default(), &cone).unwrap(),
            0.0
        );
    }

    #[test]
    fn boxes() {
        let model = planar2r_limits([5.0, 3.0]);
        let b = joint_force_box(&model);
        assert_eq!(b.lb, dv(&[-5.0, -3.0]));
        assert_eq!(b.ub, dv(&[5.0, 3.0]));
        let lim = dv(&[1.0, 1.0]);
        let zero = dv(&[0.0, 0.0]);
        for mode in [ResidualMode::SymmetricShrink, ResidualMode::ExactTranslate] {
            assert_eq!(residual_box(&lim, &zero, mode).unwrap(), AxisBox::symmetric(&lim));
        }
        let r = residual_box(&lim, &dv(&[0.5, 0.0]), ResidualMode::SymmetricShrink).unwrap();
        assert_eq!((r.lb, r.ub), (dv(&[-0.5, -1.0]), dv(&[0.5, 1.0])));
        let r = residual_box(&lim, &dv(&[0.5, 0.0]), ResidualMode::ExactTranslate).unwrap();
        assert_eq!((r.lb, r.ub), (dv(&[-1.5, -1.0]), dv(&[0.5, 1.0])));
        let r = residual_box(&dv(&[1.0]), &dv(&[1.0]), ResidualMode::SymmetricShrink).unwrap();
        assert_eq!((r.lb[0], r.ub[0]), (0.0, 0.0));
        match residual_box(&lim, &dv(&[0.0, -1.5]), ResidualMode::SymmetricShrink) {
            Err(ForceError::InfeasibleNominal { joint: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bent_2r_polytopes_and_metrics() {
        let model = unit_2r();
        let q = bent();
        let p = force_polytope(&model, &q).unwrap();
        let expected = [dv(&[-1.0, 0.0]), dv(&[1.0, 2.0]), dv(&[1.0, 0.0]), dv(&[-1.0, -2.0])];
        let verts = &p.vrep().unwrap().vertices;
        assert_eq!(verts.len(), 4);
        assert!(expected.iter().all(|e| verts.iter().any(|v| (v - e).amax() < 1e-12)));
        let mode = ResidualMode::SymmetricShrink;
        assert_relative_eq!(
            metric_ball(&model, &q, None, mode).unwrap(),
            0.5f64.sqrt(),
            epsilon = 1e-12
        );
        let nom = dv(&[0.5, 0.0]);
        assert_relative_eq!(
            metric_ball(&model, &q, Some(&nom), mode).unwrap(),
            0.5 / 2f64.sqrt(),
            epsilon = 1e-12
        );
        let zero = dv(&[0.0, 0.0]);
        assert_eq!(residual_force_polytope(&model, &q, &zero, mode).unwrap(), p);
        let full = residual_force_polytope(&model, &q, &dv(&[1.0, 1.0]), mode).unwrap();
        assert!(full.is_degenerate());
        assert_eq!(inscribed_radius_at(&full, &zero), 0.0);
    }

    #[test]
    fn scaled_manipulability_of_bent_2r() {
        let q = bent();
        assert_relative_eq!(scaled_manipulability(&unit_2r(), &q).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            scaled_manipulability(&planar2r_limits([2.0, 1.0]), &q).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        // Reordering joints permutes Jacobian columns and limits together.
        let ctx = force_context(&planar2r_limits([2.0, 1.0]), &q).unwrap();
        let swapped = ForceContext::from_jacobian(ctx.j.clone().select_columns(&[1, 0]), ctx.ee_position.clone());
        assert_relative_eq!(
            scaled_manipulability_at(&swapped, &dv(&[1.0, 2.0])),
            0.5,
            epsilon = 1e-12
        );
    }

    /// Monte-Carlo membership oracle over the bounding box of the residual polytope.
    fn mc_cone_area(p: &Polytope, cone_h: &crate::geometry::HalfSpaceRep, samples: usize) -> f64 {
        let verts = &p.vrep().unwrap().vertices;
        let lo = DVector::from_fn(2, |i, _| verts.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min));
        let hi = DVector::from_fn(2, |i, _| verts.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max));
        let h = p.hrep().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let hits = (0..samples)
            .filter(|_| {
                let x = dv(&[rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])]);
                h.contains(&x, 0.0) && cone_h.contains(&x, 0.0)
            })
            .count();
        (&hi - &lo).product() * hits as f64 / samples as f64
    }

    #[test]
    fn cone_volume_matches_monte_carlo() {
        let model = unit_2r();
        let q = bent();
        let nom = dv(&[0.5, 0.0]);
        let cone = Cone::new(dv(&[0.0, 0.0]), dv(&[0.0, 1.0]), FRAC_PI_4, 8).unwrap();
        for mode in [ResidualMode::SymmetricShrink, ResidualMode::ExactTranslate] {
            let exact = metric_cone_volume(&model, &q, &nom, mode, &cone).unwrap();
            let p = residual_force_polytope(&model, &q, &nom, mode).unwrap();
            let mc = mc_cone_area(&p, &make_cone(&cone), 1_000_000);
            assert!(exact > 0.0);
            assert!((exact - mc).abs() / exact < 0.01, "{mode:?}: {exact} vs {mc}");
        }
    }

    #[test]
    fn cone_volume_limits() {
        let model = unit_2r();
        let q = bent();
        let nom = dv(&[0.3, -0.2]);
        let mode = ResidualMode::SymmetricShrink;
        let full = volume(&residual_force_polytope(&model, &q, &nom, mode).unwrap());
        // Two opposite cones at the center cover the whole polytope as the aperture nears pi/2.
        let mut last = 0.0;
        for theta in [0.3, 0.8, 1.2, 1.5, 1.56, std::f64::consts::FRAC_PI_2 - 1e-4] {
            let up = Cone::new(dv(&[0.0, 0.0]), dv(&[0.0, 1.0]), theta, 8).unwrap();
            let down = Cone::new(dv(&[0.0, 0.0]), dv(&[0.0, -1.0]), theta, 8).unwrap();
            let total = metric_cone_volume(&model, &q, &nom, mode, &up).unwrap()
                + metric_cone_volume(&model, &q, &nom, mode, &down).unwrap();
            assert!(total >= last - 1e-12);
            last = total;
        }
        assert!((last - full).abs() / full < 1e-3, "{last} vs {full}");
        // A cone whose apex sits far outside and points away misses everything.
        let away = Cone::new(dv(&[10.0, 10.0]), dv(&[1.0, 0.0]), 0.3, 8).unwrap();
        let p = residual_force_polytope(&model, &q, &nom, mode).unwrap();
        assert_eq!(volume(&intersect(&p, &make_cone(&away))), 0.0);
    }

    fn random_q(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.gen_range(-2.5..2.5))
    }

    #[test]
    fn residual_is_subset_of_force_polytope() {
        let model = crate::model::builtin_model("spatial7").unwrap();
        let planar = crate::model::builtin_model("planar3").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..1000 {
            let m = if trial % 2 == 0 { &model } else { &planar };
            let n = m.dof();
            let q = random_q(&mut rng, n);
            let lim = m.tau_limits();
            let nom = DVector::from_fn(n, |i, _| lim[i] * rng.gen_range(-1.0..1.0));
            let ctx = force_context(m, &q).unwrap();
            let p = force_polytope_at(&ctx, &lim);
            let r = residual_polytope_at(&ctx, &lim, &nom, ResidualMode::SymmetricShrink).unwrap();
            let h = p.hrep().unwrap();
            let scale = lim.amax();
            for v in &r.vrep().unwrap().vertices {
                assert!(h.contains(v, 1e-8 * scale));
            }
            let mode = ResidualMode::SymmetricShrink;
            let rb = metric_ball_at(&ctx, &lim, Some(&nom), mode).unwrap();
            let fb = metric_ball_at(&ctx, &lim, None, mode).unwrap();
            assert!(rb <= fb + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn shrink_is_monotone(q in proptest::collection::vec(-2.5f64..2.5, 3), w in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let model = crate::model::builtin_model("planar3").unwrap();
            let ctx = force_context(&model, &dv(&q)).unwrap();
            let lim = model.tau_limits();
            let nom = DVector::from_fn(3, |i, _| lim[i] * w[i]);
            let mut last = f64::INFINITY;
            for k in 0..=10 {
                let alpha = k as f64 / 10.0;
                let r = metric_ball_at(&ctx, &lim, Some(&(&nom * alpha)), ResidualMode::SymmetricShrink).unwrap();
                prop_assert!(r <= last + 1e-12);
                last = r;
            }
        }

        #[test]
        fn pseudoinverse_projection(q in proptest::collection::vec(-3.0f64..3.0, 7), f in proptest::collection::vec(-50.0f64..50.0, 3)) {
            let model = crate::model::builtin_model("spatial7").unwrap();
            let ctx = force_context(&model, &dv(&q)).unwrap();
            let f = dv(&f);
            let jtf = torques_for_task_force(&ctx, &f);
            let back = torques_for_task_force(&ctx, &task_force_from_torques(&ctx, &jtf));
            prop_assert!((back - &jtf).amax() <= 1e-8 * jtf.amax().max(1.0));
            // The row space of Jᵀ is preserved: (Jᵀ)⁺ Jᵀ acts as the identity on it.
            if ctx.rank == 3 {
                prop_assert!((task_force_from_torques(&ctx, &jtf) - &f).amax() <= 1e-8 * f.amax().max(1.0));
            }
        }

        #[test]
        fn manipulability_scales_with_limits(a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.1f64..10.0) {
            let q = dv(&[a, b]);
            let w1 = scaled_manipulability(&planar2r_limits([1.0, 1.0]), &q).unwrap();
            let wc = scaled_manipulability(&planar2r_limits([c, c]), &q).unwrap();
            prop_assert!((wc - w1 / (c * c)).abs() <= 1e-10);
        }

        #[test]
        fn singular_configurations_have_zero_metrics(a in -3.0f64..3.0, flip in proptest::bool::ANY) {
            let q = dv(&[a, if flip { std::f64::consts::PI } else { 0.0 }]);
            let model = unit_2r();
            prop_assert_eq!(metric_ball(&model, &q, None, ResidualMode::default()).unwrap(), 0.0);
            let cone = Cone::new(dv(&[0.0, 0.0]), dv(&[0.0, 1.0]), 0.5, 8).unwrap();
            prop_assert_eq!(metric_cone_volume(&model, &q, &dv(&[0.1, 0.0]), ResidualMode::default(), &cone).unwrap(), 0.0);
        }
    }
}
