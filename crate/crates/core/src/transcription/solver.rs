//! Feasible-path reduced-gradient solver for
//! `min f(x)  s.t.  c(x) = 0,  lb ≤ x ≤ ub`.
//!
//! A Levenberg-Marquardt restoration first drives the equalities to a tight
//! tolerance. Each main iteration then takes a quasi-Newton step in the null
//! space of the active constraints, clips it to the box, pulls the trial point
//! back onto `c = 0` with minimum-norm Gauss-Newton corrections and accepts it
//! under an Armijo test on the restored point.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// A point and its constraint values.
type Iterate = (DVector<f64>, DVector<f64>);

/// Problem interface seen by the solver.
#[allow(clippy::len_without_is_empty)]
pub trait Nlp: Sync {
    fn len(&self) -> usize;
    fn bounds(&self) -> (&DVector<f64>, &DVector<f64>);
    fn objective(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn constraints(&self, x: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Total iterations over restoration and optimization.
    pub max_iterations: usize,
    /// Feasibility accepted for the final answer.
    pub feasibility_tol: f64,
    /// Feasibility maintained between iterations.
    pub restoration_tol: f64,
    /// Stationarity threshold relative to `1 + |f|`.
    pub optimality_tol: f64,
    /// Relative objective change counted as no progress.
    pub stall_tol: f64,
    /// Consecutive no-progress iterations before stopping.
    pub stall_iterations: usize,
    /// Largest step in box-scaled units.
    pub max_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            feasibility_tol: 1e-3,
            restoration_tol: 1e-9,
            optimality_tol: 1e-6,
            stall_tol: 1e-9,
            stall_iterations: 6,
            max_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    /// First-order conditions met.
    Optimal,
    /// Feasible, but no further descent could be found.
    Stalled,
    IterationLimit,
    /// Restoration failed to reach the feasibility tolerance.
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SolverOutcome {
    pub x: DVector<f64>,
    pub status: SolverStatus,
    pub iterations: usize,
    /// Iterations spent in the initial restoration phase.
    pub restoration_iterations: usize,
    /// Trace index of the first feasible iterate; entries from here on are
    /// accepted descent iterates.
    pub descent_start: usize,
    /// Objective (minimization form) at the start and after every iteration.
    pub objective_trace: Vec<f64>,
    /// Max absolute constraint residual, aligned with `objective_trace`.
    pub feasibility_trace: Vec<f64>,
    pub n_feval: usize,
    pub n_geval: usize,
}

impl SolverOutcome {
    pub fn converged(&self) -> bool {
        matches!(self.status, SolverStatus::Optimal | SolverStatus::Stalled)
    }
}

struct Run<'a, P: Nlp> {
    nlp: &'a P,
    settings: SolverSettings,
    lb: DVector<f64>,
    ub: DVector<f64>,
    /// Variable scaling: half the box width.
    scale: DVector<f64>,
    n_feval: usize,
    n_geval: usize,
    iterations: usize,
    objective_trace: Vec<f64>,
    feasibility_trace: Vec<f64>,
    descent_start: Option<usize>,
}

pub fn solve_nlp<P: Nlp>(nlp: &P, x0: &DVector<f64>, settings: SolverSettings) -> SolverOutcome {
    let (lb, ub) = nlp.bounds();
    assert_eq!(x0.len(), nlp.len());
    let scale = DVector::from_iterator(
        lb.len(),
        lb.iter().zip(ub.iter()).map(|(l, u)| {
            let w = 0.5 * (u - l);
            if w.is_finite() && w > 1e-9 {
                w
            } else {
                1.0
            }
        }),
    );
    let run = Run {
        nlp,
        settings,
        lb: lb.clone(),
        ub: ub.clone(),
        scale,
        n_feval: 0,
        n_geval: 0,
        iterations: 0,
        objective_trace: Vec::new(),
        feasibility_trace: Vec::new(),
        descent_start: None,
    };
    run.solve(x0)
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.amax()
}

impl<P: Nlp> Run<'_, P> {
    fn finish(self, x: DVector<f64>, status: SolverStatus, restoration_iterations: usize) -> SolverOutcome {
        let descent_start = self.descent_start.unwrap_or(self.objective_trace.len());
        SolverOutcome {
            descent_start,
            x,
            status,
            iterations: self.iterations,
            restoration_iterations,
            objective_trace: self.objective_trace,
            feasibility_trace: self.feasibility_trace,
            n_feval: self.n_feval,
            n_geval: self.n_geval,
        }
    }

    fn clip(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(self.lb.iter().zip(self.ub.iter()))
                .map(|(&v, (&l, &u))| v.max(l).min(u)),
        )
    }

    fn eval(&mut self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        self.n_feval += 1;
        (self.nlp.objective(x), self.nlp.constraints(x))
    }

    fn record(&mut self, f: f64, c: &DVector<f64>) {
        self.objective_trace.push(f);
        self.feasibility_trace.push(max_abs(c));
    }

    fn at_lower(&self, x: &DVector<f64>, i: usize) -> bool {
        x[i] <= self.lb[i] + 1e-12 * self.scale[i]
    }

    fn at_upper(&self, x: &DVector<f64>, i: usize) -> bool {
        x[i] >= self.ub[i] - 1e-12 * self.scale[i]
    }

    fn scaled_jacobian(&mut self, x: &DVector<f64>) -> DMatrix<f64> {
        self.n_geval += 1;
        let mut a = self.nlp.jacobian(x);
        for (j, s) in self.scale.iter().enumerate() {
            a.column_mut(j).scale_mut(*s);
        }
        a
    }

    /// Minimum-norm regularized Gauss-Newton step on the free columns; variables
    /// that would leave the box through an active bound are frozen.
    fn restoration_step(
        &self,
        x: &DVector<f64>,
        a: &DMatrix<f64>,
        c: &DVector<f64>,
        fixed: &[bool],
        mu: f64,
    ) -> Option<DVector<f64>> {
        let n = x.len();
        let mut blocked = fixed.to_vec();
        loop {
            let free: Vec<usize> = (0..n).filter(|&i| !blocked[i]).collect();
            if free.is_empty() {
                return None;
            }
            let af = a.select_columns(&free);
            let mut g = &af * af.transpose();
            let diag_max = g.diagonal().amax().max(1e-300);
            for i in 0..g.nrows() {
                g[(i, i)] += mu * diag_max;
            }
            let w = g.cholesky()?.solve(c);
            let pf = -(af.transpose() * w);
            let mut p = DVector::zeros(n);
            for (k, &i) in free.iter().enumerate() {
                p[i] = pf[k];
            }
            let mut changed = false;
            for &i in &free {
                if (p[i] < 0.0 && self.at_lower(x, i)) || (p[i] > 0.0 && self.at_upper(x, i)) {
                    blocked[i] = true;
                    changed = true;
                }
            }
            if !changed {
                return Some(p);
            }
        }
    }

    /// Drives `c(x)` below `tol`. On failure the last iterate is returned as the error.
    fn restore(
        &mut self,
        mut x: DVector<f64>,
        mut c: DVector<f64>,
        fixed: &[bool],
        max_iter: usize,
        tol: f64,
        mut on_iter: impl FnMut(&mut Self, &DVector<f64>, &DVector<f64>),
    ) -> Result<Iterate, Iterate> {
        let mut mu = 1e-10;
        for _ in 0..max_iter {
            if max_abs(&c) <= tol {
                return Ok((x, c));
            }
            let a = self.scaled_jacobian(&x);
            let Some(p) = self.restoration_step(&x, &a, &c, fixed, mu) else {
                mu *= 100.0;
                if mu > 1e4 {
                    return Err((x, c));
                }
                continue;
            };
            let norm0 = c.norm();
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..12 {
                let xt = self.clip(&(&x + p.component_mul(&self.scale) * alpha));
                self.n_feval += 1;
                let ct = self.nlp.constraints(&xt);
                if ct.norm() < (1.0 - 1e-4 * alpha) * norm0 {
                    accepted = Some((xt, ct));
                    break;
                }
                alpha *= 0.5;
            }
            match accepted {
                Some((xt, ct)) => {
                    x = xt;
                    c = ct;
                    mu = if alpha == 1.0 { (mu * 0.1).max(1e-14) } else { mu * 10.0 };
                    on_iter(self, &x, &c);
                }
                None => {
                    mu *= 100.0;
                    if mu > 1e4 {
                        return Err((x, c));
                    }
                }
            }
        }
        if max_abs(&c) <= tol {
            Ok((x, c))
        } else {
            Err((x, c))
        }
    }

    fn solve(mut self, x0: &DVector<f64>) -> SolverOutcome {
        let settings = self.settings;
        let n = x0.len();
        let (f0, c0) = self.eval(x0);
        self.record(f0, &c0);
        if settings.max_iterations == 0 {
            return self.finish(x0.clone(), SolverStatus::IterationLimit, 0);
        }

        // Phase 1: restoration from the clipped starting point.
        let x = self.clip(x0);
        let (_, c) = self.eval(&x);
        let budget = settings.max_iterations;
        let restored = self.restore(x, c, &vec![false; n], budget, settings.restoration_tol, |run, x, c| {
            run.iterations += 1;
            run.n_feval += 1;
            let f = run.nlp.objective(x);
            run.record(f, c);
        });
        let restoration_iterations = self.iterations;
        let (mut x, mut c) = match restored {
            Ok(point) => point,
            Err((last, _)) => {
                let status = if self.iterations >= budget {
                    SolverStatus::IterationLimit
                } else {
                    SolverStatus::Infeasible
                };
                return self.finish(last, status, restoration_iterations);
            }
        };
        self.n_feval += 1;
        let mut f = self.nlp.objective(&x);
        if self.iterations == 0 {
            self.record(f, &c);
        }
        self.descent_start = Some(self.objective_trace.len() - 1);

        // Phase 2: feasible descent.
        let mut hess = DMatrix::<f64>::identity(n, n);
        let mut hess_is_identity = true;
        let mut prev: Option<(DVector<f64>, DVector<f64>, DMatrix<f64>)> = None; // (s, g, A) in scaled units
        let mut stall = 0;
        let status = loop {
            if self.iterations >= budget {
                break SolverStatus::IterationLimit;
            }
            self.n_geval += 1;
            let gs = self.nlp.gradient(&x).component_mul(&self.scale);
            let a = self.scaled_jacobian(&x);

            // Multipliers over all columns for the quasi-Newton update.
            let lambda_all = least_squares_multipliers(&a, &gs);
            if let Some((s, g_old, a_old)) = prev.take() {
                let y = (&gs - a.transpose() * &lambda_all) - (&g_old - a_old.transpose() * &lambda_all);
                if hess_is_identity {
                    let sy = s.dot(&y);
                    if sy > 0.0 {
                        hess *= sy / s.dot(&s);
                    }
                }
                damped_bfgs_update(&mut hess, &s, &y);
                hess_is_identity = false;
            }

            // Active set: start with every variable on a bound, release the one
            // whose multiplier has the wrong sign until none remains.
            let mut fixed: Vec<bool> = (0..n).map(|i| self.at_lower(&x, i) || self.at_upper(&x, i)).collect();
            let (step, kkt) = loop {
                let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
                let af = a.select_columns(&free);
                let gf = DVector::from_iterator(free.len(), free.iter().map(|&i| gs[i]));
                let lambda = least_squares_multipliers(&af, &gf);
                let r = &gs - a.transpose() * &lambda;
                let mut worst: Option<(usize, f64)> = None;
                for i in (0..n).filter(|&i| fixed[i]) {
                    // At a lower bound the reduced gradient must be ≥ 0, at an upper bound ≤ 0.
                    let v = if self.at_lower(&x, i) { -r[i] } else { r[i] };
                    if v > 0.0 && worst.is_none_or(|(_, w)| v > w) {
                        worst = Some((i, v));
                    }
                }
                let z = null_space(&af);
                let rg = z.transpose() * &gf;
                let kkt = rg.amax().max(worst.map_or(0.0, |w| w.1));
                match worst {
                    Some((i, v)) if v > 1e-3 * rg.amax().max(settings.optimality_tol) => {
                        fixed[i] = false;
                        continue;
                    }
                    _ => {}
                }
                if z.ncols() == 0 {
                    break (DVector::zeros(n), kkt);
                }
                let hf = hess.select_rows(&free).select_columns(&free);
                let mut reduced = z.transpose() * hf * &z;
                reduced = 0.5 * (&reduced + reduced.transpose());
                let pz = match reduced.clone().cholesky() {
                    Some(ch) => -ch.solve(&rg),
                    None => -&rg,
                };
                let pf = &z * pz;
                let mut p = DVector::zeros(n);
                for (k, &i) in free.iter().enumerate() {
                    p[i] = pf[k];
                }
                break (p, kkt);
            };
            if kkt <= settings.optimality_tol * (1.0 + f.abs()) {
                break SolverStatus::Optimal;
            }
            let mut p = step;
            let mut slope = gs.dot(&p);
            if !(slope < 0.0) {
                // Fall back to steepest descent in the same subspace.
                hess = DMatrix::identity(n, n);
                hess_is_identity = true;
                prev = None;
                stall += 1;
                if stall >= settings.stall_iterations {
                    break SolverStatus::Stalled;
                }
                continue;
            }
            let pmax = p.amax();
            if pmax > settings.max_step {
                p *= settings.max_step / pmax;
                slope = gs.dot(&p);
            }

            // Backtracking with restoration of every trial point.
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..25 {
                let xt = self.clip(&(&x + p.component_mul(&self.scale) * alpha));
                self.n_feval += 1;
                let ct = self.nlp.constraints(&xt);
                if let Ok((xr, cr)) = self.restore(xt, ct, &fixed, 20, settings.restoration_tol, |_, _, _| {}) {
                    self.n_feval += 1;
                    let fr = self.nlp.objective(&xr);
                    if fr <= f + 1e-4 * alpha * slope {
                        accepted = Some((xr, cr, fr));
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha * p.amax() < 1e-12 {
                    break;
                }
            }
            self.iterations += 1;
            match accepted {
                Some((xr, cr, fr)) => {
                    let s = (&xr - &x).component_div(&self.scale);
                    let progress = f - fr;
                    prev = Some((s, gs, a));
                    x = xr;
                    c = cr;
                    f = fr;
                    if progress <= settings.stall_tol * (1.0 + f.abs()) {
                        stall += 1;
                    } else {
                        stall = 0;
                    }
                }
                None => {
                    if hess_is_identity {
                        // Even steepest descent fails: a kink or numerical floor.
                        self.record(f, &c);
                        break SolverStatus::Stalled;
                    }
                    stall += 1;
                    if !hess_is_identity {
                        hess = DMatrix::identity(n, n);
                        hess_is_identity = true;
                    }
                    prev = None;
                }
            }
            self.record(f, &c);
            if stall >= settings.stall_iterations {
                break SolverStatus::Stalled;
            }
        };
        let status = if max_abs(&c) > settings.feasibility_tol {
            SolverStatus::Infeasible
        } else {
            status
        };
        self.finish(x, status, restoration_iterations)
    }
}

/// λ minimizing ‖Aᵀλ − g‖ (lightly regularized for dependent rows).
fn least_squares_multipliers(a: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let mut m = a * a.transpose();
    let d = m.diagonal().amax().max(1e-300);
    for i in 0..m.nrows() {
        m[(i, i)] += 1e-12 * d;
    }
    match m.cholesky() {
        Some(ch) => ch.solve(&(a * g)),
        None => DVector::zeros(a.nrows()),
    }
}

/// Orthonormal basis of the null space of `a`.
fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let ata = a.transpose() * a;
    let eig = SymmetricEigen::new(ata);
    let top = eig.eigenvalues.amax().max(1e-300);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| eig.eigenvalues[i] <= 1e-14 * top)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// BFGS update with Powell damping, keeping `h` positive definite.
fn damped_bfgs_update(h: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let hs = &*h * s;
    let shs = s.dot(&hs);
    if !(shs > 1e-300) {
        return;
    }
    let sy = s.dot(y);
    let theta = if sy >= 0.2 * shs { 1.0 } else { 0.8 * shs / (shs - sy) };
    let r = y * theta + &hs * (1.0 - theta);
    let sr = s.dot(&r);
    if !(sr > 1e-300) {
        return;
    }
    *h -= &hs * hs.transpose() / shs;
    *h += &r * r.transpose() / sr;
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// min (x−2)² + (y−1)²  s.t.  x + y = 1, 0 ≤ x ≤ 0.8.
    struct Toy {
        lb: DVector<f64>,
        ub: DVector<f64>,
    }

    impl Nlp for Toy {
        fn len(&self) -> usize {
            2
        }
        fn bounds(&self) -> (&DVector<f64>, &DVector<f64>) {
            (&self.lb, &self.ub)
        }
        fn objective(&self, x: &DVector<f64>) -> f64 {
            (x[0] - 2.0).powi(2) + (x[1] - 1.0).powi(2)
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![2.0 * (x[0] - 2.0), 2.0 * (x[1] - 1.0)])
        }
        fn constraints(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![x[0] + x[1] - 1.0])
        }
        fn jacobian(&self, _: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0])
        }
    }

    fn toy(ub0: f64) -> Toy {
        Toy {
            lb: DVector::from_vec(vec![0.0, -10.0]),
            ub: DVector::from_vec(vec![ub0, 10.0]),
        }
    }

    #[test]
    fn equality_constrained_quadratic() {
        // Unconstrained by the box: x = 1, y = 0.
        let out = solve_nlp(&toy(5.0), &DVector::from_vec(vec![0.0, 0.0]), SolverSettings::default());
        assert!(out.converged(), "{:?}", out.status);
        assert_relative_eq!(out.x, DVector::from_vec(vec![1.0, 0.0]), epsilon = 1e-5);
    }

    #[test]
    fn active_bound() {
        let out = solve_nlp(&toy(0.8), &DVector::from_vec(vec![0.0, 0.0]), SolverSettings::default());
        assert!(out.converged());
        assert_eq!(out.x[0], 0.8);
        assert_relative_eq!(out.x[1], 0.2, epsilon = 1e-9);
    }

    #[test]
    fn bound_released_when_multiplier_flips() {
        // Start on the lower bound of x; the optimum is interior.
        let out = solve_nlp(&toy(5.0), &DVector::from_vec(vec![0.0, 1.0]), SolverSettings::default());
        assert!(out.converged());
        assert_relative_eq!(out.x[0], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn zero_iterations_returns_start() {
        let x0 = DVector::from_vec(vec![3.0, 3.0]);
        let settings = SolverSettings {
            max_iterations: 0,
            ..Default::default()
        };
        let out = solve_nlp(&toy(5.0), &x0, settings);
        assert_eq!(out.x, x0);
        assert!(!out.converged());
        assert_eq!(out.objective_trace.len(), 1);
    }

    /// Rosenbrock on the circle x² + y² = 1.
    struct Circle {
        lb: DVector<f64>,
        ub: DVector<f64>,
    }

    impl Nlp for Circle {
        fn len(&self) -> usize {
            2
        }
        fn bounds(&self) -> (&DVector<f64>, &DVector<f64>) {
            (&self.lb, &self.ub)
        }
        fn objective(&self, x: &DVector<f64>) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ])
        }
        fn constraints(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![x[0] * x[0] + x[1] * x[1] - 1.0])
        }
        fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]])
        }
    }

    #[test]
    fn nonlinear_constraint_path_stays_feasible() {
        let nlp = Circle {
            lb: DVector::from_vec(vec![-2.0, -2.0]),
            ub: DVector::from_vec(vec![2.0, 2.0]),
        };
        let out = solve_nlp(&nlp, &DVector::from_vec(vec![0.9, 0.1]), SolverSettings::default());
        assert!(out.converged(), "{:?}", out.status);
        // Stationary point of the objective on the circle, found by a fine scan.
        let best = (0..200_000)
            .map(|i| {
                let t = i as f64 / 200_000.0 * std::f64::consts::TAU;
                let p = DVector::from_vec(vec![t.cos(), t.sin()]);
                (nlp.objective(&p), p)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        assert!((nlp.objective(&out.x) - best.0).abs() < 1e-6);
        let start = out.descent_start;
        for w in out.objective_trace[start..].windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(out.feasibility_trace.last().unwrap() <= &1e-9);
    }
}
