//! Small dense NLP solver: equality constraints via an augmented Lagrangian,
//! box bounds via projection, inner minimization by L-BFGS with Armijo
//! backtracking along the projected arc.
//!
//! Built for the trajectory problems in this crate: thousands of variables,
//! cheap function values (a rollout), gradients via adjoint products, no
//! sparse factorization worth carrying. The outer loop updates multipliers
//! with the classic first-order rule and raises the penalty only when the
//! constraint violation stalls.

use crate::error::{Error, Result};

/// Problem interface. Constraints are equalities `c(z) = 0`; inequality needs
/// are expected to be folded into the objective or the bounds by the caller.
pub trait NlpProblem {
    fn num_vars(&self) -> usize;
    fn num_constraints(&self) -> usize;

    /// Per-variable bounds; use infinities for free variables.
    fn bounds(&self, lower: &mut [f64], upper: &mut [f64]);

    fn objective(&self, z: &[f64]) -> f64;

    /// Writes the objective gradient into `grad` (overwrites).
    fn objective_grad(&self, z: &[f64], grad: &mut [f64]);

    /// Writes the constraint values into `c` (overwrites).
    fn constraints(&self, z: &[f64], c: &mut [f64]);

    /// Accumulates the adjoint product `grad += J(z)^T v`.
    fn constraint_jtv(&self, z: &[f64], v: &[f64], grad: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Infinity-norm tolerance on the equality constraints.
    pub constraint_tol: f64,
    /// Infinity-norm tolerance on the projected gradient of the inner model.
    pub grad_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// L-BFGS history length.
    pub memory: usize,
    /// Initial quadratic penalty weight.
    pub mu0: f64,
    /// Penalty multiplier applied when the violation does not drop enough.
    pub mu_growth: f64,
    /// Ceiling on the quadratic penalty weight. Keeps the inner problem
    /// solvable when progress must come from multiplier accumulation instead.
    pub mu_max: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            constraint_tol: 1e-4,
            grad_tol: 1e-5,
            max_outer: 12,
            max_inner: 400,
            memory: 10,
            mu0: 10.0,
            mu_growth: 5.0,
            mu_max: 1e5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub converged: bool,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub objective: f64,
    pub max_violation: f64,
    /// Projected-gradient infinity norm of the final inner model.
    pub grad_norm: f64,
    /// True when the constraint violation never increased between outer
    /// iterations; a useful health signal in logs.
    pub violation_monotone: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn project(z: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..z.len() {
        z[i] = z[i].clamp(lo[i], hi[i]);
    }
}

/// Gradient with components pointing out of an active bound zeroed; its norm
/// is the stationarity measure for box-constrained problems.
fn projected_gradient(z: &[f64], g: &[f64], lo: &[f64], hi: &[f64], out: &mut [f64]) {
    for i in 0..z.len() {
        let blocked_low = z[i] <= lo[i] && g[i] > 0.0;
        let blocked_high = z[i] >= hi[i] && g[i] < 0.0;
        out[i] = if blocked_low || blocked_high { 0.0 } else { g[i] };
    }
}

/// Augmented Lagrangian value at `z` for fixed multipliers and penalty.
struct AlModel<'a, P: NlpProblem> {
    problem: &'a P,
    lambda: &'a [f64],
    mu: f64,
}

impl<P: NlpProblem> AlModel<'_, P> {
    fn value(&self, z: &[f64], c_buf: &mut [f64]) -> f64 {
        let f = self.problem.objective(z);
        if c_buf.is_empty() {
            return f;
        }
        self.problem.constraints(z, c_buf);
        let mut acc = f;
        for (ci, li) in c_buf.iter().zip(self.lambda) {
            acc += li * ci + 0.5 * self.mu * ci * ci;
        }
        acc
    }

    fn gradient(&self, z: &[f64], c_buf: &mut [f64], grad: &mut [f64]) {
        self.problem.objective_grad(z, grad);
        if c_buf.is_empty() {
            return;
        }
        self.problem.constraints(z, c_buf);
        let v: Vec<f64> = c_buf.iter().zip(self.lambda).map(|(c, l)| l + self.mu * c).collect();
        self.problem.constraint_jtv(z, &v, grad);
    }
}

/// Backtracking line search along the projected arc `P(z + step * d)`.
/// Returns the accepted point and its model value, or None when no step gives
/// sufficient decrease.
fn armijo<P: NlpProblem>(
    model: &AlModel<P>,
    z: &[f64],
    d: &[f64],
    grad: &[f64],
    value: f64,
    lo: &[f64],
    hi: &[f64],
    c_buf: &mut [f64],
) -> Option<(Vec<f64>, f64)> {
    let n = z.len();
    let mut step = 1.0;
    let mut z_new = vec![0.0; n];
    for _ in 0..40 {
        for i in 0..n {
            z_new[i] = z[i] + step * d[i];
        }
        project(&mut z_new, lo, hi);
        let moved = z_new.iter().zip(z).any(|(a, b)| a != b);
        if !moved {
            return None;
        }
        let pred: f64 = grad.iter().zip(z_new.iter().zip(z)).map(|(g, (a, b))| g * (a - b)).sum();
        if pred < 0.0 {
            let value_new = model.value(&z_new, c_buf);
            if value_new <= value + 1e-4 * pred {
                return Some((z_new, value_new));
            }
        }
        step *= 0.5;
    }
    None
}

/// Minimizes the box-constrained inner model. Returns (iterations, final
/// projected-gradient norm).
fn lbfgs_inner<P: NlpProblem>(
    model: &AlModel<P>,
    z: &mut Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    opts: &SolveOptions,
    grad_tol: f64,
) -> (usize, f64) {
    let n = z.len();
    let m = model.problem.num_constraints();
    let mut c_buf = vec![0.0; m];
    let mut grad = vec![0.0; n];
    let mut pg = vec![0.0; n];
    let mut hist: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(opts.memory);

    let mut value = model.value(z, &mut c_buf);
    model.gradient(z, &mut c_buf, &mut grad);
    projected_gradient(z, &grad, lo, hi, &mut pg);
    let mut pg_norm = inf_norm(&pg);

    for iter in 0..opts.max_inner {
        if pg_norm <= grad_tol {
            return (iter, pg_norm);
        }

        // Two-loop recursion over stored curvature pairs.
        let mut d: Vec<f64> = grad.clone();
        let mut alphas = vec![0.0; hist.len()];
        for (idx, (s, y, rho)) in hist.iter().enumerate().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas[idx] = a;
        }
        if let Some((s, y, _)) = hist.last() {
            let gamma = dot(s, y) / dot(y, y).max(1e-300);
            for di in d.iter_mut() {
                *di *= gamma;
            }
        }
        for (idx, (s, y, rho)) in hist.iter().enumerate() {
            let b = rho * dot(y, &d);
            let a = alphas[idx];
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        for di in d.iter_mut() {
            *di = -*di;
        }

        // Respect active bounds: kill components that push outward, fall back
        // to steepest descent if nothing useful is left.
        for i in 0..n {
            if (z[i] <= lo[i] && d[i] < 0.0) || (z[i] >= hi[i] && d[i] > 0.0) {
                d[i] = 0.0;
            }
        }
        // Armijo backtracking along the projected arc; if the quasi-Newton
        // direction fails (non-descent, or degenerate after blocking), retry
        // once from steepest descent with a cleared history.
        let mut use_fallback = !(dot(&d, &grad) < 0.0);
        let accepted = loop {
            if use_fallback {
                hist.clear();
                for (di, pgi) in d.iter_mut().zip(&pg) {
                    *di = -*pgi;
                }
            }
            match armijo(model, z, &d, &grad, value, lo, hi, &mut c_buf) {
                Some(res) => break Some(res),
                None if !use_fallback => use_fallback = true,
                None => break None,
            }
        };
        let Some((z_new, value_new)) = accepted else {
            return (iter + 1, pg_norm);
        };

        let mut grad_new = vec![0.0; n];
        model.gradient(&z_new, &mut c_buf, &mut grad_new);
        let s: Vec<f64> = z_new.iter().zip(z.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad_new.iter().zip(grad.iter()).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let ss = dot(&s, &s);
        if sy > 1e-10 * ss.sqrt() * dot(&y, &y).sqrt() {
            if hist.len() == opts.memory {
                hist.remove(0);
            }
            hist.push((s, y, 1.0 / sy));
        }

        *z = z_new;
        value = value_new;
        grad = grad_new;
        projected_gradient(z, &grad, lo, hi, &mut pg);
        pg_norm = inf_norm(&pg);
    }
    (opts.max_inner, pg_norm)
}

/// Solves the problem starting from `z0`. Returns the final iterate and a
/// report; `Err` only on structurally bad input (dimension mismatch, no
/// finite start).
pub fn solve<P: NlpProblem>(problem: &P, z0: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, SolveReport)> {
    let n = problem.num_vars();
    if z0.len() != n {
        return Err(Error::Solver(format!("initial point has {} vars, problem has {n}", z0.len())));
    }
    if z0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("initial point contains non-finite values".into()));
    }
    let m = problem.num_constraints();
    let mut lo = vec![f64::NEG_INFINITY; n];
    let mut hi = vec![f64::INFINITY; n];
    problem.bounds(&mut lo, &mut hi);
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return Err(Error::Solver("inconsistent bounds (lower > upper)".into()));
    }

    let mut z = z0.to_vec();
    project(&mut z, &lo, &hi);

    let mut lambda = vec![0.0; m];
    let mut mu = opts.mu0;
    let mut c = vec![0.0; m];
    let mut total_inner = 0;
    let mut prev_viol = f64::INFINITY;
    let mut violation_monotone = true;
    let mut last_pg = f64::INFINITY;

    // The gradient tolerance is relative to the problem's own scale: the
    // projected gradient at the start point.
    let grad_tol = {
        let model = AlModel { problem, lambda: &lambda, mu };
        let mut g = vec![0.0; n];
        let mut cb = vec![0.0; m];
        model.gradient(&z, &mut cb, &mut g);
        let mut pg = vec![0.0; n];
        projected_gradient(&z, &g, &lo, &hi, &mut pg);
        opts.grad_tol * inf_norm(&pg).max(1.0)
    };

    let mut prev_obj = f64::INFINITY;
    for outer in 0..opts.max_outer {
        let model = AlModel { problem, lambda: &lambda, mu };
        let (inner_iters, pg_norm) = lbfgs_inner(&model, &mut z, &lo, &hi, opts, grad_tol);
        total_inner += inner_iters;
        last_pg = pg_norm;

        let viol = if m > 0 {
            problem.constraints(&z, &mut c);
            inf_norm(&c)
        } else {
            0.0
        };
        if outer > 0 && viol > prev_viol + 1e-12 {
            violation_monotone = false;
        }

        // Done when feasible and either first-order stationary (to working
        // precision) or the objective has stopped moving between multiplier
        // updates, which is as far as this solver will get.
        let obj = problem.objective(&z);
        let stalled = outer > 0 && (prev_obj - obj).abs() <= 1e-3 * obj.abs().max(1.0);
        if std::env::var_os("NLP_TRACE").is_some() {
            let worst = c
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(i, v)| (i, *v))
                .unwrap_or((0, 0.0));
            eprintln!(
                "outer {outer}: obj {obj:.9} dobj {:.3e} viol {viol:.3e} pg {pg_norm:.3e} inner {inner_iters} worst_row {} ({:.3e})",
                prev_obj - obj, worst.0, worst.1
            );
        }
        prev_obj = obj;
        if viol <= opts.constraint_tol && (pg_norm <= grad_tol * 10.0 || stalled) {
            return Ok((
                z.clone(),
                SolveReport {
                    converged: true,
                    outer_iters: outer + 1,
                    inner_iters: total_inner,
                    objective: obj,
                    max_violation: viol,
                    grad_norm: pg_norm,
                    violation_monotone,
                },
            ));
        }
        if m == 0 {
            // No constraints and the inner solver stopped on its own terms.
            break;
        }

        for (li, ci) in lambda.iter_mut().zip(&c) {
            *li += mu * ci;
        }
        // Raise the penalty only while the violation both stalls and still
        // matters; growing it past convergence only poisons conditioning.
        if viol > 0.25 * prev_viol && viol > opts.constraint_tol {
            mu = (mu * opts.mu_growth).min(opts.mu_max);
        }
        prev_viol = viol;
    }

    let viol = if m > 0 {
        problem.constraints(&z, &mut c);
        inf_norm(&c)
    } else {
        0.0
    };
    let converged = viol <= opts.constraint_tol && last_pg <= grad_tol * 10.0;
    Ok((
        z.clone(),
        SolveReport {
            converged,
            outer_iters: opts.max_outer,
            inner_iters: total_inner,
            objective: problem.objective(&z),
            max_violation: viol,
            grad_norm: last_pg,
            violation_monotone,
        },
    ))
}

/// Central-difference check of the analytic derivatives. Returns the largest
/// relative error of (objective gradient, constraint adjoint products) over
/// random probe directions; the probes are deterministic in `seed`.
pub fn check_gradient<P: NlpProblem>(problem: &P, z: &[f64], eps: f64, seed: u64) -> (f64, f64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = problem.num_vars();
    let m = problem.num_constraints();

    let mut grad = vec![0.0; n];
    problem.objective_grad(z, &mut grad);
    let scale_f = grad.iter().fold(1.0f64, |a, g| a.max(g.abs()));

    let mut worst_obj = 0.0f64;
    let mut worst_jtv = 0.0f64;
    let probes = 24.min(n);
    for _ in 0..probes {
        let i = rng.gen_range(0..n);
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[i] += eps;
        zm[i] -= eps;
        let fd = (problem.objective(&zp) - problem.objective(&zm)) / (2.0 * eps);
        worst_obj = worst_obj.max((fd - grad[i]).abs() / scale_f);

        if m > 0 {
            // Probe J^T v against the directional difference of c^T v.
            let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut jtv = vec![0.0; n];
            problem.constraint_jtv(z, &v, &mut jtv);
            let mut cp = vec![0.0; m];
            let mut cm = vec![0.0; m];
            problem.constraints(&zp, &mut cp);
            problem.constraints(&zm, &mut cm);
            let fd_c = (dot(&cp, &v) - dot(&cm, &v)) / (2.0 * eps);
            let scale_c = jtv.iter().fold(1.0f64, |a, g| a.max(g.abs()));
            worst_jtv = worst_jtv.max((fd_c - jtv[i]).abs() / scale_c);
        }
    }
    (worst_obj, worst_jtv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// min 1/2 z'Qz + q'z  s.t.  Az = b, optional box.
    struct Qp {
        q_mat: DMatrix<f64>,
        q_vec: DVector<f64>,
        a_mat: DMatrix<f64>,
        b_vec: DVector<f64>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    }

    impl Qp {
        fn unconstrained(q_mat: DMatrix<f64>, q_vec: DVector<f64>) -> Self {
            let n = q_vec.len();
            Self {
                q_mat,
                q_vec,
                a_mat: DMatrix::zeros(0, n),
                b_vec: DVector::zeros(0),
                lo: vec![f64::NEG_INFINITY; n],
                hi: vec![f64::INFINITY; n],
            }
        }
    }

    impl NlpProblem for Qp {
        fn num_vars(&self) -> usize {
            self.q_vec.len()
        }
        fn num_constraints(&self) -> usize {
            self.b_vec.len()
        }
        fn bounds(&self, lower: &mut [f64], upper: &mut [f64]) {
            lower.copy_from_slice(&self.lo);
            upper.copy_from_slice(&self.hi);
        }
        fn objective(&self, z: &[f64]) -> f64 {
            let zv = DVector::from_column_slice(z);
            (0.5 * zv.transpose() * &self.q_mat * &zv)[(0, 0)] + self.q_vec.dot(&zv)
        }
        fn objective_grad(&self, z: &[f64], grad: &mut [f64]) {
            let zv = DVector::from_column_slice(z);
            let g = &self.q_mat * zv + &self.q_vec;
            grad.copy_from_slice(g.as_slice());
        }
        fn constraints(&self, z: &[f64], c: &mut [f64]) {
            let zv = DVector::from_column_slice(z);
            let cv = &self.a_mat * zv - &self.b_vec;
            c.copy_from_slice(cv.as_slice());
        }
        fn constraint_jtv(&self, _z: &[f64], v: &[f64], grad: &mut [f64]) {
            let vv = DVector::from_column_slice(v);
            let g = self.a_mat.transpose() * vv;
            for (gi, add) in grad.iter_mut().zip(g.as_slice()) {
                *gi += add;
            }
        }
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &m * m.transpose() + DMatrix::identity(n, n) * (n as f64)
    }

    #[test]
    fn unconstrained_quadratic_reaches_the_analytic_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 12;
        let q_mat = random_spd(n, &mut rng);
        let q_vec = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let expected = q_mat.clone().lu().solve(&(-&q_vec)).unwrap();
        let qp = Qp::unconstrained(q_mat, q_vec);
        let (z, report) = solve(&qp, &vec![0.0; n], &SolveOptions::default()).unwrap();
        assert!(report.converged, "{report:?}");
        for i in 0..n {
            assert_relative_eq!(z[i], expected[i], epsilon = 1e-5);
        }
    }

    #[test]
    fn box_bound_clips_a_separable_quadratic() {
        // min 1/2 |z - a|^2 in [0, 1]^n has the componentwise clamp as solution.
        let n = 6;
        let a = [-0.5, 0.2, 1.7, 0.9, -2.0, 0.5];
        let mut qp = Qp::unconstrained(DMatrix::identity(n, n), DVector::from_row_slice(&a.map(|v| -v)));
        qp.lo = vec![0.0; n];
        qp.hi = vec![1.0; n];
        let (z, report) = solve(&qp, &vec![0.5; n], &SolveOptions::default()).unwrap();
        assert!(report.converged);
        for i in 0..n {
            assert_relative_eq!(z[i], a[i].clamp(0.0, 1.0), epsilon = 1e-6);
        }
    }

    #[test]
    fn equality_constrained_quadratic_matches_the_kkt_solution() {
        // Oracle: the KKT system [Q A'; A 0][z; nu] = [-q; b] solved directly.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..5 {
            let n = 10;
            let m = 4;
            let q_mat = random_spd(n, &mut rng);
            let q_vec = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let a_mat = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
            let b_vec = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));

            let mut kkt = DMatrix::zeros(n + m, n + m);
            kkt.view_mut((0, 0), (n, n)).copy_from(&q_mat);
            kkt.view_mut((0, n), (n, m)).copy_from(&a_mat.transpose());
            kkt.view_mut((n, 0), (m, n)).copy_from(&a_mat);
            let mut rhs = DVector::zeros(n + m);
            rhs.rows_mut(0, n).copy_from(&(-&q_vec));
            rhs.rows_mut(n, m).copy_from(&b_vec);
            let sol = kkt.lu().solve(&rhs).expect("KKT system is nonsingular");

            let qp = Qp {
                q_mat,
                q_vec,
                a_mat,
                b_vec,
                lo: vec![f64::NEG_INFINITY; n],
                hi: vec![f64::INFINITY; n],
            };
            let (z, report) = solve(&qp, &vec![0.0; n], &SolveOptions::default()).unwrap();
            assert!(report.converged, "trial {trial}: {report:?}");
            assert!(report.max_violation <= 1e-4);
            for i in 0..n {
                assert_relative_eq!(z[i], sol[i], epsilon = 2e-4);
            }
        }
    }

    struct Rosenbrock {
        bound: f64,
    }

    impl NlpProblem for Rosenbrock {
        fn num_vars(&self) -> usize {
            2
        }
        fn num_constraints(&self) -> usize {
            0
        }
        fn bounds(&self, lower: &mut [f64], upper: &mut [f64]) {
            lower.fill(f64::NEG_INFINITY);
            upper[0] = self.bound;
            upper[1] = f64::INFINITY;
        }
        fn objective(&self, z: &[f64]) -> f64 {
            let (x, y) = (z[0], z[1]);
            (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
        }
        fn objective_grad(&self, z: &[f64], grad: &mut [f64]) {
            let (x, y) = (z[0], z[1]);
            grad[0] = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
            grad[1] = 200.0 * (y - x * x);
        }
        fn constraints(&self, _z: &[f64], _c: &mut [f64]) {}
        fn constraint_jtv(&self, _z: &[f64], _v: &[f64], _grad: &mut [f64]) {}
    }

    #[test]
    fn rosenbrock_valley_converges() {
        let p = Rosenbrock { bound: f64::INFINITY };
        let opts = SolveOptions { max_inner: 2000, ..Default::default() };
        let (z, report) = solve(&p, &[-1.2, 1.0], &opts).unwrap();
        assert!(report.converged, "{report:?}");
        assert_relative_eq!(z[0], 1.0, epsilon = 1e-4);
        assert_relative_eq!(z[1], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn rosenbrock_with_active_bound_sits_on_the_bound() {
        let p = Rosenbrock { bound: 0.5 };
        let opts = SolveOptions { max_inner: 2000, ..Default::default() };
        let (z, _) = solve(&p, &[-1.2, 1.0], &opts).unwrap();
        // Constrained optimum: x pinned at the bound, y = x^2.
        assert_relative_eq!(z[0], 0.5, epsilon = 1e-6);
        assert_relative_eq!(z[1], 0.25, epsilon = 1e-4);
    }

    #[test]
    fn gradient_checker_accepts_consistent_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q_mat = random_spd(8, &mut rng);
        let q_vec = DVector::from_fn(8, |_, _| rng.gen_range(-1.0..1.0));
        let a_mat = DMatrix::from_fn(3, 8, |_, _| rng.gen_range(-1.0..1.0));
        let b_vec = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
        let qp = Qp { q_mat, q_vec, a_mat, b_vec, lo: vec![f64::NEG_INFINITY; 8], hi: vec![f64::INFINITY; 8] };
        let z: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (e_obj, e_jtv) = check_gradient(&qp, &z, 1e-6, 1);
        assert!(e_obj < 1e-6, "objective gradient error {e_obj}");
        assert!(e_jtv < 1e-6, "constraint adjoint error {e_jtv}");
    }

    /// Deliberately wrong gradient; the checker must flag it.
    struct LyingProblem;

    impl NlpProblem for LyingProblem {
        fn num_vars(&self) -> usize {
            3
        }
        fn num_constraints(&self) -> usize {
            0
        }
        fn bounds(&self, lower: &mut [f64], upper: &mut [f64]) {
            lower.fill(f64::NEG_INFINITY);
            upper.fill(f64::INFINITY);
        }
        fn objective(&self, z: &[f64]) -> f64 {
            z.iter().map(|v| v * v).sum()
        }
        fn objective_grad(&self, z: &[f64], grad: &mut [f64]) {
            for (g, v) in grad.iter_mut().zip(z) {
                *g = *v; // missing the factor of two
            }
        }
        fn constraints(&self, _z: &[f64], _c: &mut [f64]) {}
        fn constraint_jtv(&self, _z: &[f64], _v: &[f64], _grad: &mut [f64]) {}
    }

    #[test]
    fn gradient_checker_catches_a_wrong_gradient() {
        let (e_obj, _) = check_gradient(&LyingProblem, &[0.7, -0.3, 1.1], 1e-6, 2);
        assert!(e_obj > 0.1, "checker missed the broken gradient: {e_obj}");
    }

    #[test]
    fn solves_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let q_mat = random_spd(10, &mut rng);
        let q_vec = DVector::from_fn(10, |_, _| rng.gen_range(-1.0..1.0));
        let a_mat = DMatrix::from_fn(4, 10, |_, _| rng.gen_range(-1.0..1.0));
        let b_vec = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
        let qp = Qp {
            q_mat,
            q_vec,
            a_mat,
            b_vec,
            lo: vec![f64::NEG_INFINITY; 10],
            hi: vec![f64::INFINITY; 10],
        };
        let (z1, r1) = solve(&qp, &vec![0.1; 10], &SolveOptions::default()).unwrap();
        let (z2, r2) = solve(&qp, &vec![0.1; 10], &SolveOptions::default()).unwrap();
        assert_eq!(r1.inner_iters, r2.inner_iters);
        for (a, b) in z1.iter().zip(&z2) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let qp = Qp::unconstrained(DMatrix::identity(3, 3), DVector::zeros(3));
        assert!(matches!(solve(&qp, &[0.0; 2], &SolveOptions::default()), Err(Error::Solver(_))));
    }
}
