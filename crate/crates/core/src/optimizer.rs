//! Turns a geometric path into a dynamically feasible trajectory.
//!
//! Two stages. `build_reference` time-parameterizes the path with a
//! trapezoidal speed profile (per direction-run, so the speed passes through
//! zero at every cusp) and reads poses off the path. `optimize` then solves a
//! direct transcription: states and controls at every knot are decision
//! variables, one-step integration defects are equality constraints, actuator
//! limits are bounds, and obstacles enter as a hinge penalty on the signed
//! distance sampled at each knot.
//!
//! Long horizons are solved in overlapping windows. Each window pins its
//! initial state to the previous window's result at the stitch knot, so the
//! assembled trajectory has the same defect guarantees as a single solve.

use crate::dynamics::{
    step_rk4, step_rk4_with_sensitivity, ControlInput, HullParams, VesselState,
};
use crate::error::{Error, Result};
use crate::grid::{DistanceField, OccupancyGrid, UnknownPolicy};
use crate::hybrid_astar::{Direction, PlannedPath};
use crate::nlp::{self, NlpProblem, SolveOptions, SolveReport};
use crate::trajectory::{CostWeights, Provenance, Trajectory};

#[derive(Debug, Clone)]
pub struct ReferenceOptions {
    /// Target speed along straight runs (m/s).
    pub cruise_speed: f64,
    /// Knot spacing of the produced trajectory (s).
    pub dt: f64,
    /// Dwell at rest appended after arrival (s). The tail gives solvers and
    /// trackers room to bleed residual motion before the endpoint instead of
    /// having to hit it exactly on the final step.
    pub settle_time: f64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self { cruise_speed: 1.6, dt: 0.1, settle_time: 1.0 }
    }
}

/// One maximal stretch of the path with constant travel direction.
struct DirectionRun {
    s_start: f64,
    s_end: f64,
    forward: bool,
}

fn direction_runs(path: &PlannedPath) -> Vec<DirectionRun> {
    let mut runs: Vec<DirectionRun> = Vec::new();
    for (pose, s) in path.poses.iter().zip(&path.s).skip(1) {
        let fwd = pose.direction == Direction::Forward;
        match runs.last_mut() {
            Some(run) if run.forward == fwd => run.s_end = *s,
            _ => {
                let start = runs.last().map(|r| r.s_end).unwrap_or(0.0);
                runs.push(DirectionRun { s_start: start, s_end: *s, forward: fwd });
            }
        }
    }
    runs
}

/// Trapezoidal profile over one run: accelerate, cruise, decelerate, with a
/// triangular fallback when the run is too short to reach cruise speed.
struct SpeedProfile {
    t_acc: f64,
    t_cruise: f64,
    t_dec: f64,
    v_peak: f64,
    a_acc: f64,
    a_dec: f64,
    length: f64,
}

impl SpeedProfile {
    fn new(length: f64, cruise: f64, a_acc: f64, a_dec: f64) -> Self {
        let d_full = 0.5 * cruise * cruise * (1.0 / a_acc + 1.0 / a_dec);
        if length >= d_full {
            Self {
                t_acc: cruise / a_acc,
                t_cruise: (length - d_full) / cruise,
                t_dec: cruise / a_dec,
                v_peak: cruise,
                a_acc,
                a_dec,
                length,
            }
        } else {
            let v_peak = (2.0 * length * a_acc * a_dec / (a_acc + a_dec)).sqrt();
            Self { t_acc: v_peak / a_acc, t_cruise: 0.0, t_dec: v_peak / a_dec, v_peak, a_acc, a_dec, length }
        }
    }

    fn duration(&self) -> f64 {
        self.t_acc + self.t_cruise + self.t_dec
    }

    /// (distance covered, speed) at local time `t`.
    fn at(&self, t: f64) -> (f64, f64) {
        if t <= 0.0 {
            return (0.0, 0.0);
        }
        if t < self.t_acc {
            return (0.5 * self.a_acc * t * t, self.a_acc * t);
        }
        let d_acc = 0.5 * self.a_acc * self.t_acc * self.t_acc;
        if t < self.t_acc + self.t_cruise {
            let tc = t - self.t_acc;
            return (d_acc + self.v_peak * tc, self.v_peak);
        }
        if t < self.duration() {
            let td = t - self.t_acc - self.t_cruise;
            return (
                d_acc + self.v_peak * self.t_cruise + self.v_peak * td - 0.5 * self.a_dec * td * td,
                self.v_peak - self.a_dec * td,
            );
        }
        (self.length, 0.0)
    }
}

/// Builds a time-parameterized reference trajectory along a planned path.
/// Speeds ramp with the vessel's actual thrust-to-mass limits, pass through
/// zero at direction switches, and the result ends at rest on the final pose.
pub fn build_reference(
    path: &PlannedPath,
    params: &HullParams,
    opts: &ReferenceOptions,
) -> Result<Trajectory> {
    if path.poses.len() < 2 || path.length <= 0.0 {
        return Err(Error::Planning("reference needs a path with positive length".into()));
    }
    if !(opts.dt > 0.0) || !(opts.cruise_speed > 0.0) {
        return Err(Error::Planning("reference dt and cruise speed must be positive".into()));
    }
    if !(opts.settle_time >= 0.0) {
        return Err(Error::Planning("reference settle time must not be negative".into()));
    }
    let cruise = opts.cruise_speed.min(params.u_max);
    // Net acceleration available at cruise drag, and braking with full
    // reverse thrust; both bounded away from zero to keep profiles finite.
    let a_acc = ((params.tau_u_max - params.d11 * cruise) / params.m11).max(0.05);
    let a_dec = (params.tau_u_min.abs() / params.m11).max(0.05);

    let runs = direction_runs(path);
    let profiles: Vec<SpeedProfile> = runs
        .iter()
        .map(|r| SpeedProfile::new(r.s_end - r.s_start, cruise, a_acc, a_dec))
        .collect();
    let total_time: f64 = profiles.iter().map(|p| p.duration()).sum();
    let n_steps = ((total_time + opts.settle_time) / opts.dt).ceil() as usize + 1;

    let mut states = Vec::with_capacity(n_steps + 1);
    let mut speeds = Vec::with_capacity(n_steps + 1);
    for k in 0..=n_steps {
        let t = k as f64 * opts.dt;
        // Locate the run containing t.
        let mut t_left = t;
        let mut s_abs = path.length;
        let mut speed = 0.0;
        let mut forward = runs.last().map(|r| r.forward).unwrap_or(true);
        for (run, prof) in runs.iter().zip(&profiles) {
            if t_left <= prof.duration() {
                let (d, v) = prof.at(t_left);
                s_abs = run.s_start + d;
                speed = v;
                forward = run.forward;
                break;
            }
            t_left -= prof.duration();
        }
        let pose = path.pose_at_s(s_abs);
        let u = if forward { speed } else { -speed };
        states.push(VesselState::new(pose.x, pose.y, pose.psi, u, 0.0, 0.0));
        speeds.push(u);
    }

    // Heading rate from the sampled headings; controls from the steady-state
    // inverse so the CSV carries a plausible feedforward.
    let n = states.len();
    let mut out_states = states.clone();
    for k in 0..n {
        let r = if k + 1 < n {
            crate::angle::angle_diff(states[k + 1].psi, states[k].psi) / opts.dt
        } else {
            0.0
        };
        out_states[k].r = r.clamp(-params.r_max, params.r_max);
    }
    let mut controls = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let du = (speeds[k + 1] - speeds[k]) / opts.dt;
        let tau_u = params.m11 * du + params.d11 * speeds[k];
        let dr = (out_states[k + 1].r - out_states[k].r) / opts.dt;
        let tau_r = params.m33 * dr + params.d33 * out_states[k].r;
        controls.push(params.clamp_input(ControlInput::new(tau_u, tau_r)));
    }

    let traj = Trajectory { dt: opts.dt, states: out_states, controls, provenance: Provenance::Initial };
    traj.validate()?;
    Ok(traj)
}

/// Obstacle context for the optimizer: a signed-distance field for the soft
/// penalty plus the grid it came from for the final hard check.
pub struct Surroundings<'a> {
    pub field: &'a DistanceField,
    pub grid: &'a OccupancyGrid,
    pub policy: UnknownPolicy,
}

/// Direct-transcription problem over one window of knots.
///
/// Decision vector: `[X_1 .. X_{n-1}, tau_0 .. tau_{n-2}]` with `X_0` pinned
/// to `x0`. Equalities: one six-row integration defect per step, plus an
/// optional five-row terminal pin on pose, surge, and yaw rate. Sway is
/// deliberately left out of the pin: no actuator drives it directly, so its
/// residual can only bleed off through damping and an exact zero at a fixed
/// knot is unreachable; the tracking cost takes care of it instead. Heading
/// rows wrap, so defects near the cut line behave.
pub struct TrajectoryNlp<'a> {
    pub params: &'a HullParams,
    pub dt: f64,
    pub x0: VesselState,
    /// Reference states, one per knot (`ref_states[0]` corresponds to `x0`).
    pub ref_states: &'a [VesselState],
    /// Reference controls, one per step; deviations from these are penalized.
    /// Planning passes zeros (minimal effort), tracking passes the plan.
    pub tau_ref: Vec<ControlInput>,
    pub weights: CostWeights,
    /// Terminal equality on pose, surge, and yaw rate when present; the
    /// unactuated sway component is penalized, not pinned.
    pub xf: Option<VesselState>,
    pub obstacle: Option<ObstaclePenalty<'a>>,
    /// Anchors the first control's smoothness term (the control applied just
    /// before this window).
    pub prev_tau: Option<ControlInput>,
}

pub struct ObstaclePenalty<'a> {
    pub field: &'a DistanceField,
    pub margin: f64,
    pub weight: f64,
}

fn diff6(a: &VesselState, b: &VesselState) -> [f64; 6] {
    [
        a.x - b.x,
        a.y - b.y,
        crate::angle::angle_diff(a.psi, b.psi),
        a.u - b.u,
        a.v - b.v,
        a.r - b.r,
    ]
}

impl<'a> TrajectoryNlp<'a> {
    pub fn n_knots(&self) -> usize {
        self.ref_states.len()
    }

    fn state_offset(&self, i: usize) -> usize {
        debug_assert!(i >= 1);
        (i - 1) * 6
    }

    fn control_offset(&self, i: usize) -> usize {
        (self.n_knots() - 1) * 6 + i * 2
    }

    fn state_at(&self, z: &[f64], i: usize) -> VesselState {
        if i == 0 {
            self.x0
        } else {
            let o = self.state_offset(i);
            VesselState::new(z[o], z[o + 1], z[o + 2], z[o + 3], z[o + 4], z[o + 5])
        }
    }

    fn control_at(&self, z: &[f64], i: usize) -> ControlInput {
        let o = self.control_offset(i);
        ControlInput::new(z[o], z[o + 1])
    }

    /// Packs explicit states and controls into a decision vector.
    pub fn pack(&self, states: &[VesselState], controls: &[ControlInput]) -> Vec<f64> {
        let n = self.n_knots();
        assert_eq!(states.len(), n);
        assert_eq!(controls.len(), n - 1);
        let mut z = vec![0.0; self.num_vars()];
        for i in 1..n {
            let o = self.state_offset(i);
            let s = &states[i];
            z[o..o + 6].copy_from_slice(&[s.x, s.y, s.psi, s.u, s.v, s.r]);
        }
        for (i, c) in controls.iter().enumerate() {
            let o = self.control_offset(i);
            z[o] = c.tau_u;
            z[o + 1] = c.tau_r;
        }
        z
    }

    /// Unpacks a decision vector into a trajectory starting at `x0`.
    pub fn unpack(&self, z: &[f64]) -> Trajectory {
        let n = self.n_knots();
        let mut states = Vec::with_capacity(n);
        states.push(self.x0);
        for i in 1..n {
            states.push(self.state_at(z, i));
        }
        let controls = (0..n - 1).map(|i| self.control_at(z, i)).collect();
        Trajectory { dt: self.dt, states, controls, provenance: Provenance::Optimized }
    }
}

impl NlpProblem for TrajectoryNlp<'_> {
    fn num_vars(&self) -> usize {
        (self.n_knots() - 1) * 8
    }

    fn num_constraints(&self) -> usize {
        (self.n_knots() - 1) * 6 + if self.xf.is_some() { 5 } else { 0 }
    }

    fn bounds(&self, lower: &mut [f64], upper: &mut [f64]) {
        lower.fill(f64::NEG_INFINITY);
        upper.fill(f64::INFINITY);
        for i in 0..self.n_knots() - 1 {
            let o = self.control_offset(i);
            lower[o] = self.params.tau_u_min;
            upper[o] = self.params.tau_u_max;
            lower[o + 1] = -self.params.tau_r_max;
            upper[o + 1] = self.params.tau_r_max;
        }
    }

    fn objective(&self, z: &[f64]) -> f64 {
        let n = self.n_knots();
        let w = &self.weights;
        let mut j = 0.0;
        for i in 1..n {
            let xi = self.state_at(z, i);
            let d = diff6(&xi, &self.ref_states[i]);
            for k in 0..6 {
                j += w.w_x[k] * d[k] * d[k];
            }
            if let Some(obs) = &self.obstacle {
                let (sd, _) = obs.field.sample(xi.x, xi.y);
                let h = (obs.margin - sd).max(0.0);
                j += obs.weight * h * h;
            }
        }
        for i in 0..n - 1 {
            let tau = self.control_at(z, i);
            let dtau = [tau.tau_u - self.tau_ref[i].tau_u, tau.tau_r - self.tau_ref[i].tau_r];
            j += w.w_tau[0] * dtau[0] * dtau[0] + w.w_tau[1] * dtau[1] * dtau[1];
            let prev = if i == 0 {
                match self.prev_tau {
                    Some(p) => p,
                    None => continue,
                }
            } else {
                self.control_at(z, i - 1)
            };
            let du = [tau.tau_u - prev.tau_u, tau.tau_r - prev.tau_r];
            j += w.w_u[0] * du[0] * du[0] + w.w_u[1] * du[1] * du[1];
        }
        j
    }

    fn objective_grad(&self, z: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        let n = self.n_knots();
        let w = &self.weights;
        for i in 1..n {
            let xi = self.state_at(z, i);
            let d = diff6(&xi, &self.ref_states[i]);
            let o = self.state_offset(i);
            for k in 0..6 {
                grad[o + k] += 2.0 * w.w_x[k] * d[k];
            }
            if let Some(obs) = &self.obstacle {
                let (sd, g) = obs.field.sample(xi.x, xi.y);
                let h = (obs.margin - sd).max(0.0);
                if h > 0.0 {
                    grad[o] -= 2.0 * obs.weight * h * g[0];
                    grad[o + 1] -= 2.0 * obs.weight * h * g[1];
                }
            }
        }
        for i in 0..n - 1 {
            let tau = self.control_at(z, i);
            let o = self.control_offset(i);
            grad[o] += 2.0 * w.w_tau[0] * (tau.tau_u - self.tau_ref[i].tau_u);
            grad[o + 1] += 2.0 * w.w_tau[1] * (tau.tau_r - self.tau_ref[i].tau_r);
            let prev = if i == 0 {
                match self.prev_tau {
                    Some(p) => p,
                    None => continue,
                }
            } else {
                self.control_at(z, i - 1)
            };
            let du = [tau.tau_u - prev.tau_u, tau.tau_r - prev.tau_r];
            grad[o] += 2.0 * w.w_u[0] * du[0];
            grad[o + 1] += 2.0 * w.w_u[1] * du[1];
            if i > 0 {
                let po = self.control_offset(i - 1);
                grad[po] -= 2.0 * w.w_u[0] * du[0];
                grad[po + 1] -= 2.0 * w.w_u[1] * du[1];
            }
        }
    }

    fn constraints(&self, z: &[f64], c: &mut [f64]) {
        let n = self.n_knots();
        for i in 0..n - 1 {
            let xi = self.state_at(z, i);
            let tau = self.control_at(z, i);
            let pred = step_rk4(&xi, &tau, self.params, self.dt);
            let next = self.state_at(z, i + 1);
            c[i * 6..i * 6 + 6].copy_from_slice(&diff6(&next, &pred));
        }
        if let Some(xf) = &self.xf {
            let last = self.state_at(z, n - 1);
            let base = (n - 1) * 6;
            c[base] = last.x - xf.x;
            c[base + 1] = last.y - xf.y;
            c[base + 2] = crate::angle::angle_diff(last.psi, xf.psi);
            c[base + 3] = last.u - xf.u;
            c[base + 4] = last.r - xf.r;
        }
    }

    fn constraint_jtv(&self, z: &[f64], v: &[f64], grad: &mut [f64]) {
        let n = self.n_knots();
        for i in 0..n - 1 {
            let xi = self.state_at(z, i);
            let tau = self.control_at(z, i);
            let (_, phi_x, phi_tau) = step_rk4_with_sensitivity(&xi, &tau, self.params, self.dt);
            let vi = nalgebra::Vector6::from_column_slice(&v[i * 6..i * 6 + 6]);

            let o_next = self.state_offset(i + 1);
            for k in 0..6 {
                grad[o_next + k] += vi[k];
            }
            if i >= 1 {
                let back = phi_x.transpose() * vi;
                let o = self.state_offset(i);
                for k in 0..6 {
                    grad[o + k] -= back[k];
                }
            }
            let back_tau = phi_tau.transpose() * vi;
            let o = self.control_offset(i);
            grad[o] -= back_tau[0];
            grad[o + 1] -= back_tau[1];
        }
        if self.xf.is_some() {
            let o = self.state_offset(n - 1);
            let base = (n - 1) * 6;
            // Pin rows touch [x, y, psi, u, r]; state slot 4 (sway) is free.
            for (row, slot) in [(0, 0), (1, 1), (2, 2), (3, 3), (4, 5)] {
                grad[o + slot] += v[base + row];
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub weights: CostWeights,
    pub solver: SolveOptions,
    /// Desired clearance from obstacles (m); violations are penalized
    /// quadratically.
    pub obstacle_margin: f64,
    pub obstacle_weight: f64,
    /// Hard acceptance gate on the worst integration defect of the result.
    pub defect_tol: f64,
    /// Maximum knots per solve window.
    pub window: usize,
    /// Knots shared between consecutive windows.
    pub overlap: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            weights: CostWeights::planning(),
            // Trajectory refinement is the heavyweight consumer of the
            // solver; give it room to grind down defects near obstacles.
            solver: SolveOptions { max_inner: 1200, max_outer: 24, ..SolveOptions::default() },
            obstacle_margin: 1.0,
            obstacle_weight: 100.0,
            defect_tol: 1e-3,
            window: 200,
            overlap: 40,
        }
    }
}

/// Feasible-by-construction warm start: chase the reference velocities with
/// the inverse dynamics and roll the model forward.
pub fn rollout_warm_start(
    x0: &VesselState,
    reference: &[VesselState],
    params: &HullParams,
    dt: f64,
) -> (Vec<VesselState>, Vec<ControlInput>) {
    let n = reference.len();
    let mut states = Vec::with_capacity(n);
    let mut controls = Vec::with_capacity(n - 1);
    let mut cur = *x0;
    states.push(cur);
    for i in 0..n - 1 {
        let du = (reference[i + 1].u - cur.u) / dt;
        let dr = (reference[i + 1].r - cur.r) / dt;
        let tau = params.clamp_input(ControlInput::new(
            params.m11 * du + params.d11 * cur.u - params.m22 * cur.v * cur.r,
            params.m33 * dr + params.d33 * cur.r + (params.m22 - params.m11) * cur.u * cur.v,
        ));
        cur = step_rk4(&cur, &tau, params, dt);
        states.push(cur);
        controls.push(tau);
    }
    (states, controls)
}

/// Optimizes a reference trajectory into a dynamically consistent one.
/// The first state is pinned exactly; the final pose, surge, and yaw rate are
/// pinned while residual sway bleeds through the rest tail. Obstacles, when
/// given, are penalized during the solve and hard-checked afterwards.
pub fn optimize(
    reference: &Trajectory,
    params: &HullParams,
    surroundings: Option<&Surroundings>,
    opts: &OptimizeOptions,
) -> Result<(Trajectory, Vec<SolveReport>)> {
    reference.validate()?;
    params.validate()?;
    if opts.window < 3 || opts.overlap + 2 > opts.window {
        return Err(Error::Solver(format!(
            "window/overlap of {}/{} leaves no room to advance",
            opts.window, opts.overlap
        )));
    }
    let n = reference.states.len();
    let dt = reference.dt;

    let mut states: Vec<VesselState> = vec![VesselState::at_pose(0.0, 0.0, 0.0); n];
    let mut controls: Vec<ControlInput> = vec![ControlInput::new(0.0, 0.0); n - 1];
    states[0] = reference.states[0];

    let mut reports = Vec::new();
    let mut a = 0usize; // first knot of the current window
    loop {
        let b = (a + opts.window - 1).min(n - 1);
        let is_last = b == n - 1;
        let ref_slice = &reference.states[a..=b];
        let problem = TrajectoryNlp {
            params,
            dt,
            x0: states[a],
            ref_states: ref_slice,
            tau_ref: vec![ControlInput::new(0.0, 0.0); ref_slice.len() - 1],
            weights: opts.weights.clone(),
            xf: is_last.then(|| *reference.states.last().unwrap()),
            obstacle: surroundings.map(|s| ObstaclePenalty {
                field: s.field,
                margin: opts.obstacle_margin,
                weight: opts.obstacle_weight,
            }),
            prev_tau: (a > 0).then(|| controls[a - 1]),
        };
        let (warm_states, warm_controls) = rollout_warm_start(&states[a], ref_slice, params, dt);
        let z0 = problem.pack(&warm_states, &warm_controls);
        let (z, report) = nlp::solve(&problem, &z0, &opts.solver)?;
        let window_traj = problem.unpack(&z);
        reports.push(report);

        // Keep knots up to the stitch point; the overlap tail is provisional
        // and will be re-optimized by the next window.
        let keep_until = if is_last { b } else { b - opts.overlap };
        for i in a..=keep_until {
            states[i] = window_traj.states[i - a];
        }
        for i in a..keep_until {
            controls[i] = window_traj.controls[i - a];
        }
        if is_last {
            break;
        }
        a = keep_until;
    }

    let traj = Trajectory { dt, states, controls, provenance: Provenance::Optimized };
    traj.validate()?;
    let (at, defect) = traj.worst_defect(params);
    if defect > opts.defect_tol {
        return Err(Error::Solver(format!(
            "optimized trajectory defect {defect:.3e} at knot {at} of {} exceeds tolerance {:.1e}",
            traj.states.len(),
            opts.defect_tol
        )));
    }
    if let Some(s) = surroundings {
        for (i, st) in traj.states.iter().enumerate() {
            if s.grid.point_blocked(st.x, st.y, s.policy) {
                return Err(Error::Collision(format!(
                    "optimized trajectory enters a blocked cell at knot {i} ({:.2}, {:.2})",
                    st.x, st.y
                )));
            }
        }
    }
    Ok((traj, reports))
}
