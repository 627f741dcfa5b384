//! Three-degree-of-freedom surge/sway/yaw model of a twin-hull vessel with
//! differential thrust.
//!
//! The body-frame momentum balance is
//!
//! ```text
//! m11 * du = tau_u + m22 * v * r - d11 * u
//! m22 * dv =       - m11 * u * r - d22 * v
//! m33 * dr = tau_r - (m22 - m11) * u * v - d33 * r
//! ```
//!
//! with kinematics `dx = u cos(psi) - v sin(psi)`, `dy = u sin(psi) + v cos(psi)`,
//! `dpsi = r`. The off-diagonal terms are skew-symmetric: they move kinetic
//! energy between axes but never create it, so the unforced vessel always loses
//! energy through the linear damping. `kinetic_energy` plus the passivity test
//! below pin that property down.
//!
//! Sway has no actuator; the vessel is under-actuated and every planner layer
//! above this module has to respect that.

use nalgebra::{SMatrix, Vector6};

use crate::angle::wrap_angle;
use crate::error::{Error, Result};
use crate::trajectory::{Provenance, Trajectory};

pub type StateVec = Vector6<f64>;
pub type StateJacobian = SMatrix<f64, 6, 6>;
pub type InputJacobian = SMatrix<f64, 6, 2>;

/// Planar vessel state. `psi` is kept in (-pi, pi]; `u`, `v`, `r` are
/// body-frame surge, sway and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VesselState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
}

impl VesselState {
    pub fn new(x: f64, y: f64, psi: f64, u: f64, v: f64, r: f64) -> Self {
        Self { x, y, psi: wrap_angle(psi), u, v, r }
    }

    /// At-rest state at a pose.
    pub fn at_pose(x: f64, y: f64, psi: f64) -> Self {
        Self::new(x, y, psi, 0.0, 0.0, 0.0)
    }

    pub fn to_vector(self) -> StateVec {
        Vector6::new(self.x, self.y, self.psi, self.u, self.v, self.r)
    }

    pub fn from_vector(v: &StateVec) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|c| c.is_finite())
    }
}

/// Combined actuation: net surge force `tau_u` [N] and yaw moment `tau_r` [N m].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub tau_u: f64,
    pub tau_r: f64,
}

impl ControlInput {
    pub fn new(tau_u: f64, tau_r: f64) -> Self {
        Self { tau_u, tau_r }
    }
}

/// Individual thruster forces, port (`t1`) and starboard (`t2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrusterPair {
    pub t1: f64,
    pub t2: f64,
}

/// Inertia, damping, geometry and actuation limits of one hull configuration.
///
/// `m11/m22/m33` include added mass, `d11/d22/d33` are linear damping
/// coefficients, `prop_separation` is the lateral distance between the two
/// propellers. Defaults describe a 2 m electric catamaran.
#[derive(Debug, Clone, Copy, PartialEq)]
#[allow(non_snake_case)]
pub struct HullParams {
    pub m11: f64,
    pub m22: f64,
    pub m33: f64,
    pub d11: f64,
    pub d22: f64,
    pub d33: f64,
    pub prop_separation: f64,
    pub u_max: f64,
    pub r_max: f64,
    pub tau_u_min: f64,
    pub tau_u_max: f64,
    pub tau_r_max: f64,
}

impl Default for HullParams {
    fn default() -> Self {
        Self {
            m11: 85.28,
            m22: 162.5,
            m33: 41.4,
            d11: 77.55,
            d22: 162.5,
            d33: 45.26,
            prop_separation: 0.395,
            u_max: 2.0,
            r_max: 0.8,
            tau_u_min: -80.0,
            tau_u_max: 160.0,
            tau_r_max: 60.0,
        }
    }
}

const HULL_KEYS: [&str; 12] = [
    "m11", "m22", "m33", "d11", "d22", "d33", "prop_separation", "u_max", "r_max", "tau_u_min",
    "tau_u_max", "tau_r_max",
];

impl HullParams {
    /// Checks positivity and bound ordering; returns the offending field name.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m11", self.m11),
            ("m22", self.m22),
            ("m33", self.m33),
            ("d11", self.d11),
            ("d22", self.d22),
            ("d33", self.d33),
            ("prop_separation", self.prop_separation),
            ("u_max", self.u_max),
            ("r_max", self.r_max),
            ("tau_u_max", self.tau_u_max),
            ("tau_r_max", self.tau_r_max),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Parse(format!("hull parameter {name} must be positive, got {value}")));
            }
        }
        if !self.tau_u_min.is_finite() || self.tau_u_min >= self.tau_u_max {
            return Err(Error::Parse(format!(
                "hull parameter tau_u_min ({}) must be below tau_u_max ({})",
                self.tau_u_min, self.tau_u_max
            )));
        }
        Ok(())
    }

    pub(crate) fn set_key(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "m11" => self.m11 = value,
            "m22" => self.m22 = value,
            "m33" => self.m33 = value,
            "d11" => self.d11 = value,
            "d22" => self.d22 = value,
            "d33" => self.d33 = value,
            "prop_separation" => self.prop_separation = value,
            "u_max" => self.u_max = value,
            "r_max" => self.r_max = value,
            "tau_u_min" => self.tau_u_min = value,
            "tau_u_max" => self.tau_u_max = value,
            "tau_r_max" => self.tau_r_max = value,
            other => return Err(Error::Parse(format!("unknown hull parameter key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key = number` lines ('#' starts a comment). All twelve keys are
    /// required; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut params = HullParams::default();
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("hull file line {}: expected `key = number`", lineno + 1)))?;
            let key = key.trim();
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("hull file line {}: bad number for `{key}`", lineno + 1)))?;
            params.set_key(key, value)?;
            seen.insert(key.to_string());
        }
        for key in HULL_KEYS {
            if !seen.contains(key) {
                return Err(Error::Parse(format!("hull file: missing key `{key}`")));
            }
        }
        params.validate()?;
        Ok(params)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("hull file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Clips a commanded input to the actuation box.
    pub fn clamp_input(&self, input: ControlInput) -> ControlInput {
        ControlInput {
            tau_u: input.tau_u.clamp(self.tau_u_min, self.tau_u_max),
            tau_r: input.tau_r.clamp(-self.tau_r_max, self.tau_r_max),
        }
    }
}

/// Body-frame kinetic energy `0.5 * (m11 u^2 + m22 v^2 + m33 r^2)`.
pub fn kinetic_energy(state: &VesselState, params: &HullParams) -> f64 {
    0.5 * (params.m11 * state.u * state.u
        + params.m22 * state.v * state.v
        + params.m33 * state.r * state.r)
}

/// Continuous-time state derivative.
pub fn state_derivative(state: &VesselState, input: &ControlInput, params: &HullParams) -> StateVec {
    let (sp, cp) = state.psi.sin_cos();
    let (u, v, r) = (state.u, state.v, state.r);
    Vector6::new(
        u * cp - v * sp,
        u * sp + v * cp,
        r,
        (input.tau_u + params.m22 * v * r - params.d11 * u) / params.m11,
        (-params.m11 * u * r - params.d22 * v) / params.m22,
        (input.tau_r - (params.m22 - params.m11) * u * v - params.d33 * r) / params.m33,
    )
}

/// Jacobian of `state_derivative` with respect to the state.
pub fn state_jacobian(state: &VesselState, params: &HullParams) -> StateJacobian {
    let (sp, cp) = state.psi.sin_cos();
    let (u, v, r) = (state.u, state.v, state.r);
    let mut j = StateJacobian::zeros();
    // dx row
    j[(0, 2)] = -u * sp - v * cp;
    j[(0, 3)] = cp;
    j[(0, 4)] = -sp;
    // dy row
    j[(1, 2)] = u * cp - v * sp;
    j[(1, 3)] = sp;
    j[(1, 4)] = cp;
    // dpsi row
    j[(2, 5)] = 1.0;
    // du row
    j[(3, 3)] = -params.d11 / params.m11;
    j[(3, 4)] = params.m22 * r / params.m11;
    j[(3, 5)] = params.m22 * v / params.m11;
    // dv row
    j[(4, 3)] = -params.m11 * r / params.m22;
    j[(4, 4)] = -params.d22 / params.m22;
    j[(4, 5)] = -params.m11 * u / params.m22;
    // dr row
    j[(5, 3)] = -(params.m22 - params.m11) * v / params.m33;
    j[(5, 4)] = -(params.m22 - params.m11) * u / params.m33;
    j[(5, 5)] = -params.d33 / params.m33;
    j
}

/// Jacobian of `state_derivative` with respect to the input (state independent).
pub fn input_jacobian(params: &HullParams) -> InputJacobian {
    let mut j = InputJacobian::zeros();
    j[(3, 0)] = 1.0 / params.m11;
    j[(5, 1)] = 1.0 / params.m33;
    j
}

fn derivative_vec(x: &StateVec, input: &ControlInput, params: &HullParams) -> StateVec {
    let state = VesselState { x: x[0], y: x[1], psi: x[2], u: x[3], v: x[4], r: x[5] };
    state_derivative(&state, input, params)
}

/// One classic Runge-Kutta step with the input held constant over `dt`.
/// The heading is re-wrapped after the step.
pub fn step_rk4(state: &VesselState, input: &ControlInput, params: &HullParams, dt: f64) -> VesselState {
    debug_assert!(dt > 0.0, "step_rk4 needs dt > 0");
    let x = state.to_vector();
    let k1 = derivative_vec(&x, input, params);
    let k2 = derivative_vec(&(x + k1 * (dt * 0.5)), input, params);
    let k3 = derivative_vec(&(x + k2 * (dt * 0.5)), input, params);
    let k4 = derivative_vec(&(x + k3 * dt), input, params);
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    VesselState::from_vector(&next)
}

/// `step_rk4` together with the exact sensitivities of the step map:
/// `phi_x = d(next)/d(state)` and `phi_tau = d(next)/d(input)`, obtained by
/// differentiating each stage in turn.
pub fn step_rk4_with_sensitivity(
    state: &VesselState,
    input: &ControlInput,
    params: &HullParams,
    dt: f64,
) -> (VesselState, StateJacobian, InputJacobian) {
    let x = state.to_vector();
    let b = input_jacobian(params);
    let eye = StateJacobian::identity();

    let k1 = derivative_vec(&x, input, params);
    let a1 = state_jacobian(state, params);
    let dk1_dx = a1;
    let dk1_du = b;

    let x2 = x + k1 * (dt * 0.5);
    let s2 = VesselState::from_vector(&x2);
    let k2 = derivative_vec(&x2, input, params);
    let a2 = state_jacobian(&s2, params);
    let dk2_dx = a2 * (eye + dk1_dx * (dt * 0.5));
    let dk2_du = b + a2 * (dk1_du * (dt * 0.5));

    let x3 = x + k2 * (dt * 0.5);
    let s3 = VesselState::from_vector(&x3);
    let k3 = derivative_vec(&x3, input, params);
    let a3 = state_jacobian(&s3, params);
    let dk3_dx = a3 * (eye + dk2_dx * (dt * 0.5));
    let dk3_du = b + a3 * (dk2_du * (dt * 0.5));

    let x4 = x + k3 * dt;
    let s4 = VesselState::from_vector(&x4);
    let k4 = derivative_vec(&x4, input, params);
    let a4 = state_jacobian(&s4, params);
    let dk4_dx = a4 * (eye + dk3_dx * dt);
    let dk4_du = b + a4 * (dk3_du * dt);

    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let phi_x = eye + (dk1_dx + dk2_dx * 2.0 + dk3_dx * 2.0 + dk4_dx) * (dt / 6.0);
    let phi_tau = (dk1_du + dk2_du * 2.0 + dk3_du * 2.0 + dk4_du) * (dt / 6.0);
    (VesselState::from_vector(&next), phi_x, phi_tau)
}

/// Splits a net command into per-propeller forces.
pub fn allocate_thrusters(input: &ControlInput, params: &HullParams) -> ThrusterPair {
    let b = params.prop_separation;
    ThrusterPair { t1: 0.5 * (input.tau_u + input.tau_r / b), t2: 0.5 * (input.tau_u - input.tau_r / b) }
}

/// Inverse of `allocate_thrusters`.
pub fn combine_thrusters(pair: &ThrusterPair, params: &HullParams) -> ControlInput {
    ControlInput { tau_u: pair.t1 + pair.t2, tau_r: (pair.t1 - pair.t2) * params.prop_separation }
}

/// Rolls the dynamics forward under a piecewise-constant control sequence.
/// The result has `controls.len() + 1` states sampled every `dt`.
pub fn simulate(
    x0: &VesselState,
    controls: &[ControlInput],
    params: &HullParams,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::Parse(format!("simulate: dt must be positive, got {dt}")));
    }
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(*x0);
    let mut current = *x0;
    for (i, input) in controls.iter().enumerate() {
        current = step_rk4(&current, input, params, dt);
        if !current.is_finite() {
            return Err(Error::Solver(format!("simulate: state became non-finite at step {i}")));
        }
        states.push(current);
    }
    Ok(Trajectory { dt, states, controls: controls.to_vec(), provenance: Provenance::Initial })
}
