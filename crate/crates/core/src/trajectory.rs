//! Time-parameterized state/control sequences and the metrics reported by the
//! benchmark harness.

use std::path::Path;

use crate::angle::angle_diff;
use crate::dynamics::{step_rk4, ControlInput, HullParams, VesselState};
use crate::error::{Error, Result};
use crate::hybrid_astar::PlannedPath;

/// Where a trajectory came from. Not serialized; CSV round trips default to
/// `Initial`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Time-parameterized search path, not yet optimized.
    Initial,
    /// Output of the direct-transcription refinement.
    Optimized,
    /// Closed-loop simulation log.
    Executed,
}

/// Uniformly sampled trajectory: `states.len() == controls.len() + 1`, knot `i`
/// sits at time `i * dt` and `controls[i]` acts over `[i*dt, (i+1)*dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<VesselState>,
    pub controls: Vec<ControlInput>,
    pub provenance: Provenance,
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,x,y,psi,u,v,r,tau_u,tau_r";

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Parse(format!("trajectory dt must be positive, got {}", self.dt)));
        }
        if self.states.len() < 2 {
            return Err(Error::Parse(format!("trajectory needs at least 2 knots, got {}", self.states.len())));
        }
        if self.controls.len() + 1 != self.states.len() {
            return Err(Error::Parse(format!(
                "trajectory has {} states but {} controls; expected one control per step",
                self.states.len(),
                self.controls.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.states.len() - 1) as f64
    }

    /// Knot index for a wall time, `round(t/dt)` clamped to the valid range.
    pub fn index_at_time(&self, t: f64) -> usize {
        let idx = (t / self.dt).round();
        if idx <= 0.0 {
            0
        } else {
            (idx as usize).min(self.states.len() - 1)
        }
    }

    /// State at a wall time (clamped knot lookup; holds the final state).
    pub fn state_at_time(&self, t: f64) -> VesselState {
        self.states[self.index_at_time(t)]
    }

    /// Control at a knot index; zero beyond the last applied control.
    pub fn control_at(&self, idx: usize) -> ControlInput {
        self.controls.get(idx).copied().unwrap_or_default()
    }

    /// Planar arc length of the state sequence.
    pub fn length(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt())
            .sum()
    }

    /// Largest per-component defect between each knot and the integrated
    /// previous knot. Heading rows are compared on the circle.
    pub fn max_defect(&self, params: &HullParams) -> f64 {
        self.worst_defect(params).1
    }

    /// Knot index and magnitude of the largest single-step integration
    /// defect; `(0, 0.0)` for a trajectory without steps.
    pub fn worst_defect(&self, params: &HullParams) -> (usize, f64) {
        let mut worst: f64 = 0.0;
        let mut at = 0usize;
        for i in 0..self.controls.len() {
            let pred = step_rk4(&self.states[i], &self.controls[i], params, self.dt);
            let next = &self.states[i + 1];
            let diffs = [
                next.x - pred.x,
                next.y - pred.y,
                angle_diff(next.psi, pred.psi),
                next.u - pred.u,
                next.v - pred.v,
                next.r - pred.r,
            ];
            for d in diffs {
                if d.abs() > worst {
                    worst = d.abs();
                    at = i;
                }
            }
        }
        (at, worst)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.states.len() * 96);
        out.push_str(TRAJECTORY_CSV_HEADER);
        out.push('\n');
        for (i, s) in self.states.iter().enumerate() {
            let c = self.control_at(i); // final knot carries zeros
            out.push_str(&format!(
                "{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}\n",
                i as f64 * self.dt,
                s.x,
                s.y,
                s.psi,
                s.u,
                s.v,
                s.r,
                c.tau_u,
                c.tau_r
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("trajectory csv: empty file".into()))?;
        if header.trim() != TRAJECTORY_CSV_HEADER {
            return Err(Error::Parse(format!(
                "trajectory csv: expected header `{TRAJECTORY_CSV_HEADER}`, got `{}`",
                header.trim()
            )));
        }
        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut controls = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse(format!("trajectory csv row {}: bad number", lineno + 2)))?;
            if fields.len() != 9 {
                return Err(Error::Parse(format!(
                    "trajectory csv row {}: expected 9 fields, got {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            times.push(fields[0]);
            states.push(VesselState::new(fields[1], fields[2], fields[3], fields[4], fields[5], fields[6]));
            controls.push(ControlInput::new(fields[7], fields[8]));
        }
        if states.len() < 2 {
            return Err(Error::Parse("trajectory csv: needs at least 2 rows".into()));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(Error::Parse(format!("trajectory csv: non-increasing time column, dt = {dt}")));
        }
        for (i, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-6 {
                return Err(Error::Parse(format!(
                    "trajectory csv row {}: non-uniform spacing {} (expected {dt})",
                    i + 3,
                    w[1] - w[0]
                )));
            }
        }
        controls.pop(); // final-row control columns are padding
        let traj = Trajectory { dt, states, controls, provenance: Provenance::Initial };
        traj.validate()?;
        Ok(traj)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("trajectory csv {}: {e}", path.display())))?;
        Self::parse_csv(&text)
    }
}

/// Diagonal weights of the transcription objective: state error, control
/// magnitude (or control error when a control reference exists) and control
/// rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub w_x: [f64; 6],
    pub w_tau: [f64; 2],
    pub w_u: [f64; 2],
}

impl CostWeights {
    /// Weights for the offline trajectory refinement.
    pub fn planning() -> Self {
        Self { w_x: [1.0, 1.0, 0.5, 0.1, 0.1, 0.1], w_tau: [1e-3, 1e-3], w_u: [1e-2, 1e-2] }
    }

    /// Weights for the receding-horizon tracker (position dominated).
    pub fn tracking() -> Self {
        Self { w_x: [10.0, 10.0, 2.0, 0.5, 0.1, 0.5], w_tau: [1e-3, 1e-3], w_u: [1e-2, 1e-2] }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mul = |a: &[f64]| -> Vec<f64> { a.iter().map(|w| w * factor).collect() };
        let wx = mul(&self.w_x);
        let wt = mul(&self.w_tau);
        let wu = mul(&self.w_u);
        Self {
            w_x: [wx[0], wx[1], wx[2], wx[3], wx[4], wx[5]],
            w_tau: [wt[0], wt[1]],
            w_u: [wu[0], wu[1]],
        }
    }
}

/// Summary numbers for one trajectory, as printed in the comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub length: f64,
    pub rmse: f64,
    pub max_error: f64,
    pub mean_speed: f64,
}

/// What a trajectory is being compared against.
pub enum RefTarget<'a> {
    /// Same-clock reference: errors are taken at matched timestamps.
    Trajectory(&'a Trajectory),
    /// Geometric reference: errors are taken to the nearest path point.
    Path(&'a PlannedPath),
}

/// Position-error metrics of `traj` against a reference, plus length and mean
/// speed of `traj` itself.
pub fn trajectory_metrics(traj: &Trajectory, reference: RefTarget<'_>) -> Metrics {
    let mut sq_sum = 0.0;
    let mut max_error: f64 = 0.0;
    for (i, s) in traj.states.iter().enumerate() {
        let err = match &reference {
            RefTarget::Trajectory(r) => {
                let rs = r.state_at_time(i as f64 * traj.dt);
                ((s.x - rs.x).powi(2) + (s.y - rs.y).powi(2)).sqrt()
            }
            RefTarget::Path(p) => p
                .poses
                .iter()
                .map(|q| ((s.x - q.x).powi(2) + (s.y - q.y).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min),
        };
        sq_sum += err * err;
        max_error = max_error.max(err);
    }
    let n = traj.states.len() as f64;
    let length = traj.length();
    let duration = traj.duration();
    Metrics {
        length,
        rmse: (sq_sum / n).sqrt(),
        max_error,
        mean_speed: if duration > 0.0 { length / duration } else { 0.0 },
    }
}
