//! End-to-end pipeline runs and the ablation bench.
//!
//! A pipeline variant decides which planning stages run:
//!
//! * `GOP+LOP` — globally optimized plan on the charted map, locally
//!   optimized replans when onboard sensing invalidates the route.
//! * `GP+LOP`  — raw global plan (no trajectory optimization up front),
//!   locally optimized replans.
//! * `LOP`     — no charted map at all: the vessel plans through unseen
//!   space optimistically and replans from scratch as obstacles appear.
//! * `GOP+LP`  — globally optimized plan, raw (unoptimized) replans.
//!
//! Every variant runs the same closed loop: sense within a fixed radius,
//! validate the remaining plan against everything known, replan when the
//! plan is blocked, and track the current plan with the scenario's
//! controller. Wall-clock timings are reported in the text summary only;
//! CSV and SVG outputs depend solely on the inputs so repeated runs are
//! byte-identical.

use std::path::Path;
use std::time::Instant;

use crate::control::{NmpcConfig, NmpcTracker, PidConfig, PidTracker};
use crate::dynamics::{step_rk4, ControlInput, VesselState};
use crate::error::{Error, Result};
use crate::grid::{Cell, OccupancyGrid, UnknownPolicy};
use crate::hybrid_astar::{collision_free, search, PlannedPath, SearchPose};
use crate::optimizer::{build_reference, optimize, OptimizeOptions, Surroundings};
use crate::scenario::{ControllerKind, ControllerSpec, Scenario};
use crate::svg::{render, PathLayer, SvgOptions};
use crate::trajectory::{Provenance, Trajectory};

/// Which planning stages run before and during execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineVariant {
    /// Globally optimized plan + locally optimized replans.
    GopLop,
    /// Raw global plan + locally optimized replans.
    GpLop,
    /// No charted map; sense-and-replan only, replans locally optimized.
    Lop,
    /// Globally optimized plan + raw replans.
    GopLp,
}

impl PipelineVariant {
    pub const ALL: [PipelineVariant; 4] =
        [PipelineVariant::GopLop, PipelineVariant::GpLop, PipelineVariant::Lop, PipelineVariant::GopLp];

    pub fn label(&self) -> &'static str {
        match self {
            PipelineVariant::GopLop => "GOP+LOP",
            PipelineVariant::GpLop => "GP+LOP",
            PipelineVariant::Lop => "LOP",
            PipelineVariant::GopLp => "GOP+LP",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let key: String =
            text.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        match key.as_str() {
            "goplop" => Ok(PipelineVariant::GopLop),
            "gplop" => Ok(PipelineVariant::GpLop),
            "lop" => Ok(PipelineVariant::Lop),
            "goplp" => Ok(PipelineVariant::GopLp),
            _ => Err(Error::Parse(format!(
                "unknown pipeline variant {text:?}; expected one of GOP+LOP, GP+LOP, LOP, GOP+LP"
            ))),
        }
    }

    /// A charted map and a global route exist before the vessel moves.
    fn has_global_plan(&self) -> bool {
        !matches!(self, PipelineVariant::Lop)
    }

    /// The initial global route is passed through the trajectory optimizer.
    fn global_optimized(&self) -> bool {
        matches!(self, PipelineVariant::GopLop | PipelineVariant::GopLp)
    }

    /// Replans triggered during execution are locally optimized.
    fn local_optimized(&self) -> bool {
        !matches!(self, PipelineVariant::GopLp)
    }
}

#[derive(Debug, Clone)]
pub struct HarnessOptions {
    /// Radius (m) within which onboard sensing reveals the true map.
    pub sensing_radius: f64,
    /// Control steps between sensing updates.
    pub sense_every: usize,
    /// Distance (m) to the goal position that counts as arrival.
    pub goal_tolerance: f64,
    /// Hard cap on simulated time (s); exceeding it fails the run.
    pub max_sim_time: f64,
    /// Hard cap on replans; exceeding it fails the run.
    pub max_replans: usize,
    /// Overrides the scenario's random-block seed.
    pub seed: Option<u64>,
    /// Scale the scenario geometry by 2 before running.
    pub full_size: bool,
    /// Overrides the scenario's controller choice.
    pub controller: Option<ControllerSpec>,
    /// Budget for the trajectory optimizer; the default trades polish for
    /// bench throughput compared to [`OptimizeOptions::default`].
    pub optimize: OptimizeOptions,
    /// Horizon (s) of the locally optimized prefix of a replanned route.
    pub local_window_s: f64,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self {
            sensing_radius: 20.0,
            sense_every: 5,
            goal_tolerance: 2.0,
            max_sim_time: 600.0,
            max_replans: 12,
            seed: None,
            full_size: false,
            controller: None,
            optimize: bench_optimize_options(),
            local_window_s: 15.0,
        }
    }
}

/// Reduced-budget optimizer settings for repeated in-the-loop solves.
pub fn bench_optimize_options() -> OptimizeOptions {
    let mut opts = OptimizeOptions::default();
    opts.solver.max_inner = 600;
    opts.solver.max_outer = 12;
    opts.window = 160;
    opts.overlap = 32;
    // In-the-loop refinement accepts rougher dynamic consistency than the
    // offline optimizer; the tracker closes the residual gap. Keep the gate
    // tight enough that the plan stays physically followable — a defect of
    // a few millimetres per step reads as noise to the tracker, centimetres
    // read as a teleporting reference.
    opts.defect_tol = 5e-3;
    opts
}

/// Wall-clock cost of each stage (ms). Text reports only — never CSV/SVG.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    pub mapping_ms: f64,
    pub planning_ms: f64,
    pub optimize_ms: f64,
    pub replanning_ms: f64,
    pub control_ms: f64,
}

impl StageTimings {
    pub fn total_ms(&self) -> f64 {
        self.mapping_ms + self.planning_ms + self.optimize_ms + self.replanning_ms + self.control_ms
    }
}

/// Everything one pipeline run produced.
#[derive(Debug, Clone)]
pub struct VariantOutcome {
    pub variant: PipelineVariant,
    pub controller: &'static str,
    pub success: bool,
    /// Why the run failed, when it did.
    pub failure: Option<String>,
    pub replans: usize,
    /// Optimizer solves that failed and fell back to the raw reference.
    pub optimize_fallbacks: usize,
    /// Length (m) of the first route the vessel set out on.
    pub planned_length: f64,
    /// The first route itself (after any global optimization), for rendering.
    pub planned: Option<Trajectory>,
    /// Closed-loop state history actually driven.
    pub executed: Trajectory,
    pub executed_length: f64,
    /// Simulated seconds until arrival (or until the run ended).
    pub elapsed_s: f64,
    /// Position error against the active plan, aggregated over all steps.
    pub tracking_rmse: f64,
    pub tracking_max: f64,
    /// Control steps where the tracker fell back to feedforward.
    pub degraded_steps: usize,
    pub timings: StageTimings,
}

/// Ablation results for one scenario.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub scenario: String,
    pub seed: u64,
    pub rows: Vec<VariantOutcome>,
    /// Ground-truth map the runs were scored against (for rendering).
    pub truth: OccupancyGrid,
    pub start: SearchPose,
    pub goal: SearchPose,
}

pub const BENCH_CSV_HEADER: &str = "variant,controller,success,replans,optimize_fallbacks,\
planned_length,executed_length,elapsed_s,tracking_rmse,tracking_max,degraded_steps";

impl BenchReport {
    /// Machine-readable rows; wall-clock timings are deliberately absent so
    /// repeated runs produce identical bytes.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(BENCH_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{:.3},{:.3},{:.1},{:.4},{:.4},{}\n",
                r.variant.label(),
                r.controller,
                r.success,
                r.replans,
                r.optimize_fallbacks,
                r.planned_length,
                r.executed_length,
                r.elapsed_s,
                r.tracking_rmse,
                r.tracking_max,
                r.degraded_steps,
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// Human-readable summary, including per-stage wall-clock timings.
    pub fn text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scenario {} (seed {})\n", self.scenario, self.seed));
        out.push_str(&format!(
            "{:<9} {:<5} {:>7} {:>7} {:>9} {:>9} {:>8} {:>7} {:>7} {:>8}\n",
            "variant", "ctrl", "success", "replans", "plan_m", "exec_m", "time_s", "rmse", "max", "degraded"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<9} {:<5} {:>7} {:>7} {:>9.2} {:>9.2} {:>8.1} {:>7.3} {:>7.3} {:>8}\n",
                r.variant.label(),
                r.controller,
                if r.success { "yes" } else { "NO" },
                r.replans,
                r.planned_length,
                r.executed_length,
                r.elapsed_s,
                r.tracking_rmse,
                r.tracking_max,
                r.degraded_steps,
            ));
            if let Some(why) = &r.failure {
                out.push_str(&format!("          failure: {why}\n"));
            }
        }
        out.push_str("timings (ms, wall clock):\n");
        for r in &self.rows {
            let t = r.timings;
            out.push_str(&format!(
                "  {:<9} map {:>6.0}  plan {:>6.0}  optimize {:>7.0}  replan {:>6.0}  control {:>7.0}  total {:>7.0}\n",
                r.variant.label(),
                t.mapping_ms,
                t.planning_ms,
                t.optimize_ms,
                t.replanning_ms,
                t.control_ms,
                t.total_ms(),
            ));
        }
        out
    }

    /// Renders every executed path over the ground-truth map.
    pub fn to_svg_string(&self) -> String {
        let mut layers = Vec::new();
        let mut notes = Vec::new();
        for r in &self.rows {
            let points: Vec<(f64, f64)> = r.executed.states.iter().map(|s| (s.x, s.y)).collect();
            layers.push(PathLayer::new(r.variant.label(), points));
            let status = if r.success {
                format!("{:.1} m, {} replans", r.executed_length, r.replans)
            } else {
                "FAILED".to_string()
            };
            notes.push(format!("{}: {}", r.variant.label(), status));
        }
        render(&self.truth, &layers, &notes, &SvgOptions::default())
    }

    pub fn write_svg(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_svg_string())?;
        Ok(())
    }
}

/// Applies the seed/scale overrides that change what world gets built.
fn effective_scenario(scenario: &Scenario, opts: &HarnessOptions) -> Scenario {
    let mut scn = if opts.full_size { scenario.scaled(2.0) } else { scenario.clone() };
    if let Some(seed) = opts.seed {
        scn.map.seed = seed;
    }
    if let Some(ctrl) = opts.controller.clone() {
        scn.controller = ctrl;
    }
    scn
}

/// Copies true cells into the known map within the sensing disc. Returns
/// whether anything new was learned.
fn reveal_disc(known: &mut OccupancyGrid, truth: &OccupancyGrid, x: f64, y: f64, radius: f64) -> bool {
    let (ox, oy) = truth.origin();
    let res = truth.resolution();
    let col0 = (((x - radius - ox) / res).floor().max(0.0)) as usize;
    let row0 = (((y - radius - oy) / res).floor().max(0.0)) as usize;
    let col1 = ((((x + radius - ox) / res).ceil()) as usize).min(truth.ncols().saturating_sub(1));
    let row1 = ((((y + radius - oy) / res).ceil()) as usize).min(truth.nrows().saturating_sub(1));
    let mut changed = false;
    for row in row0..=row1 {
        for col in col0..=col1 {
            let (cx, cy) = truth.cell_center(col, row);
            if (cx - x).hypot(cy - y) > radius {
                continue;
            }
            let t = truth.get(col, row);
            if known.get(col, row) != t {
                known.set(col, row, t);
                changed = true;
            }
        }
    }
    changed
}

/// True when any remaining knot of the plan collides with the known map.
fn plan_blocked(
    known: &OccupancyGrid,
    policy: UnknownPolicy,
    plan: &Trajectory,
    from: usize,
    scn: &Scenario,
) -> bool {
    plan.states[from.min(plan.states.len() - 1)..].iter().any(|s| {
        !collision_free(known, policy, &SearchPose::new(s.x, s.y, s.psi), &scn.search)
    })
}

/// Plans a route on the known map and turns it into a timed reference.
fn plan_route(
    known: &OccupancyGrid,
    policy: UnknownPolicy,
    start: SearchPose,
    scn: &Scenario,
) -> Result<(PlannedPath, Trajectory)> {
    let path = search(known, policy, start, scn.goal, &scn.search)?;
    let reference = build_reference(&path, &scn.hull, &scn.reference)?;
    Ok((path, reference))
}

/// Optimizes the first `window_s` seconds of a reference and splices the
/// untouched remainder back on. The optimizer pins the last knot of the
/// prefix to the raw reference, so the splice is seamless. Falls back to the
/// raw reference when the solve fails; the second return value reports that.
fn optimize_prefix(
    reference: &Trajectory,
    known: &OccupancyGrid,
    policy: UnknownPolicy,
    scn: &Scenario,
    opts: &OptimizeOptions,
    window_s: f64,
) -> (Trajectory, bool) {
    let n = reference.states.len();
    let w = ((window_s / reference.dt).round() as usize).max(3).min(n);
    let prefix = Trajectory {
        dt: reference.dt,
        states: reference.states[..w].to_vec(),
        controls: reference.controls[..w - 1].to_vec(),
        provenance: Provenance::Initial,
    };
    let field = known.signed_distance_field(policy);
    let surroundings = Surroundings { field: &field, grid: known, policy };
    match optimize(&prefix, &scn.hull, Some(&surroundings), opts) {
        Ok((opt, _)) => {
            let mut states = opt.states;
            states.extend_from_slice(&reference.states[w..]);
            let mut controls = opt.controls;
            controls.extend_from_slice(&reference.controls[w - 1..]);
            (
                Trajectory { dt: reference.dt, states, controls, provenance: Provenance::Optimized },
                true,
            )
        }
        Err(_) => (reference.clone(), false),
    }
}

enum SegmentEnd {
    /// The plan ran out of knots without reaching the goal.
    Exhausted,
    /// Sensing invalidated the remaining plan.
    Blocked,
    Arrived,
    Failed(String),
}

/// Mutable state of one closed-loop run.
struct Sim<'a> {
    scn: &'a Scenario,
    opts: &'a HarnessOptions,
    truth: OccupancyGrid,
    known: OccupancyGrid,
    policy: UnknownPolicy,
    state: VesselState,
    steps: usize,
    max_steps: usize,
    states: Vec<VesselState>,
    controls: Vec<ControlInput>,
    sum_sq: f64,
    n_err: usize,
    max_err: f64,
    degraded: usize,
    control_ms: f64,
}

impl<'a> Sim<'a> {
    fn sense(&mut self) -> bool {
        reveal_disc(&mut self.known, &self.truth, self.state.x, self.state.y, self.opts.sensing_radius)
    }

    fn at_goal(&self) -> bool {
        (self.state.x - self.scn.goal.x).hypot(self.state.y - self.scn.goal.y)
            <= self.opts.goal_tolerance
    }

    /// Tracks `plan` until it ends, is invalidated, or the run resolves.
    fn run_segment(&mut self, plan: &Trajectory) -> SegmentEnd {
        let spec = &self.scn.controller;
        let mut nmpc = match spec.kind {
            ControllerKind::Nmpc => Some(NmpcTracker::new(
                plan,
                &self.scn.hull,
                NmpcConfig { horizon: spec.horizon, ..NmpcConfig::default() },
            )),
            ControllerKind::Pid => None,
        };
        let mut pid = match spec.kind {
            ControllerKind::Pid => Some(PidTracker::new(plan, &self.scn.hull, PidConfig::default())),
            ControllerKind::Nmpc => None,
        };

        for ref_index in 0..plan.controls.len() {
            if self.steps % self.opts.sense_every == 0
                && self.sense()
                && plan_blocked(&self.known, self.policy, plan, ref_index, self.scn)
            {
                return SegmentEnd::Blocked;
            }

            let t0 = Instant::now();
            let (tau, degraded) = match (&mut nmpc, &mut pid) {
                (Some(t), _) => t.step(&self.state, ref_index),
                (_, Some(t)) => (t.step(&self.state, ref_index), false),
                _ => unreachable!("one tracker is always constructed"),
            };
            self.control_ms += t0.elapsed().as_secs_f64() * 1e3;
            if degraded {
                self.degraded += 1;
            }

            self.state = step_rk4(&self.state, &tau, &self.scn.hull, plan.dt);
            self.states.push(self.state);
            self.controls.push(tau);
            self.steps += 1;

            let knot = plan.states[(ref_index + 1).min(plan.states.len() - 1)];
            let err = (self.state.x - knot.x).hypot(self.state.y - knot.y);
            self.sum_sq += err * err;
            self.max_err = self.max_err.max(err);
            self.n_err += 1;

            let pose = SearchPose::new(self.state.x, self.state.y, self.state.psi);
            // Physical contact uses the bare hull; the planning margin exists
            // precisely so this check never trips.
            let hull_only = SearchOptions { safety_margin: 0.0, ..self.scn.search.clone() };
            if !collision_free(&self.truth, UnknownPolicy::Free, &pose, &hull_only) {
                return SegmentEnd::Failed(format!(
                    "hull contact at ({:.2}, {:.2}) after {:.1} s",
                    self.state.x,
                    self.state.y,
                    self.steps as f64 * plan.dt
                ));
            }
            if self.at_goal() {
                return SegmentEnd::Arrived;
            }
            if self.steps >= self.max_steps {
                return SegmentEnd::Failed(format!(
                    "timed out after {:.0} s of simulated time",
                    self.opts.max_sim_time
                ));
            }
        }
        if self.at_goal() {
            SegmentEnd::Arrived
        } else {
            SegmentEnd::Exhausted
        }
    }
}

/// Runs one pipeline variant on a scenario, end to end.
pub fn run_variant(
    scenario: &Scenario,
    variant: PipelineVariant,
    opts: &HarnessOptions,
) -> Result<VariantOutcome> {
    let scn = effective_scenario(scenario, opts);
    let mut timings = StageTimings::default();

    let t0 = Instant::now();
    let truth = scn.build_grid()?;
    let known = if variant.has_global_plan() {
        scn.build_charted_grid()?
    } else {
        let mut g = OccupancyGrid::new(
            truth.ncols(),
            truth.nrows(),
            truth.resolution(),
            truth.origin().0,
            truth.origin().1,
        )?;
        for row in 0..g.nrows() {
            for col in 0..g.ncols() {
                g.set(col, row, Cell::Unknown);
            }
        }
        g
    };
    timings.mapping_ms = t0.elapsed().as_secs_f64() * 1e3;

    // Unsensed space: the charted policy for map-carrying variants, free for
    // the map-less one (it must be willing to plan through the unseen).
    let policy = if variant.has_global_plan() { scn.map.unknown } else { UnknownPolicy::Free };

    let dt = scn.reference.dt;
    let mut sim = Sim {
        scn: &scn,
        opts,
        truth,
        known,
        policy,
        state: VesselState::at_pose(scn.start.x, scn.start.y, scn.start.psi),
        steps: 0,
        max_steps: (opts.max_sim_time / dt).ceil() as usize,
        states: vec![VesselState::at_pose(scn.start.x, scn.start.y, scn.start.psi)],
        controls: Vec::new(),
        sum_sq: 0.0,
        n_err: 0,
        max_err: 0.0,
        degraded: 0,
        control_ms: 0.0,
    };
    sim.sense();

    let mut replans = 0usize;
    let mut optimize_fallbacks = 0usize;

    // First route: on the charted map for global variants, on the sensed
    // sliver for the map-less one.
    let t0 = Instant::now();
    let first = plan_route(&sim.known, policy, scn.start, &scn);
    timings.planning_ms = t0.elapsed().as_secs_f64() * 1e3;
    let mut plan = match first {
        Ok((_, reference)) => reference,
        Err(e) => {
            return Ok(failed_outcome(variant, &scn, e.to_string(), timings, sim, 0, 0, 0.0))
        }
    };
    if variant.global_optimized() || (!variant.has_global_plan() && variant.local_optimized()) {
        let t0 = Instant::now();
        let window = if variant.has_global_plan() {
            f64::INFINITY // polish the whole global route
        } else {
            opts.local_window_s
        };
        let (refined, ok) =
            optimize_prefix(&plan, &sim.known, policy, &scn, &opts.optimize, window);
        timings.optimize_ms += t0.elapsed().as_secs_f64() * 1e3;
        if !ok {
            optimize_fallbacks += 1;
        }
        plan = refined;
    }
    let planned_length = plan.length();
    let planned = plan.clone();

    let failure: Option<String> = loop {
        match sim.run_segment(&plan) {
            SegmentEnd::Arrived => break None,
            SegmentEnd::Failed(why) => break Some(why),
            SegmentEnd::Blocked | SegmentEnd::Exhausted => {
                if replans >= opts.max_replans {
                    break Some(format!("gave up after {replans} replans"));
                }
                replans += 1;
                let t0 = Instant::now();
                let start = SearchPose::new(sim.state.x, sim.state.y, sim.state.psi);
                let routed = plan_route(&sim.known, policy, start, &scn);
                timings.replanning_ms += t0.elapsed().as_secs_f64() * 1e3;
                match routed {
                    Ok((_, reference)) => {
                        plan = if variant.local_optimized() {
                            let t0 = Instant::now();
                            let (refined, ok) = optimize_prefix(
                                &reference,
                                &sim.known,
                                policy,
                                &scn,
                                &opts.optimize,
                                opts.local_window_s,
                            );
                            timings.optimize_ms += t0.elapsed().as_secs_f64() * 1e3;
                            if !ok {
                                optimize_fallbacks += 1;
                            }
                            refined
                        } else {
                            reference
                        };
                    }
                    Err(e) => break Some(format!("replan {replans} failed: {e}")),
                }
            }
        }
    };

    timings.control_ms = sim.control_ms;
    let executed = Trajectory {
        dt,
        states: sim.states,
        controls: sim.controls,
        provenance: Provenance::Executed,
    };
    let executed_length = executed.length();
    let rmse = if sim.n_err > 0 { (sim.sum_sq / sim.n_err as f64).sqrt() } else { 0.0 };
    Ok(VariantOutcome {
        variant,
        controller: controller_name(&scn.controller),
        success: failure.is_none(),
        failure,
        replans,
        optimize_fallbacks,
        planned_length,
        planned: Some(planned),
        executed,
        executed_length,
        elapsed_s: sim.steps as f64 * dt,
        tracking_rmse: rmse,
        tracking_max: sim.max_err,
        degraded_steps: sim.degraded,
        timings,
    })
}

fn controller_name(spec: &ControllerSpec) -> &'static str {
    match spec.kind {
        ControllerKind::Nmpc => "nmpc",
        ControllerKind::Pid => "pid",
    }
}

/// Outcome for a run that never got moving.
#[allow(clippy::too_many_arguments)]
fn failed_outcome(
    variant: PipelineVariant,
    scn: &Scenario,
    why: String,
    timings: StageTimings,
    sim: Sim<'_>,
    replans: usize,
    optimize_fallbacks: usize,
    planned_length: f64,
) -> VariantOutcome {
    let executed = Trajectory {
        dt: scn.reference.dt,
        states: sim.states,
        controls: sim.controls,
        provenance: Provenance::Executed,
    };
    VariantOutcome {
        variant,
        controller: controller_name(&scn.controller),
        success: false,
        failure: Some(why),
        replans,
        optimize_fallbacks,
        planned_length,
        planned: None,
        executed_length: executed.length(),
        executed,
        elapsed_s: 0.0,
        tracking_rmse: f64::NAN,
        tracking_max: f64::NAN,
        degraded_steps: 0,
        timings,
    }
}

/// Runs the requested variants on one scenario and packages the comparison.
pub fn run_ablation(
    scenario: &Scenario,
    variants: &[PipelineVariant],
    opts: &HarnessOptions,
) -> Result<BenchReport> {
    if variants.is_empty() {
        return Err(Error::Parse("no pipeline variants requested".into()));
    }
    let scn = effective_scenario(scenario, opts);
    let truth = scn.build_grid()?;
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        rows.push(run_variant(scenario, variant, opts)?);
    }
    Ok(BenchReport {
        scenario: scn.name.clone(),
        seed: scn.map.seed,
        rows,
        truth,
        start: scn.start,
        goal: scn.goal,
    })
}

/// Runs the full pipeline twice — predictive controller vs PID — so the two
/// trackers can be compared on identical plans.
pub fn run_controller_comparison(
    scenario: &Scenario,
    variant: PipelineVariant,
    opts: &HarnessOptions,
) -> Result<BenchReport> {
    let scn = effective_scenario(scenario, opts);
    let truth = scn.build_grid()?;
    let mut rows = Vec::with_capacity(2);
    for kind in [ControllerKind::Nmpc, ControllerKind::Pid] {
        let mut o = opts.clone();
        o.controller = Some(ControllerSpec { kind, horizon: scn.controller.horizon });
        rows.push(run_variant(scenario, variant, &o)?);
    }
    Ok(BenchReport {
        scenario: scn.name.clone(),
        seed: scn.map.seed,
        rows,
        truth,
        start: scn.start,
        goal: scn.goal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Open 36x20 m pond, straight shot, PID controller for speed.
    fn open_scenario() -> Scenario {
        let text = "
[map]
width = 36
height = 20
resolution = 0.5
random_blocks = 0

[start]
x = 4
y = 10
psi = 0.0

[goal]
x = 32
y = 10
psi = 0.0

[controller]
type = pid
";
        Scenario::parse(text, "open").unwrap()
    }

    fn with_block(mut scn: Scenario, blocks: usize, seed: u64) -> Scenario {
        scn.map.random_blocks = blocks;
        scn.map.seed = seed;
        scn
    }

    fn quick_opts() -> HarnessOptions {
        let mut opts = HarnessOptions::default();
        opts.optimize.solver.max_inner = 120;
        opts.optimize.solver.max_outer = 4;
        opts.local_window_s = 8.0;
        opts
    }

    #[test]
    fn variant_labels_parse_back() {
        for v in PipelineVariant::ALL {
            assert_eq!(PipelineVariant::parse(v.label()).unwrap(), v);
        }
        assert_eq!(PipelineVariant::parse("gop+lop").unwrap(), PipelineVariant::GopLop);
        assert!(PipelineVariant::parse("bogus").is_err());
    }

    #[test]
    fn sensing_reveals_only_the_nearby_cells() {
        let scn = with_block(open_scenario(), 0, 1);
        let truth = {
            let mut g = scn.build_grid().unwrap();
            let (col, row) = g.world_to_cell(30.0, 10.0).unwrap();
            g.set(col, row, Cell::Occupied);
            g
        };
        let mut known = OccupancyGrid::new(
            truth.ncols(),
            truth.nrows(),
            truth.resolution(),
            0.0,
            0.0,
        )
        .unwrap();
        for row in 0..known.nrows() {
            for col in 0..known.ncols() {
                known.set(col, row, Cell::Unknown);
            }
        }
        assert!(reveal_disc(&mut known, &truth, 4.0, 10.0, 20.0));
        // The far block (at x = 30, 26 m away) stays unknown...
        let (col, row) = truth.world_to_cell(30.0, 10.0).unwrap();
        assert_eq!(known.get(col, row), Cell::Unknown);
        // ...while nearby water is revealed as free.
        let (col, row) = truth.world_to_cell(8.0, 10.0).unwrap();
        assert_eq!(known.get(col, row), Cell::Free);
        // Sensing from next to the block reveals it.
        assert!(reveal_disc(&mut known, &truth, 28.0, 10.0, 20.0));
        let (col, row) = truth.world_to_cell(30.0, 10.0).unwrap();
        assert_eq!(known.get(col, row), Cell::Occupied);
    }

    #[test]
    fn raw_global_plan_reaches_the_goal_on_open_water() {
        let scn = open_scenario();
        let out = run_variant(&scn, PipelineVariant::GpLop, &quick_opts()).unwrap();
        assert!(out.success, "failure: {:?}", out.failure);
        assert_eq!(out.replans, 0);
        assert!(out.tracking_rmse < 0.5, "rmse {}", out.tracking_rmse);
        // Straight shot: executed length close to the 28 m gap.
        assert!((out.executed_length - 28.0).abs() < 4.0, "len {}", out.executed_length);
    }

    /// First seed whose single random block lands on the straight corridor
    /// between start and goal.
    fn blocking_seed() -> u64 {
        for seed in 0..500 {
            let scn = with_block(open_scenario(), 1, seed);
            let (bx, by) = scn.random_block_centers().unwrap()[0];
            if (by - 10.0).abs() < 1.5 && (12.0..24.0).contains(&bx) {
                return seed;
            }
        }
        panic!("no seed under 500 drops a block on the corridor");
    }

    #[test]
    fn an_uncharted_block_forces_a_replan_and_is_avoided() {
        let scn = with_block(open_scenario(), 1, blocking_seed());
        let out = run_variant(&scn, PipelineVariant::GopLp, &quick_opts()).unwrap();
        assert!(out.success, "failure: {:?}", out.failure);
        assert!(out.replans >= 1, "expected at least one replan");
        // The executed path must clear the block the charted plan ran over.
        let truth = scn.build_grid().unwrap();
        for s in &out.executed.states {
            assert!(
                collision_free(
                    &truth,
                    UnknownPolicy::Free,
                    &SearchPose::new(s.x, s.y, s.psi),
                    &scn.search
                ),
                "executed state ({:.2}, {:.2}) touches the block",
                s.x,
                s.y
            );
        }
    }

    #[test]
    fn mapless_pipeline_still_arrives_but_works_harder() {
        let scn = with_block(open_scenario(), 1, blocking_seed());
        let opts = quick_opts();
        let lop = run_variant(&scn, PipelineVariant::Lop, &opts).unwrap();
        assert!(lop.success, "failure: {:?}", lop.failure);
        // Arrival within tolerance of a 28 m gap; the dodge costs extra.
        assert!(lop.executed_length >= 25.0, "length {}", lop.executed_length);
        assert!(lop.replans >= 1, "expected the revealed block to force a replan");
    }

    #[test]
    fn bench_csv_is_deterministic_and_free_of_timings() {
        let scn = open_scenario();
        let mut opts = quick_opts();
        opts.sense_every = 10;
        let variants = [PipelineVariant::GpLop, PipelineVariant::Lop];
        let a = run_ablation(&scn, &variants, &opts).unwrap();
        let b = run_ablation(&scn, &variants, &opts).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        assert_eq!(a.to_svg_string(), b.to_svg_string());
        assert!(a.to_csv_string().lines().count() == 3);
        assert!(!a.to_csv_string().contains("_ms"));
        assert!(a.to_csv_string().starts_with(BENCH_CSV_HEADER));
        // Timings do appear in the text report.
        assert!(a.text().contains("timings"));
    }

    #[test]
    fn full_size_doubles_the_world() {
        let scn = open_scenario();
        let scaled = scn.scaled(2.0);
        assert_eq!(scaled.map.width, 72.0);
        assert_eq!(scaled.goal.x, 64.0);
        assert_eq!(scaled.map.resolution, scn.map.resolution);
    }

    #[test]
    fn seed_override_changes_the_world_deterministically() {
        let scn = with_block(open_scenario(), 2, 3);
        let mut opts = quick_opts();
        opts.seed = Some(99);
        let eff = effective_scenario(&scn, &opts);
        assert_eq!(eff.map.seed, 99);
        assert_eq!(
            eff.random_block_centers().unwrap(),
            {
                let mut s2 = scn.clone();
                s2.map.seed = 99;
                s2.random_block_centers().unwrap()
            }
        );
    }
}
