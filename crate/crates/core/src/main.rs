//! Command-line front end: plan routes, track them in closed loop, run the
//! pipeline ablation bench, and project camera masks to occupancy grids.
//!
//! Exit codes: 0 success, 2 bad input, 3 planning failure, 4 solver failure,
//! 5 collision.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use catnav::camera::{mask_to_grid, CameraPose, GridSpec, SegMask};
use catnav::error::{Error, Result};
use catnav::harness::{
    run_ablation, run_controller_comparison, run_variant, HarnessOptions, PipelineVariant,
};
use catnav::hybrid_astar::search;
use catnav::optimizer::{build_reference, optimize, OptimizeOptions, Surroundings};
use catnav::scenario::{ControllerKind, ControllerSpec, Scenario};
use catnav::svg::{write_svg, PathLayer, SvgOptions};

#[derive(Parser)]
#[command(
    name = "catnav",
    version,
    about = "Plan, optimize and track routes for a twin-hull surface vessel"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Plan a route on a scenario's charted map and write path, trajectory,
    /// grid and picture files.
    Plan(PlanArgs),
    /// Run the full pipeline closed-loop on one scenario.
    Track(TrackArgs),
    /// Compare pipeline variants (or controllers) on one scenario.
    Bench(BenchArgs),
    /// Project an aerial segmentation mask to an occupancy grid.
    Project(ProjectArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario file (.scn).
    scenario: PathBuf,
    /// Directory for output files.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Override the scenario's random-block seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Scale the scenario geometry by 2.
    #[arg(long)]
    full_size: bool,
    /// Skip writing SVG pictures.
    #[arg(long)]
    no_svg: bool,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    common: Common,
    /// Skip trajectory optimization; emit the raw timed reference.
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct TrackArgs {
    #[command(flatten)]
    common: Common,
    /// Pipeline variant to execute.
    #[arg(long, default_value = "GOP+LOP")]
    variant: String,
    /// Override the scenario's controller (nmpc or pid).
    #[arg(long)]
    controller: Option<String>,
    /// Override the predictive controller's horizon (knots).
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated pipeline variants to compare.
    #[arg(long, default_value = "GOP+LOP,GP+LOP,LOP,GOP+LP")]
    variants: String,
    /// Compare controllers (nmpc vs pid) on one variant instead of
    /// comparing variants.
    #[arg(long)]
    controllers: bool,
    /// Variant used for the controller comparison.
    #[arg(long, default_value = "GOP+LOP")]
    variant: String,
}

#[derive(Args)]
struct ProjectArgs {
    /// Segmentation mask (binary PGM, P5).
    #[arg(long)]
    mask: PathBuf,
    /// Camera config: intrinsics and mounting pose.
    #[arg(long)]
    camera: PathBuf,
    /// Output grid file.
    #[arg(long, default_value = "grid.txt")]
    out: PathBuf,
    /// Optional SVG rendering of the projected grid.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, default_value_t = 100.0)]
    width: f64,
    #[arg(long, default_value_t = 60.0)]
    height: f64,
    #[arg(long, default_value_t = 0.5)]
    resolution: f64,
    #[arg(long, default_value_t = 0.0)]
    origin_x: f64,
    #[arg(long, default_value_t = 0.0)]
    origin_y: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Plan(args) => cmd_plan(args),
        Cmd::Track(args) => cmd_track(args),
        Cmd::Bench(args) => cmd_bench(args),
        Cmd::Project(args) => cmd_project(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_scenario(common: &Common) -> Result<(Scenario, HarnessOptions)> {
    let scenario = Scenario::from_file(&common.scenario)?;
    std::fs::create_dir_all(&common.out_dir)?;
    let opts = HarnessOptions { seed: common.seed, full_size: common.full_size, ..HarnessOptions::default() };
    Ok((scenario, opts))
}

fn out_path(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}.{suffix}"))
}

fn cmd_plan(args: PlanArgs) -> Result<()> {
    let (scenario, opts) = load_scenario(&args.common)?;
    let mut scn = if opts.full_size { scenario.scaled(2.0) } else { scenario };
    if let Some(seed) = opts.seed {
        scn.map.seed = seed;
    }

    let t0 = Instant::now();
    let grid = scn.build_charted_grid()?;
    let map_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t0 = Instant::now();
    let path = search(&grid, scn.map.unknown, scn.start, scn.goal, &scn.search)?;
    let plan_ms = t0.elapsed().as_secs_f64() * 1e3;

    let reference = build_reference(&path, &scn.hull, &scn.reference)?;
    let (trajectory, optimize_ms) = if args.raw {
        (reference, 0.0)
    } else {
        let t0 = Instant::now();
        let field = grid.signed_distance_field(scn.map.unknown);
        let surroundings = Surroundings { field: &field, grid: &grid, policy: scn.map.unknown };
        // Offline planning gets the full-quality budget, unlike the
        // in-the-loop solves inside the bench harness.
        let (opt, reports) =
            optimize(&reference, &scn.hull, Some(&surroundings), &OptimizeOptions::default())?;
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        let unconverged = reports.iter().filter(|r| !r.converged).count();
        if unconverged > 0 {
            eprintln!("note: {unconverged} of {} solve windows stopped early", reports.len());
        }
        (opt, ms)
    };

    let dir = &args.common.out_dir;
    let name = &scn.name;
    path.write_csv(&out_path(dir, name, "path.csv"))?;
    trajectory.write_csv(&out_path(dir, name, "plan.csv"))?;
    grid.write_file(&out_path(dir, name, "grid.txt"))?;
    if !args.common.no_svg {
        let layers = vec![
            PathLayer::new("route", path.poses.iter().map(|p| (p.x, p.y)).collect()),
            PathLayer::new("trajectory", trajectory.states.iter().map(|s| (s.x, s.y)).collect()),
        ];
        let notes = vec![
            format!("route: {:.1} m", path.length),
            format!("trajectory: {:.1} m, {:.0} s", trajectory.length(), trajectory.duration()),
        ];
        write_svg(&out_path(dir, name, "plan.svg"), &grid, &layers, &notes, &SvgOptions::default())?;
    }

    println!("scenario {name}: route {:.1} m, trajectory {:.1} m over {:.0} s", path.length, trajectory.length(), trajectory.duration());
    println!("timings (ms): map {map_ms:.0}, plan {plan_ms:.0}, optimize {optimize_ms:.0}");
    println!("wrote {}", dir.display());
    Ok(())
}

fn parse_controller(text: &str, horizon: usize) -> Result<ControllerSpec> {
    let kind = match text.to_ascii_lowercase().as_str() {
        "nmpc" => ControllerKind::Nmpc,
        "pid" => ControllerKind::Pid,
        other => return Err(Error::Parse(format!("unknown controller {other:?}; expected nmpc or pid"))),
    };
    Ok(ControllerSpec { kind, horizon })
}

fn cmd_track(args: TrackArgs) -> Result<()> {
    let (scenario, mut opts) = load_scenario(&args.common)?;
    let variant = PipelineVariant::parse(&args.variant)?;
    let horizon = args.horizon.unwrap_or(scenario.controller.horizon);
    opts.controller = match &args.controller {
        Some(text) => Some(parse_controller(text, horizon)?),
        None => Some(ControllerSpec { kind: scenario.controller.kind, horizon }),
    };

    let outcome = run_variant(&scenario, variant, &opts)?;

    let dir = &args.common.out_dir;
    let name = &scenario.name;
    outcome.executed.write_csv(&out_path(dir, name, "exec.csv"))?;
    if !args.common.no_svg {
        let mut scn = if opts.full_size { scenario.scaled(2.0) } else { scenario.clone() };
        if let Some(seed) = opts.seed {
            scn.map.seed = seed;
        }
        let truth = scn.build_grid()?;
        let mut layers = Vec::new();
        if let Some(planned) = &outcome.planned {
            let mut layer =
                PathLayer::new("plan", planned.states.iter().map(|s| (s.x, s.y)).collect());
            layer.dashed = true;
            layers.push(layer);
        }
        layers.push(PathLayer::new(
            "executed",
            outcome.executed.states.iter().map(|s| (s.x, s.y)).collect(),
        ));
        let notes = vec![format!(
            "executed: {:.1} m in {:.0} s, rmse {:.3} m",
            outcome.executed_length, outcome.elapsed_s, outcome.tracking_rmse
        )];
        write_svg(&out_path(dir, name, "track.svg"), &truth, &layers, &notes, &SvgOptions::default())?;
    }

    let status = if outcome.success { "reached the goal" } else { "FAILED" };
    println!(
        "{} [{}] with {}: {status} in {:.0} s; executed {:.1} m (planned {:.1} m)",
        name,
        outcome.variant.label(),
        outcome.controller,
        outcome.elapsed_s,
        outcome.executed_length,
        outcome.planned_length
    );
    if let Some(why) = &outcome.failure {
        println!("failure: {why}");
    }
    println!(
        "tracking rmse {:.3} m (max {:.3} m), {} replans, {} degraded steps",
        outcome.tracking_rmse, outcome.tracking_max, outcome.replans, outcome.degraded_steps
    );
    let t = outcome.timings;
    println!(
        "timings (ms): map {:.0}, plan {:.0}, optimize {:.0}, replan {:.0}, control {:.0}",
        t.mapping_ms, t.planning_ms, t.optimize_ms, t.replanning_ms, t.control_ms
    );
    println!("wrote {}", dir.display());
    if !outcome.success {
        return Err(Error::Planning(outcome.failure.unwrap_or_else(|| "run failed".into())));
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let (scenario, opts) = load_scenario(&args.common)?;
    let report = if args.controllers {
        let variant = PipelineVariant::parse(&args.variant)?;
        run_controller_comparison(&scenario, variant, &opts)?
    } else {
        let variants: Vec<PipelineVariant> = args
            .variants
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(PipelineVariant::parse)
            .collect::<Result<_>>()?;
        run_ablation(&scenario, &variants, &opts)?
    };

    let dir = &args.common.out_dir;
    let name = &report.scenario;
    report.write_csv(&out_path(dir, name, "bench.csv"))?;
    std::fs::write(out_path(dir, name, "bench.txt"), report.text())?;
    if !args.common.no_svg {
        report.write_svg(&out_path(dir, name, "bench.svg"))?;
    }
    print!("{}", report.text());
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_project(args: ProjectArgs) -> Result<()> {
    let mask = SegMask::read_pgm(&args.mask)?;
    let text = std::fs::read_to_string(&args.camera)
        .map_err(|e| Error::Parse(format!("camera file {}: {e}", args.camera.display())))?;
    let (intrinsics, pose) = CameraPose::parse_with_intrinsics(&text)?;
    if !(args.width > 0.0 && args.height > 0.0 && args.resolution > 0.0) {
        return Err(Error::Parse("width, height and resolution must be positive".into()));
    }
    let spec = GridSpec {
        ncols: (args.width / args.resolution).ceil() as usize,
        nrows: (args.height / args.resolution).ceil() as usize,
        resolution: args.resolution,
        origin_x: args.origin_x,
        origin_y: args.origin_y,
    };
    let grid = mask_to_grid(&mask, &intrinsics, &pose, &spec)?;
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    grid.write_file(&args.out)?;
    if let Some(svg_path) = &args.svg {
        write_svg(svg_path, &grid, &[], &[], &SvgOptions::default())?;
    }
    use catnav::grid::Cell;
    println!(
        "projected {}x{} cells at {} m: {} blocked, {} free, {} unknown -> {}",
        spec.ncols,
        spec.nrows,
        args.resolution,
        grid.count(Cell::Occupied),
        grid.count(Cell::Free),
        grid.count(Cell::Unknown),
        args.out.display()
    );
    Ok(())
}
