//! Scenario files: one text file describes a complete benchmark setup.
//!
//! The format is INI-like: `[section]` headers followed by `key = value`
//! lines; `#` starts a comment. `[map]`, `[start]` and `[goal]` are required.
//! `[obstacle]` may repeat, once per shape. `[hull]`, `[planner]` and
//! `[controller]` override defaults key by key. Optional `[camera]` points at
//! a segmentation mask and camera file; when present the occupancy grid is
//! projected from the mask first and explicit obstacles are stamped on top.
//!
//! Everything is deterministic: random blocks are drawn from a counter-based
//! generator seeded by the scenario's `seed`, so the same file always builds
//! the same world.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::camera::{mask_to_grid, CameraPose, GridSpec, SegMask};
use crate::dynamics::HullParams;
use crate::error::{Error, Result};
use crate::grid::{Cell, OccupancyGrid, UnknownPolicy};
use crate::hybrid_astar::{SearchOptions, SearchPose};
use crate::optimizer::ReferenceOptions;

/// Solid shape stamped onto the occupancy grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Obstacle {
    /// Axis-aligned rectangle, `x`/`y` is the center.
    Rect { x: f64, y: f64, w: f64, h: f64 },
    Circle { x: f64, y: f64, radius: f64 },
}

impl Obstacle {
    /// Whether the world point is inside the shape.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        match *self {
            Obstacle::Rect { x, y, w, h } => {
                (px - x).abs() <= 0.5 * w && (py - y).abs() <= 0.5 * h
            }
            Obstacle::Circle { x, y, radius } => {
                (px - x).powi(2) + (py - y).powi(2) <= radius * radius
            }
        }
    }

    pub fn center(&self) -> (f64, f64) {
        match *self {
            Obstacle::Rect { x, y, .. } => (x, y),
            Obstacle::Circle { x, y, .. } => (x, y),
        }
    }
}

/// World extent plus the procedural-obstacle knobs.
#[derive(Debug, Clone)]
pub struct MapSpec {
    pub width: f64,
    pub height: f64,
    pub resolution: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    /// How unmapped cells are treated during planning.
    pub unknown: UnknownPolicy,
    /// Number of procedurally placed square blocks.
    pub random_blocks: usize,
    /// Edge length of each random block (m).
    pub block_size: f64,
    /// Seed for the block placement.
    pub seed: u64,
    /// Minimum distance between a random block center and start/goal (m).
    pub keepout: f64,
}

impl Default for MapSpec {
    fn default() -> Self {
        Self {
            width: 0.0,
            height: 0.0,
            resolution: 0.5,
            origin_x: 0.0,
            origin_y: 0.0,
            unknown: UnknownPolicy::Blocked,
            random_blocks: 0,
            block_size: 3.0,
            seed: 0,
            keepout: 8.0,
        }
    }
}

/// Which tracking controller the scenario asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Nmpc,
    Pid,
}

#[derive(Debug, Clone)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    pub horizon: usize,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        Self { kind: ControllerKind::Nmpc, horizon: 20 }
    }
}

/// Mask + camera file pair for the projection front-end.
#[derive(Debug, Clone)]
pub struct CameraFiles {
    pub mask: PathBuf,
    pub config: PathBuf,
}

/// Parsed scenario: everything a benchmark run needs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub map: MapSpec,
    pub start: SearchPose,
    pub goal: SearchPose,
    pub obstacles: Vec<Obstacle>,
    pub hull: HullParams,
    pub search: SearchOptions,
    pub reference: ReferenceOptions,
    pub controller: ControllerSpec,
    pub camera: Option<CameraFiles>,
}

fn parse_f64(section: &str, key: &str, value: &str, lineno: usize) -> Result<f64> {
    value.trim().parse().map_err(|_| {
        Error::Parse(format!("scenario line {lineno}: [{section}] {key}: expected a number, got `{value}`"))
    })
}

fn parse_usize(section: &str, key: &str, value: &str, lineno: usize) -> Result<usize> {
    value.trim().parse().map_err(|_| {
        Error::Parse(format!(
            "scenario line {lineno}: [{section}] {key}: expected a non-negative integer, got `{value}`"
        ))
    })
}

/// Incrementally built `[obstacle]` section.
#[derive(Default)]
struct ObstacleDraft {
    kind: Option<String>,
    x: Option<f64>,
    y: Option<f64>,
    w: Option<f64>,
    h: Option<f64>,
    radius: Option<f64>,
    lineno: usize,
}

impl ObstacleDraft {
    fn finish(self) -> Result<Obstacle> {
        let at = self.lineno;
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| {
                Error::Parse(format!("scenario line {at}: [obstacle] missing key `{key}`"))
            })
        };
        match self.kind.as_deref() {
            Some("rect") => {
                let (x, y) = (need(self.x, "x")?, need(self.y, "y")?);
                let (w, h) = (need(self.w, "w")?, need(self.h, "h")?);
                if w <= 0.0 || h <= 0.0 {
                    return Err(Error::Parse(format!(
                        "scenario line {at}: [obstacle] rect needs positive w and h"
                    )));
                }
                Ok(Obstacle::Rect { x, y, w, h })
            }
            Some("circle") => {
                let (x, y) = (need(self.x, "x")?, need(self.y, "y")?);
                let radius = need(self.radius, "radius")?;
                if radius <= 0.0 {
                    return Err(Error::Parse(format!(
                        "scenario line {at}: [obstacle] circle needs a positive radius"
                    )));
                }
                Ok(Obstacle::Circle { x, y, radius })
            }
            Some(other) => Err(Error::Parse(format!(
                "scenario line {at}: [obstacle] unknown type `{other}` (rect or circle)"
            ))),
            None => Err(Error::Parse(format!(
                "scenario line {at}: [obstacle] missing key `type`"
            ))),
        }
    }
}

impl Scenario {
    /// Parses scenario text. `name` labels the scenario in reports (file stem
    /// when loaded from disk).
    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut map = MapSpec::default();
        let mut start: Option<(f64, f64, f64)> = None;
        let mut goal: Option<(f64, f64, f64)> = None;
        let mut start_psi_seen = false;
        let mut goal_psi_seen = false;
        let mut obstacles = Vec::new();
        let mut hull = HullParams::default();
        let mut search = SearchOptions::default();
        // Scenario-driven runs feed trackers whose deviation eats clearance;
        // plan with a padded footprint unless the file says otherwise.
        search.safety_margin = 0.4;
        let mut reference = ReferenceOptions::default();
        let mut controller = ControllerSpec::default();
        let mut camera_mask: Option<String> = None;
        let mut camera_config: Option<String> = None;

        let mut section = String::new();
        let mut draft: Option<ObstacleDraft> = None;
        let mut seen_map = false;

        let mut start_xy = (f64::NAN, f64::NAN, 0.0);
        let mut goal_xy = (f64::NAN, f64::NAN, 0.0);

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }

            if let Some(header) = line.strip_prefix('[') {
                let header = header
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse(format!("scenario line {lineno}: unterminated section header")))?
                    .trim()
                    .to_ascii_lowercase();
                if let Some(d) = draft.take() {
                    obstacles.push(d.finish()?);
                }
                match header.as_str() {
                    "map" => seen_map = true,
                    "start" | "goal" | "hull" | "planner" | "controller" | "camera" => {}
                    "obstacle" => draft = Some(ObstacleDraft { lineno, ..Default::default() }),
                    other => {
                        return Err(Error::Parse(format!(
                            "scenario line {lineno}: unknown section [{other}]"
                        )))
                    }
                }
                section = header;
                continue;
            }

            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("scenario line {lineno}: expected `key = value`"))
            })?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();

            match section.as_str() {
                "map" => match key.as_str() {
                    "width" => map.width = parse_f64("map", &key, value, lineno)?,
                    "height" => map.height = parse_f64("map", &key, value, lineno)?,
                    "resolution" => map.resolution = parse_f64("map", &key, value, lineno)?,
                    "origin_x" => map.origin_x = parse_f64("map", &key, value, lineno)?,
                    "origin_y" => map.origin_y = parse_f64("map", &key, value, lineno)?,
                    "unknown" => {
                        map.unknown = match value.to_ascii_lowercase().as_str() {
                            "blocked" => UnknownPolicy::Blocked,
                            "free" => UnknownPolicy::Free,
                            other => {
                                return Err(Error::Parse(format!(
                                    "scenario line {lineno}: [map] unknown: `{other}` is not blocked/free"
                                )))
                            }
                        }
                    }
                    "random_blocks" => map.random_blocks = parse_usize("map", &key, value, lineno)?,
                    "block_size" => map.block_size = parse_f64("map", &key, value, lineno)?,
                    "seed" => {
                        map.seed = value.parse().map_err(|_| {
                            Error::Parse(format!(
                                "scenario line {lineno}: [map] seed: expected an unsigned integer"
                            ))
                        })?
                    }
                    "keepout" => map.keepout = parse_f64("map", &key, value, lineno)?,
                    other => {
                        return Err(Error::Parse(format!(
                            "scenario line {lineno}: [map] unknown key `{other}`"
                        )))
                    }
                },
                "start" | "goal" => {
                    let slot = if section == "start" { &mut start_xy } else { &mut goal_xy };
                    match key.as_str() {
                        "x" => slot.0 = parse_f64(&section, &key, value, lineno)?,
                        "y" => slot.1 = parse_f64(&section, &key, value, lineno)?,
                        "psi" => {
                            slot.2 = parse_f64(&section, &key, value, lineno)?;
                            if section == "start" {
                                start_psi_seen = true;
                            } else {
                                goal_psi_seen = true;
                            }
                        }
                        other => {
                            return Err(Error::Parse(format!(
                                "scenario line {lineno}: [{section}] unknown key `{other}`"
                            )))
                        }
                    }
                    if section == "start" {
                        start = Some(start_xy);
                    } else {
                        goal = Some(goal_xy);
                    }
                }
                "obstacle" => {
                    let d = draft.as_mut().expect("draft exists inside [obstacle]");
                    match key.as_str() {
                        "type" => d.kind = Some(value.to_ascii_lowercase()),
                        "x" => d.x = Some(parse_f64("obstacle", &key, value, lineno)?),
                        "y" => d.y = Some(parse_f64("obstacle", &key, value, lineno)?),
                        "w" => d.w = Some(parse_f64("obstacle", &key, value, lineno)?),
                        "h" => d.h = Some(parse_f64("obstacle", &key, value, lineno)?),
                        "radius" => d.radius = Some(parse_f64("obstacle", &key, value, lineno)?),
                        other => {
                            return Err(Error::Parse(format!(
                                "scenario line {lineno}: [obstacle] unknown key `{other}`"
                            )))
                        }
                    }
                }
                "hull" => {
                    let v = parse_f64("hull", &key, value, lineno)?;
                    hull.set_key(&key, v).map_err(|_| {
                        Error::Parse(format!("scenario line {lineno}: [hull] unknown key `{key}`"))
                    })?;
                }
                "planner" => match key.as_str() {
                    "xy_bin" => search.xy_bin = parse_f64("planner", &key, value, lineno)?,
                    "psi_bins" => search.psi_bins = parse_usize("planner", &key, value, lineno)?,
                    "arc_length" => search.arc_length = parse_f64("planner", &key, value, lineno)?,
                    "sample_step" => search.sample_step = parse_f64("planner", &key, value, lineno)?,
                    "min_turn_radius" => {
                        let r = parse_f64("planner", &key, value, lineno)?;
                        if !(r > 0.0) {
                            return Err(Error::Parse(format!(
                                "scenario line {lineno}: [planner] min_turn_radius must be positive"
                            )));
                        }
                        search.min_turn_radius = r;
                        search.curvatures = vec![0.0, 1.0 / r, -1.0 / r, 0.5 / r, -0.5 / r];
                    }
                    "reverse_penalty" => {
                        search.reverse_penalty = parse_f64("planner", &key, value, lineno)?
                    }
                    "switch_penalty" => {
                        search.switch_penalty = parse_f64("planner", &key, value, lineno)?
                    }
                    "curvature_penalty" => {
                        search.curvature_penalty = parse_f64("planner", &key, value, lineno)?
                    }
                    "reach_threshold" => {
                        search.reach_threshold = parse_f64("planner", &key, value, lineno)?
                    }
                    "max_expansions" => {
                        search.max_expansions = parse_usize("planner", &key, value, lineno)?
                    }
                    "footprint_length" => {
                        search.footprint_length = parse_f64("planner", &key, value, lineno)?
                    }
                    "footprint_width" => {
                        search.footprint_width = parse_f64("planner", &key, value, lineno)?
                    }
                    "safety_margin" => {
                        search.safety_margin = parse_f64("planner", &key, value, lineno)?
                    }
                    "cruise_speed" => {
                        reference.cruise_speed = parse_f64("planner", &key, value, lineno)?
                    }
                    "dt" => reference.dt = parse_f64("planner", &key, value, lineno)?,
                    "settle_time" => {
                        reference.settle_time = parse_f64("planner", &key, value, lineno)?
                    }
                    other => {
                        return Err(Error::Parse(format!(
                            "scenario line {lineno}: [planner] unknown key `{other}`"
                        )))
                    }
                },
                "controller" => match key.as_str() {
                    "type" => {
                        controller.kind = match value.to_ascii_lowercase().as_str() {
                            "nmpc" => ControllerKind::Nmpc,
                            "pid" => ControllerKind::Pid,
                            other => {
                                return Err(Error::Parse(format!(
                                    "scenario line {lineno}: [controller] type: `{other}` is not nmpc/pid"
                                )))
                            }
                        }
                    }
                    "horizon" => {
                        controller.horizon = parse_usize("controller", &key, value, lineno)?;
                        if controller.horizon < 2 {
                            return Err(Error::Parse(format!(
                                "scenario line {lineno}: [controller] horizon must be at least 2"
                            )));
                        }
                    }
                    other => {
                        return Err(Error::Parse(format!(
                            "scenario line {lineno}: [controller] unknown key `{other}`"
                        )))
                    }
                },
                "camera" => match key.as_str() {
                    "mask" => camera_mask = Some(value.to_string()),
                    "config" => camera_config = Some(value.to_string()),
                    other => {
                        return Err(Error::Parse(format!(
                            "scenario line {lineno}: [camera] unknown key `{other}`"
                        )))
                    }
                },
                "" => {
                    return Err(Error::Parse(format!(
                        "scenario line {lineno}: key `{key}` appears before any [section]"
                    )))
                }
                other => unreachable!("section [{other}] was accepted but not handled"),
            }
        }
        if let Some(d) = draft.take() {
            obstacles.push(d.finish()?);
        }

        if !seen_map {
            return Err(Error::Parse("scenario: missing required section [map]".into()));
        }
        let start = start.ok_or_else(|| Error::Parse("scenario: missing required section [start]".into()))?;
        let goal = goal.ok_or_else(|| Error::Parse("scenario: missing required section [goal]".into()))?;
        for (label, v, psi_seen) in
            [("start", start, start_psi_seen), ("goal", goal, goal_psi_seen)]
        {
            if !v.0.is_finite() || !v.1.is_finite() {
                return Err(Error::Parse(format!("scenario: [{label}] needs both x and y")));
            }
            if !psi_seen {
                return Err(Error::Parse(format!("scenario: [{label}] needs psi")));
            }
        }
        if !(map.width > 0.0) || !(map.height > 0.0) {
            return Err(Error::Parse("scenario: [map] width and height must be positive".into()));
        }
        if !(map.resolution > 0.0) {
            return Err(Error::Parse("scenario: [map] resolution must be positive".into()));
        }
        if map.random_blocks > 0 && !(map.block_size > 0.0) {
            return Err(Error::Parse("scenario: [map] block_size must be positive".into()));
        }
        let inside = |p: (f64, f64, f64)| {
            p.0 >= map.origin_x
                && p.0 <= map.origin_x + map.width
                && p.1 >= map.origin_y
                && p.1 <= map.origin_y + map.height
        };
        if !inside(start) {
            return Err(Error::Parse("scenario: [start] lies outside the map".into()));
        }
        if !inside(goal) {
            return Err(Error::Parse("scenario: [goal] lies outside the map".into()));
        }
        let camera = match (camera_mask, camera_config) {
            (Some(m), Some(c)) => Some(CameraFiles { mask: PathBuf::from(m), config: PathBuf::from(c) }),
            (None, None) => None,
            _ => {
                return Err(Error::Parse(
                    "scenario: [camera] needs both `mask` and `config`".into(),
                ))
            }
        };
        hull.validate()?;

        Ok(Self {
            name: name.to_string(),
            map,
            start: SearchPose::new(start.0, start.1, start.2),
            goal: SearchPose::new(goal.0, goal.1, goal.2),
            obstacles,
            hull,
            search,
            reference,
            controller,
            camera,
        })
    }

    /// Loads a scenario file; the file stem becomes the scenario name and
    /// camera paths are resolved relative to the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("scenario file {}: {e}", path.display())))?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        let mut scenario = Self::parse(&text, name)?;
        if let Some(cam) = &mut scenario.camera {
            if let Some(dir) = path.parent() {
                if cam.mask.is_relative() {
                    cam.mask = dir.join(&cam.mask);
                }
                if cam.config.is_relative() {
                    cam.config = dir.join(&cam.config);
                }
            }
        }
        Ok(scenario)
    }

    fn grid_dims(&self) -> (usize, usize) {
        let ncols = (self.map.width / self.map.resolution).round().max(1.0) as usize;
        let nrows = (self.map.height / self.map.resolution).round().max(1.0) as usize;
        (ncols, nrows)
    }

    /// Deterministic placement of the random square blocks: centers drawn
    /// uniformly inside the map, rejected while within `keepout` of start or
    /// goal or overlapping a previous block.
    pub fn random_block_centers(&self) -> Result<Vec<(f64, f64)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.map.seed);
        let half = 0.5 * self.map.block_size;
        let lo_x = self.map.origin_x + half;
        let hi_x = self.map.origin_x + self.map.width - half;
        let lo_y = self.map.origin_y + half;
        let hi_y = self.map.origin_y + self.map.height - half;
        if !(hi_x > lo_x) || !(hi_y > lo_y) {
            return Err(Error::Parse("scenario: random blocks do not fit the map".into()));
        }
        let mut centers: Vec<(f64, f64)> = Vec::with_capacity(self.map.random_blocks);
        'outer: for _ in 0..self.map.random_blocks {
            for _attempt in 0..1000 {
                let x: f64 = rng.gen_range(lo_x..hi_x);
                let y: f64 = rng.gen_range(lo_y..hi_y);
                let clear = |px: f64, py: f64| {
                    ((x - px).powi(2) + (y - py).powi(2)).sqrt() >= self.map.keepout
                };
                let overlaps_existing = centers.iter().any(|&(cx, cy)| {
                    (x - cx).abs() < self.map.block_size && (y - cy).abs() < self.map.block_size
                });
                if clear(self.start.x, self.start.y)
                    && clear(self.goal.x, self.goal.y)
                    && !overlaps_existing
                {
                    centers.push((x, y));
                    continue 'outer;
                }
            }
            return Err(Error::Planning(format!(
                "scenario {}: could not place {} random blocks with keepout {}",
                self.name, self.map.random_blocks, self.map.keepout
            )));
        }
        Ok(centers)
    }

    /// Square obstacles drawn at the seeded random block centers. These are
    /// deliberately kept out of the charted map: they model hazards the
    /// aerial survey missed, discoverable only by onboard sensing.
    pub fn uncharted_obstacles(&self) -> Result<Vec<Obstacle>> {
        let b = self.map.block_size;
        Ok(self
            .random_block_centers()?
            .into_iter()
            .map(|(x, y)| Obstacle::Rect { x, y, w: b, h: b })
            .collect())
    }

    /// Geometrically scaled copy: map extents, poses and obstacle dimensions
    /// are multiplied by `factor`; cell resolution and the hull model are
    /// left alone, so a larger world means more cells, not coarser ones.
    pub fn scaled(&self, factor: f64) -> Scenario {
        let mut s = self.clone();
        s.map.width *= factor;
        s.map.height *= factor;
        s.map.origin_x *= factor;
        s.map.origin_y *= factor;
        s.map.block_size *= factor;
        s.map.keepout *= factor;
        for pose in [&mut s.start, &mut s.goal] {
            pose.x *= factor;
            pose.y *= factor;
        }
        for ob in &mut s.obstacles {
            match ob {
                Obstacle::Rect { x, y, w, h } => {
                    *x *= factor;
                    *y *= factor;
                    *w *= factor;
                    *h *= factor;
                }
                Obstacle::Circle { x, y, radius } => {
                    *x *= factor;
                    *y *= factor;
                    *radius *= factor;
                }
            }
        }
        s
    }

    /// The map as the aerial survey charted it: projected from the camera
    /// mask when one is configured (unmapped cells stay unknown), otherwise
    /// all free; explicit obstacles are stamped on top. Random blocks are
    /// NOT included — see [`Scenario::build_grid`] for ground truth.
    pub fn build_charted_grid(&self) -> Result<OccupancyGrid> {
        let (ncols, nrows) = self.grid_dims();
        let mut grid = match &self.camera {
            Some(cam) => {
                let mask = SegMask::read_pgm(&cam.mask)?;
                let text = std::fs::read_to_string(&cam.config)
                    .map_err(|e| Error::Parse(format!("camera file {}: {e}", cam.config.display())))?;
                let (intr, pose) = CameraPose::parse_with_intrinsics(&text)?;
                let spec = GridSpec {
                    ncols,
                    nrows,
                    resolution: self.map.resolution,
                    origin_x: self.map.origin_x,
                    origin_y: self.map.origin_y,
                };
                mask_to_grid(&mask, &intr, &pose, &spec)?
            }
            None => {
                let mut g = OccupancyGrid::new(
                    ncols,
                    nrows,
                    self.map.resolution,
                    self.map.origin_x,
                    self.map.origin_y,
                )?;
                for row in 0..nrows {
                    for col in 0..ncols {
                        g.set(col, row, Cell::Free);
                    }
                }
                g
            }
        };

        for shape in &self.obstacles {
            self.stamp(shape, &mut grid);
        }
        Ok(grid)
    }

    /// Ground-truth occupancy: the charted map plus the uncharted random
    /// blocks.
    pub fn build_grid(&self) -> Result<OccupancyGrid> {
        let mut grid = self.build_charted_grid()?;
        if self.map.random_blocks > 0 {
            for shape in self.uncharted_obstacles()? {
                self.stamp(&shape, &mut grid);
            }
        }
        Ok(grid)
    }

    fn stamp(&self, shape: &Obstacle, grid: &mut OccupancyGrid) {
        for row in 0..grid.nrows() {
            for col in 0..grid.ncols() {
                let (cx, cy) = grid.cell_center(col, row);
                if shape.contains(cx, cy) {
                    grid.set(col, row, Cell::Occupied);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "
# smoke scenario
[map]
width = 40
height = 24
resolution = 0.5
random_blocks = 0

[start]
x = 4
y = 4
psi = 0.0

[goal]
x = 36
y = 20
psi = 1.5708

[obstacle]
type = rect
x = 20
y = 12
w = 4
h = 2

[obstacle]
type = circle
x = 30
y = 8
radius = 2.5

[planner]
min_turn_radius = 4.0
cruise_speed = 1.4

[controller]
type = pid
horizon = 12
";

    #[test]
    fn parses_a_complete_scenario() {
        let sc = Scenario::parse(BASIC, "basic").unwrap();
        assert_eq!(sc.name, "basic");
        assert_eq!(sc.obstacles.len(), 2);
        assert_eq!(sc.controller.kind, ControllerKind::Pid);
        assert_eq!(sc.controller.horizon, 12);
        assert!((sc.search.min_turn_radius - 4.0).abs() < 1e-12);
        assert!(sc.search.curvatures.contains(&0.25));
        assert!((sc.reference.cruise_speed - 1.4).abs() < 1e-12);
        assert!((sc.goal.psi - 1.5708).abs() < 1e-9);
        assert!(sc.camera.is_none());
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected_with_line_numbers() {
        let bad_key = BASIC.replace("width = 40", "breadth = 40");
        let err = Scenario::parse(&bad_key, "x").unwrap_err().to_string();
        assert!(err.contains("breadth"), "{err}");
        assert!(err.contains("line 4"), "{err}");

        let bad_section = format!("{BASIC}\n[weather]\nwind = 3\n");
        let err = Scenario::parse(&bad_section, "x").unwrap_err().to_string();
        assert!(err.contains("[weather]"), "{err}");
    }

    #[test]
    fn missing_sections_are_reported() {
        let no_goal: String =
            BASIC.lines().take_while(|l| !l.contains("[goal]")).collect::<Vec<_>>().join("\n");
        let err = Scenario::parse(&no_goal, "x").unwrap_err().to_string();
        assert!(err.contains("[goal]"), "{err}");
    }

    #[test]
    fn incomplete_obstacles_are_reported() {
        let truncated = BASIC.replace("radius = 2.5", "");
        let err = Scenario::parse(&truncated, "x").unwrap_err().to_string();
        assert!(err.contains("radius"), "{err}");

        let negative = BASIC.replace("radius = 2.5", "radius = -1");
        let err = Scenario::parse(&negative, "x").unwrap_err().to_string();
        assert!(err.contains("positive radius"), "{err}");
    }

    #[test]
    fn grid_has_obstacles_where_the_shapes_are() {
        let sc = Scenario::parse(BASIC, "basic").unwrap();
        let grid = sc.build_grid().unwrap();
        // Inside the rect (center 20,12).
        assert!(grid.point_blocked(20.0, 12.0, UnknownPolicy::Blocked));
        // Inside the circle (center 30,8 radius 2.5).
        assert!(grid.point_blocked(30.5, 8.5, UnknownPolicy::Blocked));
        // Start and goal areas free.
        assert!(!grid.point_blocked(4.0, 4.0, UnknownPolicy::Blocked));
        assert!(!grid.point_blocked(36.0, 20.0, UnknownPolicy::Blocked));
    }

    fn with_random_blocks(seed: u64) -> String {
        BASIC
            .replace("random_blocks = 0", &format!("random_blocks = 5\nblock_size = 2.0\nseed = {seed}\nkeepout = 6.0"))
    }

    #[test]
    fn random_blocks_are_deterministic_per_seed() {
        let a1 = Scenario::parse(&with_random_blocks(7), "a").unwrap().build_grid().unwrap();
        let a2 = Scenario::parse(&with_random_blocks(7), "a").unwrap().build_grid().unwrap();
        let b = Scenario::parse(&with_random_blocks(8), "b").unwrap().build_grid().unwrap();
        assert_eq!(a1.to_text(), a2.to_text());
        assert_ne!(a1.to_text(), b.to_text());
    }

    #[test]
    fn random_blocks_respect_the_keepout_radius() {
        let sc = Scenario::parse(&with_random_blocks(3), "a").unwrap();
        for (x, y) in sc.random_block_centers().unwrap() {
            let ds = ((x - sc.start.x).powi(2) + (y - sc.start.y).powi(2)).sqrt();
            let dg = ((x - sc.goal.x).powi(2) + (y - sc.goal.y).powi(2)).sqrt();
            assert!(ds >= 6.0, "block at ({x},{y}) is {ds} m from start");
            assert!(dg >= 6.0, "block at ({x},{y}) is {dg} m from goal");
        }
    }

    #[test]
    fn hull_overrides_apply_and_are_validated() {
        let with_hull = format!("{BASIC}\n[hull]\ntau_r_max = 80\n");
        let sc = Scenario::parse(&with_hull, "x").unwrap();
        assert!((sc.hull.tau_r_max - 80.0).abs() < 1e-12);

        let bad = format!("{BASIC}\n[hull]\nm11 = -5\n");
        assert!(Scenario::parse(&bad, "x").is_err());
    }

    #[test]
    fn start_outside_the_map_is_rejected() {
        let outside = BASIC.replace("x = 4\ny = 4", "x = -4\ny = 4");
        let err = Scenario::parse(&outside, "x").unwrap_err().to_string();
        assert!(err.contains("[start]"), "{err}");
    }
}
