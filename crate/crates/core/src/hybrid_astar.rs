//! Lattice search over poses with forward/reverse arc primitives.
//!
//! States are continuous poses; the closed set buckets them into position,
//! heading and travel-direction bins so the search terminates. Each expansion
//! rolls a constant-curvature arc forward or backward and collision-checks the
//! swept footprint rectangle against the occupancy grid. Termination happens
//! through an analytic curvature-bounded connection to the goal: attempted
//! every pop near the goal, periodically farther out, and accepted once the
//! connection is collision-free. That makes the final pose exact instead of
//! bin-accurate.
//!
//! The cost-to-go estimate is the max of two admissible parts: the exact
//! obstacle-free curvature-bounded distance, and an obstacle-aware 2D grid
//! distance deflated by the worst-case overestimate of 8-connected moves over
//! straight-line travel.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::angle::wrap_angle;
use crate::error::{Error, Result};
use crate::grid::{OccupancyGrid, UnknownPolicy};
use crate::reeds_shepp::{advance_world, reeds_shepp_connect, reeds_shepp_distance, RsPath, SegKind};

/// Travel direction along a path segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        }
    }
}

/// A planar pose tagged with the direction of motion that reaches it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchPose {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub direction: Direction,
}

impl SearchPose {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self { x, y, psi: wrap_angle(psi), direction: Direction::Forward }
    }

    pub fn dist_xy(&self, other: &SearchPose) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Tuning knobs for the search. Defaults fit a small twin-hull vessel on a
/// half-meter grid.
#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Closed-set position bin edge (m).
    pub xy_bin: f64,
    /// Number of heading bins over the full circle.
    pub psi_bins: usize,
    /// Arc length of one motion primitive (m).
    pub arc_length: f64,
    /// Collision-check and output sampling step along primitives (m).
    pub sample_step: f64,
    /// Signed curvatures of the primitive set (1/m); must not exceed
    /// `1 / min_turn_radius` in magnitude.
    pub curvatures: Vec<f64>,
    /// Turning radius used by the analytic goal connection (m).
    pub min_turn_radius: f64,
    /// Multiplier on distance traveled in reverse.
    pub reverse_penalty: f64,
    /// Flat cost for changing travel direction.
    pub switch_penalty: f64,
    /// Cost per meter per unit curvature, discourages weaving.
    pub curvature_penalty: f64,
    /// Within this distance of the goal the analytic connection is attempted
    /// on every expansion (m).
    pub reach_threshold: f64,
    /// Abort after this many node expansions.
    pub max_expansions: usize,
    /// Footprint rectangle, centered on the pose (m).
    pub footprint_length: f64,
    pub footprint_width: f64,
    /// Extra clearance added around the footprint for planning-time collision
    /// checks (m). Inflating here keeps routes far enough from walls that a
    /// tracker's deviation does not turn into hull contact; checks against
    /// physical geometry should use zero.
    pub safety_margin: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        let r = 3.0;
        Self {
            xy_bin: 0.5,
            psi_bins: 36,
            arc_length: 1.0,
            sample_step: 0.25,
            curvatures: vec![0.0, 1.0 / r, -1.0 / r, 0.5 / r, -0.5 / r],
            min_turn_radius: r,
            reverse_penalty: 2.0,
            switch_penalty: 1.0,
            curvature_penalty: 0.1,
            reach_threshold: 3.0,
            max_expansions: 300_000,
            footprint_length: 1.2,
            footprint_width: 0.8,
            safety_margin: 0.0,
        }
    }
}

impl SearchOptions {
    fn validate(&self) -> Result<()> {
        if !(self.xy_bin > 0.0) || self.psi_bins == 0 {
            return Err(Error::Planning("search bins must be positive".into()));
        }
        if !(self.arc_length > 0.0) || !(self.sample_step > 0.0) {
            return Err(Error::Planning("primitive lengths must be positive".into()));
        }
        if !(self.min_turn_radius > 0.0) {
            return Err(Error::Planning("min_turn_radius must be positive".into()));
        }
        let kmax = 1.0 / self.min_turn_radius + 1e-12;
        if self.curvatures.is_empty() || self.curvatures.iter().any(|k| k.abs() > kmax) {
            return Err(Error::Planning("primitive curvatures exceed the turning radius".into()));
        }
        if self.reverse_penalty < 1.0 {
            return Err(Error::Planning("reverse_penalty must be at least 1".into()));
        }
        if !(self.safety_margin >= 0.0) {
            return Err(Error::Planning("safety_margin must not be negative".into()));
        }
        Ok(())
    }
}

/// Geometric path produced by the search: densely sampled poses with
/// cumulative arc length.
#[derive(Debug, Clone)]
pub struct PlannedPath {
    pub poses: Vec<SearchPose>,
    /// Cumulative arc length per pose, starting at 0.
    pub s: Vec<f64>,
    /// Total arc length (m).
    pub length: f64,
    /// Search cost of the winning solution (includes penalties).
    pub cost: f64,
}

pub const PATH_CSV_HEADER: &str = "s,x,y,psi,direction";

impl PlannedPath {
    /// Pose at arc position `s`, linearly interpolated (heading via shortest
    /// arc). Clamps outside the path.
    pub fn pose_at_s(&self, s: f64) -> SearchPose {
        if self.poses.len() == 1 || s <= 0.0 {
            let mut p = self.poses[0];
            if self.poses.len() > 1 {
                p.direction = self.poses[1].direction;
            }
            return p;
        }
        if s >= self.length {
            return *self.poses.last().unwrap();
        }
        let hi = self.s.partition_point(|&v| v < s).max(1);
        let (a, b) = (self.poses[hi - 1], self.poses[hi]);
        let (sa, sb) = (self.s[hi - 1], self.s[hi]);
        let w = if sb > sa { (s - sa) / (sb - sa) } else { 0.0 };
        SearchPose {
            x: a.x + w * (b.x - a.x),
            y: a.y + w * (b.y - a.y),
            psi: wrap_angle(a.psi + w * crate::angle::angle_diff(b.psi, a.psi)),
            direction: b.direction,
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.poses.len() * 48 + 32);
        out.push_str(PATH_CSV_HEADER);
        out.push('\n');
        for (pose, s) in self.poses.iter().zip(&self.s) {
            let d = match pose.direction {
                Direction::Forward => 1,
                Direction::Reverse => -1,
            };
            out.push_str(&format!("{:.9},{:.9},{:.9},{:.9},{}\n", s, pose.x, pose.y, pose.psi, d));
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// True when the footprint rectangle centered on `pose` stays clear of every
/// blocked cell. Poses whose footprint leaves the mapped area are treated as
/// colliding.
pub fn collision_free(
    grid: &OccupancyGrid,
    policy: UnknownPolicy,
    pose: &SearchPose,
    opts: &SearchOptions,
) -> bool {
    let hl = 0.5 * opts.footprint_length + opts.safety_margin;
    let hw = 0.5 * opts.footprint_width + opts.safety_margin;
    let (sp, cp) = pose.psi.sin_cos();
    let ux = (cp, sp);
    let vx = (-sp, cp);
    let corners = [
        (pose.x + hl * ux.0 + hw * vx.0, pose.y + hl * ux.1 + hw * vx.1),
        (pose.x + hl * ux.0 - hw * vx.0, pose.y + hl * ux.1 - hw * vx.1),
        (pose.x - hl * ux.0 + hw * vx.0, pose.y - hl * ux.1 + hw * vx.1),
        (pose.x - hl * ux.0 - hw * vx.0, pose.y - hl * ux.1 - hw * vx.1),
    ];
    let (x0, y0, x1, y1) = corners.iter().fold(
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        |acc, c| (acc.0.min(c.0), acc.1.min(c.1), acc.2.max(c.0), acc.3.max(c.1)),
    );
    let (ox, oy) = grid.origin();
    let (ew, eh) = grid.extent();
    if x0 < ox || y0 < oy || x1 > ox + ew || y1 > oy + eh {
        return false;
    }
    let res = grid.resolution();
    let ci0 = ((x0 - ox) / res).floor() as i64;
    let cj0 = ((y0 - oy) / res).floor() as i64;
    let ci1 = ((x1 - ox) / res).floor() as i64;
    let cj1 = ((y1 - oy) / res).floor() as i64;
    for cj in cj0..=cj1 {
        for ci in ci0..=ci1 {
            if grid.blocked(ci, cj, policy)
                && rect_overlaps_cell(pose, hl, hw, grid, ci, cj, &corners)
            {
                return false;
            }
        }
    }
    true
}

/// Separating-axis test between the footprint rectangle and one grid cell.
fn rect_overlaps_cell(
    pose: &SearchPose,
    hl: f64,
    hw: f64,
    grid: &OccupancyGrid,
    ci: i64,
    cj: i64,
    corners: &[(f64, f64); 4],
) -> bool {
    let res = grid.resolution();
    let (ox, oy) = grid.origin();
    let cx0 = ox + ci as f64 * res;
    let cy0 = oy + cj as f64 * res;
    let (cx1, cy1) = (cx0 + res, cy0 + res);

    // Cell axes: rectangle corner projections vs the cell interval.
    let (rx0, rx1) = corners.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, c| (a.0.min(c.0), a.1.max(c.0)));
    if rx1 < cx0 || rx0 > cx1 {
        return false;
    }
    let (ry0, ry1) = corners.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, c| (a.0.min(c.1), a.1.max(c.1)));
    if ry1 < cy0 || ry0 > cy1 {
        return false;
    }

    // Rectangle axes: cell corner projections vs the rectangle interval.
    let (sp, cp) = pose.psi.sin_cos();
    let cell = [(cx0, cy0), (cx1, cy0), (cx0, cy1), (cx1, cy1)];
    for (ax, half) in [((cp, sp), hl), ((-sp, cp), hw)] {
        let center = ax.0 * pose.x + ax.1 * pose.y;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(px, py) in &cell {
            let p = ax.0 * px + ax.1 * py;
            lo = lo.min(p);
            hi = hi.max(p);
        }
        if hi < center - half || lo > center + half {
            return false;
        }
    }
    true
}

/// Worst-case ratio of 8-connected grid distance to straight-line distance
/// ((sqrt(2) - 1) diagonal detour on the least favorable bearing).
const OCTILE_OVERESTIMATE: f64 = 1.082_392_200_292_394;

/// Obstacle-aware 2D lower bound on remaining travel, precomputed from the
/// goal cell with Dijkstra over free cells.
pub struct GridHeuristic {
    dist: Vec<f64>,
    ncols: usize,
    nrows: usize,
    resolution: f64,
    origin_x: f64,
    origin_y: f64,
}

#[derive(PartialEq)]
struct DijkEntry(f64, usize);

impl Eq for DijkEntry {}
impl PartialOrd for DijkEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for DijkEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want smallest cost first.
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl GridHeuristic {
    pub fn build(grid: &OccupancyGrid, policy: UnknownPolicy, goal_x: f64, goal_y: f64) -> Self {
        let (ncols, nrows) = (grid.ncols(), grid.nrows());
        let res = grid.resolution();
        let mut dist = vec![f64::INFINITY; ncols * nrows];
        let mut heap = BinaryHeap::new();
        if let Some((gi, gj)) = grid.world_to_cell(goal_x, goal_y) {
            if !grid.blocked(gi as i64, gj as i64, policy) {
                dist[gj * ncols + gi] = 0.0;
                heap.push(DijkEntry(0.0, gj * ncols + gi));
            }
        }
        let diag = res * std::f64::consts::SQRT_2;
        while let Some(DijkEntry(d, idx)) = heap.pop() {
            if d > dist[idx] {
                continue;
            }
            let (i, j) = ((idx % ncols) as i64, (idx / ncols) as i64);
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ni, nj) = (i + di, j + dj);
                    if grid.blocked(ni, nj, policy) {
                        continue;
                    }
                    let nidx = nj as usize * ncols + ni as usize;
                    let step = if di != 0 && dj != 0 { diag } else { res };
                    let nd = d + step;
                    if nd < dist[nidx] {
                        dist[nidx] = nd;
                        heap.push(DijkEntry(nd, nidx));
                    }
                }
            }
        }
        let (ox, oy) = grid.origin();
        Self { dist, ncols, nrows, resolution: res, origin_x: ox, origin_y: oy }
    }

    /// Lower bound on remaining path length from `(x, y)`; infinite where no
    /// free-cell route to the goal exists.
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        let i = ((x - self.origin_x) / self.resolution).floor();
        let j = ((y - self.origin_y) / self.resolution).floor();
        if i < 0.0 || j < 0.0 || i >= self.ncols as f64 || j >= self.nrows as f64 {
            return f64::INFINITY;
        }
        let raw = self.dist[j as usize * self.ncols + i as usize];
        if !raw.is_finite() {
            return f64::INFINITY;
        }
        // Deflate the octile overestimate, then allow for the within-cell
        // offset between a continuous pose and its cell center.
        (raw / OCTILE_OVERESTIMATE - self.resolution * std::f64::consts::SQRT_2 * 0.5).max(0.0)
    }
}

struct Node {
    pose: SearchPose,
    g: f64,
    parent: Option<usize>,
    /// Primitive that produced this node: (curvature, signed arc length).
    prim: Option<(f64, f64)>,
}

#[derive(PartialEq)]
struct OpenEntry {
    f: f64,
    h: f64,
    seq: u64,
    node: usize,
}

impl Eq for OpenEntry {}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f, ties to smaller h, then insertion order.
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.seq.cmp(&self.seq))
    }
}

fn bin_key(pose: &SearchPose, opts: &SearchOptions) -> (i64, i64, usize, Direction) {
    let bi = (pose.x / opts.xy_bin).floor() as i64;
    let bj = (pose.y / opts.xy_bin).floor() as i64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let frac = (pose.psi + std::f64::consts::PI) / two_pi;
    let bp = ((frac * opts.psi_bins as f64).floor() as usize) % opts.psi_bins;
    (bi, bj, bp, pose.direction)
}

/// Penalized cost of an analytic connection, matching the primitive cost
/// model so the tail competes fairly with further expansion.
fn rs_tail_cost(path: &RsPath, arrive_dir: Direction, opts: &SearchOptions) -> f64 {
    let mut cost = 0.0;
    let mut dir = arrive_dir;
    for seg in &path.segments {
        let seg_dir = if seg.length >= 0.0 { Direction::Forward } else { Direction::Reverse };
        if seg_dir != dir {
            cost += opts.switch_penalty;
        }
        dir = seg_dir;
        let len = seg.length.abs();
        let mult = if seg_dir == Direction::Forward { 1.0 } else { opts.reverse_penalty };
        let kappa = match seg.kind {
            SegKind::Straight => 0.0,
            _ => 1.0 / path.radius,
        };
        cost += len * mult + opts.curvature_penalty * kappa * len;
    }
    cost
}

fn rs_shot_ok(
    path: &RsPath,
    from: &SearchPose,
    grid: &OccupancyGrid,
    policy: UnknownPolicy,
    opts: &SearchOptions,
) -> bool {
    path.is_valid()
        && path
            .sample_with_s(from, opts.sample_step)
            .iter()
            .all(|(p, _)| collision_free(grid, policy, p, opts))
}

/// Plans a kinematically feasible, collision-free path from `start` to `goal`.
pub fn search(
    grid: &OccupancyGrid,
    policy: UnknownPolicy,
    start: SearchPose,
    goal: SearchPose,
    opts: &SearchOptions,
) -> Result<PlannedPath> {
    opts.validate()?;
    if !collision_free(grid, policy, &start, opts) {
        return Err(Error::Planning(format!(
            "start pose ({:.2}, {:.2}, {:.2}) is in collision",
            start.x, start.y, start.psi
        )));
    }
    if !collision_free(grid, policy, &goal, opts) {
        return Err(Error::Planning(format!(
            "goal pose ({:.2}, {:.2}, {:.2}) is in collision",
            goal.x, goal.y, goal.psi
        )));
    }

    let h2d = GridHeuristic::build(grid, policy, goal.x, goal.y);
    let heuristic = |pose: &SearchPose| -> f64 {
        let rs = reeds_shepp_distance(pose, &goal, opts.min_turn_radius);
        rs.max(h2d.value_at(pose.x, pose.y))
    };

    let h0 = heuristic(&start);
    if !h0.is_finite() {
        return Err(Error::Planning("no free-cell route between start and goal".into()));
    }

    let mut nodes = vec![Node { pose: start, g: 0.0, parent: None, prim: None }];
    let mut best: HashMap<(i64, i64, usize, Direction), f64> = HashMap::new();
    best.insert(bin_key(&start, opts), 0.0);
    let mut open = BinaryHeap::new();
    let mut seq: u64 = 0;
    open.push(OpenEntry { f: h0, h: h0, seq, node: 0 });

    let mut expansions = 0usize;
    let mut pops_since_shot = 0usize;

    while let Some(entry) = open.pop() {
        let node_idx = entry.node;
        let (pose, g) = (nodes[node_idx].pose, nodes[node_idx].g);
        if g > best.get(&bin_key(&pose, opts)).copied().unwrap_or(f64::INFINITY) {
            continue; // stale entry superseded by a cheaper route to this bin
        }

        // Analytic goal connection: every pop near the goal, sparser with the
        // remaining distance so far-field expansion stays cheap.
        let h = entry.h;
        pops_since_shot += 1;
        let period = if h <= opts.reach_threshold { 1 } else { (h * 0.5) as usize } .max(1).min(40);
        if pops_since_shot >= period {
            pops_since_shot = 0;
            let shot = reeds_shepp_connect(&pose, &goal, opts.min_turn_radius);
            if rs_shot_ok(&shot, &pose, grid, policy, opts) {
                let cost = g + rs_tail_cost(&shot, pose.direction, opts);
                return Ok(reconstruct(&nodes, node_idx, &shot, opts, cost));
            }
        }

        expansions += 1;
        if expansions > opts.max_expansions {
            return Err(Error::Planning(format!(
                "search budget of {} expansions exhausted",
                opts.max_expansions
            )));
        }

        for &kappa in &opts.curvatures {
            for dir in [Direction::Forward, Direction::Reverse] {
                let signed = dir.sign() * opts.arc_length;
                let Some(next) = roll_primitive(grid, policy, &pose, kappa, signed, opts) else {
                    continue;
                };
                let mut cost = opts.arc_length
                    * if dir == Direction::Forward { 1.0 } else { opts.reverse_penalty };
                cost += opts.curvature_penalty * kappa.abs() * opts.arc_length;
                if dir != pose.direction {
                    cost += opts.switch_penalty;
                }
                let ng = g + cost;
                let key = bin_key(&next, opts);
                if ng < best.get(&key).copied().unwrap_or(f64::INFINITY) - 1e-12 {
                    best.insert(key, ng);
                    let nh = heuristic(&next);
                    if !nh.is_finite() {
                        continue;
                    }
                    nodes.push(Node {
                        pose: next,
                        g: ng,
                        parent: Some(node_idx),
                        prim: Some((kappa, signed)),
                    });
                    seq += 1;
                    open.push(OpenEntry { f: ng + nh, h: nh, seq, node: nodes.len() - 1 });
                }
            }
        }
    }

    Err(Error::Planning("open set exhausted without reaching the goal".into()))
}

/// Rolls one arc primitive, collision-checking every sample. Returns the end
/// pose, or None if any sample collides.
fn roll_primitive(
    grid: &OccupancyGrid,
    policy: UnknownPolicy,
    from: &SearchPose,
    kappa: f64,
    signed_len: f64,
    opts: &SearchOptions,
) -> Option<SearchPose> {
    let dir = if signed_len >= 0.0 { Direction::Forward } else { Direction::Reverse };
    let n = ((signed_len.abs() / opts.sample_step).ceil() as usize).max(1);
    let start = (from.x, from.y, from.psi);
    let mut last = *from;
    for k in 1..=n {
        let s = signed_len * k as f64 / n as f64;
        let (x, y, psi) = advance_world(start, kappa, s);
        last = SearchPose { x, y, psi: wrap_angle(psi), direction: dir };
        if !collision_free(grid, policy, &last, opts) {
            return None;
        }
    }
    Some(last)
}

fn reconstruct(
    nodes: &[Node],
    goal_node: usize,
    tail: &RsPath,
    opts: &SearchOptions,
    cost: f64,
) -> PlannedPath {
    let mut chain = Vec::new();
    let mut cur = Some(goal_node);
    while let Some(idx) = cur {
        chain.push(idx);
        cur = nodes[idx].parent;
    }
    chain.reverse();

    let root = nodes[chain[0]].pose;
    let mut poses = vec![root];
    let mut s = vec![0.0];
    for &idx in &chain[1..] {
        let (kappa, signed) = nodes[idx].prim.expect("non-root node has a primitive");
        let parent = nodes[nodes[idx].parent.unwrap()].pose;
        let dir = if signed >= 0.0 { Direction::Forward } else { Direction::Reverse };
        let n = ((signed.abs() / opts.sample_step).ceil() as usize).max(1);
        let start = (parent.x, parent.y, parent.psi);
        let s0 = *s.last().unwrap();
        for k in 1..=n {
            let a = signed * k as f64 / n as f64;
            let (x, y, psi) = advance_world(start, kappa, a);
            poses.push(SearchPose { x, y, psi: wrap_angle(psi), direction: dir });
            s.push(s0 + a.abs());
        }
    }
    // First pose carries the direction of the first motion.
    if poses.len() > 1 {
        poses[0].direction = poses[1].direction;
    }

    let anchor = *poses.last().unwrap();
    let s0 = *s.last().unwrap();
    for (pose, ds) in tail.sample_with_s(&anchor, opts.sample_step).into_iter().skip(1) {
        poses.push(pose);
        s.push(s0 + ds);
    }
    if poses.len() > 1 && tail.segments.is_empty() {
        // Goal coincides with the last expanded pose; nothing to append.
    }
    let length = *s.last().unwrap();
    PlannedPath { poses, s, length, cost }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cell;
    use approx::assert_relative_eq;

    fn open_grid(w: usize, h: usize) -> OccupancyGrid {
        let mut g = OccupancyGrid::new(w, h, 0.5, 0.0, 0.0).unwrap();
        for j in 0..h {
            for i in 0..w {
                g.set(i, j, Cell::Free);
            }
        }
        g
    }

    /// Wall at x in [14.5, 15) with a gap at y in [14, 16).
    fn wall_grid() -> OccupancyGrid {
        let mut g = open_grid(60, 40);
        let wall_col = 29; // cell x range [14.5, 15.0)
        for j in 0..40 {
            let y = j as f64 * 0.5;
            if !(14.0..16.0).contains(&y) {
                g.set(wall_col, j, Cell::Occupied);
            }
        }
        g
    }

    #[test]
    fn straight_corridor_is_near_optimal() {
        let g = open_grid(60, 40);
        let start = SearchPose::new(5.0, 10.0, 0.0);
        let goal = SearchPose::new(25.0, 10.0, 0.0);
        let path = search(&g, UnknownPolicy::Blocked, start, goal, &SearchOptions::default()).unwrap();
        assert!(path.length >= 20.0 - 1e-6);
        assert!(path.length <= 20.5, "length {}", path.length);
        let last = path.poses.last().unwrap();
        assert!(last.dist_xy(&goal) < 1e-6);
        assert!(crate::angle::angle_diff(last.psi, goal.psi).abs() < 1e-6);
        for w in path.s.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn plans_through_the_gap_and_stays_clear() {
        let g = wall_grid();
        let opts = SearchOptions::default();
        let start = SearchPose::new(5.0, 5.0, 0.0);
        let goal = SearchPose::new(25.0, 5.0, 0.0);
        let path = search(&g, UnknownPolicy::Blocked, start, goal, &opts).unwrap();
        for p in &path.poses {
            assert!(collision_free(&g, UnknownPolicy::Blocked, p, &opts), "collision at {p:?}");
        }
        // The only opening is at y in [14, 16); the crossing must use it.
        let crossing: Vec<&SearchPose> =
            path.poses.iter().filter(|p| (p.x - 14.75).abs() < 0.6).collect();
        assert!(!crossing.is_empty());
        for p in crossing {
            assert!(p.y > 13.0 && p.y < 17.0, "crossed wall outside the gap at {p:?}");
        }
        // Detour through the gap is well beyond the straight-line distance.
        assert!(path.length > 24.0);
    }

    #[test]
    fn sealed_wall_is_reported_unreachable() {
        let mut g = wall_grid();
        for j in 0..40 {
            g.set(29, j, Cell::Occupied);
        }
        let start = SearchPose::new(5.0, 5.0, 0.0);
        let goal = SearchPose::new(25.0, 5.0, 0.0);
        let err = search(&g, UnknownPolicy::Blocked, start, goal, &SearchOptions::default());
        assert!(matches!(err, Err(Error::Planning(_))));
    }

    #[test]
    fn start_in_collision_is_rejected() {
        let mut g = open_grid(20, 20);
        g.set(10, 10, Cell::Occupied);
        let start = SearchPose::new(5.25, 5.25, 0.0); // inside the occupied cell
        let goal = SearchPose::new(8.0, 5.0, 0.0);
        let err = search(&g, UnknownPolicy::Blocked, start, goal, &SearchOptions::default());
        assert!(matches!(err, Err(Error::Planning(msg)) if msg.contains("start")));
    }

    #[test]
    fn heuristic_is_exact_straight_behind_the_goal() {
        let g = open_grid(80, 40);
        let goal = SearchPose::new(30.0, 10.0, 0.0);
        let pose = SearchPose::new(20.0, 10.0, 0.0);
        let rs = reeds_shepp_distance(&pose, &goal, 3.0);
        assert_relative_eq!(rs, 10.0, epsilon = 1e-9);
        let h2d = GridHeuristic::build(&g, UnknownPolicy::Blocked, goal.x, goal.y);
        assert!(h2d.value_at(pose.x, pose.y) <= 10.0);
        assert!(rs.max(h2d.value_at(pose.x, pose.y)) == rs);
    }

    #[test]
    fn grid_heuristic_is_a_lower_bound_with_obstacles() {
        let g = wall_grid();
        let h = GridHeuristic::build(&g, UnknownPolicy::Blocked, 25.0, 5.0);
        // Start is separated from the goal by the wall; the 2D bound must see
        // the detour: clearly more than the 20 m straight line, but below the
        // true detour length.
        let v = h.value_at(5.0, 5.0);
        assert!(v > 20.0, "detour bound {v}");
        assert!(v < 30.0);
        // Behind a sealed region the bound is infinite.
        let mut sealed = wall_grid();
        for j in 0..40 {
            sealed.set(29, j, Cell::Occupied);
        }
        let hs = GridHeuristic::build(&sealed, UnknownPolicy::Blocked, 25.0, 5.0);
        assert!(hs.value_at(5.0, 5.0).is_infinite());
    }

    #[test]
    fn reverse_goal_uses_reverse_motion() {
        let g = open_grid(60, 40);
        let start = SearchPose::new(15.0, 10.0, 0.0);
        let goal = SearchPose::new(10.0, 10.0, 0.0); // directly astern
        let path = search(&g, UnknownPolicy::Blocked, start, goal, &SearchOptions::default()).unwrap();
        assert!(path.poses.iter().any(|p| p.direction == Direction::Reverse));
        assert!(path.length < 6.0, "expected a short backing move, got {}", path.length);
    }

    #[test]
    fn forward_goal_stays_forward() {
        let g = open_grid(60, 40);
        let start = SearchPose::new(5.0, 10.0, 0.0);
        let goal = SearchPose::new(20.0, 12.0, 0.3);
        let path = search(&g, UnknownPolicy::Blocked, start, goal, &SearchOptions::default()).unwrap();
        assert!(path.poses.iter().all(|p| p.direction == Direction::Forward));
    }

    #[test]
    fn search_is_deterministic() {
        let g = wall_grid();
        let start = SearchPose::new(5.0, 5.0, 0.0);
        let goal = SearchPose::new(25.0, 5.0, 0.0);
        let a = search(&g, UnknownPolicy::Blocked, start, goal, &SearchOptions::default()).unwrap();
        let b = search(&g, UnknownPolicy::Blocked, start, goal, &SearchOptions::default()).unwrap();
        assert_eq!(a.poses.len(), b.poses.len());
        for (pa, pb) in a.poses.iter().zip(&b.poses) {
            assert_eq!(pa.x.to_bits(), pb.x.to_bits());
            assert_eq!(pa.y.to_bits(), pb.y.to_bits());
            assert_eq!(pa.psi.to_bits(), pb.psi.to_bits());
        }
    }

    #[test]
    fn footprint_collision_matches_geometry() {
        let mut g = open_grid(20, 20);
        g.set(10, 10, Cell::Occupied); // world [5.0, 5.5) x [5.0, 5.5)
        let opts = SearchOptions::default(); // footprint 1.2 x 0.8
        let policy = UnknownPolicy::Blocked;

        // Axis-aligned, just clear of the cell edge (half width 0.4).
        let clear = SearchPose::new(5.25, 4.55, 0.0);
        assert!(collision_free(&g, policy, &clear, &opts));
        // Nudged into the cell.
        let hit = SearchPose::new(5.25, 4.65, 0.0);
        assert!(!collision_free(&g, policy, &hit, &opts));

        // Diagonal pose whose AABB overlaps the cell but whose rectangle does
        // not: center placed so the cell corner lies beyond the long axis.
        let diag = SearchPose::new(5.85, 4.45, std::f64::consts::FRAC_PI_4);
        let d_corner = ((5.5 - diag.x).powi(2) + (5.0 - diag.y).powi(2)).sqrt();
        assert!(d_corner > 0.65, "test geometry: corner at {d_corner}");
        assert!(collision_free(&g, policy, &diag, &opts));

        // Same heading, moved onto the corner.
        let diag_hit = SearchPose::new(5.6, 4.9, std::f64::consts::FRAC_PI_4);
        assert!(!collision_free(&g, policy, &diag_hit, &opts));
    }

    #[test]
    fn safety_margin_inflates_the_footprint() {
        let mut g = open_grid(20, 20);
        g.set(10, 10, Cell::Occupied); // world [5.0, 5.5) x [5.0, 5.5)
        let policy = UnknownPolicy::Blocked;
        // Clear of the cell by ~0.05 m with the bare hull (half width 0.4)...
        let pose = SearchPose::new(5.25, 4.55, 0.0);
        assert!(collision_free(&g, policy, &pose, &SearchOptions::default()));
        // ...but inside the padded envelope once the margin is applied.
        let padded = SearchOptions { safety_margin: 0.4, ..SearchOptions::default() };
        assert!(!collision_free(&g, policy, &pose, &padded));
        // Far enough out that even the padded envelope clears.
        let well_clear = SearchPose::new(5.25, 4.0, 0.0);
        assert!(collision_free(&g, policy, &well_clear, &padded));
    }

    #[test]
    fn footprint_outside_grid_collides() {
        let g = open_grid(20, 20);
        let opts = SearchOptions::default();
        let edge = SearchPose::new(0.3, 5.0, 0.0); // half length 0.6 pokes out
        assert!(!collision_free(&g, UnknownPolicy::Blocked, &edge, &opts));
        let inside = SearchPose::new(0.75, 5.0, 0.0);
        assert!(collision_free(&g, UnknownPolicy::Blocked, &inside, &opts));
    }

    #[test]
    fn unknown_cells_block_only_under_blocked_policy() {
        let mut g = open_grid(20, 20);
        g.set(10, 10, Cell::Unknown);
        let pose = SearchPose::new(5.25, 5.25, 0.0);
        let opts = SearchOptions::default();
        assert!(!collision_free(&g, UnknownPolicy::Blocked, &pose, &opts));
        assert!(collision_free(&g, UnknownPolicy::Free, &pose, &opts));
    }

    #[test]
    fn path_csv_has_expected_shape() {
        let g = open_grid(60, 40);
        let start = SearchPose::new(5.0, 10.0, 0.0);
        let goal = SearchPose::new(15.0, 10.0, 0.0);
        let path = search(&g, UnknownPolicy::Blocked, start, goal, &SearchOptions::default()).unwrap();
        let csv = path.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), PATH_CSV_HEADER);
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), path.poses.len());
        assert!(rows.iter().all(|r| r.split(',').count() == 5));
        assert!(rows.iter().all(|r| r.ends_with(",1") || r.ends_with(",-1")));
    }

    #[test]
    fn pose_interpolation_clamps_and_blends() {
        let g = open_grid(60, 40);
        let start = SearchPose::new(5.0, 10.0, 0.0);
        let goal = SearchPose::new(15.0, 10.0, 0.0);
        let path = search(&g, UnknownPolicy::Blocked, start, goal, &SearchOptions::default()).unwrap();
        let p0 = path.pose_at_s(-1.0);
        assert_relative_eq!(p0.x, 5.0, epsilon = 1e-9);
        let pe = path.pose_at_s(path.length + 5.0);
        assert!(pe.dist_xy(&goal) < 1e-6);
        let mid = path.pose_at_s(5.0);
        assert_relative_eq!(mid.x, 10.0, epsilon = 1e-6);
        assert_relative_eq!(mid.y, 10.0, epsilon = 1e-6);
    }
}
