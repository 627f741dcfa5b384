//! World-frame occupancy grid with three-valued cells plus the derived fields
//! the planners consume: disc inflation and a signed Euclidean distance
//! transform.
//!
//! Cell `(col, row)` covers the square `[origin + col*res, origin + (col+1)*res)`
//! per axis; storage is row-major with row 0 at the origin edge.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Free,
    Occupied,
    Unknown,
}

impl Cell {
    fn to_char(self) -> char {
        match self {
            Cell::Free => '0',
            Cell::Occupied => '1',
            Cell::Unknown => '?',
        }
    }

    fn from_char(c: char) -> Option<Cell> {
        match c {
            '0' => Some(Cell::Free),
            '1' => Some(Cell::Occupied),
            '?' => Some(Cell::Unknown),
            _ => None,
        }
    }
}

/// How unmapped cells are treated by collision checks and inflation.
/// `Blocked` is the conservative default; `Free` is the optimistic setting used
/// by the limited-perception ablation, which plans through unseen space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownPolicy {
    #[default]
    Blocked,
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    ncols: usize,
    nrows: usize,
    resolution: f64,
    origin_x: f64,
    origin_y: f64,
    cells: Vec<Cell>,
}

pub const GRID_MAGIC: &str = "OCCGRID";

impl OccupancyGrid {
    pub fn new(ncols: usize, nrows: usize, resolution: f64, origin_x: f64, origin_y: f64) -> Result<Self> {
        if ncols == 0 || nrows == 0 {
            return Err(Error::Parse(format!("grid dimensions must be positive, got {ncols}x{nrows}")));
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::Parse(format!("grid resolution must be positive, got {resolution}")));
        }
        Ok(Self { ncols, nrows, resolution, origin_x, origin_y, cells: vec![Cell::Free; ncols * nrows] })
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.origin_x, self.origin_y)
    }

    /// World-frame width and height covered by the grid.
    pub fn extent(&self) -> (f64, f64) {
        (self.ncols as f64 * self.resolution, self.nrows as f64 * self.resolution)
    }

    pub fn in_bounds(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.ncols && (row as usize) < self.nrows
    }

    pub fn get(&self, col: usize, row: usize) -> Cell {
        self.cells[row * self.ncols + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: Cell) {
        self.cells[row * self.ncols + col] = value;
    }

    /// Cell containing a world point, if inside the grid.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let col = ((x - self.origin_x) / self.resolution).floor();
        let row = ((y - self.origin_y) / self.resolution).floor();
        if col >= 0.0 && row >= 0.0 && col < self.ncols as f64 && row < self.nrows as f64 {
            Some((col as usize, row as usize))
        } else {
            None
        }
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.resolution,
            self.origin_y + (row as f64 + 0.5) * self.resolution,
        )
    }

    fn cell_blocked(&self, cell: Cell, policy: UnknownPolicy) -> bool {
        match cell {
            Cell::Occupied => true,
            Cell::Unknown => policy == UnknownPolicy::Blocked,
            Cell::Free => false,
        }
    }

    /// True when the indexed cell counts as an obstacle under `policy`.
    /// Out-of-grid indices are blocked.
    pub fn blocked(&self, col: i64, row: i64, policy: UnknownPolicy) -> bool {
        if !self.in_bounds(col, row) {
            return true;
        }
        self.cell_blocked(self.get(col as usize, row as usize), policy)
    }

    /// True when the world point lies in an obstacle cell (or off the map).
    pub fn point_blocked(&self, x: f64, y: f64, policy: UnknownPolicy) -> bool {
        match self.world_to_cell(x, y) {
            Some((c, r)) => self.cell_blocked(self.get(c, r), policy),
            None => true,
        }
    }

    pub fn count(&self, value: Cell) -> usize {
        self.cells.iter().filter(|&&c| c == value).count()
    }

    /// Morphological disc dilation by `radius` meters (`ceil(radius/resolution)`
    /// cells). Cells within the disc of any obstacle source become `Occupied`;
    /// the sources keep their own label, so a zero radius is the identity.
    /// `Unknown` cells act as sources under the `Blocked` policy.
    pub fn inflate(&self, radius: f64, policy: UnknownPolicy) -> Self {
        let rc = (radius / self.resolution).ceil() as i64;
        let mut out = self.clone();
        if rc <= 0 {
            return out;
        }
        let mut disc = Vec::new();
        for dy in -rc..=rc {
            for dx in -rc..=rc {
                if dx * dx + dy * dy <= rc * rc && !(dx == 0 && dy == 0) {
                    disc.push((dx, dy));
                }
            }
        }
        for row in 0..self.nrows {
            for col in 0..self.ncols {
                if !self.cell_blocked(self.get(col, row), policy) {
                    continue;
                }
                for &(dx, dy) in &disc {
                    let (c, r) = (col as i64 + dx, row as i64 + dy);
                    if self.in_bounds(c, r) && !self.cell_blocked(self.get(c as usize, r as usize), policy) {
                        out.set(c as usize, r as usize, Cell::Occupied);
                    }
                }
            }
        }
        out
    }

    /// Signed cell-center distance field: positive in free space (distance to
    /// the nearest obstacle cell center), negative inside obstacles.
    pub fn signed_distance_field(&self, policy: UnknownPolicy) -> DistanceField {
        let n = self.ncols * self.nrows;
        let mut blocked_seed = vec![FAR; n];
        let mut free_seed = vec![FAR; n];
        for (i, &cell) in self.cells.iter().enumerate() {
            if self.cell_blocked(cell, policy) {
                blocked_seed[i] = 0.0;
            } else {
                free_seed[i] = 0.0;
            }
        }
        let d_blocked = edt_squared(&blocked_seed, self.ncols, self.nrows);
        let d_free = edt_squared(&free_seed, self.ncols, self.nrows);
        let values = d_blocked
            .iter()
            .zip(&d_free)
            .map(|(&db, &df)| {
                if db > 0.0 {
                    db.sqrt() * self.resolution
                } else {
                    -(df.sqrt() * self.resolution)
                }
            })
            .collect();
        DistanceField {
            ncols: self.ncols,
            nrows: self.nrows,
            resolution: self.resolution,
            origin_x: self.origin_x,
            origin_y: self.origin_y,
            values,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{GRID_MAGIC} {} {} {} {} {}\n",
            self.ncols, self.nrows, self.resolution, self.origin_x, self.origin_y
        );
        for row in 0..self.nrows {
            for col in 0..self.ncols {
                out.push(self.get(col, row).to_char());
            }
            out.push('\n');
        }
        out
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("grid file: empty".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != GRID_MAGIC {
            return Err(Error::Parse(format!(
                "grid file: header must be `{GRID_MAGIC} ncols nrows resolution origin_x origin_y`, got `{header}`"
            )));
        }
        let ncols: usize =
            fields[1].parse().map_err(|_| Error::Parse(format!("grid file: bad ncols `{}`", fields[1])))?;
        let nrows: usize =
            fields[2].parse().map_err(|_| Error::Parse(format!("grid file: bad nrows `{}`", fields[2])))?;
        let resolution: f64 =
            fields[3].parse().map_err(|_| Error::Parse(format!("grid file: bad resolution `{}`", fields[3])))?;
        let origin_x: f64 =
            fields[4].parse().map_err(|_| Error::Parse(format!("grid file: bad origin_x `{}`", fields[4])))?;
        let origin_y: f64 =
            fields[5].parse().map_err(|_| Error::Parse(format!("grid file: bad origin_y `{}`", fields[5])))?;
        let mut grid = Self::new(ncols, nrows, resolution, origin_x, origin_y)?;
        let mut row = 0usize;
        for line in lines {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if row >= nrows {
                return Err(Error::Parse(format!("grid file: more than {nrows} data rows")));
            }
            if line.chars().count() != ncols {
                return Err(Error::Parse(format!(
                    "grid file row {}: expected {ncols} cells, got {}",
                    row + 1,
                    line.chars().count()
                )));
            }
            for (col, ch) in line.chars().enumerate() {
                let cell = Cell::from_char(ch)
                    .ok_or_else(|| Error::Parse(format!("grid file row {}: bad cell `{ch}`", row + 1)))?;
                grid.set(col, row, cell);
            }
            row += 1;
        }
        if row != nrows {
            return Err(Error::Parse(format!("grid file: expected {nrows} data rows, got {row}")));
        }
        Ok(grid)
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("grid file {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Scalar field sampled at cell centers with bilinear interpolation between
/// them (clamped at the border).
#[derive(Debug, Clone)]
pub struct DistanceField {
    ncols: usize,
    nrows: usize,
    resolution: f64,
    origin_x: f64,
    origin_y: f64,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn value_at_cell(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    /// Interpolated value and world-frame gradient at a point.
    pub fn sample(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        // Continuous cell-center coordinates, clamped so the four corners exist.
        let eps = 1e-9;
        let gx = ((x - self.origin_x) / self.resolution - 0.5)
            .clamp(0.0, (self.ncols - 1) as f64 - eps);
        let gy = ((y - self.origin_y) / self.resolution - 0.5)
            .clamp(0.0, (self.nrows - 1) as f64 - eps);
        let i0 = gx.floor() as usize;
        let j0 = gy.floor() as usize;
        let fx = gx - i0 as f64;
        let fy = gy - j0 as f64;
        let v00 = self.values[j0 * self.ncols + i0];
        let v10 = self.values[j0 * self.ncols + i0 + 1];
        let v01 = self.values[(j0 + 1) * self.ncols + i0];
        let v11 = self.values[(j0 + 1) * self.ncols + i0 + 1];
        let value = v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy + v11 * fx * fy;
        let ddx = ((v10 - v00) * (1.0 - fy) + (v11 - v01) * fy) / self.resolution;
        let ddy = ((v01 - v00) * (1.0 - fx) + (v11 - v10) * fx) / self.resolution;
        (value, [ddx, ddy])
    }
}

const FAR: f64 = 1e18;

/// Exact squared Euclidean distance transform (lower envelope of parabolas),
/// run over columns then rows. Input: 0 at seeds, `FAR` elsewhere.
fn edt_squared(seed: &[f64], ncols: usize, nrows: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; seed.len()];
    let mut out = vec![0.0; seed.len()];
    let mut f = vec![0.0; nrows.max(ncols)];
    let mut d = vec![0.0; nrows.max(ncols)];
    let mut v = vec![0usize; nrows.max(ncols)];
    let mut z = vec![0.0; nrows.max(ncols) + 1];

    for col in 0..ncols {
        for row in 0..nrows {
            f[row] = seed[row * ncols + col];
        }
        dt_1d(&f[..nrows], &mut d[..nrows], &mut v[..nrows], &mut z[..nrows + 1]);
        for row in 0..nrows {
            tmp[row * ncols + col] = d[row];
        }
    }
    for row in 0..nrows {
        f[..ncols].copy_from_slice(&tmp[row * ncols..(row + 1) * ncols]);
        dt_1d(&f[..ncols], &mut d[..ncols], &mut v[..ncols], &mut z[..ncols + 1]);
        out[row * ncols..(row + 1) * ncols].copy_from_slice(&d[..ncols]);
    }
    out
}

fn dt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = -FAR;
    z[1] = FAR;
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        loop {
            let p = v[k];
            let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    // q's parabola dominates everything so far.
                    v[0] = q;
                    z[0] = -FAR;
                    z[1] = FAR;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = FAR;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        d[q] = dq * dq + f[p];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid_10x8() -> OccupancyGrid {
        OccupancyGrid::new(10, 8, 0.5, 0.0, 0.0).unwrap()
    }

    #[test]
    fn world_cell_round_trip() {
        let g = grid_10x8();
        assert_eq!(g.world_to_cell(0.0, 0.0), Some((0, 0)));
        assert_eq!(g.world_to_cell(4.999, 3.999), Some((9, 7)));
        assert_eq!(g.world_to_cell(5.0, 1.0), None);
        assert_eq!(g.world_to_cell(-0.001, 1.0), None);
        let (cx, cy) = g.cell_center(3, 2);
        assert_relative_eq!(cx, 1.75);
        assert_relative_eq!(cy, 1.25);
        assert_eq!(g.world_to_cell(cx, cy), Some((3, 2)));
    }

    #[test]
    fn single_cell_inflation_paints_a_13_cell_disc() {
        // Disc radius of two cells: offsets with dx^2 + dy^2 <= 4, 13 in total.
        let mut g = grid_10x8();
        g.set(5, 4, Cell::Occupied);
        let inflated = g.inflate(2.0 * g.resolution(), UnknownPolicy::Blocked);
        assert_eq!(inflated.count(Cell::Occupied), 13);
        assert_eq!(inflated.get(5, 4), Cell::Occupied);
        assert_eq!(inflated.get(7, 4), Cell::Occupied);
        assert_eq!(inflated.get(6, 5), Cell::Occupied);
        assert_eq!(inflated.get(7, 5), Cell::Free); // dx^2+dy^2 = 5 > 4
    }

    #[test]
    fn zero_radius_inflation_is_identity() {
        let mut g = grid_10x8();
        g.set(2, 2, Cell::Occupied);
        g.set(8, 1, Cell::Unknown);
        let inflated = g.inflate(0.0, UnknownPolicy::Blocked);
        assert_eq!(inflated, g);
    }

    #[test]
    fn unknown_sources_inflate_under_blocked_policy_only() {
        let mut g = grid_10x8();
        g.set(4, 4, Cell::Unknown);
        let blocked = g.inflate(g.resolution(), UnknownPolicy::Blocked);
        assert_eq!(blocked.get(5, 4), Cell::Occupied);
        assert_eq!(blocked.get(4, 4), Cell::Unknown); // source keeps its label
        let free = g.inflate(g.resolution(), UnknownPolicy::Free);
        assert_eq!(free.get(5, 4), Cell::Free);
        assert_eq!(free.get(4, 4), Cell::Unknown);
    }

    #[test]
    fn grid_file_round_trip() {
        let mut g = OccupancyGrid::new(6, 4, 0.25, -1.5, 2.0).unwrap();
        g.set(0, 0, Cell::Occupied);
        g.set(5, 3, Cell::Unknown);
        g.set(2, 1, Cell::Occupied);
        let text = g.to_text();
        assert!(text.starts_with("OCCGRID 6 4 0.25 -1.5 2\n"));
        let parsed = OccupancyGrid::parse(&text).unwrap();
        assert_eq!(parsed, g);
    }

    #[test]
    fn grid_file_rejects_malformed_input() {
        assert!(OccupancyGrid::parse("BOGUS 2 2 0.5 0 0\n00\n00\n").is_err());
        assert!(OccupancyGrid::parse("OCCGRID 2 2 0.5 0 0\n00\n0\n").is_err());
        assert!(OccupancyGrid::parse("OCCGRID 2 2 0.5 0 0\n00\n0x\n").is_err());
        assert!(OccupancyGrid::parse("OCCGRID 2 2 0.5 0 0\n00\n").is_err());
        assert!(OccupancyGrid::parse("OCCGRID 2 2 -0.5 0 0\n00\n00\n").is_err());
    }

    #[test]
    fn signed_distance_matches_brute_force() {
        let mut g = grid_10x8();
        g.set(2, 3, Cell::Occupied);
        g.set(7, 6, Cell::Occupied);
        g.set(7, 1, Cell::Unknown);
        let field = g.signed_distance_field(UnknownPolicy::Blocked);
        // Brute force over cell centers: outside cells measure to the nearest
        // blocked center, blocked cells measure (negated) to the nearest free
        // center.
        let blocked: Vec<(usize, usize)> = vec![(2, 3), (7, 6), (7, 1)];
        let center_dist = |col: usize, row: usize, targets: &[(usize, usize)]| -> f64 {
            targets
                .iter()
                .map(|&(tc, tr)| {
                    let dx = col as f64 - tc as f64;
                    let dy = row as f64 - tr as f64;
                    dx * dx + dy * dy
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt()
                * g.resolution()
        };
        let free: Vec<(usize, usize)> = (0..g.nrows())
            .flat_map(|row| (0..g.ncols()).map(move |col| (col, row)))
            .filter(|cell| !blocked.contains(cell))
            .collect();
        for row in 0..g.nrows() {
            for col in 0..g.ncols() {
                let want = if blocked.contains(&(col, row)) {
                    -center_dist(col, row, &free)
                } else {
                    center_dist(col, row, &blocked)
                };
                assert_relative_eq!(field.value_at_cell(col, row), want, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn signed_distance_is_negative_inside_blobs() {
        let mut g = OccupancyGrid::new(20, 20, 1.0, 0.0, 0.0).unwrap();
        for row in 5..15 {
            for col in 5..15 {
                g.set(col, row, Cell::Occupied);
            }
        }
        let field = g.signed_distance_field(UnknownPolicy::Blocked);
        assert!(field.value_at_cell(10, 10) < -3.0);
        assert!(field.value_at_cell(0, 0) > 5.0);
        // Gradient points away from the blob in free space.
        let (_, grad) = field.sample(2.0, 2.0);
        assert!(grad[0] < 0.0 && grad[1] < 0.0);
    }

    #[test]
    fn distance_field_sampling_interpolates() {
        let mut g = grid_10x8();
        g.set(0, 0, Cell::Occupied);
        let field = g.signed_distance_field(UnknownPolicy::Blocked);
        let (c1x, c1y) = g.cell_center(4, 0);
        let (v, _) = field.sample(c1x, c1y);
        assert_relative_eq!(v, 4.0 * 0.5, epsilon = 1e-9);
        // Halfway between centers of (4,0) and (5,0): average of their values.
        let (v_half, grad) = field.sample(c1x + 0.25, c1y);
        assert_relative_eq!(v_half, 4.5 * 0.5, epsilon = 1e-9);
        assert_relative_eq!(grad[0], 1.0, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn inflation_is_monotone_in_radius(
            seeds in proptest::collection::vec((0usize..12, 0usize..10), 0..6),
            r1 in 0.0f64..1.5,
            r2 in 0.0f64..1.5,
        ) {
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let mut g = OccupancyGrid::new(12, 10, 0.5, 0.0, 0.0).unwrap();
            for (c, r) in seeds {
                g.set(c, r, Cell::Occupied);
            }
            let a = g.inflate(lo, UnknownPolicy::Blocked);
            let b = g.inflate(hi, UnknownPolicy::Blocked);
            for row in 0..10 {
                for col in 0..12 {
                    if a.get(col, row) == Cell::Occupied {
                        prop_assert_eq!(b.get(col, row), Cell::Occupied);
                    }
                }
            }
        }
    }
}
