//! Aerial camera model and mask-to-grid projection.
//!
//! A pinhole camera with a validated rigid pose looks at the water surface,
//! which is modeled as the plane `z = plane_z` in the world frame. Obstacle
//! masks from an upstream segmentation stage are binary images in pixel space;
//! projecting every pixel ray onto the plane and rasterizing the hits yields a
//! world-frame [`OccupancyGrid`]. Cells no pixel reaches stay `Unknown`.
//!
//! Conventions: pixel `(u, v)` has `u` along image columns and `v` along rows;
//! the camera frame is x-right, y-down, z-forward (positive depth in front of
//! the lens); the pose maps world to camera, `p_c = R * p_w + t`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::grid::{Cell, OccupancyGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::Parse(format!("camera: focal lengths must be positive, got fx={fx} fy={fy}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Parse(format!("camera: image size must be positive, got {width}x{height}")));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(Error::Parse(format!(
                "camera: principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }
}

/// World-to-camera rigid transform with an orthonormality gate: `R^T R = I`
/// and `det R = +1`, both to 1e-9. Rejecting sloppy rotations here keeps every
/// downstream projection metrically meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

const ROTATION_TOL: f64 = 1e-9;

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let gram = rotation.transpose() * rotation;
        let mut err: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                err = err.max((gram[(i, j)] - want).abs());
            }
        }
        if err > ROTATION_TOL {
            return Err(Error::Parse(format!(
                "camera pose: rotation is not orthonormal (max deviation {err:.3e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::Parse(format!("camera pose: rotation determinant {det} is not +1")));
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(Error::Parse("camera pose: non-finite translation".into()));
        }
        Ok(Self { rotation, translation })
    }

    /// Straight-down camera centered over `(x, y)` at the given height, with
    /// image +u along world +x.
    pub fn nadir(x: f64, y: f64, height: f64) -> Self {
        let rotation = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
        let center = Vector3::new(x, y, height);
        let translation = -rotation * center;
        Self { rotation, translation }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Parses `key = value` text with keys `fx fy cx cy width height`,
    /// `rotation` (9 row-major numbers) and `translation` (3 numbers).
    pub fn parse_with_intrinsics(text: &str) -> Result<(CameraIntrinsics, CameraPose)> {
        let mut scalars = std::collections::BTreeMap::new();
        let mut rotation: Option<Vec<f64>> = None;
        let mut translation: Option<Vec<f64>> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("camera file line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            let numbers: Vec<f64> = value
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse(format!("camera file line {}: bad number for `{key}`", lineno + 1)))?;
            match key {
                "rotation" => {
                    if numbers.len() != 9 {
                        return Err(Error::Parse(format!(
                            "camera file: rotation needs 9 entries, got {}",
                            numbers.len()
                        )));
                    }
                    rotation = Some(numbers);
                }
                "translation" => {
                    if numbers.len() != 3 {
                        return Err(Error::Parse(format!(
                            "camera file: translation needs 3 entries, got {}",
                            numbers.len()
                        )));
                    }
                    translation = Some(numbers);
                }
                "fx" | "fy" | "cx" | "cy" | "width" | "height" => {
                    if numbers.len() != 1 {
                        return Err(Error::Parse(format!("camera file: `{key}` takes one number")));
                    }
                    scalars.insert(key.to_string(), numbers[0]);
                }
                other => return Err(Error::Parse(format!("camera file: unknown key `{other}`"))),
            }
        }
        let need = |k: &str| -> Result<f64> {
            scalars.get(k).copied().ok_or_else(|| Error::Parse(format!("camera file: missing key `{k}`")))
        };
        let width = need("width")?;
        let height = need("height")?;
        if width.fract() != 0.0 || height.fract() != 0.0 || width <= 0.0 || height <= 0.0 {
            return Err(Error::Parse("camera file: width/height must be positive integers".into()));
        }
        let intr = CameraIntrinsics::new(
            need("fx")?,
            need("fy")?,
            need("cx")?,
            need("cy")?,
            width as usize,
            height as usize,
        )?;
        let rot = rotation.ok_or_else(|| Error::Parse("camera file: missing key `rotation`".into()))?;
        let tr = translation.ok_or_else(|| Error::Parse("camera file: missing key `translation`".into()))?;
        let pose = CameraPose::new(Matrix3::from_row_slice(&rot), Vector3::new(tr[0], tr[1], tr[2]))?;
        Ok((intr, pose))
    }

    pub fn to_text(&self, intr: &CameraIntrinsics) -> String {
        let r = &self.rotation;
        format!(
            "fx = {}\nfy = {}\ncx = {}\ncy = {}\nwidth = {}\nheight = {}\n\
rotation = {} {} {} {} {} {} {} {} {}\ntranslation = {} {} {}\n",
            intr.fx,
            intr.fy,
            intr.cx,
            intr.cy,
            intr.width,
            intr.height,
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            self.translation[0],
            self.translation[1],
            self.translation[2]
        )
    }
}

/// Binary obstacle mask; `true` marks obstacle pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct SegMask {
    pub width: usize,
    pub height: usize,
    data: Vec<bool>,
}

/// Gray values at or above this count as obstacle when reading a PGM mask.
pub const MASK_THRESHOLD: u8 = 128;

impl SegMask {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parse(format!("mask: size must be positive, got {width}x{height}")));
        }
        Ok(Self { width, height, data: vec![false; width * height] })
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, obstacle: bool) {
        self.data[v * self.width + u] = obstacle;
    }

    /// Parses a binary (P5) PGM, thresholding gray values at [`MASK_THRESHOLD`].
    pub fn parse_pgm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut tokens: Vec<String> = Vec::new();
        // Header: magic, width, height, maxval as whitespace-separated tokens,
        // with `#` comments running to end of line.
        while tokens.len() < 4 {
            if pos >= bytes.len() {
                return Err(Error::Parse("pgm: truncated header".into()));
            }
            let b = bytes[pos];
            if b == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                pos += 1;
            } else {
                let start = pos;
                while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
                    pos += 1;
                }
                tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
            }
        }
        if tokens[0] != "P5" {
            return Err(Error::Parse(format!("pgm: expected magic P5, got `{}`", tokens[0])));
        }
        let width: usize = tokens[1].parse().map_err(|_| Error::Parse(format!("pgm: bad width `{}`", tokens[1])))?;
        let height: usize =
            tokens[2].parse().map_err(|_| Error::Parse(format!("pgm: bad height `{}`", tokens[2])))?;
        let maxval: u32 =
            tokens[3].parse().map_err(|_| Error::Parse(format!("pgm: bad maxval `{}`", tokens[3])))?;
        if maxval == 0 || maxval > 255 {
            return Err(Error::Parse(format!("pgm: unsupported maxval {maxval} (need 8-bit)")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(Error::Parse("pgm: missing separator after maxval".into()));
        }
        pos += 1;
        let expected = width.checked_mul(height).ok_or_else(|| Error::Parse("pgm: size overflow".into()))?;
        let raster = &bytes[pos..];
        if raster.len() < expected {
            return Err(Error::Parse(format!(
                "pgm: raster has {} bytes, expected {expected} for {width}x{height}",
                raster.len()
            )));
        }
        let mut mask = SegMask::new(width, height)?;
        for (i, &value) in raster[..expected].iter().enumerate() {
            mask.data[i] = value >= MASK_THRESHOLD;
        }
        Ok(mask)
    }

    pub fn read_pgm(path: &std::path::Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::Parse(format!("pgm {}: {e}", path.display())))?;
        Self::parse_pgm(&bytes)
    }

    /// Serializes as binary PGM with obstacle pixels at 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&b| if b { 255u8 } else { 0u8 }));
        out
    }
}

/// Where the pixel ray of a world point lands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelHit {
    pub u: f64,
    pub v: f64,
    pub in_bounds: bool,
}

/// Rays steeper than this in normalized direction count as hitting the plane;
/// flatter rays are treated as parallel (no intersection).
const GRAZING_TOL: f64 = 1e-9;

/// Intersects the ray through pixel `(u, v)` with the horizontal plane
/// `z = plane_z`. `None` when the ray is parallel to the plane or the
/// intersection lies behind the camera.
pub fn project_pixel_to_plane(
    u: f64,
    v: f64,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    plane_z: f64,
) -> Option<(f64, f64)> {
    let dir_cam = Vector3::new((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
    let dir = (pose.rotation().transpose() * dir_cam).normalize();
    if dir[2].abs() < GRAZING_TOL {
        return None;
    }
    let center = pose.center();
    let s = (plane_z - center[2]) / dir[2];
    if s <= 0.0 {
        return None;
    }
    let hit = center + dir * s;
    Some((hit[0], hit[1]))
}

/// Projects a world point into the image. `None` when the point is at or
/// behind the camera plane (non-positive depth).
pub fn project_world_to_pixel(
    point: &Vector3<f64>,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
) -> Option<PixelHit> {
    let pc = pose.world_to_camera(point);
    if pc[2] <= 0.0 {
        return None;
    }
    let u = intr.fx * pc[0] / pc[2] + intr.cx;
    let v = intr.fy * pc[1] / pc[2] + intr.cy;
    let in_bounds = u >= 0.0 && u < intr.width as f64 && v >= 0.0 && v < intr.height as f64;
    Some(PixelHit { u, v, in_bounds })
}

/// Target raster for `mask_to_grid`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub ncols: usize,
    pub nrows: usize,
    pub resolution: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        // 200 m x 100 m survey area at half-meter cells.
        Self { ncols: 400, nrows: 200, resolution: 0.5, origin_x: 0.0, origin_y: 0.0 }
    }
}

/// Projects every mask pixel onto the water plane (`z = 0`) and rasterizes the
/// hits. Obstacle evidence wins over free evidence regardless of pixel order;
/// cells without any projected pixel stay `Unknown`.
pub fn mask_to_grid(
    mask: &SegMask,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    spec: &GridSpec,
) -> Result<OccupancyGrid> {
    if mask.width != intr.width || mask.height != intr.height {
        return Err(Error::Parse(format!(
            "mask is {}x{} but camera expects {}x{}",
            mask.width, mask.height, intr.width, intr.height
        )));
    }
    let mut grid = OccupancyGrid::new(spec.ncols, spec.nrows, spec.resolution, spec.origin_x, spec.origin_y)?;
    for row in 0..spec.nrows {
        for col in 0..spec.ncols {
            grid.set(col, row, Cell::Unknown);
        }
    }
    for v in 0..mask.height {
        for u in 0..mask.width {
            let Some((x, y)) = project_pixel_to_plane(u as f64, v as f64, intr, pose, 0.0) else {
                continue;
            };
            let Some((col, row)) = grid.world_to_cell(x, y) else {
                continue;
            };
            if mask.get(u, v) {
                grid.set(col, row, Cell::Occupied);
            } else if grid.get(col, row) == Cell::Unknown {
                grid.set(col, row, Cell::Free);
            }
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    /// Nadir pose tilted by `tilt` radians about the world x axis.
    fn tilted_pose(tilt: f64) -> CameraPose {
        let nadir = CameraPose::nadir(10.0, 5.0, 12.0);
        let (s, c) = tilt.sin_cos();
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c);
        let rotation = rx * nadir.rotation();
        let center = nadir.center();
        CameraPose::new(rotation, -rotation * center).unwrap()
    }

    #[test]
    fn rejects_non_orthonormal_rotation() {
        let mut r = Matrix3::identity();
        r[(0, 1)] = 1e-3;
        assert!(CameraPose::new(r, Vector3::zeros()).is_err());
        // A reflection has determinant -1 even though it is orthonormal.
        let reflection = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(CameraPose::new(reflection, Vector3::zeros()).is_err());
        assert!(CameraPose::new(Matrix3::identity(), Vector3::zeros()).is_ok());
    }

    #[test]
    fn nadir_offsets_follow_similar_triangles() {
        // 10 m altitude, f = 500 px: 50 px off-center is 1 m on the ground.
        let pose = CameraPose::nadir(0.0, 0.0, 10.0);
        let intr = intr();
        let (x, y) = project_pixel_to_plane(intr.cx + 50.0, intr.cy, &intr, &pose, 0.0).unwrap();
        assert_relative_eq!(x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(y, 0.0, epsilon = 1e-12);
        // Principal point maps to the ground point below the camera, exactly.
        let (x0, y0) = project_pixel_to_plane(intr.cx, intr.cy, &intr, &pose, 0.0).unwrap();
        assert_eq!(x0, 0.0);
        assert_eq!(y0, 0.0);
    }

    #[test]
    fn behind_camera_and_grazing_rays_are_rejected() {
        let intr = intr();
        let pose = CameraPose::nadir(0.0, 0.0, 10.0);
        // 1 m behind the camera plane (above a downward-looking camera).
        assert!(project_world_to_pixel(&Vector3::new(0.0, 0.0, 11.0), &intr, &pose).is_none());
        // Horizontal camera: the horizon row is parallel to the plane.
        let rot = Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0); // z_cam = +x_world
        let center = Vector3::new(0.0, 0.0, 5.0);
        let pose_h = CameraPose::new(rot, -rot * center).unwrap();
        assert!(project_pixel_to_plane(intr.cx, intr.cy, &intr, &pose_h, 0.0).is_none());
        // Rays above the horizon point away from the plane.
        assert!(project_pixel_to_plane(intr.cx, intr.cy - 40.0, &intr, &pose_h, 0.0).is_none());
        // Below the horizon the ray lands ahead of the camera.
        let (x, _) = project_pixel_to_plane(intr.cx, intr.cy + 40.0, &intr, &pose_h, 0.0).unwrap();
        assert!(x > 0.0);
    }

    #[test]
    fn pixel_plane_pixel_round_trip_is_tight() {
        let intr = intr();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &tilt in &[0.0, 0.15, 0.4] {
            let pose = tilted_pose(tilt);
            for _ in 0..2000 {
                let u = rng.gen_range(0.0..intr.width as f64);
                let v = rng.gen_range(0.0..intr.height as f64);
                let Some((x, y)) = project_pixel_to_plane(u, v, &intr, &pose, 0.0) else {
                    continue;
                };
                let hit = project_world_to_pixel(&Vector3::new(x, y, 0.0), &intr, &pose).unwrap();
                assert!((hit.u - u).abs() < 1e-6, "u {} -> {}", u, hit.u);
                assert!((hit.v - v).abs() < 1e-6, "v {} -> {}", v, hit.v);
            }
        }
    }

    #[test]
    fn mask_projection_marks_cells_and_leaves_rest_unknown() {
        let intr = intr();
        let pose = CameraPose::nadir(10.0, 10.0, 10.0);
        let spec = GridSpec { ncols: 40, nrows: 40, resolution: 0.5, origin_x: 0.0, origin_y: 0.0 };
        let mut mask = SegMask::new(intr.width, intr.height).unwrap();
        mask.set(intr.cx as usize, intr.cy as usize, true);
        let grid = mask_to_grid(&mask, &intr, &pose, &spec).unwrap();
        let (col, row) = grid.world_to_cell(10.0, 10.0).unwrap();
        assert_eq!(grid.get(col, row), Cell::Occupied);
        // Far corner is outside the camera footprint: unknown.
        assert_eq!(grid.get(0, 0), Cell::Unknown);
        assert_eq!(grid.get(39, 39), Cell::Unknown);
        // Plenty of free cells under the footprint.
        assert!(grid.count(Cell::Free) > 100);
        assert_eq!(grid.count(Cell::Occupied), 1);
    }

    #[test]
    fn occupied_evidence_wins_within_a_cell() {
        // Neighboring pixels land in the same 2 m cell: one obstacle pixel is
        // enough to occupy it, however many free pixels share the cell.
        let intr = intr();
        let pose = CameraPose::nadir(5.0, 5.0, 10.0);
        let spec = GridSpec { ncols: 10, nrows: 10, resolution: 2.0, origin_x: 0.0, origin_y: 0.0 };
        let mut mask = SegMask::new(intr.width, intr.height).unwrap();
        mask.set(320, 240, true);
        let grid = mask_to_grid(&mask, &intr, &pose, &spec).unwrap();
        let (col, row) = grid.world_to_cell(5.0, 5.0).unwrap();
        assert_eq!(grid.get(col, row), Cell::Occupied);
    }

    #[test]
    fn pgm_threshold_sits_at_128() {
        let mut bytes = b"P5\n# comment\n3 1\n255\n".to_vec();
        bytes.extend_from_slice(&[127, 128, 255]);
        let mask = SegMask::parse_pgm(&bytes).unwrap();
        assert!(!mask.get(0, 0));
        assert!(mask.get(1, 0));
        assert!(mask.get(2, 0));
    }

    #[test]
    fn pgm_round_trip_and_errors() {
        let mut mask = SegMask::new(4, 3).unwrap();
        mask.set(2, 1, true);
        let parsed = SegMask::parse_pgm(&mask.to_pgm()).unwrap();
        assert_eq!(parsed, mask);
        assert!(SegMask::parse_pgm(b"P2\n2 2\n255\n....").is_err());
        assert!(SegMask::parse_pgm(b"P5\n2 2\n255\nab").is_err()); // short raster
        assert!(SegMask::parse_pgm(b"P5\n2 2\n70000\nabcd").is_err());
    }

    #[test]
    fn camera_file_round_trip() {
        let intr = intr();
        let pose = tilted_pose(0.2);
        let text = pose.to_text(&intr);
        let (intr2, pose2) = CameraPose::parse_with_intrinsics(&text).unwrap();
        assert_eq!(intr, intr2);
        assert!((pose.rotation() - pose2.rotation()).norm() < 1e-12);
        assert!((pose.translation() - pose2.translation()).norm() < 1e-12);
        assert!(CameraPose::parse_with_intrinsics("fx = 500\n").is_err());
        assert!(CameraPose::parse_with_intrinsics(&text.replace("fx = 500", "fx = -1")).is_err());
    }
}
