//! Deterministic SVG rendering of grids, paths and trajectories.
//!
//! The output is a plain static image: world coordinates in meters mapped to
//! pixels with the y axis flipped (north up), blocked cells as dark rects,
//! unknown cells as light rects, one polyline per layer with a stable
//! palette, and a text block in the lower-left corner for legends and length
//! annotations. All numbers are printed with fixed precision so identical
//! inputs produce byte-identical files. Timing information never goes here.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::grid::{Cell, OccupancyGrid};

/// Stable layer palette; layers cycle through it in order.
pub const PALETTE: [&str; 6] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// One polyline to draw over the map.
#[derive(Debug, Clone)]
pub struct PathLayer {
    /// Legend label; also used to pick a palette color when `color` is empty.
    pub label: String,
    /// CSS color; empty string means "assign from the palette by index".
    pub color: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl PathLayer {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), color: String::new(), points, dashed: false }
    }
}

#[derive(Debug, Clone)]
pub struct SvgOptions {
    /// Rendering scale (pixels per world meter).
    pub px_per_meter: f64,
    /// Draw unknown cells in light gray (otherwise they render as free).
    pub shade_unknown: bool,
    /// Mark the first/last points of each layer with a dot and a ring.
    pub endpoint_markers: bool,
}

impl Default for SvgOptions {
    fn default() -> Self {
        Self { px_per_meter: 8.0, shade_unknown: true, endpoint_markers: true }
    }
}

struct Frame {
    k: f64,
    origin_x: f64,
    origin_y: f64,
    height_m: f64,
}

impl Frame {
    fn to_px(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.origin_x) * self.k, (self.height_m - (y - self.origin_y)) * self.k)
    }
}

/// Renders the scene to an SVG string. `notes` lines are printed beneath the
/// legend in the lower-left corner (top to bottom in the given order).
pub fn render(
    grid: &OccupancyGrid,
    layers: &[PathLayer],
    notes: &[String],
    opts: &SvgOptions,
) -> String {
    let (origin_x, origin_y) = grid.origin();
    let (width_m, height_m) = grid.extent();
    let frame = Frame { k: opts.px_per_meter, origin_x, origin_y, height_m };
    let w_px = width_m * opts.px_per_meter;
    let h_px = height_m * opts.px_per_meter;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w_px:.0}" height="{h_px:.0}" viewBox="0 0 {w_px:.2} {h_px:.2}">"#
    );
    let _ = writeln!(out, r##"<rect width="{w_px:.2}" height="{h_px:.2}" fill="#ffffff"/>"##);

    // Cells, merged into horizontal runs to keep files small. Row 0 is the
    // bottom of the map, which lands at the bottom of the image.
    let res = grid.resolution();
    let cell_px = res * opts.px_per_meter;
    for (fill, wanted) in [("#cfd8e3", Cell::Unknown), ("#37474f", Cell::Occupied)] {
        if wanted == Cell::Unknown && !opts.shade_unknown {
            continue;
        }
        for row in 0..grid.nrows() {
            let mut col = 0;
            while col < grid.ncols() {
                if grid.get(col, row) != wanted {
                    col += 1;
                    continue;
                }
                let start = col;
                while col < grid.ncols() && grid.get(col, row) == wanted {
                    col += 1;
                }
                let x0 = start as f64 * cell_px;
                let y0 = (grid.nrows() - 1 - row) as f64 * cell_px;
                let run_w = (col - start) as f64 * cell_px;
                let _ = writeln!(
                    out,
                    r#"<rect x="{x0:.2}" y="{y0:.2}" width="{run_w:.2}" height="{cell_px:.2}" fill="{fill}"/>"#
                );
            }
        }
    }

    let _ = writeln!(
        out,
        r##"<rect x="0" y="0" width="{w_px:.2}" height="{h_px:.2}" fill="none" stroke="#455a64" stroke-width="1"/>"##
    );

    for (i, layer) in layers.iter().enumerate() {
        if layer.points.is_empty() {
            continue;
        }
        let color: &str =
            if layer.color.is_empty() { PALETTE[i % PALETTE.len()] } else { &layer.color };
        let mut d = String::new();
        for (j, (x, y)) in layer.points.iter().enumerate() {
            let (px, py) = frame.to_px(*x, *y);
            let _ = write!(d, "{}{px:.2},{py:.2}", if j == 0 { "M" } else { " L" });
        }
        let dash = if layer.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#
        );
        if opts.endpoint_markers {
            let (sx, sy) = frame.to_px(layer.points[0].0, layer.points[0].1);
            let last = layer.points[layer.points.len() - 1];
            let (gx, gy) = frame.to_px(last.0, last.1);
            let _ = writeln!(out, r#"<circle cx="{sx:.2}" cy="{sy:.2}" r="4" fill="{color}"/>"#);
            let _ = writeln!(
                out,
                r#"<circle cx="{gx:.2}" cy="{gy:.2}" r="5" fill="none" stroke="{color}" stroke-width="2"/>"#
            );
        }
    }

    // Legend and annotations, lower-left corner, stacked upward.
    let line_h = 16.0;
    let total_lines = layers.len() + notes.len();
    let mut line_y = h_px - 8.0 - line_h * total_lines.saturating_sub(1) as f64;
    for (i, layer) in layers.iter().enumerate() {
        let color: &str =
            if layer.color.is_empty() { PALETTE[i % PALETTE.len()] } else { &layer.color };
        let _ = writeln!(
            out,
            r#"<line x1="10" y1="{:.2}" x2="30" y2="{:.2}" stroke="{color}" stroke-width="3"/>"#,
            line_y - 4.0,
            line_y - 4.0
        );
        let _ = writeln!(
            out,
            r##"<text x="36" y="{line_y:.2}" font-family="monospace" font-size="12" fill="#263238">{}</text>"##,
            escape(&layer.label)
        );
        line_y += line_h;
    }
    for note in notes {
        let _ = writeln!(
            out,
            r##"<text x="10" y="{line_y:.2}" font-family="monospace" font-size="12" fill="#263238">{}</text>"##,
            escape(note)
        );
        line_y += line_h;
    }

    out.push_str("</svg>\n");
    out
}

pub fn write_svg(
    path: &Path,
    grid: &OccupancyGrid,
    layers: &[PathLayer],
    notes: &[String],
    opts: &SvgOptions,
) -> Result<()> {
    std::fs::write(path, render(grid, layers, notes, opts))?;
    Ok(())
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_grid() -> OccupancyGrid {
        let mut grid = OccupancyGrid::new(20, 10, 0.5, 0.0, 0.0).unwrap();
        for col in 4..8 {
            grid.set(col, 2, Cell::Occupied);
        }
        grid.set(0, 9, Cell::Unknown);
        grid
    }

    #[test]
    fn output_is_deterministic() {
        let grid = sample_grid();
        let layers = vec![PathLayer::new("route", vec![(0.5, 0.5), (5.0, 3.0), (9.0, 4.5)])];
        let notes = vec!["route: length 10.13 m".to_string()];
        let a = render(&grid, &layers, &notes, &SvgOptions::default());
        let b = render(&grid, &layers, &notes, &SvgOptions::default());
        assert_eq!(a, b);
    }

    #[test]
    fn blocked_runs_are_merged_and_y_is_flipped() {
        let grid = sample_grid();
        let svg = render(&grid, &[], &[], &SvgOptions::default());
        // Four occupied cells in row 2 merge into one 4-cell run: x = 4*4px,
        // width = 16px. Row 2 of 10 sits 7 rows below the top: y = 7*4px.
        assert!(svg.contains(r#"<rect x="16.00" y="28.00" width="16.00" height="4.00""#), "{svg}");
        // One unknown cell at the top-left corner.
        assert!(svg.contains(r##"<rect x="0.00" y="0.00" width="4.00" height="4.00" fill="#cfd8e3""##));
    }

    #[test]
    fn layers_get_distinct_palette_colors_and_legend_entries() {
        let grid = sample_grid();
        let layers = vec![
            PathLayer::new("first", vec![(0.0, 0.0), (1.0, 1.0)]),
            PathLayer::new("second", vec![(0.0, 1.0), (1.0, 2.0)]),
        ];
        let svg = render(&grid, &layers, &[], &SvgOptions::default());
        assert!(svg.contains(PALETTE[0]));
        assert!(svg.contains(PALETTE[1]));
        assert!(svg.contains(">first</text>"));
        assert!(svg.contains(">second</text>"));
    }

    #[test]
    fn notes_are_escaped_and_rendered() {
        let grid = sample_grid();
        let notes = vec!["a < b & c".to_string()];
        let svg = render(&grid, &[], &notes, &SvgOptions::default());
        assert!(svg.contains("a &lt; b &amp; c"));
    }
}
