//! SVG heatmaps of grid densities.

use std::fmt::Write;

use gangtrack_core::{GeoPoint, Grid};

/// Pixels per cell edge.
const CELL_PX: usize = 8;

/// Outline colours of monitoring bands 1, 2, ...
const BAND_COLORS: [&str; 2] = ["#d7191c", "#fdae61"];

fn ramp(t: f64) -> (u8, u8, u8) {
    // White through yellow-green to dark blue.
    let stops = [(255.0, 255.0, 255.0), (237.0, 248.0, 177.0), (127.0, 205.0, 187.0), (44.0, 127.0, 184.0), (37.0, 52.0, 148.0)];
    let t = t.clamp(0.0, 1.0) * (stops.len() - 1) as f64;
    let i = (t.floor() as usize).min(stops.len() - 2);
    let f = t - i as f64;
    let mix = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
    (mix(stops[i].0, stops[i + 1].0), mix(stops[i].1, stops[i + 1].1), mix(stops[i].2, stops[i + 1].2))
}

fn pixel(grid: &Grid, p: GeoPoint) -> (f64, f64) {
    let (x, y) = grid.to_km(p);
    let px = x / grid.cell_km * CELL_PX as f64;
    let py = (grid.rows as f64 - y / grid.cell_km) * CELL_PX as f64;
    (px, py)
}

/// Heatmap of `values` with band outlines, past sightings as dots and an
/// optional actual location as a cross.
pub fn heatmap(grid: &Grid, values: &[f64], bands: &[u8], sightings: &[GeoPoint], actual: Option<GeoPoint>, title: &str) -> String {
    let (w, h) = (grid.cols * CELL_PX, grid.rows * CELL_PX);
    let max = values.iter().copied().fold(0.0, f64::max);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" viewBox="0 0 {w} {}">"#, h + 20, h + 20);
    let _ = writeln!(svg, r#"<text x="2" y="14" font-family="sans-serif" font-size="12">{}</text>"#, escape(title));
    let _ = writeln!(svg, r#"<g transform="translate(0,20)" shape-rendering="crispEdges">"#);
    for (i, v) in values.iter().enumerate() {
        let (row, col) = grid.row_col(i);
        let (r, g, b) = ramp(if max > 0.0 { v / max } else { 0.0 });
        let x = col * CELL_PX;
        let y = (grid.rows - 1 - row) * CELL_PX;
        let _ = writeln!(svg, r##"<rect x="{x}" y="{y}" width="{CELL_PX}" height="{CELL_PX}" fill="#{r:02x}{g:02x}{b:02x}"/>"##);
    }
    for (band, color) in BAND_COLORS.iter().enumerate() {
        for (i, _) in bands.iter().enumerate().filter(|(_, b)| **b as usize == band + 1) {
            let (row, col) = grid.row_col(i);
            let x = col * CELL_PX;
            let y = (grid.rows - 1 - row) * CELL_PX;
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="{color}" stroke-width="1"/>"#,
                x + 1,
                y + 1,
                CELL_PX - 2,
                CELL_PX - 2
            );
        }
    }
    for p in sightings {
        let (x, y) = pixel(grid, *p);
        let _ = writeln!(svg, r#"<circle cx="{x:.1}" cy="{y:.1}" r="2" fill="black"/>"#);
    }
    if let Some(p) = actual {
        let (x, y) = pixel(grid, p);
        let _ = writeln!(
            svg,
            r#"<path d="M{:.1} {:.1}L{:.1} {:.1}M{:.1} {:.1}L{:.1} {:.1}" stroke="magenta" stroke-width="2"/>"#,
            x - 4.0,
            y - 4.0,
            x + 4.0,
            y + 4.0,
            x - 4.0,
            y + 4.0,
            x + 4.0,
            y - 4.0
        );
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use gangtrack_core::KmScale;

    #[test]
    fn one_rect_per_cell_plus_bands() {
        let grid = Grid::new(GeoPoint::new(85.0, 23.0), 2.5, 3, 4, KmScale::at_latitude(23.0).unwrap()).unwrap();
        let values: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let mut bands = vec![0u8; 12];
        bands[11] = 1;
        bands[10] = 2;
        let svg = heatmap(&grid, &values, &bands, &[grid.center(0)], Some(grid.center(5)), "a<b");
        assert_eq!(svg.matches("<rect").count(), 14);
        assert!(svg.contains("a&lt;b"));
        assert!(svg.contains(BAND_COLORS[0]) && svg.contains(BAND_COLORS[1]));
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn ramp_ends() {
        assert_eq!(ramp(0.0), (255, 255, 255));
        assert_eq!(ramp(1.0), (37, 52, 148));
    }
}
