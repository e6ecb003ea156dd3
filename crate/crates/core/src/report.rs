//! Rendering of stored metrics: aligned text tables and static PNG charts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::format_f3;

/// Average macro-F1 for every (encoding, block-length) cell of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationGrid {
    /// Block lengths in hours, column order.
    pub n_hours: Vec<usize>,
    /// Row labels, e.g. "stacked_vertical", "multi_channel".
    pub encodings: Vec<String>,
    /// `cells[row][col]`, mean validation average macro-F1.
    pub cells: Vec<Vec<f64>>,
    /// Seeds averaged into each cell.
    pub seeds: Vec<u64>,
}

impl AblationGrid {
    /// Table shaped like the block-length sweep: encodings as rows,
    /// block lengths as columns.
    pub fn render_table(&self) -> String {
        let mut out = format!("{:<18}", "encoding");
        for &n in &self.n_hours {
            let images = 24 / n;
            out.push_str(&format!("{:>22}", format!("{n}h ({images} img/day)")));
        }
        out.push('\n');
        for (row, encoding) in self.encodings.iter().enumerate() {
            out.push_str(&format!("{encoding:<18}"));
            for col in 0..self.n_hours.len() {
                out.push_str(&format!("{:>22}", format_f3(self.cells[row][col])));
            }
            out.push('\n');
        }
        out
    }
}

// 5x7 bitmap glyphs, one byte per column, LSB = top row.
fn glyph(c: char) -> [u8; 5] {
    match c.to_ascii_uppercase() {
        '0' => [0x3e, 0x51, 0x49, 0x45, 0x3e],
        '1' => [0x00, 0x42, 0x7f, 0x40, 0x00],
        '2' => [0x42, 0x61, 0x51, 0x49, 0x46],
        '3' => [0x21, 0x41, 0x45, 0x4b, 0x31],
        '4' => [0x18, 0x14, 0x12, 0x7f, 0x10],
        '5' => [0x27, 0x45, 0x45, 0x45, 0x39],
        '6' => [0x3c, 0x4a, 0x49, 0x49, 0x30],
        '7' => [0x01, 0x71, 0x09, 0x05, 0x03],
        '8' => [0x36, 0x49, 0x49, 0x49, 0x36],
        '9' => [0x06, 0x49, 0x49, 0x29, 0x1e],
        '.' => [0x00, 0x60, 0x60, 0x00, 0x00],
        '-' => [0x08, 0x08, 0x08, 0x08, 0x08],
        '_' => [0x40, 0x40, 0x40, 0x40, 0x40],
        'A' => [0x7e, 0x11, 0x11, 0x11, 0x7e],
        'B' => [0x7f, 0x49, 0x49, 0x49, 0x36],
        'C' => [0x3e, 0x41, 0x41, 0x41, 0x22],
        'D' => [0x7f, 0x41, 0x41, 0x22, 0x1c],
        'E' => [0x7f, 0x49, 0x49, 0x49, 0x41],
        'F' => [0x7f, 0x09, 0x09, 0x09, 0x01],
        'G' => [0x3e, 0x41, 0x49, 0x49, 0x7a],
        'H' => [0x7f, 0x08, 0x08, 0x08, 0x7f],
        'I' => [0x00, 0x41, 0x7f, 0x41, 0x00],
        'K' => [0x7f, 0x08, 0x14, 0x22, 0x41],
        'L' => [0x7f, 0x40, 0x40, 0x40, 0x40],
        'M' => [0x7f, 0x02, 0x0c, 0x02, 0x7f],
        'N' => [0x7f, 0x04, 0x08, 0x10, 0x7f],
        'O' => [0x3e, 0x41, 0x41, 0x41, 0x3e],
        'P' => [0x7f, 0x09, 0x09, 0x09, 0x06],
        'Q' => [0x3e, 0x41, 0x51, 0x21, 0x5e],
        'R' => [0x7f, 0x09, 0x19, 0x29, 0x46],
        'S' => [0x46, 0x49, 0x49, 0x49, 0x31],
        'T' => [0x01, 0x01, 0x7f, 0x01, 0x01],
        'U' => [0x3f, 0x40, 0x40, 0x40, 0x3f],
        'V' => [0x1f, 0x20, 0x40, 0x20, 0x1f],
        'W' => [0x3f, 0x40, 0x38, 0x40, 0x3f],
        'X' => [0x63, 0x14, 0x08, 0x14, 0x63],
        'Y' => [0x07, 0x08, 0x70, 0x08, 0x07],
        'Z' => [0x61, 0x51, 0x49, 0x45, 0x43],
        _ => [0x00; 5], // space and anything unknown
    }
}

fn draw_text(img: &mut image::RgbImage, x: u32, y: u32, text: &str, color: [u8; 3]) {
    let mut cx = x;
    for c in text.chars() {
        let g = glyph(c);
        for (col, bits) in g.iter().enumerate() {
            for row in 0..7 {
                if bits >> row & 1 == 1 {
                    let (px, py) = (cx + col as u32, y + row);
                    if px < img.width() && py < img.height() {
                        img.put_pixel(px, py, image::Rgb(color));
                    }
                }
            }
        }
        cx += 6;
    }
}

fn fill_rect(img: &mut image::RgbImage, x0: u32, y0: u32, x1: u32, y1: u32, color: [u8; 3]) {
    for x in x0..x1.min(img.width()) {
        for y in y0..y1.min(img.height()) {
            img.put_pixel(x, y, image::Rgb(color));
        }
    }
}

/// Render a bar chart of values in [0, 1] with per-bar labels.
pub fn bar_chart(path: &Path, title: &str, labels: &[String], values: &[f64]) -> Result<()> {
    if labels.len() != values.len() || values.is_empty() {
        return Err(Error::Shape("bar chart needs one label per value".into()));
    }
    let bar_w = 46u32;
    let gap = 14u32;
    let margin = 40u32;
    let plot_h = 220u32;
    let width = margin * 2 + labels.len() as u32 * (bar_w + gap);
    let height = plot_h + 90;
    let mut img = image::RgbImage::from_pixel(width, height, image::Rgb([255, 255, 255]));

    draw_text(&mut img, margin, 8, title, [0, 0, 0]);
    // axis and gridlines at 0, 0.25, ..., 1.0
    let base_y = 30 + plot_h;
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let y = base_y - (frac * plot_h as f64) as u32;
        fill_rect(&mut img, margin - 4, y, width - margin + 4, y + 1, [210, 210, 210]);
        draw_text(&mut img, 2, y.saturating_sub(3), &format!("{frac:.2}"), [90, 90, 90]);
    }
    for (i, (&v, label)) in values.iter().zip(labels.iter()).enumerate() {
        let clamped = v.clamp(0.0, 1.0);
        let h = (clamped * plot_h as f64) as u32;
        let x0 = margin + i as u32 * (bar_w + gap);
        fill_rect(&mut img, x0, base_y - h, x0 + bar_w, base_y, [70, 120, 190]);
        draw_text(&mut img, x0 + 2, base_y + 6, label, [0, 0, 0]);
        draw_text(
            &mut img,
            x0 + 2,
            (base_y - h).saturating_sub(10),
            &format_f3(v),
            [0, 0, 0],
        );
    }
    img.save(path)
        .map_err(|e| Error::Data(format!("png write failed: {e}")))?;
    Ok(())
}

/// Render the ablation grid as grouped bars (one group per block length).
pub fn ablation_chart(path: &Path, grid: &AblationGrid) -> Result<()> {
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (col, &n) in grid.n_hours.iter().enumerate() {
        for (row, encoding) in grid.encodings.iter().enumerate() {
            let short = if encoding.starts_with("multi") { "MC" } else { "SV" };
            labels.push(format!("{n}H {short}"));
            values.push(grid.cells[row][col]);
        }
    }
    bar_chart(path, "AVG MACRO-F1 BY BLOCK LENGTH", &labels, &values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_table_has_expected_shape() {
        let grid = AblationGrid {
            n_hours: vec![2, 4, 6],
            encodings: vec!["stacked_vertical".into(), "multi_channel".into()],
            cells: vec![vec![0.581, 0.591, 0.588], vec![0.593, 0.615, 0.601]],
            seeds: vec![1],
        };
        let table = grid.render_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3); // header + 2 encodings
        assert!(lines[0].contains("4h (6 img/day)"));
        assert!(lines[2].contains("0.615"));
    }

    #[test]
    fn charts_write_png_files() {
        let dir = tempfile::tempdir().unwrap();
        let bars = dir.path().join("bars.png");
        bar_chart(
            &bars,
            "TEST",
            &["Q1".into(), "Q2".into()],
            &[0.5, 0.75],
        )
        .unwrap();
        assert!(bars.exists());
        let grid = AblationGrid {
            n_hours: vec![2, 4],
            encodings: vec!["stacked_vertical".into(), "multi_channel".into()],
            cells: vec![vec![0.5, 0.6], vec![0.55, 0.65]],
            seeds: vec![1, 2],
        };
        let chart = dir.path().join("grid.png");
        ablation_chart(&chart, &grid).unwrap();
        assert!(chart.exists());
    }
}
