//! Minimal PNG chart rendering.
//!
//! The CSV tables are the contract; these renders exist so a run can be
//! eyeballed without extra tooling. Bars, lines, and a tiny built-in
//! digit font for axis ticks — nothing more.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};

const WIDTH: u32 = 900;
const HEIGHT: u32 = 540;
const MARGIN_L: u32 = 70;
const MARGIN_R: u32 = 20;
const MARGIN_T: u32 = 20;
const MARGIN_B: u32 = 50;

const BG: Rgb<u8> = Rgb([255, 255, 255]);
const AXIS: Rgb<u8> = Rgb([40, 40, 40]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);
pub const PALETTE: [Rgb<u8>; 5] = [
    Rgb([31, 119, 180]),
    Rgb([255, 127, 14]),
    Rgb([44, 160, 44]),
    Rgb([214, 39, 40]),
    Rgb([148, 103, 189]),
];

/// 3x5 digit glyphs for tick labels (0-9, '-', '.').
fn glyph(c: char) -> [u8; 5] {
    match c {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b010, 0b010, 0b010],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        '-' => [0b000, 0b000, 0b111, 0b000, 0b000],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        _ => [0; 5],
    }
}

fn draw_text(img: &mut RgbImage, x: i64, y: i64, text: &str, scale: u32, color: Rgb<u8>) {
    let mut cx = x;
    for c in text.chars() {
        let g = glyph(c);
        for (row, bits) in g.iter().enumerate() {
            for col in 0..3 {
                if bits & (1 << (2 - col)) != 0 {
                    for dy in 0..scale {
                        for dx in 0..scale {
                            let px = cx + (col as i64) * scale as i64 + dx as i64;
                            let py = y + (row as i64) * scale as i64 + dy as i64;
                            put(img, px, py, color);
                        }
                    }
                }
            }
        }
        cx += (4 * scale) as i64;
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

fn line(img: &mut RgbImage, x0: f64, y0: f64, x1: f64, y1: f64, color: Rgb<u8>) {
    let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let x = x0 + (x1 - x0) * t;
        let y = y0 + (y1 - y0) * t;
        // 2px stroke
        for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            put(img, x.round() as i64 + dx, y.round() as i64 + dy, color);
        }
    }
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v.fract().abs() < 1e-9) {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.1}")
    }
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_ranges(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>) -> Frame {
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        let mut y_min: f64 = 0.0;
        let mut y_max = f64::NEG_INFINITY;
        for x in xs {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
        }
        for y in ys {
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
        if !x_min.is_finite() {
            x_min = 0.0;
            x_max = 1.0;
        }
        if !y_max.is_finite() {
            y_max = 1.0;
        }
        if (x_max - x_min).abs() < 1e-12 {
            x_min -= 0.5;
            x_max += 0.5;
        }
        if (y_max - y_min).abs() < 1e-12 {
            y_max = y_min + 1.0;
        }
        Frame { x_min, x_max, y_min, y_max }
    }

    fn px(&self, x: f64) -> f64 {
        let w = (WIDTH - MARGIN_L - MARGIN_R) as f64;
        MARGIN_L as f64 + (x - self.x_min) / (self.x_max - self.x_min) * w
    }

    fn py(&self, y: f64) -> f64 {
        let h = (HEIGHT - MARGIN_T - MARGIN_B) as f64;
        MARGIN_T as f64 + (1.0 - (y - self.y_min) / (self.y_max - self.y_min)) * h
    }
}

fn base_canvas(frame: &Frame) -> RgbImage {
    let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, BG);
    // gridlines + ticks: 6 divisions each way
    for i in 0..=6 {
        let t = i as f64 / 6.0;
        let xv = frame.x_min + t * (frame.x_max - frame.x_min);
        let yv = frame.y_min + t * (frame.y_max - frame.y_min);
        let gx = frame.px(xv);
        let gy = frame.py(yv);
        line(&mut img, gx, MARGIN_T as f64, gx, (HEIGHT - MARGIN_B) as f64, GRID);
        line(&mut img, MARGIN_L as f64, gy, (WIDTH - MARGIN_R) as f64, gy, GRID);
        draw_text(&mut img, gx as i64 - 8, (HEIGHT - MARGIN_B + 10) as i64, &fmt_tick(xv), 2, AXIS);
        draw_text(&mut img, 8, gy as i64 - 5, &fmt_tick(yv), 2, AXIS);
    }
    // axes
    line(&mut img, MARGIN_L as f64, MARGIN_T as f64, MARGIN_L as f64, (HEIGHT - MARGIN_B) as f64, AXIS);
    line(&mut img, MARGIN_L as f64, (HEIGHT - MARGIN_B) as f64, (WIDTH - MARGIN_R) as f64, (HEIGHT - MARGIN_B) as f64, AXIS);
    img
}

/// Bar chart of (x, height) points.
pub fn bar_chart_png(points: &[(f64, f64)], path: &Path) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidInput("bar chart needs at least one point".into()));
    }
    let frame = Frame::from_ranges(points.iter().map(|p| p.0), points.iter().map(|p| p.1));
    let mut img = base_canvas(&frame);
    let bar_w = ((WIDTH - MARGIN_L - MARGIN_R) as f64 / points.len() as f64 * 0.8).clamp(1.0, 40.0);
    for &(x, h) in points {
        let cx = frame.px(x);
        let top = frame.py(h);
        let base = frame.py(0.0);
        let (y0, y1) = if top <= base { (top, base) } else { (base, top) };
        let x0 = (cx - bar_w / 2.0).max(MARGIN_L as f64) as u32;
        let x1 = ((cx + bar_w / 2.0) as u32).min(WIDTH - MARGIN_R);
        for px in x0..=x1.min(WIDTH - 1) {
            for py in y0 as u32..=(y1 as u32).min(HEIGHT - 1) {
                img.put_pixel(px, py, PALETTE[0]);
            }
        }
    }
    save(img, path)
}

/// Multi-series line chart; an optional horizontal reference line is
/// drawn in the last palette color.
pub fn line_chart_png(series: &[(&str, Vec<(f64, f64)>)], reference: Option<f64>, path: &Path) -> Result<()> {
    let all_points: Vec<(f64, f64)> = series.iter().flat_map(|(_, pts)| pts.iter().copied()).collect();
    if all_points.is_empty() {
        return Err(Error::InvalidInput("line chart needs at least one point".into()));
    }
    let ys = all_points.iter().map(|p| p.1).chain(reference.into_iter());
    let frame = Frame::from_ranges(all_points.iter().map(|p| p.0), ys);
    let mut img = base_canvas(&frame);
    if let Some(r) = reference {
        let y = frame.py(r);
        line(&mut img, MARGIN_L as f64, y, (WIDTH - MARGIN_R) as f64, y, PALETTE[3]);
    }
    for (i, (_, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for w in pts.windows(2) {
            line(&mut img, frame.px(w[0].0), frame.py(w[0].1), frame.px(w[1].0), frame.py(w[1].1), color);
        }
        for &(x, y) in pts.iter() {
            // small point markers
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    put(&mut img, frame.px(x) as i64 + dx, frame.py(y) as i64 + dy, color);
                }
            }
        }
    }
    save(img, path)
}

/// Two overlaid histograms from raw samples (used for cohort actual vs
/// predicted distributions). Bin width in sample units.
pub fn overlay_histogram_png(a: &[f64], b: &[f64], bin_width: f64, path: &Path) -> Result<()> {
    if a.is_empty() || b.is_empty() || bin_width <= 0.0 {
        return Err(Error::InvalidInput("overlay histogram needs samples and a positive bin width".into()));
    }
    let hist = |xs: &[f64]| -> Vec<(f64, f64)> {
        let mut bins = std::collections::BTreeMap::new();
        for &x in xs {
            let b = (x / bin_width).floor() as i64;
            *bins.entry(b).or_insert(0usize) += 1;
        }
        bins.into_iter()
            .map(|(b, n)| ((b as f64 + 0.5) * bin_width, n as f64))
            .collect()
    };
    line_chart_png(&[("a", hist(a)), ("b", hist(b))], None, path)
}

fn save(img: RgbImage, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    img.save(path).map_err(|e| Error::Image(e.to_string()))
}
