//! PNG output: probability heatmaps and histogram plots.

use std::path::Path;

pub use image::{Rgb, RgbImage};

use crate::dynamics::ProbabilityGrid;
use crate::error::Result;

const OUTSIDE: Rgb<u8> = Rgb([220, 220, 220]);
const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
const AXIS: Rgb<u8> = Rgb([0, 0, 0]);
const BAR: Rgb<u8> = Rgb([170, 170, 190]);

pub const POISSON_COLOR: Rgb<u8> = Rgb([30, 90, 200]);
pub const WIGNER_COLOR: Rgb<u8> = Rgb([200, 40, 40]);
pub const BRODY_COLOR: Rgb<u8> = Rgb([20, 150, 60]);

// viridis, sampled at eight points
const RAMP: [[f64; 3]; 8] = [
    [68.0, 1.0, 84.0],
    [70.0, 50.0, 127.0],
    [54.0, 92.0, 141.0],
    [39.0, 127.0, 142.0],
    [31.0, 161.0, 135.0],
    [74.0, 194.0, 109.0],
    [159.0, 218.0, 58.0],
    [253.0, 231.0, 37.0],
];

/// Colour for `t` in `[0, 1]`.
pub fn colormap(t: f64) -> Rgb<u8> {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (RAMP.len() - 1) as f64;
    let i = (x.floor() as usize).min(RAMP.len() - 2);
    let f = x - i as f64;
    let c = |k: usize| (RAMP[i][k] + f * (RAMP[i + 1][k] - RAMP[i][k])).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Heatmap with `scale × scale` pixels per site, `n` growing upwards, each
/// frame normalised to its own maximum. Sites outside the billiard are grey.
pub fn heatmap(grid: &ProbabilityGrid, scale: u32) -> RgbImage {
    let g = grid.geometry();
    let scale = scale.max(1);
    let (w, h) = ((g.m_right() + 1) as u32, (g.n_top() + 1) as u32);
    let max = grid.max_value();
    let mut img = RgbImage::from_pixel(w * scale, h * scale, OUTSIDE);
    for (site, &p) in g.sites().iter().zip(grid.values()) {
        let colour = colormap(if max > 0.0 { p / max } else { 0.0 });
        let x0 = site.m as u32 * scale;
        let y0 = (h - 1 - site.n as u32) * scale;
        for dy in 0..scale {
            for dx in 0..scale {
                img.put_pixel(x0 + dx, y0 + dy, colour);
            }
        }
    }
    img
}

pub fn save_heatmap(grid: &ProbabilityGrid, scale: u32, path: &Path) -> Result<()> {
    save_png(&heatmap(grid, scale), path)
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

pub struct Curve<'a> {
    pub color: Rgb<u8>,
    pub f: &'a dyn Fn(f64) -> f64,
}

/// Bars for a density histogram with optional overlaid curves. The y range
/// is fitted to the tallest bar or curve sample.
pub fn histogram_plot(edges: &[f64], density: &[f64], curves: &[Curve<'_>], width: u32, height: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(width, height, BACKGROUND);
    let margin = 30u32;
    let (pw, ph) = (width.saturating_sub(2 * margin).max(1), height.saturating_sub(2 * margin).max(1));
    let (x_lo, x_hi) = (edges[0], edges[edges.len() - 1]);
    let samples = 400;
    let xs: Vec<f64> = (0..=samples)
        .map(|i| x_lo + (x_hi - x_lo) * i as f64 / samples as f64)
        .collect();
    let curve_max = curves
        .iter()
        .flat_map(|c| xs.iter().map(move |&x| (c.f)(x)))
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let y_max = density.iter().copied().fold(curve_max, f64::max).max(1e-12) * 1.05;

    let px = |x: f64| margin as f64 + (x - x_lo) / (x_hi - x_lo) * pw as f64;
    let py = |y: f64| (margin + ph) as f64 - y / y_max * ph as f64;

    for (i, &d) in density.iter().enumerate() {
        let (x0, x1) = (px(edges[i]).round() as u32, px(edges[i + 1]).round() as u32);
        let top = py(d).round().max(0.0) as u32;
        for x in x0..x1.max(x0 + 1).min(width) {
            for y in top..(margin + ph) {
                img.put_pixel(x, y, BAR);
            }
        }
    }
    for x in margin..=(margin + pw).min(width - 1) {
        img.put_pixel(x, margin + ph, AXIS);
    }
    for y in margin..=(margin + ph) {
        img.put_pixel(margin, y, AXIS);
    }
    for c in curves {
        let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (px(x), py((c.f)(x)))).collect();
        for w in pts.windows(2) {
            line(&mut img, w[0], w[1], c.color);
        }
    }
    img
}

fn line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), color: Rgb<u8>) {
    let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let (x, y) = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
        // two pixels thick
        for (dx, dy) in [(0.0, 0.0), (0.0, 1.0)] {
            let (xi, yi) = ((x + dx).round(), (y + dy).round());
            if xi >= 0.0 && yi >= 0.0 && (xi as u32) < img.width() && (yi as u32) < img.height() {
                img.put_pixel(xi as u32, yi as u32, color);
            }
        }
    }
}
