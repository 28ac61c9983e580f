//! Learning-curve rendering: mean episode return against environment steps.

use std::path::Path;

use anyhow::Context;
use image::{ImageFormat, Rgb, RgbImage};

use crate::metrics::read_learning_curve;

pub const WIDTH: u32 = 800;
pub const HEIGHT: u32 = 500;
const MARGIN: u32 = 50;
const TICKS: u32 = 5;

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);
const RAW: Rgb<u8> = Rgb([170, 190, 230]);
const SMOOTH: Rgb<u8> = Rgb([20, 60, 170]);

/// Trailing mean over up to `window` points.
pub fn moving_average(ys: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(ys.len());
    let mut sum = 0.0;
    for i in 0..ys.len() {
        sum += ys[i];
        if i >= window {
            sum -= ys[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

fn line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: Rgb<u8>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Axes, grid, raw returns and their moving average; empty data gives bare axes.
pub fn render(points: &[(f64, f64)], window: usize) -> RgbImage {
    let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, WHITE);
    let (left, right, top, bottom) = (
        MARGIN as i64,
        (WIDTH - MARGIN) as i64,
        MARGIN as i64,
        (HEIGHT - MARGIN) as i64,
    );
    for k in 0..=TICKS as i64 {
        let x = left + (right - left) * k / TICKS as i64;
        let y = top + (bottom - top) * k / TICKS as i64;
        line(&mut img, (x, top), (x, bottom), GRID);
        line(&mut img, (left, y), (right, y), GRID);
        line(&mut img, (x, bottom), (x, bottom + 5), BLACK);
        line(&mut img, (left - 5, y), (left, y), BLACK);
    }
    line(&mut img, (left, bottom), (right, bottom), BLACK);
    line(&mut img, (left, top), (left, bottom), BLACK);
    if points.is_empty() {
        return img;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let smooth = moving_average(&ys, window);
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x_lo, x_hi) = span(&xs);
    let (y_lo, y_hi) = span(&ys);
    let to_px = |x: f64, y: f64| {
        let px = left as f64 + (x - x_lo) / (x_hi - x_lo) * (right - left) as f64;
        let py = bottom as f64 - (y - y_lo) / (y_hi - y_lo) * (bottom - top) as f64;
        (px.round() as i64, py.round() as i64)
    };
    for (series, color) in [(&ys, RAW), (&smooth, SMOOTH)] {
        let pts: Vec<(i64, i64)> = xs.iter().zip(series.iter()).map(|(x, y)| to_px(*x, *y)).collect();
        if pts.len() == 1 {
            line(&mut img, pts[0], pts[0], color);
        }
        for w in pts.windows(2) {
            line(&mut img, w[0], w[1], color);
        }
    }
    img
}

/// Reads a metrics CSV and writes a PNG learning curve.
pub fn plot(csv: &Path, out: &Path, window: usize) -> anyhow::Result<()> {
    let points = read_learning_curve(csv)?;
    let img = render(&points, window);
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir)?;
    }
    img.save_with_format(out, ImageFormat::Png)
        .with_context(|| format!("writing {}", out.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_warms_up() {
        assert_eq!(moving_average(&[1.0, 3.0, 5.0, 7.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
        assert_eq!(moving_average(&[2.0], 0), vec![2.0]);
    }

    #[test]
    fn monotone_series_rises_left_to_right() {
        let pts: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, i as f64)).collect();
        let img = render(&pts, 1);
        let height_at = |x: u32| (0..HEIGHT).find(|&y| *img.get_pixel(x, y) == SMOOTH);
        let (a, b) = (height_at(MARGIN + 10).unwrap(), height_at(WIDTH - MARGIN - 10).unwrap());
        assert!(a > b, "{a} vs {b}");
    }
}
