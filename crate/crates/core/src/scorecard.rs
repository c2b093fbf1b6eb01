//! Scorecard localization from temporally persistent gradients.
//!
//! Per frame the Sobel magnitude `G_t` is computed; its running mean up to
//! frame `t` is `N_t`. The correlation map
//!
//! ```text
//! R_t = (1 - G_t / max(G)) * N_t
//! ```
//!
//! is large where an edge has been present on average but is not among the
//! strongest responses of the current frame. `R_t` summed over time is
//! thresholded at a quantile, the four corner windows of size
//! `(h / 5, w / 2)` compete on white-pixel count, and the winner is cleaned by
//! a 3x3 opening and closing. The tight box around its largest 8-connected
//! component is the scorecard.
//!
//! The time sum only needs `sum_t N_t` and `sum_t G_t N_t`, so
//! [`locate_scorecard`] streams over frames in constant memory.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{FrameStack, FrameView};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScorecardError {
    #[error("bad dimensions: {0}")]
    BadDimensions(String),
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("no gradient anywhere in the stack")]
    DegenerateStack,
    #[error("no scorecard candidate in any corner window")]
    NoCandidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Corner {
    #[serde(rename = "tl")]
    TopLeft,
    #[serde(rename = "tr")]
    TopRight,
    #[serde(rename = "bl")]
    BottomLeft,
    #[serde(rename = "br")]
    BottomRight,
}

impl Corner {
    pub const ALL: [Corner; 4] = [Corner::TopLeft, Corner::TopRight, Corner::BottomLeft, Corner::BottomRight];

    pub fn as_str(self) -> &'static str {
        match self {
            Corner::TopLeft => "tl",
            Corner::TopRight => "tr",
            Corner::BottomLeft => "bl",
            Corner::BottomRight => "br",
        }
    }

    /// Top-left corner and size `(x, y, w, h)` of this corner's search window.
    pub fn window(self, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let (ww, wh) = (width / 2, height / 5);
        let x = match self {
            Corner::TopLeft | Corner::BottomLeft => 0,
            _ => width - ww,
        };
        let y = match self {
            Corner::TopLeft | Corner::TopRight => 0,
            _ => height - wh,
        };
        (x, y, ww, wh)
    }
}

impl fmt::Display for Corner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Axis-aligned scorecard rectangle in frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub corner: Corner,
}

impl BBox {
    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        if x1 <= x0 || y1 <= y0 {
            return 0.0;
        }
        let inter = ((x1 - x0) * (y1 - y0)) as f64;
        inter / ((self.area() + other.area()) as f64 - inter)
    }
}

/// Sobel gradient magnitude with edge replication at the border.
pub fn sobel_gradient(frame: FrameView<'_>) -> Result<Vec<f32>, ScorecardError> {
    let (w, h) = (frame.width, frame.height);
    if w < 3 || h < 3 || frame.data.len() != w * h {
        return Err(ScorecardError::BadDimensions(format!("{w}x{h} frame, need at least 3x3")));
    }
    let mut out = vec![0.0f32; w * h];
    sobel_into(frame, &mut out);
    Ok(out)
}

fn sobel_into(frame: FrameView<'_>, out: &mut [f32]) {
    let (w, h) = (frame.width, frame.height);
    let d = frame.data;
    for y in 0..h {
        let up = &d[y.saturating_sub(1) * w..][..w];
        let mid = &d[y * w..][..w];
        let down = &d[(y + 1).min(h - 1) * w..][..w];
        let row = &mut out[y * w..][..w];
        for x in 0..w {
            let l = x.saturating_sub(1);
            let r = (x + 1).min(w - 1);
            let p = |line: &[u8], i: usize| line[i] as f32;
            let gx = (p(up, r) - p(up, l)) + 2.0 * (p(mid, r) - p(mid, l)) + (p(down, r) - p(down, l));
            let gy = (p(down, l) - p(up, l)) + 2.0 * (p(down, x) - p(up, x)) + (p(down, r) - p(up, r));
            row[x] = (gx * gx + gy * gy).sqrt();
        }
    }
}

/// Every intermediate map of the correlation computation, materialized.
#[derive(Debug, Clone)]
pub struct GradientStack {
    pub width: usize,
    pub height: usize,
    /// Gradient magnitude per frame.
    pub gradient: Vec<Vec<f32>>,
    /// Running temporal mean of the gradient up to each frame.
    pub mean: Vec<Vec<f32>>,
    /// Correlation map per frame.
    pub correlation: Vec<Vec<f32>>,
    pub global_max: f32,
}

impl GradientStack {
    /// Correlation summed over time.
    pub fn summed(&self) -> Vec<f64> {
        let mut sum = vec![0.0f64; self.width * self.height];
        for frame in &self.correlation {
            for (s, &v) in sum.iter_mut().zip(frame) {
                *s += v as f64;
            }
        }
        sum
    }
}

fn check_stack(stack: &FrameStack) -> Result<(), ScorecardError> {
    if stack.count() < 2 {
        return Err(ScorecardError::TooFewFrames(stack.count()));
    }
    if stack.width() < 3 || stack.height() < 3 {
        return Err(ScorecardError::BadDimensions(format!("{}x{}", stack.width(), stack.height())));
    }
    Ok(())
}

pub fn correlation_image(stack: &FrameStack) -> Result<GradientStack, ScorecardError> {
    check_stack(stack)?;
    let size = stack.width() * stack.height();
    let mut gradient = Vec::with_capacity(stack.count());
    let mut mean = Vec::with_capacity(stack.count());
    let mut running = vec![0.0f64; size];
    let mut global_max = 0.0f32;
    for (t, frame) in stack.frames().enumerate() {
        let g = sobel_gradient(frame)?;
        global_max = g.iter().copied().fold(global_max, f32::max);
        for (acc, &v) in running.iter_mut().zip(&g) {
            *acc += v as f64;
        }
        let n = (t + 1) as f64;
        mean.push(running.iter().map(|&s| (s / n) as f32).collect());
        gradient.push(g);
    }
    if global_max <= 0.0 {
        return Err(ScorecardError::DegenerateStack);
    }
    let correlation = gradient
        .iter()
        .zip(&mean)
        .map(|(g, m): (&Vec<f32>, &Vec<f32>)| {
            g.iter()
                .zip(m)
                .map(|(&gv, &mv)| ((1.0 - gv / global_max) * mv).max(0.0))
                .collect()
        })
        .collect();
    Ok(GradientStack {
        width: stack.width(),
        height: stack.height(),
        gradient,
        mean,
        correlation,
        global_max,
    })
}

/// Time-summed correlation map computed in one streaming pass.
pub fn summed_correlation(stack: &FrameStack) -> Result<Vec<f64>, ScorecardError> {
    check_stack(stack)?;
    let size = stack.width() * stack.height();
    let mut grad = vec![0.0f32; size];
    let mut running = vec![0.0f64; size];
    let mut mean_sum = vec![0.0f64; size];
    let mut cross_sum = vec![0.0f64; size];
    let mut global_max = 0.0f32;
    for (t, frame) in stack.frames().enumerate() {
        sobel_into(frame, &mut grad);
        let inv = 1.0 / (t + 1) as f64;
        for i in 0..size {
            let g = grad[i];
            if g > global_max {
                global_max = g;
            }
            running[i] += g as f64;
            let m = running[i] * inv;
            mean_sum[i] += m;
            cross_sum[i] += g as f64 * m;
        }
    }
    if global_max <= 0.0 {
        return Err(ScorecardError::DegenerateStack);
    }
    let max = global_max as f64;
    Ok(mean_sum
        .iter()
        .zip(&cross_sum)
        .map(|(s1, s2)| (s1 - s2 / max).max(0.0))
        .collect())
}

/// Value at quantile `q` of `values` (nearest rank).
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    let k = ((q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64).round()) as usize;
    let (_, v, _) = sorted.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    *v
}

/// Binary mask with helpers for 3x3 morphology.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    fn get(&self, x: isize, y: isize) -> bool {
        if x < 0 || y < 0 || x >= self.width as isize || y >= self.height as isize {
            return false;
        }
        self.bits[y as usize * self.width + x as usize]
    }

    fn filter(&self, erode: bool) -> Mask {
        let mut bits = vec![false; self.bits.len()];
        for y in 0..self.height as isize {
            for x in 0..self.width as isize {
                let mut hits = (-1..=1).flat_map(|dy| (-1..=1).map(move |dx| (dx, dy)));
                let v = if erode {
                    hits.all(|(dx, dy)| self.get(x + dx, y + dy))
                } else {
                    hits.any(|(dx, dy)| self.get(x + dx, y + dy))
                };
                bits[y as usize * self.width + x as usize] = v;
            }
        }
        Mask {
            width: self.width,
            height: self.height,
            bits,
        }
    }

    fn padded(&self, pad: usize) -> Mask {
        let width = self.width + 2 * pad;
        let mut bits = vec![false; width * (self.height + 2 * pad)];
        for y in 0..self.height {
            bits[(y + pad) * width + pad..][..self.width].copy_from_slice(&self.bits[y * self.width..][..self.width]);
        }
        Mask {
            width,
            height: self.height + 2 * pad,
            bits,
        }
    }

    fn cropped(&self, pad: usize) -> Mask {
        let width = self.width - 2 * pad;
        let height = self.height - 2 * pad;
        let mut bits = Vec::with_capacity(width * height);
        for y in pad..pad + height {
            bits.extend_from_slice(&self.bits[y * self.width + pad..][..width]);
        }
        Mask { width, height, bits }
    }

    /// Opening then closing, with everything outside the mask treated as
    /// background.
    fn open_close(&self) -> Mask {
        self.padded(2)
            .filter(true)
            .filter(false)
            .filter(false)
            .filter(true)
            .cropped(2)
    }

    /// Bounding box `(x0, y0, x1, y1)` (inclusive) of the largest 8-connected
    /// component; the first in raster order wins ties.
    fn largest_component(&self) -> Option<(usize, usize, usize, usize)> {
        let mut seen = vec![false; self.bits.len()];
        let mut best: Option<(usize, (usize, usize, usize, usize))> = None;
        let mut stack = Vec::new();
        for start in 0..self.bits.len() {
            if !self.bits[start] || seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let mut size = 0;
            let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
            while let Some(i) = stack.pop() {
                size += 1;
                let (x, y) = (i % self.width, i / self.width);
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let (nx, ny) = (x as isize + dx, y as isize + dy);
                        if self.get(nx, ny) {
                            let j = ny as usize * self.width + nx as usize;
                            if !seen[j] {
                                seen[j] = true;
                                stack.push(j);
                            }
                        }
                    }
                }
            }
            if best.is_none_or(|(s, _)| size > s) {
                best = Some((size, (x0, y0, x1, y1)));
            }
        }
        best.map(|(_, b)| b)
    }
}

pub const DEFAULT_BINARIZE_QUANTILE: f64 = 0.90;

/// Locates the scorecard in a stack of frames from one rally (or any span
/// over which the scorecard stays put).
pub fn locate_scorecard(stack: &FrameStack, binarize_quantile: f64) -> Result<BBox, ScorecardError> {
    check_stack(stack)?;
    let (w, h) = (stack.width(), stack.height());
    if w < 10 || h < 10 {
        return Err(ScorecardError::BadDimensions(format!("{w}x{h} frame, need at least 10x10")));
    }
    let summed = match summed_correlation(stack) {
        Err(ScorecardError::DegenerateStack) => return Err(ScorecardError::NoCandidate),
        other => other?,
    };
    locate_in_map(&summed, w, h, binarize_quantile)
}

/// Corner selection and box fitting on a time-summed correlation map.
pub fn locate_in_map(summed: &[f64], width: usize, height: usize, binarize_quantile: f64) -> Result<BBox, ScorecardError> {
    let threshold = quantile(summed, binarize_quantile);
    let white: Vec<bool> = summed.iter().map(|&v| v > threshold).collect();

    let count = |corner: Corner| {
        let (x0, y0, ww, wh) = corner.window(width, height);
        (y0..y0 + wh)
            .map(|y| white[y * width + x0..y * width + x0 + ww].iter().filter(|&&b| b).count())
            .sum::<usize>()
    };
    let mut best = Corner::TopLeft;
    let mut best_count = count(best);
    for corner in &Corner::ALL[1..] {
        let c = count(*corner);
        if c > best_count {
            best = *corner;
            best_count = c;
        }
    }
    if best_count == 0 {
        return Err(ScorecardError::NoCandidate);
    }

    let (x0, y0, ww, wh) = best.window(width, height);
    let mut bits = Vec::with_capacity(ww * wh);
    for y in y0..y0 + wh {
        bits.extend_from_slice(&white[y * width + x0..y * width + x0 + ww]);
    }
    let mask = Mask {
        width: ww,
        height: wh,
        bits,
    }
    .open_close();
    let (bx0, by0, bx1, by1) = mask.largest_component().ok_or(ScorecardError::NoCandidate)?;
    Ok(BBox {
        x: x0 + bx0,
        y: y0 + by0,
        w: bx1 - bx0 + 1,
        h: by1 - by0 + 1,
        corner: best,
    })
}
