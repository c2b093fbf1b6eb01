//! Histogram of oriented gradients on a bilinearly downscaled frame.
//!
//! Orientation is unsigned (0..180 degrees) with bins centred on multiples
//! of `180 / bins`, and each gradient vote is split linearly between the two
//! nearest bins. Blocks of `block_size x block_size` cells slide with a
//! one-cell stride and are normalized L2, clipped, then renormalized.

use crate::frames::FrameView;

use super::{ClassifierConfig, RallyError};

const NORM_EPS: f64 = 1e-6;

/// Bilinear resampling with pixel-centre alignment.
pub fn downscale(frame: FrameView<'_>, width: usize, height: usize) -> Vec<f32> {
    let sx = frame.width as f64 / width as f64;
    let sy = frame.height as f64 / height as f64;
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (frame.height - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(frame.height - 1);
        let wy = fy - y0 as f64;
        for x in 0..width {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (frame.width - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(frame.width - 1);
            let wx = fx - x0 as f64;
            let top = frame.at(x0, y0) as f64 * (1.0 - wx) + frame.at(x1, y0) as f64 * wx;
            let bottom = frame.at(x0, y1) as f64 * (1.0 - wx) + frame.at(x1, y1) as f64 * wx;
            out.push((top * (1.0 - wy) + bottom * wy) as f32);
        }
    }
    out
}

/// Unnormalized per-cell orientation histograms of an image, cell-row-major,
/// `bins` values per cell.
pub fn cell_histograms(image: &[f32], width: usize, height: usize, cell: usize, bins: usize) -> Vec<f64> {
    let cells_x = width / cell;
    let cells_y = height / cell;
    let mut hist = vec![0.0f64; cells_x * cells_y * bins];
    let px = |x: isize, y: isize| -> f64 {
        let x = x.clamp(0, width as isize - 1) as usize;
        let y = y.clamp(0, height as isize - 1) as usize;
        image[y * width + x] as f64
    };
    let bin_width = 180.0 / bins as f64;
    for y in 0..cells_y * cell {
        for x in 0..cells_x * cell {
            let (xi, yi) = (x as isize, y as isize);
            let gx = px(xi + 1, yi) - px(xi - 1, yi);
            let gy = px(xi, yi + 1) - px(xi, yi - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            if angle >= 180.0 {
                angle -= 180.0;
            }
            let pos = angle / bin_width;
            let lo = pos.floor();
            let frac = pos - lo;
            let lo = lo as usize % bins;
            let hi = (lo + 1) % bins;
            let base = ((y / cell) * cells_x + x / cell) * bins;
            hist[base + lo] += mag * (1.0 - frac);
            hist[base + hi] += mag * frac;
        }
    }
    hist
}

pub fn hog_descriptor(frame: FrameView<'_>, cfg: &ClassifierConfig) -> Result<Vec<f32>, RallyError> {
    if frame.width == 0 || frame.height == 0 || frame.data.len() != frame.width * frame.height {
        return Err(RallyError::BadDimensions(format!("{}x{} frame", frame.width, frame.height)));
    }
    cfg.validate()?;
    let (w, h) = (cfg.downscale_width, cfg.downscale_height);
    let image = downscale(frame, w, h);
    let bins = cfg.hog_bins;
    let hist = cell_histograms(&image, w, h, cfg.cell_size, bins);
    let cells_x = w / cfg.cell_size;
    let cells_y = h / cfg.cell_size;
    let b = cfg.block_size;

    let mut out = Vec::with_capacity(cfg.hog_len());
    let mut block = Vec::with_capacity(b * b * bins);
    for by in 0..=cells_y - b {
        for bx in 0..=cells_x - b {
            block.clear();
            for cy in by..by + b {
                for cx in bx..bx + b {
                    let base = (cy * cells_x + cx) * bins;
                    block.extend_from_slice(&hist[base..base + bins]);
                }
            }
            normalize_block(&mut block, cfg.block_clip);
            out.extend(block.iter().map(|&v| v as f32));
        }
    }
    Ok(out)
}

fn normalize_block(block: &mut [f64], clip: f64) {
    let scale = |block: &mut [f64]| {
        let norm = (block.iter().map(|v| v * v).sum::<f64>() + NORM_EPS * NORM_EPS).sqrt();
        block.iter_mut().for_each(|v| *v /= norm);
    };
    scale(block);
    block.iter_mut().for_each(|v| *v = v.min(clip));
    scale(block);
}
