//! Temporal smoothing of per-frame margins and rally run extraction.

use serde::{Deserialize, Serialize};

use super::RallyError;

pub const DEFAULT_PROCESS_VARIANCE: f64 = 0.01;
pub const DEFAULT_MEASUREMENT_VARIANCE: f64 = 0.25;
pub const DEFAULT_MIN_LEN: usize = 30;

/// Inclusive frame span of one rally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Segment {
    pub start_frame: usize,
    pub end_frame: usize,
}

impl Segment {
    pub fn new(start_frame: usize, end_frame: usize) -> Self {
        debug_assert!(start_frame <= end_frame);
        Segment { start_frame, end_frame }
    }

    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start_frame..=self.end_frame).contains(&frame)
    }
}

/// Scalar random-walk Kalman filter followed by a Rauch-Tung-Striebel
/// backward pass. The first measurement initializes the state with
/// variance `r`.
pub fn kalman_smooth(margins: &[f64], q: f64, r: f64) -> Result<Vec<f64>, RallyError> {
    if margins.is_empty() {
        return Err(RallyError::EmptySequence);
    }
    if !(q >= 0.0 && r > 0.0) {
        return Err(RallyError::BadConfig(format!("kalman variances q={q}, r={r}")));
    }
    let n = margins.len();
    let mut filtered = Vec::with_capacity(n);
    let mut filtered_var = Vec::with_capacity(n);
    let mut predicted_var = Vec::with_capacity(n);

    let (mut x, mut p) = (margins[0], r);
    for (t, &z) in margins.iter().enumerate() {
        let p_pred = if t == 0 { p } else { p + q };
        let gain = p_pred / (p_pred + r);
        x += gain * (z - x);
        p = (1.0 - gain) * p_pred;
        predicted_var.push(p_pred);
        filtered.push(x);
        filtered_var.push(p);
    }

    let mut smoothed = filtered.clone();
    for t in (0..n - 1).rev() {
        let c = filtered_var[t] / predicted_var[t + 1];
        smoothed[t] = filtered[t] + c * (smoothed[t + 1] - filtered[t]);
    }
    Ok(smoothed)
}

/// Maximal runs above `threshold`. Gaps shorter than `min_len / 2` between
/// runs are bridged first; runs still shorter than `min_len` are dropped.
pub fn extract_rally_segments(smoothed: &[f64], threshold: f64, min_len: usize) -> Result<Vec<Segment>, RallyError> {
    if smoothed.is_empty() {
        return Err(RallyError::EmptySequence);
    }
    let mut runs: Vec<Segment> = Vec::new();
    let mut start = None;
    for (t, &v) in smoothed.iter().enumerate() {
        match (v > threshold, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                runs.push(Segment::new(s, t - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(Segment::new(s, smoothed.len() - 1));
    }

    let max_gap = min_len / 2;
    let mut merged: Vec<Segment> = Vec::with_capacity(runs.len());
    for run in runs {
        match merged.last_mut() {
            Some(last) if run.start_frame - last.end_frame - 1 < max_gap => last.end_frame = run.end_frame,
            _ => merged.push(run),
        }
    }
    merged.retain(|s| s.len() >= min_len);
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_a_fixed_point() {
        let out = kalman_smooth(&[1.5; 40], 0.01, 0.25).unwrap();
        assert!(out.iter().all(|&v| (v - 1.5).abs() < 1e-12));
        assert_eq!(kalman_smooth(&[], 0.01, 0.25), Err(RallyError::EmptySequence));
    }

    #[test]
    fn isolated_spike_is_suppressed() {
        let mut m = vec![-2.0; 101];
        m[50] = 2.0;
        let out = kalman_smooth(&m, 0.01, 0.25).unwrap();
        assert!(out[50] < 0.0, "{}", out[50]);
    }

    #[test]
    fn step_is_monotone_with_bounded_lag() {
        let m: Vec<f64> = (0..100).map(|t| if t < 50 { -2.0 } else { 2.0 }).collect();
        let out = kalman_smooth(&m, 0.01, 0.25).unwrap();
        assert!(out.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        let crossing = out.iter().position(|&v| v > 0.0).unwrap();
        assert!((crossing as i64 - 50).abs() <= 5, "crossing at {crossing}");
    }

    #[test]
    fn segment_rules() {
        assert!(extract_rally_segments(&[-1.0; 50], 0.0, 30).unwrap().is_empty());

        let mut v = vec![-1.0; 140];
        v[20..120].iter_mut().for_each(|x| *x = 1.0);
        assert_eq!(extract_rally_segments(&v, 0.0, 30).unwrap(), vec![Segment::new(20, 119)]);

        let mut v = vec![-1.0; 200];
        v[10..90].iter_mut().for_each(|x| *x = 1.0);
        v[100..180].iter_mut().for_each(|x| *x = 1.0);
        assert_eq!(extract_rally_segments(&v, 0.0, 30).unwrap(), vec![Segment::new(10, 179)]);

        // a 20-frame gap is not bridged; short blips are dropped
        let mut v = vec![-1.0; 240];
        v[10..90].iter_mut().for_each(|x| *x = 1.0);
        v[110..190].iter_mut().for_each(|x| *x = 1.0);
        v[220..223].iter_mut().for_each(|x| *x = 1.0);
        assert_eq!(
            extract_rally_segments(&v, 0.0, 30).unwrap(),
            vec![Segment::new(10, 89), Segment::new(110, 189)]
        );
        assert_eq!(extract_rally_segments(&[], 0.0, 30), Err(RallyError::EmptySequence));
    }
}
