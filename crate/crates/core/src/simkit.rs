//! Deterministic synthetic matches: scoreboard walks, rendered frame stacks
//! and scorecard text, each a pure function of a [`SimSpec`].

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{apply_point, AutomatonError, MatchFormat, Player, PointScore, ScoreState};
use crate::frames::FrameStack;
use crate::ocr::RawScoreText;
use crate::rally::Segment;
use crate::rng::{counter_value, CounterRng};
use crate::scorecard::{BBox, Corner};

const WALK_STREAM: u64 = 1;
const TIMELINE_STREAM: u64 = 2;
const LAYOUT_STREAM: u64 = 3;
const TEXTURE_STREAM: u64 = 4;
const PAN_STREAM: u64 = 5;
const JITTER_STREAM: u64 = 6;
const NOISE_STREAM: u64 = 7;

const TILE: usize = 256;
const LATTICE: usize = 16;
const SPECKLE_CELL: usize = 8;
const BOX_MARGIN: usize = 3;

const FIELD: u8 = 90;
const LINE: u8 = 240;
const STRIPE_DARK: u8 = 70;
const STRIPE_LIGHT: u8 = 190;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("bad simulation spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSpec {
    pub seed: u64,
    /// Rallies in the match, fault replays included.
    pub n_points: usize,
    pub best_of: u8,
    /// Probability that player A wins a point.
    pub point_bias: f64,
    /// Probability that a point is preceded by a replayed first serve.
    pub fault_rate: f64,
    pub width: usize,
    pub height: usize,
    pub rally_len: (usize, usize),
    pub gap_len: (usize, usize),
    /// Fixed scorecard corner, random when absent.
    pub corner: Option<Corner>,
    pub box_width: (usize, usize),
    pub box_height: (usize, usize),
    /// Background pan speed in pixels per frame.
    pub pan_speed: (f64, f64),
    /// Amplitude of uniform per-pixel noise.
    pub sensor_noise: u8,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            seed: 0,
            n_points: 8,
            best_of: 3,
            point_bias: 0.5,
            fault_rate: 0.05,
            width: 256,
            height: 144,
            rally_len: (60, 120),
            gap_len: (30, 60),
            corner: None,
            box_width: (48, 96),
            box_height: (12, 20),
            pan_speed: (2.0, 4.0),
            sensor_noise: 2,
        }
    }
}

impl SimSpec {
    pub fn format(&self) -> Result<MatchFormat, SimError> {
        Ok(MatchFormat::new(self.best_of)?)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::BadSpec(msg));
        self.format()?;
        if self.width < 64 || self.height < 64 {
            return bad(format!("frames must be at least 64x64, got {}x{}", self.width, self.height));
        }
        let ranges = [
            ("rally_len", self.rally_len),
            ("gap_len", self.gap_len),
            ("box_width", self.box_width),
            ("box_height", self.box_height),
        ];
        for (name, (lo, hi)) in ranges {
            if lo == 0 || lo > hi {
                return bad(format!("{name} range [{lo}, {hi}] must be nonempty and positive"));
            }
        }
        if self.box_width.1 + 2 * BOX_MARGIN > self.width / 2 || self.box_height.1 + 2 * BOX_MARGIN > self.height / 5 {
            return bad(format!(
                "box up to {}x{} does not fit a {}x{} corner window",
                self.box_width.1,
                self.box_height.1,
                self.width / 2,
                self.height / 5
            ));
        }
        let (lo, hi) = self.pan_speed;
        if !(lo >= 2.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("pan_speed range [{lo}, {hi}] must start at 2 px/frame or more"));
        }
        if !(0.0..=1.0).contains(&self.point_bias) || !(0.0..1.0).contains(&self.fault_rate) {
            return bad("point_bias must lie in [0, 1] and fault_rate in [0, 1)".into());
        }
        Ok(())
    }
}

/// Scoreboard readings for a match plus the generator's own bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchWalk {
    pub states: Vec<ScoreState>,
    /// Indices of readings that replay the previous one.
    pub faults: Vec<usize>,
    /// (set, game, point) of every reading, counted as the walk is played.
    pub coordinates: Vec<(u32, u32, u32)>,
}

fn wins_game(s: &ScoreState, winner: Player) -> bool {
    let (own, other) = match winner {
        Player::A => (s.point_a, s.point_b),
        Player::B => (s.point_b, s.point_a),
    };
    match own {
        PointScore::Advantage => true,
        PointScore::Forty => !matches!(other, PointScore::Forty | PointScore::Advantage),
        _ => false,
    }
}

/// Random walk over point transitions. The walk never finishes the match:
/// a point that would end it goes to the other player instead.
pub fn generate_match_walk(spec: &SimSpec) -> Result<MatchWalk, SimError> {
    spec.validate()?;
    let fmt = spec.format()?;
    let mut rng = CounterRng::new(spec.seed, WALK_STREAM);
    let mut walk = MatchWalk {
        states: Vec::with_capacity(spec.n_points),
        faults: Vec::new(),
        coordinates: Vec::with_capacity(spec.n_points),
    };
    if spec.n_points == 0 {
        return Ok(walk);
    }
    let mut state = ScoreState::INITIAL;
    let (mut set_no, mut game_no, mut point_no) = (1, 1, 1);
    walk.states.push(state);
    walk.coordinates.push((1, 1, 1));

    while walk.states.len() < spec.n_points {
        let replayed = walk.faults.last() == Some(&(walk.states.len() - 1));
        if !replayed && rng.chance(spec.fault_rate) {
            walk.faults.push(walk.states.len());
            walk.states.push(state);
            walk.coordinates.push((set_no, game_no, point_no));
            continue;
        }
        let mut winner = if rng.chance(spec.point_bias) { Player::A } else { Player::B };
        let mut next = apply_point(state, winner, fmt);
        if next.is_terminal(fmt) {
            winner = match winner {
                Player::A => Player::B,
                Player::B => Player::A,
            };
            next = apply_point(state, winner, fmt);
        }
        if wins_game(&state, winner) {
            point_no = 1;
            if next.sets_a + next.sets_b > state.sets_a + state.sets_b {
                set_no += 1;
                game_no = 1;
            } else {
                game_no += 1;
            }
        } else {
            point_no += 1;
        }
        state = next;
        walk.states.push(state);
        walk.coordinates.push((set_no, game_no, point_no));
    }
    Ok(walk)
}

/// Scorecard text for each reading, in the grammar read by the OCR parser.
pub fn render_score_text(states: &[ScoreState]) -> Vec<RawScoreText> {
    states.iter().map(RawScoreText::render).collect()
}

/// Ground truth of a rendered stack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackTruth {
    pub segments: Vec<Segment>,
    pub bbox: BBox,
}

impl StackTruth {
    /// `+1` for rally frames and `-1` elsewhere.
    pub fn labels(&self, count: usize) -> Vec<i8> {
        let mut labels = vec![-1i8; count];
        for s in &self.segments {
            labels[s.start_frame..=s.end_frame].iter_mut().for_each(|l| *l = 1);
        }
        labels
    }
}

#[derive(Debug, Clone, Copy)]
struct Pan {
    base: [(i64, i64); 2],
    velocity: [(i64, i64); 2],
    start: usize,
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    Rally,
    Gap(Pan),
}

fn sample_range(rng: &mut CounterRng, (lo, hi): (usize, usize)) -> usize {
    rng.range_inclusive(lo as u64, hi as u64) as usize
}

fn sample_velocity(rng: &mut CounterRng, (lo, hi): (f64, f64)) -> (i64, i64) {
    loop {
        let speed = lo + (hi - lo) * rng.next_f64();
        let angle = 2.0 * PI * rng.next_f64();
        let v = ((speed * angle.cos()).round() as i64, (speed * angle.sin()).round() as i64);
        if v.0 * v.0 + v.1 * v.1 >= 4 {
            return v;
        }
    }
}

struct Textures {
    smooth: Vec<u8>,
    speckle: Vec<u8>,
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn build_textures(seed: u64) -> Textures {
    let lattice_n = TILE / LATTICE;
    let node = |ix: usize, iy: usize| {
        let v = counter_value(seed, TEXTURE_STREAM, ((iy % lattice_n) * lattice_n + ix % lattice_n) as u64);
        40.0 + (v % 111) as f64
    };
    let mut smooth = vec![0u8; TILE * TILE];
    for y in 0..TILE {
        for x in 0..TILE {
            let (ix, iy) = (x / LATTICE, y / LATTICE);
            let fx = smoothstep((x % LATTICE) as f64 / LATTICE as f64);
            let fy = smoothstep((y % LATTICE) as f64 / LATTICE as f64);
            let top = node(ix, iy) * (1.0 - fx) + node(ix + 1, iy) * fx;
            let bottom = node(ix, iy + 1) * (1.0 - fx) + node(ix + 1, iy + 1) * fx;
            smooth[y * TILE + x] = (top * (1.0 - fy) + bottom * fy).round() as u8;
        }
    }
    let mut speckle = vec![0u8; TILE * TILE];
    let cells = TILE / SPECKLE_CELL;
    let mut rng = CounterRng::new(seed, TEXTURE_STREAM + 100);
    for cy in 0..cells {
        for cx in 0..cells {
            if !rng.chance(0.25) {
                continue;
            }
            let ox = cx * SPECKLE_CELL + rng.below((SPECKLE_CELL - 2) as u64) as usize;
            let oy = cy * SPECKLE_CELL + rng.below((SPECKLE_CELL - 2) as u64) as usize;
            for y in oy..oy + 3 {
                for x in ox..ox + 3 {
                    speckle[y * TILE + x] = 255;
                }
            }
        }
    }
    Textures { smooth, speckle }
}

fn wrap(v: i64) -> usize {
    v.rem_euclid(TILE as i64) as usize
}

fn court_line(x: i64, y: i64, width: usize, band: (i64, i64)) -> bool {
    let (top, bottom) = band;
    if y < top || y > bottom {
        return false;
    }
    let band_h = bottom - top;
    let horizontal = (0..5).any(|k| {
        let row = top + k * (band_h - 1) / 4;
        y == row || y == row + 1
    });
    let vertical = [1, 3, 5, 7, 9].iter().any(|&k| {
        let col = k * width as i64 / 10;
        x == col || x == col + 1
    });
    horizontal || vertical
}

/// Renders a broadcast-like stack: textured background panning between
/// rallies, a static court during rallies, and a striped scorecard box in
/// one corner throughout.
pub fn render_synthetic_stack(spec: &SimSpec) -> Result<(FrameStack, StackTruth), SimError> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);

    let mut layout = CounterRng::new(spec.seed, LAYOUT_STREAM);
    let corner = spec.corner.unwrap_or(Corner::ALL[layout.below(4) as usize]);
    let bw = sample_range(&mut layout, spec.box_width);
    let bh = sample_range(&mut layout, spec.box_height);
    let (wx, wy, ww, wh) = corner.window(w, h);
    let bx = wx + BOX_MARGIN + layout.below((ww - bw - 2 * BOX_MARGIN + 1) as u64) as usize;
    let by = wy + BOX_MARGIN + layout.below((wh - bh - 2 * BOX_MARGIN + 1) as u64) as usize;
    let bbox = BBox { x: bx, y: by, w: bw, h: bh, corner };

    let mut timeline = CounterRng::new(spec.seed, TIMELINE_STREAM);
    let mut pans = CounterRng::new(spec.seed, PAN_STREAM);
    let mut phases: Vec<Phase> = Vec::new();
    let mut segments = Vec::with_capacity(spec.n_points);
    let mut push_gap = |phases: &mut Vec<Phase>, timeline: &mut CounterRng| {
        let v1 = sample_velocity(&mut pans, spec.pan_speed);
        let mut v2 = sample_velocity(&mut pans, spec.pan_speed);
        while v2 == v1 {
            v2 = sample_velocity(&mut pans, spec.pan_speed);
        }
        let base = [
            (pans.below(TILE as u64) as i64, pans.below(TILE as u64) as i64),
            (pans.below(TILE as u64) as i64, pans.below(TILE as u64) as i64),
        ];
        let pan = Pan { base, velocity: [v1, v2], start: phases.len() };
        let len = sample_range(timeline, spec.gap_len);
        phases.extend(std::iter::repeat_n(Phase::Gap(pan), len));
    };
    push_gap(&mut phases, &mut timeline);
    for _ in 0..spec.n_points {
        let len = sample_range(&mut timeline, spec.rally_len);
        segments.push(Segment::new(phases.len(), phases.len() + len - 1));
        phases.extend(std::iter::repeat_n(Phase::Rally, len));
        push_gap(&mut phases, &mut timeline);
    }

    let textures = build_textures(spec.seed);
    let band = ((h / 5 + 4) as i64, (h - h / 5 - 5) as i64);
    let render = |t: usize| -> Vec<u8> {
        let mut frame = vec![0u8; w * h];
        match phases[t] {
            Phase::Rally => {
                let j = counter_value(spec.seed, JITTER_STREAM, t as u64);
                let (jx, jy) = ((j % 3) as i64 - 1, ((j / 3) % 3) as i64 - 1);
                for y in 0..h {
                    for x in 0..w {
                        let on = court_line(x as i64 - jx, y as i64 - jy, w, band);
                        frame[y * w + x] = if on { LINE } else { FIELD };
                    }
                }
            }
            Phase::Gap(pan) => {
                let dt = (t - pan.start) as i64;
                let [(ax, ay), (cx, cy)] = pan.base;
                let [(vx, vy), (ux, uy)] = pan.velocity;
                for y in 0..h as i64 {
                    for x in 0..w as i64 {
                        let s = textures.smooth[wrap(y + ay + vy * dt) * TILE + wrap(x + ax + vx * dt)];
                        let p = textures.speckle[wrap(y + cy + uy * dt) * TILE + wrap(x + cx + ux * dt)];
                        frame[y as usize * w + x as usize] = s.max(p);
                    }
                }
            }
        }
        for y in by..by + bh {
            for x in bx..bx + bw {
                frame[y * w + x] = if ((x - bx) / 2).is_multiple_of(2) { STRIPE_DARK } else { STRIPE_LIGHT };
            }
        }
        if spec.sensor_noise > 0 {
            let amp = spec.sensor_noise as i64;
            let span = (2 * amp + 1) as u64;
            let base = (t * w * h) as u64;
            for (i, px) in frame.iter_mut().enumerate() {
                let n = (counter_value(spec.seed, NOISE_STREAM, base + i as u64) % span) as i64 - amp;
                *px = (*px as i64 + n).clamp(0, 255) as u8;
            }
        }
        frame
    };
    let frames: Vec<Vec<u8>> = (0..phases.len()).into_par_iter().map(render).collect();
    let stack = FrameStack::new(w, h, frames.concat()).expect("rendered frames match dimensions");
    Ok((stack, StackTruth { segments, bbox }))
}
