//! Point, game and set index over a match's rallies.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{MatchFormat, Player, ScoreState};
use crate::rally::Segment;
use crate::scorecard::BBox;
use crate::tagger::{EventTag, TagSet};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("segment {index} overlaps or precedes the one before it")]
    UnorderedSegments { index: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
}

/// One rally and where it sits in the match.
///
/// `score` is the scoreboard reading shown during the rally, `null` when it
/// could not be recovered (then `flagged` is set and the coordinates are
/// inherited from the previous rally).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RallyRecord {
    pub rally_id: u32,
    pub start_frame: usize,
    pub end_frame: usize,
    pub score: Option<ScoreState>,
    pub set_no: u32,
    pub game_no: u32,
    pub point_no: u32,
    pub tags: TagSet,
    pub bbox: Option<BBox>,
    pub flagged: bool,
}

impl RallyRecord {
    pub fn segment(&self) -> Segment {
        Segment::new(self.start_frame, self.end_frame)
    }

    pub fn coordinates(&self) -> (u32, u32, u32) {
        (self.set_no, self.game_no, self.point_no)
    }

    /// Start time in seconds.
    pub fn start_seconds(&self, fps: f64) -> f64 {
        self.start_frame as f64 / fps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchIndex {
    pub match_id: String,
    pub format: MatchFormat,
    pub fps: f64,
    pub rallies: Vec<RallyRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GameSummary {
    pub game_no: u32,
    pub winner: Player,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SetSummary {
    pub set_no: u32,
    pub games: Vec<GameSummary>,
    pub winner: Option<Player>,
    pub rallies: usize,
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), IndexError> {
    if expected != got {
        return Err(IndexError::LengthMismatch { what, expected, got });
    }
    Ok(())
}

/// Next coordinates after moving from `prev` to `cur`.
fn advance((set_no, game_no, point_no): (u32, u32, u32), prev: &ScoreState, cur: &ScoreState) -> (u32, u32, u32) {
    if (prev.sets_a, prev.sets_b) != (cur.sets_a, cur.sets_b) {
        (set_no + 1, 1, 1)
    } else if (prev.games_a, prev.games_b) != (cur.games_a, cur.games_b) {
        (set_no, game_no + 1, 1)
    } else if prev != cur {
        (set_no, game_no, point_no + 1)
    } else {
        (set_no, game_no, point_no)
    }
}

pub fn build_index(
    segments: &[Segment],
    scores: &[Option<ScoreState>],
    tags: &[TagSet],
    fmt: MatchFormat,
    fps: f64,
    match_id: &str,
) -> Result<MatchIndex, IndexError> {
    build_index_with_boxes(segments, scores, tags, &vec![None; segments.len()], fmt, fps, match_id)
}

pub fn build_index_with_boxes(
    segments: &[Segment],
    scores: &[Option<ScoreState>],
    tags: &[TagSet],
    boxes: &[Option<BBox>],
    fmt: MatchFormat,
    fps: f64,
    match_id: &str,
) -> Result<MatchIndex, IndexError> {
    check_len("scores", segments.len(), scores.len())?;
    check_len("tags", segments.len(), tags.len())?;
    check_len("boxes", segments.len(), boxes.len())?;
    for (i, pair) in segments.windows(2).enumerate() {
        if pair[1].start_frame <= pair[0].end_frame {
            return Err(IndexError::UnorderedSegments { index: i + 1 });
        }
    }

    let mut coords = (1, 1, 1);
    let mut last: Option<ScoreState> = None;
    let rallies = segments
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            if let Some(cur) = scores[i] {
                if let Some(prev) = last {
                    coords = advance(coords, &prev, &cur);
                }
                last = Some(cur);
            }
            RallyRecord {
                rally_id: i as u32 + 1,
                start_frame: seg.start_frame,
                end_frame: seg.end_frame,
                score: scores[i],
                set_no: coords.0,
                game_no: coords.1,
                point_no: coords.2,
                tags: tags[i].clone(),
                bbox: boxes[i],
                flagged: scores[i].is_none(),
            }
        })
        .collect();
    Ok(MatchIndex {
        match_id: match_id.to_string(),
        format: fmt,
        fps,
        rallies,
    })
}

impl MatchIndex {
    pub fn query_point(&self, set_no: u32, game_no: u32, point_no: u32) -> Vec<&RallyRecord> {
        self.rallies
            .iter()
            .filter(|r| r.coordinates() == (set_no, game_no, point_no))
            .collect()
    }

    pub fn query_game(&self, set_no: u32, game_no: u32) -> Vec<&RallyRecord> {
        self.rallies
            .iter()
            .filter(|r| r.set_no == set_no && r.game_no == game_no)
            .collect()
    }

    pub fn query_set(&self, set_no: u32) -> Vec<&RallyRecord> {
        self.rallies.iter().filter(|r| r.set_no == set_no).collect()
    }

    pub fn filter_by_tag(&self, tag: EventTag) -> Vec<&RallyRecord> {
        self.rallies.iter().filter(|r| r.tags.contains(&tag)).collect()
    }

    pub fn set_count(&self) -> u32 {
        self.rallies.last().map_or(0, |r| r.set_no)
    }

    /// Completed games (and sets) per set, read off score changes between
    /// consecutive recovered readings.
    pub fn set_summaries(&self) -> Vec<SetSummary> {
        let mut sets: Vec<SetSummary> = (1..=self.set_count())
            .map(|set_no| SetSummary {
                set_no,
                games: Vec::new(),
                winner: None,
                rallies: 0,
            })
            .collect();
        let mut last: Option<&RallyRecord> = None;
        for r in &self.rallies {
            sets[r.set_no as usize - 1].rallies += 1;
            let Some(cur) = r.score else { continue };
            if let Some(prev_rec) = last {
                let prev = prev_rec.score.expect("last has a score");
                let summary = &mut sets[prev_rec.set_no as usize - 1];
                let set_winner = if cur.sets_a > prev.sets_a {
                    Some(Player::A)
                } else if cur.sets_b > prev.sets_b {
                    Some(Player::B)
                } else {
                    None
                };
                let game_winner = set_winner.or(if cur.games_a > prev.games_a {
                    Some(Player::A)
                } else if cur.games_b > prev.games_b {
                    Some(Player::B)
                } else {
                    None
                });
                if let Some(winner) = game_winner {
                    summary.games.push(GameSummary {
                        game_no: prev_rec.game_no,
                        winner,
                    });
                }
                if set_winner.is_some() {
                    summary.winner = set_winner;
                }
            }
            last = Some(r);
        }
        sets
    }
}

pub fn query_point(idx: &MatchIndex, set_no: u32, game_no: u32, point_no: u32) -> Vec<&RallyRecord> {
    idx.query_point(set_no, game_no, point_no)
}

pub fn filter_by_tag(idx: &MatchIndex, tag: EventTag) -> Vec<&RallyRecord> {
    idx.filter_by_tag(tag)
}

/// Serialized form as written by [`save_index`].
pub fn to_json(idx: &MatchIndex) -> String {
    let mut text = serde_json::to_string_pretty(idx).expect("index serializes");
    text.push('\n');
    text
}

/// Writes the index through a temporary file in the same directory and
/// renames it into place.
pub fn save_index(idx: &MatchIndex, path: impl AsRef<Path>) -> Result<(), IndexError> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(to_json(idx).as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment as S;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            S::Seq { index } => out.push_str(&index.to_string()),
            S::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            S::Enum { variant } => out.push_str(variant),
            S::Unknown => out.push('?'),
        }
    }
    out
}

/// Parses and validates an index document.
pub fn from_json(text: &str) -> Result<MatchIndex, IndexError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let idx: MatchIndex = serde_path_to_error::deserialize(de).map_err(|e| IndexError::Schema {
        pointer: pointer(e.path()),
        message: e.into_inner().to_string(),
    })?;
    for (i, pair) in idx.rallies.windows(2).enumerate() {
        if pair[1].start_frame <= pair[0].end_frame || pair[1].rally_id <= pair[0].rally_id {
            return Err(IndexError::Schema {
                pointer: format!("/rallies/{}", i + 1),
                message: "rallies must be ordered and disjoint".into(),
            });
        }
    }
    if let Some(i) = idx.rallies.iter().position(|r| r.end_frame < r.start_frame) {
        return Err(IndexError::Schema {
            pointer: format!("/rallies/{i}/end_frame"),
            message: "end_frame before start_frame".into(),
        });
    }
    Ok(idx)
}

pub fn load_index(path: impl AsRef<Path>) -> Result<MatchIndex, IndexError> {
    from_json(&fs::read_to_string(path)?)
}
