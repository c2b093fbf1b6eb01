//! Seam between external text recognizers and the pipeline.
//!
//! Recognizers hand over two text lines per rally (player A's scorecard row,
//! then player B's). This module parses them into [`ObservedScore`]s,
//! measures recognition quality with a normalized edit distance, and
//! provides a seeded noisy channel that imitates recognizer confusions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{MatchFormat, ScoreState};
use crate::refine::{ObservedScore, FIELD_KINDS};
use crate::rng::CounterRng;

#[derive(Debug, Error)]
pub enum OcrError {
    #[error("record {record} has {lines} lines, expected 2")]
    BadRecord { record: usize, lines: usize },
}

/// Two recognized scorecard rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawScoreText {
    pub lines: [String; 2],
}

impl RawScoreText {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Self {
        RawScoreText {
            lines: [a.into(), b.into()],
        }
    }

    /// Canonical scorecard rendering: `NAME SETS GAMES POINT` per row.
    pub fn render(s: &ScoreState) -> Self {
        RawScoreText::new(
            format!("A {} {} {}", s.sets_a, s.games_a, s.point_a),
            format!("B {} {} {}", s.sets_b, s.games_b, s.point_b),
        )
    }

    /// Both rows joined by a newline, the string compared by the edit metric.
    pub fn joined(&self) -> String {
        format!("{}\n{}", self.lines[0], self.lines[1])
    }
}

fn score_like(token: &str) -> bool {
    token == "AD" || token.bytes().any(|b| b.is_ascii_digit())
}

/// Splits a row into (history, sets, games, point) tokens, read right to left.
/// Missing tokens come back empty.
fn split_row(line: &str) -> (Vec<String>, String, String, String) {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let first_score = tokens.iter().position(|t| score_like(t)).unwrap_or(tokens.len());
    let start = first_score.min(tokens.len().saturating_sub(3));
    let tail = &tokens[start..];
    let from_end = |k: usize| -> String {
        tail.len()
            .checked_sub(k)
            .map(|i| tail[i].to_string())
            .unwrap_or_default()
    };
    let history = if tail.len() > 3 {
        tail[..tail.len() - 3].iter().map(|t| t.to_string()).collect()
    } else {
        Vec::new()
    };
    (history, from_end(3), from_end(2), from_end(1))
}

/// Parses recognized text into a reading. Never fails: unreadable fields
/// are carried as out-of-vocabulary tokens.
pub fn parse_score_text(text: &RawScoreText, fmt: MatchFormat) -> ObservedScore {
    let (hist_a, sets_a, games_a, point_a) = split_row(&text.lines[0]);
    let (hist_b, sets_b, games_b, point_b) = split_row(&text.lines[1]);
    let mut observed = ObservedScore::from_tokens([sets_a, games_a, point_a, sets_b, games_b, point_b], fmt);
    observed.set_history = [hist_a, hist_b];
    observed
}

/// Character-level Levenshtein distance with unit costs.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = (diag + usize::from(ca != cb)).min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[b.len()]
}

/// Edit distance divided by the longer length; 0 for two empty strings.
pub fn normalized_edit_distance(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    edit_distance(a, b) as f64 / longest as f64
}

/// Mean normalized edit distance over paired records.
pub fn mean_edit_distance(pred: &[RawScoreText], truth: &[RawScoreText]) -> Option<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return None;
    }
    let total: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| normalized_edit_distance(&p.joined(), &t.joined()))
        .sum();
    Some(total / pred.len() as f64)
}

/// Recognizer-like noise applied token by token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub substitution_rate: f64,
    pub deletion_rate: f64,
    pub digit_confusions: BTreeMap<char, Vec<char>>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn default_confusions() -> BTreeMap<char, Vec<char>> {
        [
            ('0', vec!['O', 'D']),
            ('1', vec!['I', 'l']),
            ('2', vec!['Z']),
            ('3', vec!['8']),
            ('4', vec!['A']),
            ('5', vec!['S']),
            ('6', vec!['G', 'b']),
            ('7', vec!['T']),
            ('8', vec!['3', 'B']),
            ('9', vec!['g']),
            ('A', vec!['4']),
            ('D', vec!['0']),
        ]
        .into_iter()
        .collect()
    }

    pub fn new(substitution_rate: f64, deletion_rate: f64, seed: u64) -> Self {
        NoiseSpec {
            substitution_rate,
            deletion_rate,
            digit_confusions: Self::default_confusions(),
            seed,
        }
    }

    fn substitute(&self, token: &str, rng: &mut CounterRng) -> String {
        let chars: Vec<char> = token.chars().collect();
        let confusable: Vec<usize> = (0..chars.len())
            .filter(|&i| self.digit_confusions.get(&chars[i]).is_some_and(|c| !c.is_empty()))
            .collect();
        if confusable.is_empty() {
            return token.to_string();
        }
        let pos = confusable[rng.below(confusable.len() as u64) as usize];
        let options = &self.digit_confusions[&chars[pos]];
        let mut out = chars;
        out[pos] = options[rng.below(options.len() as u64) as usize];
        out.into_iter().collect()
    }
}

/// Applies seeded substitutions and deletions. Each record keeps its two
/// lines and every line keeps at least one token.
pub fn corrupt_sequence(truth: &[RawScoreText], spec: &NoiseSpec) -> Vec<RawScoreText> {
    let base = CounterRng::new(spec.seed, 0);
    truth
        .iter()
        .enumerate()
        .map(|(i, record)| {
            let mut rng = base.split(i as u64);
            let lines = record.lines.clone().map(|line| {
                let tokens: Vec<&str> = line.split_whitespace().collect();
                let mut kept: Vec<String> = Vec::with_capacity(tokens.len());
                for (k, token) in tokens.iter().enumerate() {
                    let remaining = tokens.len() - k - 1;
                    if rng.chance(spec.deletion_rate) && kept.len() + remaining > 0 {
                        continue;
                    }
                    if rng.chance(spec.substitution_rate) {
                        kept.push(spec.substitute(token, &mut rng));
                    } else {
                        kept.push(token.to_string());
                    }
                }
                kept.join(" ")
            });
            RawScoreText { lines }
        })
        .collect()
}

/// Corrupts one score token in each of `round(fraction * n)` records chosen
/// so that no two corrupted records are adjacent. Returns the noisy records
/// and the sorted corrupted indices.
pub fn corrupt_isolated(truth: &[RawScoreText], fraction: f64, spec: &NoiseSpec) -> (Vec<RawScoreText>, Vec<usize>) {
    let n = truth.len();
    let target = (fraction * n as f64).round() as usize;
    let mut rng = CounterRng::new(spec.seed, 1);
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);

    let mut chosen = vec![false; n];
    let mut picked = Vec::with_capacity(target);
    for i in order {
        if picked.len() == target {
            break;
        }
        let left = i > 0 && chosen[i - 1];
        let right = i + 1 < n && chosen[i + 1];
        if !left && !right {
            chosen[i] = true;
            picked.push(i);
        }
    }
    picked.sort_unstable();

    let mut out = truth.to_vec();
    for &i in &picked {
        let mut rng = rng.split(i as u64);
        // score tokens are the last three of each row
        let mut slots: Vec<(usize, usize)> = Vec::new();
        for (l, line) in out[i].lines.iter().enumerate() {
            let count = line.split_whitespace().count();
            for k in count.saturating_sub(FIELD_KINDS.len() / 2)..count {
                slots.push((l, k));
            }
        }
        if slots.is_empty() {
            continue;
        }
        let (l, k) = slots[rng.below(slots.len() as u64) as usize];
        let mut tokens: Vec<String> = out[i].lines[l].split_whitespace().map(str::to_string).collect();
        tokens[k] = spec.substitute(&tokens[k], &mut rng);
        out[i].lines[l] = tokens.join(" ");
    }
    (out, picked)
}

/// Reads a recognized-text file: two lines per record, records separated by
/// blank lines.
pub fn read_recognized(text: &str) -> Result<Vec<RawScoreText>, OcrError> {
    let mut records = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let flush = |current: &mut Vec<&str>, records: &mut Vec<RawScoreText>| -> Result<(), OcrError> {
        if current.is_empty() {
            return Ok(());
        }
        if current.len() != 2 {
            return Err(OcrError::BadRecord {
                record: records.len(),
                lines: current.len(),
            });
        }
        records.push(RawScoreText::new(current[0], current[1]));
        current.clear();
        Ok(())
    };
    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut current, &mut records)?;
        } else {
            current.push(line);
        }
    }
    flush(&mut current, &mut records)?;
    Ok(records)
}

pub fn write_recognized(records: &[RawScoreText]) -> String {
    let mut out = String::new();
    for (i, r) in records.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&r.lines[0]);
        out.push('\n');
        out.push_str(&r.lines[1]);
        out.push('\n');
    }
    out
}
