//! Score refinement: vocabulary checks, windowed mode smoothing of the
//! games/sets columns, and automaton-constrained replacement of erroneous
//! readings.
//!
//! A flagged reading `s_i` is replaced by the candidate `p` maximizing the
//! fraction of the six scoreboard fields that agree with `s_i`, where the
//! candidates are the states reachable in one point from the corrected
//! reading before it and leading in one point to the reading after it.
//! Consecutive identical readings are legal (a fault replays the point), so
//! by default each neighbour also contributes itself as a candidate.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{parse_count, MatchFormat, PointScore, ScoreState, ScoringAutomaton, FIELD_COUNT};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RefineError {
    #[error("score sequence is empty")]
    EmptySequence,
    #[error("length mismatch: {computed} computed vs {truth} truth entries")]
    LengthMismatch { computed: usize, truth: usize },
    #[error("mode window must be odd and at least 3, got {0}")]
    BadWindow(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Sets,
    Games,
    Point,
}

/// Kinds of the six fields, in [`ScoreState::codes`] order.
pub const FIELD_KINDS: [FieldKind; FIELD_COUNT] = [
    FieldKind::Sets,
    FieldKind::Games,
    FieldKind::Point,
    FieldKind::Sets,
    FieldKind::Games,
    FieldKind::Point,
];

/// Indices of the games and sets fields.
pub const COUNT_FIELDS: [usize; 4] = [0, 1, 3, 4];

/// Highest games count on a scoreboard (7 after a tiebreak set).
pub const MAX_GAMES: u8 = 7;

impl FieldKind {
    /// Vocabulary code for `token`, or `None` when it is out of vocabulary.
    pub fn code(self, token: &str, fmt: MatchFormat) -> Option<u8> {
        match self {
            FieldKind::Sets => parse_count(token).filter(|&v| v <= fmt.sets_to_win()),
            FieldKind::Games => parse_count(token).filter(|&v| v <= MAX_GAMES),
            FieldKind::Point => PointScore::from_token(token).map(PointScore::rank),
        }
    }

    pub fn token(self, code: u8) -> String {
        match self {
            FieldKind::Point => PointScore::from_rank(code)
                .map(|p| p.as_str().to_string())
                .unwrap_or_else(|| code.to_string()),
            _ => code.to_string(),
        }
    }
}

/// One scoreboard field as read: the raw token and its vocabulary code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedField {
    pub raw: String,
    pub value: Option<u8>,
}

impl ObservedField {
    pub fn in_vocab(&self) -> bool {
        self.value.is_some()
    }

    fn known(kind: FieldKind, code: u8) -> Self {
        ObservedField {
            raw: kind.token(code),
            value: Some(code),
        }
    }
}

/// A possibly invalid per-rally score reading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedScore {
    pub fields: [ObservedField; FIELD_COUNT],
    /// Completed-set game counts shown before the current games column, per player.
    pub set_history: [Vec<String>; 2],
}

impl ObservedScore {
    /// Builds a reading from six raw tokens in field order.
    pub fn from_tokens<S: AsRef<str>>(tokens: [S; FIELD_COUNT], fmt: MatchFormat) -> Self {
        let fields = std::array::from_fn(|f| {
            let raw = tokens[f].as_ref().to_string();
            let value = FIELD_KINDS[f].code(&raw, fmt);
            ObservedField { raw, value }
        });
        ObservedScore {
            fields,
            set_history: Default::default(),
        }
    }

    pub fn from_state(s: &ScoreState) -> Self {
        let codes = s.codes();
        ObservedScore {
            fields: std::array::from_fn(|f| ObservedField::known(FIELD_KINDS[f], codes[f])),
            set_history: Default::default(),
        }
    }

    pub fn parse_ok(&self) -> bool {
        self.fields.iter().all(ObservedField::in_vocab)
    }

    /// The assembled state when every field is in vocabulary. The state may
    /// still be unreachable.
    pub fn state(&self) -> Option<ScoreState> {
        let mut codes = [0u8; FIELD_COUNT];
        for (slot, field) in codes.iter_mut().zip(&self.fields) {
            *slot = field.value?;
        }
        ScoreState::from_codes(codes)
    }

    /// Number of fields agreeing with `p`; out-of-vocabulary fields never agree.
    pub fn agreement(&self, p: &ScoreState) -> usize {
        self.fields
            .iter()
            .zip(p.codes())
            .filter(|(field, code)| field.value == Some(*code))
            .count()
    }
}

/// Temporally ordered readings, one per rally segment.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScoreSequence {
    pub entries: Vec<ObservedScore>,
}

impl ScoreSequence {
    pub fn new(entries: Vec<ObservedScore>) -> Self {
        ScoreSequence { entries }
    }

    pub fn from_states(states: &[ScoreState]) -> Self {
        ScoreSequence::new(states.iter().map(ObservedScore::from_state).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Assembled states; `None` where a field is out of vocabulary.
    pub fn states(&self) -> Vec<Option<ScoreState>> {
        self.entries.iter().map(ObservedScore::state).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub mode_window: usize,
    /// Let a neighbour's own state be a candidate (a repeated reading after a fault).
    pub allow_repeats: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            mode_window: 5,
            allow_repeats: true,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        if self.mode_window < 3 || self.mode_window.is_multiple_of(2) {
            return Err(RefineError::BadWindow(self.mode_window));
        }
        Ok(())
    }
}

/// Fraction of the six fields on which `a` and `b` agree.
pub fn state_similarity(a: &ScoreState, b: &ScoreState) -> f64 {
    let same = a
        .codes()
        .iter()
        .zip(b.codes())
        .filter(|(x, y)| **x == *y)
        .count();
    same as f64 / FIELD_COUNT as f64
}

/// Mode of the in-vocabulary values; ties go to the value seen first.
fn window_mode(values: impl Iterator<Item = Option<u8>>) -> Option<u8> {
    let mut counts: Vec<(u8, usize)> = Vec::new();
    for v in values.flatten() {
        match counts.iter_mut().find(|(value, _)| *value == v) {
            Some((_, n)) => *n += 1,
            None => counts.push((v, 1)),
        }
    }
    let best = counts.iter().map(|(_, n)| *n).max()?;
    counts.iter().find(|(_, n)| *n == best).map(|(v, _)| *v)
}

const SETS_FIELDS: [usize; 2] = [0, 3];
const GAMES_FIELDS: [usize; 2] = [1, 4];

fn sets_of(e: &ObservedScore) -> (Option<u8>, Option<u8>) {
    (e.fields[0].value, e.fields[3].value)
}

/// Replaces games/sets values that are neither the windowed mode nor one
/// above it. Point fields are left alone.
///
/// Sets columns are smoothed first. A games value is then compared only with
/// the window entries showing the same (smoothed) set score, so the games
/// reset that opens a new set is not mistaken for an error.
pub fn smooth_games_sets(seq: &ScoreSequence, cfg: &RefineConfig) -> Result<ScoreSequence, RefineError> {
    cfg.validate()?;
    if seq.is_empty() {
        return Err(RefineError::EmptySequence);
    }
    let half = cfg.mode_window / 2;
    let n = seq.len();
    let window = |i: usize| i.saturating_sub(half)..=(i + half).min(n - 1);
    let mut out = seq.clone();
    let replace = |out: &mut ScoreSequence, i: usize, f: usize, mode: Option<u8>| {
        let Some(mode) = mode else { return };
        let value = seq.entries[i].fields[f].value;
        if value != Some(mode) && value != Some(mode + 1) {
            out.entries[i].fields[f] = ObservedField::known(FIELD_KINDS[f], mode);
        }
    };
    for f in SETS_FIELDS {
        for i in 0..n {
            let mode = window_mode(seq.entries[window(i)].iter().map(|e| e.fields[f].value));
            replace(&mut out, i, f, mode);
        }
    }
    let sets: Vec<_> = out.entries.iter().map(sets_of).collect();
    for f in GAMES_FIELDS {
        for i in 0..n {
            let mode = window_mode(
                window(i)
                    .filter(|&j| sets[j] == sets[i])
                    .map(|j| seq.entries[j].fields[f].value),
            );
            replace(&mut out, i, f, mode);
        }
    }
    Ok(out)
}

fn is_clean(auto: &ScoringAutomaton, entry: &ObservedScore) -> Option<ScoreState> {
    entry.state().filter(|s| auto.is_valid(s))
}

/// Indices whose reading has an out-of-vocabulary field or is unreachable.
pub fn flag_errors(seq: &ScoreSequence, auto: &ScoringAutomaton) -> Vec<usize> {
    seq.entries
        .iter()
        .enumerate()
        .filter(|(_, e)| is_clean(auto, e).is_none())
        .map(|(i, _)| i)
        .collect()
}

/// Candidate states for a reading between `prev` and `next`.
///
/// With both neighbours the candidates are the intersection of the forward
/// set of `prev` and the backward set of `next`; if that is empty, their
/// union. With one neighbour, that neighbour's one-sided set.
pub fn candidate_states(
    auto: &ScoringAutomaton,
    prev: Option<&ScoreState>,
    next: Option<&ScoreState>,
    allow_repeats: bool,
) -> Vec<ScoreState> {
    let one_sided = |s: &ScoreState, forward: bool| -> BTreeSet<ScoreState> {
        let moved = if forward {
            auto.next_states(s)
        } else {
            auto.previous_states(s)
        };
        let mut set: BTreeSet<ScoreState> = moved.unwrap_or_default().into_iter().collect();
        if allow_repeats {
            set.insert(*s);
        }
        set
    };
    let forward = prev.map(|p| one_sided(p, true));
    let backward = next.map(|n| one_sided(n, false));
    let set = match (forward, backward) {
        (Some(f), Some(b)) => {
            let both: BTreeSet<ScoreState> = f.intersection(&b).copied().collect();
            if both.is_empty() {
                f.union(&b).copied().collect()
            } else {
                both
            }
        }
        (Some(one), None) | (None, Some(one)) => one,
        (None, None) => BTreeSet::new(),
    };
    set.into_iter().collect()
}

/// Best candidate for `observed`: most agreeing fields, then exact games/sets
/// agreement, then a played point over a repeat of one of `neighbours`, then
/// earliest in the match, then lexicographic field order.
pub fn choose_candidate(
    observed: &ObservedScore,
    candidates: &[ScoreState],
    neighbours: &[ScoreState],
) -> Option<ScoreState> {
    let counts_match = |p: &ScoreState| {
        let codes = p.codes();
        COUNT_FIELDS
            .iter()
            .all(|&f| observed.fields[f].value == Some(codes[f]))
    };
    candidates
        .iter()
        .min_by_key(|p| {
            (
                std::cmp::Reverse(observed.agreement(p)),
                !counts_match(p),
                neighbours.contains(p),
                p.progress(),
                p.codes(),
            )
        })
        .copied()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionEntry {
    pub index: usize,
    pub candidates: usize,
    pub chosen: Option<ScoreState>,
    pub applied: bool,
}

pub type CorrectionReport = Vec<CorrectionEntry>;

/// Full refinement: mode smoothing, then candidate replacement of every
/// flagged reading in ascending order.
pub fn correct_sequence(
    seq: &ScoreSequence,
    auto: &ScoringAutomaton,
    cfg: &RefineConfig,
) -> Result<(ScoreSequence, CorrectionReport), RefineError> {
    let smoothed = smooth_games_sets(seq, cfg)?;
    let flagged = flag_errors(&smoothed, auto);
    let mut out = smoothed.clone();
    let mut report = Vec::with_capacity(flagged.len());

    for &i in &flagged {
        let prev = if i > 0 { is_clean(auto, &out.entries[i - 1]) } else { None };
        let next = smoothed
            .entries
            .get(i + 1)
            .and_then(|e| is_clean(auto, e));
        let candidates = candidate_states(auto, prev.as_ref(), next.as_ref(), cfg.allow_repeats);
        let neighbours: Vec<ScoreState> = prev.into_iter().chain(next).collect();
        let chosen = choose_candidate(&smoothed.entries[i], &candidates, &neighbours);
        if let Some(state) = chosen {
            let history = std::mem::take(&mut out.entries[i].set_history);
            out.entries[i] = ObservedScore::from_state(&state);
            out.entries[i].set_history = history;
        }
        report.push(CorrectionEntry {
            index: i,
            candidates: candidates.len(),
            chosen,
            applied: chosen.is_some(),
        });
    }
    Ok((out, report))
}

/// Mean per-rally fraction of agreeing fields.
pub fn score_accuracy(computed: &[ScoreState], truth: &[ScoreState]) -> Result<f64, RefineError> {
    let computed: Vec<Option<ScoreState>> = computed.iter().copied().map(Some).collect();
    accuracy_with_missing(&computed, truth)
}

/// [`score_accuracy`] where a rally without a computed state scores zero.
pub fn accuracy_with_missing(computed: &[Option<ScoreState>], truth: &[ScoreState]) -> Result<f64, RefineError> {
    if computed.len() != truth.len() {
        return Err(RefineError::LengthMismatch {
            computed: computed.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(RefineError::EmptySequence);
    }
    let total: f64 = computed
        .iter()
        .zip(truth)
        .map(|(c, g)| c.as_ref().map_or(0.0, |c| state_similarity(c, g)))
        .sum();
    Ok(total / truth.len() as f64)
}

/// Per-field agreement of raw readings with the truth, without refinement.
/// Out-of-vocabulary fields count as disagreeing.
pub fn fieldwise_accuracy(observed: &ScoreSequence, truth: &[ScoreState]) -> Result<f64, RefineError> {
    if observed.len() != truth.len() {
        return Err(RefineError::LengthMismatch {
            computed: observed.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(RefineError::EmptySequence);
    }
    let total: usize = observed
        .entries
        .iter()
        .zip(truth)
        .map(|(o, g)| o.agreement(g))
        .sum();
    Ok(total as f64 / (FIELD_COUNT * truth.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::PointScore::*;

    fn st(a: (u8, u8, PointScore), b: (u8, u8, PointScore)) -> ScoreState {
        ScoreState::new(a, b)
    }

    fn games_column(values: &[&str]) -> ScoreSequence {
        ScoreSequence::new(
            values
                .iter()
                .map(|g| ObservedScore::from_tokens(["0", g, "0", "0", "0", "0"], MatchFormat::BEST_OF_5))
                .collect(),
        )
    }

    fn games_of(seq: &ScoreSequence) -> Vec<Option<u8>> {
        seq.entries.iter().map(|e| e.fields[1].value).collect()
    }

    #[test]
    fn similarity_counts_fields() {
        let a = st((0, 1, Thirty), (0, 0, Fifteen));
        assert_eq!(state_similarity(&a, &a), 1.0);
        let b = st((0, 1, Forty), (0, 0, Fifteen));
        assert!((state_similarity(&a, &b) - 5.0 / 6.0).abs() < 1e-12);
        let c = st((1, 2, Love), (1, 3, Forty));
        assert_eq!(state_similarity(&a, &c), 0.0);
    }

    #[test]
    fn smoothing_examples() {
        let cfg = RefineConfig::default();
        let flat = games_column(&["2", "2", "2", "2", "2"]);
        assert_eq!(smooth_games_sets(&flat, &cfg).unwrap(), flat);

        let spike = games_column(&["2", "2", "9", "2", "2"]);
        let out = smooth_games_sets(&spike, &cfg).unwrap();
        assert_eq!(games_of(&out), vec![Some(2); 5]);

        let change = games_column(&["2", "2", "3", "3", "3"]);
        assert_eq!(smooth_games_sets(&change, &cfg).unwrap(), change);

        let garbled = games_column(&["2", "2", "Z", "2", "2"]);
        assert_eq!(games_of(&smooth_games_sets(&garbled, &cfg).unwrap()), vec![Some(2); 5]);
    }

    #[test]
    fn smoothing_keeps_new_set_reset() {
        let cfg = RefineConfig::default();
        let states = [
            st((0, 5, Thirty), (0, 3, Fifteen)),
            st((0, 5, Forty), (0, 3, Fifteen)),
            st((0, 5, Forty), (0, 3, Fifteen)),
            st((1, 0, Love), (0, 0, Love)),
        ];
        let seq = ScoreSequence::from_states(&states);
        assert_eq!(smooth_games_sets(&seq, &cfg).unwrap(), seq);
    }

    #[test]
    fn smoothing_tie_prefers_earlier_value() {
        let cfg = RefineConfig::default();
        // window at index 2 holds {4, 4, X, 1, 1}: tie between 4 and 1.
        let seq = games_column(&["4", "4", "X", "1", "1"]);
        assert_eq!(smooth_games_sets(&seq, &cfg).unwrap().entries[2].fields[1].value, Some(4));
    }

    #[test]
    fn smoothing_rejects_bad_input() {
        let seq = games_column(&["1"]);
        for w in [1, 2, 4] {
            let cfg = RefineConfig { mode_window: w, allow_repeats: true };
            assert_eq!(smooth_games_sets(&seq, &cfg), Err(RefineError::BadWindow(w)));
        }
        assert_eq!(
            smooth_games_sets(&ScoreSequence::default(), &RefineConfig::default()),
            Err(RefineError::EmptySequence)
        );
    }

    #[test]
    fn flags_vocabulary_and_structure() {
        let auto = ScoringAutomaton::new(MatchFormat::BEST_OF_5);
        let fmt = MatchFormat::BEST_OF_5;
        let mut entries: Vec<ObservedScore> = (0..5)
            .map(|_| ObservedScore::from_state(&ScoreState::INITIAL))
            .collect();
        assert!(flag_errors(&ScoreSequence::new(entries.clone()), &auto).is_empty());
        entries[3] = ObservedScore::from_tokens(["0", "0", "4O", "0", "0", "0"], fmt);
        entries[1] = ObservedScore::from_tokens(["0", "0", "AD", "0", "0", "30"], fmt);
        assert!(entries[1].parse_ok());
        assert_eq!(flag_errors(&ScoreSequence::new(entries), &auto), vec![1, 3]);
    }

    #[test]
    fn corrects_thirty_all_from_neighbours() {
        let auto = ScoringAutomaton::new(MatchFormat::BEST_OF_5);
        let fmt = MatchFormat::BEST_OF_5;
        let seq = ScoreSequence::new(vec![
            ObservedScore::from_state(&st((0, 0, Thirty), (0, 0, Fifteen))),
            ObservedScore::from_tokens(["0", "0", "3O", "0", "0", "30"], fmt),
            ObservedScore::from_state(&st((0, 0, Thirty), (0, 0, Forty))),
        ]);
        let strict = RefineConfig { allow_repeats: false, ..Default::default() };
        let (out, report) = correct_sequence(&seq, &auto, &strict).unwrap();
        let thirty_all = st((0, 0, Thirty), (0, 0, Thirty));
        assert_eq!(out.entries[1].state(), Some(thirty_all));
        assert_eq!(
            report,
            vec![CorrectionEntry { index: 1, candidates: 1, chosen: Some(thirty_all), applied: true }]
        );
        let json = serde_json::to_string(&report).unwrap();
        assert_eq!(json, r#"[{"index":1,"candidates":1,"chosen":"0-0-30|0-0-30","applied":true}]"#);

        let (out, _) = correct_sequence(&seq, &auto, &RefineConfig::default()).unwrap();
        assert_eq!(out.entries[1].state(), Some(thirty_all));
    }

    #[test]
    fn repeated_reading_after_fault_is_a_candidate() {
        let auto = ScoringAutomaton::new(MatchFormat::BEST_OF_5);
        let fmt = MatchFormat::BEST_OF_5;
        // 15-0, 15-0 (fault replay, games column garbled), 30-0
        let seq = ScoreSequence::new(vec![
            ObservedScore::from_state(&st((0, 0, Fifteen), (0, 0, Love))),
            ObservedScore::from_tokens(["0", "0", "15", "0", "O", "0"], fmt),
            ObservedScore::from_state(&st((0, 0, Thirty), (0, 0, Love))),
        ]);
        // smoothing repairs the games token; make it a points error instead
        let mut seq = seq;
        seq.entries[1] = ObservedScore::from_tokens(["0", "0", "15", "0", "0", "O"], fmt);
        let (out, _) = correct_sequence(&seq, &auto, &RefineConfig::default()).unwrap();
        assert_eq!(out.entries[1].state(), Some(st((0, 0, Fifteen), (0, 0, Love))));
    }

    #[test]
    fn clean_sequence_is_untouched() {
        let auto = ScoringAutomaton::new(MatchFormat::BEST_OF_3);
        let states = [
            ScoreState::INITIAL,
            st((0, 0, Fifteen), (0, 0, Love)),
            st((0, 0, Fifteen), (0, 0, Fifteen)),
        ];
        let seq = ScoreSequence::from_states(&states);
        let (out, report) = correct_sequence(&seq, &auto, &RefineConfig::default()).unwrap();
        assert_eq!(out, seq);
        assert!(report.is_empty());
    }

    #[test]
    fn chained_errors_stay_flagged() {
        let auto = ScoringAutomaton::new(MatchFormat::BEST_OF_3);
        let fmt = MatchFormat::BEST_OF_3;
        let bad = ObservedScore::from_tokens(["0", "0", "3O", "0", "0", "1S"], fmt);
        let seq = ScoreSequence::new(vec![bad.clone(), bad]);
        let (out, report) = correct_sequence(&seq, &auto, &RefineConfig::default()).unwrap();
        assert!(out.entries.iter().all(|e| e.state().is_none()));
        assert!(report.iter().all(|r| !r.applied && r.chosen.is_none() && r.candidates == 0));
    }

    #[test]
    fn accuracy_metric() {
        let a = st((0, 1, Thirty), (0, 0, Fifteen));
        let b = st((0, 1, Forty), (0, 0, Fifteen));
        assert_eq!(score_accuracy(&[a, a], &[a, a]).unwrap(), 1.0);
        let v = score_accuracy(&[a, b], &[a, a]).unwrap();
        assert!((v - (1.0 + 5.0 / 6.0) / 2.0).abs() < 1e-12);
        let c = st((1, 2, Love), (1, 3, Forty));
        assert_eq!(score_accuracy(&[c], &[a]).unwrap(), 0.0);
        assert_eq!(
            score_accuracy(&[a], &[a, a]),
            Err(RefineError::LengthMismatch { computed: 1, truth: 2 })
        );
        assert_eq!(score_accuracy(&[], &[]), Err(RefineError::EmptySequence));
        assert_eq!(accuracy_with_missing(&[None, Some(a)], &[a, a]).unwrap(), 0.5);
    }
}
