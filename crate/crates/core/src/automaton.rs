//! Tennis scoring as a finite automaton over full match states.
//!
//! A [`ScoreState`] carries sets, games and points for both players. The
//! point, game and set automata are composed into a single product automaton:
//! winning a point may roll over into a game, and a game into a set. The
//! reachable state space is enumerated once, breadth first from the initial
//! state, and both the forward and inverse transition relations are stored so
//! that [`ScoringAutomaton::next_states`] and
//! [`ScoringAutomaton::previous_states`] are table lookups.
//!
//! A tiebreak is modelled as one opaque game played at 6–6 with the ordinary
//! point vocabulary; its winner takes the set 7–6. Completed sets reset the
//! games pair to 0–0.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("state {0} is not a reachable score state")]
    InvalidState(ScoreState),
    #[error("match already decided at {0}")]
    MatchOver(ScoreState),
    #[error("unsupported match format: best of {0}")]
    BadFormat(u8),
    #[error("cannot parse score state {0:?}")]
    Parse(String),
}

/// Point score within a game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PointScore {
    Love,
    Fifteen,
    Thirty,
    Forty,
    Advantage,
}

impl PointScore {
    pub const ALL: [PointScore; 5] = [
        PointScore::Love,
        PointScore::Fifteen,
        PointScore::Thirty,
        PointScore::Forty,
        PointScore::Advantage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PointScore::Love => "0",
            PointScore::Fifteen => "15",
            PointScore::Thirty => "30",
            PointScore::Forty => "40",
            PointScore::Advantage => "AD",
        }
    }

    /// Parses a scoreboard token. Only the exact five vocabulary tokens match.
    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            "0" => Some(PointScore::Love),
            "15" => Some(PointScore::Fifteen),
            "30" => Some(PointScore::Thirty),
            "40" => Some(PointScore::Forty),
            "AD" => Some(PointScore::Advantage),
            _ => None,
        }
    }

    /// Position in the vocabulary, 0 for love through 4 for advantage.
    pub fn rank(self) -> u8 {
        self as u8
    }

    pub fn from_rank(rank: u8) -> Option<Self> {
        Self::ALL.get(rank as usize).copied()
    }
}

impl fmt::Display for PointScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    A,
    B,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::A, Player::B];
}

/// Best-of-3 or best-of-5 singles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchFormat {
    best_of: u8,
}

impl MatchFormat {
    pub const BEST_OF_3: MatchFormat = MatchFormat { best_of: 3 };
    pub const BEST_OF_5: MatchFormat = MatchFormat { best_of: 5 };

    pub fn new(best_of: u8) -> Result<Self, AutomatonError> {
        match best_of {
            3 | 5 => Ok(MatchFormat { best_of }),
            other => Err(AutomatonError::BadFormat(other)),
        }
    }

    pub fn best_of(self) -> u8 {
        self.best_of
    }

    pub fn sets_to_win(self) -> u8 {
        self.best_of.div_ceil(2)
    }
}

/// Full scoreboard reading: `(sets, games, point)` for player A then player B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScoreState {
    pub sets_a: u8,
    pub games_a: u8,
    pub point_a: PointScore,
    pub sets_b: u8,
    pub games_b: u8,
    pub point_b: PointScore,
}

/// Number of scoreboard fields in a [`ScoreState`].
pub const FIELD_COUNT: usize = 6;

impl ScoreState {
    pub const INITIAL: ScoreState = ScoreState {
        sets_a: 0,
        games_a: 0,
        point_a: PointScore::Love,
        sets_b: 0,
        games_b: 0,
        point_b: PointScore::Love,
    };

    pub fn new(
        (sets_a, games_a, point_a): (u8, u8, PointScore),
        (sets_b, games_b, point_b): (u8, u8, PointScore),
    ) -> Self {
        ScoreState {
            sets_a,
            games_a,
            point_a,
            sets_b,
            games_b,
            point_b,
        }
    }

    /// Field codes in the order `sets_a, games_a, point_a, sets_b, games_b,
    /// point_b`; points are encoded by [`PointScore::rank`].
    pub fn codes(&self) -> [u8; FIELD_COUNT] {
        [
            self.sets_a,
            self.games_a,
            self.point_a.rank(),
            self.sets_b,
            self.games_b,
            self.point_b.rank(),
        ]
    }

    pub fn from_codes(codes: [u8; FIELD_COUNT]) -> Option<Self> {
        Some(ScoreState {
            sets_a: codes[0],
            games_a: codes[1],
            point_a: PointScore::from_rank(codes[2])?,
            sets_b: codes[3],
            games_b: codes[4],
            point_b: PointScore::from_rank(codes[5])?,
        })
    }

    /// Ordering key by how far into the match a state lies: sets played, then
    /// games played in the current set, then point ranks.
    pub fn progress(&self) -> (u8, u8, u8) {
        (
            self.sets_a + self.sets_b,
            self.games_a + self.games_b,
            self.point_a.rank() + self.point_b.rank(),
        )
    }

    fn side(&self, player: Player) -> (u8, u8, PointScore) {
        match player {
            Player::A => (self.sets_a, self.games_a, self.point_a),
            Player::B => (self.sets_b, self.games_b, self.point_b),
        }
    }

    fn from_sides(
        winner: Player,
        w: (u8, u8, PointScore),
        l: (u8, u8, PointScore),
    ) -> ScoreState {
        match winner {
            Player::A => ScoreState::new(w, l),
            Player::B => ScoreState::new(l, w),
        }
    }

    pub fn is_terminal(&self, fmt: MatchFormat) -> bool {
        let target = fmt.sets_to_win();
        self.sets_a >= target || self.sets_b >= target
    }
}

impl fmt::Display for ScoreState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{}-{}|{}-{}-{}",
            self.sets_a, self.games_a, self.point_a, self.sets_b, self.games_b, self.point_b
        )
    }
}

impl FromStr for ScoreState {
    type Err = AutomatonError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || AutomatonError::Parse(s.to_string());
        let (left, right) = s.split_once('|').ok_or_else(err)?;
        let side = |text: &str| -> Option<(u8, u8, PointScore)> {
            let mut parts = text.split('-');
            let sets = parse_count(parts.next()?)?;
            let games = parse_count(parts.next()?)?;
            let point = PointScore::from_token(parts.next()?)?;
            if parts.next().is_some() {
                return None;
            }
            Some((sets, games, point))
        };
        Ok(ScoreState::new(
            side(left).ok_or_else(err)?,
            side(right).ok_or_else(err)?,
        ))
    }
}

/// Canonical decimal count: digits only, no sign, no leading zeros.
pub(crate) fn parse_count(token: &str) -> Option<u8> {
    if token.is_empty()
        || !token.bytes().all(|b| b.is_ascii_digit())
        || (token.len() > 1 && token.starts_with('0'))
    {
        return None;
    }
    token.parse().ok()
}

impl Serialize for ScoreState {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScoreState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

fn set_won(winner_games: u8, loser_games: u8) -> bool {
    (winner_games >= 6 && winner_games >= loser_games + 2) || winner_games == 7
}

/// Applies the scoring rules for one point without any reachability check.
/// Callers must ensure the match is not already over.
pub fn apply_point(s: ScoreState, winner: Player, fmt: MatchFormat) -> ScoreState {
    let loser = match winner {
        Player::A => Player::B,
        Player::B => Player::A,
    };
    let (w_sets, w_games, w_point) = s.side(winner);
    let (l_sets, l_games, l_point) = s.side(loser);

    use PointScore::*;
    let game_won = match (w_point, l_point) {
        (Forty, Forty) => {
            return ScoreState::from_sides(
                winner,
                (w_sets, w_games, Advantage),
                (l_sets, l_games, Forty),
            )
        }
        (Forty, Advantage) => {
            return ScoreState::from_sides(
                winner,
                (w_sets, w_games, Forty),
                (l_sets, l_games, Forty),
            )
        }
        (Advantage, _) | (Forty, _) => true,
        _ => false,
    };

    if !game_won {
        let next = PointScore::from_rank(w_point.rank() + 1).unwrap_or(Advantage);
        return ScoreState::from_sides(winner, (w_sets, w_games, next), (l_sets, l_games, l_point));
    }

    let w_games = w_games + 1;
    if set_won(w_games, l_games) {
        let w_sets = (w_sets + 1).min(fmt.sets_to_win());
        ScoreState::from_sides(winner, (w_sets, 0, Love), (l_sets, 0, Love))
    } else {
        ScoreState::from_sides(winner, (w_sets, w_games, Love), (l_sets, l_games, Love))
    }
}

/// The reachable product automaton for one match format.
#[derive(Debug, Clone)]
pub struct ScoringAutomaton {
    format: MatchFormat,
    states: Vec<ScoreState>,
    index: HashMap<ScoreState, usize>,
    forward: Vec<[Option<usize>; 2]>,
    inverse: Vec<Vec<usize>>,
}

impl ScoringAutomaton {
    pub fn new(format: MatchFormat) -> Self {
        let mut states = vec![ScoreState::INITIAL];
        let mut index = HashMap::from([(ScoreState::INITIAL, 0)]);
        let mut forward: Vec<[Option<usize>; 2]> = vec![[None, None]];
        let mut queue = VecDeque::from([0usize]);

        while let Some(id) = queue.pop_front() {
            let state = states[id];
            if state.is_terminal(format) {
                continue;
            }
            for (slot, winner) in Player::BOTH.into_iter().enumerate() {
                let succ = apply_point(state, winner, format);
                let succ_id = *index.entry(succ).or_insert_with(|| {
                    states.push(succ);
                    forward.push([None, None]);
                    queue.push_back(states.len() - 1);
                    states.len() - 1
                });
                forward[id][slot] = Some(succ_id);
            }
        }

        let mut inverse = vec![Vec::new(); states.len()];
        for (id, edges) in forward.iter().enumerate() {
            for succ in edges.iter().flatten() {
                if !inverse[*succ].contains(&id) {
                    inverse[*succ].push(id);
                }
            }
        }
        for preds in &mut inverse {
            preds.sort_by_key(|&p| states[p]);
        }

        ScoringAutomaton {
            format,
            states,
            index,
            forward,
            inverse,
        }
    }

    pub fn format(&self) -> MatchFormat {
        self.format
    }

    /// All reachable states, in breadth-first discovery order.
    pub fn states(&self) -> &[ScoreState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_valid(&self, s: &ScoreState) -> bool {
        self.index.contains_key(s)
    }

    fn id_of(&self, s: &ScoreState) -> Result<usize, AutomatonError> {
        self.index
            .get(s)
            .copied()
            .ok_or(AutomatonError::InvalidState(*s))
    }

    pub fn transition(&self, s: &ScoreState, winner: Player) -> Result<ScoreState, AutomatonError> {
        let id = self.id_of(s)?;
        let slot = match winner {
            Player::A => 0,
            Player::B => 1,
        };
        self.forward[id][slot]
            .map(|succ| self.states[succ])
            .ok_or(AutomatonError::MatchOver(*s))
    }

    /// Successors of `s`, sorted and deduplicated. Empty once the match is over.
    pub fn next_states(&self, s: &ScoreState) -> Result<Vec<ScoreState>, AutomatonError> {
        let id = self.id_of(s)?;
        let mut out: Vec<ScoreState> = self.forward[id]
            .iter()
            .flatten()
            .map(|&succ| self.states[succ])
            .collect();
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// States with a single-point transition into `s`, sorted.
    pub fn previous_states(&self, s: &ScoreState) -> Result<Vec<ScoreState>, AutomatonError> {
        let id = self.id_of(s)?;
        Ok(self.inverse[id].iter().map(|&p| self.states[p]).collect())
    }
}
