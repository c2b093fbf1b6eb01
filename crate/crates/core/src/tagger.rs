//! Event tags derived from consecutive scoreboard readings.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::automaton::{AutomatonError, PointScore, ScoreState, ScoringAutomaton};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventTag {
    Fault,
    Deuce,
    Advantage,
}

impl EventTag {
    pub const ALL: [EventTag; 3] = [EventTag::Fault, EventTag::Deuce, EventTag::Advantage];

    pub fn as_str(self) -> &'static str {
        match self {
            EventTag::Fault => "fault",
            EventTag::Deuce => "deuce",
            EventTag::Advantage => "advantage",
        }
    }
}

impl fmt::Display for EventTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown tag {s:?}"))
    }
}

pub type TagSet = BTreeSet<EventTag>;

/// Tags for the rally reading `cur`, given the preceding rally's reading.
///
/// A repeated reading marks a fault: the serve was replayed without the
/// score moving.
pub fn tag_segment(
    auto: &ScoringAutomaton,
    prev: Option<&ScoreState>,
    cur: &ScoreState,
) -> Result<TagSet, AutomatonError> {
    for s in prev.into_iter().chain(Some(cur)) {
        if !auto.is_valid(s) {
            return Err(AutomatonError::InvalidState(*s));
        }
    }
    Ok(tags_unchecked(prev, cur))
}

pub(crate) fn tags_unchecked(prev: Option<&ScoreState>, cur: &ScoreState) -> TagSet {
    let mut tags = TagSet::new();
    if cur.point_a == PointScore::Forty && cur.point_b == PointScore::Forty {
        tags.insert(EventTag::Deuce);
    }
    if cur.point_a == PointScore::Advantage || cur.point_b == PointScore::Advantage {
        tags.insert(EventTag::Advantage);
    }
    if prev == Some(cur) {
        tags.insert(EventTag::Fault);
    }
    tags
}

/// Tags for a whole sequence; rallies without a state get no tags and break
/// the fault chain.
pub fn tag_sequence(states: &[Option<ScoreState>]) -> Vec<TagSet> {
    states
        .iter()
        .enumerate()
        .map(|(i, cur)| match cur {
            Some(cur) => {
                let prev = if i > 0 { states[i - 1].as_ref() } else { None };
                tags_unchecked(prev, cur)
            }
            None => TagSet::new(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::MatchFormat;
    use PointScore::*;

    #[test]
    fn rule_examples() {
        let auto = ScoringAutomaton::new(MatchFormat::BEST_OF_5);
        let deuce = ScoreState::new((0, 0, Forty), (0, 0, Forty));
        assert_eq!(tag_segment(&auto, None, &deuce).unwrap(), TagSet::from([EventTag::Deuce]));
        let adv = ScoreState::new((0, 0, Advantage), (0, 0, Forty));
        assert_eq!(tag_segment(&auto, Some(&deuce), &adv).unwrap(), TagSet::from([EventTag::Advantage]));
        let s = ScoreState::new((0, 1, Thirty), (0, 0, Fifteen));
        assert_eq!(tag_segment(&auto, Some(&s), &s).unwrap(), TagSet::from([EventTag::Fault]));
        assert!(tag_segment(&auto, None, &ScoreState::INITIAL).unwrap().is_empty());
    }

    #[test]
    fn rejects_invalid_states() {
        let auto = ScoringAutomaton::new(MatchFormat::BEST_OF_3);
        let bad = ScoreState::new((0, 0, Advantage), (0, 0, Love));
        assert!(tag_segment(&auto, None, &bad).is_err());
        assert!(tag_segment(&auto, Some(&bad), &ScoreState::INITIAL).is_err());
    }

    #[test]
    fn deuce_and_advantage_exclusive() {
        for fmt in [MatchFormat::BEST_OF_3, MatchFormat::BEST_OF_5] {
            let auto = ScoringAutomaton::new(fmt);
            for s in auto.states() {
                let tags = tag_segment(&auto, None, s).unwrap();
                assert!(!(tags.contains(&EventTag::Deuce) && tags.contains(&EventTag::Advantage)));
            }
        }
    }

    #[test]
    fn tag_names() {
        assert_eq!(serde_json::to_string(&EventTag::Advantage).unwrap(), "\"advantage\"");
        assert_eq!("fault".parse::<EventTag>().unwrap(), EventTag::Fault);
        assert!("ace".parse::<EventTag>().is_err());
    }

    #[test]
    fn sequence_tagging() {
        let a = ScoreState::INITIAL;
        let tags = tag_sequence(&[Some(a), Some(a), None, Some(a)]);
        assert!(tags[0].is_empty());
        assert_eq!(tags[1], TagSet::from([EventTag::Fault]));
        assert!(tags[2].is_empty());
        assert!(tags[3].is_empty());
    }
}
