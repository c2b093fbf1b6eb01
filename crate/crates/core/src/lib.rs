//! Tennis broadcast indexing: rally segmentation, scorecard localization,
//! automaton-based score refinement, event tagging and a point/game/set index.

pub mod automaton;
pub mod frames;
pub mod index;
pub mod ocr;
pub mod rally;
pub mod refine;
pub mod rng;
pub mod scorecard;
pub mod simkit;
pub mod tagger;

pub use automaton::{MatchFormat, Player, PointScore, ScoreState, ScoringAutomaton};
pub use frames::FrameStack;
pub use index::{MatchIndex, RallyRecord};
pub use rally::Segment;
pub use scorecard::{BBox, Corner};
pub use tagger::{EventTag, TagSet};
