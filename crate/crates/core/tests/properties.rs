use std::sync::OnceLock;

use proptest::prelude::*;
use tennis_index::index::{build_index, from_json, to_json};
use tennis_index::ocr::{corrupt_isolated, corrupt_sequence, normalized_edit_distance, parse_score_text, NoiseSpec, RawScoreText};
use tennis_index::rally::{additive_chi2_kernel, chi2_feature_map, extract_rally_segments, hog_descriptor, kalman_smooth};
use tennis_index::rally::ClassifierConfig;
use tennis_index::refine::{correct_sequence, score_accuracy, smooth_games_sets, RefineConfig, ScoreSequence};
use tennis_index::rng::CounterRng;
use tennis_index::scorecard::{correlation_image, locate_scorecard, DEFAULT_BINARIZE_QUANTILE};
use tennis_index::simkit::{generate_match_walk, render_score_text, render_synthetic_stack, SimSpec};
use tennis_index::tagger::tag_sequence;
use tennis_index::{EventTag, FrameStack, MatchFormat, PointScore, ScoreState, ScoringAutomaton, Segment};

fn automaton(best_of: u8) -> &'static ScoringAutomaton {
    static BO3: OnceLock<ScoringAutomaton> = OnceLock::new();
    static BO5: OnceLock<ScoringAutomaton> = OnceLock::new();
    match best_of {
        3 => BO3.get_or_init(|| ScoringAutomaton::new(MatchFormat::BEST_OF_3)),
        _ => BO5.get_or_init(|| ScoringAutomaton::new(MatchFormat::BEST_OF_5)),
    }
}

fn best_of() -> impl Strategy<Value = u8> {
    prop_oneof![Just(3u8), Just(5u8)]
}

fn reachable_state() -> impl Strategy<Value = (u8, ScoreState)> {
    (best_of(), any::<prop::sample::Index>()).prop_map(|(b, i)| {
        let states = automaton(b).states();
        (b, states[i.index(states.len())])
    })
}

fn walk_spec() -> impl Strategy<Value = SimSpec> {
    (any::<u64>(), 1usize..300, best_of(), 0.0f64..0.3, 0.2f64..0.8).prop_map(|(seed, n, b, fault, bias)| SimSpec {
        seed,
        n_points: n,
        best_of: b,
        fault_rate: fault,
        point_bias: bias,
        ..SimSpec::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transitions_are_dual_and_bounded((b, s) in reachable_state()) {
        let auto = automaton(b);
        let next = auto.next_states(&s).unwrap();
        prop_assert!(next.len() <= 2);
        prop_assert_eq!(next.is_empty(), s.is_terminal(auto.format()));
        for n in &next {
            prop_assert!(auto.is_valid(n));
            prop_assert!(auto.previous_states(n).unwrap().contains(&s));
        }
        for p in auto.previous_states(&s).unwrap() {
            prop_assert!(auto.is_valid(&p));
            prop_assert!(auto.next_states(&p).unwrap().contains(&s));
        }
    }

    #[test]
    fn reachable_states_respect_field_invariants((b, s) in reachable_state()) {
        let fmt = automaton(b).format();
        prop_assert!(s.sets_a <= fmt.sets_to_win() && s.sets_b <= fmt.sets_to_win());
        prop_assert!(s.games_a <= 7 && s.games_b <= 7);
        let ad_a = s.point_a == PointScore::Advantage;
        let ad_b = s.point_b == PointScore::Advantage;
        prop_assert!(!(ad_a && ad_b));
        prop_assert!(!ad_a || s.point_b == PointScore::Forty);
        prop_assert!(!ad_b || s.point_a == PointScore::Forty);
    }

    #[test]
    fn parse_inverts_render((b, s) in reachable_state()) {
        let parsed = parse_score_text(&RawScoreText::render(&s), automaton(b).format());
        prop_assert!(parsed.parse_ok());
        prop_assert_eq!(parsed.state(), Some(s));
    }

    #[test]
    fn state_text_round_trips((_, s) in reachable_state()) {
        prop_assert_eq!(s.to_string().parse::<ScoreState>().unwrap(), s);
    }

    #[test]
    fn walks_stay_valid(spec in walk_spec()) {
        let auto = automaton(spec.best_of);
        let walk = generate_match_walk(&spec).unwrap();
        prop_assert_eq!(walk.states.len(), spec.n_points);
        prop_assert_eq!(walk.states[0], ScoreState::INITIAL);
        for s in &walk.states {
            prop_assert!(auto.is_valid(s));
            prop_assert!(!s.is_terminal(auto.format()));
        }
        for pair in walk.states.windows(2) {
            prop_assert!(pair[0] == pair[1] || auto.next_states(&pair[0]).unwrap().contains(&pair[1]));
        }
        for &f in &walk.faults {
            prop_assert!(f > 0 && walk.states[f] == walk.states[f - 1]);
        }
        prop_assert_eq!(&generate_match_walk(&spec).unwrap(), &walk);
    }

    #[test]
    fn clean_readings_survive_refinement(spec in walk_spec()) {
        let walk = generate_match_walk(&spec).unwrap();
        let seq = ScoreSequence::from_states(&walk.states);
        let cfg = RefineConfig::default();
        prop_assert_eq!(smooth_games_sets(&seq, &cfg).unwrap().states(), seq.states());
        let (out, report) = correct_sequence(&seq, automaton(spec.best_of), &cfg).unwrap();
        prop_assert!(report.is_empty());
        prop_assert_eq!(out.states(), seq.states());
    }

    #[test]
    fn refinement_is_idempotent_and_valid(spec in walk_spec(), fraction in 0.0f64..0.3) {
        let auto = automaton(spec.best_of);
        let fmt = auto.format();
        let walk = generate_match_walk(&spec).unwrap();
        let (noisy, _) = corrupt_isolated(&render_score_text(&walk.states), fraction, &NoiseSpec::new(0.0, 0.0, spec.seed));
        let seq = ScoreSequence::new(noisy.iter().map(|r| parse_score_text(r, fmt)).collect());
        let cfg = RefineConfig::default();
        let (once, report) = correct_sequence(&seq, auto, &cfg).unwrap();
        for entry in &report {
            if let Some(s) = entry.chosen {
                prop_assert!(auto.is_valid(&s));
            }
        }
        let (twice, _) = correct_sequence(&once, auto, &cfg).unwrap();
        prop_assert_eq!(twice.states(), once.states());
        let smoothed = smooth_games_sets(&seq, &cfg).unwrap();
        for i in 0..seq.len() {
            let kept = seq.entries[i].state().filter(|s| auto.is_valid(s) && smoothed.entries[i] == seq.entries[i]);
            if let Some(s) = kept {
                prop_assert_eq!(once.states()[i], Some(s));
            }
        }
    }

    #[test]
    fn score_accuracy_is_reflexive_and_symmetric(a in walk_spec(), seed in any::<u64>()) {
        let x = generate_match_walk(&a).unwrap().states;
        let y = generate_match_walk(&SimSpec { seed, ..a.clone() }).unwrap().states;
        prop_assert_eq!(score_accuracy(&x, &x).unwrap(), 1.0);
        prop_assert_eq!(score_accuracy(&x, &y).unwrap(), score_accuracy(&y, &x).unwrap());
    }

    #[test]
    fn zero_rate_noise_is_identity(spec in walk_spec()) {
        let text = render_score_text(&generate_match_walk(&spec).unwrap().states);
        prop_assert_eq!(corrupt_sequence(&text, &NoiseSpec::new(0.0, 0.0, spec.seed)), text);
    }

    #[test]
    fn edit_distance_is_a_symmetric_normalized_metric(a in "[0-9A-D \n]{0,12}", b in "[0-9A-D \n]{0,12}") {
        prop_assert_eq!(normalized_edit_distance(&a, &a), 0.0);
        let d = normalized_edit_distance(&a, &b);
        prop_assert_eq!(d, normalized_edit_distance(&b, &a));
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn tags_follow_their_rules(spec in walk_spec()) {
        let states: Vec<Option<ScoreState>> = generate_match_walk(&spec).unwrap().states.into_iter().map(Some).collect();
        let tags = tag_sequence(&states);
        for (i, t) in tags.iter().enumerate() {
            prop_assert!(!(t.contains(&EventTag::Deuce) && t.contains(&EventTag::Advantage)));
            if t.contains(&EventTag::Fault) {
                prop_assert!(i > 0 && states[i] == states[i - 1]);
            }
        }
    }

    #[test]
    fn index_round_trips_and_orders_coordinates(spec in walk_spec(), gaps in prop::collection::vec((0usize..40, 1usize..200), 300)) {
        let walk = generate_match_walk(&spec).unwrap();
        let mut frame = 0;
        let segments: Vec<Segment> = gaps[..walk.states.len()]
            .iter()
            .map(|&(gap, len)| {
                let seg = Segment::new(frame + gap, frame + gap + len - 1);
                frame = seg.end_frame + 1;
                seg
            })
            .collect();
        let scores: Vec<Option<ScoreState>> = walk.states.iter().copied().map(Some).collect();
        let idx = build_index(&segments, &scores, &tag_sequence(&scores), automaton(spec.best_of).format(), 25.0, "p").unwrap();
        prop_assert_eq!(&from_json(&to_json(&idx)).unwrap(), &idx);
        for pair in idx.rallies.windows(2) {
            prop_assert!(pair[0].coordinates() <= pair[1].coordinates());
        }
        for (i, &(s, g, p)) in walk.coordinates.iter().enumerate() {
            prop_assert_eq!(idx.rallies[i].coordinates(), (s, g, p));
            let hits: Vec<u32> = idx.query_point(s, g, p).iter().map(|r| r.rally_id).collect();
            let expected: Vec<u32> = (0..walk.coordinates.len())
                .filter(|&j| walk.coordinates[j] == (s, g, p))
                .map(|j| j as u32 + 1)
                .collect();
            prop_assert_eq!(hits, expected);
        }
    }

    #[test]
    fn segments_are_disjoint_ordered_and_long(margins in prop::collection::vec(-2.0f64..2.0, 1..600), min_len in 1usize..60) {
        let smoothed = kalman_smooth(&margins, 0.01, 0.25).unwrap();
        prop_assert_eq!(smoothed.len(), margins.len());
        let segments = extract_rally_segments(&smoothed, 0.0, min_len).unwrap();
        for s in &segments {
            prop_assert!(s.start_frame <= s.end_frame && s.end_frame < margins.len());
            prop_assert!(s.len() >= min_len);
        }
        for pair in segments.windows(2) {
            prop_assert!(pair[0].end_frame < pair[1].start_frame);
        }
    }

    #[test]
    fn kalman_fixes_constants(value in -5.0f64..5.0, n in 1usize..200) {
        for v in kalman_smooth(&vec![value; n], 0.01, 0.25).unwrap() {
            prop_assert!((v - value).abs() < 1e-9);
        }
    }

    #[test]
    fn frame_stacks_round_trip(w in 1usize..20, h in 1usize..20, n in 0usize..5, seed in any::<u64>()) {
        let mut rng = CounterRng::new(seed, 0);
        let pixels: Vec<u8> = (0..w * h * n).map(|_| rng.below(256) as u8).collect();
        let stack = FrameStack::new(w, h, pixels).unwrap();
        let mut bytes = Vec::new();
        stack.write_to(&mut bytes).unwrap();
        prop_assert_eq!(FrameStack::read_from(&bytes[..]).unwrap(), stack);
    }
}

fn random_frame(seed: u64, w: usize, h: usize, lo: u64, hi: u64) -> Vec<u8> {
    let mut rng = CounterRng::new(seed, 0);
    (0..w * h).map(|_| rng.range_inclusive(lo, hi) as u8).collect()
}

fn descriptor(pixels: &[u8], w: usize, h: usize) -> Vec<f32> {
    let stack = FrameStack::new(w, h, pixels.to_vec()).unwrap();
    hog_descriptor(stack.frame(0), &ClassifierConfig::default()).unwrap()
}

fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hog_ignores_intensity_shift_and_scale(seed in any::<u64>(), shift in 1u8..100) {
        let (w, h) = (160, 90);
        let base = random_frame(seed, w, h, 10, 120);
        let d = descriptor(&base, w, h);
        let shifted: Vec<u8> = base.iter().map(|&p| p + shift).collect();
        let doubled: Vec<u8> = base.iter().map(|&p| p * 2).collect();
        prop_assert!(max_abs_diff(&d, &descriptor(&shifted, w, h)) < 1e-4);
        prop_assert!(max_abs_diff(&d, &descriptor(&doubled, w, h)) < 1e-3);
    }

    #[test]
    fn chi2_map_approximates_kernel(seed in any::<u64>()) {
        let mut rng = CounterRng::new(seed, 0);
        let x: Vec<f64> = (0..4320).map(|_| rng.next_f64()).collect();
        let y: Vec<f64> = (0..4320).map(|_| rng.next_f64()).collect();
        let to32 = |v: &[f64]| v.iter().map(|&a| a as f32).collect::<Vec<f32>>();
        let mx = chi2_feature_map(&to32(&x), 3.0).unwrap();
        let my = chi2_feature_map(&to32(&y), 3.0).unwrap();
        let approx: f64 = mx.iter().zip(&my).map(|(a, b)| *a as f64 * *b as f64).sum();
        let exact = additive_chi2_kernel(&x, &y);
        prop_assert!((approx - exact).abs() / exact <= 0.05, "approx {} exact {}", approx, exact);
    }

    #[test]
    fn correlation_maps_are_bounded(seed in any::<u64>(), n in 2usize..8) {
        let (w, h) = (24, 20);
        let mut pixels = Vec::new();
        for t in 0..n {
            pixels.extend(random_frame(seed.wrapping_add(t as u64), w, h, 0, 255));
        }
        let g = correlation_image(&FrameStack::new(w, h, pixels).unwrap()).unwrap();
        for t in 0..n {
            for i in 0..w * h {
                let mean = (0..=t).map(|k| g.gradient[k][i] as f64).sum::<f64>() / (t + 1) as f64;
                prop_assert!((g.mean[t][i] as f64 - mean).abs() <= 1e-3 * mean.max(1.0));
                prop_assert!(g.correlation[t][i] >= 0.0);
                prop_assert!(g.correlation[t][i] <= g.mean[t][i] * (1.0 + 1e-6));
                prop_assert!(g.gradient[t][i] <= g.global_max);
            }
        }
    }
}

/// A noise-free stack: flat field, a bar sweeping the middle band, and a
/// static striped box at `(bx, by)`.
fn boxed_stack(w: usize, h: usize, frames: usize, bx: usize, by: usize, bw: usize, bh: usize) -> FrameStack {
    let mut stack = FrameStack::empty(w, h).unwrap();
    let band = h / 5 + 4..h - h / 5 - 4;
    for t in 0..frames {
        let mut frame = vec![90u8; w * h];
        let bar = (t * 11) % w;
        for y in band.clone() {
            for x in bar..(bar + 6).min(w) {
                frame[y * w + x] = 250;
            }
        }
        for y in by..by + bh {
            for x in bx..bx + bw {
                frame[y * w + x] = if ((x - bx) / 2).is_multiple_of(2) { 70 } else { 190 };
            }
        }
        stack.push_frame(&frame).unwrap();
    }
    stack
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn locate_is_translation_consistent(bw in 12usize..40, bh in 6usize..10, x in 3usize..20, y in 3usize..6, dx in 0usize..8, dy in 0usize..3) {
        let (w, h) = (160, 90);
        prop_assume!(x + dx + bw + 3 <= w / 2 && y + dy + bh + 3 <= h / 5);
        let a = locate_scorecard(&boxed_stack(w, h, 12, x, y, bw, bh), DEFAULT_BINARIZE_QUANTILE).unwrap();
        let b = locate_scorecard(&boxed_stack(w, h, 12, x + dx, y + dy, bw, bh), DEFAULT_BINARIZE_QUANTILE).unwrap();
        prop_assert_eq!(a.corner, b.corner);
        prop_assert_eq!((a.x + dx, a.y + dy, a.w, a.h), (b.x, b.y, b.w, b.h));
        prop_assert_eq!(locate_scorecard(&boxed_stack(w, h, 12, x, y, bw, bh), DEFAULT_BINARIZE_QUANTILE).unwrap(), a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn rendered_stacks_are_reproducible_and_consistent(seed in any::<u64>()) {
        let spec = SimSpec { seed, n_points: 2, rally_len: (30, 40), gap_len: (20, 30), ..SimSpec::default() };
        let (stack, truth) = render_synthetic_stack(&spec).unwrap();
        let (again, truth_again) = render_synthetic_stack(&spec).unwrap();
        prop_assert!(stack == again);
        prop_assert_eq!(&truth, &truth_again);
        prop_assert_eq!(truth.segments.len(), 2);
        for s in &truth.segments {
            prop_assert!(s.end_frame < stack.count());
        }
        prop_assert!(truth.segments[0].end_frame < truth.segments[1].start_frame);
        let b = truth.bbox;
        prop_assert!(b.w > 0 && b.h > 0 && b.x + b.w <= stack.width() && b.y + b.h <= stack.height());
    }
}
