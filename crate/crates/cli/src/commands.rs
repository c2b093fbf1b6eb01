use std::fmt::Display;
use std::net::SocketAddr;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tennis_index::index::{build_index_with_boxes, from_json, save_index, MatchIndex};
use tennis_index::ocr::{corrupt_isolated, mean_edit_distance, parse_score_text, read_recognized, write_recognized, NoiseSpec};
use tennis_index::rally::{classify_frames, kalman_smooth, segment_margins, stack_descriptors, train_rally_classifier};
use tennis_index::rally::{ClassifierConfig, RallyModel, SegmentParams};
use tennis_index::refine::{accuracy_with_missing, correct_sequence, RefineConfig, ScoreSequence};
use tennis_index::scorecard::{locate_scorecard, ScorecardError};
use tennis_index::simkit::{generate_match_walk, render_score_text, render_synthetic_stack, SimSpec};
use tennis_index::tagger::tag_sequence;
use tennis_index::{BBox, EventTag, FrameStack, MatchFormat, ScoreState, ScoringAutomaton, Segment, TagSet};
use tennis_index_service::ServiceConfig;

use crate::{
    CliError, EvaluateArgs, IndexArgs, LocateArgs, Metric, RefineArgs, SegmentArgs, ServeArgs, SimulateArgs, TrainArgs,
};

type CmdResult = Result<(), CliError>;

fn data<E: Display>(context: impl Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Data(format!("{context}: {e}"))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(data(path.display()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(data(path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(data(parent.display()))?;
    }
    std::fs::write(path, contents).map_err(data(path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value).map_err(data(path.display()))?;
    text.push('\n');
    write_file(path, text)
}

fn match_format(best_of: u8) -> Result<MatchFormat, CliError> {
    MatchFormat::new(best_of).map_err(|e| CliError::Usage(e.to_string()))
}

fn load_frames(path: &Path) -> Result<FrameStack, CliError> {
    FrameStack::load(path).map_err(data(path.display()))
}

/// Ground truth written by `simulate`.
#[derive(Debug, Serialize, Deserialize)]
struct Truth {
    format: MatchFormat,
    segments: Vec<Segment>,
    bbox: BBox,
    scores: Vec<ScoreState>,
    faults: Vec<usize>,
    coordinates: Vec<(u32, u32, u32)>,
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    if !(0.0..=1.0).contains(&args.corruption) {
        return Err(CliError::Usage(format!("--corruption must lie in [0, 1], got {}", args.corruption)));
    }
    let spec = SimSpec {
        seed: args.seed,
        n_points: args.points,
        best_of: args.best_of,
        width: args.width,
        height: args.height,
        fault_rate: args.fault_rate,
        ..SimSpec::default()
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let walk = generate_match_walk(&spec).map_err(data("simulate"))?;
    let (stack, truth) = render_synthetic_stack(&spec).map_err(data("simulate"))?;
    let text = render_score_text(&walk.states);
    let (noisy, _) = corrupt_isolated(&text, args.corruption, &NoiseSpec::new(0.0, 0.0, args.seed));

    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(data(dir.display()))?;
    let frames = dir.join("frames.fstk");
    stack.save(&frames).map_err(data(frames.display()))?;
    write_json(&dir.join("labels.json"), &truth.labels(stack.count()))?;
    write_file(&dir.join("scores.txt"), write_recognized(&text))?;
    write_file(&dir.join("recognized.txt"), write_recognized(&noisy))?;
    write_json(
        &dir.join("truth.json"),
        &Truth {
            format: spec.format().map_err(data("simulate"))?,
            segments: truth.segments,
            bbox: truth.bbox,
            scores: walk.states,
            faults: walk.faults,
            coordinates: walk.coordinates,
        },
    )?;
    write_json(&dir.join("spec.json"), &spec)
}

pub fn train(args: &TrainArgs) -> CmdResult {
    if args.every == 0 {
        return Err(CliError::Usage("--every must be positive".into()));
    }
    let stack = load_frames(&args.frames)?;
    let labels: Vec<i8> = read_json(&args.labels)?;
    if labels.len() != stack.count() {
        return Err(CliError::Data(format!(
            "{} labels for {} frames",
            labels.len(),
            stack.count()
        )));
    }
    let cfg = ClassifierConfig {
        c: args.c,
        chi2_period: args.period,
        epochs: args.epochs,
        seed: args.seed,
        ..ClassifierConfig::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let features = stack_descriptors(&stack.every_nth(args.every), &cfg).map_err(data("train"))?;
    let labels: Vec<i8> = labels.into_iter().step_by(args.every).collect();
    let model = train_rally_classifier(&features, &labels, &cfg).map_err(data("train"))?;
    write_json(&args.out, &model)
}

pub fn segment(args: &SegmentArgs) -> CmdResult {
    let stack = load_frames(&args.frames)?;
    let model: RallyModel = read_json(&args.model)?;
    let params = SegmentParams {
        process_variance: args.process_variance,
        measurement_variance: args.measurement_variance,
        threshold: args.threshold,
        min_len: args.min_len,
    };
    let classified = classify_frames(&stack, &model).map_err(data("segment"))?;
    let margins: Vec<f64> = classified.iter().map(|(_, m)| *m).collect();
    let segments = segment_margins(&margins, &params).map_err(data("segment"))?;
    if let Some(path) = &args.margins_out {
        let smoothed = kalman_smooth(&margins, params.process_variance, params.measurement_variance)
            .map_err(data("segment"))?;
        let rows: Vec<Value> = classified
            .iter()
            .zip(&smoothed)
            .map(|((label, margin), s)| json!({"label": label, "margin": margin, "smoothed": s}))
            .collect();
        write_json(path, &rows)?;
    }
    write_json(&args.out, &segments)
}

pub fn locate(args: &LocateArgs) -> CmdResult {
    if !(args.quantile > 0.0 && args.quantile < 1.0) {
        return Err(CliError::Usage(format!("--quantile must lie in (0, 1), got {}", args.quantile)));
    }
    let stack = load_frames(&args.frames)?;
    let segments: Vec<Segment> = read_json(&args.segments)?;
    let mut boxes: Vec<Option<BBox>> = Vec::with_capacity(segments.len());
    for seg in &segments {
        if seg.end_frame >= stack.count() {
            return Err(CliError::Data(format!(
                "segment {}..{} exceeds the {} frames of {}",
                seg.start_frame,
                seg.end_frame,
                stack.count(),
                args.frames.display()
            )));
        }
        match locate_scorecard(&stack.slice(seg.start_frame, seg.end_frame), args.quantile) {
            Ok(b) => boxes.push(Some(b)),
            Err(ScorecardError::NoCandidate | ScorecardError::TooFewFrames(..)) => boxes.push(None),
            Err(e) => return Err(CliError::Data(format!("locate: {e}"))),
        }
    }
    write_json(&args.out, &boxes)
}

pub fn refine(args: &RefineArgs) -> CmdResult {
    let fmt = match_format(args.format)?;
    let cfg = RefineConfig {
        mode_window: args.window,
        allow_repeats: !args.no_repeats,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let records = read_recognized(&read_text(&args.scores)?).map_err(data(args.scores.display()))?;
    let seq = ScoreSequence::new(records.iter().map(|r| parse_score_text(r, fmt)).collect());
    let auto = ScoringAutomaton::new(fmt);
    let (out, report) = correct_sequence(&seq, &auto, &cfg).map_err(data("refine"))?;
    write_json(&args.out, &out.states())?;
    if let Some(path) = &args.report {
        let unreadable = seq.entries.iter().filter(|e| !e.parse_ok()).count();
        write_json(
            path,
            &json!({
                "readings": seq.len(),
                "unreadable": unreadable,
                "flagged": report.len(),
                "corrected": report.iter().filter(|c| c.applied).count(),
                "corrections": report,
            }),
        )?;
    }
    Ok(())
}

pub fn index(args: &IndexArgs) -> CmdResult {
    let fmt = match_format(args.format)?;
    if !(args.fps > 0.0 && args.fps.is_finite()) {
        return Err(CliError::Usage(format!("--fps must be positive, got {}", args.fps)));
    }
    let segments: Vec<Segment> = read_json(&args.segments)?;
    let scores: Vec<Option<ScoreState>> = read_json(&args.scores)?;
    let boxes: Vec<Option<BBox>> = match &args.boxes {
        Some(path) => read_json(path)?,
        None => vec![None; segments.len()],
    };
    let auto = ScoringAutomaton::new(fmt);
    if let Some((i, s)) = scores.iter().enumerate().find_map(|(i, s)| s.filter(|s| !auto.is_valid(s)).map(|s| (i, s))) {
        return Err(CliError::Data(format!("score {i} ({s}) is not reachable in a best-of-{} match", fmt.best_of())));
    }
    let tags = tag_sequence(&scores);
    let idx = build_index_with_boxes(&segments, &scores, &tags, &boxes, fmt, args.fps, &args.match_id)
        .map_err(data("index"))?;
    save_index(&idx, &args.out).map_err(data(args.out.display()))
}

/// Per-rally scores from a score list, an index, or a `simulate` truth file.
fn load_scores(path: &Path) -> Result<Vec<Option<ScoreState>>, CliError> {
    let text = read_text(path)?;
    let value: Value = serde_json::from_str(&text).map_err(data(path.display()))?;
    if value.is_array() {
        return serde_json::from_value(value).map_err(data(path.display()));
    }
    if value.get("rallies").is_some() {
        let idx = from_json(&text).map_err(data(path.display()))?;
        return Ok(idx.rallies.iter().map(|r| r.score).collect());
    }
    let truth: Truth = serde_json::from_value(value).map_err(data(path.display()))?;
    Ok(truth.scores.into_iter().map(Some).collect())
}

/// Per-rally tags. Truth files take faults from the generator's record
/// rather than from repeated readings.
fn load_tags(path: &Path) -> Result<Vec<TagSet>, CliError> {
    let text = read_text(path)?;
    let value: Value = serde_json::from_str(&text).map_err(data(path.display()))?;
    if value.get("rallies").is_some() {
        let idx: MatchIndex = from_json(&text).map_err(data(path.display()))?;
        return Ok(idx.rallies.into_iter().map(|r| r.tags).collect());
    }
    if value.get("faults").is_some() {
        let truth: Truth = serde_json::from_value(value).map_err(data(path.display()))?;
        let states: Vec<Option<ScoreState>> = truth.scores.into_iter().map(Some).collect();
        let mut tags = tag_sequence(&states);
        for (i, t) in tags.iter_mut().enumerate() {
            t.remove(&EventTag::Fault);
            if truth.faults.contains(&i) {
                t.insert(EventTag::Fault);
            }
        }
        return Ok(tags);
    }
    Ok(tag_sequence(&load_scores(path)?))
}

fn length_check(pred: usize, truth: usize) -> CmdResult {
    if pred != truth {
        return Err(CliError::Data(format!("{pred} predicted rallies against {truth} in the truth")));
    }
    Ok(())
}

fn tag_metrics(pred: &[TagSet], truth: &[TagSet]) -> Value {
    let mut out = serde_json::Map::new();
    for tag in EventTag::ALL {
        let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
        for (p, t) in pred.iter().zip(truth) {
            match (p.contains(&tag), t.contains(&tag)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        let ratio = |num: usize, den: usize| if den == 0 { Value::Null } else { json!(num as f64 / den as f64) };
        out.insert(
            tag.as_str().to_string(),
            json!({
                "precision": ratio(tp, tp + fp),
                "recall": ratio(tp, tp + fn_),
                "accuracy": ratio(tp + tn, pred.len()),
                "support": tp + fn_,
            }),
        );
    }
    Value::Object(out)
}

pub fn evaluate(args: &EvaluateArgs) -> CmdResult {
    let result = match args.metric {
        Metric::Ac => {
            let pred = load_scores(&args.pred)?;
            let truth = load_scores(&args.truth)?;
            length_check(pred.len(), truth.len())?;
            let Some(truth): Option<Vec<ScoreState>> = truth.into_iter().collect() else {
                return Err(CliError::Data(format!("{} has rallies without a score", args.truth.display())));
            };
            let value = accuracy_with_missing(&pred, &truth).map_err(data("evaluate"))?;
            json!({"metric": "ac", "value": value, "rallies": truth.len()})
        }
        Metric::Edit => {
            let pred = read_recognized(&read_text(&args.pred)?).map_err(data(args.pred.display()))?;
            let truth = read_recognized(&read_text(&args.truth)?).map_err(data(args.truth.display()))?;
            length_check(pred.len(), truth.len())?;
            let value = mean_edit_distance(&pred, &truth)
                .ok_or_else(|| CliError::Data("no records to compare".into()))?;
            json!({"metric": "edit", "value": value, "records": truth.len()})
        }
        Metric::Tags => {
            let pred = load_tags(&args.pred)?;
            let truth = load_tags(&args.truth)?;
            length_check(pred.len(), truth.len())?;
            let per_tag = tag_metrics(&pred, &truth);
            let exact = pred.iter().zip(&truth).filter(|(p, t)| p == t).count();
            let value = if truth.is_empty() { 1.0 } else { exact as f64 / truth.len() as f64 };
            json!({"metric": "tags", "value": value, "rallies": truth.len(), "per_tag": per_tag})
        }
    };
    match &args.out {
        Some(path) => write_json(path, &result),
        None => {
            println!("{}", serde_json::to_string_pretty(&result).expect("metrics serialize"));
            Ok(())
        }
    }
}

pub fn serve(args: &ServeArgs) -> CmdResult {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cfg = ServiceConfig {
        index_dir: args.index_dir.clone(),
        addr: SocketAddr::new(args.host, args.port),
        static_dir: args.static_dir.clone(),
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(data("runtime"))?;
    runtime
        .block_on(tennis_index_service::serve(cfg))
        .map_err(|e| CliError::Data(e.to_string()))
}
