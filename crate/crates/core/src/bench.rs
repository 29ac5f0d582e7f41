//! Compression-ratio sweep.
//!
//! For every ratio: shrink each source frame, run a fresh background model on
//! the shrunk frames, scale each mask back to the source size and score it.
//! Only the model's per-frame segment+update call is timed into
//! `cpu_seconds`; resizing is timed separately into `resize_seconds`.
//! The first frame initializes the model and is never scored.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::datasets::{self, SequenceItem, SequenceSpec};
use crate::error::{Error, Result};
use crate::evaluation::{compare_masks_with, ConfusionCounts, GroundTruthFrame, LabelPolicy};
use crate::gmm::{GmmModel, GmmParams};
use crate::imaging::{downsample, upsample_mask, BinaryMask, CompressionRatio, GrayFrame};
use crate::vibe::{VibeModel, VibeParams};

pub const CSV_HEADER: [&str; 17] = [
    "dataset",
    "method",
    "ratio",
    "frames_scored",
    "tp",
    "tn",
    "fp",
    "fn",
    "precision",
    "recall",
    "f_measure",
    "cpu_seconds",
    "resize_seconds",
    "relative_precision",
    "relative_recall",
    "relative_f",
    "relative_cpu",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Vibe(VibeParams),
    Gmm(GmmParams),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Vibe(_) => "vibe",
            Method::Gmm(_) => "gmm",
        }
    }

    pub fn init(&self, first_frame: &GrayFrame) -> Result<Segmenter> {
        Ok(match self {
            Method::Vibe(p) => Segmenter::Vibe(VibeModel::init(first_frame, *p)?),
            Method::Gmm(p) => Segmenter::Gmm(GmmModel::init(first_frame, *p)?),
        })
    }
}

/// A running background model of either kind.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Segmenter {
    Vibe(VibeModel),
    Gmm(GmmModel),
}

impl Segmenter {
    pub fn process(&mut self, frame: &GrayFrame) -> Result<BinaryMask> {
        match self {
            Segmenter::Vibe(m) => m.process(frame),
            Segmenter::Gmm(m) => m.process(frame),
        }
    }
}

/// A sequence decoded once and shared by every ratio.
#[derive(Debug, Clone)]
pub struct LoadedSequence {
    pub name: String,
    pub items: Vec<SequenceItem>,
}

impl LoadedSequence {
    pub fn load(spec: &SequenceSpec) -> Result<Self> {
        let (items, _) = datasets::load_all(spec)?;
        if items.is_empty() {
            return Err(Error::MissingSequence(spec.input_dir.clone()));
        }
        Ok(Self {
            name: spec.name.clone(),
            items,
        })
    }
}

/// Per-run knobs that do not depend on the ratio.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub timing_repeats: usize,
    pub honor_roi: bool,
    pub label_policy: LabelPolicy,
    /// Write upsampled masks here as `ratio_NN/maskNNNNNN.pgm`.
    pub dump_masks: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            timing_repeats: 1,
            honor_roi: true,
            label_policy: LabelPolicy::Lenient,
            dump_masks: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub sequence: SequenceSpec,
    pub method: Method,
    pub ratios: Vec<CompressionRatio>,
    pub options: RunOptions,
    /// Worker count for ratios. Ignored (treated as 1) when timings are
    /// reported, so timed runs never share the machine.
    pub parallelism: usize,
    pub report_timings: bool,
    pub output: Option<PathBuf>,
}

impl SweepConfig {
    pub fn new(sequence: SequenceSpec, method: Method) -> Self {
        Self {
            sequence,
            method,
            ratios: CompressionRatio::all().collect(),
            options: RunOptions::default(),
            parallelism: 1,
            report_timings: true,
            output: None,
        }
    }

    pub fn effective_parallelism(&self) -> usize {
        if self.report_timings {
            1
        } else {
            self.parallelism.max(1)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() {
            return Err(Error::InvalidSweep("no ratios given".into()));
        }
        let mut sorted = self.ratios.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.ratios.len() {
            return Err(Error::InvalidSweep("duplicate ratios".into()));
        }
        if self.options.timing_repeats == 0 {
            return Err(Error::InvalidSweep("timing_repeats must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRecord {
    pub dataset: String,
    pub method: String,
    pub ratio: CompressionRatio,
    pub frames_scored: u64,
    pub confusion: ConfusionCounts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_measure: Option<f64>,
    /// Mean over repeats of the summed segment+update time. `None` when the
    /// run was not timed.
    pub cpu_seconds: Option<f64>,
    pub resize_seconds: Option<f64>,
    pub relative_precision: Option<f64>,
    pub relative_recall: Option<f64>,
    pub relative_f: Option<f64>,
    pub relative_cpu: Option<f64>,
}

/// Totals of one pass over the sequence.
struct Pass {
    confusion: ConfusionCounts,
    frames_scored: u64,
    segment: Duration,
    resize: Duration,
}

fn run_pass(
    seq: &LoadedSequence,
    method: &Method,
    ratio: CompressionRatio,
    options: &RunOptions,
    sink: &mut dyn FnMut(u64, &BinaryMask) -> Result<()>,
) -> Result<Pass> {
    let mut items = seq.items.iter();
    let first = items.next().ok_or_else(|| Error::InvalidSweep("empty sequence".into()))?;
    let (src_w, src_h) = first.frame.dims();

    let mut resize = Duration::ZERO;
    let clock = Instant::now();
    let small = downsample(&first.frame, ratio);
    resize += clock.elapsed();
    let mut model = method.init(&small)?;

    let mut segment = Duration::ZERO;
    let mut confusion = ConfusionCounts::ZERO;
    let mut frames_scored = 0;
    for item in items {
        let clock = Instant::now();
        let small = downsample(&item.frame, ratio);
        resize += clock.elapsed();

        let clock = Instant::now();
        let mask = model.process(&small)?;
        segment += clock.elapsed();

        let clock = Instant::now();
        let mask = upsample_mask(&mask, src_w, src_h);
        resize += clock.elapsed();

        sink(item.index, &mask)?;

        let scored = !options.honor_roi || item.in_roi;
        if let (true, Some(truth)) = (scored, &item.truth) {
            let counts = compare_masks_with(&mask, truth, options.label_policy)?;
            confusion = confusion.accumulate(&counts)?;
            frames_scored += 1;
        }
    }
    Ok(Pass {
        confusion,
        frames_scored,
        segment,
        resize,
    })
}

/// Runs the pipeline at one ratio, handing every upsampled mask to `sink`
/// (first repeat only). Relative fields are left unset.
pub fn run_single_with(
    seq: &LoadedSequence,
    method: &Method,
    ratio: CompressionRatio,
    options: &RunOptions,
    timed: bool,
    sink: &mut dyn FnMut(u64, &BinaryMask) -> Result<()>,
) -> Result<RatioRecord> {
    let repeats = options.timing_repeats.max(1);
    let first = run_pass(seq, method, ratio, options, sink)?;
    let mut segment = first.segment;
    let mut resize = first.resize;
    if timed {
        for _ in 1..repeats {
            let pass = run_pass(seq, method, ratio, options, &mut |_, _| Ok(()))?;
            debug_assert_eq!(pass.confusion, first.confusion);
            segment += pass.segment;
            resize += pass.resize;
        }
    }
    let n = if timed { repeats as f64 } else { 1.0 };
    let metrics = first.confusion.metrics();
    Ok(RatioRecord {
        dataset: seq.name.clone(),
        method: method.name().to_string(),
        ratio,
        frames_scored: first.frames_scored,
        confusion: first.confusion,
        precision: metrics.precision,
        recall: metrics.recall,
        f_measure: metrics.f_measure,
        cpu_seconds: timed.then(|| segment.as_secs_f64() / n),
        resize_seconds: timed.then(|| resize.as_secs_f64() / n),
        relative_precision: None,
        relative_recall: None,
        relative_f: None,
        relative_cpu: None,
    })
}

/// Runs the pipeline at one ratio with timing.
pub fn run_single(
    seq: &LoadedSequence,
    method: &Method,
    ratio: CompressionRatio,
    options: &RunOptions,
) -> Result<RatioRecord> {
    let mut sink = mask_dumper(options.dump_masks.as_deref(), ratio)?;
    run_single_with(seq, method, ratio, options, true, &mut sink)
}

type MaskSink = Box<dyn FnMut(u64, &BinaryMask) -> Result<()>>;

fn mask_dumper(
    dir: Option<&Path>,
    ratio: CompressionRatio,
) -> Result<MaskSink> {
    let Some(dir) = dir else {
        return Ok(Box::new(|_, _| Ok(())));
    };
    let dir = dir.join(format!("ratio_{:02}", ratio.percent()));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(Box::new(move |index, mask| {
        datasets::write_pgm(&dir.join(format!("mask{index:06}.pgm")), &mask.to_gray())
    }))
}

/// Runs every ratio on an already-loaded sequence and fills relative fields.
pub fn run_sweep_loaded(config: &SweepConfig, seq: &LoadedSequence) -> Result<Vec<RatioRecord>> {
    config.validate()?;
    let mut ratios = config.ratios.clone();
    ratios.sort();

    let run = |ratio: CompressionRatio| {
        let mut sink = mask_dumper(config.options.dump_masks.as_deref(), ratio)?;
        run_single_with(seq, &config.method, ratio, &config.options, config.report_timings, &mut sink)
            .map_err(|e| Error::AtRatio {
                ratio: ratio.percent(),
                source: Box::new(e),
            })
    };

    let workers = config.effective_parallelism();
    let mut records = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidSweep(format!("thread pool: {e}")))?;
        pool.install(|| ratios.par_iter().map(|&r| run(r)).collect::<Result<Vec<_>>>())?
    } else {
        ratios.iter().map(|&r| run(r)).collect::<Result<Vec<_>>>()?
    };
    fill_relative(&mut records);
    Ok(records)
}

/// Loads the sequence, runs the sweep and writes the CSV if an output path
/// is configured.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<RatioRecord>> {
    config.validate()?;
    let seq = LoadedSequence::load(&config.sequence)?;
    let records = run_sweep_loaded(config, &seq)?;
    if let Some(out) = &config.output {
        emit_csv(&records, out)?;
    }
    Ok(records)
}

fn relative(value: Option<f64>, base: Option<f64>) -> Option<f64> {
    match (value, base) {
        (Some(v), Some(b)) if b != 0.0 => Some(v / b),
        _ => None,
    }
}

/// Normalizes every record by the ratio-0 record, if there is one.
pub fn fill_relative(records: &mut [RatioRecord]) {
    let Some(base) = records.iter().find(|r| r.ratio == CompressionRatio::NONE).cloned() else {
        return;
    };
    for r in records.iter_mut() {
        if r.ratio == CompressionRatio::NONE {
            let one = |v: Option<f64>| v.map(|_| 1.0);
            r.relative_precision = one(r.precision);
            r.relative_recall = one(r.recall);
            r.relative_f = one(r.f_measure);
            r.relative_cpu = one(r.cpu_seconds);
        } else {
            r.relative_precision = relative(r.precision, base.precision);
            r.relative_recall = relative(r.recall, base.recall);
            r.relative_f = relative(r.f_measure, base.f_measure);
            r.relative_cpu = relative(r.cpu_seconds, base.cpu_seconds);
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Writes one header line and one row per record, LF line endings.
pub fn write_csv<W: std::io::Write>(records: &[RatioRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let c = &r.confusion;
        w.write_record([
            r.dataset.clone(),
            r.method.clone(),
            r.ratio.percent().to_string(),
            r.frames_scored.to_string(),
            c.tp.to_string(),
            c.tn.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            fmt_opt(r.precision),
            fmt_opt(r.recall),
            fmt_opt(r.f_measure),
            fmt_opt(r.cpu_seconds),
            fmt_opt(r.resize_seconds),
            fmt_opt(r.relative_precision),
            fmt_opt(r.relative_recall),
            fmt_opt(r.relative_f),
            fmt_opt(r.relative_cpu),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn emit_csv(records: &[RatioRecord], output: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidSweep("no records to write".into()));
    }
    let file = fs::File::create(output).map_err(|e| Error::io(output, e))?;
    write_csv(records, std::io::BufWriter::new(file))
}

/// Parses `A..B`, `A..B:STEP` (inclusive) or a comma list `A,B,C`.
pub fn parse_ratios(text: &str) -> Result<Vec<CompressionRatio>> {
    let bad = |why: &str| Error::InvalidSweep(format!("ratios '{text}': {why}"));
    let num = |s: &str| s.trim().parse::<u32>().map_err(|_| bad("not a number"));
    let percents: Vec<u32> = if let Some((start, rest)) = text.split_once("..") {
        let (end, step) = match rest.split_once(':') {
            Some((end, step)) => (num(end)?, num(step)?),
            None => (num(rest)?, 1),
        };
        let start = num(start)?;
        if step == 0 {
            return Err(bad("step must be >= 1"));
        }
        if start > end {
            return Err(bad("start exceeds end"));
        }
        (start..=end).step_by(step as usize).collect()
    } else {
        text.split(',').map(num).collect::<Result<_>>()?
    };
    percents.into_iter().map(CompressionRatio::new).collect()
}

/// Per-frame scores of externally produced masks.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameScore {
    pub frame: u64,
    pub confusion: ConfusionCounts,
}

/// Scores every mask in `pred_dir` against the groundtruth in `gt_dir` with
/// the same numeric index (last digit run in the file stem). Predicted
/// values above 127 are foreground.
pub fn rescore(pred_dir: &Path, gt_dir: &Path, policy: LabelPolicy) -> Result<Vec<FrameScore>> {
    let preds = datasets::indexed_images(pred_dir)?;
    let truths = datasets::indexed_images(gt_dir)?;
    let mut truths = truths.into_iter().peekable();
    let mut scores = Vec::with_capacity(preds.len());
    for (index, pred_path) in preds {
        while truths.peek().is_some_and(|(i, _)| *i < index) {
            truths.next();
        }
        let gt_path = match truths.peek() {
            Some((i, p)) if *i == index => p.clone(),
            _ => return Err(Error::MissingGroundTruth { frame: pred_path }),
        };
        let pred = datasets::decode_gray(&pred_path)?;
        let pred = BinaryMask::new(
            pred.width(),
            pred.height(),
            pred.data().iter().map(|&v| v > 127).collect(),
        )?;
        let truth = GroundTruthFrame::from_labels(datasets::decode_gray(&gt_path)?);
        let confusion = compare_masks_with(&pred, &truth, policy).map_err(|e| match e {
            Error::MaskTruthMismatch { .. } => Error::FrameTruthMismatch {
                frame: pred_path.clone(),
                truth: gt_path.clone(),
                frame_width: pred.width(),
                frame_height: pred.height(),
                truth_width: truth.width(),
                truth_height: truth.height(),
            },
            other => other,
        })?;
        scores.push(FrameScore {
            frame: index,
            confusion,
        });
    }
    Ok(scores)
}

/// Per-frame rows followed by a `total` row over the summed counts.
pub fn write_score_csv<W: std::io::Write>(scores: &[FrameScore], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["frame", "tp", "tn", "fp", "fn", "precision", "recall", "f_measure"])?;
    let mut total = ConfusionCounts::ZERO;
    let row = |w: &mut csv::Writer<W>, name: String, c: &ConfusionCounts| -> Result<()> {
        w.write_record([
            name,
            c.tp.to_string(),
            c.tn.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            fmt_opt(c.precision()),
            fmt_opt(c.recall()),
            fmt_opt(c.f_measure()),
        ])?;
        Ok(())
    };
    for s in scores {
        row(&mut w, s.frame.to_string(), &s.confusion)?;
        total = total.accumulate(&s.confusion)?;
    }
    row(&mut w, "total".into(), &total)?;
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
