//! Frame/groundtruth sequences: change-detection and CMU directory layouts,
//! plus a deterministic synthetic moving-square generator.
//!
//! Change-detection layout:
//!
//! ```text
//! <seq>/input/in000001.jpg ...
//! <seq>/groundtruth/gt000001.png ...
//! <seq>/temporalROI.txt          "first last", 1-based inclusive
//! ```
//!
//! CMU layout: numerically ordered raw frames (TIF/PNG/...) and a parallel
//! directory of binary masks. The frame index is the last run of digits in
//! the file stem; optional prefixes select which files belong to the set.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::DynamicImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evaluation::{label, GroundTruthFrame};
use crate::imaging::{to_grayscale, GrayFrame};

const IMAGE_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png", "tif", "tiff", "pgm", "pnm", "ppm", "bmp"];

/// Scoring window, 1-based inclusive frame indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalRoi {
    pub first: u64,
    pub last: u64,
}

impl TemporalRoi {
    pub fn contains(&self, index: u64) -> bool {
        self.first <= index && index <= self.last
    }

    /// Parses two whitespace-separated integers.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut fields = text.split_whitespace();
        let mut next = |what: &str| -> std::result::Result<u64, String> {
            fields
                .next()
                .ok_or_else(|| format!("missing {what} frame"))?
                .parse::<u64>()
                .map_err(|e| format!("{what} frame: {e}"))
        };
        let first = next("first")?;
        let last = next("last")?;
        if first < 1 || first > last {
            return Err(format!("need 1 <= first <= last, got {first} {last}"));
        }
        Ok(Self { first, last })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|reason| Error::TemporalRoi {
            path: path.to_path_buf(),
            reason,
        })
    }
}

/// File selection for the CMU layout.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CmuPattern {
    pub frame_prefix: String,
    pub mask_prefix: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    ChangeDetection,
    Cmu(CmuPattern),
    Synthetic(SyntheticConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub name: String,
    pub input_dir: PathBuf,
    pub groundtruth_dir: Option<PathBuf>,
    pub layout: Layout,
    /// Overrides any `temporalROI.txt` found next to the input directory.
    pub temporal_roi: Option<TemporalRoi>,
}

impl SequenceSpec {
    pub fn change_detection(name: impl Into<String>, input: impl Into<PathBuf>, gt: Option<PathBuf>) -> Self {
        Self {
            name: name.into(),
            input_dir: input.into(),
            groundtruth_dir: gt,
            layout: Layout::ChangeDetection,
            temporal_roi: None,
        }
    }

    pub fn cmu(name: impl Into<String>, input: impl Into<PathBuf>, gt: Option<PathBuf>) -> Self {
        Self {
            layout: Layout::Cmu(CmuPattern::default()),
            ..Self::change_detection(name, input, gt)
        }
    }

    pub fn synthetic(name: impl Into<String>, config: SyntheticConfig) -> Self {
        Self {
            name: name.into(),
            input_dir: PathBuf::new(),
            groundtruth_dir: None,
            layout: Layout::Synthetic(config),
            temporal_roi: None,
        }
    }
}

/// One decoded frame of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceItem {
    /// 1-based position in the sequence.
    pub index: u64,
    pub frame: GrayFrame,
    pub truth: Option<GroundTruthFrame>,
    /// Inside the temporal ROI (always true when the sequence has none).
    pub in_roi: bool,
}

#[derive(Debug, Clone)]
struct FrameEntry {
    index: u64,
    frame: PathBuf,
    truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TruthEncoding {
    Labels,
    Binary,
}

/// Lazily decoding reader over a sequence directory, or a synthetic stream.
pub struct SequenceReader {
    name: String,
    roi: Option<TemporalRoi>,
    len: usize,
    source: Source,
    dims: Option<(usize, usize)>,
}

#[allow(clippy::large_enum_variant)]
enum Source {
    Files {
        entries: std::vec::IntoIter<FrameEntry>,
        encoding: TruthEncoding,
    },
    Synthetic(SyntheticSequence),
}

impl SequenceReader {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn temporal_roi(&self) -> Option<TemporalRoi> {
        self.roi
    }

    /// Number of frames in the sequence.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn decode_entry(&mut self, entry: FrameEntry, encoding: TruthEncoding) -> Result<SequenceItem> {
        let frame = decode_gray(&entry.frame)?;
        let (width, height) = frame.dims();
        match self.dims {
            None => self.dims = Some((width, height)),
            Some((ew, eh)) if (ew, eh) != (width, height) => {
                return Err(Error::FrameSizeChange {
                    path: entry.frame,
                    width,
                    height,
                    expected_width: ew,
                    expected_height: eh,
                })
            }
            Some(_) => {}
        }
        let truth = match entry.truth {
            None => None,
            Some(path) => {
                let gt = decode_luma(&path)?;
                if gt.dims() != frame.dims() {
                    return Err(Error::FrameTruthMismatch {
                        frame: entry.frame,
                        truth: path,
                        frame_width: width,
                        frame_height: height,
                        truth_width: gt.width(),
                        truth_height: gt.height(),
                    });
                }
                Some(match encoding {
                    TruthEncoding::Labels => GroundTruthFrame::from_labels(gt),
                    TruthEncoding::Binary => GroundTruthFrame::from_binary(gt),
                })
            }
        };
        Ok(SequenceItem {
            index: entry.index,
            frame,
            truth,
            in_roi: self.roi.is_none_or(|r| r.contains(entry.index)),
        })
    }
}

impl Iterator for SequenceReader {
    type Item = Result<SequenceItem>;

    fn next(&mut self) -> Option<Self::Item> {
        match &mut self.source {
            Source::Files { entries, encoding } => {
                let encoding = *encoding;
                let entry = entries.next()?;
                Some(self.decode_entry(entry, encoding))
            }
            Source::Synthetic(gen) => {
                let roi = self.roi;
                let (index, frame, truth) = gen.next_indexed()?;
                Some(Ok(SequenceItem {
                    index,
                    frame,
                    truth: Some(truth),
                    in_roi: roi.is_none_or(|r| r.contains(index)),
                }))
            }
        }
    }
}

/// Opens a sequence; frames are decoded in index order while iterating.
pub fn load_sequence(spec: &SequenceSpec) -> Result<SequenceReader> {
    let (source, len, file_roi) = match &spec.layout {
        Layout::Synthetic(config) => {
            let gen = generate_synthetic(config)?;
            (Source::Synthetic(gen), config.frames, None)
        }
        Layout::ChangeDetection => {
            let frames = numbered_files(&spec.input_dir, |stem| stem.strip_prefix("in").and_then(parse_digits))?;
            let truths = match &spec.groundtruth_dir {
                Some(dir) => Some(numbered_files(dir, |stem| stem.strip_prefix("gt").and_then(parse_digits))?),
                None => None,
            };
            let entries = pair_entries(frames, truths, true)?;
            let roi = find_roi_file(&spec.input_dir).map(|p| TemporalRoi::read(&p)).transpose()?;
            let len = entries.len();
            let source = Source::Files {
                entries: entries.into_iter(),
                encoding: TruthEncoding::Labels,
            };
            (source, len, roi)
        }
        Layout::Cmu(pattern) => {
            let frames = numbered_files(&spec.input_dir, |stem| {
                stem.strip_prefix(pattern.frame_prefix.as_str()).and_then(last_digits)
            })?;
            let truths = match &spec.groundtruth_dir {
                Some(dir) => Some(numbered_files(dir, |stem| {
                    stem.strip_prefix(pattern.mask_prefix.as_str()).and_then(last_digits)
                })?),
                None => None,
            };
            let entries = pair_entries(frames, truths, false)?;
            let len = entries.len();
            let source = Source::Files {
                entries: entries.into_iter(),
                encoding: TruthEncoding::Binary,
            };
            (source, len, None)
        }
    };

    let roi = spec.temporal_roi.or(file_roi);
    if let Some(r) = roi {
        if r.first < 1 || r.first > r.last || r.last > len as u64 {
            return Err(Error::TemporalRoi {
                path: spec.input_dir.clone(),
                reason: format!("{} {} does not fit {len} frames", r.first, r.last),
            });
        }
    }
    Ok(SequenceReader {
        name: spec.name.clone(),
        roi,
        len,
        source,
        dims: None,
    })
}

/// Decodes the whole sequence into memory.
pub fn load_all(spec: &SequenceSpec) -> Result<(Vec<SequenceItem>, Option<TemporalRoi>)> {
    let reader = load_sequence(spec)?;
    let roi = reader.temporal_roi();
    let items = reader.collect::<Result<Vec<_>>>()?;
    Ok((items, roi))
}

fn find_roi_file(input_dir: &Path) -> Option<PathBuf> {
    let beside = input_dir.join("temporalROI.txt");
    if beside.is_file() {
        return Some(beside);
    }
    let parent = input_dir.parent()?.join("temporalROI.txt");
    parent.is_file().then_some(parent)
}

fn parse_digits(s: &str) -> Option<u64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn last_digits(stem: &str) -> Option<u64> {
    let end = stem.rfind(|c: char| c.is_ascii_digit())? + 1;
    let start = stem[..end]
        .rfind(|c: char| !c.is_ascii_digit())
        .map_or(0, |i| i + 1);
    stem[start..end].parse().ok()
}

/// Image files in `dir` keyed by the last digit run of their stem.
pub fn indexed_images(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    numbered_files(dir, last_digits)
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files in `dir` whose stem yields an index, sorted by index.
fn numbered_files(dir: &Path, index_of: impl Fn(&str) -> Option<u64>) -> Result<Vec<(u64, PathBuf)>> {
    if !dir.is_dir() {
        return Err(Error::MissingSequence(dir.to_path_buf()));
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() || !has_image_extension(&path) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if let Some(index) = index_of(stem) {
            files.push((index, path));
        }
    }
    if files.is_empty() {
        return Err(Error::MissingSequence(dir.to_path_buf()));
    }
    files.sort();
    Ok(files)
}

/// Checks contiguous numbering and attaches groundtruth by index.
fn pair_entries(
    frames: Vec<(u64, PathBuf)>,
    truths: Option<Vec<(u64, PathBuf)>>,
    one_based: bool,
) -> Result<Vec<FrameEntry>> {
    let start = if one_based { 1 } else { frames[0].0 };
    for (offset, (index, path)) in frames.iter().enumerate() {
        let expected = start + offset as u64;
        if *index != expected {
            return Err(Error::NumberingGap {
                expected,
                found: path.clone(),
            });
        }
    }
    let mut truths = truths.map(|t| t.into_iter().peekable());
    let mut entries = Vec::with_capacity(frames.len());
    for (position, (index, frame)) in frames.into_iter().enumerate() {
        let truth = match truths.as_mut() {
            None => None,
            Some(iter) => {
                while iter.peek().is_some_and(|(i, _)| *i < index) {
                    iter.next();
                }
                match iter.peek() {
                    Some((i, _)) if *i == index => iter.next().map(|(_, p)| p),
                    _ => return Err(Error::MissingGroundTruth { frame }),
                }
            }
        };
        entries.push(FrameEntry {
            index: position as u64 + 1,
            frame,
            truth,
        });
    }
    Ok(entries)
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|source| Error::Decode {
            path: path.to_path_buf(),
            source,
        })
}

/// Decodes an image to grayscale; color images go through BT.601 luma.
pub fn decode_gray(path: &Path) -> Result<GrayFrame> {
    let img = open_image(path)?;
    if img.color().has_color() {
        let rgb = img.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        to_grayscale(w, h, rgb.as_raw())
    } else {
        luma_frame(img)
    }
}

/// Decodes an image as raw 8-bit values without color weighting.
fn decode_luma(path: &Path) -> Result<GrayFrame> {
    luma_frame(open_image(path)?)
}

fn luma_frame(img: DynamicImage) -> Result<GrayFrame> {
    let luma = img.into_luma8();
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    GrayFrame::new(w, h, luma.into_raw())
}

/// Writes a binary (P5) PGM.
pub fn write_pgm(path: &Path, frame: &GrayFrame) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    buf.extend_from_slice(frame.data());
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub background_level: u8,
    pub square_size: usize,
    pub square_level: u8,
    /// Pixels per frame; the square wraps around the frame edges.
    pub velocity: (i64, i64),
    /// Uniform noise in `[-noise_amplitude, +noise_amplitude]`.
    pub noise_amplitude: u8,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            frames: 100,
            background_level: 60,
            square_size: 16,
            square_level: 160,
            velocity: (2, 1),
            noise_amplitude: 5,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(format!("synthetic: {msg}")));
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return fail("width, height and frames must be >= 1".into());
        }
        if self.square_size == 0 || self.square_size > self.width.min(self.height) {
            return fail(format!(
                "square_size {} must lie in 1..={}",
                self.square_size,
                self.width.min(self.height)
            ));
        }
        let contrast = (i32::from(self.square_level) - i32::from(self.background_level)).abs();
        if contrast <= 2 * i32::from(self.noise_amplitude) {
            return fail(format!(
                "contrast {contrast} must exceed twice the noise amplitude {}",
                self.noise_amplitude
            ));
        }
        Ok(())
    }

    /// Top-left corner of the square in frame `t` (0-based).
    pub fn square_origin(&self, t: usize) -> (usize, usize) {
        let x = (t as i64 * self.velocity.0).rem_euclid(self.width as i64);
        let y = (t as i64 * self.velocity.1).rem_euclid(self.height as i64);
        (x as usize, y as usize)
    }
}

/// Deterministic stream of noisy frames with a moving square.
#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    config: SyntheticConfig,
    rng: ChaCha8Rng,
    t: usize,
}

impl SyntheticSequence {
    fn next_indexed(&mut self) -> Option<(u64, GrayFrame, GroundTruthFrame)> {
        let (frame, truth) = self.next()?;
        Some((self.t as u64, frame, truth))
    }
}

impl Iterator for SyntheticSequence {
    type Item = (GrayFrame, GroundTruthFrame);

    fn next(&mut self) -> Option<Self::Item> {
        let c = &self.config;
        if self.t >= c.frames {
            return None;
        }
        let (ox, oy) = c.square_origin(self.t);
        let inside = |x: usize, y: usize| {
            (x + c.width - ox) % c.width < c.square_size && (y + c.height - oy) % c.height < c.square_size
        };
        let amp = i32::from(c.noise_amplitude);
        let mut pixels = Vec::with_capacity(c.width * c.height);
        let mut labels = Vec::with_capacity(c.width * c.height);
        for y in 0..c.height {
            for x in 0..c.width {
                let fg = inside(x, y);
                let level = if fg { c.square_level } else { c.background_level };
                let noise = if amp > 0 { self.rng.gen_range(-amp..=amp) } else { 0 };
                pixels.push((i32::from(level) + noise).clamp(0, 255) as u8);
                labels.push(if fg { label::FOREGROUND } else { label::BACKGROUND });
            }
        }
        self.t += 1;
        Some((
            GrayFrame::new(c.width, c.height, pixels).expect("validated dims"),
            GroundTruthFrame::new(c.width, c.height, labels).expect("validated dims"),
        ))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.config.frames - self.t;
        (left, Some(left))
    }
}

impl ExactSizeIterator for SyntheticSequence {}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticSequence> {
    config.validate()?;
    Ok(SyntheticSequence {
        config: *config,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        t: 0,
    })
}

/// Writes a synthetic sequence in change-detection layout with PGM files:
/// `out/input/inNNNNNN.pgm` and `out/groundtruth/gtNNNNNN.pgm`.
pub fn export_synthetic(config: &SyntheticConfig, out: &Path) -> Result<()> {
    let input = out.join("input");
    let gt = out.join("groundtruth");
    for dir in [&input, &gt] {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    for (i, (frame, truth)) in generate_synthetic(config)?.enumerate() {
        let n = i + 1;
        write_pgm(&input.join(format!("in{n:06}.pgm")), &frame)?;
        let labels = GrayFrame::new(truth.width(), truth.height(), truth.labels().to_vec())?;
        write_pgm(&gt.join(format!("gt{n:06}.pgm")), &labels)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(frames: usize, noise: u8, velocity: (i64, i64)) -> SyntheticConfig {
        SyntheticConfig {
            width: 20,
            height: 12,
            frames,
            background_level: 40,
            square_size: 4,
            square_level: 200,
            velocity,
            noise_amplitude: noise,
            seed: 17,
        }
    }

    #[test]
    fn roi_parsing() {
        assert_eq!(TemporalRoi::parse("470 1700\n").unwrap(), TemporalRoi { first: 470, last: 1700 });
        assert!(TemporalRoi::parse("5").is_err());
        assert!(TemporalRoi::parse("0 3").is_err());
        assert!(TemporalRoi::parse("9 3").is_err());
        assert!(TemporalRoi::parse("a b").is_err());
    }

    #[test]
    fn digit_helpers() {
        assert_eq!(parse_digits("000470"), Some(470));
        assert_eq!(parse_digits("12a"), None);
        assert_eq!(parse_digits(""), None);
        assert_eq!(last_digits("frame_0012"), Some(12));
        assert_eq!(last_digits("seq2_mask031b"), Some(31));
        assert_eq!(last_digits("mask"), None);
    }

    #[test]
    fn synthetic_single_frame_noiseless() {
        let frames: Vec<_> = generate_synthetic(&small(1, 0, (3, 1))).unwrap().collect();
        assert_eq!(frames.len(), 1);
        let (frame, truth) = &frames[0];
        for y in 0..12 {
            for x in 0..20 {
                let fg = x < 4 && y < 4;
                assert_eq!(frame.get(x, y), if fg { 200 } else { 40 });
                assert_eq!(truth.labels()[y * 20 + x], if fg { 255 } else { 0 });
            }
        }
    }

    #[test]
    fn synthetic_static_square() {
        let frames: Vec<_> = generate_synthetic(&small(6, 3, (0, 0))).unwrap().collect();
        assert!(frames.windows(2).all(|w| w[0].1 == w[1].1));
    }

    #[test]
    fn synthetic_wraps_and_keeps_area() {
        let config = small(40, 5, (3, -2));
        for (t, (frame, truth)) in generate_synthetic(&config).unwrap().enumerate() {
            assert_eq!(truth.foreground_count(), 16, "frame {t}");
            let (ox, oy) = config.square_origin(t);
            assert_eq!(truth.labels()[oy * 20 + ox], 255);
            assert!(frame.data().iter().zip(truth.labels()).all(|(&v, &l)| {
                let level = if l == 255 { 200 } else { 40 };
                (i32::from(v) - level).abs() <= 5
            }));
        }
    }

    #[test]
    fn synthetic_deterministic() {
        let a: Vec<_> = generate_synthetic(&small(5, 5, (1, 1))).unwrap().collect();
        let b: Vec<_> = generate_synthetic(&small(5, 5, (1, 1))).unwrap().collect();
        assert_eq!(a, b);
    }

    #[test]
    fn synthetic_validation() {
        let mut c = small(3, 90, (1, 1));
        assert!(generate_synthetic(&c).is_err());
        c.noise_amplitude = 5;
        c.square_size = 13;
        assert!(generate_synthetic(&c).is_err());
        c.square_size = 0;
        assert!(generate_synthetic(&c).is_err());
    }
}
