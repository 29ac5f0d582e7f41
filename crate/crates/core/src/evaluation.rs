//! Mask scoring with change-detection groundtruth labels.

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, GrayFrame};

/// Groundtruth label values.
pub mod label {
    pub const BACKGROUND: u8 = 0;
    pub const SHADOW: u8 = 50;
    pub const OUTSIDE_ROI: u8 = 85;
    pub const UNKNOWN: u8 = 170;
    pub const FOREGROUND: u8 = 255;

    pub const ALL: [u8; 5] = [BACKGROUND, SHADOW, OUTSIDE_ROI, UNKNOWN, FOREGROUND];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Truth {
    Foreground,
    Background,
    Excluded,
}

fn classify(value: u8) -> Option<Truth> {
    match value {
        label::FOREGROUND => Some(Truth::Foreground),
        label::BACKGROUND | label::SHADOW => Some(Truth::Background),
        label::OUTSIDE_ROI | label::UNKNOWN => Some(Truth::Excluded),
        _ => None,
    }
}

/// Closest valid label; ties go to the smaller one.
pub fn nearest_label(value: u8) -> u8 {
    label::ALL
        .into_iter()
        .min_by_key(|&l| (l as i16 - value as i16).abs())
        .unwrap()
}

/// How to treat label values outside {0, 50, 85, 170, 255}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelPolicy {
    /// Reject the frame.
    Strict,
    /// Snap to the nearest valid label.
    #[default]
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundTruthFrame {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl GroundTruthFrame {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        // Reuse the frame dimension checks.
        let frame = GrayFrame::new(width, height, labels)?;
        Ok(Self::from_labels(frame))
    }

    pub fn from_labels(frame: GrayFrame) -> Self {
        Self {
            width: frame.width(),
            height: frame.height(),
            labels: frame.into_data(),
        }
    }

    /// Two-valued masks (e.g. hand-segmented binary images): values above
    /// 127 become foreground, everything else background.
    pub fn from_binary(frame: GrayFrame) -> Self {
        let (width, height) = frame.dims();
        let labels = frame
            .into_data()
            .into_iter()
            .map(|v| if v > 127 { label::FOREGROUND } else { label::BACKGROUND })
            .collect();
        Self {
            width,
            height,
            labels,
        }
    }

    /// Foreground where the mask is set, background elsewhere.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self::from_binary(mask.to_gray())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == label::FOREGROUND).count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub const ZERO: ConfusionCounts = ConfusionCounts {
        tp: 0,
        tn: 0,
        fp: 0,
        fn_: 0,
    };

    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Componentwise sum, failing on overflow.
    pub fn accumulate(&self, other: &ConfusionCounts) -> Result<ConfusionCounts> {
        let add = |a: u64, b: u64| a.checked_add(b).ok_or(Error::CounterOverflow);
        Ok(ConfusionCounts {
            tp: add(self.tp, other.tp)?,
            tn: add(self.tn, other.tn)?,
            fp: add(self.fp, other.fp)?,
            fn_: add(self.fn_, other.fn_)?,
        })
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f_measure(&self) -> Option<f64> {
        f_measure(self.precision()?, self.recall()?)
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            precision: self.precision(),
            recall: self.recall(),
            f_measure: self.f_measure(),
        }
    }
}

/// Precision, recall and F-measure; `None` marks an undefined value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_measure: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Harmonic mean of precision and recall, undefined when both are zero.
pub fn f_measure(precision: f64, recall: f64) -> Option<f64> {
    let sum = precision + recall;
    (sum > 0.0).then(|| 2.0 * precision * recall / sum)
}

pub fn precision(c: &ConfusionCounts) -> Option<f64> {
    c.precision()
}

pub fn recall(c: &ConfusionCounts) -> Option<f64> {
    c.recall()
}

pub fn accumulate(a: &ConfusionCounts, b: &ConfusionCounts) -> Result<ConfusionCounts> {
    a.accumulate(b)
}

/// Confusion counts of `predicted` against `truth` with lenient labels.
pub fn compare_masks(predicted: &BinaryMask, truth: &GroundTruthFrame) -> Result<ConfusionCounts> {
    compare_masks_with(predicted, truth, LabelPolicy::Lenient)
}

pub fn compare_masks_with(
    predicted: &BinaryMask,
    truth: &GroundTruthFrame,
    policy: LabelPolicy,
) -> Result<ConfusionCounts> {
    if predicted.dims() != truth.dims() {
        return Err(Error::MaskTruthMismatch {
            mask_width: predicted.width(),
            mask_height: predicted.height(),
            truth_width: truth.width,
            truth_height: truth.height,
        });
    }
    let mut counts = ConfusionCounts::ZERO;
    for (i, (&pred, &value)) in predicted.data().iter().zip(&truth.labels).enumerate() {
        let class = match (classify(value), policy) {
            (Some(class), _) => class,
            (None, LabelPolicy::Lenient) => classify(nearest_label(value)).unwrap(),
            (None, LabelPolicy::Strict) => {
                return Err(Error::MalformedGroundTruth {
                    label: value,
                    x: i % truth.width,
                    y: i / truth.width,
                })
            }
        };
        match (class, pred) {
            (Truth::Excluded, _) => {}
            (Truth::Foreground, true) => counts.tp += 1,
            (Truth::Foreground, false) => counts.fn_ += 1,
            (Truth::Background, true) => counts.fp += 1,
            (Truth::Background, false) => counts.tn += 1,
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Option<f64>, b: f64) -> bool {
        a.is_some_and(|a| (a - b).abs() < 1e-12)
    }

    #[test]
    fn perfect_prediction() {
        let labels = vec![0, 255, 255, 0, 0, 255];
        let truth = GroundTruthFrame::new(3, 2, labels.clone()).unwrap();
        let pred = BinaryMask::new(3, 2, labels.iter().map(|&l| l == 255).collect()).unwrap();
        let c = compare_masks(&pred, &truth).unwrap();
        assert_eq!((c.fp, c.fn_, c.tp, c.tn), (0, 0, 3, 3));
    }

    #[test]
    fn fully_excluded() {
        let truth = GroundTruthFrame::new(4, 4, vec![85; 16]).unwrap();
        let pred = BinaryMask::filled(4, 4, true).unwrap();
        assert_eq!(compare_masks(&pred, &truth).unwrap(), ConfusionCounts::ZERO);
    }

    #[test]
    fn four_pixel_example() {
        let truth = GroundTruthFrame::new(2, 2, vec![255, 0, 170, 50]).unwrap();
        let pred = BinaryMask::new(2, 2, vec![true, true, true, false]).unwrap();
        let c = compare_masks(&pred, &truth).unwrap();
        assert_eq!(c, ConfusionCounts::new(1, 1, 1, 0));
    }

    #[test]
    fn mismatch_and_strict_labels() {
        let truth = GroundTruthFrame::new(2, 2, vec![255, 0, 7, 0]).unwrap();
        let pred = BinaryMask::filled(2, 1, false).unwrap();
        assert!(matches!(
            compare_masks(&pred, &truth),
            Err(Error::MaskTruthMismatch { .. })
        ));
        let pred = BinaryMask::filled(2, 2, false).unwrap();
        assert!(matches!(
            compare_masks_with(&pred, &truth, LabelPolicy::Strict),
            Err(Error::MalformedGroundTruth { label: 7, x: 0, y: 1 })
        ));
        // 7 snaps to background in lenient mode
        let c = compare_masks(&pred, &truth).unwrap();
        assert_eq!(c, ConfusionCounts::new(0, 3, 0, 1));
    }

    #[test]
    fn nearest_label_mapping() {
        assert_eq!(nearest_label(10), 0);
        assert_eq!(nearest_label(25), 0);
        assert_eq!(nearest_label(26), 50);
        assert_eq!(nearest_label(100), 85);
        assert_eq!(nearest_label(200), 170);
        assert_eq!(nearest_label(213), 255);
        for l in label::ALL {
            assert_eq!(nearest_label(l), l);
        }
    }

    #[test]
    fn metric_examples() {
        assert!(close(ConfusionCounts::new(8, 0, 2, 0).precision(), 0.8));
        assert_eq!(ConfusionCounts::ZERO.precision(), None);
        assert!(close(ConfusionCounts::new(1, 0, 3, 0).precision(), 0.25));

        assert!(close(ConfusionCounts::new(8, 0, 0, 2).recall(), 0.8));
        assert_eq!(ConfusionCounts::ZERO.recall(), None);
        assert!(close(ConfusionCounts::new(3, 0, 0, 1).recall(), 0.75));

        assert!(close(f_measure(0.8, 0.8), 0.8));
        assert!(close(f_measure(0.5, 1.0), 2.0 / 3.0));
        assert_eq!(ConfusionCounts::new(0, 5, 2, 3).f_measure(), None);
        // P = R = 0.8
        assert!(close(ConfusionCounts::new(8, 0, 2, 2).f_measure(), 0.8));
    }

    #[test]
    fn accumulate_examples() {
        let a = ConfusionCounts::new(1, 2, 3, 4);
        assert_eq!(a.accumulate(&ConfusionCounts::ZERO).unwrap(), a);
        let b = ConfusionCounts::new(4, 3, 2, 1);
        assert_eq!(accumulate(&a, &b).unwrap(), ConfusionCounts::new(5, 5, 5, 5));
        let big = ConfusionCounts::new(u64::MAX, 0, 0, 0);
        assert!(matches!(big.accumulate(&a), Err(Error::CounterOverflow)));
    }

    #[test]
    fn accumulate_equals_concatenation() {
        // Three toy frames scored one by one, then as one tall frame.
        let truths = [
            vec![0, 255, 50, 170, 255, 0],
            vec![255, 255, 85, 0, 0, 50],
            vec![0, 0, 0, 255, 170, 255],
        ];
        let preds = [
            vec![false, true, true, true, false, false],
            vec![true, false, true, true, false, false],
            vec![false, true, false, true, true, true],
        ];
        let mut summed = ConfusionCounts::ZERO;
        for (t, p) in truths.iter().zip(&preds) {
            let c = compare_masks(
                &BinaryMask::new(3, 2, p.clone()).unwrap(),
                &GroundTruthFrame::new(3, 2, t.clone()).unwrap(),
            )
            .unwrap();
            summed = summed.accumulate(&c).unwrap();
        }
        let tall = compare_masks(
            &BinaryMask::new(3, 6, preds.concat()).unwrap(),
            &GroundTruthFrame::new(3, 6, truths.concat()).unwrap(),
        )
        .unwrap();
        assert_eq!(summed, tall);
        assert_eq!(tall, ConfusionCounts::new(4, 6, 3, 2));
    }

    fn arb_counts() -> impl Strategy<Value = ConfusionCounts> {
        (0u64..1 << 40, 0u64..1 << 40, 0u64..1 << 40, 0u64..1 << 40)
            .prop_map(|(a, b, c, d)| ConfusionCounts::new(a, b, c, d))
    }

    proptest! {
        #[test]
        fn metrics_in_unit_interval(c in arb_counts()) {
            for m in [c.precision(), c.recall(), c.f_measure()].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&m));
            }
        }

        #[test]
        fn accumulate_monoid(a in arb_counts(), b in arb_counts(), c in arb_counts()) {
            let ab_c = a.accumulate(&b).unwrap().accumulate(&c).unwrap();
            let a_bc = a.accumulate(&b.accumulate(&c).unwrap()).unwrap();
            prop_assert_eq!(ab_c, a_bc);
            prop_assert_eq!(a.accumulate(&b).unwrap(), b.accumulate(&a).unwrap());
            prop_assert_eq!(a.accumulate(&ConfusionCounts::ZERO).unwrap(), a);
        }
    }
}
