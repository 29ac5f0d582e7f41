//! Stauffer-Grimson adaptive Gaussian mixture background model.
//!
//! Each pixel carries `components` weighted Gaussians over intensity.
//! Components are ranked by `weight / sigma`; the highest-ranked prefix whose
//! cumulative weight exceeds `background_fraction` models the background.
//! Only the first matching component (in rank order) is updated, with rate
//! `rho = alpha / max(weight, alpha)`. The classification of a frame uses the
//! ranking the model had before that frame's update.

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, GrayFrame};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmParams {
    pub components: usize,
    pub learning_rate: f64,
    /// In standard deviations.
    pub match_threshold: f64,
    pub background_fraction: f64,
    pub initial_variance: f64,
    pub min_variance: f64,
    pub initial_weight: f64,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self {
            components: 5,
            learning_rate: 0.005,
            match_threshold: 2.5,
            background_fraction: 0.9,
            initial_variance: 225.0,
            min_variance: 4.0,
            initial_weight: 0.05,
        }
    }
}

impl GmmParams {
    // Negated comparisons so NaN fails every check.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidParams(format!("gmm: {msg}")));
        if self.components < 1 {
            return fail("components must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return fail("learning_rate must lie in (0, 1)");
        }
        if !(self.background_fraction > 0.0 && self.background_fraction < 1.0) {
            return fail("background_fraction must lie in (0, 1)");
        }
        if !(self.min_variance > 0.0) {
            return fail("min_variance must be positive");
        }
        if !(self.initial_variance >= self.min_variance) {
            return fail("initial_variance must be >= min_variance");
        }
        if !(self.match_threshold > 0.0) {
            return fail("match_threshold must be positive");
        }
        if !(self.initial_weight > 0.0) {
            return fail("initial_weight must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl Component {
    #[inline]
    fn fitness(&self) -> f64 {
        self.weight / self.variance.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    width: usize,
    height: usize,
    // `components` consecutive entries per pixel.
    mixtures: Vec<Component>,
    params: GmmParams,
}

impl GmmModel {
    pub fn init(first_frame: &GrayFrame, params: GmmParams) -> Result<Self> {
        params.validate()?;
        let k = params.components;
        let idle = Component {
            weight: 0.0,
            mean: 0.0,
            variance: params.initial_variance,
        };
        let mut mixtures = Vec::with_capacity(first_frame.data().len() * k);
        for &v in first_frame.data() {
            mixtures.push(Component {
                weight: 1.0,
                mean: f64::from(v),
                variance: params.initial_variance,
            });
            mixtures.extend(std::iter::repeat_n(idle, k - 1));
        }
        Ok(Self {
            width: first_frame.width(),
            height: first_frame.height(),
            mixtures,
            params,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn params(&self) -> &GmmParams {
        &self.params
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[Component] {
        let k = self.params.components;
        let start = (y * self.width + x) * k;
        &self.mixtures[start..start + k]
    }

    /// Classifies every pixel of `frame` and folds it into the mixtures.
    pub fn process(&mut self, frame: &GrayFrame) -> Result<BinaryMask> {
        if frame.dims() != self.dims() {
            return Err(Error::Incompatible {
                model_width: self.width,
                model_height: self.height,
                frame_width: frame.width(),
                frame_height: frame.height(),
            });
        }
        let k = self.params.components;
        let params = self.params;
        let mut order = vec![0usize; k];
        let mask = frame
            .data()
            .iter()
            .zip(self.mixtures.chunks_exact_mut(k))
            .map(|(&v, mixture)| update_pixel(mixture, f64::from(v), &params, &mut order))
            .collect();
        BinaryMask::new(self.width, self.height, mask)
    }
}

/// Returns `true` when the pixel is foreground.
fn update_pixel(
    mixture: &mut [Component],
    x: f64,
    params: &GmmParams,
    order: &mut [usize],
) -> bool {
    let alpha = params.learning_rate;

    // Rank by fitness, ties keep storage order.
    for (i, slot) in order.iter_mut().enumerate() {
        *slot = i;
    }
    order.sort_by(|&a, &b| mixture[b].fitness().total_cmp(&mixture[a].fitness()));

    let mut background_len = order.len();
    let mut cumulative = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        cumulative += mixture[i].weight;
        if cumulative > params.background_fraction {
            background_len = rank + 1;
            break;
        }
    }

    let matched = order.iter().position(|&i| {
        let c = &mixture[i];
        (x - c.mean).abs() <= params.match_threshold * c.variance.sqrt()
    });

    match matched {
        Some(rank) => {
            let hit = order[rank];
            for (i, c) in mixture.iter_mut().enumerate() {
                let indicator = if i == hit { alpha } else { 0.0 };
                c.weight = (1.0 - alpha) * c.weight + indicator;
            }
            let c = &mut mixture[hit];
            let rho = alpha / c.weight.max(alpha);
            c.mean = (1.0 - rho) * c.mean + rho * x;
            let d = x - c.mean;
            c.variance = ((1.0 - rho) * c.variance + rho * d * d).max(params.min_variance);
        }
        None => {
            let weakest = order[order.len() - 1];
            mixture[weakest] = Component {
                weight: params.initial_weight,
                mean: x,
                variance: params.initial_variance,
            };
        }
    }

    let total: f64 = mixture.iter().map(|c| c.weight).sum();
    for c in mixture.iter_mut() {
        c.weight /= total;
    }

    match matched {
        Some(rank) => rank >= background_len,
        None => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_simplex(model: &GmmModel) {
        let (w, h) = model.dims();
        for y in 0..h {
            for x in 0..w {
                let px = model.pixel(x, y);
                assert!(px.iter().all(|c| c.weight >= 0.0));
                let sum: f64 = px.iter().map(|c| c.weight).sum();
                assert!((sum - 1.0).abs() <= 1e-6, "weights sum to {sum}");
            }
        }
    }

    #[test]
    fn validation() {
        let f = GrayFrame::filled(1, 1, 0).unwrap();
        for bad in [
            GmmParams { components: 0, ..Default::default() },
            GmmParams { learning_rate: 0.0, ..Default::default() },
            GmmParams { learning_rate: 1.0, ..Default::default() },
            GmmParams { background_fraction: 1.0, ..Default::default() },
            GmmParams { min_variance: 0.0, ..Default::default() },
            GmmParams { initial_variance: 1.0, min_variance: 2.0, ..Default::default() },
        ] {
            assert!(GmmModel::init(&f, bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn init_layout() {
        let f = GrayFrame::filled(3, 2, 50).unwrap();
        let m = GmmModel::init(&f, GmmParams::default()).unwrap();
        for y in 0..2 {
            for x in 0..3 {
                let px = m.pixel(x, y);
                assert_eq!(px.len(), 5);
                assert_eq!(px[0], Component { weight: 1.0, mean: 50.0, variance: 225.0 });
                for c in &px[1..] {
                    assert_eq!(*c, Component { weight: 0.0, mean: 0.0, variance: 225.0 });
                }
            }
        }
        assert_simplex(&m);

        let m = GmmModel::init(&GrayFrame::new(1, 1, vec![0]).unwrap(), GmmParams::default()).unwrap();
        assert_eq!(m.pixel(0, 0)[0].mean, 0.0);
    }

    #[test]
    fn steady_input_is_background() {
        let f = GrayFrame::filled(4, 4, 100).unwrap();
        let mut m = GmmModel::init(&f, GmmParams::default()).unwrap();
        let mask = m.process(&f).unwrap();
        assert_eq!(mask.foreground_count(), 0);
        assert_eq!(m.pixel(0, 0)[0].weight, 1.0);
        assert_simplex(&m);
    }

    #[test]
    fn large_jump_replaces_weakest() {
        let f = GrayFrame::filled(2, 2, 100).unwrap();
        let mut m = GmmModel::init(&f, GmmParams::default()).unwrap();
        let mask = m.process(&GrayFrame::filled(2, 2, 200).unwrap()).unwrap();
        assert_eq!(mask.foreground_count(), 4);
        // Hand simulation: ranking is [0, 1, 2, 3, 4] (ties keep order), no
        // component lies within 37.5 of 200, so index 4 becomes
        // (0.05, 200, 225) and weights renormalize by 1.05.
        let px = m.pixel(1, 1);
        assert!((px[0].weight - 1.0 / 1.05).abs() < 1e-12);
        assert_eq!(px[0].mean, 100.0);
        assert!((px[4].weight - 0.05 / 1.05).abs() < 1e-12);
        assert_eq!(px[4].mean, 200.0);
        assert_eq!(px[4].variance, 225.0);
        assert_simplex(&m);
    }

    #[test]
    fn matched_update_by_hand() {
        let f = GrayFrame::filled(1, 1, 100).unwrap();
        let mut m = GmmModel::init(&f, GmmParams::default()).unwrap();
        m.process(&GrayFrame::filled(1, 1, 110).unwrap()).unwrap();
        let c = m.pixel(0, 0)[0];
        // weight stays 1, rho = 0.005
        let mean = 0.995 * 100.0 + 0.005 * 110.0;
        let var = 0.995 * 225.0 + 0.005 * (110.0 - mean) * (110.0 - mean);
        assert_eq!(c.weight, 1.0);
        assert!((c.mean - mean).abs() < 1e-12);
        assert!((c.variance - var).abs() < 1e-9);
    }

    #[test]
    fn new_mode_stays_foreground_until_it_dominates() {
        let f = GrayFrame::filled(1, 1, 100).unwrap();
        let mut m = GmmModel::init(&f, GmmParams::default()).unwrap();
        let other = GrayFrame::filled(1, 1, 200).unwrap();
        assert!(m.process(&other).unwrap().get(0, 0));
        // The new component matches but holds too little weight for the
        // background set on the next frame.
        assert!(m.process(&other).unwrap().get(0, 0));
        // Back to the dominant mode: background.
        assert!(!m.process(&f).unwrap().get(0, 0));
    }

    #[test]
    fn dimension_mismatch() {
        let mut m = GmmModel::init(&GrayFrame::filled(2, 2, 0).unwrap(), GmmParams::default()).unwrap();
        assert!(matches!(
            m.process(&GrayFrame::filled(3, 2, 0).unwrap()),
            Err(Error::Incompatible { .. })
        ));
    }

    #[test]
    fn stationary_weight_non_decreasing() {
        let f = GrayFrame::filled(1, 1, 0).unwrap();
        let mut m = GmmModel::init(&f, GmmParams::default()).unwrap();
        let input = GrayFrame::filled(1, 1, 80).unwrap();
        m.process(&input).unwrap();
        let weight_of_80 = |m: &GmmModel| {
            m.pixel(0, 0)
                .iter()
                .filter(|c| (c.mean - 80.0).abs() < 1.0)
                .map(|c| c.weight)
                .sum::<f64>()
        };
        let mut prev = weight_of_80(&m);
        for _ in 0..500 {
            m.process(&input).unwrap();
            let w = weight_of_80(&m);
            assert!(w >= prev);
            prev = w;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn invariants_hold(seq in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 6), 2..40),
                           k in 1usize..6) {
            let params = GmmParams { components: k, ..Default::default() };
            let first = GrayFrame::new(3, 2, seq[0].clone()).unwrap();
            let mut m = GmmModel::init(&first, params).unwrap();
            let mut replay = m.clone();
            for data in &seq[1..] {
                let f = GrayFrame::new(3, 2, data.clone()).unwrap();
                let a = m.process(&f).unwrap();
                let b = replay.process(&f).unwrap();
                prop_assert_eq!(a, b);
                for y in 0..2 {
                    for x in 0..3 {
                        let px = m.pixel(x, y);
                        let sum: f64 = px.iter().map(|c| c.weight).sum();
                        prop_assert!((sum - 1.0).abs() <= 1e-6);
                        for c in px {
                            prop_assert!(c.weight >= 0.0);
                            prop_assert!(c.variance >= params.min_variance);
                            prop_assert!((0.0..=255.0).contains(&c.mean));
                        }
                    }
                }
            }
            prop_assert_eq!(m, replay);
        }
    }
}
