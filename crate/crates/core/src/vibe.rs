//! ViBe: a non-parametric background model keeping raw intensity samples.
//!
//! Every pixel holds `samples_per_pixel` past intensities. A pixel is
//! background when at least `min_matches` samples lie strictly within
//! `match_radius` of its current value. Background pixels refresh one of
//! their own samples, and one sample of a random 8-neighbor, each with
//! probability `1 / subsampling_factor`.
//!
//! All randomness comes from one generator owned by the model. For each
//! background pixel, in row-major order, draws happen in this order:
//! update-own decision, own-sample index, update-neighbor decision,
//! neighbor index, neighbor-sample index. Index draws are skipped when the
//! matching decision declines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, GrayFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VibeParams {
    pub samples_per_pixel: usize,
    pub match_radius: u8,
    pub min_matches: usize,
    pub subsampling_factor: u32,
    pub seed: u64,
}

impl Default for VibeParams {
    fn default() -> Self {
        Self {
            samples_per_pixel: 20,
            match_radius: 20,
            min_matches: 2,
            subsampling_factor: 16,
            seed: 0,
        }
    }
}

impl VibeParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_matches < 1 {
            return Err(Error::InvalidParams("vibe: min_matches must be >= 1".into()));
        }
        if self.samples_per_pixel < self.min_matches {
            return Err(Error::InvalidParams(format!(
                "vibe: samples_per_pixel ({}) must be >= min_matches ({})",
                self.samples_per_pixel, self.min_matches
            )));
        }
        if self.subsampling_factor < 1 {
            return Err(Error::InvalidParams(
                "vibe: subsampling_factor must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Source of uniform integer draws for the model.
pub trait SampleRng {
    /// Uniform value in `0..bound`; `bound` is at least 1.
    fn below(&mut self, bound: u32) -> u32;
}

impl SampleRng for ChaCha8Rng {
    #[inline]
    fn below(&mut self, bound: u32) -> u32 {
        self.gen_range(0..bound)
    }
}

// Offsets of the 8-neighborhood, then the center for initialization.
const NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];
const NEIGHBORHOOD_WITH_CENTER: [(isize, isize); 9] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (0, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VibeModel<R = ChaCha8Rng> {
    width: usize,
    height: usize,
    samples: Vec<u8>,
    params: VibeParams,
    rng: R,
}

impl VibeModel<ChaCha8Rng> {
    /// Seeds every pixel's samples from its clamped 3x3 neighborhood in the
    /// first frame, using a generator seeded from `params.seed`.
    pub fn init(first_frame: &GrayFrame, params: VibeParams) -> Result<Self> {
        Self::with_rng(first_frame, params, ChaCha8Rng::seed_from_u64(params.seed))
    }
}

impl<R: SampleRng> VibeModel<R> {
    pub fn with_rng(first_frame: &GrayFrame, params: VibeParams, mut rng: R) -> Result<Self> {
        params.validate()?;
        let (width, height) = first_frame.dims();
        let n = params.samples_per_pixel;
        let mut samples = Vec::with_capacity(width * height * n);
        for y in 0..height {
            for x in 0..width {
                for _ in 0..n {
                    let k = rng.below(NEIGHBORHOOD_WITH_CENTER.len() as u32) as usize;
                    let (nx, ny) = clamp_offset(x, y, NEIGHBORHOOD_WITH_CENTER[k], width, height);
                    samples.push(first_frame.get(nx, ny));
                }
            }
        }
        Ok(Self {
            width,
            height,
            samples,
            params,
            rng,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn params(&self) -> &VibeParams {
        &self.params
    }

    /// Sample storage, `samples_per_pixel` consecutive bytes per pixel.
    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn pixel_samples(&self, x: usize, y: usize) -> &[u8] {
        let n = self.params.samples_per_pixel;
        let start = (y * self.width + x) * n;
        &self.samples[start..start + n]
    }

    pub fn rng(&self) -> &R {
        &self.rng
    }

    /// Segments `frame` and updates the model in place.
    pub fn process(&mut self, frame: &GrayFrame) -> Result<BinaryMask> {
        if frame.dims() != self.dims() {
            return Err(Error::Incompatible {
                model_width: self.width,
                model_height: self.height,
                frame_width: frame.width(),
                frame_height: frame.height(),
            });
        }
        let n = self.params.samples_per_pixel;
        let radius = i16::from(self.params.match_radius);
        let min_matches = self.params.min_matches;
        let phi = self.params.subsampling_factor;
        let pixels = frame.data();

        let mut mask = Vec::with_capacity(pixels.len());
        for y in 0..self.height {
            for x in 0..self.width {
                let idx = y * self.width + x;
                let v = pixels[idx];

                let own = &self.samples[idx * n..(idx + 1) * n];
                let mut matches = 0;
                for &s in own {
                    if (i16::from(v) - i16::from(s)).abs() < radius {
                        matches += 1;
                        if matches >= min_matches {
                            break;
                        }
                    }
                }

                if matches < min_matches {
                    mask.push(true);
                    continue;
                }
                mask.push(false);

                if self.rng.below(phi) == 0 {
                    let k = self.rng.below(n as u32) as usize;
                    self.samples[idx * n + k] = v;
                }
                if self.rng.below(phi) == 0 {
                    let k = self.rng.below(NEIGHBORS.len() as u32) as usize;
                    let (nx, ny) = clamp_offset(x, y, NEIGHBORS[k], self.width, self.height);
                    let s = self.rng.below(n as u32) as usize;
                    self.samples[(ny * self.width + nx) * n + s] = v;
                }
            }
        }
        BinaryMask::new(self.width, self.height, mask)
    }
}

#[inline]
fn clamp_offset(
    x: usize,
    y: usize,
    (dx, dy): (isize, isize),
    width: usize,
    height: usize,
) -> (usize, usize) {
    let nx = (x as isize + dx).clamp(0, width as isize - 1) as usize;
    let ny = (y as isize + dy).clamp(0, height as isize - 1) as usize;
    (nx, ny)
}
