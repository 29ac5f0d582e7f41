//! Frames, masks and the resampling used by the ratio sweep.
//!
//! Rounding is half-away-from-zero throughout. Intensity frames are shrunk
//! with pixel-center aligned bilinear interpolation; boolean masks are scaled
//! back with pixel-center aligned nearest-neighbor sampling.

use crate::error::{Error, Result};

/// Single-channel 8-bit image, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height, data.len(), 1)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Frame with every pixel set to `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width.saturating_mul(height)])
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }
}

/// Per-pixel foreground decision, `true` = foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_dims(width, height, data.len(), 1)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Result<Self> {
        Self::new(width, height, vec![value; width.saturating_mul(height)])
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

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// 0 for background, 255 for foreground.
    pub fn to_gray(&self) -> GrayFrame {
        GrayFrame {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| if v { 255 } else { 0 }).collect(),
        }
    }
}

fn check_dims(width: usize, height: usize, len: usize, channels: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::MalformedImage(format!(
            "dimensions {width}x{height} must be at least 1x1"
        )));
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::MalformedImage(format!("{width}x{height} overflows")))?;
    if len != expected {
        return Err(Error::MalformedImage(format!(
            "{width}x{height}x{channels} needs {expected} bytes, got {len}"
        )));
    }
    Ok(())
}

/// Percentage by which each linear dimension is reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompressionRatio(u8);

impl CompressionRatio {
    pub const NONE: CompressionRatio = CompressionRatio(0);
    pub const MAX_PERCENT: u8 = 99;

    pub fn new(percent: u32) -> Result<Self> {
        if percent > Self::MAX_PERCENT as u32 {
            return Err(Error::InvalidRatio(percent));
        }
        Ok(Self(percent as u8))
    }

    pub fn percent(self) -> u8 {
        self.0
    }

    /// Linear scale factor `1 - percent/100`, always in `(0, 1]`.
    pub fn scale(self) -> f64 {
        f64::from(100 - self.0) / 100.0
    }

    /// Every ratio from 0 to 99.
    pub fn all() -> impl Iterator<Item = CompressionRatio> {
        (0..=Self::MAX_PERCENT).map(CompressionRatio)
    }
}

impl TryFrom<u32> for CompressionRatio {
    type Error = Error;

    fn try_from(percent: u32) -> Result<Self> {
        Self::new(percent)
    }
}

impl std::fmt::Display for CompressionRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}%", self.0)
    }
}

/// BT.601 luma of an interleaved RGB buffer.
pub fn to_grayscale(width: usize, height: usize, rgb: &[u8]) -> Result<GrayFrame> {
    check_dims(width, height, rgb.len(), 3)?;
    // Integer weights in thousandths; +500 rounds the nonnegative sum half-up.
    let data = rgb
        .chunks_exact(3)
        .map(|px| {
            let luma = 299 * u32::from(px[0]) + 587 * u32::from(px[1]) + 114 * u32::from(px[2]);
            ((luma + 500) / 1000).min(255) as u8
        })
        .collect();
    Ok(GrayFrame {
        width,
        height,
        data,
    })
}

/// Output dimensions for a frame shrunk by `ratio`, never below 1x1.
pub fn dims_for_ratio(width: usize, height: usize, ratio: CompressionRatio) -> (usize, usize) {
    let keep = usize::from(100 - ratio.percent());
    // round(n * keep / 100) in exact integer arithmetic.
    let scale = |n: usize| ((n * keep * 2 + 100) / 200).max(1);
    (scale(width), scale(height))
}

/// Bilinear downsampling to `dims_for_ratio` of the frame.
pub fn downsample(frame: &GrayFrame, ratio: CompressionRatio) -> GrayFrame {
    if ratio == CompressionRatio::NONE {
        return frame.clone();
    }
    let (dst_w, dst_h) = dims_for_ratio(frame.width, frame.height, ratio);
    resize_bilinear(frame, dst_w, dst_h)
}

/// Pixel-center aligned bilinear resize to arbitrary positive dimensions.
pub fn resize_bilinear(frame: &GrayFrame, dst_w: usize, dst_h: usize) -> GrayFrame {
    assert!(dst_w > 0 && dst_h > 0, "target dimensions must be positive");
    if (dst_w, dst_h) == frame.dims() {
        return frame.clone();
    }
    let xs = sample_taps(frame.width, dst_w);
    let ys = sample_taps(frame.height, dst_h);
    let src = &frame.data;
    let stride = frame.width;

    let mut data = Vec::with_capacity(dst_w * dst_h);
    for &(y0, y1, fy) in &ys {
        let row0 = &src[y0 * stride..(y0 + 1) * stride];
        let row1 = &src[y1 * stride..(y1 + 1) * stride];
        for &(x0, x1, fx) in &xs {
            let top = f64::from(row0[x0]) * (1.0 - fx) + f64::from(row0[x1]) * fx;
            let bottom = f64::from(row1[x0]) * (1.0 - fx) + f64::from(row1[x1]) * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayFrame {
        width: dst_w,
        height: dst_h,
        data,
    }
}

/// For each destination index: the two neighbouring source indices and the
/// weight of the second one.
fn sample_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let step = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|d| {
            let pos = ((d as f64 + 0.5) * step - 0.5).clamp(0.0, last);
            let i0 = pos.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, pos - i0 as f64)
        })
        .collect()
}

/// Nearest-neighbor mask scaling with pixel-center alignment.
pub fn upsample_mask(mask: &BinaryMask, target_width: usize, target_height: usize) -> BinaryMask {
    assert!(
        target_width > 0 && target_height > 0,
        "target dimensions must be positive"
    );
    if (target_width, target_height) == mask.dims() {
        return mask.clone();
    }
    let xs: Vec<usize> = (0..target_width)
        .map(|d| nearest_source(d, mask.width, target_width))
        .collect();
    let mut data = Vec::with_capacity(target_width * target_height);
    for ty in 0..target_height {
        let sy = nearest_source(ty, mask.height, target_height);
        let row = &mask.data[sy * mask.width..(sy + 1) * mask.width];
        data.extend(xs.iter().map(|&sx| row[sx]));
    }
    BinaryMask {
        width: target_width,
        height: target_height,
        data,
    }
}

/// floor((dst + 0.5) * src / dst_len), computed exactly.
#[inline]
fn nearest_source(dst: usize, src_len: usize, dst_len: usize) -> usize {
    ((2 * dst + 1) * src_len / (2 * dst_len)).min(src_len - 1)
}
