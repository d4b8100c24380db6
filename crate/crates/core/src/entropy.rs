//! Information content of a grayscale view.
//!
//! Every pixel is taken as the center of an odd `w × w` window (borders are
//! replicate-padded, so there are exactly `H·W` windows). Each window yields a
//! pair `(center, rounded window mean)`; the view entropy is the Shannon
//! entropy, in bits, of the empirical distribution of those pairs.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

pub const DEFAULT_LEVELS: u16 = 256;
pub const DEFAULT_WINDOW: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EntropyError {
    #[error("window size {0} must be odd and at least 1")]
    BadWindow(usize),
    #[error("image must be at least 1x1, got {height}x{width}")]
    Empty { height: usize, width: usize },
    #[error("expected {expected} pixels, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("pixel value {value} outside [0, {max}]")]
    PixelOutOfRange { value: u16, max: u16 },
    #[error("gray levels must be at least 2, got {0}")]
    BadLevels(u16),
}

/// An `H × W` image of integer gray levels in `[0, L-1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    levels: u16,
    pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(
        height: usize,
        width: usize,
        levels: u16,
        pixels: Vec<u16>,
    ) -> Result<Self, EntropyError> {
        if height == 0 || width == 0 {
            return Err(EntropyError::Empty { height, width });
        }
        if levels < 2 {
            return Err(EntropyError::BadLevels(levels));
        }
        if pixels.len() != height * width {
            return Err(EntropyError::ShapeMismatch {
                expected: height * width,
                actual: pixels.len(),
            });
        }
        if let Some(&value) = pixels.iter().find(|&&p| p >= levels) {
            return Err(EntropyError::PixelOutOfRange {
                value,
                max: levels - 1,
            });
        }
        Ok(Self {
            height,
            width,
            levels,
            pixels,
        })
    }

    pub fn filled(
        height: usize,
        width: usize,
        levels: u16,
        value: u16,
    ) -> Result<Self, EntropyError> {
        Self::new(height, width, levels, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn levels(&self) -> u16 {
        self.levels
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.pixels[row * self.width + col]
    }
}

/// Scale of the channel values handed to [`to_gray`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelRange {
    /// Channels in `[0, 1]`.
    Unit,
    /// Channels in `[0, 255]`.
    Byte,
}

/// Converts row-major RGB triples to gray levels with Rec. 601 luma weights,
/// rounding half-up.
pub fn to_gray(
    height: usize,
    width: usize,
    rgb: &[[f64; 3]],
    range: ChannelRange,
    levels: u16,
) -> Result<GrayImage, EntropyError> {
    if rgb.len() != height * width {
        return Err(EntropyError::ShapeMismatch {
            expected: height * width,
            actual: rgb.len(),
        });
    }
    if levels < 2 {
        return Err(EntropyError::BadLevels(levels));
    }
    let full = match range {
        ChannelRange::Unit => 1.0,
        ChannelRange::Byte => 255.0,
    };
    let top = f64::from(levels - 1);
    let pixels = rgb
        .iter()
        .map(|&[r, g, b]| {
            let luma = (0.299 * r + 0.587 * g + 0.114 * b) / full;
            let v = libm::floor(luma * top + 0.5);
            v.clamp(0.0, top) as u16
        })
        .collect();
    GrayImage::new(height, width, levels, pixels)
}

/// Occurrence counts of `(center, window mean)` gray-level pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairHistogram {
    counts: BTreeMap<(u16, u16), u64>,
    total: u64,
}

impl PairHistogram {
    pub fn counts(&self) -> &BTreeMap<(u16, u16), u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, center: u16, mean: u16) -> u64 {
        self.counts.get(&(center, mean)).copied().unwrap_or(0)
    }

    pub fn distinct_pairs(&self) -> usize {
        self.counts.len()
    }

    /// `-Σ p log2 p` with `p = count / total`.
    pub fn entropy_bits(&self) -> f64 {
        let total = self.total as f64;
        let mut h = 0.0;
        for &c in self.counts.values() {
            let p = c as f64 / total;
            h -= p * libm::log2(p);
        }
        // a single pair gives -1·log2(1) = -0.0
        h.max(0.0)
    }
}

fn check_window(window: usize) -> Result<(), EntropyError> {
    if window % 2 == 1 {
        Ok(())
    } else {
        Err(EntropyError::BadWindow(window))
    }
}

/// Builds the pair histogram with replicate padding at the borders.
///
/// Window sums come from a summed-area table over the padded image, so the
/// cost is `O((H + w)(W + w))` regardless of window size.
pub fn pair_histogram(img: &GrayImage, window: usize) -> Result<PairHistogram, EntropyError> {
    check_window(window)?;
    let r = window / 2;
    let (h, w) = (img.height, img.width);
    let ph = h + 2 * r;
    let pw = w + 2 * r;
    // integral[(y+1)*(pw+1) + (x+1)] = sum of padded[0..=y][0..=x]
    let stride = pw + 1;
    let mut integral = vec![0u64; (ph + 1) * stride];
    for y in 0..ph {
        let sy = y.saturating_sub(r).min(h - 1);
        let mut row_sum = 0u64;
        for x in 0..pw {
            let sx = x.saturating_sub(r).min(w - 1);
            row_sum += u64::from(img.pixels[sy * w + sx]);
            integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row_sum;
        }
    }
    let area = (window * window) as u64;
    let mut counts = BTreeMap::new();
    for y in 0..h {
        for x in 0..w {
            // padded window rows y..y+window, cols x..x+window
            let (y0, y1, x0, x1) = (y, y + window, x, x + window);
            let sum = integral[y1 * stride + x1] + integral[y0 * stride + x0]
                - integral[y0 * stride + x1]
                - integral[y1 * stride + x0];
            // round half-up of sum / area in integers
            let mean = ((2 * sum + area) / (2 * area)) as u16;
            *counts.entry((img.pixels[y * w + x], mean)).or_insert(0u64) += 1;
        }
    }
    Ok(PairHistogram {
        counts,
        total: (h * w) as u64,
    })
}

/// Entropy score `G` of one view, in bits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EntropyScore(f64);

impl EntropyScore {
    pub fn bits(self) -> f64 {
        self.0
    }
}

pub fn view_entropy(img: &GrayImage, window: usize) -> Result<EntropyScore, EntropyError> {
    Ok(EntropyScore(pair_histogram(img, window)?.entropy_bits()))
}
