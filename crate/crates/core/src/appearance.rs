//! HSV color histograms and the foreground/background likelihood.

use crate::error::{Error, Result};
use crate::imaging::{rgb_to_hsv, Frame, PixelRect};

pub const BINS_PER_CHANNEL: usize = 10;
pub const HISTOGRAM_LEN: usize = BINS_PER_CHANNEL * BINS_PER_CHANNEL * BINS_PER_CHANNEL;
pub const LIKELIHOOD_FLOOR: f64 = 1e-12;
const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Target position (box center, pixels) and scale relative to the reference box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetState {
    pub x: f64,
    pub y: f64,
    pub s: f64,
}

impl TargetState {
    pub fn new(x: f64, y: f64, s: f64) -> Self {
        TargetState { x, y, s }
    }

    /// Reference box scaled by `s` and centered on the state, clipped to the frame.
    pub fn rect(&self, ref_w: f64, ref_h: f64, width: usize, height: usize) -> Option<PixelRect> {
        if !(self.s > 0.0) || !self.x.is_finite() || !self.y.is_finite() {
            return None;
        }
        PixelRect::centered(self.x, self.y, ref_w * self.s, ref_h * self.s, width, height)
    }
}

/// Bin of a color: `h / 36`, `s * 10`, `v * 10`, each floored and clipped to 9.
#[inline]
pub fn bin_index(rgb: [f64; 3]) -> usize {
    let [h, s, v] = rgb_to_hsv(rgb);
    let q = |x: f64| (x.max(0.0) as usize).min(BINS_PER_CHANNEL - 1);
    q(h / 36.0) * 100 + q(s * 10.0) * 10 + q(v * 10.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HsvHistogram {
    bins: Vec<f64>,
}

impl HsvHistogram {
    /// Normalizes raw counts. All-zero input is rejected.
    pub fn from_counts(counts: &[f64]) -> Result<Self> {
        if counts.len() != HISTOGRAM_LEN {
            return Err(Error::InvalidFrame(format!(
                "histogram needs {HISTOGRAM_LEN} bins, got {}",
                counts.len()
            )));
        }
        if counts.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::Unnormalized(f64::NAN));
        }
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(Error::EmptyRegion);
        }
        Ok(HsvHistogram {
            bins: counts.iter().map(|c| c / total).collect(),
        })
    }

    /// Takes the bins as given; `bhattacharyya` checks normalization.
    pub fn from_bins_unchecked(bins: Vec<f64>) -> Self {
        HsvHistogram { bins }
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn total(&self) -> f64 {
        self.bins.iter().sum()
    }
}

/// Per-pixel bin indices of a frame, computed once and reused by every
/// candidate box in that frame.
#[derive(Clone, Debug)]
pub struct BinImage {
    width: usize,
    height: usize,
    bins: Vec<u16>,
}

impl BinImage {
    pub fn new(frame: &Frame) -> Self {
        BinImage {
            width: frame.width(),
            height: frame.height(),
            bins: frame
                .pixels()
                .iter()
                .map(|p| bin_index(p.map(f64::from)) as u16)
                .collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn accumulate(&self, rect: PixelRect, counts: &mut [f64]) {
        for y in rect.y0..rect.y1 {
            for &b in &self.bins[y * self.width + rect.x0..y * self.width + rect.x1] {
                counts[b as usize] += 1.0;
            }
        }
    }

    /// Histogram of the pixels in `rect` after clipping to the frame.
    pub fn histogram(&self, rect: PixelRect) -> Result<HsvHistogram> {
        let rect = PixelRect::clipped(
            rect.x0 as i64,
            rect.y0 as i64,
            rect.x1 as i64,
            rect.y1 as i64,
            self.width,
            self.height,
        )
        .ok_or(Error::EmptyRegion)?;
        let mut counts = vec![0.0; HISTOGRAM_LEN];
        self.accumulate(rect, &mut counts);
        HsvHistogram::from_counts(&counts)
    }

    /// Histogram of the ring of width `margin` around `inner`, clipped to the frame.
    pub fn ring_histogram(&self, inner: PixelRect, margin: usize) -> Result<HsvHistogram> {
        let m = margin as i64;
        let outer = PixelRect::clipped(
            inner.x0 as i64 - m,
            inner.y0 as i64 - m,
            inner.x1 as i64 + m,
            inner.y1 as i64 + m,
            self.width,
            self.height,
        )
        .ok_or(Error::EmptyRegion)?;
        let mut counts = vec![0.0; HISTOGRAM_LEN];
        for y in outer.y0..outer.y1 {
            for x in outer.x0..outer.x1 {
                if !inner.contains(x, y) {
                    counts[self.bins[y * self.width + x] as usize] += 1.0;
                }
            }
        }
        HsvHistogram::from_counts(&counts)
    }
}

pub fn build_histogram(frame: &Frame, rect: PixelRect) -> Result<HsvHistogram> {
    BinImage::new(frame).histogram(rect)
}

/// `sqrt(1 - sum sqrt(h1 h2))`, clamped at zero.
pub fn bhattacharyya(h1: &HsvHistogram, h2: &HsvHistogram) -> Result<f64> {
    for h in [h1, h2] {
        let total = h.total();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE || h.bins.iter().any(|&b| b < 0.0) {
            return Err(Error::Unnormalized(total));
        }
    }
    if h1.bins.len() != h2.bins.len() {
        return Err(Error::Unnormalized(h2.total()));
    }
    let bc: f64 = h1
        .bins
        .iter()
        .zip(&h2.bins)
        .map(|(a, b)| (a * b).sqrt())
        .sum();
    Ok((1.0 - bc).max(0.0).sqrt())
}

/// `1 / (1 + exp(d_F - d_B))`.
#[inline]
pub fn logistic_likelihood(d_fg: f64, d_bg: f64) -> f64 {
    1.0 / (1.0 + (d_fg - d_bg).exp())
}

/// Fixed foreground and background templates plus the reference box size.
#[derive(Clone, Debug)]
pub struct AppearanceModel {
    pub ref_w: f64,
    pub ref_h: f64,
    pub foreground: HsvHistogram,
    pub background: HsvHistogram,
}

impl AppearanceModel {
    /// Templates from the first frame. The background ring is half the box's
    /// shorter side wide.
    pub fn from_frame(frame: &Frame, init: PixelRect) -> Result<Self> {
        if init.x1 > frame.width() || init.y1 > frame.height() || init.area() == 0 {
            return Err(Error::InvalidBox(format!(
                "{init:?} not inside a {}x{} frame",
                frame.width(),
                frame.height()
            )));
        }
        let bins = BinImage::new(frame);
        let margin = (init.width().min(init.height()) / 2).max(1);
        Ok(AppearanceModel {
            ref_w: init.width() as f64,
            ref_h: init.height() as f64,
            foreground: bins.histogram(init)?,
            background: bins.ring_histogram(init, margin)?,
        })
    }

    /// Likelihood of `state` in the frame behind `bins`; degenerate boxes get
    /// the floor value.
    pub fn likelihood(&self, bins: &BinImage, state: &TargetState) -> f64 {
        let Some(rect) = state.rect(self.ref_w, self.ref_h, bins.width, bins.height) else {
            return LIKELIHOOD_FLOOR;
        };
        let Ok(candidate) = bins.histogram(rect) else {
            return LIKELIHOOD_FLOOR;
        };
        match (
            bhattacharyya(&candidate, &self.foreground),
            bhattacharyya(&candidate, &self.background),
        ) {
            (Ok(d_fg), Ok(d_bg)) => logistic_likelihood(d_fg, d_bg).max(LIKELIHOOD_FLOOR),
            _ => LIKELIHOOD_FLOOR,
        }
    }
}

/// One-shot likelihood for a single frame; callers evaluating many states
/// should keep a `BinImage` and use `AppearanceModel::likelihood`.
pub fn likelihood(frame: &Frame, state: &TargetState, model: &AppearanceModel) -> f64 {
    model.likelihood(&BinImage::new(frame), state)
}
