//! Approximate nearest neighbor fields between two frames (PatchMatch), the
//! forward-backward consistency filter, and the incoherence / confidence maps
//! built from the surviving correspondences.
//!
//! A patch is identified by its center pixel; for side `p` the center is the
//! top-left corner plus `p / 2`. Matching cost is the sum of squared RGB
//! differences over the patch.

use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::RegionGrid;
use crate::imaging::{Frame, PixelRect, ScalarMap};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    pub dx: i32,
    pub dy: i32,
    pub error: f64,
}

impl Correspondence {
    #[inline]
    pub fn target(&self, x: usize, y: usize) -> (usize, usize) {
        ((x as i64 + self.dx as i64) as usize, (y as i64 + self.dy as i64) as usize)
    }
}

/// Per-center offsets into the destination frame, stored for a rectangle of
/// source patch centers.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchField {
    width: usize,
    height: usize,
    patch: usize,
    centers: Option<PixelRect>,
    matches: Vec<Correspondence>,
}

impl PatchField {
    /// Builds a field from explicit correspondences, one per center of
    /// `centers` in row-major order. Every target must be a valid patch center.
    pub fn from_matches(
        width: usize,
        height: usize,
        patch: usize,
        centers: Option<PixelRect>,
        matches: Vec<Correspondence>,
    ) -> Result<Self> {
        let expected = centers.map_or(0, |r| r.area());
        if matches.len() != expected {
            return Err(Error::InvalidFrame(format!(
                "{} correspondences for {expected} centers",
                matches.len()
            )));
        }
        let field = PatchField {
            width,
            height,
            patch,
            centers,
            matches,
        };
        let valid = valid_centers(width, height, patch);
        for ((x, y), m) in field.iter() {
            let (tx, ty) = (x as i64 + m.dx as i64, y as i64 + m.dy as i64);
            let inside = valid.is_some_and(|v| {
                tx >= v.x0 as i64 && tx < v.x1 as i64 && ty >= v.y0 as i64 && ty < v.y1 as i64
            });
            if !inside || m.error < 0.0 {
                return Err(Error::InvalidFrame(format!(
                    "correspondence at ({x},{y}) leaves the destination frame"
                )));
            }
        }
        Ok(field)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn patch(&self) -> usize {
        self.patch
    }

    /// Rectangle of source centers covered by this field.
    #[inline]
    pub fn centers(&self) -> Option<PixelRect> {
        self.centers
    }

    pub fn get(&self, x: usize, y: usize) -> Option<Correspondence> {
        let r = self.centers?;
        r.contains(x, y)
            .then(|| self.matches[(y - r.y0) * r.width() + (x - r.x0)])
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), Correspondence)> + '_ {
        let r = self.centers.unwrap_or(PixelRect {
            x0: 0,
            y0: 0,
            x1: 0,
            y1: 0,
        });
        let w = r.width().max(1);
        self.matches
            .iter()
            .enumerate()
            .map(move |(i, m)| ((r.x0 + i % w, r.y0 + i / w), *m))
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// Per-pixel matching error over the whole frame, normalized to `[0, 1]` by
    /// `patch^2 * 3`. Pixels outside the computed centers take the value of the
    /// nearest computed center.
    pub fn error_image(&self) -> ScalarMap {
        let mut out = ScalarMap::zeros(self.width, self.height);
        let Some(r) = self.centers else {
            return out;
        };
        let norm = (self.patch * self.patch * 3) as f64;
        for y in 0..self.height {
            let cy = y.clamp(r.y0, r.y1 - 1);
            for x in 0..self.width {
                let cx = x.clamp(r.x0, r.x1 - 1);
                let m = self.matches[(cy - r.y0) * r.width() + (cx - r.x0)];
                out.set(x, y, (m.error / norm).min(1.0));
            }
        }
        out
    }

    /// Debug dump: one `x,y,dx,dy,error` row per center.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y,dx,dy,error")?;
        for ((x, y), m) in self.iter() {
            writeln!(out, "{x},{y},{},{},{}", m.dx, m.dy, m.error)?;
        }
        Ok(())
    }
}

/// Rectangle of pixels that can be the center of a `patch x patch` patch.
pub fn valid_centers(width: usize, height: usize, patch: usize) -> Option<PixelRect> {
    if patch == 0 || patch > width || patch > height {
        return None;
    }
    let half = patch / 2;
    Some(PixelRect {
        x0: half,
        y0: half,
        x1: width - patch + half + 1,
        y1: height - patch + half + 1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatcherConfig {
    pub patch: usize,
    pub iterations: usize,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            patch: 8,
            iterations: 5,
        }
    }
}

/// Dense field over every valid center of `src`.
pub fn compute_annf<R: Rng + ?Sized>(
    src: &Frame,
    dst: &Frame,
    cfg: &MatcherConfig,
    rng: &mut R,
) -> Result<PatchField> {
    let all = PixelRect {
        x0: 0,
        y0: 0,
        x1: src.width(),
        y1: src.height(),
    };
    compute_annf_in(src, dst, all, cfg, rng)
}

/// Field restricted to the source centers inside `region`.
pub fn compute_annf_in<R: Rng + ?Sized>(
    src: &Frame,
    dst: &Frame,
    region: PixelRect,
    cfg: &MatcherConfig,
    rng: &mut R,
) -> Result<PatchField> {
    src.same_size(dst)?;
    let (w, h, p) = (src.width(), src.height(), cfg.patch);
    let valid = valid_centers(w, h, p).ok_or(Error::PatchTooLarge {
        patch: p,
        width: w,
        height: h,
    })?;
    let centers = PixelRect::clipped(
        region.x0.max(valid.x0) as i64,
        region.y0.max(valid.y0) as i64,
        region.x1.min(valid.x1) as i64,
        region.y1.min(valid.y1) as i64,
        w,
        h,
    );
    let Some(centers) = centers else {
        return Ok(PatchField {
            width: w,
            height: h,
            patch: p,
            centers: None,
            matches: Vec::new(),
        });
    };
    let matches = PatchMatch {
        src,
        dst,
        patch: p,
        half: p / 2,
        valid,
        centers,
    }
    .run(cfg.iterations, rng);
    Ok(PatchField {
        width: w,
        height: h,
        patch: p,
        centers: Some(centers),
        matches,
    })
}

struct PatchMatch<'a> {
    src: &'a Frame,
    dst: &'a Frame,
    patch: usize,
    half: usize,
    valid: PixelRect,
    centers: PixelRect,
}

impl PatchMatch<'_> {
    /// SSD between the patch centered at `(sx, sy)` in `src` and the one at
    /// `(tx, ty)` in `dst`. Stops early once the partial sum reaches `bound`.
    fn distance(&self, sx: usize, sy: usize, tx: usize, ty: usize, bound: f32) -> f32 {
        let w = self.src.width();
        let (sx, sy, tx, ty) = (sx - self.half, sy - self.half, tx - self.half, ty - self.half);
        let (sp, dp) = (self.src.pixels(), self.dst.pixels());
        let mut acc = 0.0f32;
        for j in 0..self.patch {
            let a = &sp[(sy + j) * w + sx..][..self.patch];
            let b = &dp[(ty + j) * w + tx..][..self.patch];
            for (pa, pb) in a.iter().zip(b) {
                let d0 = pa[0] - pb[0];
                let d1 = pa[1] - pb[1];
                let d2 = pa[2] - pb[2];
                acc += d0 * d0 + d1 * d1 + d2 * d2;
            }
            if acc >= bound {
                return acc;
            }
        }
        acc
    }

    #[inline]
    fn try_target(&self, x: usize, y: usize, tx: i64, ty: i64, best: &mut Correspondence) -> bool {
        let v = self.valid;
        if tx < v.x0 as i64 || ty < v.y0 as i64 || tx >= v.x1 as i64 || ty >= v.y1 as i64 {
            return false;
        }
        let (dx, dy) = ((tx - x as i64) as i32, (ty - y as i64) as i32);
        if dx == best.dx && dy == best.dy {
            return false;
        }
        let d = self.distance(x, y, tx as usize, ty as usize, best.error as f32);
        if (d as f64) < best.error {
            *best = Correspondence {
                dx,
                dy,
                error: d as f64,
            };
            return true;
        }
        false
    }

    fn run<R: Rng + ?Sized>(&self, iterations: usize, rng: &mut R) -> Vec<Correspondence> {
        let c = self.centers;
        let v = self.valid;
        let cw = c.width();
        let mut field = Vec::with_capacity(c.area());

        // random initialization; the identity offset is always a candidate
        for y in c.y0..c.y1 {
            for x in c.x0..c.x1 {
                let mut best = Correspondence {
                    dx: 0,
                    dy: 0,
                    error: self.distance(x, y, x, y, f32::INFINITY) as f64,
                };
                let tx = rng.random_range(v.x0..v.x1) as i64;
                let ty = rng.random_range(v.y0..v.y1) as i64;
                self.try_target(x, y, tx, ty, &mut best);
                field.push(best);
            }
        }

        let max_radius = self.src.width().max(self.src.height()) as f64;
        for it in 0..iterations {
            let forward = it % 2 == 0;
            let step: i64 = if forward { -1 } else { 1 };
            for j in 0..c.height() {
                let y = if forward { c.y0 + j } else { c.y1 - 1 - j };
                for i in 0..cw {
                    let x = if forward { c.x0 + i } else { c.x1 - 1 - i };
                    let idx = (y - c.y0) * cw + (x - c.x0);
                    let mut best = field[idx];

                    // propagation from the already-visited horizontal and vertical neighbors
                    let nx = x as i64 + step;
                    if nx >= c.x0 as i64 && nx < c.x1 as i64 {
                        let n = field[idx.wrapping_add_signed(step as isize)];
                        self.try_target(x, y, x as i64 + n.dx as i64, y as i64 + n.dy as i64, &mut best);
                    }
                    let ny = y as i64 + step;
                    if ny >= c.y0 as i64 && ny < c.y1 as i64 {
                        let n = field[idx.wrapping_add_signed(step as isize * cw as isize)];
                        self.try_target(x, y, x as i64 + n.dx as i64, y as i64 + n.dy as i64, &mut best);
                    }

                    // random search in exponentially shrinking windows around the best match
                    let mut radius = max_radius;
                    while radius >= 1.0 {
                        let r = radius as i64;
                        let (bx, by) = (x as i64 + best.dx as i64, y as i64 + best.dy as i64);
                        let x_lo = (bx - r).max(v.x0 as i64);
                        let x_hi = (bx + r).min(v.x1 as i64 - 1);
                        let y_lo = (by - r).max(v.y0 as i64);
                        let y_hi = (by + r).min(v.y1 as i64 - 1);
                        let tx = rng.random_range(x_lo..=x_hi);
                        let ty = rng.random_range(y_lo..=y_hi);
                        self.try_target(x, y, tx, ty, &mut best);
                        radius *= 0.5;
                    }
                    field[idx] = best;
                }
            }
        }
        field
    }
}

/// Set of pixels of frame `t` whose forward correspondence survived the
/// consistency check.
#[derive(Clone, Debug, PartialEq)]
pub struct Survivors {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl Survivors {
    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.mask[y * self.width + x]
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| (i % self.width, i / self.width))
    }
}

/// A pixel `q` of frame `t` survives iff it is the forward match of a patch
/// center inside `bbox` (frame `t-1`) and its own backward match lands back
/// inside `bbox`.
pub fn forward_backward_filter(fwd: &PatchField, bwd: &PatchField, bbox: &PixelRect) -> Survivors {
    let (w, h) = (bwd.width(), bwd.height());
    let mut mask = vec![false; w * h];
    for ((px, py), m) in fwd.iter() {
        if !bbox.contains(px, py) {
            continue;
        }
        let (qx, qy) = m.target(px, py);
        if qx >= w || qy >= h {
            continue;
        }
        if let Some(back) = bwd.get(qx, qy) {
            let (sx, sy) = back.target(qx, qy);
            if bbox.contains(sx, sy) {
                mask[qy * w + qx] = true;
            }
        }
    }
    Survivors {
        width: w,
        height: h,
        mask,
    }
}

/// Incoherence: in-degree of each surviving pixel under the forward mapping of
/// the box centers, zero elsewhere.
pub fn incoherence_map(survivors: &Survivors, fwd: &PatchField, bbox: &PixelRect) -> ScalarMap {
    let mut out = ScalarMap::zeros(survivors.width, survivors.height);
    for ((px, py), m) in fwd.iter() {
        if !bbox.contains(px, py) {
            continue;
        }
        let (qx, qy) = m.target(px, py);
        if survivors.contains(qx, qy) {
            let i = qy * out.width + qx;
            out.values[i] += 1.0;
        }
    }
    out
}

/// Per-cell confidence: mean incoherence over the cell's pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceGrid {
    pub lambda: Vec<f64>,
    pub pixel_counts: Vec<usize>,
}

impl ConfidenceGrid {
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }
}

pub fn confidence_map(incoherence: &ScalarMap, grid: &RegionGrid) -> ConfidenceGrid {
    let mut sums = vec![0.0; grid.len()];
    let mut counts = vec![0usize; grid.len()];
    for cell in 0..grid.len() {
        let b = grid.bounds(cell);
        for y in b.y0..b.y1 {
            for x in b.x0..b.x1 {
                sums[cell] += incoherence.get(x, y);
            }
        }
        counts[cell] = b.area();
    }
    let lambda = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
        .collect();
    ConfidenceGrid {
        lambda,
        pixel_counts: counts,
    }
}
