//! Frames, scalar maps and the few image primitives the pipeline needs:
//! HSV conversion, a thresholded Sobel edge map, 3x3 dilation and 8-bit PPM I/O.
//!
//! Window operations clip at the border: neighbors outside the image are absent,
//! never wrapped.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// An RGB image with channels in `[0, 1]`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<[f32; 3]>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<[f32; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!("empty frame {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "{} pixels for a {width}x{height} frame",
                pixels.len()
            )));
        }
        if let Some(p) = pixels
            .iter()
            .find(|p| p.iter().any(|c| !(0.0..=1.0).contains(c)))
        {
            return Err(Error::InvalidFrame(format!("channel out of range: {p:?}")));
        }
        Ok(Frame {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Result<Self> {
        Frame::new(width, height, vec![rgb; width * height])
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 3 {
            return Err(Error::InvalidFrame(format!(
                "{} bytes for a {width}x{height} RGB frame",
                bytes.len()
            )));
        }
        let pixels = bytes
            .chunks_exact(3)
            .map(|c| {
                [
                    f32::from(c[0]) / 255.0,
                    f32::from(c[1]) / 255.0,
                    f32::from(c[2]) / 255.0,
                ]
            })
            .collect();
        Frame::new(width, height, pixels)
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|p| p.map(|c| (c * 255.0).round().clamp(0.0, 255.0) as u8))
            .collect()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Pixel count of the frame.
    #[inline]
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn same_size(&self, other: &Frame) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    pub fn luminance(&self) -> ScalarMap {
        ScalarMap {
            width: self.width,
            height: self.height,
            values: self.pixels.iter().map(|&p| luminance(p)).collect(),
        }
    }

    /// Colors of all pixels inside `rect`, row by row.
    pub fn colors_in(&self, rect: PixelRect) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(rect.area());
        for y in rect.y0..rect.y1 {
            for x in rect.x0..rect.x1 {
                out.push(self.get(x, y).map(f64::from));
            }
        }
        out
    }
}

/// A non-negative real-valued image with the dimensions of its source frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ScalarMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        ScalarMap {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Half-open integer rectangle `[x0, x1) x [y0, y1)` in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    /// Intersects the signed rectangle with a `width x height` frame.
    /// Returns `None` when nothing is left.
    pub fn clipped(x0: i64, y0: i64, x1: i64, y1: i64, width: usize, height: usize) -> Option<Self> {
        let cx0 = x0.max(0);
        let cy0 = y0.max(0);
        let cx1 = x1.min(width as i64);
        let cy1 = y1.min(height as i64);
        if cx0 >= cx1 || cy0 >= cy1 {
            return None;
        }
        Some(PixelRect {
            x0: cx0 as usize,
            y0: cy0 as usize,
            x1: cx1 as usize,
            y1: cy1 as usize,
        })
    }

    /// Rectangle of size `w x h` centered on `(cx, cy)`, rounded to pixel bounds
    /// and clipped to the frame.
    pub fn centered(cx: f64, cy: f64, w: f64, h: f64, width: usize, height: usize) -> Option<Self> {
        let x0 = (cx - w / 2.0).round() as i64;
        let y0 = (cy - h / 2.0).round() as i64;
        let x1 = x0 + w.round().max(1.0) as i64;
        let y1 = y0 + h.round().max(1.0) as i64;
        PixelRect::clipped(x0, y0, x1, y1, width, height)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    #[inline]
    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

/// Luma weights 0.299 / 0.587 / 0.114.
#[inline]
pub fn luminance(p: [f32; 3]) -> f64 {
    0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])
}

/// Hexcone RGB to HSV. Hue in degrees `[0, 360)`, gray maps to hue 0.
pub fn rgb_to_hsv(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta <= 0.0 {
        return [0.0, s, v];
    }
    let sector = if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = 60.0 * sector;
    if h >= 360.0 {
        h -= 360.0;
    }
    [h, s, v]
}

pub fn hsv_to_rgb(hsv: [f64; 3]) -> [f64; 3] {
    let [h, s, v] = hsv;
    let c = v * s;
    let hp = (h.rem_euclid(360.0)) / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

/// Binary edge map: Sobel magnitude of the luminance, thresholded at
/// `relative_threshold * max magnitude`. Pixels without a full 3x3
/// neighborhood are never edges.
pub fn edge_map(frame: &Frame, relative_threshold: f64) -> ScalarMap {
    edge_map_from_luma(&frame.luminance(), relative_threshold)
}

pub fn edge_map_from_luma(luma: &ScalarMap, relative_threshold: f64) -> ScalarMap {
    let (w, h) = (luma.width, luma.height);
    let mut out = ScalarMap::zeros(w, h);
    if w < 3 || h < 3 {
        return out;
    }
    let mut magnitude = vec![0.0; w * h];
    let mut peak: f64 = 0.0;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let l = |dx: isize, dy: isize| {
                luma.get((x as isize + dx) as usize, (y as isize + dy) as usize)
            };
            let gx = (l(1, -1) + 2.0 * l(1, 0) + l(1, 1)) - (l(-1, -1) + 2.0 * l(-1, 0) + l(-1, 1));
            let gy = (l(-1, 1) + 2.0 * l(0, 1) + l(1, 1)) - (l(-1, -1) + 2.0 * l(0, -1) + l(1, -1));
            let m = (gx * gx + gy * gy).sqrt();
            magnitude[y * w + x] = m;
            peak = peak.max(m);
        }
    }
    if peak <= 0.0 {
        return out;
    }
    let threshold = relative_threshold * peak;
    for (o, &m) in out.values.iter_mut().zip(&magnitude) {
        if m > 0.0 && m >= threshold {
            *o = 1.0;
        }
    }
    out
}

/// Grayscale dilation with a 3x3 all-one structuring element.
pub fn dilate3(map: &ScalarMap) -> ScalarMap {
    let (w, h) = (map.width, map.height);
    let mut out = ScalarMap::zeros(w, h);
    for y in 0..h {
        let ys = y.saturating_sub(1)..(y + 2).min(h);
        for x in 0..w {
            let xs = x.saturating_sub(1)..(x + 2).min(w);
            let mut m = 0.0f64;
            for yy in ys.clone() {
                for xx in xs.clone() {
                    m = m.max(map.get(xx, yy));
                }
            }
            out.set(x, y, m);
        }
    }
    out
}

// -- PPM ------------------------------------------------------------------

pub fn read_ppm(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path)?;
    decode_ppm(&bytes).map_err(|message| Error::Ppm {
        path: path.to_path_buf(),
        message,
    })
}

/// Decodes a binary 8-bit PPM (P6, maxval 255).
pub fn decode_ppm(bytes: &[u8]) -> std::result::Result<Frame, String> {
    let mut pos = 0;
    let mut fields = [0usize; 3];
    let magic = next_token(bytes, &mut pos).ok_or("missing magic number")?;
    if magic != b"P6" {
        return Err(format!("unsupported magic {:?}", String::from_utf8_lossy(magic)));
    }
    for field in fields.iter_mut() {
        let tok = next_token(bytes, &mut pos).ok_or("truncated header")?;
        *field = std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("bad header field {:?}", String::from_utf8_lossy(tok)))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(format!("only 8-bit PPM is supported (maxval {maxval})"));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("missing raster separator".into());
    }
    pos += 1;
    let raster = &bytes[pos..];
    let need = width * height * 3;
    if raster.len() < need {
        return Err(format!("raster has {} bytes, expected {need}", raster.len()));
    }
    Frame::from_rgb8(width, height, &raster[..need]).map_err(|e| e.to_string())
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

pub fn encode_ppm(frame: &Frame) -> Vec<u8> {
    encode_ppm_with_comment(frame, None)
}

/// Encodes with an optional single-line header comment.
pub fn encode_ppm_with_comment(frame: &Frame, comment: Option<&str>) -> Vec<u8> {
    let mut out = b"P6\n".to_vec();
    if let Some(c) = comment {
        out.extend(format!("# {}\n", c.replace('\n', " ")).into_bytes());
    }
    out.extend(format!("{} {}\n255\n", frame.width, frame.height).into_bytes());
    out.extend(frame.to_rgb8());
    out
}

pub fn write_ppm(path: &Path, frame: &Frame) -> Result<()> {
    write_ppm_with_comment(path, frame, None)
}

pub fn write_ppm_with_comment(path: &Path, frame: &Frame, comment: Option<&str>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_ppm_with_comment(frame, comment))?;
    Ok(())
}

/// Numbered `.ppm` files of a directory, ordered by the last run of digits in
/// their file names.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(list_numbered_frames(dir)?.into_iter().map(|(_, p)| p).collect())
}

/// Like `list_frames`, keeping each file's number.
pub fn list_numbered_frames(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut numbered = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if !path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("ppm"))
        {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        if let Some(n) = trailing_number(stem) {
            numbered.push((n, path));
        }
    }
    numbered.sort();
    Ok(numbered)
}

fn trailing_number(stem: &str) -> Option<u64> {
    let end = stem.rfind(|c: char| c.is_ascii_digit())? + 1;
    let start = stem[..end]
        .rfind(|c: char| !c.is_ascii_digit())
        .map_or(0, |i| i + 1);
    stem[start..end].parse().ok()
}
