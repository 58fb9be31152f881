//! Synthetic sequences with a known target path: a textured colored
//! rectangle moving over a static textured background, with optional
//! distractor rectangles, sensor noise and teleports.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{BoundingBox, GroundTruth};
use crate::error::{Error, Result};
use crate::imaging::{hsv_to_rgb, write_ppm_with_comment, Frame, PixelRect};

const TELEPORT_ATTEMPTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub target_w: usize,
    pub target_h: usize,
    /// Target hue in degrees; saturation and value vary with its texture.
    pub target_hue: f64,
    /// Largest per-axis speed of the smooth motion, pixels per frame.
    pub max_step: i64,
    /// Teleport on every frame `t` (1-based, `t >= 2`) with `t % teleport_every == 0`;
    /// 0 disables teleports.
    pub teleport_every: usize,
    /// Minimum teleport distance as a fraction of the frame diagonal.
    pub min_jump: f64,
    pub distractors: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            width: 320,
            height: 240,
            frames: 64,
            target_w: 36,
            target_h: 28,
            target_hue: 300.0,
            max_step: 3,
            teleport_every: 8,
            min_jump: 0.3,
            distractors: 3,
            noise: 0.02,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticSequence {
    pub frames: Vec<Frame>,
    pub truth: GroundTruth,
    /// 1-based frames on which the target teleported.
    pub teleports: Vec<usize>,
    pub seed: u64,
}

impl SyntheticSequence {
    /// First-frame target box.
    pub fn init_box(&self) -> PixelRect {
        let b = self.truth.boxes[&1];
        PixelRect {
            x0: b.x as usize,
            y0: b.y as usize,
            x1: (b.x + b.w) as usize,
            y1: (b.y + b.h) as usize,
        }
    }

    /// Writes `frame_0001.ppm`, ... into `dir/frames` and the truth to `dir/truth.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let frames_dir = dir.join("frames");
        fs::create_dir_all(&frames_dir)?;
        let comment = format!("seed={}", self.seed);
        for (i, f) in self.frames.iter().enumerate() {
            let path = frames_dir.join(format!("frame_{:04}.ppm", i + 1));
            write_ppm_with_comment(&path, f, Some(&comment))?;
        }
        let mut out = format!("# {comment}\n").into_bytes();
        self.truth.write_csv(&mut out)?;
        fs::write(dir.join("truth.csv"), out)?;
        Ok(())
    }
}

/// Moving rectangle with a fixed color pattern.
struct Sprite {
    x: i64,
    y: i64,
    vx: i64,
    vy: i64,
    w: usize,
    h: usize,
    texture: Vec<[f64; 3]>,
}

impl Sprite {
    fn textured<R: Rng>(w: usize, h: usize, hue: f64, rng: &mut R) -> Vec<[f64; 3]> {
        (0..w * h)
            .map(|_| {
                let hh = (hue + rng.random_range(-8.0..8.0)).rem_euclid(360.0);
                let s = rng.random_range(0.65..0.95);
                let v = rng.random_range(0.45..1.0);
                hsv_to_rgb([hh, s, v])
            })
            .collect()
    }

    fn step<R: Rng>(&mut self, max_step: i64, width: usize, height: usize, rng: &mut R) {
        self.vx = (self.vx + rng.random_range(-1..=1)).clamp(-max_step, max_step);
        self.vy = (self.vy + rng.random_range(-1..=1)).clamp(-max_step, max_step);
        let (xmax, ymax) = ((width - self.w) as i64, (height - self.h) as i64);
        self.x += self.vx;
        self.y += self.vy;
        if self.x < 0 || self.x > xmax {
            self.vx = -self.vx;
            self.x = self.x.clamp(0, xmax);
        }
        if self.y < 0 || self.y > ymax {
            self.vy = -self.vy;
            self.y = self.y.clamp(0, ymax);
        }
    }

    fn paint(&self, canvas: &mut [[f64; 3]], width: usize) {
        for j in 0..self.h {
            let row = (self.y as usize + j) * width + self.x as usize;
            canvas[row..row + self.w].copy_from_slice(&self.texture[j * self.w..(j + 1) * self.w]);
        }
    }

    fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }
}

fn background<R: Rng>(width: usize, height: usize, rng: &mut R) -> Vec<[f64; 3]> {
    let fx = rng.random_range(0.03..0.08);
    let fy = rng.random_range(0.03..0.08);
    let (px, py) = (rng.random_range(0.0..6.3), rng.random_range(0.0..6.3));
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let wave = (x as f64 * fx + px).sin() * (y as f64 * fy + py).sin();
            let v = 0.4 + 0.12 * wave + rng.random_range(-0.1..0.1);
            out.push([v, v * 0.92, v * 0.8]);
        }
    }
    out
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticSequence> {
    let (w, h) = (spec.width, spec.height);
    if spec.target_w == 0 || spec.target_h == 0 || spec.target_w > w || spec.target_h > h {
        return Err(Error::Infeasible(format!(
            "target {}x{} does not fit a {w}x{h} frame",
            spec.target_w, spec.target_h
        )));
    }
    if spec.frames == 0 {
        return Err(Error::Infeasible("no frames requested".into()));
    }
    if !(spec.noise >= 0.0) {
        return Err(Error::Infeasible(format!("noise {} is negative", spec.noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise.max(1e-12)).expect("finite noise");
    let base = background(w, h, &mut rng);

    let place = |rng: &mut ChaCha8Rng, sw: usize, sh: usize| {
        (
            rng.random_range(0..=(w - sw) as i64),
            rng.random_range(0..=(h - sh) as i64),
        )
    };
    let mut distractors: Vec<Sprite> = (0..spec.distractors)
        .map(|i| {
            let sw = rng.random_range(20..=40).min(w);
            let sh = rng.random_range(16..=32).min(h);
            let (x, y) = place(&mut rng, sw, sh);
            // hues well away from the target's
            let hue = spec.target_hue + 90.0 + 180.0 * i as f64 / spec.distractors.max(1) as f64;
            Sprite {
                x,
                y,
                vx: 0,
                vy: 0,
                w: sw,
                h: sh,
                texture: Sprite::textured(sw, sh, hue, &mut rng),
            }
        })
        .collect();
    let (x, y) = place(&mut rng, spec.target_w, spec.target_h);
    let mut target = Sprite {
        x,
        y,
        vx: 0,
        vy: 0,
        w: spec.target_w,
        h: spec.target_h,
        texture: Sprite::textured(spec.target_w, spec.target_h, spec.target_hue, &mut rng),
    };

    let diagonal = (w as f64).hypot(h as f64);
    let mut frames = Vec::with_capacity(spec.frames);
    let mut truth = GroundTruth::default();
    let mut teleports = Vec::new();
    for t in 1..=spec.frames {
        if t > 1 {
            for d in &mut distractors {
                d.step(spec.max_step, w, h, &mut rng);
            }
            if spec.teleport_every > 0 && t % spec.teleport_every == 0 {
                let from = target.center();
                let mut placed = false;
                for _ in 0..TELEPORT_ATTEMPTS {
                    let (nx, ny) = place(&mut rng, target.w, target.h);
                    let cx = nx as f64 + target.w as f64 / 2.0;
                    let cy = ny as f64 + target.h as f64 / 2.0;
                    if (cx - from.0).hypot(cy - from.1) >= spec.min_jump * diagonal {
                        target.x = nx;
                        target.y = ny;
                        target.vx = 0;
                        target.vy = 0;
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    return Err(Error::Infeasible(format!(
                        "no teleport destination {:.1} px away at frame {t}",
                        spec.min_jump * diagonal
                    )));
                }
                teleports.push(t);
            } else {
                target.step(spec.max_step, w, h, &mut rng);
            }
        }
        let mut canvas = base.clone();
        for d in &distractors {
            d.paint(&mut canvas, w);
        }
        target.paint(&mut canvas, w);
        let bytes: Vec<u8> = canvas
            .iter()
            .flat_map(|p| *p)
            .map(|c| {
                let v = if spec.noise > 0.0 { c + noise.sample(&mut rng) } else { c };
                (v.clamp(0.0, 1.0) * 255.0).round() as u8
            })
            .collect();
        frames.push(Frame::from_rgb8(w, h, &bytes)?);
        truth.boxes.insert(
            t,
            BoundingBox::new(
                target.x as f64,
                target.y as f64,
                target.w as f64,
                target.h as f64,
            ),
        );
    }
    Ok(SyntheticSequence {
        frames,
        truth,
        teleports,
        seed: spec.seed,
    })
}
