//! Box metrics, precision / success curves and ground-truth files.

pub mod synthetic;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const PRECISION_RADIUS: f64 = 20.0;

/// Axis-aligned box with top-left corner `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BoundingBox { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BoundingBox {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }
}

pub fn center_location_error(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

/// Intersection over union of the continuous rectangles.
pub fn voc_overlap(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    // areas from the same edge arithmetic as the intersection, so a box
    // overlaps itself exactly
    let edge_area = |r: &BoundingBox| ((r.x + r.w) - r.x) * ((r.y + r.h) - r.y);
    let union = edge_area(a) + edge_area(b) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Integers `0..=50`.
pub fn precision_thresholds() -> Vec<f64> {
    (0..=50).map(f64::from).collect()
}

/// 101 uniform points on `[0, 1]`.
pub fn success_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Fraction of frames with error `<= r`.
pub fn precision_at(cle: &[f64], r: f64) -> f64 {
    if cle.is_empty() {
        return 0.0;
    }
    cle.iter().filter(|&&e| e <= r).count() as f64 / cle.len() as f64
}

/// Fraction of frames with overlap `> tau`.
pub fn success_at(vor: &[f64], tau: f64) -> f64 {
    if vor.is_empty() {
        return 0.0;
    }
    vor.iter().filter(|&&v| v > tau).count() as f64 / vor.len() as f64
}

pub fn precision_curve(cle: &[f64], thresholds: &[f64]) -> Vec<(f64, f64)> {
    thresholds.iter().map(|&r| (r, precision_at(cle, r))).collect()
}

pub fn success_curve(vor: &[f64], thresholds: &[f64]) -> Vec<(f64, f64)> {
    thresholds.iter().map(|&t| (t, success_at(vor, t))).collect()
}

/// Trapezoid rule over the curve's own abscissae.
pub fn area_under_curve(curve: &[(f64, f64)]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// One box per frame, keyed by 1-based frame number.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    pub boxes: BTreeMap<usize, BoundingBox>,
}

impl GroundTruth {
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let want = ["frame", "x", "y", "w", "h"];
        if headers.iter().collect::<Vec<_>>() != want {
            return Err(Error::Parse {
                what: "ground truth",
                line: 1,
                message: format!("expected header {}", want.join(",")),
            });
        }
        let mut boxes = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad = |message: String| Error::Parse {
                what: "ground truth",
                line,
                message,
            };
            let frame: usize = rec[0].parse().map_err(|e| bad(format!("frame: {e}")))?;
            let mut v = [0.0; 4];
            for (k, slot) in v.iter_mut().enumerate() {
                *slot = rec[k + 1]
                    .parse()
                    .map_err(|e| bad(format!("{}: {e}", want[k + 1])))?;
            }
            if boxes.insert(frame, BoundingBox::new(v[0], v[1], v[2], v[3])).is_some() {
                return Err(bad(format!("duplicate frame {frame}")));
            }
        }
        Ok(GroundTruth { boxes })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "frame,x,y,w,h")?;
        for (f, b) in &self.boxes {
            writeln!(out, "{f},{},{},{},{}", b.x, b.y, b.w, b.h)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub frames: usize,
    pub mean_cle: f64,
    pub mean_vor: f64,
    pub precision_at_20: f64,
    pub success_auc: f64,
    pub cle: Vec<f64>,
    pub vor: Vec<f64>,
    pub precision: Vec<(f64, f64)>,
    pub success: Vec<(f64, f64)>,
}

impl EvalSummary {
    pub fn write_summary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "frames = {}", self.frames)?;
        writeln!(out, "average_cle = {}", self.mean_cle)?;
        writeln!(out, "average_vor = {}", self.mean_vor)?;
        writeln!(out, "precision_at_20 = {}", self.precision_at_20)?;
        writeln!(out, "success_auc = {}", self.success_auc)
    }
}

pub fn write_curve<W: Write>(curve: &[(f64, f64)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "threshold,value")?;
    for (t, v) in curve {
        writeln!(out, "{t},{v}")?;
    }
    Ok(())
}

/// Scores tracked boxes against the truth. Every tracked frame must have a
/// truth entry, and every truth frame after the first tracked one must have
/// been tracked.
pub fn evaluate(tracked: &BTreeMap<usize, BoundingBox>, truth: &GroundTruth) -> Result<EvalSummary> {
    let Some(&first) = tracked.keys().next() else {
        return Err(Error::EmptySamples);
    };
    let no_truth: Vec<usize> = tracked
        .keys()
        .filter(|f| !truth.boxes.contains_key(f))
        .copied()
        .collect();
    let untracked: Vec<usize> = truth
        .boxes
        .keys()
        .filter(|&&f| f >= first && !tracked.contains_key(&f))
        .copied()
        .collect();
    if !no_truth.is_empty() || !untracked.is_empty() {
        return Err(Error::Parse {
            what: "results",
            line: 0,
            message: format!(
                "frame mismatch: missing from truth {no_truth:?}, missing from results {untracked:?}"
            ),
        });
    }
    let (cle, vor): (Vec<f64>, Vec<f64>) = tracked
        .iter()
        .map(|(f, b)| {
            let g = &truth.boxes[f];
            (center_location_error(b, g), voc_overlap(b, g))
        })
        .unzip();
    let n = cle.len() as f64;
    let success = success_curve(&vor, &success_thresholds());
    Ok(EvalSummary {
        frames: cle.len(),
        mean_cle: cle.iter().sum::<f64>() / n,
        mean_vor: vor.iter().sum::<f64>() / n,
        precision_at_20: precision_at(&cle, PRECISION_RADIUS),
        success_auc: area_under_curve(&success),
        precision: precision_curve(&cle, &precision_thresholds()),
        success,
        cle,
        vor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cle_examples() {
        let a = BoundingBox::new(10.0, 10.0, 20.0, 10.0);
        assert_eq!(center_location_error(&a, &a), 0.0);
        assert_eq!(center_location_error(&a, &BoundingBox::new(13.0, 14.0, 20.0, 10.0)), 5.0);
        assert_eq!(center_location_error(&a, &BoundingBox::new(10.0, 17.0, 20.0, 10.0)), 7.0);
    }

    #[test]
    fn vor_examples() {
        let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(voc_overlap(&a, &a), 1.0);
        assert_eq!(voc_overlap(&a, &BoundingBox::new(20.0, 0.0, 5.0, 5.0)), 0.0);
        assert_eq!(voc_overlap(&a, &BoundingBox::new(5.0, 0.0, 10.0, 10.0)), 50.0 / 150.0);
    }

    #[test]
    fn curve_examples() {
        assert_eq!(precision_at(&[5.0, 15.0, 25.0], 20.0), 2.0 / 3.0);
        assert_eq!(precision_at(&[0.0, 0.0], 0.0), 1.0);
        assert_eq!(precision_at(&[0.0, 0.5], 0.0), 0.5);
        assert_eq!(success_at(&[0.2, 0.8], 0.5), 0.5);

        let ones = success_curve(&[1.0; 4], &success_thresholds());
        assert!(ones[..100].iter().all(|p| p.1 == 1.0));
        assert!((area_under_curve(&ones) - 0.995).abs() < 1e-12);
        let zeros = success_curve(&[0.0; 4], &success_thresholds());
        assert_eq!(area_under_curve(&zeros), 0.0);
    }

    #[test]
    fn truth_round_trip_and_mismatch() {
        let mut gt = GroundTruth::default();
        gt.boxes.insert(1, BoundingBox::new(1.0, 2.0, 3.0, 4.0));
        gt.boxes.insert(2, BoundingBox::new(1.5, 2.0, 3.0, 4.0));
        gt.boxes.insert(3, BoundingBox::new(2.0, 2.0, 3.0, 4.0));
        let mut buf = Vec::new();
        gt.write_csv(&mut buf).unwrap();
        assert_eq!(GroundTruth::read_csv(&buf[..]).unwrap(), gt);

        let mut tracked: BTreeMap<usize, BoundingBox> = gt.boxes.clone().into_iter().skip(1).collect();
        let s = evaluate(&tracked, &gt).unwrap();
        assert_eq!((s.frames, s.mean_cle, s.mean_vor), (2, 0.0, 1.0));
        tracked.remove(&3);
        assert!(evaluate(&tracked, &gt).is_err());
        assert!(evaluate(&BTreeMap::new(), &gt).is_err());
        assert!(GroundTruth::read_csv("frame,x,y\n1,2,3\n".as_bytes()).is_err());
    }
}
