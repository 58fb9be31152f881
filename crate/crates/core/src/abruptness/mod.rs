//! Per-frame abrupt-motion detection.
//!
//! The global degree `g` measures how evenly the edge-refined matching error
//! is spread over the frame; the local degree `l` is the Hellinger distance
//! between color mixtures of the target region in consecutive frames. The
//! two are combined into `a = 0.55 + g (l - 0.45)` and a frame is abrupt when
//! `g > T` or `a > 0.5`.

mod gmm;

use nalgebra::Vector3;
use rand::Rng;

pub use gmm::{fit_gmm, fit_gmm_traced, Component, Gmm, COVARIANCE_FLOOR, EM_TOLERANCE, MAX_EM_ITERATIONS};
pub(crate) use gmm::log_add_exp;

use crate::error::{Error, Result};
use crate::imaging::{dilate3, ScalarMap};

pub const DEFAULT_THRESHOLD: f64 = 0.2;
pub const DEFAULT_HELLINGER_SAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbruptnessReport {
    pub g: f64,
    pub l: f64,
    pub a: f64,
    pub abrupt: bool,
}

/// `R = Γ / (DIL(D) + 1)` for a binary edge map `D`.
pub fn refined_error(gamma: &ScalarMap, edges: &ScalarMap) -> Result<ScalarMap> {
    if gamma.width != edges.width || gamma.height != edges.height {
        return Err(Error::DimensionMismatch(
            gamma.width,
            gamma.height,
            edges.width,
            edges.height,
        ));
    }
    let dilated = dilate3(edges);
    Ok(ScalarMap {
        width: gamma.width,
        height: gamma.height,
        values: gamma
            .values
            .iter()
            .zip(&dilated.values)
            .map(|(g, d)| g / (d + 1.0))
            .collect(),
    })
}

/// `g = sum(R) / (max(R) * U)`, zero for an all-zero map.
pub fn global_abrupt_degree(refined: &ScalarMap) -> f64 {
    let max = refined.max();
    if !(max > 0.0) || refined.values.is_empty() {
        return 0.0;
    }
    (refined.sum() / (max * refined.values.len() as f64)).clamp(0.0, 1.0)
}

/// Monte Carlo Hellinger distance between two mixtures.
///
/// The Bhattacharyya coefficient `∫ sqrt(p q)` is estimated by importance
/// sampling from `(p + q) / 2`; the result is `sqrt(1 - BC)` clamped to `[0, 1]`.
pub fn hellinger_distance<R: Rng + ?Sized>(p: &Gmm, q: &Gmm, samples: usize, rng: &mut R) -> f64 {
    if samples == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for _ in 0..samples {
        let x: Vector3<f64> = if rng.random::<bool>() {
            p.sample(rng)
        } else {
            q.sample(rng)
        };
        let lp = p.log_pdf(&x);
        let lq = q.log_pdf(&x);
        let lm = log_add_exp(lp, lq) - std::f64::consts::LN_2;
        let w = (0.5 * (lp + lq) - lm).exp();
        if w.is_finite() {
            acc += w;
        }
    }
    let bc = acc / samples as f64;
    (1.0 - bc).clamp(0.0, 1.0).sqrt()
}

/// Local abrupt degree between the colors of the target region in two frames.
pub fn local_abrupt_degree<R: Rng + ?Sized>(
    previous: &[[f64; 3]],
    current: &[[f64; 3]],
    components: usize,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let p = fit_gmm(previous, components, rng)?;
    let q = fit_gmm(current, components, rng)?;
    Ok(hellinger_distance(&p, &q, samples, rng))
}

/// Combines the two degrees. `a == 0.5` exactly is not abrupt.
pub fn abruptness_decision(g: f64, l: f64, threshold: f64) -> AbruptnessReport {
    let a = 0.55 + g * (l - 0.45);
    AbruptnessReport {
        g,
        l,
        a,
        abrupt: g > threshold || a > 0.5,
    }
}
