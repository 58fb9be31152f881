//! Full-covariance Gaussian mixtures over RGB colors, fitted by EM.

use std::f64::consts::{LN_2, PI};

use nalgebra::{Cholesky, Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Smallest eigenvalue allowed in a component covariance.
pub const COVARIANCE_FLOOR: f64 = 1e-4;
pub const MAX_EM_ITERATIONS: usize = 100;
pub const EM_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct Component {
    pub weight: f64,
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    chol: Matrix3<f64>,
    log_norm: f64,
}

impl Component {
    pub fn new(weight: f64, mean: Vector3<f64>, covariance: Matrix3<f64>) -> Self {
        let covariance = floor_covariance(covariance);
        let chol = Cholesky::new(covariance)
            .expect("floored covariance is positive definite")
            .l();
        let log_det = 2.0 * (0..3).map(|i| chol[(i, i)].ln()).sum::<f64>();
        Component {
            weight,
            mean,
            covariance,
            chol,
            log_norm: -0.5 * (3.0 * (2.0 * PI).ln() + log_det),
        }
    }

    /// Log density of the (unweighted) component.
    pub fn log_pdf(&self, x: &Vector3<f64>) -> f64 {
        let z = self
            .chol
            .solve_lower_triangular(&(x - self.mean))
            .expect("cholesky factor is invertible");
        self.log_norm - 0.5 * z.norm_squared()
    }
}

#[derive(Clone, Debug)]
pub struct Gmm {
    components: Vec<Component>,
}

impl Gmm {
    /// Builds a mixture from `(weight, mean, covariance)` triples; weights are
    /// renormalized and covariances floored.
    pub fn new(parts: impl IntoIterator<Item = (f64, [f64; 3], Matrix3<f64>)>) -> Result<Self> {
        let parts: Vec<_> = parts.into_iter().collect();
        let total: f64 = parts.iter().map(|p| p.0).sum();
        if parts.is_empty() || !(total > 0.0) || parts.iter().any(|p| !(p.0 > 0.0)) {
            return Err(Error::NoSamples);
        }
        Ok(Gmm {
            components: parts
                .into_iter()
                .map(|(w, m, c)| Component::new(w / total, Vector3::from(m), c))
                .collect(),
        })
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn log_pdf(&self, x: &Vector3<f64>) -> f64 {
        log_sum_exp(self.components.iter().map(|c| c.weight.ln() + c.log_pdf(x)))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector3<f64> {
        let mut u: f64 = rng.random();
        let mut chosen = &self.components[self.components.len() - 1];
        for c in &self.components {
            if u < c.weight {
                chosen = c;
                break;
            }
            u -= c.weight;
        }
        let z = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
        chosen.mean + chosen.chol * z
    }
}

pub(crate) fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln(exp(a) + exp(b))`.
#[inline]
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if a == b {
        return a + LN_2;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn floor_covariance(c: Matrix3<f64>) -> Matrix3<f64> {
    let sym = (c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().all(|&v| v >= COVARIANCE_FLOOR) {
        return sym;
    }
    let clipped = eig.eigenvalues.map(|v| v.max(COVARIANCE_FLOOR));
    eig.eigenvectors * Matrix3::from_diagonal(&clipped) * eig.eigenvectors.transpose()
}

/// Fits a `k`-component mixture with k-means++ seeding followed by EM (at most
/// [`MAX_EM_ITERATIONS`] rounds, stopping once the mean log-likelihood moves
/// less than [`EM_TOLERANCE`]).
///
/// With fewer samples than components every sample becomes its own
/// near-delta component.
pub fn fit_gmm<R: Rng + ?Sized>(samples: &[[f64; 3]], k: usize, rng: &mut R) -> Result<Gmm> {
    fit_gmm_traced(samples, k, rng).map(|(g, _)| g)
}

/// Like [`fit_gmm`], also returning the mean log-likelihood after each EM round.
pub fn fit_gmm_traced<R: Rng + ?Sized>(
    samples: &[[f64; 3]],
    k: usize,
    rng: &mut R,
) -> Result<(Gmm, Vec<f64>)> {
    if samples.is_empty() || k == 0 {
        return Err(Error::NoSamples);
    }
    let xs: Vec<Vector3<f64>> = samples.iter().map(|&s| Vector3::from(s)).collect();
    let n = xs.len();
    if n < k {
        let parts = xs
            .iter()
            .map(|x| (1.0, [x[0], x[1], x[2]], Matrix3::zeros()));
        return Ok((Gmm::new(parts)?, Vec::new()));
    }

    // k-means++ seeding, then one hard assignment to initialize the mixture
    let centers = kmeans_pp(&xs, k, rng);
    let mut resp = vec![0.0; n * k];
    for (i, x) in xs.iter().enumerate() {
        let nearest = (0..k)
            .min_by(|&a, &b| {
                (x - centers[a])
                    .norm_squared()
                    .total_cmp(&(x - centers[b]).norm_squared())
            })
            .unwrap();
        resp[i * k + nearest] = 1.0;
    }
    let mut gmm = m_step(&xs, &resp, k, &centers);

    let mut trace = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..MAX_EM_ITERATIONS {
        // E-step
        let mut ll = 0.0;
        let mut logs = vec![0.0; k];
        for (i, x) in xs.iter().enumerate() {
            for (j, c) in gmm.components.iter().enumerate() {
                logs[j] = c.weight.ln() + c.log_pdf(x);
            }
            let norm = log_sum_exp(logs.iter().copied());
            ll += norm;
            for j in 0..k {
                resp[i * k + j] = (logs[j] - norm).exp();
            }
        }
        let mean_ll = ll / n as f64;
        trace.push(mean_ll);
        if (mean_ll - prev).abs() < EM_TOLERANCE {
            break;
        }
        prev = mean_ll;
        let means: Vec<_> = gmm.components.iter().map(|c| c.mean).collect();
        gmm = m_step(&xs, &resp, k, &means);
    }
    Ok((gmm, trace))
}

fn kmeans_pp<R: Rng + ?Sized>(xs: &[Vector3<f64>], k: usize, rng: &mut R) -> Vec<Vector3<f64>> {
    let mut centers = vec![xs[rng.random_range(0..xs.len())]];
    let mut d2: Vec<f64> = xs.iter().map(|x| (x - centers[0]).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = xs.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            rng.random_range(0..xs.len())
        };
        let c = xs[pick];
        for (d, x) in d2.iter_mut().zip(xs) {
            *d = d.min((x - c).norm_squared());
        }
        centers.push(c);
    }
    centers
}

fn m_step(xs: &[Vector3<f64>], resp: &[f64], k: usize, fallback_means: &[Vector3<f64>]) -> Gmm {
    let n = xs.len();
    let mut components = Vec::with_capacity(k);
    for j in 0..k {
        let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
        let mean = if nk > 1e-12 {
            xs.iter()
                .enumerate()
                .fold(Vector3::zeros(), |acc, (i, x)| acc + x * resp[i * k + j])
                / nk
        } else {
            fallback_means[j]
        };
        let cov = if nk > 1e-12 {
            xs.iter().enumerate().fold(Matrix3::zeros(), |acc, (i, x)| {
                let d = x - mean;
                acc + d * d.transpose() * resp[i * k + j]
            }) / nk
        } else {
            Matrix3::zeros()
        };
        components.push((nk.max(1e-12), mean, cov));
    }
    let total: f64 = components.iter().map(|c| c.0).sum();
    Gmm {
        components: components
            .into_iter()
            .map(|(w, m, c)| Component::new(w / total, m, c))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_samples_single_component() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = fit_gmm(&[[0.2, 0.4, 0.6]; 20], 1, &mut rng).unwrap();
        let c = &g.components()[0];
        assert_abs_diff_eq!(c.weight, 1.0);
        assert_abs_diff_eq!(c.mean, Vector3::new(0.2, 0.4, 0.6), epsilon = 1e-12);
        assert_abs_diff_eq!(c.covariance, Matrix3::identity() * COVARIANCE_FLOOR, epsilon = 1e-12);
    }

    #[test]
    fn single_component_is_the_mle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<[f64; 3]> = (0..200)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>() * 0.5, rng.random::<f64>() * 0.2 + 0.3])
            .collect();
        let g = fit_gmm(&xs, 1, &mut rng).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().fold(Vector3::zeros(), |a, x| a + Vector3::from(*x)) / n;
        let cov = xs.iter().fold(Matrix3::zeros(), |a, x| {
            let d = Vector3::from(*x) - mean;
            a + d * d.transpose()
        }) / n;
        let c = &g.components()[0];
        assert_abs_diff_eq!(c.mean, mean, epsilon = 1e-12);
        assert_abs_diff_eq!(c.covariance, cov, epsilon = 1e-12);
    }

    #[test]
    fn separated_clusters_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut xs = Vec::new();
        for i in 0..300 {
            let base = if i < 90 { 0.1 } else { 0.8 };
            let jitter = |r: &mut ChaCha8Rng| (r.random::<f64>() - 0.5) * 0.01;
            xs.push([base + jitter(&mut rng), base + jitter(&mut rng), base + jitter(&mut rng)]);
        }
        let g = fit_gmm(&xs, 2, &mut rng).unwrap();
        let mut comps: Vec<_> = g.components().iter().collect();
        comps.sort_by(|a, b| a.mean[0].total_cmp(&b.mean[0]));
        for (c, (center, share)) in comps.iter().zip([(0.1, 0.3), (0.8, 0.7)]) {
            for d in 0..3 {
                assert!((c.mean[d] - center).abs() < 1e-2, "{:?}", c.mean);
            }
            assert!((c.weight - share).abs() < 0.05);
        }
    }

    #[test]
    fn too_few_samples_fall_back_to_deltas() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = fit_gmm(&[[0.1, 0.1, 0.1], [0.9, 0.9, 0.9]], 3, &mut rng).unwrap();
        assert_eq!(g.len(), 2);
        for c in g.components() {
            assert_abs_diff_eq!(c.weight, 0.5);
            assert_abs_diff_eq!(c.covariance, Matrix3::identity() * COVARIANCE_FLOOR, epsilon = 1e-12);
        }
        assert!(matches!(fit_gmm(&[], 2, &mut rng), Err(Error::NoSamples)));
    }

    #[test]
    fn weights_sum_to_one_and_fit_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<[f64; 3]> = (0..150).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let a = fit_gmm(&xs, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = fit_gmm(&xs, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let total: f64 = a.components().iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() < 1e-9);
        for (ca, cb) in a.components().iter().zip(b.components()) {
            assert_eq!(ca.mean, cb.mean);
            assert!(ca.weight > 0.0);
        }
    }

    #[test]
    fn log_pdf_matches_closed_form() {
        let g = Gmm::new([(1.0, [0.0; 3], Matrix3::identity() * 0.25)]).unwrap();
        let x = Vector3::new(0.5, 0.0, 0.0);
        let expected = -1.5 * (2.0 * PI * 0.25).ln() - 0.5 * 0.25 / 0.25;
        assert_abs_diff_eq!(g.log_pdf(&x), expected, epsilon = 1e-12);
    }
}
