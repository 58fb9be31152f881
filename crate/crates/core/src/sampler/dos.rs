//! Density of states, the kernel-smoothed visit frequency and the gain sequence.

use crate::abruptness::log_add_exp;
use crate::grid::RegionGrid;

/// How `log ω` moves after each iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DosUpdate {
    /// `log ω_i += γ_k (f_i - π_i)`.
    #[default]
    Standard,
    /// `ω_i += exp(γ_k (f_i - π_i))`, evaluated as a log-sum-exp.
    Literal,
    /// No update; the chain is a plain Metropolis-Hastings sampler of `λ p / ω`.
    Frozen,
}

impl DosUpdate {
    pub fn name(&self) -> &'static str {
        match self {
            DosUpdate::Standard => "standard",
            DosUpdate::Literal => "literal",
            DosUpdate::Frozen => "frozen",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "standard" => Some(DosUpdate::Standard),
            "literal" => Some(DosUpdate::Literal),
            "frozen" => Some(DosUpdate::Frozen),
            _ => None,
        }
    }
}

/// `ω` stored as logarithms.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOfStates {
    pub log_omega: Vec<f64>,
}

impl DensityOfStates {
    /// `log ω_i = -τ λ_i`.
    pub fn from_confidence(lambda: &[f64], tau: f64) -> Self {
        DensityOfStates {
            log_omega: lambda.iter().map(|&l| -tau * l).collect(),
        }
    }

    pub fn uniform(m: usize) -> Self {
        DensityOfStates {
            log_omega: vec![0.0; m],
        }
    }

    pub fn len(&self) -> usize {
        self.log_omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_omega.is_empty()
    }

    /// Updates the cells listed in `active`; `f` and `pi` are indexed by cell.
    pub fn update(&mut self, f: &[f64], pi: &[f64], gamma: f64, mode: DosUpdate, active: &[usize]) {
        for &i in active {
            let step = gamma * (f[i] - pi[i]);
            let w = &mut self.log_omega[i];
            match mode {
                DosUpdate::Standard => *w += step,
                DosUpdate::Literal => *w = log_add_exp(*w, step),
                DosUpdate::Frozen => {}
            }
        }
    }

    /// Shannon entropy (nats) of `ω` normalized over `active`.
    pub fn entropy(&self, active: &[usize]) -> f64 {
        if active.is_empty() {
            return 0.0;
        }
        let max = active
            .iter()
            .map(|&i| self.log_omega[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = active.iter().map(|&i| (self.log_omega[i] - max).exp()).sum();
        let log_z = max + z.ln();
        active
            .iter()
            .map(|&i| {
                let lw = self.log_omega[i] - log_z;
                let w = lw.exp();
                if w > 0.0 {
                    -w * lw
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// `γ_k = k0 / max(k0, k)`.
#[inline]
pub fn gain(k: usize, k0: f64) -> f64 {
    k0 / k0.max(k as f64)
}

/// Sparse Nadaraya-Watson kernel over cell centers:
/// `W(z) = exp(-z^2 / 2)` for `z < C`, zero beyond, with `z` in pixels.
#[derive(Clone, Debug)]
pub struct Smoother {
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl Smoother {
    pub fn new(grid: &RegionGrid, cutoff: f64) -> Self {
        Self::from_centers(&(0..grid.len()).map(|c| grid.center(c)).collect::<Vec<_>>(), cutoff)
    }

    pub fn from_centers(centers: &[(f64, f64)], cutoff: f64) -> Self {
        let neighbors = centers
            .iter()
            .map(|&(xi, yi)| {
                centers
                    .iter()
                    .enumerate()
                    .filter_map(|(j, &(xj, yj))| {
                        let z = (xi - xj).hypot(yi - yj);
                        (z < cutoff).then(|| (j, (-0.5 * z * z).exp()))
                    })
                    .collect()
            })
            .collect();
        Smoother { neighbors }
    }

    /// `f_i = Σ_j W_ij r_j / n / Σ_j W_ij`.
    pub fn smooth(&self, visits: &[f64], n: f64) -> Vec<f64> {
        self.neighbors
            .iter()
            .map(|row| {
                let (num, den) = row
                    .iter()
                    .fold((0.0, 0.0), |(num, den), &(j, w)| (num + w * visits[j] / n, den + w));
                if den > 0.0 {
                    num / den
                } else {
                    0.0
                }
            })
            .collect()
    }
}
