//! Stochastic approximation sampling over a partitioned state space.
//!
//! The chain targets `λ_J p(X) / ω_J`: the posterior `p` weighted by the
//! motion confidence of the state's cell and divided by that cell's density
//! of states. After every round the density of states absorbs the smoothed
//! visit frequencies, pushing the chain out of over-visited cells.

mod chain;
mod dos;
mod proposal;

pub use chain::{acceptance_prob, log_acceptance, run_chain, ChainOutput, IterationStats};
pub use dos::{gain, DensityOfStates, DosUpdate, Smoother};
pub use proposal::{
    region_selection_probs, restrict_probs, restrict_sample_space, ActiveSpace, PixelProposal,
    ProposalKernel, MAX_PROPOSAL_ATTEMPTS,
};

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub theta: f64,
    pub beta: f64,
    /// Proposal standard deviations for `(x, y, s)`.
    pub sigma: [f64; 3],
    pub iterations: usize,
    pub samples_per_iteration: usize,
    /// Gain constant; `None` means a quarter of the total sample count.
    pub k0: Option<f64>,
    pub tau: f64,
    /// Kernel cutoff `C` in pixels.
    pub cutoff: f64,
    /// Desired visit frequencies per cell; `None` means uniform.
    pub pi_target: Option<Vec<f64>>,
    pub lambda_floor: f64,
    pub dos_update: DosUpdate,
    pub lock_scale: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            theta: 0.8,
            beta: 0.2,
            sigma: [8.0, 4.0, 0.013],
            iterations: 120,
            samples_per_iteration: 5,
            k0: None,
            tau: 1000.0,
            cutoff: 100.0,
            pi_target: None,
            lambda_floor: 1e-6,
            dos_update: DosUpdate::Standard,
            lock_scale: true,
        }
    }
}

impl SamplerConfig {
    pub fn k0(&self) -> f64 {
        self.k0
            .unwrap_or((self.iterations * self.samples_per_iteration) as f64 / 4.0)
    }

    /// `π` restricted to `space` and renormalized; zero outside.
    pub fn desired_frequencies(&self, m: usize, space: &ActiveSpace) -> Vec<f64> {
        let mut pi = vec![0.0; m];
        let base = |c: usize| match &self.pi_target {
            Some(p) => p.get(c).copied().unwrap_or(0.0),
            None => 1.0,
        };
        let total: f64 = space.cells().iter().map(|&c| base(c)).sum();
        if total > 0.0 {
            for &c in space.cells() {
                pi[c] = base(c) / total;
            }
        }
        pi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn acceptance_examples() {
        assert_eq!(acceptance_prob(0.3, 0.3, 0.5, 0.5, 0.0, 0.0, 0.1, 0.1), 1.0);
        assert_abs_diff_eq!(
            acceptance_prob(0.25, 0.5, 0.5, 0.5, -1.0, -1.0, 0.1, 0.1),
            0.5,
            epsilon = 1e-12
        );
        let a = acceptance_prob(0.5, 0.5, 1e-6, 0.8, 0.0, 0.0, 0.1, 0.1);
        assert!(a < 2e-6);
        assert_eq!(log_acceptance(f64::NEG_INFINITY, f64::NEG_INFINITY, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0), None);
        assert_eq!(acceptance_prob(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn desired_frequencies_are_renormalized() {
        let cfg = SamplerConfig::default();
        let space = ActiveSpace::from_cells(10, [2, 3, 7, 9]);
        let pi = cfg.desired_frequencies(10, &space);
        assert_eq!(pi[2], 0.25);
        assert_eq!(pi[0], 0.0);
        assert_eq!(cfg.k0(), 150.0);
    }

    /// Three states in three cells, proposal uniform over the other two.
    struct Toy;

    impl ProposalKernel for Toy {
        type State = usize;
        fn cell(&self, s: &usize) -> usize {
            *s
        }
        fn propose<R: rand::Rng + ?Sized>(&self, from: &usize, rng: &mut R) -> usize {
            (from + 1 + rng.random_range(0..2)) % 3
        }
        fn log_density(&self, _: &usize, _: &usize) -> f64 {
            0.5f64.ln()
        }
    }

    fn toy_run(seed: u64, cfg: &SamplerConfig, reject_everything: bool) -> ChainOutput<usize> {
        let space = ActiveSpace::full(3);
        let smoother = Smoother::from_centers(&[(0.0, 0.0), (500.0, 0.0), (1000.0, 0.0)], 100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let post = [0.2f64, 0.3, 0.5];
        run_chain(
            &Toy,
            |&s| Ok(if reject_everything && s != 0 { f64::NEG_INFINITY } else { post[s].ln() }),
            0,
            &[0.5, 0.5, 0.5],
            DensityOfStates::uniform(3),
            &space,
            &smoother,
            cfg,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn rejected_candidates_repeat_the_current_state() {
        let cfg = SamplerConfig {
            iterations: 1,
            samples_per_iteration: 1,
            ..SamplerConfig::default()
        };
        let out = toy_run(1, &cfg, true);
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.samples[0].0, 0);
    }

    #[test]
    fn chain_is_deterministic_and_sized() {
        let cfg = SamplerConfig {
            iterations: 30,
            samples_per_iteration: 5,
            ..SamplerConfig::default()
        };
        let a = toy_run(9, &cfg, false);
        let b = toy_run(9, &cfg, false);
        assert_eq!(a.samples.len(), 150);
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.dos, b.dos);
        assert_eq!(a.iterations.len(), 30);
    }

    #[test]
    fn frozen_chain_matches_target_frequencies() {
        let cfg = SamplerConfig {
            iterations: 40_000,
            samples_per_iteration: 5,
            dos_update: DosUpdate::Frozen,
            ..SamplerConfig::default()
        };
        let out = toy_run(4, &cfg, false);
        let mut counts = [0.0; 3];
        for (s, _) in &out.samples {
            counts[*s] += 1.0;
        }
        let n = out.samples.len() as f64;
        for (c, p) in counts.iter().zip([0.2, 0.3, 0.5]) {
            assert!((c / n - p).abs() < 0.01, "{counts:?}");
        }
    }
}
