//! The self-adjusting Metropolis-Hastings chain.

use rand::Rng;

use super::dos::{gain, DensityOfStates, Smoother};
use super::proposal::{ActiveSpace, ProposalKernel};
use super::SamplerConfig;
use crate::error::{Error, Result};

/// Log of the acceptance probability
/// `min{1, p' λ' / ω' Q(X; X') / (p λ / ω Q(X'; X))}`.
///
/// Confidences must already be floored. Returns `None` when the ratio is not
/// a number; callers treat that as a rejection.
#[allow(clippy::too_many_arguments)]
pub fn log_acceptance(
    log_post_cand: f64,
    log_post_curr: f64,
    lambda_cand: f64,
    lambda_curr: f64,
    log_omega_cand: f64,
    log_omega_curr: f64,
    log_q_backward: f64,
    log_q_forward: f64,
) -> Option<f64> {
    let num = log_post_cand + lambda_cand.ln() - log_omega_cand + log_q_backward;
    let den = log_post_curr + lambda_curr.ln() - log_omega_curr + log_q_forward;
    let r = num - den;
    if r.is_nan() || (num == f64::NEG_INFINITY && den == f64::NEG_INFINITY) {
        return None;
    }
    Some(r.min(0.0))
}

/// Acceptance probability in `[0, 1]`; 0 for a non-finite ratio.
#[allow(clippy::too_many_arguments)]
pub fn acceptance_prob(
    post_cand: f64,
    post_curr: f64,
    lambda_cand: f64,
    lambda_curr: f64,
    log_omega_cand: f64,
    log_omega_curr: f64,
    q_backward: f64,
    q_forward: f64,
) -> f64 {
    log_acceptance(
        post_cand.ln(),
        post_curr.ln(),
        lambda_cand,
        lambda_curr,
        log_omega_cand,
        log_omega_curr,
        q_backward.ln(),
        q_forward.ln(),
    )
    .map_or(0.0, f64::exp)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    pub accepted: usize,
    pub log_posterior: f64,
    pub dos_entropy: f64,
}

#[derive(Clone, Debug)]
pub struct ChainOutput<S> {
    /// One retained state per MH step with its log-posterior.
    pub samples: Vec<(S, f64)>,
    pub dos: DensityOfStates,
    pub iterations: Vec<IterationStats>,
    /// MH steps whose ratio was not a number.
    pub invalid_ratios: usize,
}

impl<S> ChainOutput<S> {
    pub fn accepted(&self) -> usize {
        self.iterations.iter().map(|i| i.accepted).sum()
    }
}

/// Runs `cfg.iterations` rounds of `cfg.samples_per_iteration` MH steps,
/// each round followed by a smoothed density-of-states update.
///
/// `lambda` is the raw per-cell confidence; it is floored at
/// `cfg.lambda_floor` here. The desired frequencies are `cfg.pi_target`
/// (uniform when absent) renormalized over `space`.
#[allow(clippy::too_many_arguments)]
pub fn run_chain<K, F, R>(
    kernel: &K,
    mut log_posterior: F,
    start: K::State,
    lambda: &[f64],
    mut dos: DensityOfStates,
    space: &ActiveSpace,
    smoother: &Smoother,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<ChainOutput<K::State>>
where
    K: ProposalKernel,
    F: FnMut(&K::State) -> Result<f64>,
    R: Rng + ?Sized,
{
    let m = lambda.len();
    if dos.len() != m {
        return Err(Error::Posterior(format!("{} DOS cells for {m} confidences", dos.len())));
    }
    let floor = cfg.lambda_floor;
    let log_lambda: Vec<f64> = lambda.iter().map(|&l| l.max(floor).ln()).collect();
    let pi = cfg.desired_frequencies(m, space);
    let n = cfg.samples_per_iteration;
    let k0 = cfg.k0();

    let eval = |f: &mut F, s: &K::State| -> Result<f64> {
        let v = f(s).map_err(|e| Error::Posterior(e.to_string()))?;
        if v.is_nan() {
            return Err(Error::Posterior("log-posterior is NaN".into()));
        }
        Ok(v)
    };

    let mut current = start;
    let mut current_lp = eval(&mut log_posterior, &current)?;
    let mut current_cell = kernel.cell(&current);

    let mut out = ChainOutput {
        samples: Vec::with_capacity(cfg.iterations * n),
        dos: DensityOfStates::uniform(0),
        iterations: Vec::with_capacity(cfg.iterations),
        invalid_ratios: 0,
    };
    let mut visits = vec![0.0; m];

    for k in 1..=cfg.iterations {
        visits.iter_mut().for_each(|v| *v = 0.0);
        let mut accepted = 0;
        for _ in 0..n {
            let cand = kernel.propose(&current, rng);
            if cand == current {
                accepted += 1;
            } else {
                let cand_lp = eval(&mut log_posterior, &cand)?;
                let cand_cell = kernel.cell(&cand);
                let ratio = log_acceptance(
                    cand_lp,
                    current_lp,
                    log_lambda[cand_cell].exp(),
                    log_lambda[current_cell].exp(),
                    dos.log_omega[cand_cell],
                    dos.log_omega[current_cell],
                    kernel.log_density(&current, &cand),
                    kernel.log_density(&cand, &current),
                );
                match ratio {
                    Some(log_alpha) => {
                        if log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha {
                            current = cand;
                            current_lp = cand_lp;
                            current_cell = cand_cell;
                            accepted += 1;
                        }
                    }
                    None => out.invalid_ratios += 1,
                }
            }
            visits[current_cell] += 1.0;
            out.samples.push((current.clone(), current_lp));
        }
        let f = smoother.smooth(&visits, n as f64);
        dos.update(&f, &pi, gain(k, k0), cfg.dos_update, space.cells());
        out.iterations.push(IterationStats {
            iteration: k,
            accepted,
            log_posterior: current_lp,
            dos_entropy: dos.entropy(space.cells()),
        });
    }
    out.dos = dos;
    Ok(out)
}
