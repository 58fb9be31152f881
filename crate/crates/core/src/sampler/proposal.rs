//! Sample-space restriction, region selection and the mixture proposal.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::abruptness::log_add_exp;
use crate::appearance::TargetState;
use crate::grid::RegionGrid;

pub const MAX_PROPOSAL_ATTEMPTS: usize = 100;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A proposal over some state type whose states fall into grid cells.
pub trait ProposalKernel {
    type State: Clone + PartialEq;

    /// Cell index `J_X` of a state.
    fn cell(&self, state: &Self::State) -> usize;

    fn propose<R: Rng + ?Sized>(&self, from: &Self::State, rng: &mut R) -> Self::State;

    /// `log Q(to; from)`.
    fn log_density(&self, to: &Self::State, from: &Self::State) -> f64;
}

/// The cells the chain may visit in one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSpace {
    cells: Vec<usize>,
    member: Vec<bool>,
}

impl ActiveSpace {
    pub fn full(m: usize) -> Self {
        ActiveSpace {
            cells: (0..m).collect(),
            member: vec![true; m],
        }
    }

    pub fn from_cells(m: usize, cells: impl IntoIterator<Item = usize>) -> Self {
        let mut member = vec![false; m];
        for c in cells {
            member[c] = true;
        }
        ActiveSpace {
            cells: (0..m).filter(|&c| member[c]).collect(),
            member,
        }
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn contains(&self, cell: usize) -> bool {
        self.member.get(cell).copied().unwrap_or(false)
    }
}

/// Full grid on abrupt frames, otherwise the 5x5 block of cells around the
/// previous estimate.
pub fn restrict_sample_space(abrupt: bool, previous: &TargetState, grid: &RegionGrid) -> ActiveSpace {
    if abrupt {
        return ActiveSpace::full(grid.len());
    }
    let x = previous.x.clamp(0.0, grid.width() as f64 - 1e-9);
    let y = previous.y.clamp(0.0, grid.height() as f64 - 1e-9);
    let cell = grid.cell_of(x, y).unwrap_or(0);
    ActiveSpace::from_cells(grid.len(), grid.neighborhood(cell, 2))
}

/// `θ` for cells with positive confidence, `1 - θ` otherwise, normalized.
pub fn region_selection_probs(lambda: &[f64], theta: f64) -> Vec<f64> {
    let weights: Vec<f64> = lambda
        .iter()
        .map(|&l| if l > 0.0 { theta } else { 1.0 - theta })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// `ρ̂` restricted to the active cells and renormalized; zero elsewhere.
pub fn restrict_probs(rho: &[f64], space: &ActiveSpace) -> Vec<f64> {
    let total: f64 = space.cells().iter().map(|&c| rho[c]).sum();
    let mut out = vec![0.0; rho.len()];
    for &c in space.cells() {
        out[c] = rho[c] / total;
    }
    out
}

/// `β N(·; X, Σ) + (1 - β) Q_a` over continuous target states.
///
/// `Q_a` picks a cell from the restricted `ρ̂` and a uniform position inside it;
/// its scale is a Gaussian step from the current one. With `lock_scale` the
/// scale never moves and drops out of the density.
#[derive(Clone, Debug)]
pub struct PixelProposal<'a> {
    grid: &'a RegionGrid,
    space: &'a ActiveSpace,
    rho: Vec<f64>,
    cumulative: Vec<(f64, usize)>,
    beta: f64,
    sigma: [f64; 3],
    lock_scale: bool,
}

impl<'a> PixelProposal<'a> {
    pub fn new(
        grid: &'a RegionGrid,
        space: &'a ActiveSpace,
        rho: &[f64],
        beta: f64,
        sigma: [f64; 3],
        lock_scale: bool,
    ) -> Self {
        let rho = restrict_probs(rho, space);
        let mut acc = 0.0;
        let cumulative = space
            .cells()
            .iter()
            .map(|&c| {
                acc += rho[c];
                (acc, c)
            })
            .collect();
        PixelProposal {
            grid,
            space,
            rho,
            cumulative,
            beta,
            sigma,
            lock_scale,
        }
    }

    /// Restricted selection probabilities, indexed by cell.
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    fn pick_cell<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cumulative.last().map_or(1.0, |c| c.0);
        let i = self.cumulative.partition_point(|&(c, _)| c <= u);
        self.cumulative[i.min(self.cumulative.len() - 1)].1
    }

    fn next_scale<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> f64 {
        if self.lock_scale {
            s
        } else {
            let z: f64 = StandardNormal.sample(rng);
            s + self.sigma[2] * z
        }
    }

    fn admissible(&self, st: &TargetState) -> bool {
        st.s > 0.0
            && self
                .grid
                .cell_of(st.x, st.y)
                .is_some_and(|c| self.space.contains(c))
    }

    fn log_scale_step(&self, to: f64, from: f64) -> f64 {
        if self.lock_scale {
            0.0
        } else {
            let z = (to - from) / self.sigma[2];
            -0.5 * z * z - 0.5 * LN_2PI - self.sigma[2].ln()
        }
    }
}

impl ProposalKernel for PixelProposal<'_> {
    type State = TargetState;

    fn cell(&self, state: &TargetState) -> usize {
        self.grid
            .cell_of(
                state.x.clamp(0.0, self.grid.width() as f64 - 1e-9),
                state.y.clamp(0.0, self.grid.height() as f64 - 1e-9),
            )
            .unwrap_or(0)
    }

    /// Draws until the candidate lies in the frame and in the active space;
    /// after `MAX_PROPOSAL_ATTEMPTS` failures the current state is returned.
    fn propose<R: Rng + ?Sized>(&self, from: &TargetState, rng: &mut R) -> TargetState {
        for _ in 0..MAX_PROPOSAL_ATTEMPTS {
            let candidate = if rng.random::<f64>() < self.beta {
                let zx: f64 = StandardNormal.sample(rng);
                let zy: f64 = StandardNormal.sample(rng);
                TargetState {
                    x: from.x + self.sigma[0] * zx,
                    y: from.y + self.sigma[1] * zy,
                    s: self.next_scale(from.s, rng),
                }
            } else {
                let b = self.grid.bounds(self.pick_cell(rng));
                TargetState {
                    x: rng.random_range(b.x0 as f64..b.x1 as f64),
                    y: rng.random_range(b.y0 as f64..b.y1 as f64),
                    s: self.next_scale(from.s, rng),
                }
            };
            if self.admissible(&candidate) {
                return candidate;
            }
        }
        *from
    }

    /// Mixture density, ignoring the truncation to the admissible set.
    fn log_density(&self, to: &TargetState, from: &TargetState) -> f64 {
        let scale = self.log_scale_step(to.s, from.s);
        let zx = (to.x - from.x) / self.sigma[0];
        let zy = (to.y - from.y) / self.sigma[1];
        let gauss = self.beta.ln() - 0.5 * (zx * zx + zy * zy)
            - LN_2PI
            - self.sigma[0].ln()
            - self.sigma[1].ln()
            + scale;
        let uniform = match self.grid.cell_of(to.x, to.y) {
            Some(c) if self.rho[c] > 0.0 => {
                (1.0 - self.beta).ln() + self.rho[c].ln() - self.grid.area(c).ln() + scale
            }
            _ => f64::NEG_INFINITY,
        };
        log_add_exp(gauss, uniform)
    }
}
