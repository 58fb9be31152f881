//! Frame-by-frame tracking: matching field, abruptness, sample-space
//! restriction, chain, MAP estimate.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::abruptness::{
    abruptness_decision, global_abrupt_degree, local_abrupt_degree, refined_error, AbruptnessReport,
};
use crate::annf::{
    compute_annf, compute_annf_in, confidence_map, forward_backward_filter, incoherence_map,
    MatcherConfig,
};
use crate::appearance::{AppearanceModel, BinImage, TargetState};
use crate::error::{Error, Result};
use crate::grid::RegionGrid;
use crate::imaging::{edge_map, read_ppm, Frame, PixelRect};
use crate::sampler::{
    region_selection_probs, restrict_sample_space, run_chain, ActiveSpace, DensityOfStates,
    IterationStats, PixelProposal, ProposalKernel, SamplerConfig, Smoother,
};

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub matcher: MatcherConfig,
    /// Edge threshold relative to the largest Sobel magnitude.
    pub edge_threshold: f64,
    /// `T` in the abruptness rule.
    pub abrupt_threshold: f64,
    pub gmm_components: usize,
    pub hellinger_samples: usize,
    pub sampler: SamplerConfig,
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            grid_rows: 15,
            grid_cols: 15,
            matcher: MatcherConfig::default(),
            edge_threshold: 0.25,
            abrupt_threshold: 0.2,
            gmm_components: 3,
            hellinger_samples: 10_000,
            sampler: SamplerConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameResult {
    /// 1-based frame number.
    pub frame: usize,
    pub state: TargetState,
    pub log_posterior: f64,
    pub report: AbruptnessReport,
    pub active_cells: usize,
    pub invalid_ratios: usize,
    pub iterations: Vec<IterationStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerRun {
    pub config: TrackerConfig,
    pub init: TargetState,
    pub ref_w: f64,
    pub ref_h: f64,
    /// Frames 2..=T in order.
    pub frames: Vec<FrameResult>,
}

/// State with the largest posterior; the first one wins ties.
pub fn map_estimate<S: Clone>(samples: &[(S, f64)]) -> Result<(S, f64)> {
    let mut best: Option<&(S, f64)> = None;
    for s in samples {
        if best.is_none_or(|b| s.1 > b.1) {
            best = Some(s);
        }
    }
    best.cloned().ok_or(Error::EmptySamples)
}

/// Center of the active cell nearest to `state`, or `state` itself when its
/// cell is already active.
fn snap_into(state: TargetState, grid: &RegionGrid, space: &ActiveSpace) -> TargetState {
    if grid
        .cell_of(state.x, state.y)
        .is_some_and(|c| space.contains(c))
    {
        return state;
    }
    let mut best = (f64::INFINITY, state);
    for &c in space.cells() {
        let (cx, cy) = grid.center(c);
        let d = (cx - state.x).hypot(cy - state.y);
        if d < best.0 {
            best = (d, TargetState { x: cx, y: cy, s: state.s });
        }
    }
    best.1
}

pub struct Tracker {
    config: TrackerConfig,
    grid: RegionGrid,
    smoother: Smoother,
    model: AppearanceModel,
    previous: Frame,
    estimate: TargetState,
    frame: usize,
}

impl Tracker {
    pub fn new(config: TrackerConfig, first: Frame, init: PixelRect) -> Result<Self> {
        if init.area() == 0 || init.x1 > first.width() || init.y1 > first.height() {
            return Err(Error::InvalidBox(format!(
                "{init:?} is empty or leaves the {}x{} frame",
                first.width(),
                first.height()
            )));
        }
        let model = AppearanceModel::from_frame(&first, init)?;
        let grid = RegionGrid::new(first.width(), first.height(), config.grid_rows, config.grid_cols);
        let smoother = Smoother::new(&grid, config.sampler.cutoff);
        let estimate = TargetState::new(
            (init.x0 + init.x1) as f64 / 2.0,
            (init.y0 + init.y1) as f64 / 2.0,
            1.0,
        );
        Ok(Tracker {
            config,
            grid,
            smoother,
            model,
            previous: first,
            estimate,
            frame: 1,
        })
    }

    pub fn estimate(&self) -> TargetState {
        self.estimate
    }

    pub fn model(&self) -> &AppearanceModel {
        &self.model
    }

    pub fn grid(&self) -> &RegionGrid {
        &self.grid
    }

    /// Processes the next frame.
    pub fn step(&mut self, frame: Frame) -> Result<FrameResult> {
        self.previous.same_size(&frame)?;
        let cfg = &self.config;
        let t = self.frame + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(t as u64);

        let (w, h) = (frame.width(), frame.height());
        let bbox = self
            .estimate
            .rect(self.model.ref_w, self.model.ref_h, w, h)
            .ok_or_else(|| Error::InvalidBox(format!("estimate {:?} left the frame", self.estimate)))?;

        // motion confidence from the consistent correspondences of the box
        let forward = compute_annf_in(&self.previous, &frame, bbox, &cfg.matcher, &mut rng)?;
        let backward = compute_annf(&frame, &self.previous, &cfg.matcher, &mut rng)?;
        let survivors = forward_backward_filter(&forward, &backward, &bbox);
        let incoherence = incoherence_map(&survivors, &forward, &bbox);
        let confidence = confidence_map(&incoherence, &self.grid);

        let refined = refined_error(&backward.error_image(), &edge_map(&frame, cfg.edge_threshold))?;
        let g = global_abrupt_degree(&refined);
        let l = local_abrupt_degree(
            &self.previous.colors_in(bbox),
            &frame.colors_in(bbox),
            cfg.gmm_components,
            cfg.hellinger_samples,
            &mut rng,
        )?;
        let report = abruptness_decision(g, l, cfg.abrupt_threshold);

        let space = restrict_sample_space(report.abrupt, &self.estimate, &self.grid);
        let rho = region_selection_probs(&confidence.lambda, cfg.sampler.theta);
        let kernel = PixelProposal::new(
            &self.grid,
            &space,
            &rho,
            cfg.sampler.beta,
            cfg.sampler.sigma,
            cfg.sampler.lock_scale,
        );
        let dos = DensityOfStates::from_confidence(&confidence.lambda, cfg.sampler.tau);
        let bins = BinImage::new(&frame);
        let model = &self.model;
        let start = snap_into(self.estimate, &self.grid, &space);
        debug_assert!(space.contains(kernel.cell(&start)));
        let chain = run_chain(
            &kernel,
            |s: &TargetState| Ok(model.likelihood(&bins, s).ln()),
            start,
            &confidence.lambda,
            dos,
            &space,
            &self.smoother,
            &cfg.sampler,
            &mut rng,
        )?;
        let (state, log_posterior) = map_estimate(&chain.samples)?;

        self.estimate = state;
        self.previous = frame;
        self.frame = t;
        Ok(FrameResult {
            frame: t,
            state,
            log_posterior,
            report,
            active_cells: space.len(),
            invalid_ratios: chain.invalid_ratios,
            iterations: chain.iterations,
        })
    }
}

/// Tracks `frames[1..]` starting from `init` in `frames[0]`.
pub fn track_sequence(frames: &[Frame], init: PixelRect, config: &TrackerConfig) -> Result<TrackerRun> {
    if frames.len() < 2 {
        return Err(Error::TooFewFrames(frames.len()));
    }
    track_frames(frames.iter().cloned().map(Ok), init, config)
}

/// Like `track_sequence` but loads PPM files one at a time.
pub fn track_files<P: AsRef<Path>>(paths: &[P], init: PixelRect, config: &TrackerConfig) -> Result<TrackerRun> {
    if paths.len() < 2 {
        return Err(Error::TooFewFrames(paths.len()));
    }
    track_frames(paths.iter().map(|p| read_ppm(p.as_ref())), init, config)
}

fn track_frames(
    mut frames: impl Iterator<Item = Result<Frame>>,
    init: PixelRect,
    config: &TrackerConfig,
) -> Result<TrackerRun> {
    let wrap = |index: usize| move |e: Error| Error::Frame { index, source: Box::new(e) };
    let first = frames.next().ok_or(Error::TooFewFrames(0))?.map_err(wrap(1))?;
    let mut tracker = Tracker::new(config.clone(), first, init)?;
    let init_state = tracker.estimate();
    let mut results = Vec::new();
    for (i, frame) in frames.enumerate() {
        let index = i + 2;
        let frame = frame.map_err(wrap(index))?;
        results.push(tracker.step(frame).map_err(wrap(index))?);
    }
    Ok(TrackerRun {
        config: config.clone(),
        init: init_state,
        ref_w: tracker.model.ref_w,
        ref_h: tracker.model.ref_h,
        frames: results,
    })
}
