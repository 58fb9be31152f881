//! Abrupt-motion tracking with a patch-correspondence confidence prior and a
//! self-adjusting Metropolis-Hastings sampler.
//!
//! Per frame the tracker matches patches between consecutive frames, turns the
//! consistent correspondences of the target box into a per-cell confidence,
//! decides whether the motion is abrupt, and runs a density-of-states chain
//! over either the whole grid or the neighborhood of the last estimate.

pub mod abruptness;
pub mod annf;
pub mod appearance;
pub mod error;
pub mod eval;
pub mod grid;
pub mod imaging;
pub mod report;
pub mod sampler;
pub mod tracker;

pub use abruptness::AbruptnessReport;
pub use annf::{ConfidenceGrid, MatcherConfig, PatchField};
pub use appearance::{AppearanceModel, HsvHistogram, TargetState};
pub use error::{Error, Result};
pub use eval::synthetic::{generate_synthetic, SyntheticSequence, SyntheticSpec};
pub use eval::{BoundingBox, EvalSummary, GroundTruth};
pub use grid::RegionGrid;
pub use imaging::{Frame, PixelRect, ScalarMap};
pub use sampler::{DensityOfStates, DosUpdate, SamplerConfig};
pub use tracker::{track_files, track_sequence, FrameResult, Tracker, TrackerConfig, TrackerRun};
