//! Phantom subjects, renderings, attacks and segmentation metrics.

pub mod attack;
pub mod harness;
pub mod metrics;
pub mod phantom;
pub mod render;
pub mod stats;

pub use attack::{identification_trial, match_distance, rank_retrieval, RankCurve, TrialResult};
pub use harness::{run_identification, run_segmentation, IdConfig, IdReport, SegConfig, SegReport};
pub use metrics::{dice, iou, segmentation_impact, SegClass, SegMode};
pub use phantom::{generate_phantom, phantom_from_identity, Identity, Phantom, PhantomParams};
pub use render::{render_face, Rendering, View};
pub use stats::bootstrap_ci;
