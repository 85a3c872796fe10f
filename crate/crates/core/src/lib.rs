//! Evaluation harness for frame-rate sampling bias in video object segmentation.
//!
//! The crate is organised bottom-up:
//!
//! * [`mask`] and [`plan`] hold the binary mask type and frame-index arithmetic
//!   (sampling plans, anchors, hold assignment).
//! * [`metrics`] computes IoU and per-series means.
//! * [`protocols`] scores a [`protocols::PredictionRun`] under the sampled,
//!   anchor and real-time streaming protocols.
//! * [`dataset`], [`scenegen`] and [`predictor`] produce ground truth and
//!   predictions; [`report`] turns results into tables and overlay stimuli.
//! * [`survey`] is the domain logic behind the perception survey service.

pub mod dataset;
pub mod error;
pub mod mask;
pub mod metrics;
pub mod plan;
pub mod predictor;
pub mod protocols;
pub mod report;
pub mod scenegen;
pub mod survey;

pub use error::{Error, Result};
pub use mask::BinaryMask;
pub use metrics::{iou, mean_iou, IoUEntry, IoUSeries};
pub use plan::{anchor_indices, build_sampling_plan, hold_assignment, FrameRef, SamplingPlan};
pub use protocols::{
    evaluate, evaluate_anchor, evaluate_sampled, evaluate_streaming, EvalOptions, EvalResult,
    GroundTruth, PredictionRun, Protocol,
};

/// Frame-rate settings evaluated by default.
pub const DEFAULT_FPS: [u32; 5] = [1, 10, 15, 20, 25];
