//! The three frame-rate evaluation protocols.
//!
//! * **Sampled**: IoU at every frame the plan sampled. Low FPS plans score
//!   fewer frames, which hides transient errors.
//! * **Anchor**: IoU only at the first frame of each second, which every plan
//!   shares, so all FPS settings are compared on identical frames.
//! * **Streaming**: IoU at every native frame, scoring the prediction that is
//!   on screen, i.e. the most recent sampled prediction (hold assignment).
//!
//! Frames whose ground truth is empty are excluded from the mean by default
//! in all three protocols. Frame 0 is the seeded frame and is always scored.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::metrics::{iou, mean_iou, IoUSeries};
use crate::plan::{hold_assignment, SamplingPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Sampled,
    Anchor,
    Streaming,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Sampled, Protocol::Anchor, Protocol::Streaming];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Sampled => "sampled",
            Protocol::Anchor => "anchor",
            Protocol::Streaming => "streaming",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Protocol::Sampled => "Sampled frames",
            Protocol::Anchor => "Anchor frames",
            Protocol::Streaming => "Real-time streaming",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampled" => Ok(Protocol::Sampled),
            "anchor" => Ok(Protocol::Anchor),
            "streaming" => Ok(Protocol::Streaming),
            other => Err(Error::Report(format!(
                "unknown protocol {other:?} (expected sampled, anchor or streaming)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub exclude_absent_gt: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            exclude_absent_gt: true,
        }
    }
}

/// Ground-truth masks for one (segment, class). Masks may be sparse; only
/// streaming evaluation insists on every frame being annotated.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    video_id: String,
    segment_id: String,
    class_id: String,
    n_frames: usize,
    masks: BTreeMap<usize, BinaryMask>,
}

impl GroundTruth {
    pub fn dense(
        video_id: impl Into<String>,
        segment_id: impl Into<String>,
        class_id: impl Into<String>,
        masks: Vec<BinaryMask>,
    ) -> Result<Self> {
        let n_frames = masks.len();
        Self::sparse(
            video_id,
            segment_id,
            class_id,
            n_frames,
            masks.into_iter().enumerate().collect(),
        )
    }

    pub fn sparse(
        video_id: impl Into<String>,
        segment_id: impl Into<String>,
        class_id: impl Into<String>,
        n_frames: usize,
        masks: BTreeMap<usize, BinaryMask>,
    ) -> Result<Self> {
        if n_frames == 0 {
            return Err(Error::InvalidMask(
                "ground truth needs at least one frame".into(),
            ));
        }
        if let Some((&last, _)) = masks.last_key_value() {
            if last >= n_frames {
                return Err(Error::FrameOutOfRange {
                    index: last,
                    n_frames,
                });
            }
        }
        let mut iter = masks.values();
        if let Some(first) = iter.next() {
            for m in iter {
                first.ensure_same_dims(m)?;
            }
        }
        Ok(Self {
            video_id: video_id.into(),
            segment_id: segment_id.into(),
            class_id: class_id.into(),
            n_frames,
            masks,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn segment_id(&self) -> &str {
        &self.segment_id
    }

    pub fn class_id(&self) -> &str {
        &self.class_id
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn dims(&self) -> Option<(u32, u32)> {
        self.masks.values().next().map(BinaryMask::dims)
    }

    pub fn mask(&self, frame_index: usize) -> Option<&BinaryMask> {
        self.masks.get(&frame_index)
    }

    pub fn masks(&self) -> &BTreeMap<usize, BinaryMask> {
        &self.masks
    }

    /// Whether the object is visible at `frame_index`; `None` if unannotated.
    pub fn presence(&self, frame_index: usize) -> Option<bool> {
        self.masks.get(&frame_index).map(|m| !m.is_empty())
    }

    /// Number of annotated frames in which the object is visible.
    pub fn present_count(&self) -> usize {
        self.masks.values().filter(|m| !m.is_empty()).count()
    }

    /// First frame index without an annotation, if any.
    pub fn first_gap(&self) -> Option<usize> {
        (0..self.n_frames).find(|i| !self.masks.contains_key(i))
    }

    pub fn is_dense(&self) -> bool {
        self.masks.len() == self.n_frames
    }
}

/// Predictor output for one (segment, class, fps) job: one mask per sampled index.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRun {
    segment_id: String,
    class_id: String,
    plan: SamplingPlan,
    masks: BTreeMap<usize, BinaryMask>,
}

impl PredictionRun {
    pub fn new(
        segment_id: impl Into<String>,
        class_id: impl Into<String>,
        plan: SamplingPlan,
        masks: BTreeMap<usize, BinaryMask>,
    ) -> Result<Self> {
        if let Some(&missing) = plan
            .sampled_indices()
            .iter()
            .find(|i| !masks.contains_key(i))
        {
            return Err(Error::MissingPrediction(missing));
        }
        if let Some(&extra) = masks.keys().find(|&&i| !plan.contains(i)) {
            return Err(Error::InvalidJob(format!(
                "prediction for frame {extra} which the plan did not sample"
            )));
        }
        let mut iter = masks.values();
        if let Some(first) = iter.next() {
            for m in iter {
                first.ensure_same_dims(m)?;
            }
        }
        Ok(Self {
            segment_id: segment_id.into(),
            class_id: class_id.into(),
            plan,
            masks,
        })
    }

    pub fn segment_id(&self) -> &str {
        &self.segment_id
    }

    pub fn class_id(&self) -> &str {
        &self.class_id
    }

    pub fn plan(&self) -> &SamplingPlan {
        &self.plan
    }

    pub fn masks(&self) -> &BTreeMap<usize, BinaryMask> {
        &self.masks
    }

    pub fn mask(&self, sampled_index: usize) -> Result<&BinaryMask> {
        self.masks
            .get(&sampled_index)
            .ok_or(Error::MissingPrediction(sampled_index))
    }

    /// The prediction displayed at `frame_index` under persistence.
    pub fn held_mask(&self, frame_index: usize) -> Result<&BinaryMask> {
        self.mask(hold_assignment(&self.plan, frame_index)?)
    }
}

/// One table cell: a (segment, class, fps, protocol) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub video_id: String,
    pub segment_id: String,
    pub class_id: String,
    pub target_fps: u32,
    pub protocol: Protocol,
    pub series: IoUSeries,
    pub mean: f64,
    pub evaluated_frames: usize,
}

pub fn evaluate_sampled(run: &PredictionRun, gt: &GroundTruth) -> Result<EvalResult> {
    evaluate(run, gt, Protocol::Sampled, EvalOptions::default())
}

pub fn evaluate_anchor(run: &PredictionRun, gt: &GroundTruth) -> Result<EvalResult> {
    evaluate(run, gt, Protocol::Anchor, EvalOptions::default())
}

pub fn evaluate_streaming(run: &PredictionRun, gt: &GroundTruth) -> Result<EvalResult> {
    evaluate(run, gt, Protocol::Streaming, EvalOptions::default())
}

pub fn evaluate(
    run: &PredictionRun,
    gt: &GroundTruth,
    protocol: Protocol,
    options: EvalOptions,
) -> Result<EvalResult> {
    check_compatible(run, gt)?;

    let mut series = IoUSeries::new();
    let mut score = |frame: usize, pred: &BinaryMask| -> Result<()> {
        let truth = gt.mask(frame).ok_or(Error::MissingGroundTruth(frame))?;
        series.push(frame, iou(pred, truth)?, !truth.is_empty())
    };

    match protocol {
        Protocol::Sampled => {
            for &i in run.plan().sampled_indices() {
                score(i, run.mask(i)?)?;
            }
        }
        Protocol::Anchor => {
            for i in run.plan().anchors() {
                score(i, run.mask(i)?)?;
            }
        }
        Protocol::Streaming => {
            if let Some(first_gap) = gt.first_gap() {
                return Err(Error::SparseGroundTruth { first_gap });
            }
            for j in 0..gt.n_frames() {
                score(j, run.held_mask(j)?)?;
            }
        }
    }

    let mean = mean_iou(&series, options.exclude_absent_gt)?;
    let evaluated_frames = series.included(options.exclude_absent_gt).count();
    Ok(EvalResult {
        video_id: gt.video_id().to_owned(),
        segment_id: gt.segment_id().to_owned(),
        class_id: gt.class_id().to_owned(),
        target_fps: run.plan().target_fps(),
        protocol,
        series,
        mean,
        evaluated_frames,
    })
}

fn check_compatible(run: &PredictionRun, gt: &GroundTruth) -> Result<()> {
    if run.segment_id() != gt.segment_id() || run.class_id() != gt.class_id() {
        return Err(Error::RunMismatch(format!(
            "run is {}/{}, ground truth is {}/{}",
            run.segment_id(),
            run.class_id(),
            gt.segment_id(),
            gt.class_id()
        )));
    }
    if run.plan().n_frames() != gt.n_frames() {
        return Err(Error::RunMismatch(format!(
            "run covers {} frames, ground truth has {}",
            run.plan().n_frames(),
            gt.n_frames()
        )));
    }
    if let (Some(pred), Some(truth)) = (run.masks().values().next(), gt.masks().values().next()) {
        pred.ensure_same_dims(truth)?;
    }
    Ok(())
}
