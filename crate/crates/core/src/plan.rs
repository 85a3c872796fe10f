//! Frame-index arithmetic: sampling plans, anchor frames and hold assignment.
//!
//! Indices are 0-based. Frame `0` is the first frame of the segment, so the
//! anchor frames of a 25 FPS video are `0, 25, 50, ...`.
//!
//! When `native_fps / target_fps` is not an integer (10, 15 and 20 FPS out of
//! 25), each one-second block selects the offsets
//! `floor(k * native_fps / target_fps)` for `k = 0..target_fps`. That yields
//! exactly `target_fps` frames per full second and always keeps the anchor.
//! A trailing partial second uses the same offsets, truncated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The subset of frame indices a predictor is run on for one target FPS.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    native_fps: u32,
    target_fps: u32,
    n_frames: usize,
    sampled_indices: Vec<usize>,
}

impl SamplingPlan {
    pub fn native_fps(&self) -> u32 {
        self.native_fps
    }

    pub fn target_fps(&self) -> u32 {
        self.target_fps
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn sampled_indices(&self) -> &[usize] {
        &self.sampled_indices
    }

    pub fn contains(&self, frame_index: usize) -> bool {
        self.sampled_indices.binary_search(&frame_index).is_ok()
    }

    pub fn anchors(&self) -> Vec<usize> {
        anchor_indices(self.native_fps, self.n_frames).expect("plan was validated at construction")
    }

    /// See [`hold_assignment`].
    pub fn held_index(&self, frame_index: usize) -> Result<usize> {
        hold_assignment(self, frame_index)
    }
}

/// In-block offsets selected for `target_fps` out of `native_fps`.
pub fn block_offsets(native_fps: u32, target_fps: u32) -> Vec<usize> {
    (0..target_fps as u64)
        .map(|k| (k * native_fps as u64 / target_fps as u64) as usize)
        .collect()
}

pub fn build_sampling_plan(
    native_fps: u32,
    target_fps: u32,
    n_frames: usize,
) -> Result<SamplingPlan> {
    if target_fps < 1 {
        return Err(Error::InvalidPlan(format!(
            "target fps must be >= 1, got {target_fps}"
        )));
    }
    if target_fps > native_fps {
        return Err(Error::InvalidPlan(format!(
            "target fps {target_fps} exceeds native fps {native_fps}"
        )));
    }
    if n_frames < 1 {
        return Err(Error::InvalidPlan(
            "segment must have at least one frame".into(),
        ));
    }

    let native = native_fps as usize;
    let offsets = block_offsets(native_fps, target_fps);
    let sampled_indices = (0..n_frames.div_ceil(native))
        .flat_map(|block| offsets.iter().map(move |off| block * native + off))
        .take_while(|&i| i < n_frames)
        .collect();

    Ok(SamplingPlan {
        native_fps,
        target_fps,
        n_frames,
        sampled_indices,
    })
}

/// First frame of every second: `[0, native, 2 * native, ...]` below `n_frames`.
pub fn anchor_indices(native_fps: u32, n_frames: usize) -> Result<Vec<usize>> {
    if native_fps < 1 {
        return Err(Error::InvalidPlan("native fps must be >= 1".into()));
    }
    if n_frames < 1 {
        return Err(Error::InvalidPlan(
            "segment must have at least one frame".into(),
        ));
    }
    Ok((0..n_frames).step_by(native_fps as usize).collect())
}

/// The sampled frame whose prediction is on screen at `frame_index` when
/// predictions persist until the next sample arrives.
pub fn hold_assignment(plan: &SamplingPlan, frame_index: usize) -> Result<usize> {
    if frame_index >= plan.n_frames {
        return Err(Error::FrameOutOfRange {
            index: frame_index,
            n_frames: plan.n_frames,
        });
    }
    // sampled_indices starts at 0, so the partition point is at least 1.
    let pos = plan.sampled_indices.partition_point(|&i| i <= frame_index);
    Ok(plan.sampled_indices[pos - 1])
}

/// A frame within a named segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameRef {
    segment_id: String,
    frame_index: usize,
}

impl FrameRef {
    pub fn new(
        segment_id: impl Into<String>,
        frame_index: usize,
        segment_len: usize,
    ) -> Result<Self> {
        if frame_index >= segment_len {
            return Err(Error::FrameOutOfRange {
                index: frame_index,
                n_frames: segment_len,
            });
        }
        Ok(Self {
            segment_id: segment_id.into(),
            frame_index,
        })
    }

    pub fn segment_id(&self) -> &str {
        &self.segment_id
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }
}
