//! Predictors: seeded with the ground truth of frame 0, they return one mask
//! per sampled frame index.
//!
//! The three built-in predictors are synthetic probes of the protocols:
//!
//! * [`predict_oracle`] returns the ground truth itself.
//! * [`predict_lag`] is always exactly one sample stale.
//! * [`predict_step_jitter`] drifts by a seeded random walk that takes one
//!   step per propagation, regardless of how much time the step spans.
//!   More samples per second means more steps and more accumulated drift,
//!   which is the mechanism by which dense sampled evaluation looks worse.
//!
//! [`run_external`] plugs in a real model through files: a JSON job file and
//! an init mask go in, one PNG mask per sampled index comes out.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use image::{GrayImage, Luma};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::frame_file_name;
use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::plan::SamplingPlan;
use crate::protocols::{GroundTruth, PredictionRun};

/// Environment variable carrying the job file path for external adapters.
pub const JOB_ENV: &str = "FRAMEBIAS_JOB";
/// Environment variable carrying the directory external adapters write masks to.
pub const OUTPUT_ENV: &str = "FRAMEBIAS_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionJob {
    pub video_id: String,
    pub segment_id: String,
    pub class_id: String,
    pub plan: SamplingPlan,
    pub init_mask: BinaryMask,
    pub frames_dir: Option<PathBuf>,
}

impl PredictionJob {
    /// Builds a job seeded with `gt`'s first frame.
    pub fn new(gt: &GroundTruth, plan: SamplingPlan, frames_dir: Option<PathBuf>) -> Result<Self> {
        if plan.n_frames() != gt.n_frames() {
            return Err(Error::InvalidJob(format!(
                "plan covers {} frames, ground truth has {}",
                plan.n_frames(),
                gt.n_frames()
            )));
        }
        let init_mask = gt.mask(0).ok_or(Error::MissingGroundTruth(0))?.clone();
        if init_mask.is_empty() {
            return Err(Error::InvalidJob(format!(
                "class {} is absent from frame 0 of {}/{}; cannot seed the predictor",
                gt.class_id(),
                gt.video_id(),
                gt.segment_id()
            )));
        }
        Ok(Self {
            video_id: gt.video_id().to_owned(),
            segment_id: gt.segment_id().to_owned(),
            class_id: gt.class_id().to_owned(),
            plan,
            init_mask,
            frames_dir,
        })
    }

    pub fn target_fps(&self) -> u32 {
        self.plan.target_fps()
    }

    pub fn sampled_indices(&self) -> &[usize] {
        self.plan.sampled_indices()
    }

    fn finish(&self, masks: BTreeMap<usize, BinaryMask>) -> Result<PredictionRun> {
        PredictionRun::new(&self.segment_id, &self.class_id, self.plan.clone(), masks)
    }
}

fn gt_at(gt: &GroundTruth, i: usize) -> Result<&BinaryMask> {
    gt.mask(i).ok_or(Error::MissingGroundTruth(i))
}

pub fn predict_oracle(job: &PredictionJob, gt: &GroundTruth) -> Result<PredictionRun> {
    let masks = job
        .sampled_indices()
        .iter()
        .map(|&i| Ok((i, gt_at(gt, i)?.clone())))
        .collect::<Result<_>>()?;
    job.finish(masks)
}

/// Each sampled frame gets the ground truth of the previous sampled frame;
/// the first gets the init mask.
pub fn predict_lag(job: &PredictionJob, gt: &GroundTruth) -> Result<PredictionRun> {
    let idx = job.sampled_indices();
    let mut masks = BTreeMap::new();
    masks.insert(idx[0], job.init_mask.clone());
    for w in idx.windows(2) {
        masks.insert(w[1], gt_at(gt, w[0])?.clone());
    }
    job.finish(masks)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterConfig {
    /// Standard deviation of each per-step displacement, in pixels.
    pub sigma: f64,
    pub seed: u64,
}

impl JitterConfig {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidJob(format!(
                "jitter sigma must be >= 0, got {sigma}"
            )));
        }
        Ok(Self { sigma, seed })
    }
}

/// Integer displacement of each propagation step, `steps` of them.
///
/// Step `k` always consumes the `k`-th pair of draws, so runs at different
/// frame rates share a prefix of the same walk.
pub fn jitter_steps(cfg: &JitterConfig, steps: usize) -> Result<Vec<(i64, i64)>> {
    let normal = Normal::new(0.0, cfg.sigma)
        .map_err(|e| Error::InvalidJob(format!("jitter sigma {}: {e}", cfg.sigma)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..steps)
        .map(|_| {
            let dx = normal.sample(&mut rng).round() as i64;
            let dy = normal.sample(&mut rng).round() as i64;
            (dx, dy)
        })
        .collect())
}

/// Translates `mask` by `(dx, dy)`, clamping the offset so the foreground's
/// bounding box stays inside the image.
pub fn translate_clamped(mask: &BinaryMask, dx: i64, dy: i64) -> BinaryMask {
    let Some((x0, y0, x1, y1)) = mask.bounding_box() else {
        return mask.clone();
    };
    let dx = dx.clamp(-(x0 as i64), mask.width() as i64 - 1 - x1 as i64);
    let dy = dy.clamp(-(y0 as i64), mask.height() as i64 - 1 - y1 as i64);
    mask.translate(dx, dy)
}

pub fn predict_step_jitter(
    job: &PredictionJob,
    gt: &GroundTruth,
    cfg: &JitterConfig,
) -> Result<PredictionRun> {
    let cfg = JitterConfig::new(cfg.sigma, cfg.seed)?;
    let idx = job.sampled_indices();
    let steps = jitter_steps(&cfg, idx.len().saturating_sub(1))?;

    let mut masks = BTreeMap::new();
    masks.insert(idx[0], job.init_mask.clone());
    let (mut cx, mut cy) = (0i64, 0i64);
    for (&i, &(dx, dy)) in idx[1..].iter().zip(&steps) {
        cx += dx;
        cy += dy;
        masks.insert(i, translate_clamped(gt_at(gt, i)?, cx, cy));
    }
    job.finish(masks)
}

/// A predictor wired to an external command through files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    /// Program followed by its arguments; the job file path is appended.
    pub command: Vec<String>,
    /// Private working directory for this job.
    pub work_dir: PathBuf,
    #[serde(with = "secs")]
    pub timeout: Duration,
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

/// The JSON document handed to external adapters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFile {
    pub video_id: String,
    pub segment_id: String,
    pub class_id: String,
    pub native_fps: u32,
    pub target_fps: u32,
    pub n_frames: usize,
    pub sampled_indices: Vec<usize>,
    /// Frame image for each sampled index, in the same order. Empty when the
    /// job has no frames on disk.
    pub frame_paths: Vec<PathBuf>,
    pub init_mask_path: PathBuf,
    pub output_dir: PathBuf,
}

/// White-on-black grayscale PNG image of a mask.
pub fn mask_to_image(mask: &BinaryMask) -> GrayImage {
    GrayImage::from_fn(mask.width(), mask.height(), |x, y| {
        Luma([if mask.get(x, y) { 255 } else { 0 }])
    })
}

/// Reads a white-on-black mask PNG; any pixel that is neither pure white nor
/// pure black is rejected.
pub fn read_mask_png(path: &Path) -> std::result::Result<BinaryMask, String> {
    let img = image::open(path).map_err(|e| e.to_string())?.into_rgb8();
    let (w, h) = img.dimensions();
    let mut mask = BinaryMask::new(w, h).map_err(|e| e.to_string())?;
    for (x, y, px) in img.enumerate_pixels() {
        match px.0 {
            [255, 255, 255] => mask.set(x, y, true),
            [0, 0, 0] => {}
            other => {
                return Err(format!(
                    "pixel ({x},{y}) has color {other:?}, expected white or black"
                ))
            }
        }
    }
    Ok(mask)
}

pub fn write_mask_png(mask: &BinaryMask, path: &Path) -> Result<()> {
    mask_to_image(mask)
        .save(path)
        .map_err(|e| Error::image(path, e))
}

pub fn run_external(job: &PredictionJob, cfg: &AdapterConfig) -> Result<PredictionRun> {
    let Some((program, args)) = cfg.command.split_first() else {
        return Err(Error::External("adapter command is empty".into()));
    };
    let work = &cfg.work_dir;
    let out_dir = work.join("out");
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let init_mask_path = work.join("init_mask.png");
    write_mask_png(&job.init_mask, &init_mask_path)?;
    let frame_paths = match &job.frames_dir {
        Some(dir) => job
            .sampled_indices()
            .iter()
            .map(|&i| dir.join(frame_file_name(i)))
            .collect(),
        None => Vec::new(),
    };
    let job_file = JobFile {
        video_id: job.video_id.clone(),
        segment_id: job.segment_id.clone(),
        class_id: job.class_id.clone(),
        native_fps: job.plan.native_fps(),
        target_fps: job.plan.target_fps(),
        n_frames: job.plan.n_frames(),
        sampled_indices: job.sampled_indices().to_vec(),
        frame_paths,
        init_mask_path,
        output_dir: out_dir.clone(),
    };
    let job_path = work.join("job.json");
    let text = serde_json::to_string_pretty(&job_file).map_err(|e| Error::json(&job_path, e))?;
    fs::write(&job_path, text).map_err(|e| Error::io(&job_path, e))?;

    let log_path = work.join("adapter.log");
    let log = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let log_err = log.try_clone().map_err(|e| Error::io(&log_path, e))?;
    let mut child = Command::new(program)
        .args(args)
        .arg(&job_path)
        .env(JOB_ENV, &job_path)
        .env(OUTPUT_ENV, &out_dir)
        .stdin(Stdio::null())
        .stdout(log)
        .stderr(log_err)
        .spawn()
        .map_err(|e| Error::External(format!("cannot start {program:?}: {e}")))?;

    let started = Instant::now();
    let status = loop {
        match child.try_wait().map_err(|e| Error::io(&log_path, e))? {
            Some(status) => break status,
            None if started.elapsed() >= cfg.timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::ExternalTimeout(cfg.timeout));
            }
            None => std::thread::sleep(Duration::from_millis(5)),
        }
    };
    if !status.success() {
        let log = fs::read_to_string(&log_path).unwrap_or_default();
        let tail: Vec<&str> = log.lines().rev().take(5).collect();
        let tail: Vec<&str> = tail.into_iter().rev().collect();
        return Err(Error::External(format!(
            "{program:?} exited with {status}; log tail: {}",
            tail.join(" | ")
        )));
    }

    let (w, h) = job.init_mask.dims();
    let mut masks = BTreeMap::new();
    for &i in job.sampled_indices() {
        let path = out_dir.join(frame_file_name(i));
        if !path.is_file() {
            return Err(Error::MissingOutputMask { index: i, path });
        }
        let mask =
            read_mask_png(&path).map_err(|reason| Error::BadOutputMask { index: i, reason })?;
        if mask.dims() != (w, h) {
            return Err(Error::BadOutputMask {
                index: i,
                reason: format!(
                    "mask is {}x{}, expected {w}x{h}",
                    mask.width(),
                    mask.height()
                ),
            });
        }
        masks.insert(i, mask);
    }
    job.finish(masks)
}

/// Predictor selection.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    Oracle,
    Lag,
    StepJitter(JitterConfig),
    /// External command; each job runs in `<base_dir>/<video>/<segment>/<class>/<fps>`.
    External {
        command: Vec<String>,
        base_dir: PathBuf,
        timeout: Duration,
    },
}

impl Predictor {
    pub fn predict(&self, job: &PredictionJob, gt: &GroundTruth) -> Result<PredictionRun> {
        match self {
            Predictor::Oracle => predict_oracle(job, gt),
            Predictor::Lag => predict_lag(job, gt),
            Predictor::StepJitter(cfg) => predict_step_jitter(job, gt, cfg),
            Predictor::External {
                command,
                base_dir,
                timeout,
            } => {
                let work_dir = base_dir
                    .join(&job.video_id)
                    .join(&job.segment_id)
                    .join(&job.class_id)
                    .join(job.target_fps().to_string());
                run_external(
                    job,
                    &AdapterConfig {
                        command: command.clone(),
                        work_dir,
                        timeout: *timeout,
                    },
                )
            }
        }
    }
}
