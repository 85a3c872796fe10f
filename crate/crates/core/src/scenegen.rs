//! Deterministic synthetic scenes: one moving shape with exact ground truth.
//!
//! Pixel `(i, j)` covers `[i, i+1) x [j, j+1)` and is foreground iff its
//! center `(i + 0.5, j + 0.5)` lies inside the shape. Shape positions are
//! continuous, so a disk centered on a pixel center with radius 0 covers
//! exactly that pixel.

use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::dataset::{self, Palette, SegmentManifest};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::protocols::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Disk { radius: f64 },
    Rectangle { half_width: f64, half_height: f64 },
}

impl Shape {
    fn half_extents(&self) -> (f64, f64) {
        match *self {
            Shape::Disk { radius } => (radius, radius),
            Shape::Rectangle {
                half_width,
                half_height,
            } => (half_width, half_height),
        }
    }

    fn contains(&self, center: (f64, f64), p: (f64, f64)) -> bool {
        let (dx, dy) = (p.0 - center.0, p.1 - center.1);
        match *self {
            Shape::Disk { radius } => dx * dx + dy * dy <= radius * radius,
            Shape::Rectangle {
                half_width,
                half_height,
            } => dx.abs() <= half_width && dy.abs() <= half_height,
        }
    }
}

/// What happens when the shape reaches the image border.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Stop at the border and stay there.
    #[default]
    Clamp,
    /// Bounce elastically, keeping speed constant.
    Reflect,
}

/// Inclusive frame range during which the object is visible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameWindow {
    pub start: usize,
    pub end: usize,
}

impl FrameWindow {
    pub fn contains(&self, frame: usize) -> bool {
        (self.start..=self.end).contains(&frame)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(default = "default_video")]
    pub video_id: String,
    #[serde(default = "default_segment")]
    pub segment_id: String,
    #[serde(default = "default_class")]
    pub class_name: String,
    /// Palette color of the class in mask images.
    #[serde(default = "default_class_color")]
    pub class_color: [u8; 3],
    pub width: u32,
    pub height: u32,
    pub native_fps: u32,
    pub duration_s: u32,
    pub shape: Shape,
    pub start: [f64; 2],
    /// Pixels per frame.
    pub velocity: [f64; 2],
    #[serde(default)]
    pub boundary: Boundary,
    /// When present, the object is only visible inside these windows.
    #[serde(default)]
    pub visibility: Option<Vec<FrameWindow>>,
}

fn default_video() -> String {
    "synthetic".into()
}
fn default_segment() -> String {
    "s1".into()
}
fn default_class() -> String {
    "object".into()
}
fn default_class_color() -> [u8; 3] {
    [0, 200, 0]
}

const FRAME_BACKGROUND: Rgb<u8> = Rgb([96, 48, 40]);
const FRAME_OBJECT: Rgb<u8> = Rgb([210, 190, 150]);

impl SceneSpec {
    /// A disk scene with default ids and no visibility windows.
    pub fn disk(
        width: u32,
        height: u32,
        native_fps: u32,
        duration_s: u32,
        radius: f64,
        start: [f64; 2],
        velocity: [f64; 2],
    ) -> Self {
        Self {
            video_id: default_video(),
            segment_id: default_segment(),
            class_name: default_class(),
            class_color: default_class_color(),
            width,
            height,
            native_fps,
            duration_s,
            shape: Shape::Disk { radius },
            start,
            velocity,
            boundary: Boundary::Clamp,
            visibility: None,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_frames(&self) -> usize {
        self.native_fps as usize * self.duration_s as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScene(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!(
                "dimensions must be positive, got {}x{}",
                self.width, self.height
            ));
        }
        if self.native_fps < 1 {
            return bad("native_fps must be >= 1".into());
        }
        if self.duration_s < 1 {
            return bad("duration must be at least one second".into());
        }
        let (hx, hy) = self.shape.half_extents();
        if !(hx >= 0.0 && hy >= 0.0) {
            return bad("shape extents must be non-negative".into());
        }
        let [sx, sy] = self.start;
        if sx - hx < 0.0
            || sy - hy < 0.0
            || sx + hx > self.width as f64
            || sy + hy > self.height as f64
        {
            return bad(format!(
                "shape at ({sx}, {sy}) does not fit inside {}x{}",
                self.width, self.height
            ));
        }
        if !self.velocity.iter().all(|v| v.is_finite()) {
            return bad("velocity must be finite".into());
        }
        if let Some(windows) = &self.visibility {
            for w in windows {
                if w.start > w.end {
                    return bad(format!(
                        "visibility window {}..={} is reversed",
                        w.start, w.end
                    ));
                }
            }
        }
        Ok(())
    }

    /// Shape center at frame `j`.
    pub fn center_at(&self, j: usize) -> (f64, f64) {
        let (hx, hy) = self.shape.half_extents();
        let x = move_1d(
            self.start[0],
            self.velocity[0],
            j,
            hx,
            self.width as f64 - hx,
            self.boundary,
        );
        let y = move_1d(
            self.start[1],
            self.velocity[1],
            j,
            hy,
            self.height as f64 - hy,
            self.boundary,
        );
        (x, y)
    }

    pub fn visible_at(&self, j: usize) -> bool {
        match &self.visibility {
            None => true,
            Some(windows) => windows.iter().any(|w| w.contains(j)),
        }
    }

    pub fn gt_mask(&self, j: usize) -> Result<BinaryMask> {
        if !self.visible_at(j) {
            return BinaryMask::new(self.width, self.height);
        }
        rasterize(&self.shape, self.center_at(j), (self.width, self.height))
    }

    pub fn render_frame(&self, mask: &BinaryMask) -> RgbImage {
        RgbImage::from_fn(self.width, self.height, |x, y| {
            if mask.get(x, y) {
                FRAME_OBJECT
            } else {
                FRAME_BACKGROUND
            }
        })
    }

    pub fn palette(&self) -> Result<Palette> {
        Palette::new([(self.class_name.clone(), self.class_color)])
    }
}

fn move_1d(start: f64, velocity: f64, j: usize, lo: f64, hi: f64, boundary: Boundary) -> f64 {
    let free = start + j as f64 * velocity;
    match boundary {
        Boundary::Clamp => free.clamp(lo, hi),
        Boundary::Reflect => {
            let span = hi - lo;
            if span <= 0.0 {
                return lo;
            }
            let t = (free - lo).rem_euclid(2.0 * span);
            lo + if t <= span { t } else { 2.0 * span - t }
        }
    }
}

/// Pixels whose centers lie inside `shape` placed at `center`.
pub fn rasterize(shape: &Shape, center: (f64, f64), dims: (u32, u32)) -> Result<BinaryMask> {
    let (w, h) = dims;
    let mut mask = BinaryMask::new(w, h)?;
    let (hx, hy) = shape.half_extents();
    // candidate pixel range: centers i + 0.5 within [c - r, c + r]
    let range = |c: f64, r: f64, n: u32| {
        let lo = (c - r - 0.5).ceil().max(0.0);
        let hi = (c + r - 0.5).floor().min(n as f64 - 1.0);
        (lo as i64, hi as i64)
    };
    let (x0, x1) = range(center.0, hx, w);
    let (y0, y1) = range(center.1, hy, h);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            if shape.contains(center, p) {
                mask.set(x as u32, y as u32, true);
            }
        }
    }
    Ok(mask)
}

/// Ground truth for every frame of the scene.
pub fn generate_ground_truth(spec: &SceneSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let masks = (0..spec.n_frames())
        .map(|j| spec.gt_mask(j))
        .collect::<Result<Vec<_>>>()?;
    GroundTruth::dense(&spec.video_id, &spec.segment_id, &spec.class_name, masks)
}

/// Frames and dense ground truth.
pub fn generate_scene(spec: &SceneSpec) -> Result<(Vec<RgbImage>, GroundTruth)> {
    let gt = generate_ground_truth(spec)?;
    let frames = gt.masks().values().map(|m| spec.render_frame(m)).collect();
    Ok((frames, gt))
}

/// Writes the scene in the dataset layout under `root`, plus `manifest.json`
/// and `palette.json`. Returns the manifest entry.
pub fn write_dataset(spec: &SceneSpec, root: &Path) -> Result<SegmentManifest> {
    spec.validate()?;
    let palette = spec.palette()?;
    let seg_dir = root.join(&spec.video_id).join(&spec.segment_id);
    let frames_dir = seg_dir.join("frames");
    let masks_dir = seg_dir.join("masks");
    for d in [&frames_dir, &masks_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    for j in 0..spec.n_frames() {
        let mask = spec.gt_mask(j)?;
        let name = dataset::frame_file_name(j);
        let frame_path = frames_dir.join(&name);
        spec.render_frame(&mask)
            .save(&frame_path)
            .map_err(|e| Error::image(&frame_path, e))?;
        let encoded = dataset::encode_class_masks(&[(spec.class_name.as_str(), &mask)], &palette)?;
        let mask_path = masks_dir.join(&name);
        encoded
            .save(&mask_path)
            .map_err(|e| Error::image(&mask_path, e))?;
    }
    let entry = SegmentManifest {
        video_id: spec.video_id.clone(),
        segment_id: spec.segment_id.clone(),
        native_fps: spec.native_fps,
        n_frames: spec.n_frames(),
        frames_dir: Path::new(&spec.video_id)
            .join(&spec.segment_id)
            .join("frames"),
        masks_dir: Path::new(&spec.video_id)
            .join(&spec.segment_id)
            .join("masks"),
        annotated_frames: None,
    };
    dataset::write_manifest(&root.join("manifest.json"), std::slice::from_ref(&entry))?;
    palette.write(&root.join("palette.json"))?;
    Ok(entry)
}
