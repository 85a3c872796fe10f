//! Segment manifests, palettes and color-coded ground-truth masks.
//!
//! Layout: `<root>/<video>/<segment>/frames/NNNNN.png` and
//! `<root>/<video>/<segment>/masks/NNNNN.png`, five-digit, 0-based.
//! Mask images encode classes by exact RGB match against the palette.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::protocols::GroundTruth;

/// Color of pixels that belong to no class in encoded mask images.
pub const BACKGROUND: [u8; 3] = [0, 0, 0];

pub fn frame_file_name(index: usize) -> String {
    format!("{index:05}.png")
}

/// Class name to mask color.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    try_from = "BTreeMap<String, [u8; 3]>",
    into = "BTreeMap<String, [u8; 3]>"
)]
pub struct Palette {
    entries: BTreeMap<String, [u8; 3]>,
}

impl Palette {
    pub fn new<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, [u8; 3])>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (name, rgb) in entries {
            let name = name.into();
            if name.is_empty() {
                return Err(Error::InvalidPalette("empty class name".into()));
            }
            if map.insert(name.clone(), rgb).is_some() {
                return Err(Error::InvalidPalette(format!("duplicate class {name:?}")));
            }
        }
        Self::try_from(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn color(&self, class: &str) -> Option<[u8; 3]> {
        self.entries.get(class).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, [u8; 3])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl TryFrom<BTreeMap<String, [u8; 3]>> for Palette {
    type Error = Error;

    fn try_from(entries: BTreeMap<String, [u8; 3]>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (name, rgb) in &entries {
            if *rgb == BACKGROUND {
                return Err(Error::InvalidPalette(format!(
                    "class {name:?} uses the background color {BACKGROUND:?}"
                )));
            }
            if !seen.insert(*rgb) {
                return Err(Error::InvalidPalette(format!(
                    "color {rgb:?} is used by more than one class"
                )));
            }
        }
        Ok(Self { entries })
    }
}

impl From<Palette> for BTreeMap<String, [u8; 3]> {
    fn from(p: Palette) -> Self {
        p.entries
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentManifest {
    pub video_id: String,
    pub segment_id: String,
    pub native_fps: u32,
    pub n_frames: usize,
    pub frames_dir: PathBuf,
    pub masks_dir: PathBuf,
    /// Frames that have a mask file. Absent means every frame is annotated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotated_frames: Option<Vec<usize>>,
}

impl SegmentManifest {
    pub fn frame_path(&self, index: usize) -> PathBuf {
        self.frames_dir.join(frame_file_name(index))
    }

    pub fn mask_path(&self, index: usize) -> PathBuf {
        self.masks_dir.join(frame_file_name(index))
    }

    /// Indices with a mask file, ascending.
    pub fn annotated(&self) -> Vec<usize> {
        match &self.annotated_frames {
            Some(v) => v.clone(),
            None => (0..self.n_frames).collect(),
        }
    }
}

/// Loads and validates a manifest (a JSON list of segments). Relative
/// directories are resolved against the manifest's parent directory. All
/// missing frame and mask files are reported together.
pub fn load_manifest(path: &Path) -> Result<Vec<SegmentManifest>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut segments: Vec<SegmentManifest> =
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let invalid = |reason: String| Error::InvalidManifest {
        path: path.to_owned(),
        reason,
    };

    let mut keys = HashSet::new();
    let mut missing = Vec::new();
    for seg in &mut segments {
        if seg.native_fps < 1 {
            return Err(invalid(format!(
                "{}/{}: native_fps must be >= 1",
                seg.video_id, seg.segment_id
            )));
        }
        if seg.n_frames < 1 {
            return Err(invalid(format!(
                "{}/{}: n_frames must be >= 1",
                seg.video_id, seg.segment_id
            )));
        }
        if !keys.insert((seg.video_id.clone(), seg.segment_id.clone())) {
            return Err(invalid(format!(
                "duplicate segment {}/{}",
                seg.video_id, seg.segment_id
            )));
        }
        if let Some(ann) = &seg.annotated_frames {
            if ann.windows(2).any(|w| w[0] >= w[1])
                || ann.last().is_some_and(|&l| l >= seg.n_frames)
            {
                return Err(invalid(format!(
                    "{}/{}: annotated_frames must be strictly increasing and below n_frames",
                    seg.video_id, seg.segment_id
                )));
            }
        }
        seg.frames_dir = base.join(&seg.frames_dir);
        seg.masks_dir = base.join(&seg.masks_dir);
        let frames = (0..seg.n_frames).map(|i| seg.frame_path(i));
        let masks = seg.annotated().into_iter().map(|i| seg.mask_path(i));
        missing.extend(frames.chain(masks).filter(|p| !p.is_file()));
    }
    if !missing.is_empty() {
        return Err(Error::MissingFiles(missing));
    }
    Ok(segments)
}

pub fn write_manifest(path: &Path, segments: &[SegmentManifest]) -> Result<()> {
    let text = serde_json::to_string_pretty(segments).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Splits a color-coded mask image into one binary mask per palette class.
/// Pixels whose color is not in the palette belong to no class.
pub fn decode_class_masks(
    image: &RgbImage,
    palette: &Palette,
) -> Result<BTreeMap<String, BinaryMask>> {
    let (w, h) = image.dimensions();
    let by_color: BTreeMap<[u8; 3], &str> = palette.iter().map(|(c, rgb)| (rgb, c)).collect();
    let mut masks: BTreeMap<String, BinaryMask> = palette
        .classes()
        .map(|c| Ok((c.to_owned(), BinaryMask::new(w, h)?)))
        .collect::<Result<_>>()?;
    for (x, y, px) in image.enumerate_pixels() {
        if let Some(class) = by_color.get(&px.0) {
            masks
                .get_mut(*class)
                .expect("palette class present")
                .set(x, y, true);
        }
    }
    Ok(masks)
}

/// Paints class masks into a mask image. Later entries win on overlap.
pub fn encode_class_masks(masks: &[(&str, &BinaryMask)], palette: &Palette) -> Result<RgbImage> {
    let Some((_, first)) = masks.first() else {
        return Err(Error::InvalidMask("nothing to encode".into()));
    };
    let (w, h) = first.dims();
    let mut img = RgbImage::from_pixel(w, h, Rgb(BACKGROUND));
    for (class, mask) in masks {
        first.ensure_same_dims(mask)?;
        let rgb = palette
            .color(class)
            .ok_or_else(|| Error::InvalidPalette(format!("class {class:?} not in palette")))?;
        for (x, y) in mask.ones() {
            img.put_pixel(x, y, Rgb(rgb));
        }
    }
    Ok(img)
}

/// Frames in which the class is visible.
pub fn class_frame_counts(gt: &GroundTruth) -> usize {
    gt.present_count()
}

fn read_rgb(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path)
        .map_err(|e| Error::image(path, e))?
        .into_rgb8())
}

/// Decodes every mask image of a segment (in parallel) into per-class
/// ground truth. Only the requested classes are kept. Segments with
/// `annotated_frames` yield sparse ground truth.
pub fn load_ground_truth(
    segment: &SegmentManifest,
    palette: &Palette,
    classes: &[String],
) -> Result<BTreeMap<String, GroundTruth>> {
    for c in classes {
        if palette.color(c).is_none() {
            return Err(Error::InvalidPalette(format!("class {c:?} not in palette")));
        }
    }
    let annotated = segment.annotated();
    let decoded: Vec<BTreeMap<String, BinaryMask>> = annotated
        .par_iter()
        .map(|&i| {
            let path = segment.mask_path(i);
            let img = read_rgb(&path)?;
            decode_class_masks(&img, palette)
        })
        .collect::<Result<_>>()?;

    classes
        .iter()
        .map(|class| {
            let masks = annotated
                .iter()
                .zip(&decoded)
                .map(|(&i, m)| (i, m[class].clone()))
                .collect();
            let gt = GroundTruth::sparse(
                &segment.video_id,
                &segment.segment_id,
                class,
                segment.n_frames,
                masks,
            )?;
            Ok((class.clone(), gt))
        })
        .collect()
}

pub fn load_frames(segment: &SegmentManifest) -> Result<Vec<RgbImage>> {
    (0..segment.n_frames)
        .into_par_iter()
        .map(|i| read_rgb(&segment.frame_path(i)))
        .collect()
}
