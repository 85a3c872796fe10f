//! Result tables (CSV and Markdown) and overlay stimulus rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::frame_file_name;
use crate::error::{Error, Result};
use crate::protocols::{EvalResult, PredictionRun, Protocol};

pub const CSV_HEADER: &str = "video,segment,class,fps,protocol,mean_iou,evaluated_frames";

/// One CSV row: an [`EvalResult`] without its per-frame series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub video: String,
    pub segment: String,
    pub class: String,
    pub fps: u32,
    pub protocol: Protocol,
    pub mean_iou: f64,
    pub evaluated_frames: usize,
}

impl ResultRecord {
    fn key(&self) -> (&str, &str, &str, u32, Protocol) {
        (
            &self.video,
            &self.segment,
            &self.class,
            self.fps,
            self.protocol,
        )
    }
}

impl From<&EvalResult> for ResultRecord {
    fn from(r: &EvalResult) -> Self {
        Self {
            video: r.video_id.clone(),
            segment: r.segment_id.clone(),
            class: r.class_id.clone(),
            fps: r.target_fps,
            protocol: r.protocol,
            mean_iou: r.mean,
            evaluated_frames: r.evaluated_frames,
        }
    }
}

/// Sorts by key and rejects duplicate keys.
pub fn sorted_records(records: &[ResultRecord]) -> Result<Vec<ResultRecord>> {
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.key().cmp(&b.key()));
    if let Some(w) = sorted.windows(2).find(|w| w[0].key() == w[1].key()) {
        let r = &w[0];
        return Err(Error::Report(format!(
            "duplicate result for {}/{}/{}/{}fps/{}",
            r.video, r.segment, r.class, r.fps, r.protocol
        )));
    }
    Ok(sorted)
}

pub fn csv_string(records: &[ResultRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Report("no results to write".into()));
    }
    let sorted = sorted_records(records)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(true)
        .from_writer(Vec::new());
    for r in &sorted {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Report(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
}

pub fn emit_csv(results: &[EvalResult], path: &Path) -> Result<()> {
    let records: Vec<ResultRecord> = results.iter().map(ResultRecord::from).collect();
    let text = csv_string(&records)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<&str> = rdr.headers()?.iter().collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Report(format!(
            "unexpected csv header {:?}, expected {CSV_HEADER:?}",
            header.join(",")
        )));
    }
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

/// Optional explicit ordering of class groups and fps columns. Missing
/// fields default to sorted order of what the results contain.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableLayout {
    pub classes: Option<Vec<String>>,
    pub fps: Option<Vec<u32>>,
}

/// Mean IoU x100 rounded to one decimal, held as an integer count of tenths.
fn tenths(mean: f64) -> i64 {
    (mean * 1000.0).round() as i64
}

fn format_tenths(t: i64) -> String {
    let sign = if t < 0 { "-" } else { "" };
    format!("{sign}{}.{}", t.abs() / 10, t.abs() % 10)
}

/// One protocol's grid: rows per (video, segment), a column group per class,
/// a column per fps within the group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultTable {
    pub protocol: Protocol,
    pub rows: Vec<(String, String)>,
    pub classes: Vec<String>,
    pub fps: Vec<u32>,
    /// `cells[row][class][fps]` in tenths of a percent.
    pub cells: Vec<Vec<Vec<i64>>>,
    /// `bold[row][class][fps]`: the cell ties for the row/class maximum.
    pub bold: Vec<Vec<Vec<bool>>>,
}

impl ResultTable {
    pub fn build(
        records: &[ResultRecord],
        protocol: Protocol,
        layout: &TableLayout,
    ) -> Result<Self> {
        let mine: Vec<&ResultRecord> = records.iter().filter(|r| r.protocol == protocol).collect();
        if mine.is_empty() {
            return Err(Error::Report(format!("no {protocol} results")));
        }
        let mut by_key = BTreeMap::new();
        for r in &mine {
            if by_key
                .insert(
                    (
                        r.video.as_str(),
                        r.segment.as_str(),
                        r.class.as_str(),
                        r.fps,
                    ),
                    r.mean_iou,
                )
                .is_some()
            {
                return Err(Error::Report(format!(
                    "duplicate result for {} {} {} {}fps {protocol}",
                    r.video, r.segment, r.class, r.fps
                )));
            }
        }

        let rows: Vec<(String, String)> = mine
            .iter()
            .map(|r| (r.video.clone(), r.segment.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let classes = layout.classes.clone().unwrap_or_else(|| {
            mine.iter()
                .map(|r| r.class.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        });
        let fps = layout.fps.clone().unwrap_or_else(|| {
            mine.iter()
                .map(|r| r.fps)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        });

        let mut missing = Vec::new();
        let mut cells = Vec::with_capacity(rows.len());
        for (video, segment) in &rows {
            let mut row = Vec::with_capacity(classes.len());
            for class in &classes {
                let mut group = Vec::with_capacity(fps.len());
                for &f in &fps {
                    match by_key.get(&(video.as_str(), segment.as_str(), class.as_str(), f)) {
                        Some(&m) => group.push(tenths(m)),
                        None => {
                            missing.push(format!("{video} {segment} {class} {f}fps"));
                            group.push(0);
                        }
                    }
                }
                row.push(group);
            }
            cells.push(row);
        }
        if !missing.is_empty() {
            return Err(Error::IncompleteGrid(missing));
        }

        let bold = cells
            .iter()
            .map(|row: &Vec<Vec<i64>>| {
                row.iter()
                    .map(|group| {
                        let best = group.iter().copied().max().unwrap_or(i64::MIN);
                        group.iter().map(|&c| c == best).collect()
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            protocol,
            rows,
            classes,
            fps,
            cells,
            bold,
        })
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "## {}\n", self.protocol.title());
        out.push_str("| Video Segment |");
        for class in &self.classes {
            for f in &self.fps {
                let _ = write!(out, " {class} {f} |");
            }
        }
        out.push_str("\n| --- |");
        for _ in 0..self.classes.len() * self.fps.len() {
            out.push_str(" ---: |");
        }
        out.push('\n');
        for (ri, (video, segment)) in self.rows.iter().enumerate() {
            let _ = write!(out, "| {video} {segment} |");
            for (ci, group) in self.cells[ri].iter().enumerate() {
                for (fi, &t) in group.iter().enumerate() {
                    let v = format_tenths(t);
                    if self.bold[ri][ci][fi] {
                        let _ = write!(out, " **{v}** |");
                    } else {
                        let _ = write!(out, " {v} |");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn emit_markdown(
    records: &[ResultRecord],
    protocol: Protocol,
    layout: &TableLayout,
) -> Result<String> {
    Ok(ResultTable::build(records, protocol, layout)?.to_markdown())
}

pub fn write_markdown(
    records: &[ResultRecord],
    protocol: Protocol,
    layout: &TableLayout,
    path: &Path,
) -> Result<()> {
    let text = emit_markdown(records, protocol, layout)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Composites every native frame with the prediction on screen at that frame
/// (hold assignment), tinted at `alpha`.
pub fn render_overlays(
    frames: &[RgbImage],
    run: &PredictionRun,
    alpha: f64,
    tint: [u8; 3],
) -> Result<Vec<RgbImage>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Report(format!(
            "alpha must be in (0, 1], got {alpha}"
        )));
    }
    if frames.len() != run.plan().n_frames() {
        return Err(Error::Report(format!(
            "run covers {} frames, {} frames given",
            run.plan().n_frames(),
            frames.len()
        )));
    }
    frames
        .par_iter()
        .enumerate()
        .map(|(j, frame)| {
            let mask = run.held_mask(j)?;
            let (w, h) = frame.dimensions();
            if mask.dims() != (w, h) {
                return Err(Error::DimensionMismatch {
                    left_w: w,
                    left_h: h,
                    right_w: mask.width(),
                    right_h: mask.height(),
                });
            }
            let mut out = frame.clone();
            for (x, y) in mask.ones() {
                let px = out.get_pixel(x, y).0;
                let blended: [u8; 3] = std::array::from_fn(|c| {
                    (alpha * tint[c] as f64 + (1.0 - alpha) * px[c] as f64).round() as u8
                });
                out.put_pixel(x, y, Rgb(blended));
            }
            Ok(out)
        })
        .collect()
}

/// `<out>/<video>/<segment>/<class>/<fps>`
pub fn overlay_dir(out: &Path, video: &str, segment: &str, class: &str, fps: u32) -> PathBuf {
    out.join(video)
        .join(segment)
        .join(class)
        .join(fps.to_string())
}

pub fn write_overlays(dir: &Path, overlays: &[RgbImage]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    overlays.par_iter().enumerate().try_for_each(|(j, img)| {
        let p = dir.join(frame_file_name(j));
        img.save(&p).map_err(|e| Error::image(&p, e))
    })
}

/// Shell command that encodes an overlay PNG sequence into a video. The
/// harness never runs it.
pub fn encoder_command(dir: &Path, native_fps: u32) -> String {
    let d = dir.display();
    format!(
        "ffmpeg -y -framerate {native_fps} -i '{d}/%05d.png' -c:v libx264 -pix_fmt yuv420p '{d}.mp4'"
    )
}
