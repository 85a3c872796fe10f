mod config;

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use framebias_core::dataset::{
    load_frames, load_ground_truth, load_manifest, Palette, SegmentManifest,
};
use framebias_core::predictor::PredictionJob;
use framebias_core::report::{
    emit_csv, emit_markdown, encoder_command, overlay_dir, read_csv, render_overlays,
    write_markdown, write_overlays, TableLayout,
};
use framebias_core::scenegen::{write_dataset, SceneSpec};
use framebias_core::survey::{Role, Summary, SurveyConfig};
use framebias_core::{
    build_sampling_plan, evaluate, EvalOptions, EvalResult, GroundTruth, PredictionRun, Protocol,
};
use rayon::prelude::*;
use tracing_subscriber::EnvFilter;

use crate::config::{RunArgs, RunConfig};

const LOG_ENV: &str = "FRAMEBIAS_LOG";

#[derive(Parser)]
#[command(
    name = "framebias",
    version,
    about = "Frame-rate evaluation harness for video object segmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the sampled frame indices, one per line
    Plan {
        native_fps: u32,
        target_fps: u32,
        n_frames: usize,
    },
    /// Generate a synthetic dataset from a JSON scene spec
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run predictors and score every (segment, class, fps) cell
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Protocols, comma separated [default: sampled,anchor,streaming]
        #[arg(long, value_delimiter = ',')]
        protocols: Option<Vec<Protocol>>,
        /// Score frames where the class is absent from the ground truth
        #[arg(long)]
        include_absent_gt: bool,
    },
    /// Write overlay PNG sequences and print encoder commands
    Render {
        #[command(flatten)]
        run: RunArgs,
        /// Overlay opacity
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Run the survey service
    Serve {
        /// Survey TOML config
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Render tables from a results CSV, or print survey counts
    Report {
        #[arg(
            long,
            conflicts_with = "survey_url",
            required_unless_present = "survey_url"
        )]
        csv: Option<PathBuf>,
        /// Directory for <protocol>.md files; tables go to stdout when absent
        #[arg(long, requires = "csv")]
        out: Option<PathBuf>,
        /// Base URL of a running survey service
        #[arg(long)]
        survey_url: Option<String>,
    },
}

fn main() -> ExitCode {
    let filter = EnvFilter::try_from_env(LOG_ENV).unwrap_or_else(|_| EnvFilter::new("warn"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();

    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Plan {
            native_fps,
            target_fps,
            n_frames,
        } => {
            let plan = build_sampling_plan(native_fps, target_fps, n_frames)?;
            let lines: Vec<String> = plan
                .sampled_indices()
                .iter()
                .map(|i| i.to_string())
                .collect();
            println!("{}", lines.join("\n"));
            Ok(())
        }
        Command::Synth { spec, out } => {
            let spec = SceneSpec::from_json_file(&spec)?;
            let seg = write_dataset(&spec, &out)?;
            println!(
                "wrote {} frames of {}/{} to {}",
                seg.n_frames,
                seg.video_id,
                seg.segment_id,
                out.display()
            );
            Ok(())
        }
        Command::Evaluate {
            run,
            protocols,
            include_absent_gt,
        } => cmd_evaluate(&RunConfig::from_args(run, protocols, include_absent_gt)?),
        Command::Render { run, alpha } => {
            cmd_render(&RunConfig::from_args(run, None, false)?, alpha)
        }
        Command::Serve { config, addr } => {
            let cfg = SurveyConfig::load(&config)?;
            tokio::runtime::Runtime::new()?
                .block_on(framebias_service::serve(cfg, addr))
                .map_err(|e| anyhow::anyhow!(e))
        }
        Command::Report {
            csv,
            out,
            survey_url,
        } => match (csv, survey_url) {
            (Some(csv), _) => cmd_report_csv(&csv, out.as_deref()),
            (None, Some(url)) => cmd_report_survey(&url),
            (None, None) => bail!("pass --csv or --survey-url"),
        },
    }
}

struct Dataset {
    segments: Vec<SegmentManifest>,
    palette: Palette,
    classes: Vec<String>,
    /// Per segment, per class.
    gts: Vec<BTreeMap<String, GroundTruth>>,
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let segments = load_manifest(&cfg.manifest)?;
    let palette = Palette::load(&cfg.palette)?;
    let classes = match &cfg.classes {
        Some(c) => c.clone(),
        None => palette.classes().map(str::to_owned).collect(),
    };
    let gts = segments
        .iter()
        .map(|seg| {
            load_ground_truth(seg, &palette, &classes).with_context(|| {
                format!(
                    "loading ground truth for {}/{}",
                    seg.video_id, seg.segment_id
                )
            })
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        segments,
        palette,
        classes,
        gts,
    })
}

#[derive(Clone, Copy)]
struct Cell<'a> {
    seg: &'a SegmentManifest,
    gt: &'a GroundTruth,
    fps: u32,
}

impl Cell<'_> {
    fn name(&self) -> String {
        format!(
            "{}/{} {} {}fps",
            self.seg.video_id,
            self.seg.segment_id,
            self.gt.class_id(),
            self.fps
        )
    }

    fn predict(&self, cfg: &RunConfig) -> Result<PredictionRun> {
        let plan = build_sampling_plan(self.seg.native_fps, self.fps, self.seg.n_frames)?;
        let job = PredictionJob::new(self.gt, plan, Some(self.seg.frames_dir.clone()))?;
        Ok(cfg.predictor.predict(&job, self.gt)?)
    }
}

fn cells<'a>(data: &'a Dataset, fps: &[u32]) -> Vec<Cell<'a>> {
    let mut out = Vec::new();
    for (seg, gts) in data.segments.iter().zip(&data.gts) {
        for class in &data.classes {
            for &f in fps {
                out.push(Cell {
                    seg,
                    gt: &gts[class],
                    fps: f,
                });
            }
        }
    }
    out
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let pool = pool(cfg.jobs)?;
    pool.install(|| {
        let data = load_dataset(cfg)?;
        if cfg.protocols.contains(&Protocol::Streaming) {
            for (seg, gts) in data.segments.iter().zip(&data.gts) {
                if let Some(gt) = gts.values().find(|gt| !gt.is_dense()) {
                    let gap = gt.first_gap().unwrap_or_default();
                    bail!(
                        "{}/{}: streaming needs dense ground truth; first missing frame is {gap}",
                        seg.video_id,
                        seg.segment_id
                    );
                }
            }
        }
        let options = EvalOptions {
            exclude_absent_gt: cfg.exclude_absent_gt,
        };
        let cells = cells(&data, &cfg.fps);
        tracing::info!(cells = cells.len(), "evaluating");
        let results: Vec<Vec<EvalResult>> = cells
            .par_iter()
            .map(|cell| {
                let run = cell.predict(cfg).with_context(|| cell.name())?;
                let scored = cfg
                    .protocols
                    .iter()
                    .map(|&p| {
                        evaluate(&run, cell.gt, p, options)
                            .with_context(|| format!("{} {p}", cell.name()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                tracing::debug!(cell = %cell.name(), "done");
                Ok(scored)
            })
            .collect::<Result<_>>()?;
        let results: Vec<EvalResult> = results.into_iter().flatten().collect();

        fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
        let csv_path = cfg.out.join("results.csv");
        emit_csv(&results, &csv_path)?;
        let records = read_csv(&csv_path)?;
        let layout = TableLayout {
            classes: Some(data.classes.clone()),
            fps: Some(cfg.fps.clone()),
        };
        for &p in &cfg.protocols {
            write_markdown(&records, p, &layout, &cfg.out.join(format!("{p}.md")))?;
        }
        println!("wrote {} results to {}", results.len(), cfg.out.display());
        Ok(())
    })
}

fn cmd_render(cfg: &RunConfig, alpha: f64) -> Result<()> {
    let pool = pool(cfg.jobs)?;
    pool.install(|| {
        let data = load_dataset(cfg)?;
        for (seg, gts) in data.segments.iter().zip(&data.gts) {
            let frames = load_frames(seg)?;
            for class in &data.classes {
                let tint = data.palette.color(class).unwrap_or([255, 255, 255]);
                for &fps in &cfg.fps {
                    let cell = Cell {
                        seg,
                        gt: &gts[class],
                        fps,
                    };
                    let run = cell.predict(cfg).with_context(|| cell.name())?;
                    let overlays =
                        render_overlays(&frames, &run, alpha, tint).with_context(|| cell.name())?;
                    let dir = overlay_dir(&cfg.out, &seg.video_id, &seg.segment_id, class, fps);
                    write_overlays(&dir, &overlays)?;
                    println!("{}", encoder_command(&dir, seg.native_fps));
                }
            }
        }
        Ok(())
    })
}

fn cmd_report_csv(csv: &Path, out: Option<&Path>) -> Result<()> {
    let records = read_csv(csv)?;
    let protocols: Vec<Protocol> = Protocol::ALL
        .into_iter()
        .filter(|p| records.iter().any(|r| r.protocol == *p))
        .collect();
    let layout = TableLayout::default();
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for p in protocols {
                write_markdown(&records, p, &layout, &dir.join(format!("{p}.md")))?;
            }
        }
        None => {
            for p in protocols {
                println!("{}", emit_markdown(&records, p, &layout)?);
            }
        }
    }
    Ok(())
}

fn cmd_report_survey(url: &str) -> Result<()> {
    let client = framebias_client::SurveyClient::new(url);
    let summary = tokio::runtime::Runtime::new()?
        .block_on(client.summary())
        .with_context(|| format!("fetching summary from {url}"))?;
    print!("{}", survey_table(&summary));
    Ok(())
}

fn survey_table(summary: &Summary) -> String {
    let mut s = String::from(
        "| comparison | role | higher fps | lower fps | either |\n|---|---|---|---|---|\n",
    );
    for (label, roles) in &summary.comparisons {
        for role in Role::ALL {
            let c = roles.get(&role).copied().unwrap_or_default();
            s += &format!(
                "| {label} | {} | {} | {} | {} |\n",
                role.as_str(),
                c.higher_fps,
                c.lower_fps,
                c.either
            );
        }
    }
    s += &format!("\n{} responses\n", summary.total);
    s
}
