//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use framebias_core::predictor::{JitterConfig, Predictor};
use framebias_core::{Protocol, DEFAULT_FPS};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Oracle,
    Lag,
    Jitter,
    External,
}

/// File form. Relative paths resolve against the file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    dataset: Option<PathBuf>,
    manifest: Option<PathBuf>,
    palette: Option<PathBuf>,
    fps: Option<Vec<u32>>,
    protocols: Option<Vec<Protocol>>,
    classes: Option<Vec<String>>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    include_absent_gt: Option<bool>,
    #[serde(default)]
    predictor: FilePredictor,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePredictor {
    kind: Option<PredictorKind>,
    sigma: Option<f64>,
    seed: Option<u64>,
    command: Option<Vec<String>>,
    timeout_s: Option<u64>,
}

/// Flags shared by `evaluate` and `render`. Every flag overrides the
/// matching config file entry.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset root; manifest.json and palette.json are looked up here by default
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub palette: Option<PathBuf>,
    /// Target frame rates, comma separated [default: 1,10,15,20,25]
    #[arg(long, value_delimiter = ',')]
    pub fps: Option<Vec<u32>>,
    /// Classes to evaluate, comma separated [default: every palette class]
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    #[arg(long, value_enum)]
    pub predictor: Option<PredictorKind>,
    /// Jitter step standard deviation in pixels
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// External adapter command; the job file path is appended as the last argument
    #[arg(long, num_args = 1.., allow_hyphen_values = true)]
    pub adapter_cmd: Option<Vec<String>>,
    /// External adapter timeout in seconds
    #[arg(long)]
    pub timeout: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Parallel evaluations [default: available cores]
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub palette: PathBuf,
    pub fps: Vec<u32>,
    pub protocols: Vec<Protocol>,
    pub classes: Option<Vec<String>>,
    pub predictor: Predictor,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub exclude_absent_gt: bool,
}

fn resolve(base: &Path, p: Option<PathBuf>) -> Option<PathBuf> {
    p.map(|p| base.join(p))
}

impl RunConfig {
    pub fn from_args(
        args: RunArgs,
        protocols: Option<Vec<Protocol>>,
        include_absent_gt: bool,
    ) -> Result<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config {}", path.display()))?;
                let cfg: FileConfig = toml::from_str(&text)
                    .with_context(|| format!("invalid config {}", path.display()))?;
                let base = path.parent().unwrap_or(Path::new(""));
                FileConfig {
                    dataset: resolve(base, cfg.dataset),
                    manifest: resolve(base, cfg.manifest),
                    palette: resolve(base, cfg.palette),
                    out: resolve(base, cfg.out),
                    ..cfg
                }
            }
            None => FileConfig::default(),
        };

        let dataset = args.dataset.or(file.dataset);
        let from_dataset = |name: &str| dataset.as_ref().map(|d| d.join(name));
        let Some(manifest) = args
            .manifest
            .or(file.manifest)
            .or_else(|| from_dataset("manifest.json"))
        else {
            bail!("no dataset given: pass --dataset or --manifest");
        };
        let Some(palette) = args
            .palette
            .or(file.palette)
            .or_else(|| from_dataset("palette.json"))
        else {
            bail!("no palette given: pass --dataset or --palette");
        };
        let Some(out) = args.out.or(file.out) else {
            bail!("no output directory given: pass --out");
        };

        let fps = args
            .fps
            .or(file.fps)
            .unwrap_or_else(|| DEFAULT_FPS.to_vec());
        if fps.is_empty() {
            bail!("fps list is empty");
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = fps.iter().find(|f| !seen.insert(**f)) {
            bail!("fps {dup} listed twice");
        }
        let protocols = protocols
            .or(file.protocols)
            .unwrap_or_else(|| Protocol::ALL.to_vec());
        if protocols.is_empty() {
            bail!("protocol list is empty");
        }

        let fp = file.predictor;
        let kind = args.predictor.or(fp.kind).unwrap_or(PredictorKind::Oracle);
        let predictor = match kind {
            PredictorKind::Oracle => Predictor::Oracle,
            PredictorKind::Lag => Predictor::Lag,
            PredictorKind::Jitter => {
                let sigma = args.sigma.or(fp.sigma).unwrap_or(1.0);
                let seed = args.seed.or(fp.seed).unwrap_or(0);
                Predictor::StepJitter(JitterConfig::new(sigma, seed)?)
            }
            PredictorKind::External => {
                let Some(command) = args.adapter_cmd.or(fp.command) else {
                    bail!("external predictor needs --adapter-cmd");
                };
                let timeout = args.timeout.or(fp.timeout_s).unwrap_or(3600);
                Predictor::External {
                    command,
                    base_dir: out.join("adapter"),
                    timeout: Duration::from_secs(timeout),
                }
            }
        };

        let jobs = args.jobs.or(file.jobs);
        if jobs == Some(0) {
            bail!("--jobs must be at least 1");
        }
        Ok(Self {
            manifest,
            palette,
            fps,
            protocols,
            classes: args.classes.or(file.classes),
            predictor,
            out,
            jobs,
            exclude_absent_gt: !(include_absent_gt || file.include_absent_gt.unwrap_or(false)),
        })
    }
}
