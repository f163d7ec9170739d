use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use handtrack::analytics::{render_trajectory_map, RenderStyle};
use handtrack::data::{
    compute_sampling_plan, read_detections, read_ground_truth, read_manifests, read_tracks,
    split_dataset, write_detections, write_report, write_tracks, ReadOptions, DEFAULT_SPLIT_FRAMES,
    FRAMES_PER_VIDEO,
};
use handtrack::pipeline::{analyze_video, evaluate, smooth_detections, track_detections, TrackOptions};
use handtrack::smoothing::DEFAULT_IOU_LINK;
use handtrack::tracking::TrackerConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "handtrack", version, about = "Hand detection evaluation, tracking and motion analytics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Average precision of predictions against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Reject records with unknown fields.
        #[arg(long)]
        strict: bool,
    },
    /// Track detections per video, optionally after smoothing.
    Track {
        #[arg(long)]
        det: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        smooth: bool,
        #[arg(long, default_value_t = DEFAULT_IOU_LINK)]
        iou_link: f64,
        /// Delete exited identities instead of reusing them.
        #[arg(long)]
        no_reuse: bool,
        #[command(flatten)]
        tracker: TrackerArgs,
    },
    /// Three-frame voting pass over a detections file.
    Smooth {
        #[arg(long)]
        det: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_IOU_LINK)]
        iou_link: f64,
    },
    /// Trajectory map and motion report for one video of a track file.
    Analyze {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        out_svg: PathBuf,
        #[arg(long)]
        out_report: PathBuf,
        /// Required when the file holds more than one video.
        #[arg(long)]
        video: Option<String>,
        #[arg(long)]
        width: Option<f64>,
        #[arg(long)]
        height: Option<f64>,
        /// Frame rate for px/s speeds.
        #[arg(long)]
        fps: Option<f64>,
        /// Image drawn beneath the trajectories.
        #[arg(long)]
        background: Option<String>,
    },
    /// Frames to extract from each video in a manifest.
    SamplePlan {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Video-level train/val/test split.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Frame targets for train, val and test.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SPLIT_FRAMES)]
        frames: Vec<usize>,
        #[arg(long, default_value_t = FRAMES_PER_VIDEO)]
        frames_per_video: usize,
        /// Also list (video, frame) pairs per set.
        #[arg(long)]
        list_frames: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// HTTP API for the annotation and review UI.
    Serve {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
}

#[derive(Debug, Args)]
pub struct TrackerArgs {
    /// Association IoU gate.
    #[arg(long, default_value_t = 0.3)]
    pub iou_min: f64,
    #[arg(long, default_value_t = 3)]
    pub max_age: u32,
    #[arg(long, default_value_t = 1)]
    pub min_hits: u32,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(e) | Failure::Data(e) => write!(f, "{e:#}"),
        }
    }
}

trait DataContext<T> {
    fn data(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> DataContext<T> for Result<T, E> {
    fn data(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Data(e.into()))
    }
}

fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(anyhow::anyhow!("{} does not exist", path.display())))
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    require_file(path)?;
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("opening {}", path.display()))
        .data()
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .data()
}

fn emit_json(out: Option<&Path>, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).data()? + "\n";
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .data(),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).data()?;
            stdout.flush().data()
        }
    }
}

fn with_path<T>(path: &Path, r: handtrack::Result<T>) -> Result<T, Failure> {
    r.with_context(|| format!("reading {}", path.display())).data()
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Eval { pred, gt, iou, strict } => {
            if !(iou > 0.0 && iou <= 1.0) {
                return Err(Failure::Usage(anyhow::anyhow!("--iou must lie in (0, 1]")));
            }
            let opts = ReadOptions { strict };
            let preds = with_path(&pred, read_detections(open(&pred)?, opts))?;
            let gts = with_path(&gt, read_ground_truth(open(&gt)?, opts))?;
            let report = evaluate(&preds, &gts, iou).data()?;
            emit_json(None, &report)
        }
        Command::Track { det, out, smooth, iou_link, no_reuse, tracker } => {
            let dets = with_path(&det, read_detections(open(&det)?, ReadOptions::default()))?;
            let opts = TrackOptions {
                tracker: TrackerConfig {
                    iou_min: tracker.iou_min,
                    max_age: tracker.max_age,
                    min_hits: tracker.min_hits,
                    reuse_identities: !no_reuse,
                    ..TrackerConfig::default()
                },
                smoothing: smooth.then_some(iou_link),
            };
            opts.tracker.validate().map_err(|e| Failure::Usage(e.into()))?;
            let tracks = track_detections(&dets, &opts).data()?;
            write_tracks(create(&out)?, &tracks).data()
        }
        Command::Smooth { det, out, iou_link } => {
            let dets = with_path(&det, read_detections(open(&det)?, ReadOptions::default()))?;
            let smoothed = smooth_detections(&dets, iou_link).map_err(|e| Failure::Usage(e.into()))?;
            write_detections(create(&out)?, &smoothed).data()
        }
        Command::Analyze {
            tracks,
            out_svg,
            out_report,
            video,
            width,
            height,
            fps,
            background,
        } => {
            let records = with_path(&tracks, read_tracks(open(&tracks)?, ReadOptions::default()))?;
            let mut videos: Vec<&str> = records.iter().map(|r| r.video_id.as_str()).collect();
            videos.sort_unstable();
            videos.dedup();
            let video = match (video, videos.as_slice()) {
                (Some(v), _) => v,
                (None, [only]) => only.to_string(),
                (None, []) => {
                    return Err(Failure::Data(anyhow::anyhow!("{} has no tracks", tracks.display())))
                }
                (None, many) => {
                    return Err(Failure::Usage(anyhow::anyhow!(
                        "track file holds {} videos; pick one with --video",
                        many.len()
                    )))
                }
            };
            let (trajs, report) = analyze_video(&records, &video, fps).data()?;
            let extent = records
                .iter()
                .filter(|r| r.video_id == video)
                .fold((1.0f64, 1.0f64), |(w, h), r| (w.max(r.bbox.x2()), h.max(r.bbox.y2())));
            let w = width.unwrap_or(extent.0.ceil());
            let h = height.unwrap_or(extent.1.ceil());
            let style = RenderStyle {
                background_href: background,
                ..RenderStyle::default()
            };
            let svg = render_trajectory_map(&trajs, w, h, &style).map_err(|e| Failure::Usage(e.into()))?;
            std::fs::write(&out_svg, svg)
                .with_context(|| format!("writing {}", out_svg.display()))
                .data()?;
            write_report(create(&out_report)?, &report).data()
        }
        Command::SamplePlan { manifest, out } => {
            let manifests = with_path(&manifest, read_manifests(open(&manifest)?))?;
            let plans = manifests
                .iter()
                .map(compute_sampling_plan)
                .collect::<handtrack::Result<Vec<_>>>()
                .data()?;
            emit_json(out.as_deref(), &plans)
        }
        Command::Split {
            manifest,
            seed,
            frames,
            frames_per_video,
            list_frames,
            out,
        } => {
            let manifests = with_path(&manifest, read_manifests(open(&manifest)?))?;
            let targets: [usize; 3] = frames
                .try_into()
                .map_err(|_| Failure::Usage(anyhow::anyhow!("--frames takes three counts")))?;
            let split = split_dataset(&manifests, frames_per_video, targets, seed).data()?;
            if list_frames {
                let sets = split.frame_sets(&manifests).data()?;
                let mut doc = serde_json::to_value(&split).data()?;
                for (set, frames) in doc["sets"].as_array_mut().into_iter().flatten().zip(sets) {
                    set["frame_list"] = serde_json::to_value(frames).data()?;
                }
                emit_json(out.as_deref(), &doc)
            } else {
                emit_json(out.as_deref(), &split)
            }
        }
        Command::Serve { data, bind } => {
            if !data.is_dir() {
                return Err(Failure::Usage(anyhow::anyhow!("{} is not a directory", data.display())));
            }
            let rt = tokio::runtime::Runtime::new().data()?;
            rt.block_on(crate::service::serve(data, bind)).data()
        }
    }
}
