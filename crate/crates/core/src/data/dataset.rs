//! Video manifests, frame sampling plans and the video-level dataset split.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frame rate every video is resampled to before frame selection.
pub const WORKING_FPS: f64 = 15.0;
/// Longer videos are cut to their central window of this length.
pub const MAX_WINDOW_S: f64 = 20.0 * 60.0;
pub const FRAMES_PER_VIDEO: usize = 10;
/// Train / validation / test frame counts.
pub const DEFAULT_SPLIT_FRAMES: [usize; 3] = [940, 380, 560];
pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Breast,
    Gastrointestinal,
    HeadAndNeck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoManifest {
    pub video_id: String,
    pub category: Category,
    pub duration_s: f64,
    pub native_fps: f64,
    /// Width and height in pixels.
    pub resolution: [u32; 2],
}

impl VideoManifest {
    pub fn validate(&self) -> Result<()> {
        if self.video_id.is_empty() {
            return Err(Error::InvalidArgument("manifest video_id is empty".into()));
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.duration_s) || !positive(self.native_fps) {
            return Err(Error::InvalidArgument(format!(
                "video {}: duration and fps must be positive",
                self.video_id
            )));
        }
        if self.resolution.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "video {}: resolution must be positive",
                self.video_id
            )));
        }
        Ok(())
    }
}

pub fn read_manifests(reader: impl std::io::Read) -> Result<Vec<VideoManifest>> {
    let manifests: Vec<VideoManifest> =
        serde_json::from_reader(reader).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
    for m in &manifests {
        m.validate()?;
    }
    Ok(manifests)
}

pub fn write_manifests(mut writer: impl std::io::Write, manifests: &[VideoManifest]) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, manifests).map_err(std::io::Error::from)?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Frames selected from one video, indexed at [`WORKING_FPS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub video_id: String,
    pub working_fps: f64,
    /// Start and end of the processed window in seconds.
    pub window: [f64; 2],
    pub frames: Vec<u64>,
}

/// Picks [`FRAMES_PER_VIDEO`] frames at the centers of equal sub-intervals of
/// the processed window (the whole video, or its middle 20 minutes).
pub fn compute_sampling_plan(m: &VideoManifest) -> Result<SamplingPlan> {
    m.validate()?;
    if m.duration_s * WORKING_FPS < FRAMES_PER_VIDEO as f64 {
        return Err(Error::InvalidArgument(format!(
            "video {} is shorter than {FRAMES_PER_VIDEO} frames at {WORKING_FPS} fps",
            m.video_id
        )));
    }
    let (start, end) = if m.duration_s <= MAX_WINDOW_S {
        (0.0, m.duration_s)
    } else {
        let start = (m.duration_s - MAX_WINDOW_S) / 2.0;
        (start, start + MAX_WINDOW_S)
    };
    let start_frame = start * WORKING_FPS;
    let step = (end - start) * WORKING_FPS / FRAMES_PER_VIDEO as f64;
    let frames = (0..FRAMES_PER_VIDEO)
        .map(|k| {
            let center = start_frame + (k as f64 + 0.5) * step;
            // Guard against centers like 449.99999 landing one frame early.
            (center + 1e-9).floor() as u64
        })
        .collect();
    Ok(SamplingPlan {
        video_id: m.video_id.clone(),
        working_fps: WORKING_FPS,
        window: [start, end],
        frames,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSet {
    pub name: String,
    pub videos: Vec<String>,
    pub frames: usize,
    pub per_category: BTreeMap<Category, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub frames_per_video: usize,
    pub sets: Vec<SplitSet>,
}

impl DatasetSplit {
    /// `(video_id, frame)` lists per set, using each video's sampling plan.
    pub fn frame_sets(&self, manifests: &[VideoManifest]) -> Result<Vec<Vec<(String, u64)>>> {
        let by_id: BTreeMap<&str, &VideoManifest> =
            manifests.iter().map(|m| (m.video_id.as_str(), m)).collect();
        self.sets
            .iter()
            .map(|set| {
                let mut out = Vec::new();
                for v in &set.videos {
                    let m = by_id.get(v.as_str()).ok_or_else(|| {
                        Error::InvalidArgument(format!("video {v} missing from manifests"))
                    })?;
                    let plan = compute_sampling_plan(m)?;
                    out.extend(plan.frames.into_iter().map(|f| (v.clone(), f)));
                }
                Ok(out)
            })
            .collect()
    }
}

/// Largest-remainder apportionment of `total` in proportion to `weights`.
fn apportion(total: usize, weights: &[usize]) -> Vec<usize> {
    let wsum: usize = weights.iter().sum();
    if wsum == 0 {
        return vec![0; weights.len()];
    }
    let mut alloc: Vec<usize> = weights.iter().map(|w| total * w / wsum).collect();
    let mut rema: Vec<(usize, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| ((total * w) % wsum, i))
        .collect();
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = total - alloc.iter().sum::<usize>();
    for &(_, i) in rema.iter().take(short) {
        alloc[i] += 1;
    }
    alloc
}

/// Rounds the proportional `rows x cols` table `row_totals[r] * col_totals[c] / N`
/// to integers (each cell floor or ceil) so that both margins are exact.
fn controlled_rounding(row_totals: &[usize], col_totals: &[usize]) -> Result<Vec<Vec<usize>>> {
    let n: usize = row_totals.iter().sum();
    let rows = row_totals.len();
    let cols = col_totals.len();
    let mut table = vec![vec![0usize; cols]; rows];
    // Remainder numerators; a cell may round up iff its remainder is nonzero.
    let mut rem = vec![vec![0usize; cols]; rows];
    for r in 0..rows {
        for c in 0..cols {
            let prod = row_totals[r] * col_totals[c];
            table[r][c] = prod / n;
            rem[r][c] = prod % n;
        }
    }
    let mut row_need: Vec<usize> =
        (0..rows).map(|r| row_totals[r] - table[r].iter().sum::<usize>()).collect();
    let mut col_need: Vec<usize> = (0..cols)
        .map(|c| col_totals[c] - (0..rows).map(|r| table[r][c]).sum::<usize>())
        .collect();
    let mut bumped = vec![vec![false; cols]; rows];

    // Augmenting paths over row -> col edges (forward if not bumped and the
    // cell has a remainder, backward if bumped). Larger remainders first.
    fn augment(
        r: usize,
        rem: &[Vec<usize>],
        bumped: &mut [Vec<bool>],
        col_need: &mut [usize],
        seen: &mut [bool],
    ) -> bool {
        let cols = col_need.len();
        let mut order: Vec<usize> = (0..cols).filter(|&c| rem[r][c] > 0 && !bumped[r][c]).collect();
        order.sort_by(|&a, &b| rem[r][b].cmp(&rem[r][a]).then(a.cmp(&b)));
        for c in order {
            if seen[c] {
                continue;
            }
            seen[c] = true;
            if col_need[c] > 0 {
                col_need[c] -= 1;
                bumped[r][c] = true;
                return true;
            }
            // Reroute: some other row currently bumped in column c moves on.
            for r2 in 0..bumped.len() {
                if r2 != r && bumped[r2][c] {
                    bumped[r2][c] = false;
                    if augment(r2, rem, bumped, col_need, seen) {
                        bumped[r][c] = true;
                        return true;
                    }
                    bumped[r2][c] = true;
                }
            }
        }
        false
    }

    for (r, need) in row_need.iter_mut().enumerate() {
        while *need > 0 {
            let mut seen = vec![false; cols];
            if !augment(r, &rem, &mut bumped, &mut col_need, &mut seen) {
                return Err(Error::InfeasibleSplit(
                    "could not balance categories across sets".into(),
                ));
            }
            *need -= 1;
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            table[r][c] += bumped[r][c] as usize;
        }
    }
    Ok(table)
}

/// Partitions videos (never frames) into train/val/test so the sets hold
/// `target_frames` frames and every category follows the global ratio.
/// Deterministic for a given seed and independent of input order.
pub fn split_dataset(
    manifests: &[VideoManifest],
    frames_per_video: usize,
    target_frames: [usize; 3],
    seed: u64,
) -> Result<DatasetSplit> {
    if frames_per_video == 0 {
        return Err(Error::InvalidArgument("frames_per_video must be positive".into()));
    }
    let mut seen = BTreeSet::new();
    for m in manifests {
        m.validate()?;
        if !seen.insert(m.video_id.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate video {}", m.video_id)));
        }
    }
    let n = manifests.len();
    let total_frames: usize = target_frames.iter().sum();
    let divisible = target_frames.iter().all(|t| t % frames_per_video == 0);
    if !divisible || total_frames != n * frames_per_video {
        let nearest = apportion(n, &target_frames);
        let frames: Vec<usize> = nearest.iter().map(|v| v * frames_per_video).collect();
        return Err(Error::InfeasibleSplit(format!(
            "targets {target_frames:?} cannot be met with {n} videos x {frames_per_video} frames; \
             nearest achievable: {nearest:?} videos = {frames:?} frames"
        )));
    }
    let video_targets: Vec<usize> = target_frames.iter().map(|t| t / frames_per_video).collect();

    let mut by_cat: BTreeMap<Category, Vec<&str>> = BTreeMap::new();
    for m in manifests {
        by_cat.entry(m.category).or_default().push(&m.video_id);
    }
    let cats: Vec<Category> = by_cat.keys().copied().collect();
    let row_totals: Vec<usize> = cats.iter().map(|c| by_cat[c].len()).collect();
    let table = controlled_rounding(&row_totals, &video_targets)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets: Vec<SplitSet> = SPLIT_NAMES
        .iter()
        .map(|name| SplitSet {
            name: name.to_string(),
            videos: Vec::new(),
            frames: 0,
            per_category: BTreeMap::new(),
        })
        .collect();
    for (ci, cat) in cats.iter().enumerate() {
        let mut ids = by_cat[cat].clone();
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let mut it = ids.into_iter();
        for (si, set) in sets.iter_mut().enumerate() {
            let k = table[ci][si];
            set.videos.extend(it.by_ref().take(k).map(str::to_string));
            set.per_category.insert(*cat, k);
        }
    }
    for set in &mut sets {
        set.videos.sort();
        set.frames = set.videos.len() * frames_per_video;
    }
    Ok(DatasetSplit {
        seed,
        frames_per_video,
        sets,
    })
}
