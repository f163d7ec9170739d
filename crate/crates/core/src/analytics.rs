//! Epicenter trajectories, economy-of-motion statistics and SVG trajectory maps.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracking::TrackedBox;

/// Qualitative palette cycled by identity rank.
pub const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub frame_index: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub identity: u64,
    /// Strictly increasing in `frame_index`; gaps are allowed.
    pub points: Vec<TrajectoryPoint>,
}

/// Groups tracked boxes by identity and maps each to its center, ordered by
/// frame. Trajectories come back sorted by identity. If an identity appears
/// twice in one frame only the first box is kept.
pub fn extract_trajectories(tracks: &[TrackedBox]) -> Vec<Trajectory> {
    let mut by_id: BTreeMap<u64, BTreeMap<u64, TrajectoryPoint>> = BTreeMap::new();
    for t in tracks {
        let (x, y) = t.bbox.center();
        by_id
            .entry(t.identity)
            .or_default()
            .entry(t.frame_index)
            .or_insert(TrajectoryPoint {
                frame_index: t.frame_index,
                x,
                y,
            });
    }
    by_id
        .into_iter()
        .map(|(identity, pts)| Trajectory {
            identity,
            points: pts.into_values().collect(),
        })
        .collect()
}

/// Motion summary for one identity. Distances in px, speeds in px/frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionMetrics {
    pub identity: u64,
    pub frames_observed: usize,
    pub path_length: f64,
    pub net_displacement: f64,
    pub path_efficiency: f64,
    pub mean_speed: f64,
    pub max_speed: f64,
    /// Segments that bridge missing frames; each counts as one straight line.
    pub gap_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_speed_px_per_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_speed_px_per_s: Option<f64>,
}

/// Path length, displacement, efficiency and speeds of a trajectory. When
/// `fps` is given the speeds are also reported in px/s.
pub fn motion_metrics(traj: &Trajectory, fps: Option<f64>) -> Result<MotionMetrics> {
    let first = traj.points.first().ok_or(Error::EmptyTrajectory)?;
    let last = traj.points.last().ok_or(Error::EmptyTrajectory)?;
    if let Some(fps) = fps {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
        }
    }
    let mut path_length = 0.0;
    let mut max_speed: f64 = 0.0;
    let mut gap_count = 0;
    for w in traj.points.windows(2) {
        let d = (w[1].x - w[0].x).hypot(w[1].y - w[0].y);
        let frames = w[1].frame_index.saturating_sub(w[0].frame_index).max(1);
        if frames > 1 {
            gap_count += 1;
        }
        path_length += d;
        max_speed = max_speed.max(d / frames as f64);
    }
    let net_displacement = (last.x - first.x).hypot(last.y - first.y);
    let elapsed = last.frame_index - first.frame_index;
    let mean_speed = if elapsed == 0 {
        0.0
    } else {
        path_length / elapsed as f64
    };
    let path_efficiency = if path_length == 0.0 {
        1.0
    } else {
        (net_displacement / path_length).min(1.0)
    };
    Ok(MotionMetrics {
        identity: traj.identity,
        frames_observed: traj.points.len(),
        path_length,
        net_displacement,
        path_efficiency,
        mean_speed,
        max_speed,
        gap_count,
        mean_speed_px_per_s: fps.map(|f| mean_speed * f),
        max_speed_px_per_s: fps.map(|f| max_speed * f),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderStyle {
    pub stroke_width: f64,
    /// Image drawn underneath the trajectories, e.g. a representative frame.
    pub background_href: Option<String>,
    pub legend: bool,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            stroke_width: 2.0,
            background_href: None,
            legend: true,
        }
    }
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Color of the trajectory at `rank` in identity order.
pub fn palette_color(rank: usize) -> &'static str {
    PALETTE[rank % PALETTE.len()]
}

/// Renders one polyline per non-empty trajectory in frame coordinates as an
/// SVG 1.1 document. Colors follow identity order through [`PALETTE`].
pub fn render_trajectory_map(
    trajs: &[Trajectory],
    frame_w: f64,
    frame_h: f64,
    style: &RenderStyle,
) -> Result<String> {
    if !(frame_w > 0.0 && frame_h > 0.0 && frame_w.is_finite() && frame_h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "frame size must be positive, got {frame_w}x{frame_h}"
        )));
    }
    let mut ordered: Vec<&Trajectory> = trajs.iter().filter(|t| !t.points.is_empty()).collect();
    ordered.sort_by_key(|t| t.identity);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" version="1.1" width="{frame_w}" height="{frame_h}" viewBox="0 0 {frame_w} {frame_h}">"#
    );
    match &style.background_href {
        Some(href) => {
            let _ = writeln!(
                svg,
                r#"  <image id="background" x="0" y="0" width="{frame_w}" height="{frame_h}" xlink:href="{}"/>"#,
                escape_xml(href)
            );
        }
        None => {
            let _ = writeln!(
                svg,
                r##"  <rect id="background" x="0" y="0" width="{frame_w}" height="{frame_h}" fill="#ffffff"/>"##
            );
        }
    }
    let _ = writeln!(svg, r#"  <g id="trajectories" fill="none">"#);
    for (rank, t) in ordered.iter().enumerate() {
        let points = t
            .points
            .iter()
            .map(|p| format!("{},{}", p.x, p.y))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            svg,
            r#"    <polyline id="track-{}" points="{points}" stroke="{}" stroke-width="{}" stroke-linejoin="round" stroke-linecap="round"/>"#,
            t.identity,
            palette_color(rank),
            style.stroke_width
        );
    }
    let _ = writeln!(svg, "  </g>");
    if style.legend {
        let _ = writeln!(svg, r#"  <g id="legend" font-family="sans-serif" font-size="12">"#);
        for (rank, t) in ordered.iter().enumerate() {
            let y = 10.0 + 16.0 * rank as f64;
            let _ = writeln!(
                svg,
                r#"    <rect x="10" y="{y}" width="12" height="12" fill="{}"/>"#,
                palette_color(rank)
            );
            let _ = writeln!(
                svg,
                r#"    <text x="28" y="{}">id {}</text>"#,
                y + 10.0,
                t.identity
            );
        }
        let _ = writeln!(svg, "  </g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
