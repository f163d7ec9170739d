//! HTTP backend for the annotation and track-review UI.
//!
//! Data directory layout:
//!
//! ```text
//! manifest.json                      video manifests (JSON array)
//! frames/<video>/<frame>.{jpg,png}   pre-extracted frame images
//! annotations/<video>/<frame>.json   one canonical annotation record
//! tracks/<video>.jsonl               tracker output for review overlays
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::Context;
use axum::body::Body;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::json;

use handtrack::data::{
    compute_sampling_plan, parse_annotation_document, read_annotations, read_manifests,
    read_tracks, to_canonical_line, FrameAnnotation, ReadOptions, VideoManifest,
};

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

type KeyLocks = Mutex<HashMap<(String, u64), Arc<Mutex<()>>>>;

struct Inner {
    data_dir: PathBuf,
    manifests: Vec<VideoManifest>,
    /// One lock per (video, frame); a PUT holds it across check and write.
    locks: KeyLocks,
}

impl AppState {
    pub fn open(data_dir: impl Into<PathBuf>) -> anyhow::Result<Self> {
        let data_dir = data_dir.into();
        let manifest_path = data_dir.join("manifest.json");
        let file = std::fs::File::open(&manifest_path)
            .with_context(|| format!("opening {}", manifest_path.display()))?;
        let manifests = read_manifests(std::io::BufReader::new(file))
            .with_context(|| format!("reading {}", manifest_path.display()))?;
        for m in &manifests {
            anyhow::ensure!(safe_id(&m.video_id), "unsafe video id {:?}", m.video_id);
        }
        Ok(Self {
            inner: Arc::new(Inner {
                data_dir,
                manifests,
                locks: Mutex::new(HashMap::new()),
            }),
        })
    }

    fn manifest(&self, video: &str) -> Option<&VideoManifest> {
        self.inner.manifests.iter().find(|m| m.video_id == video)
    }

    fn annotation_path(&self, video: &str, frame: u64) -> PathBuf {
        self.inner
            .data_dir
            .join("annotations")
            .join(video)
            .join(format!("{frame}.json"))
    }

    fn key_lock(&self, video: &str, frame: u64) -> Arc<Mutex<()>> {
        let mut locks = self.inner.locks.lock().expect("lock table poisoned");
        locks
            .entry((video.to_string(), frame))
            .or_insert_with(|| Arc::new(Mutex::new(())))
            .clone()
    }

    fn load_annotation(&self, video: &str, frame: u64) -> anyhow::Result<FrameAnnotation> {
        let path = self.annotation_path(video, frame);
        match std::fs::read(&path) {
            Ok(bytes) => {
                let mut docs = read_annotations(bytes.as_slice(), ReadOptions { strict: true })?;
                docs.pop()
                    .with_context(|| format!("{} is empty", path.display()))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Ok(FrameAnnotation::empty(video, frame))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Saves `doc` if its `rev` equals the stored revision, bumping it by one.
    pub fn save_annotation(&self, doc: FrameAnnotation) -> Result<FrameAnnotation, SaveError> {
        let lock = self.key_lock(&doc.video_id, doc.frame);
        let _guard = lock.lock().expect("annotation lock poisoned");
        let current = self
            .load_annotation(&doc.video_id, doc.frame)
            .map_err(SaveError::Io)?;
        if current.rev != doc.rev {
            return Err(SaveError::Conflict {
                current_rev: current.rev,
            });
        }
        let stored = FrameAnnotation {
            rev: current.rev + 1,
            ..doc
        };
        let path = self.annotation_path(&stored.video_id, stored.frame);
        write_atomically(&path, format!("{}\n", to_canonical_line(&stored)).as_bytes())
            .map_err(SaveError::Io)?;
        Ok(stored)
    }
}

#[derive(Debug)]
pub enum SaveError {
    Conflict { current_rev: u64 },
    Io(anyhow::Error),
}

fn write_atomically(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().context("annotation path has no parent")?;
    std::fs::create_dir_all(dir)?;
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Video ids become path components, so only plain names are accepted.
fn safe_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn error(status: StatusCode, body: serde_json::Value) -> Response {
    (status, Json(body)).into_response()
}

fn not_found(what: &str) -> Response {
    error(StatusCode::NOT_FOUND, json!({ "error": "not_found", "message": what }))
}

fn internal(e: anyhow::Error) -> Response {
    tracing::error!("{e:#}");
    error(
        StatusCode::INTERNAL_SERVER_ERROR,
        json!({ "error": "internal", "message": format!("{e:#}") }),
    )
}

fn ndjson(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

fn canonical_json(doc: &FrameAnnotation) -> Response {
    (
        [(header::CONTENT_TYPE, "application/json")],
        to_canonical_line(doc),
    )
        .into_response()
}

async fn list_videos(State(state): State<AppState>) -> Response {
    Json(&state.inner.manifests).into_response()
}

async fn video_frames(State(state): State<AppState>, UrlPath(video): UrlPath<String>) -> Response {
    let Some(m) = state.manifest(&video) else {
        return not_found("unknown video");
    };
    let plan = match compute_sampling_plan(m) {
        Ok(p) => p,
        Err(e) => return internal(e.into()),
    };
    let frames: Vec<_> = plan
        .frames
        .iter()
        .map(|f| {
            json!({
                "frame": f,
                "url": format!("/api/frames/{video}/{f}"),
                "annotation_url": format!("/api/annotations/{video}/{f}"),
            })
        })
        .collect();
    Json(json!({ "plan": plan, "frames": frames })).into_response()
}

async fn frame_image(
    State(state): State<AppState>,
    UrlPath((video, frame)): UrlPath<(String, u64)>,
) -> Response {
    if state.manifest(&video).is_none() {
        return not_found("unknown video");
    }
    let dir = state.inner.data_dir.join("frames").join(&video);
    for (ext, mime) in [("jpg", "image/jpeg"), ("jpeg", "image/jpeg"), ("png", "image/png")] {
        let path = dir.join(format!("{frame}.{ext}"));
        match tokio::fs::read(&path).await {
            Ok(bytes) => return ([(header::CONTENT_TYPE, mime)], Body::from(bytes)).into_response(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
            Err(e) => return internal(e.into()),
        }
    }
    not_found("frame image not extracted")
}

async fn get_annotation(
    State(state): State<AppState>,
    UrlPath((video, frame)): UrlPath<(String, u64)>,
) -> Response {
    if state.manifest(&video).is_none() {
        return not_found("unknown video");
    }
    match state.load_annotation(&video, frame) {
        Ok(doc) => canonical_json(&doc),
        Err(e) => internal(e),
    }
}

async fn put_annotation(
    State(state): State<AppState>,
    UrlPath((video, frame)): UrlPath<(String, u64)>,
    body: String,
) -> Response {
    if state.manifest(&video).is_none() {
        return not_found("unknown video");
    }
    let doc = match parse_annotation_document(&body) {
        Ok(doc) => doc,
        Err(fe) => {
            return error(
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "validation", "path": fe.path, "message": fe.message }),
            )
        }
    };
    if doc.video_id != video || doc.frame != frame {
        let path = if doc.video_id != video { "video_id" } else { "frame" };
        return error(
            StatusCode::UNPROCESSABLE_ENTITY,
            json!({ "error": "validation", "path": path, "message": "does not match the URL" }),
        );
    }
    let state2 = state.clone();
    let result = tokio::task::spawn_blocking(move || state2.save_annotation(doc)).await;
    match result {
        Ok(Ok(stored)) => canonical_json(&stored),
        Ok(Err(SaveError::Conflict { current_rev })) => error(
            StatusCode::CONFLICT,
            json!({ "error": "conflict", "current_rev": current_rev }),
        ),
        Ok(Err(SaveError::Io(e))) => internal(e),
        Err(e) => internal(e.into()),
    }
}

async fn get_tracks(State(state): State<AppState>, UrlPath(video): UrlPath<String>) -> Response {
    if state.manifest(&video).is_none() {
        return not_found("unknown video");
    }
    let path = state.inner.data_dir.join("tracks").join(format!("{video}.jsonl"));
    let bytes = match tokio::fs::read(&path).await {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return ndjson(String::new()),
        Err(e) => return internal(e.into()),
    };
    match read_tracks(bytes.as_slice(), ReadOptions::default()) {
        Ok(records) => ndjson(
            records
                .iter()
                .filter(|r| r.video_id == video)
                .map(|r| format!("{}\n", to_canonical_line(r)))
                .collect(),
        ),
        Err(e) => internal(e.into()),
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/videos", get(list_videos))
        .route("/api/videos/{id}/frames", get(video_frames))
        .route("/api/frames/{video}/{frame}", get(frame_image))
        .route(
            "/api/annotations/{video}/{frame}",
            get(get_annotation).put(put_annotation),
        )
        .route("/api/tracks/{video}", get(get_tracks))
        .with_state(state)
}

pub async fn serve(data_dir: PathBuf, bind: std::net::SocketAddr) -> anyhow::Result<()> {
    let state = AppState::open(data_dir)?;
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .with_context(|| format!("binding {bind}"))?;
    tracing::info!("serving on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
