//! File formats and dataset construction.

pub mod dataset;
pub mod records;

pub use dataset::{
    compute_sampling_plan, read_manifests, split_dataset, write_manifests, Category, DatasetSplit,
    SamplingPlan, SplitSet, VideoManifest, DEFAULT_SPLIT_FRAMES, FRAMES_PER_VIDEO, WORKING_FPS,
};
pub use records::{
    parse_annotation_document, read_annotations, read_detections, read_ground_truth,
    read_records, read_report, read_tracks, to_canonical_line, write_annotations,
    write_detections, write_records, write_report, write_tracks, Detection, FieldError,
    FrameAnnotation, GroundTruthFrame, HandBox, Handedness, LineRecord, MotionReport, ReadOptions,
    TrackProvenance, TrackRecord,
};
