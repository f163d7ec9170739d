//! SORT-style multi-object tracking: Kalman propagation, Hungarian
//! association on IoU, and a lifecycle that can recycle exited identities.

pub mod hungarian;
pub mod kalman;
pub mod metrics;
pub mod tracker;

pub use hungarian::{assignment_cost, hungarian};
pub use kalman::{
    covariance_health, kf_init, kf_predict, kf_update, KalmanParams, TrackState, TrackStatus,
};
pub use metrics::{count_identity_switches, IdentityReport};
pub use tracker::{associate, Association, Provenance, TrackedBox, Tracker, TrackerConfig};
