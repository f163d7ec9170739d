//! Constant-velocity Kalman filter over `[u, v, s, r, du, dv, ds]`.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::geometry::CsrBox;

pub type StateVector = SVector<f64, 7>;
pub type StateCovariance = SMatrix<f64, 7, 7>;
type MeasurementMatrix = SMatrix<f64, 4, 7>;
type MeasurementVector = SVector<f64, 4>;

/// Aspect ratio never drops below this after a correction.
const MIN_ASPECT: f64 = 1e-6;

/// Noise magnitudes for the box filter. All entries are diagonal variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanParams {
    pub initial_variance: [f64; 7],
    pub process_noise: [f64; 7],
    pub measurement_noise: [f64; 4],
    /// Predicted area never drops below this (px²).
    pub scale_floor: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self {
            initial_variance: [10.0, 10.0, 100.0, 0.01, 1e4, 1e4, 1e4],
            process_noise: [1.0, 1.0, 1.0, 1e-4, 0.01, 0.01, 1e-4],
            measurement_noise: [1.0, 1.0, 10.0, 0.01],
            scale_floor: 1.0,
        }
    }
}

impl KalmanParams {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .initial_variance
            .iter()
            .chain(&self.process_noise)
            .chain(&self.measurement_noise);
        for v in all {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "noise variances must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.scale_floor.is_nan() || self.scale_floor <= 0.0 {
            return Err(Error::InvalidArgument("scale floor must be positive".into()));
        }
        Ok(())
    }

    fn transition() -> StateCovariance {
        let mut f = StateCovariance::identity();
        f[(0, 4)] = 1.0;
        f[(1, 5)] = 1.0;
        f[(2, 6)] = 1.0;
        f
    }

    fn observation() -> MeasurementMatrix {
        MeasurementMatrix::identity()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackStatus {
    Tentative,
    Active,
    Dormant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
    pub identity: u64,
    /// Consecutive frames with a matched detection.
    pub hits: u32,
    /// Consecutive frames without a matched detection.
    pub misses: u32,
    pub status: TrackStatus,
}

impl TrackState {
    /// Current position estimate in measurement space.
    pub fn csr(&self) -> CsrBox {
        CsrBox {
            u: self.mean[0],
            v: self.mean[1],
            s: self.mean[2],
            r: self.mean[3],
        }
    }
}

fn measurement(z: &CsrBox) -> Result<MeasurementVector> {
    z.validate()?;
    if z.s <= 0.0 {
        return Err(Error::Degenerate(format!("zero-area measurement {z:?}")));
    }
    Ok(MeasurementVector::new(z.u, z.v, z.s, z.r))
}

fn symmetrize(p: &StateCovariance) -> StateCovariance {
    (p + p.transpose()) * 0.5
}

/// Starts a track at rest on `z` with the configured initial uncertainty.
pub fn kf_init(z: &CsrBox, identity: u64, params: &KalmanParams) -> Result<TrackState> {
    let m = measurement(z)?;
    let mut mean = StateVector::zeros();
    mean.fixed_rows_mut::<4>(0).copy_from(&m);
    Ok(TrackState {
        mean,
        covariance: StateCovariance::from_diagonal(&StateVector::from(params.initial_variance)),
        identity,
        hits: 1,
        misses: 0,
        status: TrackStatus::Tentative,
    })
}

/// Propagates one frame ahead. Returns the predicted measurement and state.
pub fn kf_predict(state: &TrackState, params: &KalmanParams) -> Result<(CsrBox, TrackState)> {
    if state.status == TrackStatus::Dormant {
        return Err(Error::InvalidArgument(format!(
            "track {} is dormant and has no motion state",
            state.identity
        )));
    }
    let f = KalmanParams::transition();
    let mut next = state.clone();
    next.mean = f * state.mean;
    next.mean[2] = next.mean[2].max(params.scale_floor);
    let q = StateCovariance::from_diagonal(&StateVector::from(params.process_noise));
    next.covariance = symmetrize(&(f * state.covariance * f.transpose() + q));
    Ok((next.csr(), next))
}

/// Kalman correction against `z`. Resets misses and counts a hit.
pub fn kf_update(state: &TrackState, z: &CsrBox, params: &KalmanParams) -> Result<TrackState> {
    if state.status == TrackStatus::Dormant {
        return Err(Error::InvalidArgument(format!(
            "track {} is dormant and has no motion state",
            state.identity
        )));
    }
    let z = measurement(z)?;
    let h = KalmanParams::observation();
    let r = SMatrix::<f64, 4, 4>::from_diagonal(&MeasurementVector::from(params.measurement_noise));
    let p = &state.covariance;

    let innovation = z - h * state.mean;
    let s = h * p * h.transpose() + r;
    let s_chol = s.cholesky().ok_or(Error::SingularInnovation)?;
    // K = P H^T S^-1, computed as (S^-1 H P)^T since S and P are symmetric.
    let gain = s_chol.solve(&(h * p)).transpose();

    let mut next = state.clone();
    next.mean = state.mean + gain * innovation;
    next.mean[3] = next.mean[3].max(MIN_ASPECT);
    // Joseph form keeps the posterior symmetric PSD.
    let i_kh = StateCovariance::identity() - gain * h;
    next.covariance = symmetrize(&(i_kh * p * i_kh.transpose() + gain * r * gain.transpose()));
    next.hits = state.hits.saturating_add(1);
    next.misses = 0;
    Ok(next)
}

/// Smallest eigenvalue of the symmetric part, and the max asymmetry.
pub fn covariance_health(p: &StateCovariance) -> (f64, f64) {
    let asym = (p - p.transpose()).abs().max();
    let min_eig = symmetrize(p).symmetric_eigenvalues().min();
    (min_eig, asym)
}
