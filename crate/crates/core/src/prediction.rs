//! Multi-Bernoulli time prediction: kinematics, existence, births, and the
//! existence-weighted merge of the Poisson-rate prior.

use nalgebra::{Matrix4, Vector4};

use crate::error::{invalid, Result};
use crate::grid::{CvModel, GaussianState};
use crate::special::{merge_exp_gamma, ExponentialParams, GammaParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

impl TrackStatus {
    pub fn is_alive(self) -> bool {
        self != TrackStatus::Dead
    }
}

/// One potential target.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliTrack {
    pub id: u64,
    /// Predicted density before the update, posterior density after it.
    pub state: GaussianState,
    /// Rate prior given the target exists.
    pub gamma_exist: GammaParams,
    /// Rate prior given the target does not exist.
    pub exp_nonexist: ExponentialParams,
    /// Single-gamma approximation of the existence-weighted rate prior.
    pub merged_prior: GammaParams,
    /// Gamma posterior of the rate from the last EM update.
    pub posterior_rate: GammaParams,
    pub existence: f64,
    /// Existence after prediction, before the measurement update.
    pub predicted_existence: f64,
    pub rate_estimate: f64,
    pub status: TrackStatus,
    /// Time step at which the track was spawned.
    pub born: usize,
}

impl BernoulliTrack {
    pub fn position(&self) -> [f64; 2] {
        self.state.position()
    }
}

/// Uniform clutter component, index zero of the measurement mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClutterComponent {
    pub rate_estimate: f64,
    pub merged_prior: GammaParams,
    pub posterior_rate: GammaParams,
}

impl ClutterComponent {
    /// Clutter prior with the given expected total intensity and shape.
    pub fn new(expected_rate: f64, shape: f64) -> Result<Self> {
        if !(expected_rate > 0.0) {
            return Err(invalid("clutter rate", format!("must be positive, got {expected_rate}")));
        }
        let prior = GammaParams::new(shape, shape / expected_rate)?;
        Ok(Self {
            rate_estimate: expected_rate,
            merged_prior: prior,
            posterior_rate: prior,
        })
    }

    /// The last posterior becomes the next prior; clutter has no dynamics.
    pub fn predict(&mut self) {
        self.merged_prior = self.posterior_rate;
    }
}

/// Known birth location of a potential target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthSpec {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
    pub birth_probability: f64,
    pub gamma_init: GammaParams,
}

impl BirthSpec {
    pub fn new(
        mean: Vector4<f64>,
        cov: Matrix4<f64>,
        birth_probability: f64,
        gamma_init: GammaParams,
    ) -> Result<Self> {
        if !(birth_probability > 0.0 && birth_probability <= 1.0) {
            return Err(invalid(
                "birth_probability",
                format!("must be in (0, 1], got {birth_probability}"),
            ));
        }
        Ok(Self {
            mean,
            cov,
            birth_probability,
            gamma_init,
        })
    }
}

/// Monotone track-id source; ids are never reused within a run.
#[derive(Debug, Clone, Default)]
pub struct IdAllocator {
    next: u64,
}

impl IdAllocator {
    pub fn next_id(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        id
    }
}

/// Kalman time update of the kinematic state.
pub fn predict_state(track: &mut BernoulliTrack, model: &CvModel) {
    let s = &mut track.state;
    s.mean = model.f * s.mean;
    s.cov = model.f * s.cov * model.f.transpose() + model.q;
    s.cov = 0.5 * (s.cov + s.cov.transpose());
}

/// Survival step; non-existence is absorbing.
pub fn predict_existence(track: &mut BernoulliTrack, survival: f64) {
    track.existence *= survival;
    track.predicted_existence = track.existence;
}

/// Replace the existence-weighted exponential/gamma rate prior with its
/// KL-closest gamma.
pub fn merge_rate_prior(track: &mut BernoulliTrack) -> Result<()> {
    let r = track.existence.clamp(0.0, 1.0);
    track.merged_prior = merge_exp_gamma(1.0 - r, &track.exp_nonexist, r, &track.gamma_exist)?;
    Ok(())
}

/// One tentative track per birth spec.
pub fn spawn_births(
    specs: &[BirthSpec],
    time: usize,
    nonexist: ExponentialParams,
    ids: &mut IdAllocator,
) -> Vec<BernoulliTrack> {
    specs
        .iter()
        .map(|spec| BernoulliTrack {
            id: ids.next_id(),
            state: GaussianState::new(spec.mean, spec.cov),
            gamma_exist: spec.gamma_init,
            exp_nonexist: nonexist,
            merged_prior: spec.gamma_init,
            posterior_rate: spec.gamma_init,
            existence: spec.birth_probability,
            predicted_existence: spec.birth_probability,
            rate_estimate: spec.gamma_init.mean(),
            status: TrackStatus::Tentative,
            born: time,
        })
        .collect()
}
