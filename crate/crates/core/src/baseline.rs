//! TH-PHPMHT: the same EM core with forgetting on the rate prior and track
//! management by thresholding an SNR estimate.

use crate::em::{em_iterate, EmConfig, EmReport, EmWorkspace, MeasurementModel};
use crate::error::{invalid, Result};
use crate::existence::TrackEstimate;
use crate::grid::{CvModel, Grid};
use crate::image::IntensityImage;
use crate::prediction::{predict_state, spawn_births, BernoulliTrack, BirthSpec, ClutterComponent, IdAllocator, TrackStatus};
use crate::special::{ExponentialParams, GammaParams};

/// Flatten a gamma by `eta`: same mean, `eta` times the variance.
pub fn forget_gamma(p: &GammaParams, eta: f64) -> GammaParams {
    GammaParams {
        shape: p.shape / eta,
        rate: p.rate / eta,
    }
}

/// Peak SNR (dB) implied by a total target intensity `rate` under a Gaussian
/// PSF with standard deviations `spread`. `-inf` for a zero rate.
pub fn estimate_snr(rate: f64, grid: &Grid, spread: [f64; 2], noise_power: f64) -> f64 {
    let amplitude = rate * grid.dx * grid.dy / (2.0 * std::f64::consts::PI * spread[0] * spread[1]);
    10.0 * (amplitude * amplitude / noise_power).log10()
}

/// Confirm at or above `confirm_db` (confirmation is kept once reached),
/// delete below `delete_db`. Returns indices of confirmed tracks.
pub fn th_manage(tracks: &mut Vec<BernoulliTrack>, snr_db: &[f64], confirm_db: f64, delete_db: f64) -> Vec<usize> {
    assert_eq!(tracks.len(), snr_db.len());
    let mut keep = snr_db.iter().map(|&s| s >= delete_db);
    tracks.retain(|_| keep.next().unwrap());
    let kept: Vec<f64> = snr_db.iter().copied().filter(|&s| s >= delete_db).collect();
    let mut confirmed = Vec::new();
    for (i, (t, &s)) in tracks.iter_mut().zip(&kept).enumerate() {
        if s >= confirm_db {
            t.status = TrackStatus::Confirmed;
        }
        if t.status == TrackStatus::Confirmed {
            confirmed.push(i);
        }
    }
    confirmed
}

#[derive(Debug, Clone)]
pub struct ThConfig {
    pub dynamics: CvModel,
    pub measurement: MeasurementModel,
    pub em: EmConfig,
    pub births: Vec<BirthSpec>,
    pub forgetting: f64,
    /// PSF standard deviations and noise power assumed by the SNR estimate.
    pub psf_spread: [f64; 2],
    pub noise_power: f64,
    pub confirm_db: f64,
    pub delete_db: f64,
    pub clutter_rate: f64,
    pub clutter_shape: f64,
}

impl ThConfig {
    pub fn validate(&self) -> Result<()> {
        self.em.validate()?;
        if !(self.forgetting >= 1.0) {
            return Err(invalid("forgetting", "must be at least 1"));
        }
        if !(self.delete_db < self.confirm_db) {
            return Err(invalid("snr thresholds", "deletion must be below confirmation"));
        }
        if !(self.noise_power > 0.0) {
            return Err(invalid("noise_power", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ThFilter {
    pub config: ThConfig,
    pub tracks: Vec<BernoulliTrack>,
    pub clutter: ClutterComponent,
    ids: IdAllocator,
    workspace: EmWorkspace,
    pub last_report: EmReport,
}

impl ThFilter {
    pub fn new(config: ThConfig) -> Result<Self> {
        config.validate()?;
        let clutter = ClutterComponent::new(config.clutter_rate, config.clutter_shape)?;
        Ok(Self {
            config,
            tracks: Vec::new(),
            clutter,
            ids: IdAllocator::default(),
            workspace: EmWorkspace::new(),
            last_report: EmReport::default(),
        })
    }

    pub fn step(&mut self, image: &IntensityImage) -> Result<Vec<TrackEstimate>> {
        let cfg = &self.config;
        for t in &mut self.tracks {
            predict_state(t, &cfg.dynamics);
            t.merged_prior = forget_gamma(&t.posterior_rate, cfg.forgetting);
        }
        // Existence is not modelled; the exponential part is never used.
        let unused = ExponentialParams { rate: 1.0 };
        let mut born = spawn_births(&cfg.births, image.time, unused, &mut self.ids);
        for t in &mut born {
            t.existence = 1.0;
            t.predicted_existence = 1.0;
        }
        self.tracks.extend(born);
        self.clutter.predict();

        self.last_report = em_iterate(
            image,
            &mut self.tracks,
            &mut self.clutter,
            &cfg.measurement,
            &cfg.em,
            &mut self.workspace,
            false,
        )?;

        let snr: Vec<f64> = self
            .tracks
            .iter()
            .map(|t| estimate_snr(t.rate_estimate, &image.grid, cfg.psf_spread, cfg.noise_power))
            .collect();
        th_manage(&mut self.tracks, &snr, cfg.confirm_db, cfg.delete_db);
        Ok(self
            .tracks
            .iter()
            .map(|t| TrackEstimate {
                id: t.id,
                position: t.position(),
                existence: t.existence,
                rate: t.rate_estimate,
                confirmed: t.status == TrackStatus::Confirmed,
            })
            .collect())
    }
}
