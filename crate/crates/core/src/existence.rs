//! Existence recovery from estimated rates, track lifecycle, and the full
//! IE-PHPMHT recursion.

use crate::em::{em_iterate, EmConfig, EmReport, EmWorkspace, MeasurementModel};
use crate::error::{invalid, Result};
use crate::grid::CvModel;
use crate::image::IntensityImage;
use crate::prediction::{
    merge_rate_prior, predict_existence, predict_state, spawn_births, BernoulliTrack, BirthSpec, ClutterComponent,
    IdAllocator, TrackStatus,
};
use crate::special::{log_exp_pdf, log_gamma_pdf, ExponentialParams, GammaParams};

/// Bayes update of the existence probability from the rate estimate, using
/// the predicted conditional rate priors.
pub fn existence_from_rate(rate: f64, predicted: f64, gamma: &GammaParams, exp: &ExponentialParams) -> f64 {
    let r = predicted.clamp(0.0, 1.0);
    if r == 0.0 {
        return 0.0;
    }
    if r == 1.0 {
        return if log_gamma_pdf(rate, gamma) == f64::NEG_INFINITY {
            0.0
        } else {
            1.0
        };
    }
    let a = log_gamma_pdf(rate, gamma) + r.ln();
    let b = log_exp_pdf(rate, exp) + (1.0 - r).ln();
    if a == f64::NEG_INFINITY {
        return 0.0;
    }
    if b == f64::NEG_INFINITY {
        return 1.0;
    }
    // r = 1 / (1 + exp(b - a))
    let r = 1.0 / (1.0 + (b - a).exp());
    r.clamp(0.0, 1.0)
}

/// Apply [`existence_from_rate`] to a track after its EM update.
pub fn posterior_existence(track: &mut BernoulliTrack) {
    track.existence = existence_from_rate(
        track.rate_estimate,
        track.predicted_existence,
        &track.gamma_exist,
        &track.exp_nonexist,
    );
}

/// Drop tracks below `terminate`, flag the rest as confirmed (above
/// `confirm`) or tentative. Returns the indices of confirmed tracks among the
/// survivors.
pub fn manage_tracks(tracks: &mut Vec<BernoulliTrack>, confirm: f64, terminate: f64) -> Vec<usize> {
    tracks.retain(|t| t.existence >= terminate);
    let mut confirmed = Vec::new();
    for (i, t) in tracks.iter_mut().enumerate() {
        if t.existence > confirm {
            t.status = TrackStatus::Confirmed;
            confirmed.push(i);
        } else {
            t.status = TrackStatus::Tentative;
        }
    }
    confirmed
}

/// How the conditional-on-existence rate prior moves between scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RatePriorPropagation {
    /// Every scan starts again from the birth prior.
    Fixed,
    /// The last gamma posterior becomes the next prior.
    #[default]
    Posterior,
}

#[derive(Debug, Clone)]
pub struct IeConfig {
    pub dynamics: CvModel,
    pub measurement: MeasurementModel,
    pub em: EmConfig,
    pub survival: f64,
    pub births: Vec<BirthSpec>,
    pub nonexist: ExponentialParams,
    pub confirm: f64,
    pub terminate: f64,
    /// Expected clutter intensity summed over the image, and the shape of its
    /// gamma prior.
    pub clutter_rate: f64,
    pub clutter_shape: f64,
    pub rate_propagation: RatePriorPropagation,
}

impl IeConfig {
    pub fn validate(&self) -> Result<()> {
        self.em.validate()?;
        if !(0.0..=1.0).contains(&self.survival) {
            return Err(invalid("survival", "must be a probability"));
        }
        if !(self.terminate >= 0.0 && self.terminate < self.confirm && self.confirm <= 1.0) {
            return Err(invalid("thresholds", "need 0 <= terminate < confirm <= 1"));
        }
        Ok(())
    }
}

/// Position and existence of one track after an update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackEstimate {
    pub id: u64,
    pub position: [f64; 2],
    pub existence: f64,
    pub rate: f64,
    pub confirmed: bool,
}

impl TrackEstimate {
    fn of(t: &BernoulliTrack) -> Self {
        Self {
            id: t.id,
            position: t.position(),
            existence: t.existence,
            rate: t.rate_estimate,
            confirmed: t.status == TrackStatus::Confirmed,
        }
    }
}

/// IE-PHPMHT filter state.
#[derive(Debug, Clone)]
pub struct IeFilter {
    pub config: IeConfig,
    pub tracks: Vec<BernoulliTrack>,
    pub clutter: ClutterComponent,
    ids: IdAllocator,
    workspace: EmWorkspace,
    pub last_report: EmReport,
}

impl IeFilter {
    pub fn new(config: IeConfig) -> Result<Self> {
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

    /// One full scan: predict, merge rate priors, add births, EM, recover
    /// existence, prune. Returns every surviving track.
    pub fn step(&mut self, image: &IntensityImage) -> Result<Vec<TrackEstimate>> {
        let cfg = &self.config;
        for t in &mut self.tracks {
            predict_state(t, &cfg.dynamics);
            predict_existence(t, cfg.survival);
            if cfg.rate_propagation == RatePriorPropagation::Posterior {
                t.gamma_exist = t.posterior_rate;
            }
            merge_rate_prior(t)?;
        }
        let mut born = spawn_births(&cfg.births, image.time, cfg.nonexist, &mut self.ids);
        for t in &mut born {
            merge_rate_prior(t)?;
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

        for t in &mut self.tracks {
            posterior_existence(t);
        }
        manage_tracks(&mut self.tracks, cfg.confirm, cfg.terminate);
        Ok(self.tracks.iter().map(TrackEstimate::of).collect())
    }
}
