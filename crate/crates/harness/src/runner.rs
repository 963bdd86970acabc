//! Monte Carlo orchestration: simulate, filter and score every run.

use std::time::Instant;

use anyhow::Result;
use rayon::prelude::*;

use phpmht_core::baseline::ThFilter;
use phpmht_core::existence::{IeFilter, TrackEstimate};
use phpmht_core::gospa::{gospa, rms_over_runs, GospaDecomposition, GospaSummary};
use phpmht_core::image::IntensityImage;
use phpmht_core::simulator::{frame_rng, render_frame_scenario1, render_frame_scenario2, Truth};

use crate::config::{FilterKind, ScenarioConfig};

/// Either filter behind one interface.
pub enum Tracker {
    Ie(Box<IeFilter>),
    Th(Box<ThFilter>),
}

impl Tracker {
    pub fn new(cfg: &ScenarioConfig, kind: FilterKind) -> Result<Self> {
        Ok(match kind {
            FilterKind::Ie => Tracker::Ie(Box::new(IeFilter::new(cfg.ie_config()?)?)),
            FilterKind::Th => Tracker::Th(Box::new(ThFilter::new(cfg.th_config()?)?)),
        })
    }

    pub fn step(&mut self, image: &IntensityImage) -> Result<Vec<TrackEstimate>> {
        Ok(match self {
            Tracker::Ie(f) => f.step(image)?,
            Tracker::Th(f) => f.step(image)?,
        })
    }
}

/// Image of step `k` in run `run`.
pub fn render(cfg: &ScenarioConfig, truth: &Truth, run_seed: u64, k: usize) -> IntensityImage {
    let positions = truth.positions_at(k);
    let mut rng = frame_rng(run_seed, k);
    if let Some(sensor) = cfg.radar_sensor() {
        render_frame_scenario1(&positions, &sensor, k, &mut rng)
    } else {
        let sensor = cfg.powerlaw_sensor().expect("sensor is radar or powerlaw");
        render_frame_scenario2(&positions, &sensor, k, &mut rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub gospa: Vec<GospaDecomposition>,
    /// Filter wall-clock time per step, excluding simulation.
    pub step_seconds: Vec<f64>,
    pub confirmed: Vec<usize>,
    /// Every surviving track after each step.
    pub tracks: Vec<Vec<TrackEstimate>>,
}

impl RunResult {
    pub fn mean_step_seconds(&self) -> f64 {
        self.step_seconds.iter().sum::<f64>() / self.step_seconds.len().max(1) as f64
    }
}

/// One Monte Carlo run with seed `base + run`.
pub fn run_single(cfg: &ScenarioConfig, kind: FilterKind, truth: &Truth, run: usize) -> Result<RunResult> {
    let seed = cfg.seed.wrapping_add(run as u64);
    let mut tracker = Tracker::new(cfg, kind)?;
    let (c, scale) = (cfg.gospa.cutoff(), cfg.gospa.scale());
    let mut out = RunResult {
        run,
        gospa: Vec::with_capacity(truth.steps),
        step_seconds: Vec::with_capacity(truth.steps),
        confirmed: Vec::with_capacity(truth.steps),
        tracks: Vec::with_capacity(truth.steps),
    };
    for k in 1..=truth.steps {
        let image = render(cfg, truth, seed, k);
        let start = Instant::now();
        let tracks = tracker.step(&image)?;
        out.step_seconds.push(start.elapsed().as_secs_f64());
        let estimates: Vec<[f64; 2]> = tracks.iter().filter(|t| t.confirmed).map(|t| t.position).collect();
        out.gospa.push(gospa(&truth.positions_at(k), &estimates, c, scale));
        out.confirmed.push(estimates.len());
        out.tracks.push(tracks);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub filter: FilterKind,
    pub runs: Vec<RunResult>,
    pub summary: GospaSummary,
    pub mean_step_seconds: f64,
}

/// All runs of one filter, in parallel; results are ordered by run index and
/// do not depend on scheduling.
pub fn run_experiment(cfg: &ScenarioConfig, kind: FilterKind) -> Result<Experiment> {
    cfg.validate()?;
    let truth = cfg.truth()?;
    let runs: Vec<RunResult> = (0..cfg.runs)
        .into_par_iter()
        .map(|j| run_single(cfg, kind, &truth, j))
        .collect::<Result<_>>()?;
    let curves: Vec<Vec<GospaDecomposition>> = runs.iter().map(|r| r.gospa.clone()).collect();
    let summary = rms_over_runs(&curves)?;
    let mean_step_seconds = runs.iter().map(RunResult::mean_step_seconds).sum::<f64>() / runs.len() as f64;
    Ok(Experiment {
        filter: kind,
        runs,
        summary,
        mean_step_seconds,
    })
}
