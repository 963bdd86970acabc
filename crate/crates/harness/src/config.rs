//! Experiment description, read from and written to TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use phpmht_core::baseline::ThConfig;
use phpmht_core::em::{EmConfig, MeasurementModel};
use phpmht_core::existence::{IeConfig, RatePriorPropagation};
use phpmht_core::grid::{cv_matrices, Grid};
use phpmht_core::prediction::BirthSpec;
use phpmht_core::simulator::{self, Fluctuation, PowerlawSensor, RadarSensor, ScenarioId, Truth};
use phpmht_core::special::{ExponentialParams, GammaParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Scenario1,
    Scenario2,
}

impl Scenario {
    pub fn grid(self) -> Grid {
        match self {
            Scenario::Scenario1 => simulator::scenario1_grid(),
            Scenario::Scenario2 => simulator::scenario2_grid(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Scenario1 => "scenario1",
            Scenario::Scenario2 => "scenario2",
        }
    }
}

impl From<ScenarioId> for Scenario {
    fn from(id: ScenarioId) -> Self {
        match id {
            ScenarioId::Scenario1 => Scenario::Scenario1,
            ScenarioId::Scenario2 => Scenario::Scenario2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Ie,
    Th,
}

impl FilterKind {
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Ie => "ie",
            FilterKind::Th => "th",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluctuationModel {
    Swerling0,
    Swerling1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SensorConfig {
    /// Rayleigh noise, Gaussian PSF.
    Radar {
        snr_db: f64,
        noise_power: f64,
        fluctuation: FluctuationModel,
        psf_var: [f64; 2],
    },
    /// Gaussian noise, inverse-power PSF.
    Powerlaw {
        phi: f64,
        eps: f64,
        beta: f64,
        noise_sd: f64,
    },
}

impl SensorConfig {
    /// Mean per-cell intensity of an empty scene.
    pub fn mean_noise_intensity(&self) -> f64 {
        match *self {
            SensorConfig::Radar { noise_power, .. } => (std::f64::consts::PI * noise_power).sqrt() / 2.0,
            SensorConfig::Powerlaw { noise_sd, .. } => noise_sd / (2.0 * std::f64::consts::PI).sqrt(),
        }
    }

    pub fn noise_power(&self) -> f64 {
        match *self {
            SensorConfig::Radar { noise_power, .. } => noise_power,
            SensorConfig::Powerlaw { noise_sd, .. } => noise_sd * noise_sd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    /// Plain-text trajectory file; the built-in scenario truth when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
    /// CV process-noise intensity for generated trajectories; zero gives
    /// straight lines.
    #[serde(default)]
    pub process_noise: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub period: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Measurement spread `R` diagonal (m²).
    pub spread: [f64; 2],
    pub inflate_by_state: bool,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub min_cell_mass: f64,
    /// Expected clutter intensity summed over the image; derived from the
    /// sensor noise when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clutter_rate: Option<f64>,
    pub clutter_shape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthConfig {
    pub positions: Vec<[f64; 2]>,
    pub cov_diag: [f64; 4],
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagation {
    Fixed,
    Posterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IeSection {
    pub p_s: f64,
    pub p_b: f64,
    pub t_c: f64,
    pub t_d: f64,
    /// Rate of the exponential rate prior given non-existence.
    pub gamma: f64,
    pub rate_propagation: Propagation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThSection {
    pub eta: f64,
    pub s_c: f64,
    pub s_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GospaConfig {
    /// Cut-off as a multiple of `cell_size`.
    pub c_factor: f64,
    pub cell_size: f64,
    /// Report errors in cells rather than metres.
    pub normalise: bool,
}

impl GospaConfig {
    pub fn cutoff(&self) -> f64 {
        self.c_factor * self.cell_size
    }

    pub fn scale(&self) -> f64 {
        if self.normalise {
            self.cell_size
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub filter: FilterKind,
    pub runs: usize,
    pub seed: u64,
    pub sensor: SensorConfig,
    pub truth: TruthConfig,
    pub dynamics: DynamicsConfig,
    pub model: ModelConfig,
    pub birth: BirthConfig,
    pub ie: IeSection,
    pub th: ThSection,
    pub gospa: GospaConfig,
}

impl ScenarioConfig {
    /// Radar scenario at the given SNR and fluctuation model.
    pub fn scenario1(fluctuation: FluctuationModel) -> Self {
        let (snr_db, eta) = match fluctuation {
            FluctuationModel::Swerling0 => (5.0, 3.0),
            FluctuationModel::Swerling1 => (12.0, 10.0),
        };
        Self {
            scenario: Scenario::Scenario1,
            filter: FilterKind::Ie,
            runs: 100,
            seed: 1,
            sensor: SensorConfig::Radar {
                snr_db,
                // Puts a target's summed amplitude near the prior mean α/β.
                noise_power: 64.0,
                fluctuation,
                psf_var: [20.0, 90.0],
            },
            truth: TruthConfig {
                fixture: None,
                process_noise: 0.0,
                seed: 0,
            },
            dynamics: DynamicsConfig { period: 1.0, q: 0.01 },
            model: ModelConfig {
                spread: [20.0, 90.0],
                inflate_by_state: false,
                max_iters: 20,
                rel_tol: 1e-4,
                min_cell_mass: 1e-12,
                clutter_rate: None,
                clutter_shape: 1.0,
            },
            birth: BirthConfig {
                positions: vec![[500.0, 250.0]],
                cov_diag: [100.0, 10.0, 100.0, 10.0],
                alpha: 20.0,
                beta: 1.0,
            },
            ie: IeSection {
                p_s: 0.98,
                p_b: 1e-5,
                t_c: 0.5,
                t_d: 1e-6,
                gamma: 1.0,
                rate_propagation: Propagation::Posterior,
            },
            th: ThSection {
                eta,
                s_c: 0.0,
                s_d: -10.0,
            },
            gospa: GospaConfig {
                c_factor: 2.0,
                cell_size: 10.0,
                normalise: true,
            },
        }
    }

    /// Five crossing targets on the small grid.
    pub fn scenario2() -> Self {
        Self {
            scenario: Scenario::Scenario2,
            filter: FilterKind::Ie,
            runs: 100,
            seed: 1,
            sensor: SensorConfig::Powerlaw {
                phi: 400.0,
                eps: 25.0,
                beta: 2.0,
                noise_sd: 1.0,
            },
            truth: TruthConfig {
                fixture: None,
                process_noise: 0.25,
                seed: 0,
            },
            dynamics: DynamicsConfig { period: 1.0, q: 0.25 },
            model: ModelConfig {
                spread: [20.0, 20.0],
                inflate_by_state: false,
                max_iters: 20,
                rel_tol: 1e-4,
                min_cell_mass: 1e-12,
                clutter_rate: None,
                clutter_shape: 1.0,
            },
            birth: BirthConfig {
                positions: simulator::SCENARIO2_BIRTH_POSITIONS.to_vec(),
                cov_diag: [10.0, 10.0, 10.0, 10.0],
                alpha: 20.0,
                beta: 1.0,
            },
            ie: IeSection {
                p_s: 0.99,
                p_b: 1e-4,
                t_c: 0.5,
                t_d: 0.01,
                gamma: 1.0,
                rate_propagation: Propagation::Posterior,
            },
            th: ThSection {
                eta: 3.0,
                s_c: 0.0,
                s_d: -10.0,
            },
            gospa: GospaConfig {
                c_factor: 3.0,
                cell_size: 4.8,
                normalise: false,
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing scenario config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
        // Fixture paths are relative to the config file.
        if let (Some(f), Some(dir)) = (&cfg.truth.fixture, path.parent()) {
            if f.is_relative() {
                cfg.truth.fixture = Some(dir.join(f));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            bail!("runs must be at least 1");
        }
        let positive = [
            ("dynamics.period", self.dynamics.period),
            ("model.spread[0]", self.model.spread[0]),
            ("model.spread[1]", self.model.spread[1]),
            ("model.clutter_shape", self.model.clutter_shape),
            ("birth.alpha", self.birth.alpha),
            ("birth.beta", self.birth.beta),
            ("ie.gamma", self.ie.gamma),
            ("gospa.c_factor", self.gospa.c_factor),
            ("gospa.cell_size", self.gospa.cell_size),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be positive, got {v}");
            }
        }
        if self.dynamics.q < 0.0 || self.truth.process_noise < 0.0 {
            bail!("process noise must be nonnegative");
        }
        if self.birth.cov_diag.iter().any(|v| !(*v > 0.0)) {
            bail!("birth.cov_diag entries must be positive");
        }
        if let Some(rate) = self.model.clutter_rate {
            if !(rate > 0.0) {
                bail!("model.clutter_rate must be positive");
            }
        }
        match self.sensor {
            SensorConfig::Radar {
                noise_power, psf_var, ..
            } => {
                if self.scenario != Scenario::Scenario1 {
                    bail!("radar sensor belongs to scenario1");
                }
                if !(noise_power > 0.0 && psf_var[0] > 0.0 && psf_var[1] > 0.0) {
                    bail!("radar noise power and PSF variances must be positive");
                }
            }
            SensorConfig::Powerlaw { phi, eps, beta, noise_sd } => {
                if self.scenario != Scenario::Scenario2 {
                    bail!("powerlaw sensor belongs to scenario2");
                }
                if !(phi > 0.0 && eps > 0.0 && beta > 0.0 && noise_sd >= 0.0) {
                    bail!("powerlaw parameters must be positive");
                }
            }
        }
        self.ie_config().context("ie section")?;
        self.th_config().context("th section")?;
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        self.scenario.grid()
    }

    pub fn truth(&self) -> Result<Truth> {
        if let Some(path) = &self.truth.fixture {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(Truth::from_text(&text)?);
        }
        Ok(match self.scenario {
            Scenario::Scenario1 => {
                let noise = (self.truth.process_noise > 0.0).then_some((self.truth.process_noise, self.truth.seed));
                simulator::scenario1_truth(noise)
            }
            Scenario::Scenario2 => simulator::scenario2_truth(),
        })
    }

    pub fn radar_sensor(&self) -> Option<RadarSensor> {
        match self.sensor {
            SensorConfig::Radar {
                snr_db,
                noise_power,
                fluctuation,
                psf_var,
            } => {
                let f = match fluctuation {
                    FluctuationModel::Swerling0 => Fluctuation::Swerling0,
                    FluctuationModel::Swerling1 => Fluctuation::Swerling1,
                };
                Some(RadarSensor::with_snr_db(self.grid(), psf_var, noise_power, snr_db, f))
            }
            SensorConfig::Powerlaw { .. } => None,
        }
    }

    pub fn powerlaw_sensor(&self) -> Option<PowerlawSensor> {
        match self.sensor {
            SensorConfig::Powerlaw { phi, eps, beta, noise_sd } => Some(PowerlawSensor {
                grid: self.grid(),
                phi,
                eps,
                beta,
                noise_sd,
            }),
            SensorConfig::Radar { .. } => None,
        }
    }

    pub fn clutter_rate(&self) -> f64 {
        self.model
            .clutter_rate
            .unwrap_or_else(|| self.grid().len() as f64 * self.sensor.mean_noise_intensity())
    }

    fn measurement(&self) -> Result<MeasurementModel> {
        let mut m = MeasurementModel::new(self.grid(), self.model.spread)?;
        m.inflate_by_state = self.model.inflate_by_state;
        Ok(m)
    }

    fn em(&self) -> EmConfig {
        EmConfig {
            max_iters: self.model.max_iters,
            rel_tol: self.model.rel_tol,
            min_cell_mass: self.model.min_cell_mass,
        }
    }

    fn births(&self, probability: f64) -> Result<Vec<BirthSpec>> {
        let gamma = GammaParams::new(self.birth.alpha, self.birth.beta)?;
        let cov = Matrix4::from_diagonal(&Vector4::from(self.birth.cov_diag));
        self.birth
            .positions
            .iter()
            .map(|p| Ok(BirthSpec::new(Vector4::new(p[0], 0.0, p[1], 0.0), cov, probability, gamma)?))
            .collect()
    }

    pub fn ie_config(&self) -> Result<IeConfig> {
        let cfg = IeConfig {
            dynamics: cv_matrices(self.dynamics.period, self.dynamics.q),
            measurement: self.measurement()?,
            em: self.em(),
            survival: self.ie.p_s,
            births: self.births(self.ie.p_b)?,
            nonexist: ExponentialParams::new(self.ie.gamma)?,
            confirm: self.ie.t_c,
            terminate: self.ie.t_d,
            clutter_rate: self.clutter_rate(),
            clutter_shape: self.model.clutter_shape,
            rate_propagation: match self.ie.rate_propagation {
                Propagation::Fixed => RatePriorPropagation::Fixed,
                Propagation::Posterior => RatePriorPropagation::Posterior,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn th_config(&self) -> Result<ThConfig> {
        let cfg = ThConfig {
            dynamics: cv_matrices(self.dynamics.period, self.dynamics.q),
            measurement: self.measurement()?,
            em: self.em(),
            births: self.births(1.0)?,
            forgetting: self.th.eta,
            psf_spread: [self.model.spread[0].sqrt(), self.model.spread[1].sqrt()],
            noise_power: self.sensor.noise_power(),
            confirm_db: self.th.s_c,
            delete_db: self.th.s_d,
            clutter_rate: self.clutter_rate(),
            clutter_shape: self.model.clutter_shape,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for cfg in [
            ScenarioConfig::scenario1(FluctuationModel::Swerling0),
            ScenarioConfig::scenario1(FluctuationModel::Swerling1),
            ScenarioConfig::scenario2(),
        ] {
            cfg.validate().unwrap();
            let text = cfg.to_toml().unwrap();
            assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = ScenarioConfig::scenario2();
        cfg.ie.t_d = 0.9;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::scenario2();
        cfg.runs = 0;
        assert!(cfg.validate().is_err());
        let text = ScenarioConfig::scenario2().to_toml().unwrap().replace("runs = 100", "runs = 100\nbogus = 1");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn default_clutter_matches_noise_mean() {
        let cfg = ScenarioConfig::scenario2();
        let expected = 625.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((cfg.clutter_rate() - expected).abs() < 1e-9);
    }
}
