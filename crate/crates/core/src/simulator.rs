//! Ground truth and raw intensity images for the two benchmark scenarios.

use nalgebra::Vector4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::grid::{cv_matrices, Grid};
use crate::image::IntensityImage;

#[derive(Debug, Clone, PartialEq)]
pub struct TruthTarget {
    pub id: usize,
    /// First step the target is present.
    pub birth: usize,
    /// First step the target is gone.
    pub death: usize,
    /// One `[px vx py vy]` per step in `birth..death`.
    pub states: Vec<Vector4<f64>>,
}

impl TruthTarget {
    pub fn alive(&self, k: usize) -> bool {
        k >= self.birth && k < self.death
    }

    pub fn state_at(&self, k: usize) -> Option<Vector4<f64>> {
        self.alive(k).then(|| self.states[k - self.birth])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    /// Steps run from 1 to `steps` inclusive.
    pub steps: usize,
    pub targets: Vec<TruthTarget>,
}

impl Truth {
    pub fn positions_at(&self, k: usize) -> Vec<[f64; 2]> {
        self.targets
            .iter()
            .filter_map(|t| t.state_at(k))
            .map(|s| [s[0], s[2]])
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.targets {
            if t.death <= t.birth {
                return Err(invalid("truth", format!("target {} dies before it is born", t.id)));
            }
            if t.states.len() != t.death - t.birth {
                return Err(invalid("truth", format!("target {} has {} states", t.id, t.states.len())));
            }
        }
        Ok(())
    }

    /// Plain-text fixture: a `# steps N` header, then one
    /// `id step px vx py vy` row per target and step.
    pub fn to_text(&self) -> String {
        let mut out = format!("# steps {}\n# id step px vx py vy\n", self.steps);
        for t in &self.targets {
            for (j, s) in t.states.iter().enumerate() {
                out.push_str(&format!(
                    "{} {} {:?} {:?} {:?} {:?}\n",
                    t.id,
                    t.birth + j,
                    s[0],
                    s[1],
                    s[2],
                    s[3]
                ));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut steps = None;
        let mut targets: Vec<TruthTarget> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            let fail = |reason: String| Error::Fixture { line: n + 1, reason };
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("steps") {
                    steps = Some(v.trim().parse::<usize>().map_err(|e| fail(e.to_string()))?);
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(fail(format!("expected 6 fields, found {}", fields.len())));
            }
            let id: usize = fields[0].parse().map_err(|e: std::num::ParseIntError| fail(e.to_string()))?;
            let k: usize = fields[1].parse().map_err(|e: std::num::ParseIntError| fail(e.to_string()))?;
            let mut v = [0.0; 4];
            for (slot, f) in v.iter_mut().zip(&fields[2..]) {
                *slot = f.parse().map_err(|e: std::num::ParseFloatError| fail(e.to_string()))?;
            }
            let state = Vector4::from(v);
            match targets.iter_mut().find(|t| t.id == id) {
                Some(t) if k == t.death => {
                    t.states.push(state);
                    t.death += 1;
                }
                Some(_) => return Err(fail(format!("target {id} rows are not consecutive"))),
                None => targets.push(TruthTarget {
                    id,
                    birth: k,
                    death: k + 1,
                    states: vec![state],
                }),
            }
        }
        let steps = steps.ok_or(Error::Fixture {
            line: 0,
            reason: "missing '# steps' header".into(),
        })?;
        let truth = Truth { steps, targets };
        truth.validate()?;
        Ok(truth)
    }
}

/// Random stream for one frame of one run.
pub fn frame_rng(seed: u64, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64);
    rng
}

/// Unit-peak Gaussian point spread function with per-axis variances.
pub fn gaussian_psf(position: [f64; 2], centre: [f64; 2], var: [f64; 2]) -> f64 {
    let dx = centre[0] - position[0];
    let dy = centre[1] - position[1];
    (-dx * dx / (2.0 * var[0]) - dy * dy / (2.0 * var[1])).exp()
}

/// Inverse-power point spread function `phi / (d^beta + eps)`.
pub fn powerlaw_psf(position: [f64; 2], centre: [f64; 2], phi: f64, eps: f64, beta: f64) -> f64 {
    let d = ((centre[0] - position[0]).powi(2) + (centre[1] - position[1]).powi(2)).sqrt();
    phi / (d.powf(beta) + eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fluctuation {
    /// Constant amplitude.
    #[default]
    Swerling0,
    /// Complex amplitude redrawn every scan; power is exponential.
    Swerling1,
}

/// Rayleigh-noise radar image with Gaussian-PSF targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarSensor {
    pub grid: Grid,
    /// PSF variances `(σx², σy²)`.
    pub psf_var: [f64; 2],
    /// Mean noise power `E[w²]`.
    pub noise_power: f64,
    /// Peak target amplitude.
    pub amplitude: f64,
    pub fluctuation: Fluctuation,
}

impl RadarSensor {
    pub fn with_snr_db(grid: Grid, psf_var: [f64; 2], noise_power: f64, snr_db: f64, fluctuation: Fluctuation) -> Self {
        Self {
            grid,
            psf_var,
            noise_power,
            amplitude: (noise_power * 10f64.powf(snr_db / 10.0)).sqrt(),
            fluctuation,
        }
    }
}

/// Cells beyond this many PSF standard deviations get no target signal.
const PSF_SIGMAS: f64 = 7.0;

/// Render one radar frame. Each cell is the magnitude of a complex Gaussian
/// with power `noise_power` plus the incoherent sum of target returns.
pub fn render_frame_scenario1<R: Rng>(
    positions: &[[f64; 2]],
    sensor: &RadarSensor,
    time: usize,
    rng: &mut R,
) -> IntensityImage {
    let grid = sensor.grid;
    let sd = (sensor.noise_power / 2.0).sqrt();
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        values.push(sd * (re * re + im * im).sqrt());
    }
    if positions.is_empty() {
        return IntensityImage { grid, values, time };
    }

    // Squared noncentrality per touched cell.
    let mut signal = vec![0.0; grid.len()];
    let power = sensor.amplitude * sensor.amplitude;
    for p in positions {
        let target_power = match sensor.fluctuation {
            Fluctuation::Swerling0 => power,
            Fluctuation::Swerling1 => Exp::new(1.0).expect("unit rate").sample(rng) * power,
        };
        for (cell, h) in psf_cells(&grid, *p, sensor.psf_var) {
            signal[cell] += target_power * h * h;
        }
    }
    for (cell, s2) in signal.iter().enumerate() {
        if *s2 > 0.0 {
            // Recover the complex noise sample from its magnitude with a
            // fresh uniform phase, then add the signal on the real axis.
            let w = values[cell];
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            let re = w * phase.cos() + s2.sqrt();
            let im = w * phase.sin();
            values[cell] = (re * re + im * im).sqrt();
        }
    }
    IntensityImage { grid, values, time }
}

fn psf_cells(grid: &Grid, p: [f64; 2], var: [f64; 2]) -> Vec<(usize, f64)> {
    let hx = PSF_SIGMAS * var[0].sqrt();
    let hy = PSF_SIGMAS * var[1].sqrt();
    let range = |lo: f64, hi: f64, origin: f64, d: f64, n: usize| {
        let a = ((lo - origin) / d).floor().max(0.0) as usize;
        let b = (((hi - origin) / d).ceil().max(0.0) as usize).min(n);
        a..b
    };
    let mut out = Vec::new();
    for iy in range(p[1] - hy, p[1] + hy, grid.origin[1], grid.dy, grid.ny) {
        for ix in range(p[0] - hx, p[0] + hx, grid.origin[0], grid.dx, grid.nx) {
            let cell = grid.index(ix, iy);
            out.push((cell, gaussian_psf(p, grid.centre(cell), var)));
        }
    }
    out
}

/// Additive-Gaussian-noise image with inverse-power PSF targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerlawSensor {
    pub grid: Grid,
    pub phi: f64,
    pub eps: f64,
    pub beta: f64,
    pub noise_sd: f64,
}

/// Render one frame; negative values are clamped to zero.
pub fn render_frame_scenario2<R: Rng>(
    positions: &[[f64; 2]],
    sensor: &PowerlawSensor,
    time: usize,
    rng: &mut R,
) -> IntensityImage {
    let grid = sensor.grid;
    let values = (0..grid.len())
        .map(|cell| {
            let c = grid.centre(cell);
            let s: f64 = positions
                .iter()
                .map(|p| powerlaw_psf(*p, c, sensor.phi, sensor.eps, sensor.beta))
                .sum();
            let w: f64 = rng.sample(StandardNormal);
            (s + sensor.noise_sd * w).max(0.0)
        })
        .collect();
    IntensityImage { grid, values, time }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioId {
    Scenario1,
    Scenario2,
}

impl std::str::FromStr for ScenarioId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "scenario1" => Ok(Self::Scenario1),
            "2" | "scenario2" => Ok(Self::Scenario2),
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }
}

pub fn scenario1_grid() -> Grid {
    Grid::new(400, 100, 10.0, 15.0, [0.0, 0.0]).expect("valid grid")
}

pub fn scenario2_grid() -> Grid {
    Grid::new(25, 25, 4.8, 4.8, [0.0, 0.0]).expect("valid grid")
}

/// Steps, births, deaths and initial states of the three radar targets.
pub const SCENARIO1_STEPS: usize = 100;
pub const SCENARIO1_BIRTHS: [usize; 3] = [40, 5, 25];
pub const SCENARIO1_DEATHS: [usize; 3] = [60, 70, 95];
pub const SCENARIO1_VELOCITIES: [[f64; 2]; 3] = [[16.0, 30.0], [5.0, 7.5], [22.5, -2.5]];
pub const SCENARIO1_START: [f64; 2] = [500.0, 250.0];

/// Radar scenario truth, optionally with CV process noise of intensity `q`.
pub fn scenario1_truth(process_noise: Option<(f64, u64)>) -> Truth {
    let mut targets = Vec::new();
    for m in 0..3 {
        let v = SCENARIO1_VELOCITIES[m];
        let x0 = Vector4::new(SCENARIO1_START[0], v[0], SCENARIO1_START[1], v[1]);
        let n = SCENARIO1_DEATHS[m] - SCENARIO1_BIRTHS[m];
        let states = match process_noise {
            None => cv_path(x0, n, 0.0, None),
            Some((q, seed)) => cv_path(x0, n, q, Some(&mut frame_rng(seed, m))),
        };
        targets.push(TruthTarget {
            id: m + 1,
            birth: SCENARIO1_BIRTHS[m],
            death: SCENARIO1_DEATHS[m],
            states,
        });
    }
    Truth {
        steps: SCENARIO1_STEPS,
        targets,
    }
}

fn cv_path(x0: Vector4<f64>, n: usize, q: f64, rng: Option<&mut ChaCha8Rng>) -> Vec<Vector4<f64>> {
    let m = cv_matrices(1.0, q);
    let chol = (q > 0.0).then(|| m.q.cholesky().expect("positive definite process noise"));
    let mut rng = rng;
    let mut x = x0;
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        if j > 0 {
            x = m.f * x;
            if let (Some(c), Some(r)) = (&chol, rng.as_deref_mut()) {
                let e = Vector4::from_fn(|_, _| r.sample::<f64, _>(StandardNormal));
                x += c.l() * e;
            }
        }
        out.push(x);
    }
    out
}

pub const SCENARIO2_STEPS: usize = 81;
pub const SCENARIO2_BIRTH_POSITIONS: [[f64; 2]; 5] = [[75.0, 100.0], [20.0, 105.0], [110.0, 50.0], [110.0, 85.0], [110.0, 80.0]];
pub const SCENARIO2_BIRTHS: [usize; 5] = [18, 2, 3, 16, 9];
pub const SCENARIO2_DEATHS: [usize; 5] = [64, 79, 78, 77, 71];

/// Stored five-target crossing trajectories.
pub fn scenario2_truth() -> Truth {
    Truth::from_text(include_str!("../data/scenario2_truth.txt")).expect("bundled fixture parses")
}

/// Draw five-target crossing trajectories: each target starts at its birth
/// position and follows a CV path with process noise `q`, accepted only if it
/// stays inside the region and passes within `pass_radius` of the centre at
/// the middle of its life.
pub fn generate_scenario2_truth(q: f64, pass_radius: f64, seed: u64) -> Truth {
    let grid = scenario2_grid();
    let centre = [grid.width() / 2.0, grid.height() / 2.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut targets = Vec::new();
    for m in 0..5 {
        let (birth, death) = (SCENARIO2_BIRTHS[m], SCENARIO2_DEATHS[m]);
        let p0 = SCENARIO2_BIRTH_POSITIONS[m];
        let mid = (birth + death) / 2 - birth;
        let v = [(centre[0] - p0[0]) / mid as f64, (centre[1] - p0[1]) / mid as f64];
        let x0 = Vector4::new(p0[0], v[0], p0[1], v[1]);
        let states = loop {
            let path = cv_path(x0, death - birth, q, Some(&mut rng));
            let inside = path.iter().all(|s| grid.contains([s[0], s[2]]));
            let s = path[mid];
            let near = ((s[0] - centre[0]).powi(2) + (s[2] - centre[1]).powi(2)).sqrt() <= pass_radius;
            if inside && near {
                break path;
            }
        };
        targets.push(TruthTarget {
            id: m + 1,
            birth,
            death,
            states,
        });
    }
    Truth {
        steps: SCENARIO2_STEPS,
        targets,
    }
}
