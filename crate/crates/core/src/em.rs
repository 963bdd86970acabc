//! Expectation-maximisation measurement update on an intensity image.
//!
//! Each EM iteration computes, for every mixture component, its share of the
//! image intensity (`n̄`), then maximises the rate posterior (gamma mode) and
//! the state (one Kalman update against the intensity-weighted centroid of its
//! cells). Intensities stand in for measurement counts directly.

use nalgebra::{Matrix2, Matrix2x4, Vector2};

use crate::error::{invalid, Result};
use crate::grid::{Footprint, GaussianState, Grid};
use crate::image::IntensityImage;
use crate::prediction::{BernoulliTrack, ClutterComponent};
use crate::special::{gamma_mode, ln_gamma, GammaParams};

/// Floor on the predicted cell intensity before dividing by it.
pub const INTENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once the largest relative rate change and the largest position
    /// change (in cells) both fall below this.
    pub rel_tol: f64,
    /// Footprint cells with less mass than this are ignored.
    pub min_cell_mass: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iters: 20,
            rel_tol: 1e-4,
            min_cell_mass: 1e-12,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least one"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(invalid("rel_tol", "must be positive"));
        }
        Ok(())
    }
}

/// Spatial measurement model of a target: an axis-aligned Gaussian over the
/// image plane centred on the target position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementModel {
    pub grid: Grid,
    /// Diagonal of the spread covariance `R` (m²).
    pub spread: [f64; 2],
    /// Widen each footprint by the predicted position covariance.
    pub inflate_by_state: bool,
}

impl MeasurementModel {
    pub fn new(grid: Grid, spread: [f64; 2]) -> Result<Self> {
        if !(spread[0] > 0.0 && spread[1] > 0.0) {
            return Err(invalid("spread", "variances must be positive"));
        }
        Ok(Self {
            grid,
            spread,
            inflate_by_state: false,
        })
    }

    /// Footprint covariance diagonal used for a track with the given predicted
    /// state. Constant across the iterations of one frame.
    pub fn footprint_var(&self, predicted: &GaussianState) -> [f64; 2] {
        if self.inflate_by_state {
            [
                self.spread[0] + predicted.cov[(0, 0)],
                self.spread[1] + predicted.cov[(2, 2)],
            ]
        } else {
            self.spread
        }
    }
}

/// Point estimates of every mixture component at one EM iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub clutter_rate: f64,
    pub rates: Vec<f64>,
    pub states: Vec<GaussianState>,
}

impl Estimates {
    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.states.iter().map(|s| s.position()).collect()
    }
}

/// Result of the E-step: expected counts plus the intensity-weighted cell
/// centre sums needed for the state update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExpectedCounts {
    pub clutter: f64,
    pub targets: Vec<f64>,
    /// Per target `(Σ w cx, Σ w cy)`; the weights sum to `targets[m]`.
    pub weighted_centres: Vec<[f64; 2]>,
}

impl ExpectedCounts {
    pub fn total(&self) -> f64 {
        self.clutter + self.targets.iter().sum::<f64>()
    }
}

/// Reusable buffers for the E-step.
#[derive(Debug, Clone, Default)]
pub struct EmWorkspace {
    pub footprints: Vec<Footprint>,
    /// Target part of the predicted intensity per cell; only touched cells
    /// are nonzero between calls.
    target_intensity: Vec<f64>,
    touched: Vec<usize>,
}

impl EmWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, cells: usize, tracks: usize) {
        if self.target_intensity.len() != cells {
            self.target_intensity = vec![0.0; cells];
        }
        self.footprints.resize_with(tracks, Footprint::default);
        self.footprints.truncate(tracks);
    }

    /// Recompute every footprint at the given positions.
    pub fn set_footprints(&mut self, grid: &Grid, positions: &[[f64; 2]], vars: &[[f64; 2]], min_mass: f64) {
        self.prepare(grid.len(), positions.len());
        for ((fp, pos), var) in self.footprints.iter_mut().zip(positions).zip(vars) {
            fp.fill(*pos, *var, grid);
            if min_mass > 0.0 {
                fp.cells.retain(|&(_, m)| m >= min_mass);
            }
        }
    }
}

/// E-step over the current footprints. `clutter_mass` is the per-cell clutter
/// probability (uniform).
pub fn expected_counts(
    image: &IntensityImage,
    clutter_rate: f64,
    rates: &[f64],
    ws: &mut EmWorkspace,
) -> ExpectedCounts {
    let n = image.grid.len();
    let clutter_mass = 1.0 / n as f64;
    expected_counts_with(&image.values, &image.grid, clutter_mass, clutter_rate, rates, ws)
}

pub(crate) fn expected_counts_with(
    z: &[f64],
    grid: &Grid,
    clutter_mass: f64,
    clutter_rate: f64,
    rates: &[f64],
    ws: &mut EmWorkspace,
) -> ExpectedCounts {
    assert_eq!(rates.len(), ws.footprints.len(), "one footprint per rate");
    if ws.target_intensity.len() != z.len() {
        ws.target_intensity = vec![0.0; z.len()];
    }
    let c0 = clutter_rate * clutter_mass;

    for (fp, &rate) in ws.footprints.iter().zip(rates) {
        if rate <= 0.0 {
            continue;
        }
        for &(cell, mass) in &fp.cells {
            let slot = &mut ws.target_intensity[cell];
            if *slot == 0.0 {
                ws.touched.push(cell);
            }
            *slot += rate * mass;
        }
    }

    let mut out = ExpectedCounts {
        clutter: 0.0,
        targets: Vec::with_capacity(rates.len()),
        weighted_centres: Vec::with_capacity(rates.len()),
    };
    for (fp, &rate) in ws.footprints.iter().zip(rates) {
        let mut count = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        if rate > 0.0 {
            for &(cell, mass) in &fp.cells {
                let zi = z[cell];
                if zi == 0.0 {
                    continue;
                }
                let nu = (c0 + ws.target_intensity[cell]).max(INTENSITY_FLOOR);
                let w = zi * rate * mass / nu;
                let (ix, iy) = grid.coords(cell);
                count += w;
                cx += w * grid.centre_x(ix);
                cy += w * grid.centre_y(iy);
            }
        }
        out.targets.push(count);
        out.weighted_centres.push([cx, cy]);
    }

    // Cells no target touches have ν̂ = c0 and hand all their intensity to
    // clutter.
    let mut touched_z = 0.0;
    let mut touched_share = 0.0;
    for &cell in &ws.touched {
        let zi = z[cell];
        touched_z += zi;
        touched_share += zi / (c0 + ws.target_intensity[cell]).max(INTENSITY_FLOOR);
        ws.target_intensity[cell] = 0.0;
    }
    ws.touched.clear();
    let untouched_z: f64 = z.iter().sum::<f64>() - touched_z;
    out.clutter = if c0 > 0.0 {
        untouched_z.max(0.0) + c0 * touched_share
    } else {
        0.0
    };
    out
}

/// Conjugate gamma update and its mode: `(a + n̄, b + 1)` and
/// `max(0, (a + n̄ - 1)/(b + 1))`.
pub fn rate_posterior(prior: &GammaParams, nbar: f64) -> (GammaParams, f64) {
    let post = GammaParams {
        shape: prior.shape + nbar.max(0.0),
        rate: prior.rate + 1.0,
    };
    (post, gamma_mode(&post))
}

/// Apply the rate M-step to a track.
pub fn update_rate(track: &mut BernoulliTrack, nbar: f64) {
    let (post, mode) = rate_posterior(&track.merged_prior, nbar);
    track.posterior_rate = post;
    track.rate_estimate = mode;
}

/// Intensity-weighted centroid of a track's cells and its effective
/// covariance `R / W`. `None` when the track collected no intensity.
pub fn synthetic_measurement(
    counts: &ExpectedCounts,
    index: usize,
    footprint_var: [f64; 2],
) -> Option<(Vector2<f64>, Matrix2<f64>)> {
    let w = counts.targets[index];
    if !(w > 0.0) || !w.is_finite() {
        return None;
    }
    let [sx, sy] = counts.weighted_centres[index];
    let z = Vector2::new(sx / w, sy / w);
    let r = Matrix2::new(footprint_var[0] / w, 0.0, 0.0, footprint_var[1] / w);
    Some((z, r))
}

fn position_matrix() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0)
}

/// Kalman measurement update of a position-only observation.
pub fn update_state(prior: &GaussianState, z: &Vector2<f64>, r: &Matrix2<f64>) -> GaussianState {
    let h = position_matrix();
    let innovation = z - h * prior.mean;
    let s = h * prior.cov * h.transpose() + r;
    let Some(s_inv) = s.try_inverse() else {
        return *prior;
    };
    let k = prior.cov * h.transpose() * s_inv;
    let mean = prior.mean + k * innovation;
    let i_kh = nalgebra::Matrix4::identity() - k * h;
    // Joseph form keeps the covariance symmetric positive definite.
    let mut cov = i_kh * prior.cov * i_kh.transpose() + k * r * k.transpose();
    cov = 0.5 * (cov + cov.transpose());
    GaussianState::new(mean, cov)
}

/// Outcome of one frame of EM.
#[derive(Debug, Clone, Default)]
pub struct EmReport {
    pub iterations: usize,
    pub converged: bool,
    /// Estimates after each iteration, index 0 being the initial point. Only
    /// filled when requested.
    pub trace: Vec<Estimates>,
    pub final_counts: ExpectedCounts,
}

/// Run EM on one image. Tracks must hold their predicted states and merged
/// rate priors; on return they hold the posterior states, rate posteriors and
/// rate estimates.
pub fn em_iterate(
    image: &IntensityImage,
    tracks: &mut [BernoulliTrack],
    clutter: &mut ClutterComponent,
    model: &MeasurementModel,
    cfg: &EmConfig,
    ws: &mut EmWorkspace,
    record_trace: bool,
) -> Result<EmReport> {
    cfg.validate()?;
    let grid = &image.grid;
    let predicted: Vec<GaussianState> = tracks.iter().map(|t| t.state).collect();
    let vars: Vec<[f64; 2]> = predicted.iter().map(|p| model.footprint_var(p)).collect();

    let mut current = Estimates {
        clutter_rate: clutter.merged_prior.mean().max(clutter.rate_estimate.min(f64::MAX)),
        // Start from the existence-conditional mean so a weak target is not
        // lost to the zero-rate fixed point on the first iteration.
        rates: tracks.iter().map(|t| t.gamma_exist.mean()).collect(),
        states: predicted.clone(),
    };
    if clutter.rate_estimate > 0.0 {
        current.clutter_rate = clutter.rate_estimate;
    }

    let mut report = EmReport::default();
    if record_trace {
        report.trace.push(current.clone());
    }

    let mut clutter_post = clutter.merged_prior;
    let mut track_posts: Vec<GammaParams> = tracks.iter().map(|t| t.merged_prior).collect();

    for iter in 0..cfg.max_iters {
        ws.set_footprints(grid, &current.positions(), &vars, cfg.min_cell_mass);
        let counts = expected_counts(image, current.clutter_rate, &current.rates, ws);

        let (cpost, clutter_rate) = rate_posterior(&clutter.merged_prior, counts.clutter);
        clutter_post = cpost;
        let mut next = Estimates {
            clutter_rate,
            rates: Vec::with_capacity(tracks.len()),
            states: Vec::with_capacity(tracks.len()),
        };
        for (m, track) in tracks.iter().enumerate() {
            let (post, rate) = rate_posterior(&track.merged_prior, counts.targets[m]);
            track_posts[m] = post;
            next.rates.push(rate);
            let state = match synthetic_measurement(&counts, m, vars[m]) {
                Some((z, r)) => update_state(&predicted[m], &z, &r),
                None => predicted[m],
            };
            next.states.push(state);
        }

        let change = max_change(&current, &next, grid);
        current = next;
        report.iterations = iter + 1;
        report.final_counts = counts;
        if record_trace {
            report.trace.push(current.clone());
        }
        if change < cfg.rel_tol {
            report.converged = true;
            break;
        }
    }

    clutter.rate_estimate = current.clutter_rate;
    clutter.posterior_rate = clutter_post;
    for (m, track) in tracks.iter_mut().enumerate() {
        track.rate_estimate = current.rates[m];
        track.posterior_rate = track_posts[m];
        track.state = current.states[m];
    }
    Ok(report)
}

fn max_change(prev: &Estimates, next: &Estimates, grid: &Grid) -> f64 {
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    let mut worst = rel(prev.clutter_rate, next.clutter_rate);
    for m in 0..next.rates.len() {
        worst = worst.max(rel(prev.rates[m], next.rates[m]));
        let p = prev.states[m].position();
        let q = next.states[m].position();
        worst = worst.max((p[0] - q[0]).abs() / grid.dx);
        worst = worst.max((p[1] - q[1]).abs() / grid.dy);
    }
    worst
}

/// Priors the auxiliary function is evaluated against.
#[derive(Debug, Clone)]
pub struct AuxiliaryPriors {
    pub clutter: GammaParams,
    pub rates: Vec<GammaParams>,
    pub states: Vec<GaussianState>,
    pub footprint_vars: Vec<[f64; 2]>,
}

impl AuxiliaryPriors {
    pub fn from_tracks(tracks: &[BernoulliTrack], clutter: &ClutterComponent, model: &MeasurementModel) -> Self {
        Self {
            clutter: clutter.merged_prior,
            rates: tracks.iter().map(|t| t.merged_prior).collect(),
            states: tracks.iter().map(|t| t.state).collect(),
            footprint_vars: tracks.iter().map(|t| model.footprint_var(&t.state)).collect(),
        }
    }
}

/// EM auxiliary function `L(current | reference)` on intensity data: the rate
/// part `Σ_m [log p(λ_m) - λ_m + n̄_m log λ_m]` plus the state part
/// `Σ_m [log N(x_m; x̄_m, P̄_m) + Σ_i w_i log N(c_i; H x_m, R_m)]`, with `n̄`
/// and `w` taken at the reference estimates and cell centres standing in for
/// the within-cell measurement location.
///
/// Only used to check EM ascent; constants independent of the estimates are
/// kept so values are comparable across references.
pub fn auxiliary_value(
    image: &IntensityImage,
    priors: &AuxiliaryPriors,
    reference: &Estimates,
    current: &Estimates,
    min_cell_mass: f64,
) -> f64 {
    let grid = &image.grid;
    let mut ws = EmWorkspace::new();
    ws.set_footprints(grid, &reference.positions(), &priors.footprint_vars, min_cell_mass);
    let counts = expected_counts(image, reference.clutter_rate, &reference.rates, &mut ws);

    let mut value = rate_term(&priors.clutter, counts.clutter, current.clutter_rate);
    for m in 0..current.rates.len() {
        value += rate_term(&priors.rates[m], counts.targets[m], current.rates[m]);
        value += log_state_prior(&priors.states[m], &current.states[m]);
        let var = priors.footprint_vars[m];
        let pos = current.states[m].position();
        let ref_rate = reference.rates[m];
        if ref_rate <= 0.0 {
            continue;
        }
        // Recompute the weights of this component at the reference point.
        let c0 = reference.clutter_rate / grid.len() as f64;
        let mut target_nu = std::collections::HashMap::new();
        for (fp, &rate) in ws.footprints.iter().zip(&reference.rates) {
            if rate <= 0.0 {
                continue;
            }
            for &(cell, mass) in &fp.cells {
                *target_nu.entry(cell).or_insert(0.0) += rate * mass;
            }
        }
        let norm = -0.5 * ((2.0 * std::f64::consts::PI).powi(2) * var[0] * var[1]).ln();
        for &(cell, mass) in &ws.footprints[m].cells {
            let zi = image.values[cell];
            if zi == 0.0 {
                continue;
            }
            let nu = (c0 + target_nu[&cell]).max(INTENSITY_FLOOR);
            let w = zi * ref_rate * mass / nu;
            let c = grid.centre(cell);
            let ll = norm - 0.5 * ((c[0] - pos[0]).powi(2) / var[0] + (c[1] - pos[1]).powi(2) / var[1]);
            value += w * ll;
        }
    }
    value
}

/// `log G(λ; a, b) - λ + n̄ log λ`, with `0 log 0 = 0`.
fn rate_term(prior: &GammaParams, nbar: f64, rate: f64) -> f64 {
    let exponent = prior.shape - 1.0 + nbar;
    let log_part = if rate > 0.0 {
        exponent * rate.ln()
    } else if exponent > 0.0 {
        f64::NEG_INFINITY
    } else if exponent == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    prior.shape * prior.rate.ln() - ln_gamma(prior.shape) + log_part - (prior.rate + 1.0) * rate
}

fn log_state_prior(prior: &GaussianState, x: &GaussianState) -> f64 {
    let d = x.mean - prior.mean;
    let Some(chol) = prior.cov.cholesky() else {
        return f64::NEG_INFINITY;
    };
    let sol = chol.solve(&d);
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (d.dot(&sol) + logdet + 4.0 * (2.0 * std::f64::consts::PI).ln())
}
