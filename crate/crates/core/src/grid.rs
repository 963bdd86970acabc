//! Sensor grid geometry, per-cell integrals of the spatial densities, and the
//! nearly-constant-velocity motion model.
//!
//! State vectors are ordered `[px, vx, py, vy]`. Cells are indexed row-major:
//! `i = iy * nx + ix`, with `ix` along the x axis.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};

use crate::error::{invalid, Result};

/// Footprint half-width in standard deviations; mass beyond it is dropped.
pub const FOOTPRINT_SIGMAS: f64 = 5.0;

/// Rectangular grid of equally sized resolution cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    /// Lower-left corner of the surveillance region.
    pub origin: [f64; 2],
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, origin: [f64; 2]) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid("grid", "cell counts must be positive"));
        }
        if !(dx > 0.0 && dy > 0.0) {
            return Err(invalid("grid", "cell sizes must be positive"));
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            origin,
        })
    }

    /// Total number of resolution cells.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    pub fn centre(&self, cell: usize) -> [f64; 2] {
        let (ix, iy) = self.coords(cell);
        [self.centre_x(ix), self.centre_y(iy)]
    }

    pub fn centre_x(&self, ix: usize) -> f64 {
        self.origin[0] + (ix as f64 + 0.5) * self.dx
    }

    pub fn centre_y(&self, iy: usize) -> f64 {
        self.origin[1] + (iy as f64 + 0.5) * self.dy
    }

    pub fn width(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.dy
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.origin[0]
            && p[0] <= self.origin[0] + self.width()
            && p[1] >= self.origin[1]
            && p[1] <= self.origin[1] + self.height()
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }
}

/// Nearly-constant-velocity model with white-noise acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvModel {
    pub f: Matrix4<f64>,
    pub q: Matrix4<f64>,
    pub period: f64,
    pub noise_intensity: f64,
}

/// Transition and process-noise matrices for sample period `period` and
/// noise intensity `q` (m²/s³).
pub fn cv_matrices(period: f64, q: f64) -> CvModel {
    let t = period;
    let f = Matrix4::new(
        1.0, t, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, t, //
        0.0, 0.0, 0.0, 1.0,
    );
    let a = t.powi(3) / 3.0;
    let b = t.powi(2) / 2.0;
    let qm = q * Matrix4::new(
        a, b, 0.0, 0.0, //
        b, t, 0.0, 0.0, //
        0.0, 0.0, a, b, //
        0.0, 0.0, b, t,
    );
    CvModel {
        f,
        q: qm,
        period,
        noise_intensity: q,
    }
}

/// Gaussian density over the 4-D kinematic state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl GaussianState {
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.mean[0], self.mean[2]]
    }

    pub fn position_vector(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[2])
    }

    /// Position block `H P Hᵀ`.
    pub fn position_cov(&self) -> Matrix2<f64> {
        Matrix2::new(self.cov[(0, 0)], self.cov[(0, 2)], self.cov[(2, 0)], self.cov[(2, 2)])
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(a < X < b)` for a standard normal, accurate in both tails.
pub fn normal_interval(a: f64, b: f64) -> f64 {
    use libm::erfc;
    let s = std::f64::consts::SQRT_2;
    if a >= 0.0 {
        0.5 * (erfc(a / s) - erfc(b / s))
    } else if b <= 0.0 {
        0.5 * (erfc(-b / s) - erfc(-a / s))
    } else {
        1.0 - 0.5 * (erfc(-a / s) + erfc(b / s))
    }
}

/// Probability mass that an axis-aligned Gaussian puts inside `cell`.
pub fn gaussian_cell_mass(mean: [f64; 2], var: [f64; 2], cell: usize, grid: &Grid) -> f64 {
    let (ix, iy) = grid.coords(cell);
    axis_mass(mean[0], var[0].sqrt(), grid.origin[0] + ix as f64 * grid.dx, grid.dx)
        * axis_mass(mean[1], var[1].sqrt(), grid.origin[1] + iy as f64 * grid.dy, grid.dy)
}

fn axis_mass(mu: f64, sigma: f64, lo: f64, width: f64) -> f64 {
    if sigma <= 0.0 {
        return if mu >= lo && mu < lo + width { 1.0 } else { 0.0 };
    }
    normal_interval((lo - mu) / sigma, (lo + width - mu) / sigma)
}

/// Clutter density is uniform over the region, so every cell carries `1/I`.
pub fn clutter_cell_mass(_cell: usize, grid: &Grid) -> f64 {
    1.0 / grid.len() as f64
}

/// Cell masses of an axis-aligned Gaussian, restricted to the cells within
/// `FOOTPRINT_SIGMAS` standard deviations of the mean.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Footprint {
    pub cells: Vec<(usize, f64)>,
}

impl Footprint {
    pub fn new(mean: [f64; 2], var: [f64; 2], grid: &Grid) -> Self {
        let mut fp = Footprint::default();
        fp.fill(mean, var, grid);
        fp
    }

    /// Recompute in place, reusing the allocation.
    pub fn fill(&mut self, mean: [f64; 2], var: [f64; 2], grid: &Grid) {
        self.cells.clear();
        let sx = var[0].sqrt();
        let sy = var[1].sqrt();
        let Some((x0, x1)) = axis_range(mean[0], sx, grid.origin[0], grid.dx, grid.nx) else {
            return;
        };
        let Some((y0, y1)) = axis_range(mean[1], sy, grid.origin[1], grid.dy, grid.ny) else {
            return;
        };
        let xs: Vec<f64> = (x0..=x1)
            .map(|ix| axis_mass(mean[0], sx, grid.origin[0] + ix as f64 * grid.dx, grid.dx))
            .collect();
        for iy in y0..=y1 {
            let my = axis_mass(mean[1], sy, grid.origin[1] + iy as f64 * grid.dy, grid.dy);
            if my == 0.0 {
                continue;
            }
            for (k, ix) in (x0..=x1).enumerate() {
                let m = xs[k] * my;
                if m > 0.0 {
                    self.cells.push((grid.index(ix, iy), m));
                }
            }
        }
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().map(|&(_, m)| m).sum()
    }
}

fn axis_range(mu: f64, sigma: f64, origin: f64, width: f64, n: usize) -> Option<(usize, usize)> {
    let lo = ((mu - FOOTPRINT_SIGMAS * sigma - origin) / width).floor();
    let hi = ((mu + FOOTPRINT_SIGMAS * sigma - origin) / width).floor();
    if !lo.is_finite() || !hi.is_finite() || hi < 0.0 || lo > (n - 1) as f64 {
        return None;
    }
    let lo = lo.max(0.0) as usize;
    let hi = (hi as usize).min(n - 1);
    Some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scenario1_grid() -> Grid {
        Grid::new(400, 100, 10.0, 15.0, [0.0, 0.0]).unwrap()
    }

    #[test]
    fn cv_noise_matches_closed_form() {
        let m = cv_matrices(1.0, 0.01);
        assert_relative_eq!(m.q[(0, 0)], 0.01 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(m.q[(0, 1)], 0.005, epsilon = 1e-15);
        assert_relative_eq!(m.q[(1, 1)], 0.01, epsilon = 1e-15);
        assert_eq!(cv_matrices(1.0, 0.0).q, Matrix4::zeros());
        assert_relative_eq!(cv_matrices(2.0, 1.0).q[(0, 0)], 8.0 / 3.0, epsilon = 1e-15);
        assert_eq!(m.f[(0, 1)], 1.0);
        assert_eq!(m.f[(2, 3)], 1.0);
        assert_eq!(m.f[(0, 2)], 0.0);
    }

    #[test]
    fn point_mass_limit() {
        let g = scenario1_grid();
        let cell = g.index(7, 3);
        let c = g.centre(cell);
        let m = gaussian_cell_mass(c, [1e-8, 1e-8], cell, &g);
        assert_relative_eq!(m, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shared_edge_symmetry() {
        let g = scenario1_grid();
        let a = g.index(10, 10);
        let b = g.index(11, 10);
        let edge = [g.origin[0] + 11.0 * g.dx, g.centre_y(10)];
        let ma = gaussian_cell_mass(edge, [20.0, 90.0], a, &g);
        let mb = gaussian_cell_mass(edge, [20.0, 90.0], b, &g);
        assert_relative_eq!(ma, mb, epsilon = 1e-15);
    }

    #[test]
    fn clutter_mass_is_uniform() {
        let g = scenario1_grid();
        assert_eq!(clutter_cell_mass(0, &g), 1.0 / 40000.0);
        let g2 = Grid::new(25, 25, 4.8, 4.8, [0.0, 0.0]).unwrap();
        assert_eq!(clutter_cell_mass(3, &g2), 1.0 / 625.0);
        let s: f64 = (0..g2.len()).map(|i| clutter_cell_mass(i, &g2)).sum();
        assert_relative_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn footprint_matches_direct_masses() {
        let g = scenario1_grid();
        let fp = Footprint::new([500.0, 250.0], [20.0, 90.0], &g);
        for &(cell, m) in &fp.cells {
            assert_relative_eq!(m, gaussian_cell_mass([500.0, 250.0], [20.0, 90.0], cell, &g), epsilon = 1e-15);
        }
        assert!((fp.total() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn footprint_clips_at_border() {
        let g = scenario1_grid();
        let fp = Footprint::new([0.0, 0.0], [20.0, 90.0], &g);
        assert_relative_eq!(fp.total(), 0.25, epsilon = 1e-6);
        let outside = Footprint::new([-1000.0, 0.0], [20.0, 90.0], &g);
        assert!(outside.cells.is_empty());
    }

    #[test]
    fn cell_indexing_round_trip() {
        let g = scenario1_grid();
        let i = g.index(123, 45);
        assert_eq!(g.coords(i), (123, 45));
        assert_eq!(g.centre(i), [1235.0, 682.5]);
    }

    #[test]
    fn normal_interval_tails() {
        assert_relative_eq!(normal_interval(-1.0, 1.0), 0.682_689_492_137_086, epsilon = 1e-14);
        assert!(normal_interval(10.0, 11.0) > 0.0);
        assert_relative_eq!(normal_interval(10.0, 11.0), normal_interval(-11.0, -10.0), max_relative = 1e-12);
        assert_relative_eq!(normal_cdf(0.0), 0.5);
    }
}
