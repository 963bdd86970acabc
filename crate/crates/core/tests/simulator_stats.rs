use phpmht_core::baseline::estimate_snr;
use phpmht_core::existence::existence_from_rate;
use phpmht_core::grid::Grid;
use phpmht_core::simulator::{
    frame_rng, render_frame_scenario1, render_frame_scenario2, scenario1_grid, Fluctuation, PowerlawSensor,
    RadarSensor,
};
use phpmht_core::special::{ExponentialParams, GammaParams};
use proptest::prelude::*;

const DRAWS: usize = 10_000;
/// Upper 1% point of chi-square with 19 degrees of freedom.
const CHI2_19_99: f64 = 36.191;

/// Pearson statistic for `samples` against a continuous CDF, using 20
/// equiprobable bins found by bisection on the CDF.
fn chi_square(samples: &[f64], cdf: impl Fn(f64) -> f64, hi: f64) -> f64 {
    let bins = 20;
    let edges: Vec<f64> = (1..bins)
        .map(|j| {
            let p = j as f64 / bins as f64;
            let (mut a, mut b) = (0.0, hi);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if cdf(m) < p {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        })
        .collect();
    let mut counts = vec![0usize; bins];
    for &s in samples {
        counts[edges.partition_point(|e| *e < s)] += 1;
    }
    let expected = samples.len() as f64 / bins as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

/// Noncentral chi-square CDF with 2 degrees of freedom as a Poisson mixture of
/// central chi-squares with even degrees of freedom.
fn noncentral_chi2_2(x: f64, lambda: f64) -> f64 {
    let half = lambda / 2.0;
    let mut total = 0.0;
    let mut weight = (-half).exp();
    // Central chi-square CDF with 2k dof: 1 - e^{-x/2} Σ_{i<k} (x/2)^i / i!.
    let mut tail_sum = 0.0;
    let mut term = 1.0;
    for j in 0..400 {
        tail_sum += term;
        term *= (x / 2.0) / (j + 1) as f64;
        total += weight * (1.0 - (-x / 2.0).exp() * tail_sum);
        weight *= half / (j + 1) as f64;
    }
    total
}

fn centre_cell_samples(fluctuation: Fluctuation) -> (Vec<f64>, RadarSensor) {
    let grid = Grid::new(3, 3, 10.0, 15.0, [0.0, 0.0]).unwrap();
    let sensor = RadarSensor::with_snr_db(grid, [20.0, 90.0], 64.0, 5.0, fluctuation);
    let centre = grid.centre(grid.index(1, 1));
    let samples = (0..DRAWS)
        .map(|k| {
            let f = render_frame_scenario1(&[centre], &sensor, k, &mut frame_rng(31, k));
            f.values[grid.index(1, 1)].powi(2)
        })
        .collect();
    (samples, sensor)
}

#[test]
fn rayleigh_noise_power_is_exponential() {
    let grid = scenario1_grid();
    let sensor = RadarSensor::with_snr_db(grid, [20.0, 90.0], 64.0, 5.0, Fluctuation::Swerling0);
    let mut power = Vec::with_capacity(DRAWS);
    let mut k = 0;
    while power.len() < DRAWS {
        let f = render_frame_scenario1(&[], &sensor, k, &mut frame_rng(30, k));
        power.extend(f.values.iter().map(|v| v * v));
        k += 1;
    }
    power.truncate(DRAWS);
    let stat = chi_square(&power, |p| 1.0 - (-p / 64.0).exp(), 64.0 * 50.0);
    assert!(stat < CHI2_19_99, "chi-square {stat}");
}

#[test]
fn swerling0_cell_is_rician() {
    let (power, sensor) = centre_cell_samples(Fluctuation::Swerling0);
    // 2|z|²/υ is noncentral chi-square(2) with noncentrality 2A²/υ.
    let lambda = 2.0 * sensor.amplitude.powi(2) / 64.0;
    let stat = chi_square(&power, |p| noncentral_chi2_2(2.0 * p / 64.0, lambda), 64.0 * 100.0);
    assert!(stat < CHI2_19_99, "chi-square {stat}");
}

#[test]
fn swerling1_cell_power_is_exponential() {
    let (power, sensor) = centre_cell_samples(Fluctuation::Swerling1);
    let mean = 64.0 + sensor.amplitude.powi(2);
    let stat = chi_square(&power, |p| 1.0 - (-p / mean).exp(), mean * 50.0);
    assert!(stat < CHI2_19_99, "chi-square {stat}");
}

#[test]
fn clamped_gaussian_noise() {
    let grid = Grid::new(100, 100, 4.8, 4.8, [0.0, 0.0]).unwrap();
    let sensor = PowerlawSensor {
        grid,
        phi: 1.0,
        eps: 1.0,
        beta: 2.0,
        noise_sd: 3.0,
    };
    let f = render_frame_scenario2(&[], &sensor, 1, &mut frame_rng(32, 1));
    let zeros = f.values.iter().filter(|v| **v == 0.0).count();
    // Half the mass sits at zero: binomial(10⁴, 1/2) within 3 sd.
    assert!((zeros as f64 - 5000.0).abs() < 150.0, "{zeros} zeros");
    let positive: Vec<f64> = f.values.iter().copied().filter(|v| *v > 0.0).collect();
    let half_normal = |x: f64| libm::erf(x / (3.0 * 2f64.sqrt()));
    let stat = chi_square(&positive, half_normal, 60.0);
    assert!(stat < CHI2_19_99, "chi-square {stat}");
}

#[test]
fn snr_estimate_recovers_peak_amplitude() {
    let grid = scenario1_grid();
    let spread = [20f64.sqrt(), 90f64.sqrt()];
    let amplitude = (64.0 * 10f64.powf(0.5)).sqrt();
    // Summed intensity of a unit-peak Gaussian blob over the cells.
    let rate = amplitude * 2.0 * std::f64::consts::PI * spread[0] * spread[1] / (grid.dx * grid.dy);
    assert!((estimate_snr(rate, &grid, spread, 64.0) - 5.0).abs() < 1e-9);
}

proptest! {
    #[test]
    fn snr_estimate_monotone(a in 0.01f64..1e4, b in 0.01f64..1e4) {
        let grid = scenario1_grid();
        let s = |r| estimate_snr(r, &grid, [4.0, 9.0], 64.0);
        prop_assert_eq!(a < b, s(a) < s(b));
    }

    #[test]
    fn existence_is_a_probability(rate in 0.0f64..500.0, r in 0.0f64..=1.0, shape in 0.2f64..40.0, grate in 0.05f64..5.0, g in 0.05f64..5.0) {
        let gam = GammaParams::new(shape, grate).unwrap();
        let exp = ExponentialParams::new(g).unwrap();
        let e = existence_from_rate(rate, r, &gam, &exp);
        prop_assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn existence_monotone_in_rate(
        lo in 0.0f64..100.0, step in 0.0f64..100.0, r in 0.001f64..0.999,
        shape in 1.01f64..40.0, grate in 0.05f64..2.0, extra in 0.0f64..3.0,
    ) {
        let gam = GammaParams::new(shape, grate).unwrap();
        let exp = ExponentialParams::new(grate + extra).unwrap();
        let a = existence_from_rate(lo, r, &gam, &exp);
        let b = existence_from_rate(lo + step, r, &gam, &exp);
        prop_assert!(b >= a - 1e-12, "{} at {} vs {} at {}", a, lo, b, lo + step);
    }
}
