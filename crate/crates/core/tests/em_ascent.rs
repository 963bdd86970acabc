use nalgebra::{Matrix4, Vector4};
use phpmht_core::em::{auxiliary_value, em_iterate, AuxiliaryPriors, EmConfig, EmWorkspace, MeasurementModel};
use phpmht_core::prediction::{merge_rate_prior, spawn_births, BirthSpec, ClutterComponent, IdAllocator};
use phpmht_core::simulator::{frame_rng, render_frame_scenario1, scenario1_grid, scenario1_truth, Fluctuation, RadarSensor};
use phpmht_core::special::{ExponentialParams, GammaParams};

const SPREAD: [f64; 2] = [20.0, 90.0];
const NOISE_POWER: f64 = 64.0;

#[test]
fn auxiliary_function_never_decreases() {
    let grid = scenario1_grid();
    let truth = scenario1_truth(None);
    let sensor = RadarSensor::with_snr_db(grid, SPREAD, NOISE_POWER, 5.0, Fluctuation::Swerling0);
    let model = MeasurementModel::new(grid, SPREAD).unwrap();
    let cfg = EmConfig::default();
    let mean_noise = (std::f64::consts::PI * NOISE_POWER / 4.0).sqrt();
    let mut checked = 0;

    for (i, k) in (30..80).step_by(5).enumerate() {
        let positions = truth.positions_at(k);
        assert!(!positions.is_empty());
        let image = render_frame_scenario1(&positions, &sensor, k, &mut frame_rng(100 + i as u64, k));

        // Tracks start a few metres off the truth, plus one with nothing under it.
        let mut specs: Vec<BirthSpec> = positions
            .iter()
            .map(|p| {
                let mean = Vector4::new(p[0] + 6.0, 0.0, p[1] - 9.0, 0.0);
                let cov = Matrix4::from_diagonal(&Vector4::new(100.0, 10.0, 100.0, 10.0));
                BirthSpec::new(mean, cov, 0.5, GammaParams::new(20.0, 1.0).unwrap()).unwrap()
            })
            .collect();
        specs.push(
            BirthSpec::new(
                Vector4::new(100.0, 0.0, 600.0, 0.0),
                Matrix4::from_diagonal(&Vector4::new(100.0, 10.0, 100.0, 10.0)),
                0.5,
                GammaParams::new(20.0, 1.0).unwrap(),
            )
            .unwrap(),
        );
        let mut tracks = spawn_births(&specs, k, ExponentialParams::new(1.0).unwrap(), &mut IdAllocator::default());
        for t in &mut tracks {
            merge_rate_prior(t).unwrap();
        }
        let mut clutter = ClutterComponent::new(grid.len() as f64 * mean_noise, 1.0).unwrap();
        let priors = AuxiliaryPriors::from_tracks(&tracks, &clutter, &model);

        let mut ws = EmWorkspace::new();
        let report = em_iterate(&image, &mut tracks, &mut clutter, &model, &cfg, &mut ws, true).unwrap();
        assert!(report.trace.len() >= 2);
        for pair in report.trace.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            let at_prev = auxiliary_value(&image, &priors, prev, prev, cfg.min_cell_mass);
            let at_next = auxiliary_value(&image, &priors, prev, next, cfg.min_cell_mass);
            assert!(at_next >= at_prev - 1e-8, "frame {k}: {at_next} < {at_prev}");
            checked += 1;

            // The M-step output is a local maximiser of L(. | prev).
            for m in 0..next.rates.len() {
                for d in [-1.0, 1.0] {
                    let mut nudged = next.clone();
                    nudged.rates[m] = (nudged.rates[m] * (1.0 + 1e-3 * d)).max(0.0);
                    nudged.states[m].mean[0] += 0.05 * d;
                    let v = auxiliary_value(&image, &priors, prev, &nudged, cfg.min_cell_mass);
                    assert!(v <= at_next + 1e-8, "frame {k}: nudging component {m} raised L");
                }
            }
        }
    }
    assert!(checked >= 10);
}
