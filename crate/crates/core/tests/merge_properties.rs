use phpmht_core::special::{digamma, ln_gamma, merge_exp_gamma, ExponentialParams, GammaParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Draw {
    w: f64,
    exp: ExponentialParams,
    gam: GammaParams,
}

fn draws(n: usize, seed: u64) -> Vec<Draw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Draw {
            w: rng.random_range(0.01..0.99),
            exp: ExponentialParams::new(rng.random_range(0.1..10.0)).unwrap(),
            gam: GammaParams::new(rng.random_range(0.5..30.0), rng.random_range(0.1..10.0)).unwrap(),
        })
        .collect()
}

/// Mixture `w Gamma + (1-w) Exp` integrated on a log-spaced grid. A gamma's
/// cross-entropy against it depends only on `E[x]` and `E[log x]`, so those
/// two quadrature moments are all the oracle keeps.
struct Mixture {
    mean: f64,
    mean_log: f64,
}

impl Mixture {
    fn new(d: &Draw) -> Self {
        let hi = 60.0 * (1.0 / d.exp.rate).max(d.gam.shape / d.gam.rate + 10.0 * d.gam.shape.sqrt() / d.gam.rate);
        let (t0, t1) = (-40.0f64, hi.ln());
        let n = 20_000;
        let h = (t1 - t0) / n as f64;
        let (mut mean, mut mean_log) = (0.0, 0.0);
        for k in 0..=n {
            let t = t0 + h * k as f64;
            let x = t.exp();
            let e = d.exp.rate * (-d.exp.rate * x).exp();
            let g = (d.gam.shape * d.gam.rate.ln() - ln_gamma(d.gam.shape) + (d.gam.shape - 1.0) * t
                - d.gam.rate * x)
                .exp();
            let edge = if k == 0 || k == n { 0.5 } else { 1.0 };
            // dx = x dt
            let m = edge * h * x * ((1.0 - d.w) * e + d.w * g);
            mean += m * x;
            mean_log += m * t;
        }
        Self { mean, mean_log }
    }

    /// `E[log q(x)]` for a gamma `q` under the mixture.
    fn cross(&self, a: f64, b: f64) -> f64 {
        a * b.ln() - ln_gamma(a) + (a - 1.0) * self.mean_log - b * self.mean
    }
}

fn golden(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    0.5 * (a + b)
}

#[test]
fn merge_preserves_mixture_mean() {
    for d in draws(100, 11) {
        // Weight `w` on the gamma, `1 - w` on the exponential.
        let m = merge_exp_gamma(1.0 - d.w, &d.exp, d.w, &d.gam).unwrap();
        let expected = (1.0 - d.w) / d.exp.rate + d.w * d.gam.shape / d.gam.rate;
        let got = m.shape / m.rate;
        assert!((got - expected).abs() <= 1e-10 * expected, "{got} vs {expected}");
    }
}

#[test]
fn merge_matches_numeric_kl_minimiser() {
    for d in draws(100, 12) {
        let m = merge_exp_gamma(1.0 - d.w, &d.exp, d.w, &d.gam).unwrap();
        let mix = Mixture::new(&d);
        // Nested golden-section search over (log a, log b).
        let best_b = |la: f64| {
            let a = la.exp();
            golden(-12.0, 8.0, |lb| mix.cross(a, lb.exp()))
        };
        let la = golden(-8.0, 8.0, |la| mix.cross(la.exp(), best_b(la).exp()));
        let (a, b) = (la.exp(), best_b(la).exp());
        assert!((a - m.shape).abs() <= 1e-3 * m.shape, "shape {a} vs {}", m.shape);
        assert!((b - m.rate).abs() <= 1e-3 * m.rate, "rate {b} vs {}", m.rate);
    }
}

#[test]
fn merge_beats_perturbations() {
    for d in draws(100, 13) {
        let m = merge_exp_gamma(1.0 - d.w, &d.exp, d.w, &d.gam).unwrap();
        let mix = Mixture::new(&d);
        // KL(mix || q) = const - E[log q]; compare cross terms only.
        let at = mix.cross(m.shape, m.rate);
        for (da, db) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let a = m.shape * (1.0 + 1e-3 * da);
            let b = m.rate * (1.0 + 1e-3 * db);
            assert!(mix.cross(a, b) <= at + 1e-12, "perturbation improved KL");
        }
    }
}

proptest! {
    #[test]
    fn merge_mean_identity(
        w in 0.0f64..=1.0,
        rate in 0.05f64..20.0,
        shape in 0.2f64..50.0,
        grate in 0.05f64..20.0,
    ) {
        let exp = ExponentialParams::new(rate).unwrap();
        let gam = GammaParams::new(shape, grate).unwrap();
        let m = merge_exp_gamma(1.0 - w, &exp, w, &gam).unwrap();
        let expected = (1.0 - w) / rate + w * shape / grate;
        prop_assert!((m.mean() - expected).abs() <= 1e-10 * expected);
        prop_assert!(m.is_valid());
    }

    #[test]
    fn digamma_recurrence(x in 0.1f64..100.0) {
        let lhs = digamma(x + 1.0).unwrap();
        let rhs = digamma(x).unwrap() + 1.0 / x;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
    }

    #[test]
    fn digamma_reflection(x in 0.1f64..0.9) {
        // ψ(1 - x) - ψ(x) = π cot(πx), both arguments in (0, 1).
        let pi = std::f64::consts::PI;
        let lhs = digamma(1.0 - x).unwrap() - digamma(x).unwrap();
        let rhs = pi / (pi * x).tan();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
    }
}
