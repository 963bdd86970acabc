//! Scalar special functions and the Poisson-rate prior merge.
//!
//! The existence-weighted prior on a Poisson rate is a two-component mixture
//! of an exponential (target absent) and a gamma (target present). To keep the
//! EM update conjugate the mixture is replaced by the single gamma density that
//! minimises `KL(mixture || gamma)`. That gamma matches the mixture's mean and
//! its expected logarithm, which fixes the shape through
//! `log a - digamma(a) = log E[x] - E[log x]`.

use crate::error::{invalid, Error, Result};

/// Euler–Mascheroni constant, `-digamma(1)`.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const MERGE_MAX_ITERS: usize = 100;
const MERGE_TOL: f64 = 1e-10;

/// Shape/rate parameters of a gamma density `x^(a-1) b^a e^(-b x) / Γ(a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl GammaParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(invalid("shape", format!("must be positive and finite, got {shape}")));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(invalid("rate", format!("must be positive and finite, got {rate}")));
        }
        Ok(Self { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    /// `E[log x]` under this density.
    pub fn mean_log(&self) -> f64 {
        digamma_unchecked(self.shape) - self.rate.ln()
    }

    pub fn is_valid(&self) -> bool {
        self.shape > 0.0 && self.rate > 0.0 && self.shape.is_finite() && self.rate.is_finite()
    }
}

/// Rate parameter of an exponential density `γ e^(-γ x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialParams {
    pub rate: f64,
}

impl ExponentialParams {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(invalid("rate", format!("must be positive and finite, got {rate}")));
        }
        Ok(Self { rate })
    }

    /// The exponential as a shape-one gamma.
    pub fn as_gamma(&self) -> GammaParams {
        GammaParams {
            shape: 1.0,
            rate: self.rate,
        }
    }
}

/// Digamma function `ψ0(x)` for `x > 0`.
///
/// Shifts the argument above 10 with `ψ0(x) = ψ0(x + 1) - 1/x` and then sums
/// the asymptotic expansion; absolute error is around 1e-15.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            function: "digamma",
            value: x,
        });
    }
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli terms B_2k / (2k x^2k), k = 1..7
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    acc + x.ln() - 0.5 * inv - series
}

/// Trigamma function `ψ1(x)` for `x > 0`, used as the Newton derivative in
/// the shape solve.
pub fn trigamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            function: "trigamma",
            value: x,
        });
    }
    Ok(trigamma_unchecked(x))
}

fn trigamma_unchecked(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        + 0.5 * inv2
        + inv * inv2
            * (1.0 / 6.0
                - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))));
    acc + series
}

/// Natural log of the gamma function.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Mode of a gamma density, zero when the shape is below one.
pub fn gamma_mode(p: &GammaParams) -> f64 {
    if p.shape >= 1.0 {
        (p.shape - 1.0) / p.rate
    } else {
        0.0
    }
}

/// Log density of a gamma distribution at `x >= 0`.
///
/// At `x = 0` this is `-inf` for shape above one and `+inf` below one.
pub fn log_gamma_pdf(x: f64, p: &GammaParams) -> f64 {
    if x == 0.0 {
        return if p.shape > 1.0 {
            f64::NEG_INFINITY
        } else if p.shape == 1.0 {
            p.rate.ln()
        } else {
            f64::INFINITY
        };
    }
    p.shape * p.rate.ln() - ln_gamma(p.shape) + (p.shape - 1.0) * x.ln() - p.rate * x
}

/// Log density of an exponential distribution at `x >= 0`.
pub fn log_exp_pdf(x: f64, p: &ExponentialParams) -> f64 {
    p.rate.ln() - p.rate * x
}

/// Collapse `w1 Exp(γ) + w2 Gamma(α, β)` into the KL-closest single gamma.
///
/// The returned shape solves `log a - ψ0(a) = log(mean) - E[log x]` with a
/// bracketed Newton iteration; the rate then reproduces the mixture mean.
pub fn merge_exp_gamma(
    w1: f64,
    exp: &ExponentialParams,
    w2: f64,
    gam: &GammaParams,
) -> Result<GammaParams> {
    if !(0.0..=1.0).contains(&w1) || !(0.0..=1.0).contains(&w2) || (w1 + w2 - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidWeights { w1, w2 });
    }
    if !exp.rate.is_finite() || exp.rate <= 0.0 {
        return Err(invalid("exp.rate", format!("must be positive, got {}", exp.rate)));
    }
    if !gam.is_valid() {
        return Err(invalid("gamma", format!("invalid parameters {gam:?}")));
    }
    // Exact shortcuts keep the degenerate mixtures bit-identical.
    if w1 == 0.0 {
        return Ok(*gam);
    }
    if w2 == 0.0 {
        return Ok(exp.as_gamma());
    }

    let mean = w1 / exp.rate + w2 * gam.mean();
    let mean_log = w1 * (-EULER_GAMMA - exp.rate.ln()) + w2 * gam.mean_log();
    let target = mean.ln() - mean_log;
    let shape = solve_shape(target)?;
    Ok(GammaParams {
        shape,
        rate: shape / mean,
    })
}

/// Solve `log a - ψ0(a) = target` for `a > 0`.
///
/// The left side decreases strictly from `+inf` to `0`, so any positive target
/// has exactly one root.
pub(crate) fn solve_shape(target: f64) -> Result<f64> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::MergeDidNotConverge {
            iterations: 0,
            residual: target,
        });
    }
    let f = |a: f64| a.ln() - digamma_unchecked(a) - target;

    // Moment-matching guess; log a - ψ0(a) ≈ 1/(2a) for large a.
    let guess = (3.0 - target + ((target - 3.0).powi(2) + 24.0 * target).sqrt()) / (12.0 * target);
    let mut lo = guess;
    let mut hi = guess;
    let mut expansions = 0;
    while f(lo) < 0.0 {
        lo *= 0.5;
        expansions += 1;
        if expansions > 2 * MERGE_MAX_ITERS {
            return Err(Error::MergeDidNotConverge {
                iterations: expansions,
                residual: f(lo),
            });
        }
    }
    while f(hi) > 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 2 * MERGE_MAX_ITERS {
            return Err(Error::MergeDidNotConverge {
                iterations: expansions,
                residual: f(hi),
            });
        }
    }

    let mut a = guess.clamp(lo, hi);
    let mut residual = f(a);
    for iter in 0..MERGE_MAX_ITERS {
        if residual > 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        let slope = 1.0 / a - trigamma_unchecked(a);
        let mut next = a - residual / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - a).abs();
        a = next;
        residual = f(a);
        if residual.abs() <= MERGE_TOL && (step <= 1e-14 * a || residual == 0.0 || iter > 4) {
            return Ok(a);
        }
        if hi - lo <= 1e-15 * a {
            break;
        }
    }
    if residual.abs() <= MERGE_TOL {
        Ok(a)
    } else {
        Err(Error::MergeDidNotConverge {
            iterations: MERGE_MAX_ITERS,
            residual,
        })
    }
}
