//! GOSPA distance (`p = 2`, `alpha = 2`) with its localisation / missed /
//! false decomposition, and RMS aggregation over Monte Carlo runs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GospaDecomposition {
    pub total: f64,
    pub localisation: f64,
    pub missed: f64,
    pub false_targets: f64,
}

impl GospaDecomposition {
    fn from_squares(loc: f64, missed: f64, fals: f64, scale: f64) -> Self {
        Self {
            total: (loc + missed + fals).sqrt() / scale,
            localisation: loc.sqrt() / scale,
            missed: missed.sqrt() / scale,
            false_targets: fals.sqrt() / scale,
        }
    }

    pub fn components(&self) -> [f64; 4] {
        [self.total, self.localisation, self.missed, self.false_targets]
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Minimum-cost assignment of every row to a distinct column of a
/// `rows x cols` cost matrix with `rows <= cols` (Hungarian method with
/// potentials). Returns the column of each row.
pub fn assign(cost: &[f64], rows: usize, cols: usize) -> Vec<usize> {
    assert!(rows <= cols, "more rows than columns");
    assert_eq!(cost.len(), rows * cols);
    if rows == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    // 1-based arrays; index 0 is the virtual start.
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}

/// GOSPA between truth and estimate point sets with cut-off `c`, every
/// component divided by `scale`.
pub fn gospa(truth: &[[f64; 2]], estimates: &[[f64; 2]], c: f64, scale: f64) -> GospaDecomposition {
    let c2 = c * c;
    let half = c2 / 2.0;
    let (small, large, truth_is_rows) = if truth.len() <= estimates.len() {
        (truth, estimates, true)
    } else {
        (estimates, truth, false)
    };
    let cost: Vec<f64> = small
        .iter()
        .flat_map(|a| large.iter().map(move |b| dist(*a, *b).min(c).powi(2)))
        .collect();
    let pairs = assign(&cost, small.len(), large.len());

    let mut loc = 0.0;
    let mut cut = 0usize;
    for (i, &j) in pairs.iter().enumerate() {
        let d = dist(small[i], large[j]);
        if d < c {
            loc += d * d;
        } else {
            cut += 1;
        }
    }
    let extra = large.len() - small.len();
    let (missed_n, false_n) = if truth_is_rows { (cut, cut + extra) } else { (cut + extra, cut) };
    GospaDecomposition::from_squares(loc, half * missed_n as f64, half * false_n as f64, scale)
}

/// Per-step RMS over runs and the step average of those curves.
#[derive(Debug, Clone, PartialEq)]
pub struct GospaSummary {
    pub per_step: Vec<GospaDecomposition>,
    pub average: GospaDecomposition,
}

pub fn rms_over_runs(runs: &[Vec<GospaDecomposition>]) -> Result<GospaSummary> {
    let Some(first) = runs.first() else {
        return Err(Error::ShapeMismatch("no runs to aggregate".into()));
    };
    let steps = first.len();
    if let Some(bad) = runs.iter().find(|r| r.len() != steps) {
        return Err(Error::ShapeMismatch(format!("runs have {} and {} steps", steps, bad.len())));
    }
    let n = runs.len() as f64;
    let per_step: Vec<GospaDecomposition> = (0..steps)
        .map(|k| {
            let mut sq = [0.0; 4];
            for run in runs {
                for (s, v) in sq.iter_mut().zip(run[k].components()) {
                    *s += v * v;
                }
            }
            let [t, l, m, f] = sq.map(|s| (s / n).sqrt());
            GospaDecomposition {
                total: t,
                localisation: l,
                missed: m,
                false_targets: f,
            }
        })
        .collect();
    let mut avg = [0.0; 4];
    for d in &per_step {
        for (a, v) in avg.iter_mut().zip(d.components()) {
            *a += v;
        }
    }
    let [t, l, m, f] = avg.map(|a| if steps > 0 { a / steps as f64 } else { 0.0 });
    Ok(GospaSummary {
        per_step,
        average: GospaDecomposition {
            total: t,
            localisation: l,
            missed: m,
            false_targets: f,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identical_sets() {
        let p = [[1.0, 2.0], [5.0, -3.0]];
        assert_eq!(gospa(&p, &p, 20.0, 1.0), GospaDecomposition::default());
        assert_eq!(gospa(&[], &[], 20.0, 1.0), GospaDecomposition::default());
    }

    #[test]
    fn single_miss() {
        let d = gospa(&[[0.0, 0.0]], &[], 20.0, 1.0);
        assert_relative_eq!(d.total, 200f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(d.missed, d.total);
        assert_eq!(d.false_targets, 0.0);
        let d = gospa(&[], &[[0.0, 0.0]], 20.0, 10.0);
        assert_relative_eq!(d.false_targets, 200f64.sqrt() / 10.0, epsilon = 1e-12);
    }

    #[test]
    fn far_pair_is_miss_plus_false() {
        let d = gospa(&[[0.0, 0.0]], &[[100.0, 0.0]], 20.0, 1.0);
        assert_relative_eq!(d.missed, 200f64.sqrt());
        assert_relative_eq!(d.false_targets, 200f64.sqrt());
        assert_eq!(d.localisation, 0.0);
    }

    #[test]
    fn assignment_prefers_global_optimum() {
        // Greedy would pair row 0 with column 0.
        let cost = [1.0, 2.0, 1.5, 10.0];
        assert_eq!(assign(&cost, 2, 2), vec![1, 0]);
    }

    #[test]
    fn rms_examples() {
        let e = |t| GospaDecomposition {
            total: t,
            ..Default::default()
        };
        let s = rms_over_runs(&[vec![e(3.0)], vec![e(4.0)]]).unwrap();
        assert_relative_eq!(s.per_step[0].total, 12.5f64.sqrt());
        let s = rms_over_runs(&[vec![e(2.0), e(4.0)]]).unwrap();
        assert_eq!(s.per_step[1].total, 4.0);
        assert_eq!(s.average.total, 3.0);
        assert!(rms_over_runs(&[vec![e(1.0)], vec![]]).is_err());
    }
}
