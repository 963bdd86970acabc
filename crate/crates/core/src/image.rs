use crate::error::{Error, Result};
use crate::grid::Grid;

/// One scan of nonnegative per-cell intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: usize,
}

impl IntensityImage {
    pub fn new(grid: Grid, values: Vec<f64>, time: usize) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "image has {} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "image",
                reason: format!("intensities must be finite and nonnegative, found {v}"),
            });
        }
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: Grid, time: usize) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            time,
        }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}
