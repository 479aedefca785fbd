use alloc::vec::Vec;

use super::ols::ols;
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Regressors {
    /// Intercept and time.
    #[default]
    Linear,
    /// Intercept, time and six day-of-week indicators.
    LinearDayOfWeek,
}

impl Regressors {
    fn columns(self) -> usize {
        match self {
            Regressors::Linear => 2,
            Regressors::LinearDayOfWeek => 8,
        }
    }
}

/// Causal residuals: `residuals[t]` is `None` for gaps, for positions with
/// fewer than `window_obs` valid observations up to `t`, and where the
/// local design is deficient.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualSeries {
    pub first_day: i64,
    pub residuals: Vec<Option<f64>>,
    pub window_obs: usize,
    pub regressors: Regressors,
}

impl ResidualSeries {
    pub fn valid_count(&self) -> usize {
        self.residuals.iter().filter(|r| r.is_some()).count()
    }
}

/// Weekday of a day index, 0 = Monday (1970-01-01 was a Thursday).
fn weekday(day: i64) -> usize {
    (day + 3).rem_euclid(7) as usize
}

/// For each `t`, regresses the last `window_obs` valid observations ending at
/// `t` and keeps only the residual at `t`. `first_day` is the day index of
/// `series[0]`, used for the weekday regressors.
pub fn rolling_detrend(
    series: &[Option<f64>],
    first_day: i64,
    window_obs: usize,
    regressors: Regressors,
) -> ResidualSeries {
    assert!(window_obs >= regressors.columns(), "window too short for the regressors");
    let mut residuals = alloc::vec![None; series.len()];
    let mut valid: Vec<usize> = Vec::new();
    let cols = regressors.columns();
    for (t, value) in series.iter().enumerate() {
        let Some(y_t) = *value else { continue };
        valid.push(t);
        if valid.len() < window_obs {
            continue;
        }
        let idx = &valid[valid.len() - window_obs..];
        let origin = idx[0];
        let row = |i: usize, j: usize| -> f64 {
            match j {
                0 => 1.0,
                1 => (i - origin) as f64,
                d => (weekday(first_day + i as i64) == d - 2) as u8 as f64,
            }
        };
        let design = Matrix::from_fn(window_obs, cols, |r, j| row(idx[r], j));
        let y: Vec<f64> = idx.iter().map(|&i| series[i].expect("valid index")).collect();
        if let Ok(fit) = ols(&design, &y) {
            let x_t: Vec<f64> = (0..cols).map(|j| row(t, j)).collect();
            residuals[t] = Some(y_t - fit.predict(&x_t));
        }
    }
    ResidualSeries {
        first_day,
        residuals,
        window_obs,
        regressors,
    }
}
