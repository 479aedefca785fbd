use alloc::string::ToString;
use alloc::vec::Vec;

use super::ols::ols;
use super::special::f_upper_tail;
use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrangerResult {
    pub lag: usize,
    pub f_stat: f64,
    pub p_value: f64,
    /// Rows entering the regressions.
    pub n_obs: usize,
    pub rss_restricted: f64,
    pub rss_unrestricted: f64,
}

/// Does `x` help predict `y` at lag `p`? Rows need `y_t` and every lagged
/// value of both series to be present.
pub fn granger_test(x: &[Option<f64>], y: &[Option<f64>], p: usize) -> Result<GrangerResult> {
    if p == 0 {
        return Err(Error::InvalidParameter {
            name: "lag",
            reason: "must be at least 1".to_string(),
        });
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "series lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    let rows: Vec<usize> = (p..y.len())
        .filter(|&t| y[t].is_some() && (1..=p).all(|j| y[t - j].is_some() && x[t - j].is_some()))
        .collect();
    let n = rows.len();
    if n <= 3 * p + 5 {
        return Err(Error::InsufficientData { have: n, need: 3 * p + 5 });
    }
    let value = |s: &[Option<f64>], i: usize| s[i].expect("row filter checked presence");
    let target: Vec<f64> = rows.iter().map(|&t| value(y, t)).collect();
    let cell = |r: usize, j: usize| -> f64 {
        let t = rows[r];
        match j {
            0 => 1.0,
            j if j <= p => value(y, t - j),
            j => value(x, t - (j - p)),
        }
    };
    let restricted = ols(&Matrix::from_fn(n, p + 1, cell), &target)?;
    let unrestricted = ols(&Matrix::from_fn(n, 2 * p + 1, cell), &target)?;
    let df_den = (n - 2 * p - 1) as f64;
    let gain = (restricted.rss - unrestricted.rss).max(0.0);
    let f_stat = if unrestricted.rss > 0.0 {
        (gain / p as f64) / (unrestricted.rss / df_den)
    } else if gain > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(GrangerResult {
        lag: p,
        f_stat,
        p_value: f_upper_tail(f_stat, p as f64, df_den),
        n_obs: n,
        rss_restricted: restricted.rss,
        rss_unrestricted: unrestricted.rss,
    })
}

/// All lags of one direction.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionScan {
    pub lags: Vec<Result<GrangerResult>>,
}

impl DirectionScan {
    /// Lag with the smallest p-value (earliest on ties); `None` when no lag
    /// was testable.
    pub fn best(&self) -> Option<&GrangerResult> {
        self.lags
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .fold(None, |acc: Option<&GrangerResult>, r| match acc {
                Some(b) if b.p_value <= r.p_value => Some(b),
                _ => Some(r),
            })
    }

    pub fn executed(&self) -> usize {
        self.lags.iter().filter(|r| r.is_ok()).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrangerScan {
    /// `x → y`
    pub forward: DirectionScan,
    /// `y → x`
    pub backward: DirectionScan,
    pub max_lag: usize,
    pub clip: Option<usize>,
}

/// Tests both directions at lags `1..=max_lag`, optionally on the first
/// `clip` positions only.
pub fn granger_scan(x: &[Option<f64>], y: &[Option<f64>], max_lag: usize, clip: Option<usize>) -> Result<GrangerScan> {
    if max_lag == 0 {
        return Err(Error::InvalidParameter {
            name: "max_lag",
            reason: "must be at least 1".to_string(),
        });
    }
    let end = clip.map_or(x.len(), |c| c.min(x.len()));
    let (x, y) = (&x[..end], &y[..end.min(y.len())]);
    let scan = |a: &[Option<f64>], b: &[Option<f64>]| DirectionScan {
        lags: (1..=max_lag).map(|p| granger_test(a, b, p)).collect(),
    };
    Ok(GrangerScan {
        forward: scan(x, y),
        backward: scan(y, x),
        max_lag,
        clip,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bonferroni {
    pub alpha: f64,
    pub tests: usize,
    pub threshold: f64,
    pub significant: Vec<bool>,
}

/// Flags `p <= alpha / m` where `m` is the number of p-values supplied.
pub fn bonferroni(p_values: &[f64], alpha: f64) -> Result<Bonferroni> {
    if p_values.is_empty() {
        return Err(Error::Empty("p-values"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: "must lie in (0, 1)".to_string(),
        });
    }
    let threshold = alpha / p_values.len() as f64;
    Ok(Bonferroni {
        alpha,
        tests: p_values.len(),
        threshold,
        significant: p_values.iter().map(|&p| p <= threshold).collect(),
    })
}
