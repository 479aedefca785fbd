//! Detrending, Granger tests with multiple-testing control, Mann-Whitney
//! comparisons, hashtag log-odds and rank correlation.

mod correlation;
mod detrend;
mod granger;
mod log_odds;
mod mann_whitney;
mod ols;
pub mod special;

pub use correlation::{midranks, pearson, spearman};
pub use detrend::{rolling_detrend, Regressors, ResidualSeries};
pub use granger::{bonferroni, granger_scan, granger_test, Bonferroni, DirectionScan, GrangerResult, GrangerScan};
pub use log_odds::{hashtag_log_odds, log_odds_ratio, LogOddsEntry};
pub use mann_whitney::{mann_whitney_auc, ToxicityComparison, EXACT_LIMIT};
pub use ols::{ols, OlsFit, RANK_TOL};
