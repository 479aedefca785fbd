//! Embedding stage: per-window decompositions in parallel, then the sample
//! matrix and its PCA.

use rayon::prelude::*;

use polarscope_core::linalg::Matrix;
use polarscope_core::spectral::{
    align_windows, assemble_sample_matrix, sample_pca, user_vectors, Aggregation, Alignment, ColumnScaling,
    SvdOptions, UserVectors, WindowDecomposition,
};
use polarscope_core::window::WindowPlan;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::ingest::EventStore;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmbedOptions {
    pub window_days: u32,
    pub k_window: usize,
    pub k_sample: usize,
    pub svd: SvdOptions,
    pub alignment: Alignment,
    pub scaling: ColumnScaling,
}

impl EmbedOptions {
    pub fn from_config(c: &RunConfig) -> Self {
        Self {
            window_days: c.window_days,
            k_window: c.k_window,
            k_sample: c.k_sample,
            svd: SvdOptions {
                tol: c.svd_tol,
                max_iterations: c.svd_max_iterations,
                seed: c.seed,
                ..SvdOptions::default()
            },
            alignment: c.alignment.into(),
            scaling: c.scaling.into(),
        }
    }
}

/// Diagnostics of one planned window.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowInfo {
    pub anchor: i64,
    pub first_day: i64,
    pub events: usize,
    pub users: usize,
    pub influencers: usize,
    /// False when the window had fewer than two users or influencers.
    pub valid: bool,
    pub effective_rank: usize,
    pub iterations: usize,
    pub total_variance: f64,
    /// Length `k_window`; zeros for invalid windows.
    pub singular_values: Vec<f64>,
}

impl WindowInfo {
    pub fn padded(&self, k_window: usize) -> bool {
        self.valid && self.effective_rank < k_window
    }
}

/// A window's decomposition together with its influencer ids.
#[derive(Clone, Debug)]
pub struct WindowResult {
    pub decomposition: WindowDecomposition,
    pub influencers: Vec<u32>,
}

/// Everything downstream stages need from the embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub k_window: usize,
    pub plan_degenerate: bool,
    /// One entry per planned window (every calendar day).
    pub windows: Vec<WindowInfo>,
    pub row_users: Vec<u32>,
    /// Planned-window position of each row.
    pub row_windows: Vec<u32>,
    pub projections: Matrix,
    /// `k_window x k_sample`.
    pub rotation: Matrix,
    pub scree: Vec<f64>,
    pub explained: Vec<f64>,
    pub column_means: Vec<f64>,
    pub column_scales: Vec<f64>,
    pub constant_columns: Vec<usize>,
    pub alignment_fallbacks: usize,
    pub k_requested: usize,
    pub reduced: bool,
}

impl Embedding {
    pub fn k_sample(&self) -> usize {
        self.projections.cols()
    }

    pub fn valid_windows(&self) -> usize {
        self.windows.iter().filter(|w| w.valid).count()
    }

    pub fn padded_windows(&self) -> usize {
        self.windows.iter().filter(|w| w.padded(self.k_window)).count()
    }

    pub fn user_vectors(&self, n_users: usize, aggregation: Aggregation) -> UserVectors {
        user_vectors(&self.row_users, &self.projections, n_users, aggregation)
    }

    /// `(first_day, last_day)` of every planned window.
    pub fn window_bounds(&self) -> Vec<(i64, i64)> {
        self.windows.iter().map(|w| (w.first_day, w.anchor)).collect()
    }
}

/// Decomposes every planned window in parallel; degenerate windows give
/// `None`, any other numerical failure aborts.
pub fn decompose_windows(
    store: &EventStore,
    plan: &WindowPlan,
    opts: &EmbedOptions,
) -> Result<Vec<Option<WindowResult>>> {
    plan.windows
        .par_iter()
        .map(|spec| {
            let incidence = store.incidence(spec);
            match polarscope_core::spectral::window_scores(&incidence, opts.k_window, &opts.svd) {
                Ok(decomposition) => Ok(Some(WindowResult {
                    decomposition,
                    influencers: incidence.influencers,
                })),
                Err(polarscope_core::Error::DegenerateWindow { .. }) => Ok(None),
                Err(e) => Err(Error::numeric("embed", e)),
            }
        })
        .collect()
}

fn window_info(plan: &WindowPlan, results: &[Option<WindowResult>], store: &EventStore, k_window: usize) -> Vec<WindowInfo> {
    plan.windows
        .iter()
        .zip(results)
        .map(|(spec, r)| {
            let (users, influencers) = match r {
                Some(r) => (r.decomposition.users.len(), r.influencers.len()),
                None => {
                    let inc = store.incidence(spec);
                    (inc.n_users(), inc.n_influencers())
                }
            };
            let d = r.as_ref().map(|r| &r.decomposition);
            WindowInfo {
                anchor: spec.anchor,
                first_day: spec.first_day,
                events: spec.event_count(),
                users,
                influencers,
                valid: d.is_some(),
                effective_rank: d.map_or(0, |d| d.effective_rank),
                iterations: d.map_or(0, |d| d.iterations),
                total_variance: d.map_or(0.0, |d| d.total_variance),
                singular_values: d.map_or_else(|| vec![0.0; k_window], |d| d.singular_values.clone()),
            }
        })
        .collect()
}

/// Aligns, stacks and decomposes the window scores. `results` holds one
/// entry per planned window.
pub fn assemble(
    plan: &WindowPlan,
    store: &EventStore,
    results: Vec<Option<WindowResult>>,
    opts: &EmbedOptions,
) -> Result<Embedding> {
    let windows = window_info(plan, &results, store, opts.k_window);
    let positions: Vec<u32> = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_some())
        .map(|(i, _)| i as u32)
        .collect();
    let decomps: Vec<WindowDecomposition> = results.into_iter().flatten().map(|r| r.decomposition).collect();
    let (rotations, unaligned) = align_windows(&decomps, opts.alignment);
    let s = assemble_sample_matrix(&decomps, Some(&rotations), opts.scaling).map_err(|e| Error::numeric("embed", e))?;
    drop(decomps);
    let space = sample_pca(&s, opts.k_sample).map_err(|e| Error::numeric("embed", e))?;
    Ok(Embedding {
        k_window: opts.k_window,
        plan_degenerate: plan.degenerate,
        windows,
        row_windows: s.row_windows.iter().map(|&w| positions[w as usize]).collect(),
        row_users: s.row_users,
        projections: space.projections,
        rotation: space.rotation,
        scree: space.scree,
        explained: space.explained,
        column_means: s.column_means,
        column_scales: s.column_scales,
        constant_columns: s.constant_columns,
        alignment_fallbacks: unaligned.iter().filter(|&&u| u).count(),
        k_requested: space.k_requested,
        reduced: space.reduced,
    })
}

/// Both embedding steps without caching.
pub fn embed(store: &EventStore, opts: &EmbedOptions) -> Result<Embedding> {
    let plan = store.plan_windows(opts.window_days);
    let results = decompose_windows(store, &plan, opts)?;
    assemble(&plan, store, results, opts)
}
