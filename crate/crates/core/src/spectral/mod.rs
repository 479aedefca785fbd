//! Two-stage windowed PCA of the retweet incidence stream.
//!
//! Each window's user x influencer counts are double-centered (implicitly) and
//! reduced to their leading components; the resulting user scores from every
//! window are stacked into the sample matrix, whose own PCA defines the
//! low-dimensional diffusion space users and cluster centroids live in.

mod centering;
mod sample;
mod svd;
mod window;

pub use centering::{double_center, double_center_dense, DoubleCentered, LinearOperator, Transposed};
pub use sample::{
    align_windows, assemble_sample_matrix, sample_pca, user_vectors, Aggregation, Alignment,
    ColumnScaling, SampleMatrix, SampleSpace, UserVectors, SD_GUARD,
};
pub use svd::{truncated_svd, SvdOptions, TruncatedSvd};
pub use window::{window_scores, WindowDecomposition, WindowIncidence};
