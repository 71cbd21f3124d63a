//! Structured-EHR cleaning, the calibrated synthetic generator and
//! stratified splitting.

mod clean;
mod features;
mod split;
mod synth;
mod table;

pub use clean::{
    aggregate_encounters, filter_missingness, fit_transform, impute_median, one_hot_encode,
    table_to_matrix, transform, zscore_normalize, CategoryLevels, ColumnStats, Imputation,
    NormStats, PreprocessStats, DEFAULT_MISSINGNESS_THRESHOLD,
};
pub use features::{sidecar_path, FeatureMatrix, Horizon, MatrixSidecar};
pub use split::{split, split_indices, SplitFractions, SplitIndices};
pub use synth::{synth_generate, SynthConfig};
pub use table::{Column, ColumnData, ColumnKind, RawTable, Schema};
