//! Loss weights that rebalance groups, and group-fairness metrics of binary
//! predictions.

mod metrics;
mod weights;

pub use metrics::{
    confusion_by_group, demographic_parity_ratio, dpr_from_counts, eod_from_counts, eor_from_counts,
    equality_of_opportunity_difference, equalized_odds_ratio, positive_rate_by_group, Confusion,
    FairnessReport, PredictionSet, DEFAULT_PRIVILEGED,
};
pub use weights::{
    class_keys, inverse_frequency_weights, inverse_frequency_weights_with_levels, kamiran_calders_weights,
    SampleWeights, WeightBy, WeightScheme,
};
