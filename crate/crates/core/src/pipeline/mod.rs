//! Command-level stages shared by the CLI and the tests.

mod commands;
mod config;
mod io;
mod report;

pub use commands::{
    cmd_classify, cmd_encode, cmd_experiment, cmd_fairness, cmd_feature_report, cmd_preprocess, cmd_synth,
    cmd_topics_fit, cmd_topics_vectorize, cmd_train, feature_table, split_for, topic_column, topic_features,
    ClassifyMetrics, ClassifyOutputs, ExperimentOutputs, FairnessOutputs, FairnessSummary, FeatureReportOutputs,
    PreprocessOutputs, SynthOutputs, TopicsFitOutputs, TrainOutputs, VectorizeOutputs,
};
pub use config::{
    ArchitectureConfig, ExperimentConfig, LdaConfig, ModelPreset, Paths, PipelineConfig, TrainOverrides,
};
pub use io::{base_name, read_matrix, rep_column, write_json, write_notes_jsonl, Representation};
pub use report::{
    accuracy_markdown, fairness_markdown, feature_markdown, fixed4, loss_markdown, sci4, AccuracyRow,
    DatasetSummary, FairnessRow, FeatureError, FeatureTable, LossRow, RunReport, FAIRNESS_COLUMNS,
    REPORT_SCHEMA_VERSION,
};
