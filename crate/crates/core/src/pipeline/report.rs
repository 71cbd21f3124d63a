use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use crate::fairness::FairnessReport;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSummary {
    pub n_patients: usize,
    pub n_features: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Patients dropped because they had no usable note tokens.
    pub excluded_without_notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossRow {
    pub model: String,
    pub train_loss: f64,
    pub val_loss: f64,
    pub reconstruction_loss: f64,
    pub weighted_reconstruction_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureError {
    pub feature: String,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureTable {
    pub model: String,
    /// Lowest errors first.
    pub best: Vec<FeatureError>,
    /// Highest errors first.
    pub worst: Vec<FeatureError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracyRow {
    pub task: String,
    pub classifier: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairnessRow {
    pub task: String,
    pub model: String,
    pub demographic_parity_ratio: Option<f64>,
    pub equality_of_opportunity_difference: Option<f64>,
    pub abs_equality_of_opportunity_difference: Option<f64>,
    pub equalized_odds_ratio: Option<f64>,
    pub accuracy: f64,
    /// `None` when the test labels hold a single class.
    pub auroc: Option<f64>,
}

impl FairnessRow {
    pub fn new(task: &str, model: &str, f: &FairnessReport, accuracy: f64, auroc: Option<f64>) -> Self {
        Self {
            task: task.to_string(),
            model: model.to_string(),
            demographic_parity_ratio: f.demographic_parity_ratio,
            equality_of_opportunity_difference: f.equality_of_opportunity_difference,
            abs_equality_of_opportunity_difference: f.abs_equality_of_opportunity_difference,
            equalized_odds_ratio: f.equalized_odds_ratio,
            accuracy,
            auroc,
        }
    }
}

/// Everything an experiment produced, in report form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: PipelineConfig,
    pub dataset: DatasetSummary,
    pub losses: Vec<LossRow>,
    pub feature_reconstruction: Vec<FeatureTable>,
    pub accuracy: Vec<AccuracyRow>,
    pub fairness: Vec<FairnessRow>,
}

pub const FAIRNESS_COLUMNS: [&str; 5] = [
    "Demographic Parity Ratio",
    "Equality of Opportunity Difference",
    "Equalized Odds Ratio",
    "Accuracy",
    "AUROC",
];

pub fn fixed4(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

/// Scientific notation with four decimals, e.g. `2.4762e-6`.
pub fn sci4(v: f64) -> String {
    format!("{v:.4e}")
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

pub fn fairness_markdown(rows: &[FairnessRow]) -> String {
    let mut header = vec!["Task", "Model"];
    header.extend(FAIRNESS_COLUMNS);
    let mut body = Vec::new();
    let mut last_task = None;
    for r in rows {
        let task = if last_task == Some(&r.task) { String::new() } else { r.task.clone() };
        last_task = Some(&r.task);
        body.push(vec![
            task,
            r.model.clone(),
            fixed4(r.demographic_parity_ratio),
            fixed4(r.equality_of_opportunity_difference),
            fixed4(r.equalized_odds_ratio),
            fixed4(Some(r.accuracy)),
            fixed4(r.auroc),
        ]);
    }
    let mut s = String::new();
    table(&mut s, &header, &body);
    s
}

pub fn loss_markdown(rows: &[LossRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                sci4(r.train_loss),
                sci4(r.val_loss),
                sci4(r.reconstruction_loss),
                sci4(r.weighted_reconstruction_loss),
            ]
        })
        .collect();
    let mut s = String::new();
    table(
        &mut s,
        &["Model", "Train Loss", "Validation Loss", "Reconstruction Loss", "Weighted Reconstruction Loss"],
        &body,
    );
    s
}

/// Side-by-side best or worst features of every model.
pub fn feature_markdown(tables: &[FeatureTable], worst: bool) -> String {
    let mut header: Vec<String> = vec!["Rank".into()];
    for t in tables {
        header.push("Clinical Feature".into());
        header.push(format!("{} Reconstruction Error", t.model));
    }
    let n = tables
        .iter()
        .map(|t| if worst { t.worst.len() } else { t.best.len() })
        .max()
        .unwrap_or(0);
    let body: Vec<Vec<String>> = (0..n)
        .map(|i| {
            let mut row = vec![(i + 1).to_string()];
            for t in tables {
                let list = if worst { &t.worst } else { &t.best };
                match list.get(i) {
                    Some(fe) => {
                        row.push(fe.feature.clone());
                        row.push(sci4(fe.error));
                    }
                    None => row.extend([String::new(), String::new()]),
                }
            }
            row
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut s = String::new();
    table(&mut s, &h, &body);
    s
}

pub fn accuracy_markdown(rows: &[AccuracyRow]) -> String {
    let mut body = Vec::new();
    let mut last_task = None;
    for r in rows {
        let task = if last_task == Some(&r.task) { String::new() } else { r.task.clone() };
        last_task = Some(&r.task);
        body.push(vec![task, r.classifier.clone(), fixed4(Some(r.accuracy))]);
    }
    let mut s = String::new();
    table(&mut s, &["Task", "Model", "Accuracy"], &body);
    s
}

impl RunReport {
    pub fn to_markdown(&self) -> String {
        let d = &self.dataset;
        let mut s = String::from("# Patient representation fairness report\n\n");
        let _ = writeln!(
            s,
            "Seed {}; {} patients ({} train / {} validation / {} test); {} features; \
             representation width {}; privileged group `{}`.\n",
            self.config.seed,
            d.n_patients,
            d.n_train,
            d.n_val,
            d.n_test,
            d.n_features,
            self.config.architecture.rep_dim,
            self.config.privileged,
        );
        if !d.excluded_without_notes.is_empty() {
            let _ = writeln!(s, "{} patients without note tokens were excluded.\n", d.excluded_without_notes.len());
        }
        s.push_str("## Fairness and performance by task\n\n");
        s.push_str(&fairness_markdown(&self.fairness));
        s.push_str("## Downstream classifier accuracy on FPM representations\n\n");
        s.push_str(&accuracy_markdown(&self.accuracy));
        s.push_str("## Training, validation and reconstruction loss\n\n");
        s.push_str(&loss_markdown(&self.losses));
        s.push_str("## Best feature reconstructions\n\n");
        s.push_str(&feature_markdown(&self.feature_reconstruction, false));
        s.push_str("## Worst feature reconstructions\n\n");
        s.push_str(&feature_markdown(&self.feature_reconstruction, true));
        s
    }
}
