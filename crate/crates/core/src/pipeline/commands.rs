use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ModelPreset, PipelineConfig};
use super::io::{base_name, ensure_dir, read_matrix, write_json, write_notes_jsonl, Representation};
use super::report::{
    fairness_markdown, feature_markdown, AccuracyRow, DatasetSummary, FairnessRow, FeatureError, FeatureTable,
    LossRow, RunReport, REPORT_SCHEMA_VERSION,
};
use crate::classify::{accuracy, auroc, predict_proba, threshold_scores, ClassifierKind, ClassifierModel, ClassifierParams};
use crate::error::{Error, Result};
use crate::fairness::{class_keys, inverse_frequency_weights, kamiran_calders_weights, FairnessReport, PredictionSet, WeightBy};
use crate::numcore::{derive_seed, Matrix, Rng};
use crate::preprocess::{
    fit_transform, sidecar_path, split_indices, synth_generate, transform, FeatureMatrix, Horizon, MatrixSidecar,
    RawTable, Schema, SplitIndices, SynthConfig,
};
use crate::sdae::{
    encode, init_model, per_feature_errors, train, Checkpoint, LossKind, TrainSet, CHECKPOINT_VERSION,
};
use crate::textmodel::{
    lda_fit, lda_infer, perplexity, preprocess_note, read_notes_jsonl, synth_notes, topic_vectorize, Corpus, Note,
    TopicModel,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutputs {
    pub matrix: PathBuf,
    pub notes: Option<PathBuf>,
    pub n_patients: usize,
    pub n_features: usize,
}

/// Writes `matrix.csv` (+ sidecar) and, with `synth_notes` set, `notes.jsonl`.
pub fn cmd_synth(cfg: &PipelineConfig, out_dir: &Path) -> Result<SynthOutputs> {
    ensure_dir(out_dir)?;
    let synth = SynthConfig {
        seed: derive_seed(cfg.seed, "synth"),
        ..cfg.synth.clone()
    };
    let fm = synth_generate(&synth)?;
    let matrix = out_dir.join("matrix.csv");
    fm.write(&matrix, &sidecar_path(&matrix), None)?;
    let notes = match &cfg.synth_notes {
        Some(nc) => {
            let labels = fm.labels.get(&Horizon::D30).map(Vec::as_slice);
            let notes = synth_notes(&fm.ids, labels, nc, derive_seed(cfg.seed, "synth-notes"))?;
            let path = out_dir.join("notes.jsonl");
            write_notes_jsonl(&path, &notes)?;
            Some(path)
        }
        None => None,
    };
    Ok(SynthOutputs {
        matrix,
        notes,
        n_patients: fm.n_patients(),
        n_features: fm.n_features(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessOutputs {
    pub matrix: PathBuf,
    pub n_patients: usize,
    pub n_features: usize,
    /// False when statistics came from an earlier run.
    pub fitted: bool,
}

/// Cleans a raw CSV. With `stats_from` (a matrix sidecar written by an
/// earlier run) the stored statistics are applied instead of refitted.
pub fn cmd_preprocess(
    cfg: &PipelineConfig,
    raw_csv: &Path,
    schema: &Path,
    stats_from: Option<&Path>,
    out_dir: &Path,
) -> Result<PreprocessOutputs> {
    ensure_dir(out_dir)?;
    let schema = Schema::load(schema)?;
    let table = RawTable::read_csv(raw_csv, &schema)?;
    let (fm, stats) = match stats_from {
        Some(p) => {
            let sidecar: MatrixSidecar = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            let stats = sidecar
                .normalization
                .ok_or_else(|| Error::InvalidConfig(format!("{} holds no fitted statistics", p.display())))?;
            (transform(&table, &stats)?, stats)
        }
        None => fit_transform(&table, cfg.missingness_threshold)?,
    };
    let matrix = out_dir.join("matrix.csv");
    fm.write(&matrix, &sidecar_path(&matrix), Some(stats))?;
    Ok(PreprocessOutputs {
        matrix,
        n_patients: fm.n_patients(),
        n_features: fm.n_features(),
        fitted: stats_from.is_none(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicsFitOutputs {
    pub model: PathBuf,
    pub perplexity: f64,
    pub n_docs: usize,
    pub n_tokens: usize,
    pub vocab_size: usize,
}

pub fn cmd_topics_fit(cfg: &PipelineConfig, notes: &Path, out_dir: &Path) -> Result<TopicsFitOutputs> {
    ensure_dir(out_dir)?;
    let notes = read_notes_jsonl(notes)?;
    let corpus = Corpus::from_notes(&notes)?;
    let model = lda_fit(&corpus, cfg.lda.params(), derive_seed(cfg.seed, "lda"))?;
    let perplexity = perplexity(&model, &corpus)?;
    let path = out_dir.join("topics.json");
    model.save(&path)?;
    Ok(TopicsFitOutputs {
        model: path,
        perplexity,
        n_docs: corpus.docs.len(),
        n_tokens: corpus.n_tokens(),
        vocab_size: corpus.vocab.len(),
    })
}

pub fn topic_column(t: usize) -> String {
    format!("topic_{t:02}")
}

/// Appends K topic weights per patient. Every note is folded into the
/// model; patients without any in-vocabulary token are dropped and returned.
pub fn topic_features(
    cfg: &PipelineConfig,
    model: &TopicModel,
    notes: &[Note],
    fm: &FeatureMatrix,
) -> Result<(FeatureMatrix, Vec<String>)> {
    let base = derive_seed(cfg.seed, "lda-infer");
    let mut by_patient: HashMap<&str, Vec<Vec<usize>>> = HashMap::new();
    for (j, note) in notes.iter().enumerate() {
        let tokens = preprocess_note(&note.text);
        let inf = lda_infer(model, &tokens, cfg.lda.infer_sweeps, base.wrapping_add(j as u64));
        by_patient.entry(note.patient_id.as_str()).or_default().push(inf.assignments);
    }
    let known: HashSet<&str> = fm.ids.iter().map(String::as_str).collect();
    let strangers = by_patient.keys().filter(|id| !known.contains(*id)).count();
    if strangers > 0 {
        log::warn!("{strangers} patient(s) in the notes are not in the matrix; ignored");
    }
    let k = model.k();
    let mut keep = Vec::new();
    let mut excluded = Vec::new();
    let mut data = Vec::new();
    for (i, id) in fm.ids.iter().enumerate() {
        let docs = by_patient.get(id.as_str()).map_or(&[][..], Vec::as_slice);
        match topic_vectorize(k, id, docs) {
            Ok(v) => {
                keep.push(i);
                data.extend(v);
            }
            Err(Error::NoNotes(_)) => excluded.push(id.clone()),
            Err(e) => return Err(e),
        }
    }
    if keep.is_empty() {
        return Err(Error::NoNotes(excluded));
    }
    if !excluded.is_empty() {
        log::warn!("{} patient(s) without note tokens excluded", excluded.len());
    }
    let extra = Matrix::new(keep.len(), k, data)?;
    let out = fm.select_rows(&keep).append_features((0..k).map(topic_column).collect(), &extra)?;
    Ok((out, excluded))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorizeOutputs {
    pub matrix: PathBuf,
    pub excluded: Vec<String>,
    pub excluded_list: PathBuf,
}

/// Writes `matrix_topics.csv` and `excluded_patients.txt` (one id per line).
pub fn cmd_topics_vectorize(
    cfg: &PipelineConfig,
    model: &Path,
    notes: &Path,
    matrix: &Path,
    out_dir: &Path,
) -> Result<VectorizeOutputs> {
    ensure_dir(out_dir)?;
    let model = TopicModel::load(model)?;
    let notes = read_notes_jsonl(notes)?;
    let (fm, sidecar) = read_matrix(matrix)?;
    let (with_topics, excluded) = topic_features(cfg, &model, &notes, &fm)?;
    let path = out_dir.join("matrix_topics.csv");
    with_topics.write(&path, &sidecar_path(&path), sidecar.normalization)?;
    let excluded_list = out_dir.join("excluded_patients.txt");
    let mut text = excluded.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    std::fs::write(&excluded_list, text)?;
    Ok(VectorizeOutputs {
        matrix: path,
        excluded,
        excluded_list,
    })
}

/// The train/validation/test partition every command uses.
pub fn split_for(cfg: &PipelineConfig, fm: &FeatureMatrix) -> Result<SplitIndices> {
    split_indices(fm, cfg.split, derive_seed(cfg.seed, "split"), cfg.stratify)
}

fn pick<T: Clone>(v: &[T], rows: &[usize]) -> Vec<T> {
    rows.iter().map(|&r| v[r].clone()).collect()
}

fn require_groups<'a>(fm: &'a FeatureMatrix, cfg: &PipelineConfig, why: &str) -> Result<&'a [String]> {
    let groups = fm.groups().ok_or_else(|| Error::MissingGroupColumn(why.to_string()))?;
    if fm.group_column.as_deref() != Some(cfg.group_column.as_str()) {
        log::warn!(
            "matrix group column `{}` differs from configured `{}`; using the matrix column",
            fm.group_column.as_deref().unwrap_or(""),
            cfg.group_column
        );
    }
    Ok(groups)
}

/// Training and validation loss weights for a preset. Validation rows take
/// the weight their class received in training (1 for unseen classes).
fn preset_weights(
    cfg: &PipelineConfig,
    preset: ModelPreset,
    loss_kind: LossKind,
    fm: &FeatureMatrix,
    idx: &SplitIndices,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let kc = match preset {
        ModelPreset::Fpm => false,
        ModelPreset::RwSdae => true,
        ModelPreset::Sdae if loss_kind == LossKind::Weighted => false,
        ModelPreset::Sdae => return Ok(None),
    };
    let groups = require_groups(fm, cfg, preset.as_str())?;
    let (keys, train_w) = if kc {
        let labels = fm.labels_for(cfg.reweight_label)?;
        let keys = class_keys(WeightBy::GroupLabel, groups, labels)?;
        let w = kamiran_calders_weights(&pick(labels, &idx.train), &pick(groups, &idx.train))?;
        (keys, w.values)
    } else {
        let labels = match cfg.weight_by {
            WeightBy::Group => vec![0; groups.len()],
            _ => fm.labels_for(cfg.reweight_label)?.to_vec(),
        };
        let keys = class_keys(cfg.weight_by, groups, &labels)?;
        let w = inverse_frequency_weights(&pick(&keys, &idx.train), true)?;
        (keys, w.values)
    };
    let table: HashMap<&str, f64> = idx
        .train
        .iter()
        .zip(&train_w)
        .map(|(&r, &w)| (keys[r].as_str(), w))
        .collect();
    let val_w = idx
        .val
        .iter()
        .map(|&r| table.get(keys[r].as_str()).copied().unwrap_or(1.0))
        .collect();
    Ok(Some((train_w, val_w)))
}

/// `n` draws with replacement, row `i` chosen with probability ∝ `w[i]`.
fn weighted_bootstrap(w: &[f64], n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut cum = Vec::with_capacity(w.len());
    let mut total = 0.0;
    for &v in w {
        total += v;
        cum.push(total);
    }
    let mut rows: Vec<usize> = (0..n)
        .map(|_| {
            let u = rng.uniform() * total;
            cum.partition_point(|&c| c <= u).min(w.len() - 1)
        })
        .collect();
    rows.sort_unstable();
    rows
}

fn group_indices(groups: &[String]) -> Vec<usize> {
    let levels: BTreeSet<&str> = groups.iter().map(String::as_str).collect();
    let pos: HashMap<&str, usize> = levels.into_iter().enumerate().map(|(i, g)| (g, i)).collect();
    groups.iter().map(|g| pos[g.as_str()]).collect()
}

fn last_or_nan(v: &[f64]) -> f64 {
    v.last().copied().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutputs {
    pub checkpoint: PathBuf,
    pub losses: LossRow,
    pub n_train: usize,
    pub n_val: usize,
}

/// Trains one preset on the training part of the split and saves
/// `<preset>.checkpoint.json`.
pub fn cmd_train(cfg: &PipelineConfig, preset: ModelPreset, matrix: &Path, out_dir: &Path) -> Result<TrainOutputs> {
    ensure_dir(out_dir)?;
    let (fm, _) = read_matrix(matrix)?;
    let idx = split_for(cfg, &fm)?;
    let mut tc = cfg.train_config(preset, derive_seed(cfg.seed, "train"));
    let mut weights = preset_weights(cfg, preset, tc.loss_kind, &fm, &idx)?;

    let mut train_rows = idx.train.clone();
    if preset == ModelPreset::RwSdae && cfg.resample {
        let (w, _) = weights.take().expect("rw-sdae always has weights");
        let mut rng = Rng::new(derive_seed(cfg.seed, "resample"));
        let draws = weighted_bootstrap(&w, w.len(), &mut rng);
        train_rows = draws.iter().map(|&i| idx.train[i]).collect();
        tc.loss_kind = LossKind::Plain;
    }

    let x_train = fm.values.select_rows(&train_rows);
    let x_val = fm.values.select_rows(&idx.val);
    let group_idx = if tc.latent_penalty > 0.0 {
        Some(group_indices(require_groups(&fm, cfg, "latent penalty")?))
    } else {
        None
    };
    let g_train = group_idx.as_ref().map(|g| pick(g, &train_rows));
    let mut train_set = TrainSet::new(&x_train);
    let mut val_set = TrainSet::new(&x_val);
    if let Some((tw, vw)) = &weights {
        train_set = train_set.with_weights(tw);
        val_set = val_set.with_weights(vw);
    }
    if let Some(g) = &g_train {
        train_set = train_set.with_groups(g);
    }

    let arch = cfg.architecture.for_width(fm.n_features());
    let model = init_model(&arch, derive_seed(cfg.seed, "init"))?;
    log::info!(
        "training {preset}: {} rows, widths {:?}, {} epochs",
        x_train.rows(),
        arch.widths(),
        tc.epochs
    );
    let (model, report) = train(model, &train_set, &val_set, &tc)?;
    let losses = LossRow {
        model: preset.display_name().to_string(),
        train_loss: last_or_nan(&report.train_loss),
        val_loss: last_or_nan(&report.val_loss),
        reconstruction_loss: report.reconstruction_loss,
        weighted_reconstruction_loss: report.weighted_reconstruction_loss,
    };
    let ck = Checkpoint {
        version: CHECKPOINT_VERSION,
        preset: preset.as_str().to_string(),
        model,
        train_config: tc,
        loss_report: report,
        feature_names: fm.feature_names.clone(),
    };
    let path = out_dir.join(format!("{preset}.checkpoint.json"));
    ck.save(&path)?;
    Ok(TrainOutputs {
        checkpoint: path,
        losses,
        n_train: train_rows.len(),
        n_val: idx.val.len(),
    })
}

fn check_features(ck: &Checkpoint, fm: &FeatureMatrix) -> Result<()> {
    if ck.feature_names.len() != fm.n_features() {
        return Err(Error::dims(
            "encode",
            format!(
                "checkpoint expects {} features, matrix has {}",
                ck.feature_names.len(),
                fm.n_features()
            ),
        ));
    }
    if ck.feature_names != fm.feature_names {
        return Err(Error::InvalidConfig(
            "matrix feature columns differ from the checkpoint's".into(),
        ));
    }
    Ok(())
}

/// Encodes every patient of the matrix into `<preset>.reps.csv`.
pub fn cmd_encode(checkpoint: &Path, matrix: &Path, out_dir: &Path) -> Result<PathBuf> {
    ensure_dir(out_dir)?;
    let ck = Checkpoint::load(checkpoint)?;
    let (fm, _) = read_matrix(matrix)?;
    check_features(&ck, &fm)?;
    let rep = Representation {
        ids: fm.ids.clone(),
        values: encode(&ck.model, &fm.values)?,
    };
    let path = out_dir.join(format!("{}.reps.csv", ck.preset));
    rep.write_csv(&path)?;
    Ok(path)
}

/// AUROC, or `None` when only one class is present.
fn auroc_or_none(y: &[u8], scores: &[f64]) -> Result<Option<f64>> {
    match auroc(y, scores) {
        Ok(v) => Ok(Some(v)),
        Err(Error::SingleClass) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyMetrics {
    pub representation: String,
    pub task: Horizon,
    pub classifier: ClassifierKind,
    pub threshold: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub auroc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOutputs {
    pub predictions: PathBuf,
    pub model: PathBuf,
    pub metrics_path: PathBuf,
    pub metrics: ClassifyMetrics,
}

/// Fits a classifier on the training rows of a representation and scores
/// the test rows. Files are named `<reps>_<task>_<classifier>.*`.
pub fn cmd_classify(
    cfg: &PipelineConfig,
    reps: &Path,
    matrix: &Path,
    task: Horizon,
    kind: ClassifierKind,
    out_dir: &Path,
) -> Result<ClassifyOutputs> {
    ensure_dir(out_dir)?;
    let (fm, _) = read_matrix(matrix)?;
    let x = Representation::read_csv(reps)?.aligned_to(&fm.ids)?;
    let idx = split_for(cfg, &fm)?;
    let y = fm.labels_for(task)?;
    let groups = require_groups(&fm, cfg, "classify")?;
    let params = ClassifierParams {
        seed: derive_seed(cfg.seed, &format!("classify/{task}")).wrapping_add(cfg.classifier_params.seed),
        ..cfg.classifier_params
    };
    let model = ClassifierModel::fit(kind, &x.select_rows(&idx.train), &pick(y, &idx.train), &params)?;
    let scores = predict_proba(&model, &x.select_rows(&idx.test))?;
    let y_test = pick(y, &idx.test);
    let preds = threshold_scores(&scores, cfg.threshold);
    let metrics = ClassifyMetrics {
        representation: base_name(reps),
        task,
        classifier: kind,
        threshold: cfg.threshold,
        n_train: idx.train.len(),
        n_test: idx.test.len(),
        accuracy: accuracy(&y_test, &preds)?,
        auroc: auroc_or_none(&y_test, &scores)?,
    };
    let set = PredictionSet::new(
        pick(&fm.ids, &idx.test),
        y_test,
        preds,
        scores,
        pick(groups, &idx.test),
        cfg.privileged.clone(),
    )?;
    let name = format!("{}_{}_{}", metrics.representation, task, kind.as_str());
    let predictions = out_dir.join(format!("{name}.predictions.csv"));
    set.write_csv(&predictions)?;
    let model_path = out_dir.join(format!("{name}.classifier.json"));
    model.save(&model_path)?;
    let metrics_path = out_dir.join(format!("{name}.metrics.json"));
    write_json(&metrics_path, &metrics)?;
    Ok(ClassifyOutputs {
        predictions,
        model: model_path,
        metrics_path,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairnessSummary {
    pub source: String,
    pub fairness: FairnessReport,
    pub accuracy: f64,
    pub auroc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessOutputs {
    pub summary: FairnessSummary,
    pub json: PathBuf,
    pub markdown: PathBuf,
}

/// Scores a predictions CSV; writes `<name>.fairness.json` and a one-row
/// Markdown table.
pub fn cmd_fairness(predictions: &Path, privileged: &str, out_dir: &Path) -> Result<FairnessOutputs> {
    ensure_dir(out_dir)?;
    let set = PredictionSet::read_csv(predictions, privileged)?;
    let summary = FairnessSummary {
        source: base_name(predictions),
        fairness: FairnessReport::compute(&set),
        accuracy: accuracy(&set.y_true, &set.y_pred)?,
        auroc: auroc_or_none(&set.y_true, &set.score)?,
    };
    for (metric, reason) in &summary.fairness.undefined {
        log::warn!("{metric} undefined for {}: {reason}", summary.source);
    }
    let json = out_dir.join(format!("{}.fairness.json", summary.source));
    write_json(&json, &summary)?;
    let markdown = out_dir.join(format!("{}.fairness.md", summary.source));
    let row = FairnessRow::new("", &summary.source, &summary.fairness, summary.accuracy, summary.auroc);
    std::fs::write(&markdown, fairness_markdown(&[row]))?;
    Ok(FairnessOutputs { summary, json, markdown })
}

fn preset_label(name: &str) -> String {
    name.parse::<ModelPreset>()
        .map_or_else(|_| name.to_string(), |p| p.display_name().to_string())
}

/// Best and worst reconstructed features of a checkpoint on a matrix.
pub fn feature_table(ck: &Checkpoint, fm: &FeatureMatrix, top_n: usize) -> Result<FeatureTable> {
    check_features(ck, fm)?;
    let fe = per_feature_errors(&ck.model, &fm.values)?;
    let entry = |j: usize| FeatureError {
        feature: fm.feature_names[j].clone(),
        error: fe.errors[j],
    };
    Ok(FeatureTable {
        model: preset_label(&ck.preset),
        best: fe.best(top_n).into_iter().map(entry).collect(),
        worst: fe.worst(top_n).into_iter().map(entry).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureReportOutputs {
    pub table: FeatureTable,
    pub json: PathBuf,
    pub markdown: PathBuf,
}

pub fn cmd_feature_report(
    cfg: &PipelineConfig,
    checkpoint: &Path,
    matrix: &Path,
    out_dir: &Path,
) -> Result<FeatureReportOutputs> {
    ensure_dir(out_dir)?;
    let ck = Checkpoint::load(checkpoint)?;
    let (fm, _) = read_matrix(matrix)?;
    let table = feature_table(&ck, &fm, cfg.top_n)?;
    let json = out_dir.join(format!("{}.features.json", ck.preset));
    write_json(&json, &table)?;
    let markdown = out_dir.join(format!("{}.features.md", ck.preset));
    let md = format!(
        "## Best reconstructions\n\n{}## Worst reconstructions\n\n{}",
        feature_markdown(std::slice::from_ref(&table), false),
        feature_markdown(std::slice::from_ref(&table), true)
    );
    std::fs::write(&markdown, md)?;
    Ok(FeatureReportOutputs { table, json, markdown })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutputs {
    pub report: RunReport,
    pub json: PathBuf,
    pub markdown: PathBuf,
}

/// Runs every stage under `paths.out`: data/, models/, reps/, classify/,
/// fairness/, then report.json and report.md.
pub fn cmd_experiment(cfg: &PipelineConfig) -> Result<ExperimentOutputs> {
    cfg.validate()?;
    let out = ensure_dir(&cfg.paths.out)?;
    let data_dir = out.join("data");
    let models_dir = out.join("models");
    let reps_dir = out.join("reps");
    let classify_dir = out.join("classify");
    let fairness_dir = out.join("fairness");

    let (mut matrix, notes) = match &cfg.paths.matrix {
        Some(p) => (p.clone(), cfg.paths.notes.clone()),
        None => {
            let s = cmd_synth(cfg, &data_dir)?;
            (s.matrix, cfg.paths.notes.clone().or(s.notes))
        }
    };
    let mut excluded = Vec::new();
    if let Some(notes) = notes {
        let topics = cmd_topics_fit(cfg, &notes, &data_dir)?;
        log::info!("topic model perplexity {:.4}", topics.perplexity);
        let v = cmd_topics_vectorize(cfg, &topics.model, &notes, &matrix, &data_dir)?;
        matrix = v.matrix;
        excluded = v.excluded;
    }
    let (fm, _) = read_matrix(&matrix)?;
    let idx = split_for(cfg, &fm)?;

    let mut losses = Vec::new();
    let mut tables = Vec::new();
    let mut reps = Vec::new();
    for &preset in &cfg.experiment.presets {
        let t = cmd_train(cfg, preset, &matrix, &models_dir)?;
        losses.push(t.losses);
        reps.push((preset, cmd_encode(&t.checkpoint, &matrix, &reps_dir)?));
        tables.push(cmd_feature_report(cfg, &t.checkpoint, &matrix, &models_dir)?.table);
    }

    let mut fairness = Vec::new();
    let mut accuracy_rows = Vec::new();
    for &task in &cfg.experiment.tasks {
        let mut main_accuracy = HashMap::new();
        for (preset, rep) in &reps {
            let c = cmd_classify(cfg, rep, &matrix, task, cfg.classifier, &classify_dir)?;
            let f = cmd_fairness(&c.predictions, &cfg.privileged, &fairness_dir)?;
            main_accuracy.insert(*preset, c.metrics.accuracy);
            fairness.push(FairnessRow::new(
                task.task_name(),
                preset.display_name(),
                &f.summary.fairness,
                f.summary.accuracy,
                f.summary.auroc,
            ));
        }
        let Some((_, fpm_rep)) = reps.iter().find(|(p, _)| *p == ModelPreset::Fpm) else {
            continue;
        };
        for &kind in &cfg.experiment.accuracy_classifiers {
            let acc = if kind == cfg.classifier {
                main_accuracy[&ModelPreset::Fpm]
            } else {
                cmd_classify(cfg, fpm_rep, &matrix, task, kind, &classify_dir)?.metrics.accuracy
            };
            accuracy_rows.push(AccuracyRow {
                task: task.task_name().to_string(),
                classifier: kind.display_name().to_string(),
                accuracy: acc,
            });
        }
    }
    if !cfg.experiment.presets.contains(&ModelPreset::Fpm) {
        log::warn!("fpm is not among the presets; the classifier comparison is skipped");
    }

    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        dataset: DatasetSummary {
            n_patients: fm.n_patients(),
            n_features: fm.n_features(),
            n_train: idx.train.len(),
            n_val: idx.val.len(),
            n_test: idx.test.len(),
            excluded_without_notes: excluded,
        },
        losses,
        feature_reconstruction: tables,
        accuracy: accuracy_rows,
        fairness,
    };
    let json = out.join("report.json");
    write_json(&json, &report)?;
    let markdown = out.join("report.md");
    std::fs::write(&markdown, report.to_markdown())?;
    Ok(ExperimentOutputs { report, json, markdown })
}
