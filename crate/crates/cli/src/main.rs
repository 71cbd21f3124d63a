use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use fpm_core::classify::ClassifierKind;
use fpm_core::pipeline::{self, fixed4, sci4, ModelPreset, PipelineConfig};
use fpm_core::preprocess::Horizon;

/// Fairness-aware patient representation learning.
#[derive(Parser, Debug)]
#[command(name = "fpm", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON pipeline configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; every stage seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic patient matrix (and notes when configured).
    Synth,
    /// Clean a raw EHR CSV into a patient matrix.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        /// JSON map from column name to kind.
        #[arg(long)]
        schema: PathBuf,
        /// Matrix sidecar whose fitted statistics are reused.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Topic modelling of clinical notes.
    #[command(subcommand)]
    Topics(TopicsCommand),
    /// Train a representation model.
    Train {
        #[arg(long)]
        matrix: PathBuf,
        /// sdae, fpm or rw-sdae; defaults to the configured preset.
        #[arg(long)]
        preset: Option<ModelPreset>,
    },
    /// Encode patients with a trained checkpoint.
    Encode {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Fit a mortality classifier on a representation.
    Classify {
        #[arg(long)]
        reps: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
        /// 30d, 60d, 90d or 365d.
        #[arg(long)]
        task: Option<Horizon>,
        /// tree, forest, gbm or logistic.
        #[arg(long)]
        classifier: Option<ClassifierKind>,
    },
    /// Group-fairness metrics of a predictions CSV.
    Fairness {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        privileged: Option<String>,
    },
    /// Best and worst reconstructed features of a checkpoint.
    FeatureReport {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        top_n: Option<usize>,
    },
    /// Run every stage and write report.json and report.md.
    Experiment {
        /// Existing matrix instead of synthetic data.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        notes: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum TopicsCommand {
    /// Fit LDA on a notes JSONL file.
    Fit {
        #[arg(long)]
        notes: PathBuf,
    },
    /// Append per-patient topic weights to a matrix.
    Vectorize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        notes: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
    },
}

fn load_config(g: &Global) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.paths.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = load_config(&cli.global)?;
    let out = cfg.paths.out.clone();
    match cli.command {
        Command::Synth => {
            let s = pipeline::cmd_synth(&cfg, &out)?;
            println!("matrix: {} ({} patients, {} features)", s.matrix.display(), s.n_patients, s.n_features);
            if let Some(n) = s.notes {
                println!("notes: {}", n.display());
            }
        }
        Command::Preprocess { input, schema, stats } => {
            let p = pipeline::cmd_preprocess(&cfg, &input, &schema, stats.as_deref(), &out)?;
            println!(
                "matrix: {} ({} patients, {} features, statistics {})",
                p.matrix.display(),
                p.n_patients,
                p.n_features,
                if p.fitted { "fitted" } else { "reused" }
            );
        }
        Command::Topics(TopicsCommand::Fit { notes }) => {
            let t = pipeline::cmd_topics_fit(&cfg, &notes, &out)?;
            println!(
                "model: {} ({} documents, {} tokens, vocabulary {})",
                t.model.display(),
                t.n_docs,
                t.n_tokens,
                t.vocab_size
            );
            println!("perplexity: {:.4}", t.perplexity);
        }
        Command::Topics(TopicsCommand::Vectorize { model, notes, matrix }) => {
            let v = pipeline::cmd_topics_vectorize(&cfg, &model, &notes, &matrix, &out)?;
            println!("matrix: {}", v.matrix.display());
            println!("excluded without notes: {} (listed in {})", v.excluded.len(), v.excluded_list.display());
        }
        Command::Train { matrix, preset } => {
            let preset = preset.unwrap_or(cfg.preset);
            let t = pipeline::cmd_train(&cfg, preset, &matrix, &out)?;
            println!("checkpoint: {}", t.checkpoint.display());
            print!("{}", pipeline::loss_markdown(&[t.losses]));
        }
        Command::Encode { checkpoint, matrix } => {
            let p = pipeline::cmd_encode(&checkpoint, &matrix, &out)?;
            println!("representation: {}", p.display());
        }
        Command::Classify {
            reps,
            matrix,
            task,
            classifier,
        } => {
            let c = pipeline::cmd_classify(
                &cfg,
                &reps,
                &matrix,
                task.unwrap_or(cfg.task),
                classifier.unwrap_or(cfg.classifier),
                &out,
            )?;
            println!("predictions: {}", c.predictions.display());
            println!("accuracy: {}", fixed4(Some(c.metrics.accuracy)));
            println!("auroc: {}", fixed4(c.metrics.auroc));
        }
        Command::Fairness { predictions, privileged } => {
            let f = pipeline::cmd_fairness(&predictions, privileged.as_deref().unwrap_or(&cfg.privileged), &out)?;
            println!("report: {}", f.json.display());
            print!("{}", std::fs::read_to_string(&f.markdown)?);
            for (metric, reason) in &f.summary.fairness.undefined {
                println!("{metric}: n/a ({reason})");
            }
        }
        Command::FeatureReport {
            checkpoint,
            matrix,
            top_n,
        } => {
            if let Some(n) = top_n {
                cfg.top_n = n;
            }
            let r = pipeline::cmd_feature_report(&cfg, &checkpoint, &matrix, &out)?;
            println!("report: {}", r.json.display());
            for (label, list) in [("best", &r.table.best), ("worst", &r.table.worst)] {
                for fe in list.iter() {
                    println!("{label} {} {}", fe.feature, sci4(fe.error));
                }
            }
        }
        Command::Experiment { matrix, notes } => {
            if matrix.is_some() {
                cfg.paths.matrix = matrix;
            }
            if notes.is_some() {
                cfg.paths.notes = notes;
            }
            let e = pipeline::cmd_experiment(&cfg)?;
            println!("report: {}", e.markdown.display());
            print!("{}", e.report.to_markdown());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()).context("fpm failed") {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
