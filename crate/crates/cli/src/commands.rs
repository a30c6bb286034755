use std::fs;
use std::path::{Path, PathBuf};

use brainib_core::checkpoint::Checkpoint;
use brainib_core::graph_data::{generate_synthetic_matrices, load_dataset_dir, save_matrices, SyntheticSpec};
use brainib_core::subgraph::{overlap_report, rank_nodes, ranking_csv, read_ranking_csv};
use brainib_core::topology::{cohort_metrics, compare_groups, comparison_csv, global_csv, nodal_csv};
use brainib_core::training::{self, fold_file, FoldResult, TrainOptions};
use brainib_core::{Dataset, Error, ModelParams, Result, TrainingConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::manifest::RunManifest;
use crate::{EvaluateArgs, MetricsArgs, RankArgs, SynthArgs, TrainArgs};

pub const SUMMARY_FILE: &str = "summary.json";

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

pub fn synth(a: &SynthArgs) -> Result<String> {
    let spec = SyntheticSpec {
        n_nodes: a.nodes,
        n_subjects_per_class: a.per_class,
        planted_nodes: a.planted.clone(),
        signal_strength: a.signal,
        noise_scale: a.noise,
        seed: a.seed,
    };
    let matrices = generate_synthetic_matrices(&spec)?;
    create_dir(&a.out)?;
    let written = save_matrices(&a.out, &matrices)?;
    let mut m = RunManifest::new(
        "synth",
        json!({
            "nodes": a.nodes,
            "per_class": a.per_class,
            "planted_nodes": a.planted,
            "signal": a.signal,
            "noise": a.noise,
        }),
        Some(a.seed),
        &a.out,
    );
    m.add_artifacts(&written)?;
    m.write()?;
    Ok(format!("wrote {} subjects to {}", matrices.len(), a.out.display()))
}

fn resolve_config(a: &TrainArgs) -> Result<TrainingConfig> {
    let mut cfg = match &a.config {
        Some(path) => TrainingConfig::load(path)?,
        None => TrainingConfig::default(),
    };
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("`--set {kv}` is not of the form key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.folds {
        cfg.folds = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.lambda_mi {
        cfg.lambda_mi = v;
    }
    if let Some(v) = a.lr_model {
        cfg.lr_model = v;
    }
    if let Some(v) = a.lr_subgraph {
        cfg.lr_subgraph = v;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.dropout {
        cfg.dropout = v;
    }
    if let Some(v) = a.patience {
        cfg.early_stop_patience = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub final_test_acc: f64,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub completed: bool,
    pub test_subjects: Vec<String>,
}

impl From<&FoldResult> for FoldRecord {
    fn from(f: &FoldResult) -> Self {
        Self {
            fold: f.fold_index + 1,
            final_test_acc: f.final_test_acc,
            best_epoch: f.best_epoch,
            best_val_acc: f.best_val_acc,
            epochs_run: f.history.len(),
            stopped_early: f.stopped_early,
            completed: f.completed,
            test_subjects: f.test_subjects.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainSummary {
    pub status: String,
    pub accuracy: Option<training::Summary>,
    pub folds: Vec<FoldRecord>,
}

pub fn train(a: &TrainArgs) -> Result<String> {
    let cfg = resolve_config(a)?;
    let ds = load_dataset_dir(&a.data.data, a.data.threshold)?;
    create_dir(&a.out)?;
    let opts = TrainOptions {
        out_dir: Some(a.out.clone()),
        parallel_folds: a.parallel_folds,
        halt_after: a.halt_after,
        resume: a.resume,
    };
    let outcome = training::train_with(&ds, &cfg, &opts)?;
    let summary = TrainSummary {
        status: if outcome.summary.is_some() { "completed" } else { "halted" }.into(),
        accuracy: outcome.summary.clone(),
        folds: outcome.folds.iter().map(FoldRecord::from).collect(),
    };

    let mut artifacts = vec![
        write(a.out.join("config.toml"), &cfg.to_toml_string())?,
        write(a.out.join(SUMMARY_FILE), &to_json(&summary))?,
    ];
    for f in &outcome.folds {
        artifacts.push(fold_file(&a.out, f.fold_index, "metrics.csv"));
        if f.completed {
            artifacts.push(fold_file(&a.out, f.fold_index, "checkpoint.json"));
        }
    }
    let mut m = RunManifest::new(
        "train",
        json!({ "training": cfg, "threshold": a.data.threshold, "parallel_folds": a.parallel_folds }),
        Some(cfg.seed),
        &a.out,
    );
    m.inputs.push(a.data.data.clone());
    m.inputs.extend(a.config.clone());
    m.add_artifacts(&artifacts)?;
    m.write()?;
    Ok(match &outcome.summary {
        Some(s) => format!("accuracy {} over {} folds", s.formatted, outcome.folds.len()),
        None => format!("halted; resume with --resume --out {}", a.out.display()),
    })
}

fn load_params(path: &Path) -> Result<ModelParams> {
    ModelParams::from_checkpoint(&Checkpoint::load(path)?)
}

fn fold_subjects(ds: &Dataset, summary: &Path, fold: usize) -> Result<Dataset> {
    let text = fs::read_to_string(summary).map_err(|e| Error::io(summary, e))?;
    let s: TrainSummary = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", summary.display())))?;
    let record = s
        .folds
        .iter()
        .find(|f| f.fold == fold)
        .ok_or_else(|| Error::InvalidArgument(format!("no fold {fold} in {}", summary.display())))?;
    let mut indices = Vec::with_capacity(record.test_subjects.len());
    for id in &record.test_subjects {
        let i = ds
            .graphs()
            .iter()
            .position(|g| &g.subject_id == id)
            .ok_or_else(|| Error::Dataset(format!("subject `{id}` not in dataset")))?;
        indices.push(i);
    }
    ds.subset(&indices)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<String> {
    let params = load_params(&a.checkpoint)?;
    let mut ds = load_dataset_dir(&a.data.data, a.data.threshold)?;
    if let (Some(summary), Some(fold)) = (&a.summary, a.fold) {
        ds = fold_subjects(&ds, summary, fold)?;
    }
    let eval = training::evaluate(&params, &ds)?;
    create_dir(&a.out)?;
    let correct = eval.predictions.iter().filter(|p| p.predicted == p.label).count();
    let artifacts = vec![
        write(a.out.join("predictions.csv"), &eval.predictions_csv())?,
        write(
            a.out.join("evaluation.json"),
            &to_json(&json!({
                "accuracy": eval.accuracy,
                "correct": correct,
                "subjects": eval.predictions.len(),
            })),
        )?,
    ];
    let mut m = RunManifest::new(
        "evaluate",
        json!({ "threshold": a.data.threshold, "fold": a.fold }),
        None,
        &a.out,
    );
    m.inputs.extend([a.checkpoint.clone(), a.data.data.clone()]);
    m.inputs.extend(a.summary.clone());
    m.add_artifacts(&artifacts)?;
    m.write()?;
    Ok(format!("accuracy {} ({correct}/{})", eval.accuracy, eval.predictions.len()))
}

pub fn rank(a: &RankArgs) -> Result<String> {
    let ds = load_dataset_dir(&a.data.data, a.data.threshold)?;
    let mut pooled = Vec::new();
    for path in &a.checkpoint {
        pooled.extend(training::assignments(&load_params(path)?, &ds)?);
    }
    let ranking = rank_nodes(&pooled, a.top_k)?;
    create_dir(&a.out)?;
    let mut artifacts = vec![write(a.out.join("ranking.csv"), &ranking_csv(&ranking))?];
    let mut message = format!(
        "top nodes {:?}",
        ranking.iter().take(5).map(|r| r.node).collect::<Vec<_>>()
    );
    if let Some(other) = &a.compare {
        let theirs: Vec<usize> = read_ranking_csv(other)?
            .into_iter()
            .take(ranking.len())
            .map(|r| r.node)
            .collect();
        let ours: Vec<usize> = ranking.iter().map(|r| r.node).collect();
        let report = overlap_report(&ours, &theirs)?;
        message.push_str(&format!("; overlap {}", report.fraction));
        artifacts.push(write(a.out.join("overlap.json"), &to_json(&report))?);
    }
    let mut m = RunManifest::new(
        "rank",
        json!({ "threshold": a.data.threshold, "top_k": a.top_k }),
        None,
        &a.out,
    );
    m.inputs.push(a.data.data.clone());
    m.inputs.extend(a.checkpoint.iter().cloned());
    m.inputs.extend(a.compare.clone());
    m.add_artifacts(&artifacts)?;
    m.write()?;
    Ok(message)
}

pub fn metrics(a: &MetricsArgs) -> Result<String> {
    let ds = load_dataset_dir(&a.data.data, a.data.threshold)?;
    let subjects = cohort_metrics(&ds)?;
    let comparison = if a.compare_groups {
        Some(compare_groups(&subjects)?)
    } else {
        None
    };
    create_dir(&a.out)?;
    let mut artifacts = vec![
        write(a.out.join("nodal.csv"), &nodal_csv(&subjects))?,
        write(a.out.join("global.csv"), &global_csv(&subjects))?,
    ];
    let mut message = format!("metrics for {} subjects", subjects.len());
    if let Some(rows) = &comparison {
        artifacts.push(write(a.out.join("comparison.csv"), &comparison_csv(rows))?);
        let significant = rows.iter().filter(|r| r.significant()).count();
        message.push_str(&format!("; {significant} of {} comparisons significant", rows.len()));
    }
    let mut m = RunManifest::new(
        "metrics",
        json!({ "threshold": a.data.threshold, "compare_groups": a.compare_groups }),
        None,
        &a.out,
    );
    m.inputs.push(a.data.data.clone());
    m.add_artifacts(&artifacts)?;
    m.write()?;
    Ok(message)
}
