//! Cross-validated training of the subgraph-bottleneck classifier.
//!
//! Each fold trains a fresh model with Adam on `CE + λ·MI`, using separate
//! learning rates for the subgraph generator and for encoder + classifier.
//! A stratified slice of the training fold drives early stopping; the test
//! fold is only ever evaluated, never used for model selection.
//!
//! All randomness is derived from `(seed, fold, epoch)`, so a fold can be
//! interrupted after any epoch and resumed from its state file with an
//! identical trajectory.

mod config;
mod kfold;
mod model;
mod optim;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::graph_data::{write_file, BrainGraph, Dataset};

pub use config::TrainingConfig;
pub use kfold::{stratified_holdout, stratified_kfold, stratified_kfold_labels, Fold};
pub use model::{
    assignments, evaluate, infer, predict, total_loss, Evaluation, LossOptions, LossOutput,
    ModelParams, Prediction, N_CLASSES,
};
pub use optim::Adam;

pub const METRICS_HEADER: &str = "epoch,ce_loss,mi_loss,train_acc,test_acc,lr_model,lr_subgraph,val_acc";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub ce_loss: f64,
    pub mi_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub lr_model: f64,
    pub lr_subgraph: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// 0-based; files use `index + 1`.
    pub fold_index: usize,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    /// Test accuracy of the selected (best-validation) parameters.
    pub final_test_acc: f64,
    pub test_subjects: Vec<String>,
    pub stopped_early: bool,
    /// False when training was halted before the fold finished.
    pub completed: bool,
}

impl FoldResult {
    pub fn metrics_csv(&self) -> String {
        let mut out = format!("{METRICS_HEADER}\n");
        for r in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.epoch, r.ce_loss, r.mi_loss, r.train_acc, r.test_acc, r.lr_model, r.lr_subgraph, r.val_acc
            ));
        }
        out
    }
}

/// Mean ± sample standard deviation of per-fold test accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub formatted: String,
}

impl Summary {
    pub fn from_accuracies(acc: &[f64]) -> Result<Self> {
        if acc.is_empty() {
            return Err(Error::InvalidArgument("no fold accuracies".into()));
        }
        let n = acc.len() as f64;
        let mean = acc.iter().sum::<f64>() / n;
        let std = if acc.len() > 1 {
            (acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            fold_accuracies: acc.to_vec(),
            mean_accuracy: mean,
            std_accuracy: std,
            formatted: format!("{mean:.3} ± {std:.3}"),
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Directory for per-fold metrics, checkpoints and resume state.
    pub out_dir: Option<PathBuf>,
    /// Worker threads for concurrent folds; 0 or 1 trains sequentially.
    pub parallel_folds: usize,
    /// Stop every fold after this many completed epochs, leaving resumable
    /// state behind.
    pub halt_after: Option<usize>,
    /// Continue folds from state files in `out_dir`.
    pub resume: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub folds: Vec<FoldResult>,
    /// Selected parameters of each fold.
    pub params: Vec<ModelParams>,
    pub splits: Vec<Fold>,
    /// Present once every fold has completed.
    pub summary: Option<Summary>,
}

pub fn fold_file(dir: &Path, fold_index: usize, suffix: &str) -> PathBuf {
    dir.join(format!("fold-{:02}.{suffix}", fold_index + 1))
}

/// Everything needed to continue a fold after an interruption.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FoldState {
    epochs_done: usize,
    params: Checkpoint,
    best: Checkpoint,
    adam: Adam,
    best_epoch: usize,
    best_val: Option<(f64, f64)>,
    since_best: usize,
    stopped_early: bool,
    history: Vec<EpochRecord>,
}

fn epoch_rng(seed: u64, fold: usize, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((fold as u64) << 32) | epoch as u64);
    rng
}

fn init_rng(seed: u64, fold: usize) -> ChaCha8Rng {
    epoch_rng(seed, fold, u32::MAX as usize)
}

fn batches(mut order: Vec<usize>, size: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    while !order.is_empty() {
        let rest = order.split_off(size.min(order.len()));
        out.push(std::mem::replace(&mut order, rest));
    }
    // A trailing singleton cannot form a mutual-information batch.
    if out.len() > 1 && out.last().is_some_and(|b| b.len() < 2) {
        let last = out.pop().unwrap_or_default();
        if let Some(prev) = out.last_mut() {
            prev.extend(last);
        }
    }
    out
}

/// Validation accuracy and mean cross-entropy (nats) in eval mode.
fn validation_score(params: &ModelParams, graphs: &[&BrainGraph]) -> Result<(f64, f64)> {
    if graphs.is_empty() {
        return Ok((0.0, 0.0));
    }
    let eval = model::evaluate_graphs(params, graphs.iter().copied())?;
    let ce = eval
        .predictions
        .iter()
        .map(|p| {
            let q = if p.label == 1 { p.probability } else { 1.0 - p.probability };
            -q.max(f64::MIN_POSITIVE).ln()
        })
        .sum::<f64>()
        / graphs.len() as f64;
    Ok((eval.accuracy, ce))
}

/// Trains one fold. Returns the fold record and its selected parameters.
pub fn train_fold(
    ds: &Dataset,
    cfg: &TrainingConfig,
    fold_index: usize,
    split: &Fold,
    opts: &TrainOptions,
) -> Result<(FoldResult, ModelParams)> {
    let graphs = ds.graphs();
    let labels = ds.labels();
    let holdout_seed = cfg.seed ^ (0x5EED_0000 + fold_index as u64);
    let (train_idx, val_idx) =
        stratified_holdout(&labels, &split.train, cfg.validation_fraction, holdout_seed);
    if train_idx.len() < 2 {
        return Err(Error::Dataset(format!(
            "fold {} has {} training subjects; need at least 2",
            fold_index + 1,
            train_idx.len()
        )));
    }
    let val: Vec<&BrainGraph> = val_idx.iter().map(|&i| &graphs[i]).collect();
    let test: Vec<&BrainGraph> = split.test.iter().map(|&i| &graphs[i]).collect();

    let state_path = opts.out_dir.as_deref().map(|d| fold_file(d, fold_index, "state.json"));
    let mut state = match (&state_path, opts.resume) {
        (Some(path), true) if path.exists() => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<FoldState>(&text)
                .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?
        }
        _ => {
            let params = ModelParams::init(ds.n_nodes(), cfg, &mut init_rng(cfg.seed, fold_index));
            FoldState {
                epochs_done: 0,
                params: params.to_checkpoint(),
                best: params.to_checkpoint(),
                adam: Adam::new(&params.tensors()),
                best_epoch: 0,
                best_val: None,
                since_best: 0,
                stopped_early: false,
                history: Vec::new(),
            }
        }
    };
    let mut params = ModelParams::from_checkpoint(&state.params)?;
    let is_generator: Vec<bool> = params
        .named()
        .iter()
        .map(|(name, _)| name.starts_with("generator."))
        .collect();

    let mut halted = false;
    while state.epochs_done < cfg.epochs && !state.stopped_early {
        if opts.halt_after.is_some_and(|h| state.history.len() >= h) {
            halted = true;
            break;
        }
        let epoch = state.epochs_done;
        let mut rng = epoch_rng(cfg.seed, fold_index, epoch);
        let (lr_model, lr_subgraph) = cfg.learning_rates(epoch);
        let lrs: Vec<f64> = is_generator
            .iter()
            .map(|&g| if g { lr_subgraph } else { lr_model })
            .collect();

        let mut order = train_idx.clone();
        order.shuffle(&mut rng);
        let (mut ce_sum, mut mi_sum, mut correct) = (0.0, 0.0, 0);
        let n_batches = batches(order, cfg.batch_size);
        for batch in &n_batches {
            let members: Vec<&BrainGraph> = batch.iter().map(|&i| &graphs[i]).collect();
            let out = total_loss(
                &members,
                &params,
                cfg,
                LossOptions {
                    train: true,
                    sigma: None,
                },
                &mut rng,
            )?;
            if !out.total.is_finite() {
                return Err(Error::Diverged {
                    fold: fold_index + 1,
                    epoch: epoch + 1,
                    detail: format!("loss {} (ce {}, mi {})", out.total, out.ce, out.mi),
                });
            }
            ce_sum += out.ce * batch.len() as f64;
            mi_sum += out.mi;
            correct += out.correct;
            let mut tensors = params.tensors();
            state.adam.update(&mut tensors, &out.grads.tensors(), &lrs)?;
            params = params.with_tensors(tensors)?;
        }

        let (val_acc, val_ce) = validation_score(&params, &val)?;
        let test_acc = model::evaluate_graphs(&params, test.iter().copied())?.accuracy;
        state.history.push(EpochRecord {
            epoch: epoch + 1,
            ce_loss: ce_sum / train_idx.len() as f64,
            mi_loss: mi_sum / n_batches.len() as f64,
            train_acc: correct as f64 / train_idx.len() as f64,
            test_acc,
            lr_model,
            lr_subgraph,
            val_acc,
        });
        let improved = match state.best_val {
            _ if val.is_empty() => true,
            None => true,
            Some((acc, ce)) => val_acc > acc || (val_acc == acc && val_ce < ce),
        };
        if improved {
            state.best_val = Some((val_acc, val_ce));
            state.best_epoch = epoch + 1;
            state.best = params.to_checkpoint();
            state.since_best = 0;
        } else {
            state.since_best += 1;
            if state.since_best >= cfg.early_stop_patience {
                state.stopped_early = true;
            }
        }
        state.epochs_done += 1;
        state.params = params.to_checkpoint();
        if let Some(path) = &state_path {
            let text = serde_json::to_string(&state)
                .map_err(|e| Error::Checkpoint(format!("cannot serialize state: {e}")))?;
            write_file(path, text.as_bytes())?;
        }
    }

    let best = ModelParams::from_checkpoint(&state.best)?;
    let final_test_acc = model::evaluate_graphs(&best, test.iter().copied())?.accuracy;
    let result = FoldResult {
        fold_index,
        history: state.history,
        best_epoch: state.best_epoch,
        best_val_acc: state.best_val.map_or(0.0, |b| b.0),
        final_test_acc,
        test_subjects: test.iter().map(|g| g.subject_id.clone()).collect(),
        stopped_early: state.stopped_early,
        completed: !halted,
    };
    if let Some(dir) = &opts.out_dir {
        write_file(&fold_file(dir, fold_index, "metrics.csv"), result.metrics_csv().as_bytes())?;
        if result.completed {
            best.to_checkpoint().save(&fold_file(dir, fold_index, "checkpoint.json"))?;
        }
    }
    Ok((result, best))
}

/// Stratified k-fold training without any file output.
pub fn train(ds: &Dataset, cfg: &TrainingConfig) -> Result<TrainOutcome> {
    train_with(ds, cfg, &TrainOptions::default())
}

pub fn train_with(ds: &Dataset, cfg: &TrainingConfig, opts: &TrainOptions) -> Result<TrainOutcome> {
    cfg.validate()?;
    if opts.resume && opts.out_dir.is_none() {
        return Err(Error::InvalidArgument("resuming needs an output directory".into()));
    }
    let splits = stratified_kfold(ds, cfg.folds, cfg.seed)?;
    let run = |(i, split): (usize, &Fold)| train_fold(ds, cfg, i, split, opts);
    let results: Vec<(FoldResult, ModelParams)> = if opts.parallel_folds > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallel_folds)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| splits.par_iter().enumerate().map(run).collect::<Result<_>>())?
    } else {
        splits.iter().enumerate().map(run).collect::<Result<_>>()?
    };
    let (folds, params): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let summary = if folds.iter().all(|f| f.completed) {
        let acc: Vec<f64> = folds.iter().map(|f| f.final_test_acc).collect();
        Some(Summary::from_accuracies(&acc)?)
    } else {
        None
    };
    Ok(TrainOutcome {
        folds,
        params,
        splits,
        summary,
    })
}
