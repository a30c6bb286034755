use std::convert::Infallible;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::checkpoint::{Checkpoint, NamedTensor};
use crate::error::{Error, Result};
use crate::gnn::{classifier_forward, gcn_normalized_adjacency, join, Dense, GraphEncoder};
use crate::graph_data::{BrainGraph, Dataset};
use crate::renyi::{estimate_sigma, mi_with_gradients_at, SigmaEstimate, DEFAULT_NEIGHBORS};
use crate::subgraph::{mask_features, NodeAssignment, SubgraphGenerator};

use super::TrainingConfig;

pub const N_CLASSES: usize = 2;

/// Generator θ, encoder φ and classifier ψ.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<P = Tensor> {
    pub generator: SubgraphGenerator<P>,
    pub encoder: GraphEncoder<P>,
    pub classifier: Dense<P>,
}

impl<P> ModelParams<P> {
    pub fn try_map<Q, E>(
        &self,
        prefix: &str,
        f: &mut impl FnMut(&str, &P) -> Result<Q, E>,
    ) -> Result<ModelParams<Q>, E> {
        Ok(ModelParams {
            generator: self.generator.try_map(&join(prefix, "generator"), f)?,
            encoder: self.encoder.try_map(&join(prefix, "encoder"), f)?,
            classifier: self.classifier.try_map(&join(prefix, "classifier"), f)?,
        })
    }

    fn map<Q>(&self, mut f: impl FnMut(&str, &P) -> Q) -> ModelParams<Q> {
        let mapped: Result<_, Infallible> = self.try_map("", &mut |name, p| Ok(f(name, p)));
        mapped.unwrap_or_else(|e| match e {})
    }
}

impl ModelParams {
    pub fn init<R: Rng + ?Sized>(n_nodes: usize, cfg: &TrainingConfig, rng: &mut R) -> Self {
        let generator =
            SubgraphGenerator::init(n_nodes, cfg.generator_hidden, cfg.generator_mlp_hidden, rng);
        let encoder = GraphEncoder::init(n_nodes, cfg.encoder_hidden, rng);
        let d = cfg.encoder_hidden;
        Self {
            generator,
            encoder,
            classifier: Dense::init(d * d, N_CLASSES, rng),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.encoder.input_dim()
    }

    /// Parameters in a fixed order together with their dotted names.
    pub fn named(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        self.map(|name, t| out.push((name.to_owned(), t.clone())));
        out
    }

    pub fn tensors(&self) -> Vec<Tensor> {
        self.named().into_iter().map(|(_, t)| t).collect()
    }

    /// Rebuilds parameters of the same layout from tensors in [`Self::named`]
    /// order.
    pub fn with_tensors(&self, tensors: Vec<Tensor>) -> Result<Self> {
        let mut it = tensors.into_iter();
        let rebuilt = self.try_map("", &mut |name, old| {
            let t = it
                .next()
                .ok_or_else(|| Error::shape("with_tensors", format!("missing `{name}`")))?;
            if t.shape() != old.shape() {
                return Err(Error::shape(
                    "with_tensors",
                    format!("`{name}` is {:?}, expected {:?}", t.shape(), old.shape()),
                ));
            }
            Ok(t)
        })?;
        if it.next().is_some() {
            return Err(Error::shape("with_tensors", "too many tensors"));
        }
        Ok(rebuilt)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            self.named()
                .iter()
                .map(|(name, t)| NamedTensor::new(name.clone(), t))
                .collect(),
        )
    }

    /// Restores parameters; layer widths are read from the stored shapes.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let dims = |name: &str| ckpt.get(name).map(|t| t.shape());
        let [n, gen_hidden] = dims("generator.gcn1.weight")?;
        let [_, mlp_hidden] = dims("generator.mlp1.weight")?;
        let [_, enc_hidden] = dims("encoder.gin1.lin1.weight")?;
        let cfg = TrainingConfig {
            generator_hidden: gen_hidden,
            generator_mlp_hidden: mlp_hidden,
            encoder_hidden: enc_hidden,
            ..Default::default()
        };
        let mut rng = rand_chacha::ChaCha8Rng::from_seed([0; 32]);
        let template = Self::init(n, &cfg, &mut rng);
        let tensors = template
            .named()
            .iter()
            .map(|(name, _)| ckpt.get(name))
            .collect::<Result<Vec<_>>>()?;
        template
            .with_tensors(tensors)
            .map_err(|e| Error::Checkpoint(format!("inconsistent tensor shapes: {e}")))
    }

    fn bind(&self, tape: &mut Tape, trainable: bool) -> ModelParams<Var> {
        self.map(|_, t| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        })
    }

    fn check_graph(&self, g: &BrainGraph) -> Result<()> {
        if g.n_nodes() != self.n_nodes() {
            return Err(Error::NodeCount {
                expected: self.n_nodes(),
                found: g.n_nodes(),
            });
        }
        Ok(())
    }
}

/// Per-graph tape values produced by one forward pass.
struct GraphPass {
    z: Var,
    z_sub: Var,
}

fn forward_graph<R: Rng + ?Sized>(
    tape: &mut Tape,
    params: &ModelParams<Var>,
    g: &BrainGraph,
    dropout: f64,
    train: bool,
    rng: &mut R,
) -> Result<GraphPass> {
    let a = tape.constant(g.adjacency.clone());
    let a_norm = tape.constant(gcn_normalized_adjacency(&g.adjacency));
    let x = tape.constant(g.node_features.clone());
    let s = params.generator.forward(tape, a_norm, x)?;
    let x_sub = mask_features(tape, x, s)?;
    let z = params.encoder.forward(tape, a, x, dropout, train, rng)?;
    let z_sub = params.encoder.forward(tape, a, x_sub, dropout, train, rng)?;
    Ok(GraphPass { z, z_sub })
}

/// Loss terms and gradients of one mini-batch.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub total: f64,
    pub ce: f64,
    /// `I(Z; Z_sub)` in bits, before weighting by λ.
    pub mi: f64,
    pub grads: ModelParams,
    pub correct: usize,
}

/// Options for [`total_loss`] beyond the configuration.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossOptions {
    /// Dropout active.
    pub train: bool,
    /// Fixed kernel widths for (Z, Z_sub); estimated from the batch when
    /// absent.
    pub sigma: Option<(SigmaEstimate, SigmaEstimate)>,
}

/// `L = CE(ψ(Z_sub), Y) + λ · I(Z; Z_sub)` over a batch, with gradients for
/// every parameter. Kernel widths are treated as constants.
pub fn total_loss<R: Rng + ?Sized>(
    batch: &[&BrainGraph],
    params: &ModelParams,
    cfg: &TrainingConfig,
    opts: LossOptions,
    rng: &mut R,
) -> Result<LossOutput> {
    if batch.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "batch of {} graph(s); the mutual-information term needs a batch size of at least 2",
            batch.len()
        )));
    }
    for g in batch {
        params.check_graph(g)?;
    }
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, true);
    let mut zs = Vec::with_capacity(batch.len());
    let mut subs = Vec::with_capacity(batch.len());
    for g in batch {
        let pass = forward_graph(&mut tape, &bound, g, cfg.dropout, opts.train, rng)?;
        zs.push(pass.z);
        subs.push(pass.z_sub);
    }
    let z = tape.concat_rows(&zs)?;
    let z_sub = tape.concat_rows(&subs)?;
    let logits = classifier_forward(&mut tape, &bound.classifier, z_sub)?;
    let labels: Vec<usize> = batch.iter().map(|g| g.label).collect();
    let ce = tape.softmax_cross_entropy(logits, &labels)?;

    let zv = tape.value(z).clone();
    let sv = tape.value(z_sub).clone();
    let (sigma_z, sigma_sub) = match opts.sigma {
        Some(s) => s,
        None => (
            estimate_sigma(&zv, DEFAULT_NEIGHBORS)?,
            estimate_sigma(&sv, DEFAULT_NEIGHBORS)?,
        ),
    };
    let mi = mi_with_gradients_at(&zv, &sv, sigma_z, sigma_sub, cfg.alpha)?;
    let mi_var = tape.external(mi.terms.mi, vec![(z, mi.grad_z), (z_sub, mi.grad_sub)])?;
    let weighted = tape.scale(mi_var, cfg.lambda_mi);
    let total = tape.add(ce, weighted)?;

    let grads = tape.backward(total)?;
    let grads = bound.map(|_, &v| {
        let [r, c] = tape.value(v).shape();
        grads.get_or_zeros(v, r, c)
    });
    let correct = predictions_from_logits(tape.value(logits))
        .iter()
        .zip(&labels)
        .filter(|(p, y)| p.0 == **y)
        .count();
    Ok(LossOutput {
        total: tape.value(total).item(),
        ce: tape.value(ce).item(),
        mi: mi.terms.mi,
        grads,
        correct,
    })
}

fn predictions_from_logits(logits: &Tensor) -> Vec<(usize, f64)> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let p1 = 1.0 / (1.0 + (row[0] - row[1]).exp());
            (usize::from(row[1] > row[0]), p1)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub subject_id: String,
    pub label: usize,
    pub predicted: usize,
    /// Softmax probability of class 1.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub predictions: Vec<Prediction>,
}

impl Evaluation {
    /// `subject_id,label,predicted,probability`
    pub fn predictions_csv(&self) -> String {
        let mut out = String::from("subject_id,label,predicted,probability\n");
        for p in &self.predictions {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.subject_id, p.label, p.predicted, p.probability
            ));
        }
        out
    }
}

/// Eval-mode class logits and node assignment of one graph.
pub fn infer(params: &ModelParams, g: &BrainGraph) -> Result<(Tensor, NodeAssignment)> {
    params.check_graph(g)?;
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let a = tape.constant(g.adjacency.clone());
    let a_norm = tape.constant(gcn_normalized_adjacency(&g.adjacency));
    let x = tape.constant(g.node_features.clone());
    let s = bound.generator.forward(&mut tape, a_norm, x)?;
    let x_sub = mask_features(&mut tape, x, s)?;
    let mut unused = rand_chacha::ChaCha8Rng::from_seed([0; 32]);
    let z_sub = bound.encoder.forward(&mut tape, a, x_sub, 0.0, false, &mut unused)?;
    let logits = classifier_forward(&mut tape, &bound.classifier, z_sub)?;
    Ok((
        tape.value(logits).clone(),
        NodeAssignment::new(tape.value(s).clone())?,
    ))
}

pub fn predict(params: &ModelParams, g: &BrainGraph) -> Result<Prediction> {
    let (logits, _) = infer(params, g)?;
    let (predicted, probability) = predictions_from_logits(&logits)[0];
    Ok(Prediction {
        subject_id: g.subject_id.clone(),
        label: g.label,
        predicted,
        probability,
    })
}

/// Deterministic eval-mode accuracy over a dataset.
pub fn evaluate(params: &ModelParams, ds: &Dataset) -> Result<Evaluation> {
    evaluate_graphs(params, ds.graphs().iter())
}

pub(crate) fn evaluate_graphs<'a>(
    params: &ModelParams,
    graphs: impl Iterator<Item = &'a BrainGraph>,
) -> Result<Evaluation> {
    let predictions = graphs
        .map(|g| predict(params, g))
        .collect::<Result<Vec<_>>>()?;
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let correct = predictions.iter().filter(|p| p.predicted == p.label).count();
    Ok(Evaluation {
        accuracy: correct as f64 / predictions.len() as f64,
        predictions,
    })
}

/// Node assignments of every subject, for cohort-level ranking.
pub fn assignments(params: &ModelParams, ds: &Dataset) -> Result<Vec<NodeAssignment>> {
    ds.graphs().iter().map(|g| Ok(infer(params, g)?.1)).collect()
}
