//! Subgraph generator, soft node masking and cohort-level node ranking.
//!
//! Node ids in rankings and reports are 1-based, matching the planted-node
//! ids of the synthetic generator.

use std::collections::BTreeSet;
use std::convert::Infallible;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::gnn::{gcn_forward, gcn_normalized_adjacency, join, Dense, GcnLayer};
use crate::graph_data::BrainGraph;

pub const DEFAULT_TOP_K: usize = 20;

/// Two GCN layers followed by a two-layer MLP that emits per-node logits for
/// (in subgraph, not in subgraph).
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphGenerator<P = Tensor> {
    pub gcn1: GcnLayer<P>,
    pub gcn2: GcnLayer<P>,
    pub mlp1: Dense<P>,
    pub mlp2: Dense<P>,
}

impl SubgraphGenerator {
    /// The output layer starts at zero so every node begins at probability
    /// one half and differences only arise from training.
    pub fn init<R: Rng + ?Sized>(
        d_in: usize,
        gcn_hidden: usize,
        mlp_hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            gcn1: GcnLayer::init(d_in, gcn_hidden, rng),
            gcn2: GcnLayer::init(gcn_hidden, gcn_hidden, rng),
            mlp1: Dense::init(gcn_hidden, mlp_hidden, rng),
            mlp2: Dense::zeros(mlp_hidden, 2),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.gcn1.weight.rows()
    }
}

impl<P> SubgraphGenerator<P> {
    pub fn try_map<Q, E>(
        &self,
        prefix: &str,
        f: &mut impl FnMut(&str, &P) -> Result<Q, E>,
    ) -> Result<SubgraphGenerator<Q>, E> {
        Ok(SubgraphGenerator {
            gcn1: self.gcn1.try_map(&join(prefix, "gcn1"), f)?,
            gcn2: self.gcn2.try_map(&join(prefix, "gcn2"), f)?,
            mlp1: self.mlp1.try_map(&join(prefix, "mlp1"), f)?,
            mlp2: self.mlp2.try_map(&join(prefix, "mlp2"), f)?,
        })
    }
}

impl SubgraphGenerator<Var> {
    /// `S = softmax(MLP₂(tanh(MLP₁(GCN₂(relu(GCN₁(A, X)))))))`, an `n x 2`
    /// tape value. `a_norm` holds the GCN-normalized adjacency.
    pub fn forward(&self, tape: &mut Tape, a_norm: Var, x: Var) -> Result<Var> {
        let h = gcn_forward(tape, &self.gcn1, a_norm, x)?;
        let h = tape.relu(h);
        let h = gcn_forward(tape, &self.gcn2, a_norm, h)?;
        let h = self.mlp1.forward(tape, h)?;
        let h = tape.tanh(h);
        let logits = self.mlp2.forward(tape, h)?;
        Ok(tape.row_softmax(logits))
    }
}

/// Scales row `i` of `x` by `sᵢ₀`, the probability that node `i` belongs to
/// the subgraph.
pub fn mask_features(tape: &mut Tape, x: Var, s: Var) -> Result<Var> {
    let p = tape.column(s, 0)?;
    tape.hadamard(x, p)
}

/// Row-stochastic `n x 2` matrix; column 0 is `P(node ∈ G_sub)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeAssignment {
    s: Tensor,
}

impl NodeAssignment {
    pub fn new(s: Tensor) -> Result<Self> {
        if s.cols() != 2 {
            return Err(Error::shape(
                "node_assignment",
                format!("expected n x 2, got {:?}", s.shape()),
            ));
        }
        for i in 0..s.rows() {
            let (a, b) = (s[(i, 0)], s[(i, 1)]);
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || (a + b - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "row {i} = ({a}, {b}) is not a probability pair"
                )));
            }
        }
        Ok(Self { s })
    }

    /// Builds an assignment from subgraph-membership probabilities.
    pub fn from_probabilities(p: &[f64]) -> Result<Self> {
        Self::new(Tensor::from_fn(p.len(), 2, |i, j| {
            if j == 0 {
                p[i]
            } else {
                1.0 - p[i]
            }
        }))
    }

    pub fn matrix(&self) -> &Tensor {
        &self.s
    }

    pub fn n_nodes(&self) -> usize {
        self.s.rows()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.s.rows()).map(|i| self.s[(i, 0)]).collect()
    }

    /// 1-based ids of nodes with probability ≥ `cutoff`, for reporting.
    pub fn hard_nodes(&self, cutoff: f64) -> Vec<usize> {
        (0..self.s.rows())
            .filter(|&i| self.s[(i, 0)] >= cutoff)
            .map(|i| i + 1)
            .collect()
    }
}

fn bind_constant(gen: &SubgraphGenerator, tape: &mut Tape) -> SubgraphGenerator<Var> {
    let bound: Result<_, Infallible> = gen.try_map("", &mut |_, t| Ok(tape.constant(t.clone())));
    bound.unwrap_or_else(|e| match e {})
}

/// Evaluates the generator on one graph.
pub fn node_assignment(g: &BrainGraph, theta: &SubgraphGenerator) -> Result<NodeAssignment> {
    if theta.input_dim() != g.node_features.cols() {
        return Err(Error::NodeCount {
            expected: theta.input_dim(),
            found: g.node_features.cols(),
        });
    }
    let mut tape = Tape::new();
    let gen = bind_constant(theta, &mut tape);
    let a_norm = tape.constant(gcn_normalized_adjacency(&g.adjacency));
    let x = tape.constant(g.node_features.clone());
    let s = gen.forward(&mut tape, a_norm, x)?;
    NodeAssignment::new(tape.value(s).clone())
}

/// Probability-masked view of a graph; the adjacency is left untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphView {
    pub masked_features: Tensor,
    pub adjacency: Tensor,
    pub probabilities: Vec<f64>,
}

pub fn apply_assignment(g: &BrainGraph, s: &NodeAssignment) -> Result<SubgraphView> {
    if s.n_nodes() != g.n_nodes() {
        return Err(Error::NodeCount {
            expected: g.n_nodes(),
            found: s.n_nodes(),
        });
    }
    let mut tape = Tape::new();
    let x = tape.constant(g.node_features.clone());
    let sv = tape.constant(s.matrix().clone());
    let masked = mask_features(&mut tape, x, sv)?;
    Ok(SubgraphView {
        masked_features: tape.value(masked).clone(),
        adjacency: g.adjacency.clone(),
        probabilities: s.probabilities(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedNode {
    /// 1-based node id.
    pub node: usize,
    pub score: f64,
}

/// Averages subgraph-membership probabilities over subjects and returns the
/// `top_k` nodes by descending mean, ties broken by ascending node id.
pub fn rank_nodes(assignments: &[NodeAssignment], top_k: usize) -> Result<Vec<RankedNode>> {
    let first = assignments
        .first()
        .ok_or_else(|| Error::InvalidArgument("no assignments to rank".into()))?;
    let n = first.n_nodes();
    let mut totals = vec![0.0; n];
    for a in assignments {
        if a.n_nodes() != n {
            return Err(Error::NodeCount {
                expected: n,
                found: a.n_nodes(),
            });
        }
        for (t, p) in totals.iter_mut().zip(a.probabilities()) {
            *t += p;
        }
    }
    let count = assignments.len() as f64;
    let mut ranked: Vec<RankedNode> = totals
        .iter()
        .enumerate()
        .map(|(i, t)| RankedNode {
            node: i + 1,
            score: t / count,
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.node.cmp(&b.node)));
    ranked.truncate(top_k);
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub fraction: f64,
    pub shared: Vec<usize>,
}

/// Fraction of nodes shared by two equally long rankings.
pub fn overlap_report(ranking_a: &[usize], ranking_b: &[usize]) -> Result<OverlapReport> {
    if ranking_a.len() != ranking_b.len() {
        return Err(Error::InvalidArgument(format!(
            "ranking lengths differ: {} vs {}",
            ranking_a.len(),
            ranking_b.len()
        )));
    }
    if ranking_a.is_empty() {
        return Err(Error::InvalidArgument("empty rankings".into()));
    }
    let b: BTreeSet<usize> = ranking_b.iter().copied().collect();
    let shared: Vec<usize> = ranking_a
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .filter(|x| b.contains(x))
        .collect();
    Ok(OverlapReport {
        fraction: shared.len() as f64 / ranking_a.len() as f64,
        shared,
    })
}

/// `rank,node_index,mean_probability`
pub fn ranking_csv(ranking: &[RankedNode]) -> String {
    let mut out = String::from("rank,node_index,mean_probability\n");
    for (r, n) in ranking.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", r + 1, n.node, n.score));
    }
    out
}

pub fn read_ranking_csv(path: &Path) -> Result<Vec<RankedNode>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "rank,node_index,mean_probability" => {}
        _ => {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: 1,
                detail: "expected header `rank,node_index,mean_probability`".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match fields.as_slice() {
            [_, node, score] => node.parse::<usize>().ok().zip(score.parse::<f64>().ok()),
            _ => None,
        };
        let (node, score) = parsed.ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            line: lineno + 1,
            detail: format!("malformed ranking row `{line}`"),
        })?;
        out.push(RankedNode { node, score });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_data::{build_graph, ConnectivityMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_graph(rng: &mut ChaCha8Rng, n: usize) -> BrainGraph {
        let mut m = Tensor::identity(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let r: f64 = rng.random_range(-0.2..0.9);
                m[(i, j)] = r;
                m[(j, i)] = r;
            }
        }
        build_graph(&ConnectivityMatrix::new("s", m, 0).unwrap(), 0.4).unwrap()
    }

    fn random_generator(n: usize, rng: &mut ChaCha8Rng) -> SubgraphGenerator {
        let mut g = SubgraphGenerator::init(n, 6, 4, rng);
        g.mlp2 = Dense::init(4, 2, rng);
        g
    }

    #[test]
    fn assignment_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = small_graph(&mut rng, 7);
        let gen = random_generator(7, &mut rng);
        let s = node_assignment(&g, &gen).unwrap();
        for i in 0..7 {
            let row = s.matrix().row(i);
            assert!((row[0] + row[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fresh_generator_is_undecided() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = small_graph(&mut rng, 5);
        let gen = SubgraphGenerator::init(5, 8, 4, &mut rng);
        let p = node_assignment(&g, &gen).unwrap().probabilities();
        assert!(p.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn symmetric_nodes_get_identical_rows() {
        // Nodes 0 and 1 are interchangeable: same features (after swapping
        // their own columns) and the same neighbourhood.
        let m = Tensor::from_rows(&[
            [1.0, 0.6, 0.5, 0.1],
            [0.6, 1.0, 0.5, 0.1],
            [0.5, 0.5, 1.0, 0.2],
            [0.1, 0.1, 0.2, 1.0],
        ]);
        let g = build_graph(&ConnectivityMatrix::new("s", m, 0).unwrap(), 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut gen = random_generator(4, &mut rng);
        // Make the first layer blind to the column order of nodes 0 and 1.
        for c in 0..gen.gcn1.weight.cols() {
            let w = gen.gcn1.weight[(0, c)];
            gen.gcn1.weight[(1, c)] = w;
        }
        let s = node_assignment(&g, &gen).unwrap();
        assert!(
            (s.matrix()[(0, 0)] - s.matrix()[(1, 0)]).abs() < 1e-15,
            "{:?}",
            s.matrix()
        );
    }

    #[test]
    fn assignment_matches_layer_by_layer_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = small_graph(&mut rng, 6);
        let mut gen = random_generator(6, &mut rng);
        gen.gcn1.bias = Tensor::from_fn(1, 6, |_, j| 0.05 * j as f64);
        let s = node_assignment(&g, &gen).unwrap();

        let n = 6;
        let deg: Vec<f64> = (0..n).map(|i| 1.0 + g.adjacency.row(i).iter().sum::<f64>()).collect();
        let gcn = |x: &Tensor, l: &GcnLayer| {
            let mut out = Tensor::zeros(n, l.weight.cols());
            for i in 0..n {
                for o in 0..l.weight.cols() {
                    let mut acc = l.bias[(0, o)];
                    for j in 0..n {
                        let a = g.adjacency[(i, j)] + if i == j { 1.0 } else { 0.0 };
                        if a == 0.0 {
                            continue;
                        }
                        let w = a / (deg[i] * deg[j]).sqrt();
                        for k in 0..x.cols() {
                            acc += w * x[(j, k)] * l.weight[(k, o)];
                        }
                    }
                    out[(i, o)] = acc;
                }
            }
            out
        };
        let dense = |x: &Tensor, d: &Dense| {
            Tensor::from_fn(x.rows(), d.weight.cols(), |i, o| {
                d.bias[(0, o)] + (0..x.cols()).map(|k| x[(i, k)] * d.weight[(k, o)]).sum::<f64>()
            })
        };
        let h = gcn(&g.node_features, &gen.gcn1).map(|v| v.max(0.0));
        let h = gcn(&h, &gen.gcn2);
        let h = dense(&h, &gen.mlp1).map(f64::tanh);
        let logits = dense(&h, &gen.mlp2);
        for i in 0..n {
            let (a, b) = (logits[(i, 0)], logits[(i, 1)]);
            let p = 1.0 / (1.0 + (b - a).exp());
            assert!((s.matrix()[(i, 0)] - p).abs() < 1e-12);
        }
    }

    #[test]
    fn masking_extremes_and_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = small_graph(&mut rng, 5);
        let ones = NodeAssignment::from_probabilities(&[1.0; 5]).unwrap();
        assert_eq!(apply_assignment(&g, &ones).unwrap().masked_features, g.node_features);
        let zeros = NodeAssignment::from_probabilities(&[0.0; 5]).unwrap();
        assert_eq!(
            apply_assignment(&g, &zeros).unwrap().masked_features,
            Tensor::zeros(5, 5)
        );
        let p: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        let view = apply_assignment(&g, &NodeAssignment::from_probabilities(&p).unwrap()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(view.masked_features[(i, j)], p[i] * g.node_features[(i, j)]);
            }
        }
        assert_eq!(view.adjacency, g.adjacency);
    }

    #[test]
    fn rank_single_subject() {
        let a = NodeAssignment::from_probabilities(&[0.9, 0.1, 0.5]).unwrap();
        let r = rank_nodes(&[a], 2).unwrap();
        assert_eq!(r.iter().map(|x| x.node).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(r.iter().map(|x| x.score).collect::<Vec<_>>(), vec![0.9, 0.5]);
    }

    #[test]
    fn rank_ties_fall_back_to_index_order() {
        let p = [0.2, 0.7, 0.4, 0.9];
        let q: Vec<f64> = p.iter().map(|x| 1.0 - x).collect();
        let r = rank_nodes(
            &[
                NodeAssignment::from_probabilities(&p).unwrap(),
                NodeAssignment::from_probabilities(&q).unwrap(),
            ],
            4,
        )
        .unwrap();
        assert_eq!(r.iter().map(|x| x.node).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert!(r.iter().all(|x| (x.score - 0.5).abs() < 1e-15));
    }

    #[test]
    fn rank_rejects_empty_input() {
        assert!(rank_nodes(&[], 3).is_err());
    }

    #[test]
    fn overlap_cases() {
        let a: Vec<usize> = (1..=20).collect();
        assert_eq!(overlap_report(&a, &a).unwrap().fraction, 1.0);
        let b: Vec<usize> = (21..=40).collect();
        assert_eq!(overlap_report(&a, &b).unwrap().fraction, 0.0);
        let c: Vec<usize> = (13..=32).collect();
        let r = overlap_report(&a, &c).unwrap();
        assert_eq!(r.fraction, 0.4);
        assert_eq!(r.shared, (13..=20).collect::<Vec<_>>());
        assert!(overlap_report(&a, &a[..5]).is_err());
    }
}
