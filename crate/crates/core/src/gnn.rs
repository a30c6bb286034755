//! Message-passing layers and the graph encoder.
//!
//! Layer structs are generic over the parameter handle: `Tensor` for stored
//! weights, [`Var`] once bound to a tape for a forward pass. `try_map`
//! converts between the two and walks parameters with dotted names.

use std::convert::Infallible;

use rand::{Rng, SeedableRng};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::Result;

pub(crate) fn join(prefix: &str, field: &str) -> String {
    if prefix.is_empty() {
        field.to_owned()
    } else {
        format!("{prefix}.{field}")
    }
}

/// Glorot-uniform weight matrix.
pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit))
}

/// Fully connected layer `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<P = Tensor> {
    pub weight: P,
    pub bias: P,
}

impl Dense {
    pub fn init<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        Self {
            weight: glorot(d_in, d_out, rng),
            bias: Tensor::zeros(1, d_out),
        }
    }

    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        Self {
            weight: Tensor::zeros(d_in, d_out),
            bias: Tensor::zeros(1, d_out),
        }
    }
}

impl<P> Dense<P> {
    pub fn try_map<Q, E>(
        &self,
        prefix: &str,
        f: &mut impl FnMut(&str, &P) -> Result<Q, E>,
    ) -> Result<Dense<Q>, E> {
        Ok(Dense {
            weight: f(&join(prefix, "weight"), &self.weight)?,
            bias: f(&join(prefix, "bias"), &self.bias)?,
        })
    }
}

impl Dense<Var> {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let xw = tape.matmul(x, self.weight)?;
        tape.add(xw, self.bias)
    }
}

/// Graph convolution over the symmetric-normalized adjacency with self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer<P = Tensor> {
    pub weight: P,
    pub bias: P,
}

impl GcnLayer {
    pub fn init<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        Self {
            weight: glorot(d_in, d_out, rng),
            bias: Tensor::zeros(1, d_out),
        }
    }
}

impl<P> GcnLayer<P> {
    pub fn try_map<Q, E>(
        &self,
        prefix: &str,
        f: &mut impl FnMut(&str, &P) -> Result<Q, E>,
    ) -> Result<GcnLayer<Q>, E> {
        Ok(GcnLayer {
            weight: f(&join(prefix, "weight"), &self.weight)?,
            bias: f(&join(prefix, "bias"), &self.bias)?,
        })
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}`. Every degree is at least one thanks to the
/// self-loop, so isolated nodes keep their own features.
pub fn gcn_normalized_adjacency(a: &Tensor) -> Tensor {
    let n = a.rows();
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| 1.0 / (1.0 + a.row(i).iter().sum::<f64>()).sqrt())
        .collect();
    Tensor::from_fn(n, n, |i, j| {
        let a_tilde = a[(i, j)] + if i == j { 1.0 } else { 0.0 };
        inv_sqrt_deg[i] * a_tilde * inv_sqrt_deg[j]
    })
}

/// `Â X W + b` where `a_norm` is a tape constant holding the output of
/// [`gcn_normalized_adjacency`].
pub fn gcn_forward(tape: &mut Tape, layer: &GcnLayer<Var>, a_norm: Var, x: Var) -> Result<Var> {
    let ax = tape.matmul(a_norm, x)?;
    let axw = tape.matmul(ax, layer.weight)?;
    tape.add(axw, layer.bias)
}

/// GIN layer: `hᵢ = MLP((1 + ε) xᵢ + Σ_{j ∈ N(i)} xⱼ)` with a two-layer ReLU
/// MLP and learnable ε.
#[derive(Debug, Clone, PartialEq)]
pub struct GinLayer<P = Tensor> {
    pub epsilon: P,
    pub lin1: Dense<P>,
    pub lin2: Dense<P>,
}

impl GinLayer {
    pub fn init<R: Rng + ?Sized>(d_in: usize, hidden: usize, d_out: usize, rng: &mut R) -> Self {
        Self {
            epsilon: Tensor::scalar(0.0),
            lin1: Dense::init(d_in, hidden, rng),
            lin2: Dense::init(hidden, d_out, rng),
        }
    }
}

impl<P> GinLayer<P> {
    pub fn try_map<Q, E>(
        &self,
        prefix: &str,
        f: &mut impl FnMut(&str, &P) -> Result<Q, E>,
    ) -> Result<GinLayer<Q>, E> {
        Ok(GinLayer {
            epsilon: f(&join(prefix, "epsilon"), &self.epsilon)?,
            lin1: self.lin1.try_map(&join(prefix, "lin1"), f)?,
            lin2: self.lin2.try_map(&join(prefix, "lin2"), f)?,
        })
    }
}

/// `adjacency` is the raw binary adjacency as a tape constant.
pub fn gin_forward(tape: &mut Tape, layer: &GinLayer<Var>, adjacency: Var, x: Var) -> Result<Var> {
    let neighbours = tape.matmul(adjacency, x)?;
    let one = tape.constant(Tensor::scalar(1.0));
    let self_weight = tape.add(layer.epsilon, one)?;
    let own = tape.hadamard(x, self_weight)?;
    let agg = tape.add(neighbours, own)?;
    let h = layer.lin1.forward(tape, agg)?;
    let h = tape.relu(h);
    layer.lin2.forward(tape, h)
}

/// Bilinear second-order pooling `HᵀH`, flattened row-major into a
/// `1 x d²` row, then dropout (train mode only) and L2 normalization.
pub fn sopool<R: Rng + ?Sized>(
    tape: &mut Tape,
    h: Var,
    dropout: f64,
    train: bool,
    rng: &mut R,
) -> Result<Var> {
    let d = tape.value(h).cols();
    let ht = tape.transpose(h);
    let gram = tape.matmul(ht, h)?;
    let flat = tape.reshape(gram, 1, d * d)?;
    let dropped = tape.dropout(flat, dropout, train, rng)?;
    Ok(tape.l2_normalize_rows(dropped))
}

/// Two GIN layers followed by second-order pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEncoder<P = Tensor> {
    pub gin1: GinLayer<P>,
    pub gin2: GinLayer<P>,
}

impl GraphEncoder {
    pub fn init<R: Rng + ?Sized>(d_in: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            gin1: GinLayer::init(d_in, hidden, hidden, rng),
            gin2: GinLayer::init(hidden, hidden, hidden, rng),
        }
    }

    /// Width `d_H` of the node representation; embeddings have `d_H²` entries.
    pub fn hidden(&self) -> usize {
        self.gin2.lin2.weight.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.gin1.lin1.weight.rows()
    }

    /// Eval-mode embedding of one graph, outside any training tape.
    pub fn embed(&self, adjacency: &Tensor, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let enc = self.bind_constant(&mut tape);
        let a = tape.constant(adjacency.clone());
        let xv = tape.constant(x.clone());
        // Dropout is off, so the generator is never drawn from.
        let mut unused = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let z = enc.forward(&mut tape, a, xv, 0.0, false, &mut unused)?;
        Ok(tape.value(z).clone())
    }

    fn bind_constant(&self, tape: &mut Tape) -> GraphEncoder<Var> {
        let bound: Result<_, Infallible> =
            self.try_map("", &mut |_, t| Ok(tape.constant(t.clone())));
        bound.unwrap_or_else(|e| match e {})
    }
}

impl<P> GraphEncoder<P> {
    pub fn try_map<Q, E>(
        &self,
        prefix: &str,
        f: &mut impl FnMut(&str, &P) -> Result<Q, E>,
    ) -> Result<GraphEncoder<Q>, E> {
        Ok(GraphEncoder {
            gin1: self.gin1.try_map(&join(prefix, "gin1"), f)?,
            gin2: self.gin2.try_map(&join(prefix, "gin2"), f)?,
        })
    }
}

impl GraphEncoder<Var> {
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        adjacency: Var,
        x: Var,
        dropout: f64,
        train: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let h1 = gin_forward(tape, &self.gin1, adjacency, x)?;
        let h1 = tape.relu(h1);
        let h = gin_forward(tape, &self.gin2, adjacency, h1)?;
        sopool(tape, h, dropout, train, rng)
    }
}

/// Linear classifier head producing two logits per embedding row.
pub fn classifier_forward(tape: &mut Tape, psi: &Dense<Var>, g: Var) -> Result<Var> {
    psi.forward(tape, g)
}
