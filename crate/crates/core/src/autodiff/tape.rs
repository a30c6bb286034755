use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Hadamard(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    RowSoftmax(Var),
    Log(Var),
    Exp(Var),
    Sum(Var),
    Mean(Var),
    Transpose(Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Reshape(Var),
    Column(Var, usize),
    /// Mask already carries the inverted-dropout scale.
    Dropout(Var, Tensor),
    L2NormalizeRows(Var),
    SoftmaxCrossEntropy(Var, Vec<usize>),
    /// Scalar computed outside the tape, with its gradient w.r.t. each input.
    External(Vec<(Var, Tensor)>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Shape relation of the right operand of a broadcasting binary op.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    Row,
    Col,
    Scalar,
}

fn broadcast_kind(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Broadcast> {
    let kind = if a.shape() == b.shape() {
        Broadcast::Same
    } else if b.rows() == 1 && b.cols() == 1 {
        Broadcast::Scalar
    } else if b.rows() == 1 && b.cols() == a.cols() {
        Broadcast::Row
    } else if b.cols() == 1 && b.rows() == a.rows() {
        Broadcast::Col
    } else {
        return Err(Error::shape(
            op,
            format!(
                "cannot broadcast {}x{} against {}x{}",
                b.rows(),
                b.cols(),
                a.rows(),
                a.cols()
            ),
        ));
    };
    Ok(kind)
}

fn broadcast_value(b: &Tensor, kind: Broadcast, i: usize, j: usize) -> f64 {
    match kind {
        Broadcast::Same => b[(i, j)],
        Broadcast::Row => b[(0, j)],
        Broadcast::Col => b[(i, 0)],
        Broadcast::Scalar => b[(0, 0)],
    }
}

/// Sums a full-shape gradient down to the broadcast operand's shape.
fn reduce_broadcast(g: &Tensor, kind: Broadcast) -> Tensor {
    match kind {
        Broadcast::Same => g.clone(),
        Broadcast::Scalar => Tensor::scalar(g.sum()),
        Broadcast::Row => {
            let mut out = Tensor::zeros(1, g.cols());
            for i in 0..g.rows() {
                for (o, &x) in out.data_mut().iter_mut().zip(g.row(i)) {
                    *o += x;
                }
            }
            out
        }
        Broadcast::Col => Tensor::from_fn(g.rows(), 1, |i, _| g.row(i).iter().sum()),
    }
}

/// Record of a forward computation, replayed in reverse for gradients.
///
/// A tape is built fresh for every forward pass. Leaves created with
/// [`Tape::param`] receive gradients; those created with [`Tape::constant`]
/// do not, and neither does anything computed only from constants.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros of `shape` when nothing flowed into it.
    pub fn get_or_zeros(&self, v: Var, rows: usize, cols: usize) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(rows, cols))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// `a + b`, where `b` may be a row vector, column vector or scalar.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let kind = broadcast_kind("add", av, bv)?;
        let value = Tensor::from_fn(av.rows(), av.cols(), |i, j| {
            av[(i, j)] + broadcast_value(bv, kind, i, j)
        });
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    /// Element-wise product with the same broadcasting rules as [`Tape::add`].
    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let kind = broadcast_kind("hadamard", av, bv)?;
        let value = Tensor::from_fn(av.rows(), av.cols(), |i, j| {
            av[(i, j)] * broadcast_value(bv, kind, i, j)
        });
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Hadamard(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).scale(s);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Scale(a, s), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Tanh(a), rg)
    }

    pub fn row_softmax(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let mut value = av.clone();
        for i in 0..value.rows() {
            let row = value.row_mut(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                total += *x;
            }
            for x in row.iter_mut() {
                *x /= total;
            }
        }
        let rg = self.any_grad(&[a]);
        self.push(value, Op::RowSoftmax(a), rg)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::ln);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Log(a), rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::exp);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Exp(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let value = Tensor::scalar(av.sum() / av.len() as f64);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Mean(a), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Transpose(a), rg)
    }

    /// Stacks tensors with equal column counts vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts
            .first()
            .map(|&p| self.value(p).cols())
            .ok_or_else(|| Error::shape("concat_rows", "no inputs"))?;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.cols() != cols {
                return Err(Error::shape(
                    "concat_rows",
                    format!("column count {} vs {cols}", pv.cols()),
                ));
            }
            rows += pv.rows();
            data.extend_from_slice(pv.data());
        }
        let value = Tensor::from_vec(rows, cols, data)?;
        let rg = self.any_grad(parts);
        Ok(self.push(value, Op::ConcatRows(parts.to_vec()), rg))
    }

    /// Joins tensors with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|&p| self.value(p).rows())
            .ok_or_else(|| Error::shape("concat_cols", "no inputs"))?;
        let mut cols = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.rows() != rows {
                return Err(Error::shape(
                    "concat_cols",
                    format!("row count {} vs {rows}", pv.rows()),
                ));
            }
            cols += pv.cols();
        }
        let mut value = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let pv = &self.nodes[p.0].value;
            for i in 0..rows {
                value.row_mut(i)[offset..offset + pv.cols()].copy_from_slice(pv.row(i));
            }
            offset += pv.cols();
        }
        let rg = self.any_grad(parts);
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), rg))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let value = self.value(a).clone().reshape(rows, cols)?;
        let rg = self.any_grad(&[a]);
        Ok(self.push(value, Op::Reshape(a), rg))
    }

    /// Column `j` as an `n x 1` tensor.
    pub fn column(&mut self, a: Var, j: usize) -> Result<Var> {
        let av = self.value(a);
        if j >= av.cols() {
            return Err(Error::shape(
                "column",
                format!("column {j} of {}x{}", av.rows(), av.cols()),
            ));
        }
        let value = Tensor::from_fn(av.rows(), 1, |i, _| av[(i, j)]);
        let rg = self.any_grad(&[a]);
        Ok(self.push(value, Op::Column(a, j), rg))
    }

    /// Inverted dropout: identity when `train` is false, otherwise zeroes each
    /// entry with probability `rate` and scales survivors by `1 / (1 - rate)`.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        rate: f64,
        train: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        if !train || rate == 0.0 {
            return Ok(a);
        }
        let av = self.value(a);
        let keep = 1.0 - rate;
        let mask = Tensor::from_fn(av.rows(), av.cols(), |_, _| {
            if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        let value = av.zip_map(&mask, |x, m| x * m)?;
        let rg = self.any_grad(&[a]);
        Ok(self.push(value, Op::Dropout(a, mask), rg))
    }

    pub fn l2_normalize_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let mut value = av.clone();
        for i in 0..value.rows() {
            let row = value.row_mut(i);
            let norm = row_norm(row);
            for x in row.iter_mut() {
                *x /= norm;
            }
        }
        let rg = self.any_grad(&[a]);
        self.push(value, Op::L2NormalizeRows(a), rg)
    }

    /// Mean negative log-likelihood of `labels` under `row_softmax(logits)`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if labels.len() != lv.rows() || labels.iter().any(|&l| l >= lv.cols()) {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("{} labels for {}x{} logits", labels.len(), lv.rows(), lv.cols()),
            ));
        }
        let mut total = 0.0;
        for (i, &label) in labels.iter().enumerate() {
            let row = lv.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            total += lse - row[label];
        }
        let value = Tensor::scalar(total / labels.len() as f64);
        let rg = self.any_grad(&[logits]);
        Ok(self.push(
            value,
            Op::SoftmaxCrossEntropy(logits, labels.to_vec()),
            rg,
        ))
    }

    /// Injects a scalar computed off-tape together with its gradients.
    pub fn external(&mut self, value: f64, inputs: Vec<(Var, Tensor)>) -> Result<Var> {
        for (v, g) in &inputs {
            if self.value(*v).shape() != g.shape() {
                return Err(Error::shape(
                    "external",
                    format!(
                        "gradient {:?} for input of shape {:?}",
                        g.shape(),
                        self.value(*v).shape()
                    ),
                ));
            }
        }
        let vars: Vec<Var> = inputs.iter().map(|(v, _)| *v).collect();
        let rg = self.any_grad(&vars);
        Ok(self.push(Tensor::scalar(value), Op::External(inputs), rg))
    }

    /// Reverse pass from a scalar output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.shape() != [1, 1] {
            return Err(Error::shape(
                "backward",
                format!("output must be scalar, got {:?}", out.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.requires_grad(*a) {
                    self.accumulate(grads, *a, g.matmul_t(self.value(*b))?);
                }
                if self.requires_grad(*b) {
                    self.accumulate(grads, *b, self.value(*a).t_matmul(g)?);
                }
            }
            Op::Add(a, b) => {
                let kind = broadcast_kind("add", self.value(*a), self.value(*b))?;
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, reduce_broadcast(g, kind));
            }
            Op::Hadamard(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let kind = broadcast_kind("hadamard", av, bv)?;
                if self.requires_grad(*a) {
                    let ga = Tensor::from_fn(g.rows(), g.cols(), |i, j| {
                        g[(i, j)] * broadcast_value(bv, kind, i, j)
                    });
                    self.accumulate(grads, *a, ga);
                }
                if self.requires_grad(*b) {
                    let full = g.zip_map(av, |x, y| x * y)?;
                    self.accumulate(grads, *b, reduce_broadcast(&full, kind));
                }
            }
            Op::Scale(a, s) => self.accumulate(grads, *a, g.scale(*s)),
            Op::Relu(a) => {
                let ga = g.zip_map(self.value(*a), |gi, x| if x > 0.0 { gi } else { 0.0 })?;
                self.accumulate(grads, *a, ga);
            }
            Op::Tanh(a) => {
                let ga = g.zip_map(y, |gi, t| gi * (1.0 - t * t))?;
                self.accumulate(grads, *a, ga);
            }
            Op::RowSoftmax(a) => {
                let mut ga = Tensor::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let dot: f64 = g.row(i).iter().zip(y.row(i)).map(|(a, b)| a * b).sum();
                    for j in 0..y.cols() {
                        ga[(i, j)] = y[(i, j)] * (g[(i, j)] - dot);
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::Log(a) => {
                let ga = g.zip_map(self.value(*a), |gi, x| gi / x)?;
                self.accumulate(grads, *a, ga);
            }
            Op::Exp(a) => {
                let ga = g.zip_map(y, |gi, e| gi * e)?;
                self.accumulate(grads, *a, ga);
            }
            Op::Sum(a) => {
                let av = self.value(*a);
                self.accumulate(grads, *a, Tensor::filled(av.rows(), av.cols(), g.item()));
            }
            Op::Mean(a) => {
                let av = self.value(*a);
                let v = g.item() / av.len() as f64;
                self.accumulate(grads, *a, Tensor::filled(av.rows(), av.cols(), v));
            }
            Op::Transpose(a) => self.accumulate(grads, *a, g.transpose()),
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let rows = self.value(p).rows();
                    let slice = Tensor::from_fn(rows, g.cols(), |i, j| g[(offset + i, j)]);
                    self.accumulate(grads, p, slice);
                    offset += rows;
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let cols = self.value(p).cols();
                    let slice = Tensor::from_fn(g.rows(), cols, |i, j| g[(i, offset + j)]);
                    self.accumulate(grads, p, slice);
                    offset += cols;
                }
            }
            Op::Reshape(a) => {
                let av = self.value(*a);
                self.accumulate(grads, *a, g.clone().reshape(av.rows(), av.cols())?);
            }
            Op::Column(a, j) => {
                let av = self.value(*a);
                let ga = Tensor::from_fn(av.rows(), av.cols(), |i, c| {
                    if c == *j {
                        g[(i, 0)]
                    } else {
                        0.0
                    }
                });
                self.accumulate(grads, *a, ga);
            }
            Op::Dropout(a, mask) => self.accumulate(grads, *a, g.zip_map(mask, |gi, m| gi * m)?),
            Op::L2NormalizeRows(a) => {
                let av = self.value(*a);
                let mut ga = Tensor::zeros(av.rows(), av.cols());
                for i in 0..av.rows() {
                    let norm = row_norm(av.row(i));
                    let dot: f64 = g.row(i).iter().zip(y.row(i)).map(|(a, b)| a * b).sum();
                    for j in 0..av.cols() {
                        ga[(i, j)] = (g[(i, j)] - y[(i, j)] * dot) / norm;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::SoftmaxCrossEntropy(logits, labels) => {
                let lv = self.value(*logits);
                let scale = g.item() / labels.len() as f64;
                let mut ga = Tensor::zeros(lv.rows(), lv.cols());
                for (i, &label) in labels.iter().enumerate() {
                    let row = lv.row(i);
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let total: f64 = row.iter().map(|x| (x - max).exp()).sum();
                    for j in 0..lv.cols() {
                        let p = (row[j] - max).exp() / total;
                        let target = if j == label { 1.0 } else { 0.0 };
                        ga[(i, j)] = scale * (p - target);
                    }
                }
                self.accumulate(grads, *logits, ga);
            }
            Op::External(inputs) => {
                for (v, local) in inputs {
                    self.accumulate(grads, *v, local.scale(g.item()));
                }
            }
        }
        Ok(())
    }
}

const NORM_FLOOR: f64 = 1e-12;

fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|x| x * x).sum::<f64>().sqrt().max(NORM_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_of_equal_row_is_uniform() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::filled(2, 4, 3.7));
        let y = t.row_softmax(x);
        assert!(t.value(y).data().iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn relu_backward_gates() {
        let mut t = Tape::new();
        let x = t.param(Tensor::from_rows(&[[2.0, -1.5]]));
        let y = t.relu(x);
        let s = t.sum(y);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0, 0.0]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::new();
        let c = t.constant(Tensor::ones(2, 2));
        let p = t.param(Tensor::ones(2, 2));
        let y = t.matmul(c, p).unwrap();
        let s = t.sum(y);
        let g = t.backward(s).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(p).unwrap().data(), &[2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn add_rejects_incompatible_broadcast() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(3, 4));
        let b = t.constant(Tensor::zeros(2, 4));
        assert_eq!(t.add(a, b).unwrap_err().code(), "E_SHAPE");
    }

    #[test]
    fn dropout_eval_is_identity() {
        let mut t = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = t.param(Tensor::from_fn(3, 3, |i, j| (i + j) as f64));
        let y = t.dropout(x, 0.5, false, &mut rng).unwrap();
        assert_eq!(t.value(y), t.value(x));
    }

    #[test]
    fn dropout_train_preserves_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 10_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let mut t = Tape::new();
            let x = t.constant(Tensor::filled(1, 4, 2.0));
            let y = t.dropout(x, 0.5, true, &mut rng).unwrap();
            acc += t.value(y).sum() / 4.0;
        }
        let mean = acc / trials as f64;
        assert!((mean - 2.0).abs() / 2.0 < 0.02, "mean {mean}");
    }

    #[test]
    fn dropout_masks_follow_seed() {
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut t = Tape::new();
            let x = t.constant(Tensor::ones(4, 4));
            let y = t.dropout(x, 0.5, true, &mut rng).unwrap();
            t.value(y).clone()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn cross_entropy_of_zero_logits_is_ln2() {
        let mut t = Tape::new();
        let z = t.param(Tensor::zeros(3, 2));
        let ce = t.softmax_cross_entropy(z, &[0, 1, 1]).unwrap();
        assert!((t.value(ce).item() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn backward_requires_scalar_output() {
        let mut t = Tape::new();
        let x = t.param(Tensor::zeros(2, 2));
        assert_eq!(t.backward(x).unwrap_err().code(), "E_SHAPE");
    }
}
