//! Dense `f64` tensors with reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every operation; [`Tape::backward`] walks the
//! recording once in reverse and accumulates gradients into each
//! `requires_grad` tensor. Tensors are plain values (shape + row-major
//! data); a [`Var`] is a handle into the tape that owns them.
//!
//! One tape per training thread; tensors read out of a tape are
//! immutable values and safe to move across threads.

mod grad_check;
mod ops;

pub use grad_check::{grad_check, grad_check_differentiable, KinkAwareCheck};
pub use ops::LstmCellVars;

use crate::error::{Error, Result};

/// Dense n-dimensional array of 64-bit reals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidShape {
                op: "tensor",
                shape,
                reason: "zero-sized dimension".into(),
            });
        }
        if numel != data.len() {
            return Err(Error::InvalidShape {
                op: "tensor",
                shape,
                reason: format!("shape product != data length {}", data.len()),
            });
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let n = data.len();
        Tensor::new(vec![n], data).expect("vector shape always valid for non-empty data")
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::new(vec![1], vec![v]).expect("scalar shape is valid")
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor::new(shape, vec![0.0; numel]).expect("zeros shape is valid")
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Scalar value; panics if the tensor is not 1-element.
    pub fn item(&self) -> f64 {
        assert!(self.is_scalar(), "item() on non-scalar tensor");
        self.data[0]
    }
}

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// One recorded operation: the produced tensor plus the rule for
/// pushing its gradient back into the inputs.
pub(crate) struct Node {
    pub tensor: Tensor,
    pub op: Op,
}

/// Backward rules. Pool ops carry the argmax positions chosen at
/// forward time (first occurrence on ties) so backward is deterministic.
pub(crate) enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Matmul {
        a: Var,
        b: Var,
        m: usize,
        k: usize,
        n: usize,
    },
    Conv1d {
        x: Var,
        w: Var,
        b: Var,
    },
    MaxPool1d {
        x: Var,
        argmax: Vec<usize>,
    },
    RoiPool1d {
        x: Var,
        argmax: Vec<usize>,
    },
    Softmax(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Concat(Vec<Var>),
    Slice {
        x: Var,
        start: usize,
    },
    Sum(Var),
    Mean(Var),
    Reshape(Var),
    CrossEntropyLogits {
        z: Var,
        target: usize,
    },
    BceWithLogits {
        x: Var,
        y: Var,
    },
}

/// Recording tape for reverse-mode differentiation.
///
/// Operations append nodes in execution order; [`Tape::backward`]
/// traverses them exactly once in reverse. Single-threaded by design.
#[derive(Default)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every recorded node.
    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    /// Records a tensor as a leaf (no backward rule).
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        self.push(tensor, Op::Leaf)
    }

    /// Leaf that participates in backprop.
    pub fn param(&mut self, tensor: Tensor) -> Var {
        self.leaf(tensor.with_grad())
    }

    /// Leaf that does not accumulate a gradient.
    pub fn constant(&mut self, tensor: Tensor) -> Var {
        self.leaf(tensor)
    }

    pub(crate) fn push(&mut self, tensor: Tensor, op: Op) -> Var {
        self.nodes.push(Node { tensor, op });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn derived(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, inputs: &[Var]) -> Var {
        let mut t = Tensor::new(shape, data).expect("ops construct consistent shapes");
        t.requires_grad = inputs.iter().any(|v| self.nodes[v.0].tensor.requires_grad);
        self.push(t, op)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].tensor
    }

    pub fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].tensor.data()
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].tensor.shape()
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].tensor.grad.as_deref()
    }

    /// Reverse pass from a scalar loss. Every `requires_grad` tensor
    /// reachable from `loss` gets its `grad` populated; fan-out
    /// contributions sum.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.nodes[loss.0].tensor.is_scalar() {
            return Err(Error::NonScalarLoss {
                shape: self.nodes[loss.0].tensor.shape().to_vec(),
            });
        }
        for node in &mut self.nodes {
            node.tensor.grad = None;
        }
        self.nodes[loss.0].tensor.grad = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].tensor.requires_grad {
                continue;
            }
            let g = match &self.nodes[i].tensor.grad {
                Some(g) => g.clone(),
                None => continue, // not reachable from the loss
            };
            let contribs = self.backward_node(i, &g);
            for (target, delta) in contribs {
                self.accumulate(target, delta);
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, delta: Vec<f64>) {
        let t = &mut self.nodes[v.0].tensor;
        if !t.requires_grad {
            return;
        }
        match &mut t.grad {
            Some(g) => {
                for (gi, di) in g.iter_mut().zip(delta.iter()) {
                    *gi += di;
                }
            }
            None => {
                debug_assert_eq!(delta.len(), t.numel());
                t.grad = Some(delta);
            }
        }
    }
}
