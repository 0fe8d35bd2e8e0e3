//! Minimal N-dimensional array with reverse-mode automatic
//! differentiation.
//!
//! A [`Tensor`] is a cheaply clonable handle onto a graph node. Ops in
//! [`ops`] (and custom ops built with [`Tensor::from_op`]) record their
//! parents and a vector-Jacobian product; [`Tensor::backward`] walks
//! the graph once in reverse topological order and accumulates
//! gradients into the leaf parameters.
//!
//! Everything is `f64`, shapes are explicit (no broadcasting beyond
//! tensor-scalar), and graph construction is single-threaded per
//! graph. Values computed with gradient tracking off are bitwise
//! identical to tracked values: tracking only changes what is
//! recorded, never the arithmetic.

pub mod ops;

use std::cell::{Ref, RefCell};
use std::collections::{HashMap, HashSet};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("data length {len} does not match shape {shape:?}")]
    Length { len: usize, shape: Vec<usize> },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Context handed to a node's vector-Jacobian product.
pub struct BackwardCtx<'a> {
    /// Gradient of the loss with respect to this node's output.
    pub out_grad: &'a [f64],
    /// The node's forward output values.
    pub out_data: &'a [f64],
    /// The node's inputs, in recording order.
    pub parents: &'a [Tensor],
}

type VjpFn = Box<dyn Fn(&BackwardCtx<'_>) -> Vec<Vec<f64>>>;

struct Node {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    grad: RefCell<Option<Vec<f64>>>,
    requires_grad: bool,
    parents: Vec<Tensor>,
    vjp: Option<VjpFn>,
}

/// Handle onto one node of a compute graph.
#[derive(Clone)]
pub struct Tensor {
    node: Rc<Node>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.node.shape)
            .field("requires_grad", &self.node.requires_grad)
            .field("data", &self.node.data.borrow())
            .finish()
    }
}

impl Tensor {
    fn build(
        shape: Vec<usize>,
        data: Vec<f64>,
        requires_grad: bool,
        parents: Vec<Tensor>,
        vjp: Option<VjpFn>,
    ) -> Result<Self, TensorError> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(TensorError::Length {
                len: data.len(),
                shape,
            });
        }
        Ok(Self {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                parents,
                vjp,
            }),
        })
    }

    /// Constant (non-trainable) tensor.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self, TensorError> {
        Self::build(shape.to_vec(), data, false, Vec::new(), None)
    }

    /// Trainable leaf: participates in backward and keeps its gradient.
    pub fn param(shape: &[usize], data: Vec<f64>) -> Result<Self, TensorError> {
        Self::build(shape.to_vec(), data, true, Vec::new(), None)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::build(shape.to_vec(), vec![0.0; n], false, Vec::new(), None).unwrap()
    }

    pub fn scalar(v: f64) -> Self {
        Self::new(&[1], vec![v]).unwrap()
    }

    /// Records a new op node. If no parent tracks gradients the result
    /// is a plain value: parents and the VJP are dropped so untracked
    /// forward passes build no graph.
    pub fn from_op(
        shape: Vec<usize>,
        data: Vec<f64>,
        parents: Vec<Tensor>,
        vjp: VjpFn,
    ) -> Result<Self, TensorError> {
        if parents.iter().any(|p| p.requires_grad()) {
            Self::build(shape, data, true, parents, Some(vjp))
        } else {
            Self::build(shape, data, false, Vec::new(), None)
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.node.shape
    }

    pub fn len(&self) -> usize {
        self.node.data.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.node.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.node.data.borrow().clone()
    }

    /// The single value of a scalar tensor.
    pub fn item(&self) -> f64 {
        let d = self.node.data.borrow();
        assert_eq!(d.len(), 1, "item() on non-scalar tensor");
        d[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.node.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.node.parents.is_empty() && self.node.vjp.is_none()
    }

    /// Accumulated gradient of a leaf, if backward has reached it.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.node.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.node.grad.borrow_mut() = None;
    }

    /// In-place update of a leaf's values (optimizer use).
    pub fn update_data(&self, f: impl FnOnce(&mut [f64])) {
        f(&mut self.node.data.borrow_mut());
    }

    pub fn id(&self) -> u64 {
        self.node.id
    }

    fn accumulate_into_grad(&self, contribution: &[f64]) {
        let mut slot = self.node.grad.borrow_mut();
        match slot.as_mut() {
            Some(g) => {
                for (gi, ci) in g.iter_mut().zip(contribution) {
                    *gi += ci;
                }
            }
            None => *slot = Some(contribution.to_vec()),
        }
    }

    /// Reverse-mode sweep from a scalar loss. Each reachable node is
    /// visited exactly once; gradients of trainable leaves accumulate
    /// into their `grad` buffers (call [`Tensor::zero_grad`] between
    /// steps), intermediate gradients are transient.
    pub fn backward(&self) -> Result<(), TensorError> {
        if self.len() != 1 {
            return Err(TensorError::NonScalarLoss(self.node.shape.clone()));
        }

        // Post-order DFS: dependencies first, so the reversed order
        // processes every node before its parents.
        enum Frame {
            Enter(Tensor),
            Exit(Tensor),
        }
        let mut order: Vec<Tensor> = Vec::new();
        let mut visited: HashSet<u64> = HashSet::new();
        let mut stack = vec![Frame::Enter(self.clone())];
        while let Some(frame) = stack.pop() {
            match frame {
                Frame::Enter(t) => {
                    if !visited.insert(t.id()) {
                        continue;
                    }
                    stack.push(Frame::Exit(t.clone()));
                    for p in &t.node.parents {
                        if !visited.contains(&p.id()) {
                            stack.push(Frame::Enter(p.clone()));
                        }
                    }
                }
                Frame::Exit(t) => order.push(t),
            }
        }

        let mut flowing: HashMap<u64, Vec<f64>> = HashMap::new();
        flowing.insert(self.id(), vec![1.0]);

        for node in order.iter().rev() {
            let Some(grad) = flowing.remove(&node.id()) else {
                continue;
            };
            if let Some(vjp) = &node.node.vjp {
                let ctx = BackwardCtx {
                    out_grad: &grad,
                    out_data: &node.node.data.borrow(),
                    parents: &node.node.parents,
                };
                let contributions = vjp(&ctx);
                debug_assert_eq!(contributions.len(), node.node.parents.len());
                for (parent, contribution) in node.node.parents.iter().zip(contributions) {
                    if !parent.requires_grad() {
                        continue;
                    }
                    debug_assert_eq!(contribution.len(), parent.len());
                    match flowing.get_mut(&parent.id()) {
                        Some(acc) => {
                            for (a, c) in acc.iter_mut().zip(&contribution) {
                                *a += c;
                            }
                        }
                        None => {
                            flowing.insert(parent.id(), contribution);
                        }
                    }
                }
            } else if node.requires_grad() {
                node.accumulate_into_grad(&grad);
            }
        }
        Ok(())
    }
}
