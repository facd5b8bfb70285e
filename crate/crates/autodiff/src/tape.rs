//! Define-by-run tape.
//!
//! Every operator appends a node holding its forward value plus whatever it
//! needs for the backward pass. [`Tape::backward`] walks the nodes in reverse
//! insertion order, which is a valid topological order by construction.

use crate::ops::conv::ConvGeom;
use crate::ops::recurrent::GruCache;
use crate::params::{ParamId, ParamStore};
use crate::{Real, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

pub(crate) enum Op<T> {
    Leaf,
    Conv2d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    MaxPool { x: Var, argmax: Vec<usize> },
    BatchNorm { x: Var, gamma: Option<Var>, beta: Option<Var>, xhat: Vec<T>, inv_std: Vec<T>, training: bool },
    Relu { x: Var },
    Dropout { x: Var, mask: Vec<T> },
    Linear { x: Var, w: Var, b: Option<Var> },
    Embedding { table: Var, ids: Vec<usize> },
    ConcatChannels { a: Var, b: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Sum { x: Var },
    GlobalMaxPool { x: Var, argmax: Vec<usize> },
    Film { x: Var, gamma: Var, beta: Var },
    Narrow { x: Var, start: usize, len: usize },
    MeanOverFreq { x: Var },
    Gru { x: Var, w_ih: Var, w_hh: Var, b_ih: Var, b_hh: Var, cache: Box<GruCache<T>> },
    SoftmaxCrossEntropy { logits: Var, probs: Vec<T>, targets: Vec<usize> },
}

pub(crate) struct Node<T> {
    pub(crate) value: Tensor<T>,
    pub(crate) op: Op<T>,
    pub(crate) requires_grad: bool,
    pub(crate) param: Option<ParamId>,
}

/// Records a forward computation for reverse-mode differentiation.
pub struct Tape<T> {
    pub(crate) nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant input; no gradient is computed for it.
    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Differentiable leaf that is not tied to a parameter store.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Copies a stored parameter onto the tape.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        let v = self.push(store.get(id).value.clone(), Op::Leaf, true);
        self.nodes[v.0].param = Some(id);
        v
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub(crate) fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub(crate) fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad, param: None });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.requires_grad(*v))
    }

    /// Backpropagates from a scalar node.
    pub fn backward(&self, root: Var) -> Gradients<T> {
        assert_eq!(self.nodes[root.0].value.numel(), 1, "backward needs a scalar root");
        let mut acc = Accumulator { nodes: &self.nodes, slots: (0..self.nodes.len()).map(|_| None).collect() };
        acc.slots[root.0] = Some(vec![T::one()]);
        let mut kept: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        for i in (0..=root.0).rev() {
            let Some(g) = acc.slots[i].take() else { continue };
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                kept[i] = Some(g);
                continue;
            }
            crate::ops::backward(self, &node.op, i, &g, &mut acc);
        }
        Gradients { slots: kept }
    }
}

/// Lazily allocated gradient buffers used during the backward sweep.
pub(crate) struct Accumulator<'t, T> {
    nodes: &'t [Node<T>],
    slots: Vec<Option<Vec<T>>>,
}

impl<T: Real> Accumulator<'_, T> {
    /// Gradient buffer for `v`, or `None` when `v` does not need one.
    pub(crate) fn get(&mut self, v: Var) -> Option<&mut [T]> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        let n = node.value.numel();
        Some(self.slots[v.0].get_or_insert_with(|| vec![T::zero(); n]).as_mut_slice())
    }
}

/// Gradients of the leaves reached by a backward pass.
pub struct Gradients<T> {
    slots: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.slots.get(v.0).and_then(|s| s.as_deref())
    }

    /// Adds every parameter leaf's gradient into the store's accumulators.
    pub fn accumulate_into(&self, tape: &Tape<T>, store: &mut ParamStore<T>) {
        for (i, node) in tape.nodes.iter().enumerate() {
            if let (Some(id), Some(g)) = (node.param, self.slots[i].as_ref()) {
                let p = store.get_mut(id);
                for (acc, d) in p.grad.data_mut().iter_mut().zip(g) {
                    *acc += *d;
                }
            }
        }
    }
}
