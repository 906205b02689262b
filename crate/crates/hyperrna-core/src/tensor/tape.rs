//! The recording tape: node storage, gradient seeding and the reverse sweep.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use super::{Tensor, TensorError};

/// Backward rule of one node: maps the node's output gradient to gradients
/// for each parent, in parent order. Values needed for the rule are captured
/// when the op is recorded.
pub(super) type BackFn = dyn Fn(&Tensor) -> Vec<Tensor>;

pub(super) struct Node {
    pub value: Tensor,
    pub parents: Vec<usize>,
    /// True when a gradient-requiring leaf is reachable below this node.
    pub needs_grad: bool,
    pub backward: Option<Box<BackFn>>,
}

/// Copyable handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(super) usize);

/// A single-threaded Wengert tape. One tape records one forward pass;
/// training builds a fresh tape per step, which keeps lifetimes trivial and
/// makes every backward walk a plain reverse iteration over the recording.
#[derive(Default)]
pub struct Tape {
    pub(super) nodes: RefCell<Vec<Node>>,
    grads: RefCell<Vec<Option<Tensor>>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(super) fn push(&self, node: Node) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var(nodes.len() - 1)
    }

    /// Records a leaf that wants a gradient (a trainable parameter).
    pub fn param(&self, value: Tensor) -> Var {
        self.push(Node {
            value,
            parents: Vec::new(),
            needs_grad: true,
            backward: None,
        })
    }

    /// Records a leaf that never receives a gradient (inputs, masks,
    /// propagation matrices and other constants of the forward pass).
    pub fn constant(&self, value: Tensor) -> Var {
        self.push(Node {
            value,
            parents: Vec::new(),
            needs_grad: false,
            backward: None,
        })
    }

    /// Clone of the forward value at `v`.
    pub fn value(&self, v: Var) -> Tensor {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn shape_of(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    pub(super) fn needs_grad(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].needs_grad
    }

    /// Runs the reverse sweep from a scalar loss. Gradients accumulate by
    /// summation across fan-out; the walk order is the fixed reverse of the
    /// recording order, so identical recordings produce bit-identical
    /// gradients. Results are kept on the tape until the next `backward`.
    pub fn backward(&self, loss: Var) -> Result<(), TensorError> {
        let nodes = self.nodes.borrow();
        let loss_node = &nodes[loss.0];
        if !loss_node.value.is_scalar() {
            return Err(TensorError::NotScalar {
                shape: loss_node.value.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[loss.0] = Some(Tensor::filled(loss_node.value.shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            if node.backward.is_none() || !node.needs_grad {
                continue;
            }
            let Some(gout) = grads[i].clone() else {
                continue; // not on any path to the loss
            };
            let rule = node.backward.as_ref().expect("checked above");
            let parent_grads = rule(&gout);
            debug_assert_eq!(parent_grads.len(), node.parents.len());
            for (&p, pg) in node.parents.iter().zip(parent_grads) {
                if !nodes[p].needs_grad {
                    continue;
                }
                debug_assert!(p < i, "tape order violated");
                match &mut grads[p] {
                    Some(acc) => acc.add_assign(&pg)?,
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        *self.grads.borrow_mut() = grads;
        Ok(())
    }

    /// Gradient accumulated at `v` by the last `backward`, if any reached it.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        self.grads.borrow().get(v.0).and_then(|g| g.clone())
    }

    /// Gradient at `v`, or zeros of its shape when the loss did not touch it.
    /// This is what the optimizer consumes: a parameter outside the active
    /// subgraph simply does not move.
    pub fn grad_or_zeros(&self, v: Var) -> Tensor {
        self.grad(v)
            .unwrap_or_else(|| Tensor::zeros(&self.shape_of(v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let tape = Tape::new();
        let x = tape.param(Tensor::zeros(&[3]));
        let err = tape.backward(x).unwrap_err();
        assert_eq!(
            err,
            TensorError::NotScalar {
                shape: alloc::vec![3]
            }
        );
    }

    #[test]
    fn fan_out_accumulates() {
        // y = sum(x + x): dy/dx = 2 everywhere.
        let tape = Tape::new();
        let x = tape.param(Tensor::from_vec(&[3], alloc::vec![1.0, -2.0, 0.5]).unwrap());
        let doubled = tape.add(x, x).unwrap();
        let y = tape.sum(doubled).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let tape = Tape::new();
        let x = tape.param(Tensor::scalar(3.0));
        let c = tape.constant(Tensor::scalar(4.0));
        let y = tape.multiply(x, c).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(x).unwrap().item().unwrap(), 4.0);
        assert!(tape.grad(c).is_none());
        assert_eq!(tape.grad_or_zeros(c).data(), &[0.0]);
    }

    #[test]
    fn untouched_parameter_gets_zeros_fallback() {
        let tape = Tape::new();
        let x = tape.param(Tensor::scalar(1.0));
        let unused = tape.param(Tensor::zeros(&[2, 2]));
        let y = tape.multiply(x, x).unwrap();
        tape.backward(y).unwrap();
        assert!(tape.grad(unused).is_none());
        assert_eq!(tape.grad_or_zeros(unused).shape(), &[2, 2]);
    }

    #[test]
    fn gradients_are_bit_identical_across_reruns() {
        let run = || {
            let tape = Tape::new();
            let x = tape
                .param(Tensor::from_vec(&[2, 2], alloc::vec![0.3, -1.2, 2.0, 0.7]).unwrap())
                ;
            let e = tape.exp(x);
            let s = tape.sigmoid(e);
            let y = tape.sum(s).unwrap();
            tape.backward(y).unwrap();
            tape.grad(x).unwrap().into_data()
        };
        let a = run();
        let b = run();
        let bits_a: alloc::vec::Vec<u64> = a.iter().map(|x| x.to_bits()).collect();
        let bits_b: alloc::vec::Vec<u64> = b.iter().map(|x| x.to_bits()).collect();
        assert_eq!(bits_a, bits_b);
    }
}
