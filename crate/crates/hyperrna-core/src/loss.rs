//! Training losses: teacher-forced sequence cross-entropy (on-tape), the
//! coordinate mean-squared-error structure term (value-level — predicted
//! coordinates arrive from outside the differentiable path), and their
//! weighted combination.

use alloc::vec::Vec;
use core::fmt;

use crate::tensor::{Axis, Tape, Tensor, TensorError, Var};

/// Errors from loss construction.
#[derive(Debug, Clone, PartialEq)]
pub enum LossError {
    /// Target count disagrees with the number of logit rows.
    LengthMismatch { expected: usize, got: usize },
    /// A target is not a nucleotide index in 0..4.
    BadTarget { index: usize },
    /// Coordinate tensors disagree in shape.
    ShapeMismatch { lhs: Vec<usize>, rhs: Vec<usize> },
    Tensor(TensorError),
}

impl fmt::Display for LossError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossError::LengthMismatch { expected, got } => {
                write!(f, "{got} targets for {expected} logit rows")
            }
            LossError::BadTarget { index } => {
                write!(f, "target index {index} out of range 0..4")
            }
            LossError::ShapeMismatch { lhs, rhs } => {
                write!(f, "coordinate shapes {lhs:?} vs {rhs:?}")
            }
            LossError::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for LossError {}

impl From<TensorError> for LossError {
    fn from(e: TensorError) -> Self {
        LossError::Tensor(e)
    }
}

/// Cross-entropy of the true bases under per-step logits, in nats.
///
/// Summed over positions by default; `mean` divides by the sequence length
/// instead. Differentiable through the logits.
pub fn sequence_loss(
    tape: &Tape,
    logits: Var,
    targets: &[usize],
    mean: bool,
) -> Result<Var, LossError> {
    let shape = tape.shape_of(logits);
    if shape[0] != targets.len() {
        return Err(LossError::LengthMismatch {
            expected: shape[0],
            got: targets.len(),
        });
    }
    for &t in targets {
        if t >= shape[1] {
            return Err(LossError::BadTarget { index: t });
        }
    }
    let logp = tape.log_softmax(logits, Axis::Row)?;
    // Negative one-hot mask: summing the product gives -sum log p[true].
    let mut mask = Tensor::zeros(&shape);
    for (row, &t) in targets.iter().enumerate() {
        mask.set2(row, t, -1.0);
    }
    let m = tape.constant(mask);
    let total = tape.sum(tape.multiply(logp, m)?)?;
    if mean && !targets.is_empty() {
        Ok(tape.scalar_mul(total, 1.0 / targets.len() as f64)?)
    } else {
        Ok(total)
    }
}

/// Mean squared error over all coordinate components. Value-level: the
/// prediction enters as data, not as a differentiable tape node.
pub fn structure_loss(truth: &Tensor, pred: &Tensor) -> Result<f64, LossError> {
    if truth.shape() != pred.shape() {
        return Err(LossError::ShapeMismatch {
            lhs: truth.shape().to_vec(),
            rhs: pred.shape().to_vec(),
        });
    }
    let n = truth.numel();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = truth
        .data()
        .iter()
        .zip(pred.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / n as f64)
}

/// Combined loss. A missing structure term contributes 0 and is recorded as
/// absent so reports can distinguish "0.0" from "not evaluated".
#[derive(Debug, Clone, Copy)]
pub struct TotalLoss {
    pub value: Var,
    /// The raw (unweighted) structure term, when one was supplied.
    pub structure_term: Option<f64>,
}

pub fn total_loss(
    tape: &Tape,
    seq: Var,
    structure: Option<f64>,
    lambda: f64,
) -> Result<TotalLoss, LossError> {
    let value = match structure {
        Some(s) => tape.scalar_add(seq, lambda * s)?,
        None => seq,
    };
    Ok(TotalLoss {
        value,
        structure_term: structure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck;
    use crate::rng::Xoshiro256StarStar;
    use alloc::vec;

    #[test]
    fn saturated_correct_logits_cost_nothing() {
        let tape = Tape::new();
        let mut logits = Tensor::zeros(&[3, 4]);
        for (row, &t) in [1usize, 3, 0].iter().enumerate() {
            logits.set2(row, t, 500.0);
        }
        let l = tape.constant(logits);
        let loss = sequence_loss(&tape, l, &[1, 3, 0], false).unwrap();
        assert_eq!(tape.value(loss).item().unwrap(), 0.0);
    }

    #[test]
    fn uniform_logits_cost_len_times_ln4() {
        let tape = Tape::new();
        let l = tape.constant(Tensor::zeros(&[5, 4]));
        let loss = sequence_loss(&tape, l, &[0, 1, 2, 3, 0], false).unwrap();
        let want = 5.0 * 4.0f64.ln();
        assert!((tape.value(loss).item().unwrap() - want).abs() <= 1e-12);
        let loss = sequence_loss(&tape, l, &[0, 1, 2, 3, 0], true).unwrap();
        assert!((tape.value(loss).item().unwrap() - 4.0f64.ln()).abs() <= 1e-12);
    }

    #[test]
    fn random_case_matches_loop_oracle() {
        let mut rng = Xoshiro256StarStar::seeded(70);
        for _ in 0..10 {
            let tape = Tape::new();
            let logits = gradcheck::random_tensor(&[5, 4], 2.0, &mut rng);
            let targets: Vec<usize> = (0..5).map(|_| rng.below(4)).collect();
            let l = tape.constant(logits.clone());
            let loss = sequence_loss(&tape, l, &targets, false).unwrap();
            // Oracle: stable per-row softmax, then -sum log p[target].
            let mut want = 0.0;
            for (row, &t) in targets.iter().enumerate() {
                let vals: Vec<f64> = (0..4).map(|c| logits.get2(row, c)).collect();
                let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = vals.iter().map(|v| (v - max).exp()).sum();
                want -= vals[t] - max - z.ln();
            }
            assert!((tape.value(loss).item().unwrap() - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn sequence_loss_is_nonnegative_and_contracts_hold() {
        let tape = Tape::new();
        let l = tape.constant(Tensor::zeros(&[2, 4]));
        assert_eq!(
            sequence_loss(&tape, l, &[0], false).err(),
            Some(LossError::LengthMismatch {
                expected: 2,
                got: 1
            })
        );
        assert_eq!(
            sequence_loss(&tape, l, &[0, 7], false).err(),
            Some(LossError::BadTarget { index: 7 })
        );
        let mut rng = Xoshiro256StarStar::seeded(71);
        for _ in 0..20 {
            let tape = Tape::new();
            let l = tape.constant(gradcheck::random_tensor(&[4, 4], 3.0, &mut rng));
            let loss = sequence_loss(&tape, l, &[0, 1, 2, 3], false).unwrap();
            assert!(tape.value(loss).item().unwrap() >= 0.0);
        }
    }

    #[test]
    fn sequence_loss_gradients_pass_finite_differences() {
        let mut rng = Xoshiro256StarStar::seeded(72);
        let inputs = vec![gradcheck::random_tensor(&[4, 4], 1.0, &mut rng)];
        let report = gradcheck::check_default(
            &inputs,
            |tape, vars| {
                sequence_loss(tape, vars[0], &[2, 0, 3, 1], false).map_err(|e| match e {
                    LossError::Tensor(t) => t,
                    other => panic!("unexpected loss error: {other}"),
                })
            },
            &mut rng,
        )
        .unwrap();
        assert!(report.within(1e-4), "sequence loss gradients off: {report:?}");
    }

    #[test]
    fn structure_loss_examples() {
        let a = Tensor::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        assert_eq!(structure_loss(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        for v in b.data_mut() {
            *v += 1.0;
        }
        assert_eq!(structure_loss(&a, &b).unwrap(), 1.0);
        // Random pair against a plain loop.
        let mut rng = Xoshiro256StarStar::seeded(73);
        let x = gradcheck::random_tensor(&[4, 3], 2.0, &mut rng);
        let y = gradcheck::random_tensor(&[4, 3], 2.0, &mut rng);
        let mut want = 0.0;
        for i in 0..4 {
            for c in 0..3 {
                let d = x.get2(i, c) - y.get2(i, c);
                want += d * d;
            }
        }
        want /= 12.0;
        assert!((structure_loss(&x, &y).unwrap() - want).abs() <= 1e-15);
        // Shape disagreement is rejected.
        let z = Tensor::zeros(&[3, 3]);
        assert!(matches!(
            structure_loss(&x, &z).err(),
            Some(LossError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn total_loss_combines_and_records_absence() {
        let tape = Tape::new();
        let seq = tape.constant(Tensor::scalar(2.0));
        let t = total_loss(&tape, seq, Some(3.0), 1.0).unwrap();
        assert_eq!(tape.value(t.value).item().unwrap(), 5.0);
        assert_eq!(t.structure_term, Some(3.0));
        let t = total_loss(&tape, seq, Some(3.0), 0.0).unwrap();
        assert_eq!(tape.value(t.value).item().unwrap(), 2.0);
        let t = total_loss(&tape, seq, None, 1.0).unwrap();
        assert_eq!(tape.value(t.value).item().unwrap(), 2.0);
        assert_eq!(t.structure_term, None);
    }

    #[test]
    fn structure_term_stays_out_of_the_gradient() {
        // The structure term is a constant offset: gradients through the
        // sequence path must be identical with and without it.
        let mut rng = Xoshiro256StarStar::seeded(74);
        let logits = gradcheck::random_tensor(&[3, 4], 1.0, &mut rng);
        let grad_of = |structure: Option<f64>| {
            let tape = Tape::new();
            let l = tape.param(logits.clone());
            let seq = sequence_loss(&tape, l, &[0, 1, 2], false).unwrap();
            let total = total_loss(&tape, seq, structure, 2.5).unwrap();
            tape.backward(total.value).unwrap();
            tape.grad(l).unwrap()
        };
        let with = grad_of(Some(7.0));
        let without = grad_of(None);
        assert_eq!(with.data(), without.data());
    }
}
