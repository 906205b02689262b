//! Central finite-difference verification of tape gradients.
//!
//! Every differentiable building block in this project is validated against
//! the slope oracle `(f(x + h e) - f(x - h e)) / 2h`, which knows nothing
//! about the backward implementation. The checker rebuilds the computation
//! from scratch for every probe, so closures passed in must be deterministic
//! functions of their inputs — stochastic ops (dropout) must reseed their own
//! RNG inside the closure.
//!
//! For large tensors, probing every component is wasteful; `max_probes_per_input`
//! selects a deterministic random subset instead, which preserves the power
//! of the check (a wrong backward rule is wrong almost everywhere) at a tiny
//! fraction of the cost.

use alloc::vec::Vec;

use crate::rng::Xoshiro256StarStar;
use crate::tensor::{Tape, Tensor, TensorError, Var};

/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Outcome of one [`check`] run.
#[derive(Clone, Debug)]
pub struct FdReport {
    /// Worst relative error over all probed components.
    pub max_rel_err: f64,
    /// Total probes evaluated.
    pub probes: usize,
    /// Input index and flat component of the worst probe.
    pub worst: Option<(usize, usize)>,
    /// Analytic and finite-difference value at the worst probe.
    pub worst_pair: Option<(f64, f64)>,
}

impl FdReport {
    pub fn within(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Relative discrepancy with a floor that keeps near-zero gradients from
/// manufacturing large ratios out of finite-difference noise.
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = (analytic.abs() + numeric.abs()).max(1e-3);
    (analytic - numeric).abs() / denom
}

/// Checks `build`'s gradients w.r.t. every tensor in `inputs`.
///
/// `build` receives a fresh tape plus one `Var` per input (all registered as
/// gradient-requiring parameters) and must return a scalar. Probes are drawn
/// with `rng`; pass a freshly seeded generator for reproducible runs.
pub fn check<F>(
    inputs: &[Tensor],
    build: F,
    h: f64,
    max_probes_per_input: usize,
    rng: &mut Xoshiro256StarStar,
) -> Result<FdReport, TensorError>
where
    F: Fn(&Tape, &[Var]) -> Result<Var, TensorError>,
{
    let eval = |points: &[Tensor]| -> Result<f64, TensorError> {
        let tape = Tape::new();
        let vars: Vec<Var> = points.iter().map(|t| tape.param(t.clone())).collect();
        let out = build(&tape, &vars)?;
        tape.value(out).item()
    };

    // Analytic gradients from one recorded pass.
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = build(&tape, &vars)?;
    let out_shape = tape.shape_of(out);
    if out_shape.iter().product::<usize>() != 1 {
        return Err(TensorError::NotScalar { shape: out_shape });
    }
    tape.backward(out)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| tape.grad_or_zeros(v)).collect();

    let mut report = FdReport {
        max_rel_err: 0.0,
        probes: 0,
        worst: None,
        worst_pair: None,
    };
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (ti, input) in inputs.iter().enumerate() {
        let n = input.numel();
        let components: Vec<usize> = if n <= max_probes_per_input {
            (0..n).collect()
        } else {
            // Sample distinct components; n is small enough that retry
            // collisions are cheap.
            let mut picked = Vec::with_capacity(max_probes_per_input);
            while picked.len() < max_probes_per_input {
                let c = rng.below(n);
                if !picked.contains(&c) {
                    picked.push(c);
                }
            }
            picked
        };
        for &ci in &components {
            let orig = work[ti].data()[ci];
            work[ti].data_mut()[ci] = orig + h;
            let f_plus = eval(&work)?;
            work[ti].data_mut()[ci] = orig - h;
            let f_minus = eval(&work)?;
            work[ti].data_mut()[ci] = orig;

            let numeric = (f_plus - f_minus) / (2.0 * h);
            let exact = analytic[ti].data()[ci];
            let err = rel_err(exact, numeric);
            report.probes += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((ti, ci));
                report.worst_pair = Some((exact, numeric));
            }
        }
    }
    Ok(report)
}

/// Convenience wrapper: checks with the default step and asserts nothing;
/// callers compare [`FdReport::max_rel_err`] against their tolerance.
pub fn check_default<F>(
    inputs: &[Tensor],
    build: F,
    rng: &mut Xoshiro256StarStar,
) -> Result<FdReport, TensorError>
where
    F: Fn(&Tape, &[Var]) -> Result<Var, TensorError>,
{
    check(inputs, build, DEFAULT_STEP, 64, rng)
}

/// Random tensor with entries uniform in [-spread, spread]; the standard
/// input generator for gradient probes.
pub fn random_tensor(shape: &[usize], spread: f64, rng: &mut Xoshiro256StarStar) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.uniform(-spread, spread);
    }
    t
}
