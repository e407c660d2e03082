//! Shared helpers for unit tests: a central finite-difference gradient
//! oracle that only ever runs forward passes, plus tolerance utilities.

use crate::tensor::{Tape, Tensor, TensorId};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG for test inputs.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f32, hi: f32) -> Tensor {
    let numel = shape.iter().product();
    let data = (0..numel).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Central finite differences of `build`'s scalar output w.r.t. input `wrt`.
/// `build` must construct the whole graph from the given leaves; it is run
/// twice per coordinate and never touches the analytic backward path.
pub fn finite_diff_grad<F>(build: &F, inputs: &[Tensor], wrt: usize, eps: f32) -> Vec<f64>
where
    F: Fn(&mut Tape, &[TensorId]) -> TensorId,
{
    let eval = |perturbed: &Tensor| -> f64 {
        let mut tape = Tape::new();
        let ids: Vec<TensorId> = inputs
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let t = if i == wrt { perturbed.clone() } else { t.clone() };
                tape.leaf(t)
            })
            .collect();
        let loss = build(&mut tape, &ids);
        f64::from(tape.value(loss).data()[0])
    };
    let base = &inputs[wrt];
    (0..base.numel())
        .map(|i| {
            let mut plus = base.clone();
            plus.data_mut()[i] += eps;
            let mut minus = base.clone();
            minus.data_mut()[i] -= eps;
            (eval(&plus) - eval(&minus)) / (2.0 * f64::from(eps))
        })
        .collect()
}

/// Analytic gradient of `build`'s scalar output w.r.t. input `wrt`.
pub fn analytic_grad<F>(build: &F, inputs: &[Tensor], wrt: usize) -> Vec<f32>
where
    F: Fn(&mut Tape, &[TensorId]) -> TensorId,
{
    let mut tape = Tape::new();
    let ids: Vec<TensorId> = inputs
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let t = if i == wrt {
                t.clone().with_requires_grad()
            } else {
                t.clone()
            };
            tape.leaf(t)
        })
        .collect();
    let loss = build(&mut tape, &ids);
    tape.backward(loss).unwrap();
    tape.grad(ids[wrt]).unwrap().to_vec()
}

/// Assert finite differences and analytic gradients agree: relative error
/// below `rtol` with a small absolute guard for near-zero coordinates
/// (f32 storage makes tiny gradients noisy under differencing). A failing
/// coordinate is re-checked at a finer step: near a ReLU/argmax kink the
/// centered difference at the coarse step is biased, and convergence of the
/// refined estimate onto the analytic value validates the gradient.
pub fn assert_grad_close<F>(build: F, inputs: &[Tensor], wrt: usize, label: &str)
where
    F: Fn(&mut Tape, &[TensorId]) -> TensorId,
{
    let eps = 1e-3f32;
    let rtol = 1e-2f64;
    let atol = 1e-4f64;
    let close = |fd: f64, an: f64| (fd - an).abs() <= atol.max(rtol * fd.abs().max(an.abs()));
    let fd = finite_diff_grad(&build, inputs, wrt, eps);
    let an = analytic_grad(&build, inputs, wrt);
    for (i, (&f, &a)) in fd.iter().zip(an.iter()).enumerate() {
        let a = f64::from(a);
        if close(f, a) {
            continue;
        }
        let coord_fd = |eps: f32| -> f64 {
            let mut plus = inputs[wrt].clone();
            plus.data_mut()[i] += eps;
            let mut minus = inputs[wrt].clone();
            minus.data_mut()[i] -= eps;
            let eval = |t: &Tensor| -> f64 {
                let mut tape = Tape::new();
                let ids: Vec<TensorId> = inputs
                    .iter()
                    .enumerate()
                    .map(|(k, b)| tape.leaf(if k == wrt { t.clone() } else { b.clone() }))
                    .collect();
                let loss = build(&mut tape, &ids);
                f64::from(tape.value(loss).data()[0])
            };
            (eval(&plus) - eval(&minus)) / (2.0 * f64::from(eps))
        };
        let refined = [3e-4f32, 1e-4].iter().any(|&eps| close(coord_fd(eps), a));
        assert!(
            refined,
            "{label}: coordinate {i}: finite-diff {f} vs analytic {a} at every step size"
        );
    }
}

pub fn assert_close(a: f64, b: f64, tol: f64, label: &str) {
    assert!((a - b).abs() <= tol, "{label}: {a} vs {b} (tol {tol})");
}
