// Oracles shared by the acceptance suite: a finite-difference gradient
// checker that only runs forward passes, a nested-loop convolution
// reference, and a two-sample KS statistic.

use downscale_core::tensor::{Tape, Tensor, TensorId};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f32, hi: f32) -> Tensor {
    let numel = shape.iter().product();
    let data = (0..numel).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

pub const FD_EPS: f32 = 1e-3;
/// Refinement ladder for coordinates whose +-FD_EPS interval straddles a
/// ReLU/argmax kink: the centered difference there is biased by O(eps), so
/// a shrinking step must converge onto the analytic value. A wrong backward
/// keeps a constant gap across every step size.
pub const FD_EPS_LADDER: [f32; 2] = [3e-4, 1e-4];
pub const FD_RTOL: f64 = 1e-2;
pub const FD_ATOL: f64 = 1e-4;

/// Relative-error acceptance with an absolute guard for coordinates whose
/// true gradient is near zero (f32 storage makes differencing noisy there).
pub fn grad_close(fd: f64, an: f64) -> bool {
    let diff = (fd - an).abs();
    diff <= FD_ATOL.max(FD_RTOL * fd.abs().max(an.abs()))
}

/// Central finite differences of a scalar-valued graph w.r.t. one leaf.
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

/// Central difference of one coordinate only.
pub fn finite_diff_coord<F>(build: &F, inputs: &[Tensor], wrt: usize, coord: usize, eps: f32) -> f64
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
    let mut plus = inputs[wrt].clone();
    plus.data_mut()[coord] += eps;
    let mut minus = inputs[wrt].clone();
    minus.data_mut()[coord] -= eps;
    (eval(&plus) - eval(&minus)) / (2.0 * f64::from(eps))
}

pub fn check_gradients<F>(build: F, inputs: &[Tensor], label: &str)
where
    F: Fn(&mut Tape, &[TensorId]) -> TensorId,
{
    for wrt in 0..inputs.len() {
        let fd = finite_diff_grad(&build, inputs, wrt, FD_EPS);
        let an = analytic_grad(&build, inputs, wrt);
        for (i, (&f, &a)) in fd.iter().zip(an.iter()).enumerate() {
            if grad_close(f, f64::from(a)) {
                continue;
            }
            let refined = FD_EPS_LADDER
                .iter()
                .any(|&eps| grad_close(finite_diff_coord(&build, inputs, wrt, i, eps), f64::from(a)));
            assert!(
                refined,
                "{label}: input {wrt} coordinate {i}: finite-diff {f} vs analytic {a} at every step size"
            );
        }
    }
}

/// Direct six-nested-loop zero-SAME convolution in f64.
pub fn conv2d_oracle(x: &Tensor, k: &Tensor, b: &Tensor, stride: usize) -> Vec<f32> {
    let (n, h, w, ci) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (kh, kw, _, co) = (k.shape()[0], k.shape()[1], k.shape()[2], k.shape()[3]);
    let oh = h.div_ceil(stride);
    let ow = w.div_ceil(stride);
    let pt = (((oh - 1) * stride + kh).saturating_sub(h)) / 2;
    let pl = (((ow - 1) * stride + kw).saturating_sub(w)) / 2;
    let mut out = vec![0.0f32; n * oh * ow * co];
    for ni in 0..n {
        for oi in 0..oh {
            for oj in 0..ow {
                for c_out in 0..co {
                    let mut acc = f64::from(b.data()[c_out]);
                    for ki in 0..kh {
                        for kj in 0..kw {
                            for c_in in 0..ci {
                                let ii = (oi * stride + ki) as isize - pt as isize;
                                let jj = (oj * stride + kj) as isize - pl as isize;
                                if ii < 0 || ii >= h as isize || jj < 0 || jj >= w as isize {
                                    continue;
                                }
                                let xi = ((ni * h + ii as usize) * w + jj as usize) * ci + c_in;
                                let kk = ((ki * kw + kj) * ci + c_in) * co + c_out;
                                acc += f64::from(x.data()[xi]) * f64::from(k.data()[kk]);
                            }
                        }
                    }
                    out[((ni * oh + oi) * ow + oj) * co + c_out] = acc as f32;
                }
            }
        }
    }
    out
}

/// Two-sample Kolmogorov-Smirnov statistic via step ECDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let step = |s: &[f64], x: f64| -> f64 {
        s.partition_point(|&v| v <= x) as f64 / s.len() as f64
    };
    let mut d = 0.0f64;
    for &x in a.iter().chain(b.iter()) {
        d = d.max((step(&a, x) - step(&b, x)).abs());
    }
    d
}

/// One-sided binomial sign-test p-value: P(X >= wins) under fair coin.
pub fn sign_test_p(wins: usize, trials: usize) -> f64 {
    let mut total = 0.0f64;
    for k in wins..=trials {
        total += binomial(trials, k);
    }
    total / 2f64.powi(trials as i32)
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}
