//! Training: MSE loss on the tape, Adam with bias correction, and an epoch
//! loop with patience-based early stopping that restores the best
//! validation snapshot.

use crate::data::{mask_elevation, normalize, GridField, PairedSample};
use crate::error::{Error, Result};
use crate::model::{AttentionSRModel, Param};
use crate::tensor::{Tape, Tensor, TensorId};
use chrono::NaiveDate;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs_max: 1000,
            batch_size: 64,
            patience: 60,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if self.patience >= self.epochs_max {
            return Err(Error::Config(format!(
                "patience {} must be below epochs_max {}",
                self.patience, self.epochs_max
            )));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Mean squared error: per-sample sum over H,W divided by H*W, averaged
/// over the batch. With one channel this is the plain mean over all
/// elements, so the gradient is `2(pred-truth)/(n*H*W)`.
pub fn mse_loss(tape: &mut Tape, pred: TensorId, truth: TensorId) -> Result<TensorId> {
    if tape.value(pred).shape() != tape.value(truth).shape() {
        return Err(Error::shape(
            "mse_loss",
            format!(
                "{:?} vs {:?}",
                tape.value(pred).shape(),
                tape.value(truth).shape()
            ),
        ));
    }
    let d = tape.sub(pred, truth)?;
    let sq = tape.mul(d, d)?;
    tape.mean_all(sq)
}

/// Adam with bias correction; moment buffers mirror the parameter shapes.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: usize,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64, sizes: &[usize]) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn from_config(cfg: &TrainConfig, sizes: &[usize]) -> Self {
        Adam::new(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps, sizes)
    }

    /// One update over all parameters. Every parameter must come with its
    /// gradient; `None` is an error, not a silent skip.
    pub fn step(&mut self, params: &mut [Param], grads: &[Option<&[f32]>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::Config(format!(
                "optimizer tracks {} parameters, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let g = grads[i].ok_or_else(|| {
                Error::Config(format!("missing gradient for parameter {}", p.name))
            })?;
            let data = p.tensor.data_mut();
            if g.len() != data.len() {
                return Err(Error::Config(format!(
                    "gradient length {} vs parameter {} length {}",
                    g.len(),
                    p.name,
                    data.len()
                )));
            }
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for j in 0..data.len() {
                let gj = f64::from(g[j]);
                let mj = self.beta1 * f64::from(m[j]) + (1.0 - self.beta1) * gj;
                let vj = self.beta2 * f64::from(v[j]) + (1.0 - self.beta2) * gj * gj;
                m[j] = mj as f32;
                v[j] = vj as f32;
                let m_hat = mj / bc1;
                let v_hat = vj / bc2;
                data[j] = (f64::from(data[j]) - self.lr * m_hat / (v_hat.sqrt() + self.eps)) as f32;
            }
        }
        Ok(())
    }
}

/// Patience counter: stop once the epochs since the last improvement reach
/// `patience`. A strictly worsening run therefore stops after exactly
/// `patience + 1` epochs (the first one improves on nothing).
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    pub since_improvement: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            since_improvement: 0,
        }
    }

    /// Feed one epoch's validation loss; returns (improved, should_stop).
    pub fn observe(&mut self, epoch: usize, val: f64) -> (bool, bool) {
        let improved = val < self.best;
        if improved {
            self.best = val;
            self.best_epoch = epoch;
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
        }
        (improved, self.since_improvement >= self.patience)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val: f64,
}

/// Generic epoch driver around [`EarlyStopping`]; `run_epoch` returns
/// (train_loss, val_loss), `on_improve` fires when validation improves.
pub fn fit_loop<R, S>(
    epochs_max: usize,
    patience: usize,
    mut run_epoch: R,
    mut on_improve: S,
) -> Result<FitOutcome>
where
    R: FnMut(usize) -> Result<(f64, f64)>,
    S: FnMut(usize),
{
    let mut stopper = EarlyStopping::new(patience);
    let mut history = Vec::new();
    for epoch in 1..=epochs_max {
        let (train_loss, val_loss) = run_epoch(epoch)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        let (improved, stop) = stopper.observe(epoch, val_loss);
        if improved {
            on_improve(epoch);
        }
        if stop {
            break;
        }
    }
    Ok(FitOutcome {
        history,
        best_epoch: stopper.best_epoch,
        best_val: stopper.best,
    })
}

/// Day fields flattened to log1p space, ready for batching.
#[derive(Debug, Clone)]
pub struct TensorDataset {
    pub lr_shape: (usize, usize),
    pub hr_shape: (usize, usize),
    pub dates: Vec<NaiveDate>,
    lr: Vec<Vec<f32>>,
    hr: Vec<Vec<f32>>,
}

impl TensorDataset {
    /// log1p-normalize paired samples; shapes must be uniform.
    pub fn from_samples(samples: &[PairedSample]) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::Config("empty split".into()))?;
        let lr_shape = (first.x_lr.height, first.x_lr.width);
        let hr_shape = (first.y_hr.height, first.y_hr.width);
        let mut lr = Vec::with_capacity(samples.len());
        let mut hr = Vec::with_capacity(samples.len());
        let mut dates = Vec::with_capacity(samples.len());
        for s in samples {
            if (s.x_lr.height, s.x_lr.width) != lr_shape
                || (s.y_hr.height, s.y_hr.width) != hr_shape
            {
                return Err(Error::GridMismatch("ragged sample shapes".into()));
            }
            lr.push(normalize(&s.x_lr)?.values);
            hr.push(normalize(&s.y_hr)?.values);
            dates.push(s.date);
        }
        Ok(TensorDataset {
            lr_shape,
            hr_shape,
            dates,
            lr,
            hr,
        })
    }

    pub fn len(&self) -> usize {
        self.lr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lr.is_empty()
    }

    /// Assemble `[b, h, w, 1]` input and truth tensors for the given days.
    pub fn batch(&self, idxs: &[usize]) -> (Tensor, Tensor) {
        let (lh, lw) = self.lr_shape;
        let (hh, hw) = self.hr_shape;
        let mut x = Vec::with_capacity(idxs.len() * lh * lw);
        let mut y = Vec::with_capacity(idxs.len() * hh * hw);
        for &i in idxs {
            x.extend_from_slice(&self.lr[i]);
            y.extend_from_slice(&self.hr[i]);
        }
        (
            Tensor::new(vec![idxs.len(), lh, lw, 1], x).expect("finite log1p values"),
            Tensor::new(vec![idxs.len(), hh, hw, 1], y).expect("finite log1p values"),
        )
    }

    pub fn lr_values(&self, i: usize) -> &[f32] {
        &self.lr[i]
    }

    pub fn hr_values(&self, i: usize) -> &[f32] {
        &self.hr[i]
    }
}

/// Masked, log1p-scaled terrain as a `[1, H, W, 1]` model input.
pub fn elevation_tensor(elevation: &GridField) -> Result<Tensor> {
    let masked = mask_elevation(elevation);
    let logged = normalize(&masked)?;
    Tensor::new(
        vec![1, elevation.height, elevation.width, 1],
        logged.values,
    )
}

/// Validation MSE in log1p space over the whole set.
pub fn evaluate_mse(
    model: &AttentionSRModel,
    ds: &TensorDataset,
    elevation: Option<&Tensor>,
    batch_size: usize,
) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::Config("empty split".into()));
    }
    let idxs: Vec<usize> = (0..ds.len()).collect();
    let mut acc = 0.0f64;
    for chunk in idxs.chunks(batch_size.max(1)) {
        let (x, y) = ds.batch(chunk);
        let mut tape = Tape::new();
        let pass = model.forward_on(&mut tape, &x, elevation)?;
        let truth = tape.leaf(y);
        let loss = mse_loss(&mut tape, pass.output, truth)?;
        acc += f64::from(tape.value(loss).data()[0]) * chunk.len() as f64;
    }
    Ok(acc / ds.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val: f64,
}

/// Epoch loop: shuffled batches (last partial batch kept), Adam updates,
/// per-epoch validation, early stopping, best-snapshot restoration. The
/// model is left holding the best-validation parameters, not the last ones.
pub fn train(
    model: &mut AttentionSRModel,
    train_ds: &TensorDataset,
    val_ds: &TensorDataset,
    elevation: Option<&Tensor>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_ds.is_empty() || val_ds.is_empty() {
        return Err(Error::Config("empty split".into()));
    }
    let sizes: Vec<usize> = model.params().iter().map(|p| p.tensor.numel()).collect();
    let mut adam = Adam::from_config(cfg, &sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut history = Vec::new();
    let mut best_snapshot = model.snapshot();

    let n = train_ds.len();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=cfg.epochs_max {
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut loss_acc = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = train_ds.batch(chunk);
            let mut tape = Tape::new();
            let pass = model.forward_on(&mut tape, &x, elevation)?;
            let truth = tape.leaf(y);
            let loss = mse_loss(&mut tape, pass.output, truth)?;
            loss_acc += f64::from(tape.value(loss).data()[0]) * chunk.len() as f64;
            tape.backward(loss)?;
            let grads: Vec<Option<&[f32]>> =
                pass.param_ids.iter().map(|&id| tape.grad(id)).collect();
            adam.step(model.params_mut(), &grads)?;
        }
        let train_loss = loss_acc / n as f64;
        let val_loss = evaluate_mse(model, val_ds, elevation, cfg.batch_size)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        let (improved, stop) = stopper.observe(epoch, val_loss);
        if improved {
            best_snapshot = model.snapshot();
        }
        if stop {
            break;
        }
    }
    model.restore(&best_snapshot);
    Ok(TrainOutcome {
        history,
        best_epoch: stopper.best_epoch,
        best_val: stopper.best,
    })
}

/// History rows in the `epoch,train_loss,val_loss` CSV layout.
pub fn history_to_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for r in history {
        out.push_str(&format!("{},{:.9},{:.9}\n", r.epoch, r.train_loss, r.val_loss));
    }
    out
}
