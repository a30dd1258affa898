//! Mini-batch Adam training on mean cross-entropy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{cross_entropy, Model, Trace, TrainingMeta};
use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::repr::{Normalizer, ReprConfig, Tensor3};
use crate::signal::GestureClass;
use crate::windowing::WindowingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            epochs: 30,
            seed: 0,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Self {
            learning_rate: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// Mean training loss of each epoch, measured during the epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains `spec` on raw (unnormalized) tensors. Normalization statistics are
/// fitted on the training set and stored in the model.
pub fn train(
    spec: ModelSpec,
    windowing: WindowingConfig,
    repr: ReprConfig,
    samples: &[(Tensor3, GestureClass)],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(Error::ConfigInvalid("batch_size must be >= 1".into()));
    }
    let mut model = Model::init(spec, windowing, repr, cfg.seed)?;
    let dims = model.input_dims();
    for (t, _) in samples {
        let kind = t.kind().ok_or_else(|| Error::RepresentationMismatch {
            expected: model.spec.representation.to_string(),
            found: format!("{:?}", t.axes()),
        })?;
        model.spec.check_representation(kind)?;
        if t.dims() != dims {
            return Err(Error::ShapeMismatch(format!(
                "training tensor dims {:?}, model expects {dims:?}",
                t.dims()
            )));
        }
    }

    model.normalizer = Normalizer::fit(samples.iter().map(|(t, _)| t))?;
    let data: Vec<(Vec<f64>, usize)> = samples
        .iter()
        .map(|(t, label)| {
            let mut t = t.clone();
            model.normalizer.apply(&mut t)?;
            Ok((t.into_vec(), label.index()))
        })
        .collect::<Result<_>>()?;

    let net = model.network().clone();
    let mut adam = Adam::new(net.param_count(), cfg);
    let mut grads = vec![0.0; net.param_count()];
    let mut trace = Trace::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.fill(0.0);
            for &i in batch {
                let (x, label) = &data[i];
                let logits = net.forward(&model.params, x, &mut trace)?;
                let (loss, mut g) = cross_entropy(logits, *label);
                total += loss;
                let scale = 1.0 / batch.len() as f64;
                g.iter_mut().for_each(|v| *v *= scale);
                net.backward(&model.params, &mut trace, &g, &mut grads)?;
            }
            adam.step(&mut model.params, &grads);
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::DivergedLoss { epoch, loss: mean });
        }
        epoch_losses.push(mean);
    }

    model.meta = TrainingMeta {
        seed: cfg.seed,
        epochs: cfg.epochs,
        final_loss: epoch_losses.last().copied(),
    };
    Ok(TrainOutcome { model, epoch_losses })
}

/// Mean cross-entropy of a model over raw tensors (normalized with the
/// model's own statistics).
pub fn mean_loss(model: &Model, samples: &[(Tensor3, GestureClass)]) -> Result<f64> {
    let mut trace = Trace::default();
    let mut total = 0.0;
    for (t, label) in samples {
        let mut t = t.clone();
        model.normalizer.apply(&mut t)?;
        model.forward_with(&t, &mut trace)?;
        total += cross_entropy(trace.logits(), label.index()).0;
    }
    Ok(total / samples.len().max(1) as f64)
}
