use log::debug;

use super::loss::{backward, AlignmentTargets, Gradients, LossBreakdown, Objective};
use super::model::AutoencoderModel;
use crate::data::{ClassId, SeenDataset};
use crate::error::{Error, Result};
use crate::manifold::EmbeddedManifold;
use crate::numerics::{DenseMatrix, Rng};

/// Default objective weights.
pub const DEFAULT_ALPHA: f64 = 9.0;
pub const DEFAULT_BETA: f64 = 77.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub alpha: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 500,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn objective(&self) -> Result<Objective> {
        Objective::new(self.alpha, self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        self.objective()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::parameter(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::parameter("batch size must be >= 1"));
        }
        Ok(())
    }
}

/// Loss series, one entry per epoch (sums over that epoch's minibatches,
/// each evaluated before its update).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingReport {
    pub total: Vec<f64>,
    pub reconstruction: Vec<f64>,
    pub alignment: Vec<f64>,
    /// Classes left out of the alignment term because their `o_j` is zero.
    pub excluded_classes: Vec<ClassId>,
}

impl TrainingReport {
    pub fn epochs(&self) -> usize {
        self.total.len()
    }

    /// `epoch,total,reconstruction,alignment`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,total,reconstruction,alignment\n");
        for e in 0..self.total.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e + 1,
                self.total[e],
                self.reconstruction[e],
                self.alignment[e]
            ));
        }
        out
    }
}

/// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
#[derive(Clone, Debug)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Adam {
    pub fn new(model: &AutoencoderModel, learning_rate: f64) -> Self {
        let n = model.num_parameters();
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: vec![0.0; n],
            second: vec![0.0; n],
        }
    }

    pub fn step(&mut self, model: &mut AutoencoderModel, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let mut idx = 0;
        for (layer, g) in model.layers_mut().iter_mut().zip(&grads.layers) {
            let params = layer
                .weights
                .as_mut_slice()
                .iter_mut()
                .zip(g.weights.as_slice())
                .chain(layer.bias.iter_mut().zip(&g.bias));
            for (p, &gi) in params {
                let m = &mut self.first[idx];
                let v = &mut self.second[idx];
                *m = self.beta1 * *m + (1.0 - self.beta1) * gi;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gi * gi;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                idx += 1;
            }
        }
    }
}

/// Minibatch training of an existing model. `targets = None` trains a plain autoencoder.
pub fn train_model(
    mut model: AutoencoderModel,
    x: &DenseMatrix,
    labels: &[ClassId],
    targets: Option<&AlignmentTargets>,
    config: &TrainingConfig,
) -> Result<(AutoencoderModel, TrainingReport)> {
    config.validate()?;
    let objective = config.objective()?;
    if x.rows() == 0 {
        return Err(Error::parameter("no training examples"));
    }
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut shuffle_rng = Rng::new(config.seed).fork(1);
    let mut adam = Adam::new(&model, config.learning_rate);
    let mut report = TrainingReport::default();

    for epoch in 1..=config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = LossBreakdown::default();
        for chunk in order.chunks(config.batch_size) {
            let batch = x.select_rows(chunk);
            let batch_labels: Vec<ClassId> = match targets {
                Some(_) => chunk.iter().map(|&i| labels[i]).collect(),
                None => Vec::new(),
            };
            let (loss, grads) = backward(&model, &batch, &batch_labels, targets, objective)?;
            if !loss.total.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    learning_rate: config.learning_rate,
                });
            }
            epoch_loss.total += loss.total;
            epoch_loss.reconstruction += loss.reconstruction;
            epoch_loss.alignment += loss.alignment;
            adam.step(&mut model, &grads);
        }
        if !model.is_finite() {
            return Err(Error::Diverged {
                epoch,
                learning_rate: config.learning_rate,
            });
        }
        if epoch == 1 || epoch % 100 == 0 || epoch == config.epochs {
            debug!(
                "epoch {epoch}: total {:.6} rec {:.6} align {:.6}",
                epoch_loss.total, epoch_loss.reconstruction, epoch_loss.alignment
            );
        }
        report.total.push(epoch_loss.total);
        report.reconstruction.push(epoch_loss.reconstruction);
        report.alignment.push(epoch_loss.alignment);
    }
    Ok((model, report))
}

/// Trains the standard autoencoder on `dataset` under `α·L_r + β·L_a`.
///
/// The code width is `k = manifold.dim() − n`. The model is initialized from
/// `config.seed` and minibatch order is drawn from an independent stream of
/// the same seed.
pub fn train(
    dataset: &SeenDataset,
    manifold: &EmbeddedManifold,
    config: &TrainingConfig,
) -> Result<(AutoencoderModel, TrainingReport)> {
    config.validate()?;
    if manifold.class_ids != dataset.class_ids() {
        return Err(Error::parameter("manifold classes do not match the training dataset"));
    }
    let (targets, excluded) = AlignmentTargets::excluding_degenerate(dataset.prototypes(), manifold)?;
    let model = AutoencoderModel::new(dataset.feature_dim(), targets.latent_dim(), &mut Rng::new(config.seed).fork(0))?;
    let (model, mut report) = train_model(model, dataset.features(), dataset.labels(), Some(&targets), config)?;
    report.excluded_classes = excluded;
    Ok((model, report))
}
