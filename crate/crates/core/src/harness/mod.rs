//! Training loop, evaluation, and the experiment grid.

mod grid;
mod metrics;

use std::path::PathBuf;
use std::time::Instant;

pub use grid::{run_grid, GridRow, GridSpec, SUMMARY_FILE, SUMMARY_HEADER};
pub use metrics::{read_metrics, EpochMetrics, MetricsWriter, METRICS_HEADER};

use crate::bptt::{batch_loss_and_grads, infer_logits};
use crate::cells::{init_params, param_count, Activation, CellRegistry, ParamSet, RecurrentCell};
use crate::data::{batch_indices, Dataset, Split, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::optim::{RmsConfig, RmsState, DEFAULT_EPS, DEFAULT_RHO};

/// The three learning rates of the case studies.
pub const STUDY_ETAS: [f64; 3] = [1e-4, 1e-3, 2e-3];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Registry key of the cell variant.
    pub variant: String,
    pub activation: Activation,
    pub eta: f64,
    pub rho: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub seed: u64,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    /// Where to stream the per-epoch CSV; `None` keeps metrics in memory only.
    pub metrics_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: "lstm".into(),
            activation: Activation::Tanh,
            eta: 1e-3,
            rho: DEFAULT_RHO,
            eps: DEFAULT_EPS,
            epochs: 100,
            batch_size: 32,
            hidden: 100,
            seed: 0,
            train_limit: None,
            test_limit: None,
            metrics_path: None,
        }
    }
}

impl TrainConfig {
    pub fn rms(&self) -> RmsConfig {
        RmsConfig {
            eta: self.eta,
            rho: self.rho,
            eps: self.eps,
        }
    }

    pub fn validate(&self, registry: &CellRegistry) -> Result<()> {
        if !registry.contains(&self.variant) {
            // Reuse the registry's error, which lists the known names.
            registry.build(&self.variant, self.activation)?;
        }
        self.rms().validate()?;
        for (name, value) in [
            ("epochs", self.epochs),
            ("batch size", self.batch_size),
            ("hidden size", self.hidden),
        ] {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.train_limit == Some(0) || self.test_limit == Some(0) {
            return Err(Error::Config("example limits must be positive".into()));
        }
        Ok(())
    }
}

/// Fraction of examples whose argmax logit (ties to the lowest class) equals
/// the label.
pub fn evaluate(cell: &dyn RecurrentCell, params: &ParamSet, split: &Split) -> Result<f64> {
    if split.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty split"));
    }
    let mut correct = 0usize;
    for i in 0..split.len() {
        let logits = infer_logits(cell, params, &split.sequence(i))?;
        if logits.argmax() == split.label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / split.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Best {
    pub train: f64,
    pub test: f64,
    /// 1-based epoch of the (first) best test accuracy.
    pub test_epoch: usize,
}

/// Per-column maxima of train and test accuracy over all epochs.
pub fn best_of(metrics: &[EpochMetrics]) -> Result<Best> {
    let first = metrics
        .first()
        .ok_or_else(|| Error::invalid("no epochs recorded"))?;
    let mut best = Best {
        train: first.train_acc,
        test: first.test_acc,
        test_epoch: first.epoch,
    };
    for m in &metrics[1..] {
        best.train = best.train.max(m.train_acc);
        if m.test_acc > best.test {
            best.test = m.test_acc;
            best.test_epoch = m.epoch;
        }
    }
    Ok(best)
}

/// Result of a finished run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: Vec<EpochMetrics>,
    pub params: ParamSet,
    pub param_count: usize,
}

fn prefix(split: &Split, limit: Option<usize>) -> Split {
    match limit {
        Some(l) => split.head(l),
        None => split.clone(),
    }
}

/// A cell with its parameters and optimizer state.
#[derive(Debug)]
pub struct Model {
    pub cell: Box<dyn RecurrentCell>,
    pub params: ParamSet,
    pub optimizer: RmsState,
    n_in: usize,
    hidden: usize,
}

/// One optimization pass over the training split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochPass {
    /// Mean per-example training loss, accumulated during the pass.
    pub train_loss: f64,
    /// Wall-clock seconds of the pass alone.
    pub seconds: f64,
}

impl Model {
    /// Freshly initialized model for `config` with `n_in` inputs per step.
    pub fn new(config: &TrainConfig, registry: &CellRegistry, n_in: usize) -> Result<Self> {
        config.validate(registry)?;
        let cell = registry.build(&config.variant, config.activation)?;
        let params = init_params(cell.as_ref(), n_in, config.hidden, NUM_CLASSES, config.seed)?;
        let optimizer = RmsState::new(config.rms(), &params)?;
        Ok(Self {
            cell,
            params,
            optimizer,
            n_in,
            hidden: config.hidden,
        })
    }

    pub fn param_count(&self) -> usize {
        param_count(self.cell.as_ref(), self.n_in, self.hidden, NUM_CLASSES)
    }

    /// One RMSprop update on the examples at `indices`; returns their summed
    /// loss.
    pub fn train_batch(&mut self, split: &Split, indices: &[usize]) -> Result<f64> {
        let batch = split.batch(indices);
        let result = batch_loss_and_grads(self.cell.as_ref(), &self.params, &batch)?;
        self.optimizer.apply(&mut self.params, &result.grads)?;
        Ok(result.mean_loss * batch.len() as f64)
    }

    /// Shuffled minibatch RMSprop updates over `split`; the shuffle depends
    /// only on `(seed, epoch)`.
    pub fn run_epoch(
        &mut self,
        split: &Split,
        batch_size: usize,
        seed: u64,
        epoch: usize,
    ) -> Result<EpochPass> {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        for indices in batch_indices(split.len(), batch_size, seed, epoch as u64)? {
            loss_sum += self.train_batch(split, &indices)?;
        }
        Ok(EpochPass {
            train_loss: loss_sum / split.len() as f64,
            seconds: started.elapsed().as_secs_f64(),
        })
    }
}

/// Trains one model, streaming a metrics row per epoch.
pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    train_with(config, dataset, CellRegistry::builtin(), |_| {})
}

/// [`train`] with an explicit registry and a per-epoch callback.
///
/// Each epoch: shuffled minibatch RMSprop updates (timed), then a full
/// evaluation pass over the train and test splits (untimed). Non-finite
/// losses are recorded and training carries on.
pub fn train_with(
    config: &TrainConfig,
    dataset: &Dataset,
    registry: &CellRegistry,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    config.validate(registry)?;
    let train_split = prefix(&dataset.train, config.train_limit);
    let test_split = prefix(&dataset.test, config.test_limit);
    if train_split.is_empty() || test_split.is_empty() {
        return Err(Error::Consistency(
            "train and test splits must be nonempty".into(),
        ));
    }
    let mut model = Model::new(config, registry, train_split.width())?;
    let mut writer = config
        .metrics_path
        .as_deref()
        .map(MetricsWriter::create)
        .transpose()?;

    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let pass = model.run_epoch(&train_split, config.batch_size, config.seed, epoch)?;
        let row = EpochMetrics {
            epoch,
            train_acc: evaluate(model.cell.as_ref(), &model.params, &train_split)?,
            test_acc: evaluate(model.cell.as_ref(), &model.params, &test_split)?,
            train_loss: pass.train_loss,
            epoch_seconds: pass.seconds,
        };
        if let Some(w) = writer.as_mut() {
            w.write(&row)?;
        }
        on_epoch(&row);
        history.push(row);
    }
    Ok(TrainOutcome {
        metrics: history,
        param_count: model.param_count(),
        params: model.params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(epoch: usize, train: f64, test: f64) -> EpochMetrics {
        EpochMetrics {
            epoch,
            train_acc: train,
            test_acc: test,
            train_loss: 0.1,
            epoch_seconds: 1.0,
        }
    }

    #[test]
    fn best_of_single_row() {
        let b = best_of(&[row(1, 0.3, 0.4)]).unwrap();
        assert_eq!((b.train, b.test, b.test_epoch), (0.3, 0.4, 1));
    }

    #[test]
    fn best_of_takes_independent_maxima() {
        let rows = [row(1, 0.9, 0.5), row(2, 0.6, 0.9), row(3, 0.95, 0.7)];
        let b = best_of(&rows).unwrap();
        assert_eq!((b.train, b.test, b.test_epoch), (0.95, 0.9, 2));
    }

    #[test]
    fn best_of_empty_is_rejected() {
        assert!(best_of(&[]).is_err());
    }

    #[test]
    fn config_validation() {
        let reg = CellRegistry::builtin();
        assert!(TrainConfig::default().validate(reg).is_ok());
        let bad = TrainConfig {
            variant: "lstm9".into(),
            ..TrainConfig::default()
        };
        assert!(matches!(
            bad.validate(reg),
            Err(Error::UnknownVariant { .. })
        ));
        let bad = TrainConfig {
            eta: -1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate(reg).is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate(reg).is_err());
    }
}
