//! The dual-flow training loop.
//!
//! Per mini-batch, every sample goes through:
//!
//! 1. a forward pass on the original image giving `L^da` (no backprop),
//! 2. `d^da = difficulty(bank, L^da)` against the bank as it stood before
//!    the batch,
//! 3. a momentum write of `L^da` into the sample's bank slot,
//! 4. RGB shuffle with probability `1 − d^da`,
//! 5. a forward pass on the (possibly) augmented image giving `L^no`,
//! 6. `d^no = difficulty(bank, L^no)`, reading the bank after step 3,
//! 7. the gate `w = [t_easy < d^no < t_hard]`,
//! 8. one optimizer step on `(1/B)·Σ w_i·L^no_i`, skipped when all `w = 0`,
//! 9. the capability diagnostic on the batch-mean `L^no`.
//!
//! The [`Mode`] decides which stages run; see [`Mode::uses_bank`],
//! [`Mode::degree`] and [`Mode::gated`]. Only `L^da` is ever written to the
//! bank.

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::augment::{maybe_augment, ColorJitter};
use crate::cli::config::{Mode, TrainConfig};
use crate::error::{Error, Result};
use crate::lossbank::LossBank;
use crate::numerics::{
    argmax_rows, backward_from, cross_entropy, forward, forward_cached, poly_lr, sgd_step, Matrix, OptimizerState,
    ParameterSet,
};
use crate::rng::{stream, Purpose};
use crate::scheduler::{no_gate, CapabilityTracker, GateWeight};
use crate::synthdata::{generate_dataset, DatasetSplit, Sample};

mod checkpoint;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

/// One sample's pass through one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub iter: usize,
    pub epoch: usize,
    pub sample_id: u32,
    /// Original-image loss; absent in modes without the bank.
    pub loss_da: Option<f64>,
    /// Loss of the image the network trained on.
    pub loss_no: f64,
    pub d_da: Option<f64>,
    pub d_no: Option<f64>,
    pub degree: f64,
    pub applied: bool,
    pub w: f64,
    pub m_c: f64,
    pub lr: f64,
}

/// Per-iteration aggregate of the batch's records.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationSummary {
    pub iter: usize,
    pub epoch: usize,
    pub batch: usize,
    /// Unweighted batch mean of `L^no`; the loss that drives `m_c`.
    pub mean_loss: f64,
    pub mean_degree: f64,
    pub applied_rate: f64,
    pub admitted_rate: f64,
    pub m_c: f64,
    pub lr: f64,
    pub stepped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainAccuracy {
    pub domain: String,
    pub domain_id: u16,
    pub is_source: bool,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: TrainConfig,
    pub params: ParameterSet,
    pub accuracies: Vec<DomainAccuracy>,
    pub metrics: Vec<MetricsRecord>,
    pub iterations: Vec<IterationSummary>,
    pub bank: LossBank,
    pub seconds: f64,
}

impl RunResult {
    pub fn source_accuracy(&self) -> f64 {
        self.accuracies.iter().find(|a| a.is_source).map_or(f64::NAN, |a| a.accuracy)
    }

    pub fn mean_target_accuracy(&self) -> f64 {
        let t: Vec<f64> = self.accuracies.iter().filter(|a| !a.is_source).map(|a| a.accuracy).collect();
        t.iter().sum::<f64>() / t.len() as f64
    }
}

/// Fraction of argmax-correct predictions.
pub fn evaluate(params: &ParameterSet, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty sample list"));
    }
    let mut correct = 0usize;
    for chunk in samples.chunks(256) {
        let x = batch_matrix(chunk.iter().map(|s| s.image.data()))?;
        let pred = argmax_rows(&forward(params, &x)?);
        correct += pred.iter().zip(chunk).filter(|(p, s)| **p == s.label).count();
    }
    Ok(correct as f64 / samples.len() as f64)
}

fn batch_matrix<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Result<Matrix> {
    let rows: Vec<&[f64]> = rows.collect();
    Matrix::from_rows(&rows)
}

fn check_losses(losses: &[f64], iter: usize, stage: &'static str) -> Result<()> {
    match losses.iter().find(|l| !l.is_finite()) {
        Some(&value) => Err(Error::Divergence { iter, stage, value }),
        None => Ok(()),
    }
}

/// Training state for one run.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    data: DatasetSplit,
    params: ParameterSet,
    bank: LossBank,
    tracker: CapabilityTracker,
    opt: OptimizerState,
    jitter: Option<ColorJitter>,
    epoch: usize,
    iter: usize,
    metrics: Vec<MetricsRecord>,
    iterations: Vec<IterationSummary>,
    elapsed: f64,
}

impl Trainer {
    /// Generate the dataset and initialize parameters from the run seed.
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut data_cfg = cfg.data.clone();
        data_cfg.seed = cfg.seed;
        let data = generate_dataset(&data_cfg)?;
        Self::with_dataset(cfg, data)
    }

    pub fn with_dataset(cfg: &TrainConfig, data: DatasetSplit) -> Result<Self> {
        let mut rng = stream(cfg.seed, Purpose::Init, &[]);
        let params = ParameterSet::init(&cfg.layer_sizes(), &mut rng)?;
        Self::with_params(cfg, data, params)
    }

    /// Start from explicit parameters.
    pub fn with_params(cfg: &TrainConfig, data: DatasetSplit, params: ParameterSet) -> Result<Self> {
        cfg.validate()?;
        if params.sizes() != cfg.layer_sizes() {
            return Err(Error::shape(
                "Trainer::with_params",
                format!("{:?}", cfg.layer_sizes()),
                format!("{:?}", params.sizes()),
            ));
        }
        if data.train.len() != cfg.data.n_train {
            return Err(Error::invalid(format!(
                "dataset has {} training samples, config says {}",
                data.train.len(),
                cfg.data.n_train
            )));
        }
        let bank = LossBank::new(data.train.len(), cfg.alpha(), cfg.lambda)?;
        let opt =
            OptimizerState::new(cfg.base_lr, cfg.momentum, cfg.weight_decay, cfg.poly_power, cfg.total_iters() as u64)?;
        let jitter = if cfg.mode == Mode::StrongDa {
            Some(ColorJitter::new(ColorJitter::MAX_AMPLITUDE)?)
        } else if cfg.jitter_amplitude > 0.0 {
            Some(ColorJitter::new(cfg.jitter_amplitude)?)
        } else {
            None
        };
        Ok(Trainer {
            cfg: cfg.clone(),
            data,
            params,
            bank,
            tracker: CapabilityTracker::new(),
            opt,
            jitter,
            epoch: 0,
            iter: 0,
            metrics: Vec::new(),
            iterations: Vec::new(),
            elapsed: 0.0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn bank(&self) -> &LossBank {
        &self.bank
    }

    pub fn tracker(&self) -> &CapabilityTracker {
        &self.tracker
    }

    pub fn dataset(&self) -> &DatasetSplit {
        &self.data
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn iterations_done(&self) -> usize {
        self.iter
    }

    pub fn metrics(&self) -> &[MetricsRecord] {
        &self.metrics
    }

    pub fn iterations(&self) -> &[IterationSummary] {
        &self.iterations
    }

    /// Sample visiting order of `epoch`, a fresh permutation per epoch.
    pub fn epoch_order(&self, epoch: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.data.train.len()).collect();
        order.shuffle(&mut stream(self.cfg.seed, Purpose::Order, &[epoch as u64]));
        order
    }

    /// Run the next epoch.
    pub fn run_epoch(&mut self) -> Result<()> {
        if self.epoch >= self.cfg.epochs {
            return Err(Error::invalid(format!("all {} epochs already run", self.cfg.epochs)));
        }
        let start = Instant::now();
        let order = self.epoch_order(self.epoch);
        for ids in order.chunks(self.cfg.batch_size) {
            self.train_batch(ids)?;
        }
        self.epoch += 1;
        self.elapsed += start.elapsed().as_secs_f64();
        Ok(())
    }

    /// One iteration over the training samples at positions `ids`.
    pub fn train_batch(&mut self, ids: &[usize]) -> Result<Vec<MetricsRecord>> {
        let mode = self.cfg.mode;
        let (iter, epoch) = (self.iter, self.epoch);
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.data.train.len()) {
            return Err(Error::IdOutOfRange { id: bad, len: self.data.train.len() });
        }
        let samples: Vec<&Sample> = ids.iter().map(|&i| &self.data.train[i]).collect();
        let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
        let lr = poly_lr(&self.opt)?;

        // DA flow: original images, no backprop
        let (loss_da, d_da) = if mode.uses_bank() {
            let x = batch_matrix(samples.iter().map(|s| s.image.data()))?;
            let losses = cross_entropy(&forward(&self.params, &x)?, &labels)?;
            check_losses(&losses, iter, "loss_da")?;
            let d = losses.iter().map(|&l| self.bank.difficulty(l).map(|d| d.value())).collect::<Result<Vec<_>>>()?;
            for (s, &l) in samples.iter().zip(&losses) {
                self.bank.update(s.id as usize, l)?;
            }
            (Some(losses), Some(d))
        } else {
            (None, None)
        };

        let mut augmented = Vec::with_capacity(samples.len());
        let mut decisions = Vec::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            let degree = mode.degree(d_da.as_ref().map(|d| d[i]));
            let mut rng = stream(self.cfg.seed, Purpose::Augment, &[epoch as u64, s.id as u64]);
            let (mut img, dec) = maybe_augment(&s.image, degree, &mut rng)?;
            if let (Some(jitter), true) = (self.jitter, dec.applied) {
                let scaled = if mode == Mode::StrongDa { jitter } else { ColorJitter::new(jitter.amplitude * degree)? };
                scaled.apply(&mut img, &mut rng);
            }
            augmented.push(img);
            decisions.push(dec);
        }

        // NO flow: train on the augmented images
        let x = batch_matrix(augmented.iter().map(|im| im.data()))?;
        let acts = forward_cached(&self.params, &x)?;
        let loss_no = cross_entropy(acts.logits(), &labels)?;
        check_losses(&loss_no, iter, "loss_no")?;
        let d_no = if mode.uses_bank() {
            Some(loss_no.iter().map(|&l| self.bank.difficulty(l).map(|d| d.value())).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        let weights: Vec<f64> = (0..samples.len())
            .map(|i| {
                if mode.gated() {
                    let d = crate::lossbank::DifficultyDegree::new(d_no.as_ref().unwrap()[i]).expect("rank in [0, 1]");
                    no_gate(d, self.cfg.thresholds).value()
                } else {
                    GateWeight::OPEN.value()
                }
            })
            .collect();

        let stepped = weights.iter().any(|&w| w > 0.0);
        if stepped {
            let grad = backward_from(&self.params, &acts, &labels, &weights)?;
            sgd_step(&mut self.params, &grad, &mut self.opt)?;
            if !self.params.is_finite() {
                return Err(Error::Divergence { iter, stage: "parameters", value: f64::NAN });
            }
        } else {
            self.opt.skip()?;
        }

        let n = samples.len() as f64;
        let mean_loss = loss_no.iter().sum::<f64>() / n;
        let m_c = self.tracker.capability(mean_loss)?;

        let records: Vec<MetricsRecord> = samples
            .iter()
            .enumerate()
            .map(|(i, s)| MetricsRecord {
                iter,
                epoch,
                sample_id: s.id,
                loss_da: loss_da.as_ref().map(|l| l[i]),
                loss_no: loss_no[i],
                d_da: d_da.as_ref().map(|d| d[i]),
                d_no: d_no.as_ref().map(|d| d[i]),
                degree: decisions[i].degree,
                applied: decisions[i].applied,
                w: weights[i],
                m_c,
                lr,
            })
            .collect();
        self.iterations.push(IterationSummary {
            iter,
            epoch,
            batch: samples.len(),
            mean_loss,
            mean_degree: decisions.iter().map(|d| d.degree).sum::<f64>() / n,
            applied_rate: decisions.iter().filter(|d| d.applied).count() as f64 / n,
            admitted_rate: weights.iter().sum::<f64>() / n,
            m_c,
            lr,
            stepped,
        });
        self.metrics.extend(records.iter().cloned());
        self.iter += 1;
        Ok(records)
    }

    /// Run the remaining epochs and evaluate on every eval domain.
    pub fn run(mut self) -> Result<RunResult> {
        while self.epoch < self.cfg.epochs {
            self.run_epoch()?;
        }
        self.finish()
    }

    /// Evaluate the current parameters without further training.
    pub fn finish(self) -> Result<RunResult> {
        let start = Instant::now();
        let accuracies = self
            .data
            .eval
            .iter()
            .map(|d| {
                Ok(DomainAccuracy {
                    domain: d.spec.name.clone(),
                    domain_id: d.spec.id,
                    is_source: d.spec.is_source(),
                    accuracy: evaluate(&self.params, &d.samples)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RunResult {
            config: self.cfg,
            params: self.params,
            accuracies,
            metrics: self.metrics,
            iterations: self.iterations,
            bank: self.bank,
            seconds: self.elapsed + start.elapsed().as_secs_f64(),
        })
    }
}

/// Generate the dataset, train, evaluate.
pub fn train(cfg: &TrainConfig) -> Result<RunResult> {
    Trainer::new(cfg)?.run()
}

/// Single-sample form of [`Trainer::train_batch`].
pub fn train_step(trainer: &mut Trainer, sample_index: usize) -> Result<MetricsRecord> {
    Ok(trainer.train_batch(&[sample_index])?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(mode: Mode) -> TrainConfig {
        let mut cfg = TrainConfig::new(mode);
        cfg.data.n_train = 64;
        cfg.data.n_eval = 16;
        cfg.epochs = 2;
        cfg.batch_size = 16;
        cfg.hidden = vec![8];
        cfg.base_lr = 0.05;
        cfg
    }

    #[test]
    fn zero_epochs_returns_untrained_network() {
        let mut cfg = tiny(Mode::Full);
        cfg.epochs = 0;
        let t = Trainer::new(&cfg).unwrap();
        let init = t.params().clone();
        let r = t.run().unwrap();
        assert_eq!(r.params, init);
        assert!(r.metrics.is_empty());
        assert_eq!(r.accuracies.len(), 4);
    }

    #[test]
    fn baseline_never_augments_or_gates() {
        let r = train(&tiny(Mode::Baseline)).unwrap();
        assert_eq!(r.iterations.len(), 8);
        assert!(r.metrics.iter().all(|m| !m.applied && m.w == 1.0));
        assert!(r.metrics.iter().all(|m| m.loss_da.is_none() && m.d_no.is_none()));
        assert!(r.bank.seen().iter().all(|s| !s));
    }

    #[test]
    fn first_full_step_against_uniform_bank_always_augments() {
        let cfg = tiny(Mode::Full);
        let data = generate_dataset(&cfg.data).unwrap();
        let zero = ParameterSet::zeros(&cfg.layer_sizes()).unwrap();
        let mut t = Trainer::with_params(&cfg, data, zero).unwrap();
        let rec = train_step(&mut t, 5).unwrap();
        // all-zero logits give exactly ln 4, tied with every bank entry
        assert_eq!(rec.loss_da, Some(4f64.ln()));
        assert_eq!(rec.d_da, Some(0.0));
        assert_eq!(rec.degree, 1.0);
        assert!(rec.applied);
    }

    #[test]
    fn closed_gate_leaves_parameters_bit_identical() {
        let mut cfg = tiny(Mode::NoOnlyNoAug);
        // nothing lies strictly inside (0.999, 1)
        cfg.thresholds = crate::scheduler::GateThresholds::new(0.999, 1.0).unwrap();
        let mut t = Trainer::new(&cfg).unwrap();
        let before = t.params().clone();
        let recs = t.train_batch(&[0, 1, 2, 3]).unwrap();
        assert!(recs.iter().all(|r| r.w == 0.0));
        assert_eq!(t.params(), &before);
        assert!(!t.iterations()[0].stepped);
    }

    #[test]
    fn bank_receives_only_original_image_losses() {
        let cfg = tiny(Mode::Full);
        let r = train(&cfg).unwrap();
        let mut expected = vec![cfg.alpha(); cfg.data.n_train];
        let mut writes = vec![0usize; cfg.data.n_train];
        for m in &r.metrics {
            let id = m.sample_id as usize;
            expected[id] = cfg.lambda * expected[id] + (1.0 - cfg.lambda) * m.loss_da.unwrap();
            writes[id] += 1;
        }
        assert!(writes.iter().all(|&w| w == cfg.epochs));
        assert_eq!(r.bank.values(), &expected[..]);
    }

    #[test]
    fn same_seed_same_result() {
        let a = train(&tiny(Mode::Full)).unwrap();
        let b = train(&tiny(Mode::Full)).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.accuracies, b.accuracies);
    }

    #[test]
    fn metrics_stay_in_range() {
        for mode in Mode::ABLATION {
            let r = train(&tiny(mode)).unwrap();
            for m in &r.metrics {
                for v in [m.d_da, m.d_no].into_iter().flatten() {
                    assert!((0.0..=1.0).contains(&v));
                }
                assert!((0.0..=1.0).contains(&m.degree));
                assert!((0.0..=1.0).contains(&m.m_c));
                assert!(m.w == 0.0 || m.w == 1.0);
            }
        }
    }

    #[test]
    fn diverging_learning_rate_is_reported() {
        let mut cfg = tiny(Mode::Baseline);
        cfg.base_lr = 1e150;
        cfg.momentum = 0.0;
        let err = train(&cfg).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
        assert_eq!(err.exit_code(), 4);
    }
}
