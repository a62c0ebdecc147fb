use std::fs;
use std::path::Path;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::eval::{evaluate, EvalReport};
use crate::data::{BatchSampler, FeatureWidths, Sample};
use crate::error::{Error, Result};
use crate::model::{loss, save_checkpoint, Dropout, ModelParams, Targets};
use crate::numerics::{adamw_step, OptimState, Scalar, SplitRng, Tape, Tensor};

/// Loss of one sample and its gradient for every parameter, in store order.
pub fn sample_gradients<T: Scalar>(
    model: &ModelParams<T>,
    sample: &Sample,
    lambda: f64,
    dropout: &mut Dropout<'_>,
) -> Result<(f64, Vec<Tensor<T>>)> {
    let mut tape = Tape::new();
    let p = model.bind(&mut tape);
    let v = tape.constant(sample.video.cast());
    let a = tape.constant(sample.asr.cast());
    let q = tape.constant(sample.query.cast());
    let out = model.forward(&mut tape, &p, v, a, q, dropout)?;
    let targets = Targets::<T>::from_labels(&sample.labels);
    let l = loss(&mut tape, out.p_start, out.p_end, out.m_2d, &targets, lambda)?;
    let value = tape.value(l).data()[0].as_f64();
    let mut grads = tape.backward(l)?;
    let per_param = p
        .0
        .iter()
        .zip(model.store.tensors())
        .map(|(&var, t)| grads.take(var).unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    Ok((value, per_param))
}

/// One line of the training log. Validation fields are present on the steps
/// where validation ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_recall_at_1_iou_0_5: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_recall_at_1_iou_0_7: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub last: ModelParams<T>,
    /// Model with the highest validation Recall@1 at IoU 0.7 (earliest on
    /// ties); the last model when no validation ran.
    pub best: ModelParams<T>,
    pub best_step: usize,
    pub log: Vec<StepLog>,
    /// Validation report of the last model, if a validation split was given.
    pub last_eval: Option<EvalReport>,
}

impl<T: Scalar> TrainOutcome<T> {
    pub fn write_log(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for entry in &self.log {
            out.push_str(&serde_json::to_string(entry).expect("log serializes"));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Writes `last.ckpt`, `best.ckpt` and `train_log.jsonl` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_checkpoint(&self.last, &dir.join("last.ckpt"))?;
        save_checkpoint(&self.best, &dir.join("best.ckpt"))?;
        self.write_log(&dir.join("train_log.jsonl"))
    }
}

/// Runs `config.max_steps` AdamW steps over `train`, validating on `val`
/// every `config.eval_every` steps and after the last step.
///
/// Per-sample gradients are computed in parallel and summed in batch order,
/// so results depend only on the seed and not on the thread count.
pub fn train<T: Scalar>(
    config: &TrainConfig,
    train: &[Sample],
    val: &[Sample],
    widths: FeatureWidths,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    for s in train.iter().chain(val) {
        if s.labels.clips != config.m {
            return Err(Error::Data(format!(
                "sample {} has {} clips, config m = {}",
                s.id, s.labels.clips, config.m
            )));
        }
    }
    let mut root = SplitRng::new(config.seed);
    let init_seed = root.next_u64();
    let mut sampler = BatchSampler::new(train.len(), root.split())?;
    let mut step_rng = root.split();

    let model_config = config.model_config(widths.video, widths.asr, widths.query);
    let mut model = ModelParams::<T>::init(model_config, init_seed)?;
    let mut state = OptimState::new(config.adamw(), model.store.tensors());
    let mut best: Option<(f64, usize, ModelParams<T>)> = None;
    let mut log = Vec::with_capacity(config.max_steps);
    let mut last_eval = None;

    for step in 1..=config.max_steps {
        let idx = sampler.next_batch(config.batch_size);
        let rngs: Vec<SplitRng> = idx.iter().map(|_| step_rng.split()).collect();
        let results = idx
            .par_iter()
            .zip(rngs)
            .map(|(&i, mut rng)| {
                let mut dropout = if config.dropout > 0.0 {
                    Dropout::train(config.dropout, &mut rng)
                } else {
                    Dropout::off()
                };
                sample_gradients(&model, &train[i], config.lambda, &mut dropout)
            })
            .collect::<Result<Vec<_>>>()?;

        let inv = T::of(1.0 / results.len() as f64);
        let mut loss_sum = 0.0;
        let mut grads: Vec<Tensor<T>> = model
            .store
            .tensors()
            .iter()
            .map(|t| Tensor::zeros(t.shape()))
            .collect();
        for (l, g) in &results {
            loss_sum += l;
            for (acc, gi) in grads.iter_mut().zip(g) {
                for (x, &y) in acc.data_mut().iter_mut().zip(gi.data()) {
                    *x = *x + y;
                }
            }
        }
        for acc in &mut grads {
            for x in acc.data_mut() {
                *x = *x * inv;
            }
        }
        let loss = loss_sum / results.len() as f64;
        let grads_finite = grads.iter().all(Tensor::all_finite);
        if !loss.is_finite() || !grads_finite {
            return Err(Error::NonFiniteLoss {
                step,
                ids: idx.iter().map(|&i| train[i].id.clone()).collect(),
            });
        }
        let lr = config.lr_at(step);
        state.config.lr = lr;
        adamw_step(model.store.tensors_mut(), &grads, &mut state)?;

        let mut entry = StepLog {
            step,
            loss,
            lr,
            val_recall_at_1_iou_0_5: None,
            val_recall_at_1_iou_0_7: None,
        };
        let due = step == config.max_steps || (config.eval_every > 0 && step % config.eval_every == 0);
        if due && !val.is_empty() {
            let report = evaluate(&model, val)?;
            let r07 = report.summary.recall_at_1_iou_0_7;
            entry.val_recall_at_1_iou_0_5 = Some(report.summary.recall_at_1_iou_0_5);
            entry.val_recall_at_1_iou_0_7 = Some(r07);
            if best.as_ref().map_or(true, |(b, _, _)| r07 > *b) {
                best = Some((r07, step, model.clone()));
            }
            if step == config.max_steps {
                last_eval = Some(report);
            }
        }
        log.push(entry);
    }

    let (best, best_step) = match best {
        Some((_, step, m)) => (m, step),
        None => (model.clone(), config.max_steps),
    };
    Ok(TrainOutcome {
        last: model,
        best,
        best_step,
        log,
        last_eval,
    })
}
