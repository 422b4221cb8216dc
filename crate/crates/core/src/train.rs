//! Full-batch training with Adam and validation-based model selection.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::csr::CsrMat;
use crate::dense::DenseMat;
use crate::error::{Error, Result};
use crate::model::{forward, predict, Mode, ModelConfig, ModelParams, ParamRole};
use crate::scalar::Scalar;
use crate::sparse::SparseAdj;
use crate::tape::Tape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Coupled L2: `weight_decay · w` is added to the gradient of every
    /// weight matrix (not batch-norm scale/shift) before the Adam moments.
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 0.0,
            epochs: 200,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "learning rate must be positive".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidArgument(
                "eval_every must be at least 1".into(),
            ));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(
                "weight decay must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMasks {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitMasks {
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let mut owner: Vec<Option<&'static str>> = vec![None; num_nodes];
        for (name, idx) in [
            ("train", &self.train),
            ("val", &self.val),
            ("test", &self.test),
        ] {
            for &i in idx {
                if i >= num_nodes {
                    return Err(Error::SplitIndexOutOfRange {
                        split: name,
                        index: i,
                        num_nodes,
                    });
                }
                if let Some(prev) = owner[i] {
                    return Err(Error::SplitOverlap {
                        index: i,
                        a: prev,
                        b: name,
                    });
                }
                owner[i] = Some(name);
            }
        }
        Ok(())
    }
}

/// Adam first/second moments for each trainable matrix.
#[derive(Debug, Clone)]
pub struct AdamState<T: Scalar = f64> {
    m: Vec<DenseMat<T>>,
    v: Vec<DenseMat<T>>,
    t: usize,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<'a>(shapes: impl IntoIterator<Item = &'a DenseMat<T>>) -> Self {
        let (m, v) = shapes
            .into_iter()
            .map(|p| {
                (
                    DenseMat::zeros(p.rows(), p.cols()),
                    DenseMat::zeros(p.rows(), p.cols()),
                )
            })
            .unzip();
        Self { m, v, t: 0 }
    }

    pub fn steps(&self) -> usize {
        self.t
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step<T: Scalar>(
    params: &mut [(ParamRole, &mut DenseMat<T>)],
    grads: &[&DenseMat<T>],
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(
            "adam_step",
            "parameter/gradient/state counts differ",
        ));
    }
    state.t += 1;
    let t = state.t as i32;
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let c1 = T::one() - b1;
    let c2 = T::one() - b2;
    let bias1 = T::one() - b1.powi(t);
    let bias2 = T::one() - b2.powi(t);
    let lr = T::from_f64(cfg.learning_rate);
    let eps = T::from_f64(cfg.eps);
    let wd = T::from_f64(cfg.weight_decay);
    for (k, ((role, p), g)) in params.iter_mut().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.m[k].shape() != p.shape() {
            return Err(Error::shape("adam_step", format!("parameter {k}")));
        }
        if !g.is_finite() {
            return Err(Error::NonFinite { op: "adam_step" });
        }
        let decay = if *role == ParamRole::Weight {
            wd
        } else {
            T::zero()
        };
        let m = state.m[k].as_mut_slice();
        let v = state.v[k].as_mut_slice();
        for (((w, &gi), mi), vi) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m).zip(v) {
            let gi = gi + decay * *w;
            *mi = b1 * *mi + c1 * gi;
            *vi = b2 * *vi + c2 * gi * gi;
            let mhat = *mi / bias1;
            let vhat = *vi / bias2;
            *w -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Fraction of `mask` rows whose argmax (lowest index on ties) equals the
/// label.
pub fn evaluate_accuracy<T: Scalar>(
    logits: &DenseMat<T>,
    labels: &[usize],
    mask: &[usize],
) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::EmptyMask("evaluate_accuracy"));
    }
    let correct = mask
        .iter()
        .filter(|&&r| logits.argmax_row(r) == labels[r])
        .count();
    Ok(correct as f64 / mask.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    /// 1-based epoch of the selected snapshot.
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub best_test_acc: f64,
    pub final_val_acc: f64,
    pub final_test_acc: f64,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// Trains a freshly initialised model. Returns the report and the
/// parameters of the best validation epoch.
pub fn train<T: Scalar>(
    adj: &SparseAdj<T>,
    x_init: &CsrMat<T>,
    labels: &[usize],
    masks: &SplitMasks,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(TrainReport, ModelParams<T>)> {
    cfg.validate()?;
    model_cfg.validate()?;
    masks.validate(adj.num_nodes())?;
    if labels.len() != adj.num_nodes() {
        return Err(Error::shape("train", "one label per node required"));
    }
    if masks.val.is_empty() {
        return Err(Error::EmptyMask("validation split"));
    }
    if let Some((node, &label)) = labels
        .iter()
        .enumerate()
        .find(|(_, &l)| l >= model_cfg.classes)
    {
        return Err(Error::LabelOutOfRange {
            node,
            label,
            classes: model_cfg.classes,
        });
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::<T>::init(model_cfg, &mut rng)?;
    let mut adam = AdamState::new(params.tensors().into_iter().map(|(_, p)| p));

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, f64, ModelParams<T>)> = None;
    let mut last_eval = (0.0, 0.0);
    let abort = |epoch: usize| {
        move |e: Error| match e {
            Error::NonFinite { op } => Error::NumericAbort {
                epoch,
                detail: format!("non-finite value in {op}"),
            },
            other => other,
        }
    };

    for epoch in 1..=cfg.epochs {
        let mut tape = Tape::new();
        let out = forward(
            &mut tape,
            adj,
            x_init,
            &mut params,
            model_cfg,
            Mode::Train,
            &mut rng,
        )
        .map_err(abort(epoch))?;
        let loss = tape
            .softmax_cross_entropy(out.logits, labels, &masks.train)
            .map_err(abort(epoch))?;
        let loss_value = tape.value(loss).item().as_f64();
        let mut grads = tape.backward(loss).map_err(abort(epoch))?;
        let grads: Vec<DenseMat<T>> = out
            .param_vars
            .iter()
            .map(|&v| grads.take(v).expect("every parameter has a gradient"))
            .collect();
        drop(tape);
        let grad_refs: Vec<&DenseMat<T>> = grads.iter().collect();
        adam_step(&mut params.tensors_mut(), &grad_refs, &mut adam, cfg).map_err(abort(epoch))?;

        let mut record = EpochRecord {
            epoch,
            loss: loss_value,
            val_acc: None,
        };
        if epoch % cfg.eval_every == 0 || epoch == cfg.epochs {
            let logits = predict(adj, x_init, &params, model_cfg).map_err(abort(epoch))?;
            let val = evaluate_accuracy(&logits, labels, &masks.val)?;
            let test = if masks.test.is_empty() {
                0.0
            } else {
                evaluate_accuracy(&logits, labels, &masks.test)?
            };
            record.val_acc = Some(val);
            last_eval = (val, test);
            if best.as_ref().is_none_or(|b| val > b.1) {
                best = Some((epoch, val, test, params.clone()));
            }
        }
        history.push(record);
    }

    let (best_epoch, best_val_acc, best_test_acc, best_params) =
        best.expect("final epoch is always evaluated");
    let report = TrainReport {
        history,
        best_epoch,
        best_val_acc,
        best_test_acc,
        final_val_acc: last_eval.0,
        final_test_acc: last_eval.1,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((report, best_params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EfiGnnConfig;
    use crate::sparse::{normalized_adjacency, EdgeList};

    fn weights(v: &[f64]) -> DenseMat {
        DenseMat::from_rows(&[v]).unwrap()
    }

    #[test]
    fn zero_gradient_no_decay_is_a_no_op() {
        let mut w = weights(&[1.0, -2.0]);
        let before = w.clone();
        let g = DenseMat::zeros(1, 2);
        let mut state = AdamState::new([&w]);
        let cfg = TrainConfig::default();
        for _ in 0..5 {
            adam_step(&mut [(ParamRole::Weight, &mut w)], &[&g], &mut state, &cfg).unwrap();
        }
        assert_eq!(w, before);
    }

    #[test]
    fn constant_gradient_moves_by_learning_rate() {
        // With a fixed gradient the bias-corrected moments equal g and g²,
        // so each step is lr·g/(|g|+eps).
        let mut w = weights(&[0.0, 0.0]);
        let g = weights(&[0.5, -3.0]);
        let mut state = AdamState::new([&w]);
        let cfg = TrainConfig {
            learning_rate: 0.01,
            ..Default::default()
        };
        for _ in 0..100 {
            adam_step(&mut [(ParamRole::Weight, &mut w)], &[&g], &mut state, &cfg).unwrap();
        }
        assert!((w.get(0, 0) + 1.0).abs() < 1e-6);
        assert!((w.get(0, 1) - 1.0).abs() < 1e-6);
        assert_eq!(state.steps(), 100);
    }

    #[test]
    fn decay_only_shrinks_weights_not_norm_params() {
        let mut w = weights(&[1.0, -1.0]);
        let mut gamma = weights(&[1.0, 1.0]);
        let g = DenseMat::zeros(1, 2);
        let mut state = AdamState::new([&w, &gamma]);
        let cfg = TrainConfig {
            learning_rate: 0.01,
            weight_decay: 0.1,
            ..Default::default()
        };
        let mut prev = w.get(0, 0);
        for _ in 0..50 {
            adam_step(
                &mut [(ParamRole::Weight, &mut w), (ParamRole::Norm, &mut gamma)],
                &[&g, &g],
                &mut state,
                &cfg,
            )
            .unwrap();
            let cur = w.get(0, 0);
            assert!(cur < prev && cur > 0.0);
            assert!((w.get(0, 1) + cur).abs() < 1e-15);
            prev = cur;
        }
        assert_eq!(gamma, weights(&[1.0, 1.0]));
    }

    #[test]
    fn accuracy_examples() {
        let logits = DenseMat::from_rows(&[[2.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(evaluate_accuracy(&logits, &[0, 1], &[0, 1]).unwrap(), 1.0);
        let uniform = DenseMat::<f64>::zeros(3, 4);
        assert_eq!(
            evaluate_accuracy(&uniform, &[0, 0, 0], &[0, 1, 2]).unwrap(),
            1.0
        );
        assert!(evaluate_accuracy(&uniform, &[0, 0, 0], &[]).is_err());
    }

    #[test]
    fn masks_are_checked() {
        let m = SplitMasks {
            train: vec![0, 1],
            val: vec![1],
            test: vec![],
        };
        assert!(matches!(
            m.validate(3),
            Err(Error::SplitOverlap { index: 1, .. })
        ));
        let m = SplitMasks {
            train: vec![5],
            val: vec![],
            test: vec![],
        };
        assert!(matches!(
            m.validate(3),
            Err(Error::SplitIndexOutOfRange { .. })
        ));
    }

    #[test]
    fn one_epoch_is_one_step() {
        let adj = normalized_adjacency(&EdgeList::new(2, vec![(0, 1)]).unwrap(), true).unwrap();
        let x = CsrMat::from_dense(&DenseMat::identity(2));
        let cfg = ModelConfig {
            in_features: 2,
            classes: 2,
            efi: Some(EfiGnnConfig {
                num_layers: 1,
                units: 2,
                dropout: 0.0,
                include_block0: true,
            }),
            gcn: None,
        };
        let masks = SplitMasks {
            train: vec![0],
            val: vec![1],
            test: vec![],
        };
        let tc = TrainConfig {
            epochs: 1,
            ..Default::default()
        };
        let (report, _) = train(&adj, &x, &[0, 1], &masks, &cfg, &tc).unwrap();
        assert_eq!(report.history.len(), 1);
        assert_eq!(report.best_epoch, 1);
        assert!(train(
            &adj,
            &x,
            &[0, 1],
            &masks,
            &cfg,
            &TrainConfig { epochs: 0, ..tc }
        )
        .is_err());
    }
}
