//! Training loop: AdamW, global-norm gradient clipping, epoch-level early
//! stopping with best-epoch restoration.
//!
//! One `fit` call owns its model exclusively; fits for different configs
//! or seeds are independent and can run on separate threads. Identical
//! (model, dataset, train seed) triples produce bitwise-identical trained
//! parameters: batch order, dropout, and every accumulation are driven by
//! explicit seeded generators and fixed iteration orders.

use crate::data::{Split, TabularDataset, TaskKind};
use crate::error::Error;
use crate::model::{member_loss, EnsembleModel};
use crate::math::Rng;
use crate::Real;

use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

/// Optimization hyperparameters.
///
/// Defaults: batch size 256, at most 300 epochs, clipping at global norm
/// 1.0, patience 16 epochs, AdamW with betas (0.9, 0.999) and eps 1e-8.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: Real,
    pub weight_decay: Real,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub clip_norm: Real,
    pub patience: usize,
    pub beta1: Real,
    pub beta2: Real,
    pub eps: Real,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            weight_decay: 0.0,
            batch_size: 256,
            max_epochs: 300,
            clip_norm: 1.0,
            patience: 16,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument("max_epochs must be positive".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::InvalidArgument("clip_norm must be positive".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidArgument("patience must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidArgument("betas must lie in [0, 1)".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidArgument("eps must be positive".into()));
        }
        Ok(())
    }
}

/// First/second moment estimates, flat over the model's canonical
/// parameter order.
#[derive(Debug, Clone)]
pub struct AdamState {
    t: u64,
    m: Vec<Real>,
    v: Vec<Real>,
}

impl AdamState {
    pub fn new(param_len: usize) -> Self {
        AdamState {
            t: 0,
            m: vec![0.0; param_len],
            v: vec![0.0; param_len],
        }
    }
}

/// One decoupled-weight-decay Adam step over all model parameters.
///
/// Weight decay multiplies parameters by `1 - lr * weight_decay` before
/// the adaptive update (decay is applied to every parameter, biases
/// included), then the bias-corrected moment step
/// `theta -= lr * m_hat / (sqrt(v_hat) + eps)` follows.
pub fn adamw_step(
    model: &mut EnsembleModel,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<(), Error> {
    let expected = state.m.len();
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let c2 = 1.0 - cfg.beta2.powi(state.t as i32);
    let decay = 1.0 - cfg.lr * cfg.weight_decay;
    let mut cursor = 0usize;
    let mut overrun = false;
    model.for_each_param_mut(&mut |p, g| {
        if cursor + p.len() > expected {
            overrun = true;
            return;
        }
        let m = &mut state.m[cursor..cursor + p.len()];
        let v = &mut state.v[cursor..cursor + p.len()];
        for i in 0..p.len() {
            p[i] *= decay;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        cursor += p.len();
    });
    if overrun || cursor != expected {
        return Err(Error::InvalidArgument(format!(
            "optimizer state sized for {expected} parameters does not match the model"
        )));
    }
    Ok(())
}

/// Scale all gradients by `max_norm / norm` when the global L2 norm
/// exceeds `max_norm`. Returns the post-clip global norm, recomputed from
/// the scaled gradients when scaling happened.
pub fn clip_gradients(model: &mut EnsembleModel, max_norm: Real) -> Result<Real, Error> {
    if !(max_norm > 0.0) {
        return Err(Error::InvalidArgument("max_norm must be positive".into()));
    }
    let mut sq = 0.0;
    model.for_each_param_mut(&mut |_, g| {
        for x in g.iter() {
            sq += x * x;
        }
    });
    let norm = sq.sqrt();
    if norm <= max_norm {
        return Ok(norm);
    }
    let scale = max_norm / norm;
    let mut sq = 0.0;
    model.for_each_param_mut(&mut |_, g| {
        for x in g.iter_mut() {
            *x *= scale;
            sq += *x * *x;
        }
    });
    Ok(sq.sqrt())
}

/// Outcome of a [`fit`] call.
///
/// `train_loss[e]` and `val_metric[e]` belong to epoch `e + 1`; epochs are
/// 1-based in `best_epoch`/`stopped_epoch`. The validation metric is RMSE
/// in the original target scale for regression (minimized) and ensemble
/// accuracy for classification (maximized); `best_val_metric` is its
/// optimum over recorded epochs and the returned model carries the
/// parameters of `best_epoch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<Real>,
    pub val_metric: Vec<Real>,
    pub best_epoch: usize,
    pub best_val_metric: Real,
    pub stopped_epoch: usize,
    pub wall_time_s: Real,
    /// Largest post-clip global gradient norm seen during training.
    pub max_clipped_grad_norm: Real,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.stopped_epoch
    }

    /// Write the per-epoch history as JSON lines (one record per epoch).
    pub fn save_jsonl(&self, path: &Path) -> Result<(), Error> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for e in 0..self.train_loss.len() {
            let record = serde_json::json!({
                "epoch": e + 1,
                "train_loss": self.train_loss[e],
                "val_metric": self.val_metric[e],
                "is_best": e + 1 == self.best_epoch,
            });
            writeln!(f, "{record}").map_err(|e| Error::Io(e.to_string()))?;
        }
        Ok(())
    }
}

fn improves(task: TaskKind, candidate: Real, best: Real) -> bool {
    match task {
        TaskKind::Regression => candidate < best,
        TaskKind::Binary | TaskKind::Multiclass(_) => candidate > best,
    }
}

/// Ensemble validation metric on a split: original-scale RMSE for
/// regression, argmax accuracy (lowest index on ties) for classification.
pub fn split_metric(
    model: &EnsembleModel,
    dataset: &TabularDataset,
    split: Split,
    batch_size: usize,
) -> Result<Real, Error> {
    let idx = dataset.indices(split);
    if idx.is_empty() {
        return Err(Error::EmptySplit(split.name()));
    }
    let mut se = 0.0;
    let mut correct = 0usize;
    for chunk in idx.chunks(batch_size.max(1)) {
        let batch = dataset.gather(chunk);
        let targets = dataset.gather_targets(chunk);
        let pred = model.predict(&batch)?;
        match (&targets, dataset.task) {
            (crate::data::Targets::Regression(ys), TaskKind::Regression) => {
                for (i, y) in ys.iter().enumerate() {
                    let (p, y) = match &dataset.target_scaler {
                        Some(s) => (s.unscale(pred.ensemble.get(i, 0)), s.unscale(*y)),
                        None => (pred.ensemble.get(i, 0), *y),
                    };
                    se += (p - y) * (p - y);
                }
            }
            (crate::data::Targets::Classes(ys), _) => {
                for (i, y) in ys.iter().enumerate() {
                    let row = pred.ensemble.row(i);
                    let mut arg = 0;
                    for (j, v) in row.iter().enumerate() {
                        if *v > row[arg] {
                            arg = j;
                        }
                    }
                    if arg == *y {
                        correct += 1;
                    }
                }
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "dataset targets do not match its task".into(),
                ))
            }
        }
    }
    Ok(match dataset.task {
        TaskKind::Regression => (se / idx.len() as Real).sqrt(),
        _ => correct as Real / idx.len() as Real,
    })
}

/// Train `model` on the dataset's train split, early-stopping on the val
/// split. See [`fit_with_hook`].
pub fn fit(
    model: &mut EnsembleModel,
    dataset: &TabularDataset,
    cfg: &TrainConfig,
) -> Result<TrainReport, Error> {
    fit_with_hook(model, dataset, cfg, |_, _| Ok(()))
}

/// [`fit`] with a per-epoch observer called after each epoch's validation
/// pass (and before best-epoch restoration), receiving the 1-based epoch
/// and the live model.
///
/// Epoch loop: mini-batches of `batch_size` over a fresh seeded shuffle of
/// the train split, member-wise loss, backward, global-norm clip, AdamW.
/// After each epoch the validation metric decides early stopping: training
/// stops once `patience` consecutive epochs fail to strictly improve on
/// the best recorded value, and the best epoch's parameters are restored
/// into `model`. Regression datasets are expected to carry standardized
/// targets (see `TabularDataset::standardize`); the validation RMSE is
/// computed in the original scale either way.
pub fn fit_with_hook(
    model: &mut EnsembleModel,
    dataset: &TabularDataset,
    cfg: &TrainConfig,
    mut hook: impl FnMut(usize, &EnsembleModel) -> Result<(), Error>,
) -> Result<TrainReport, Error> {
    cfg.validate()?;
    let start = Instant::now();
    let train_idx = dataset.indices(Split::Train);
    if train_idx.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if dataset.indices(Split::Val).is_empty() {
        return Err(Error::EmptySplit("val"));
    }
    let mut root = Rng::new(cfg.seed);
    let mut shuffle_rng = root.fork();
    let mut dropout_rng = root.fork();
    let mut state = AdamState::new(model.param_len());

    let mut train_loss = Vec::new();
    let mut val_metric = Vec::new();
    let mut best: Option<(usize, Real, EnsembleModel)> = None;
    let mut since_improve = 0usize;
    let mut stopped_epoch = 0usize;
    let mut max_clipped = 0.0_f64;

    let mut order: Vec<usize> = train_idx.to_vec();
    for epoch in 1..=cfg.max_epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = dataset.gather(chunk);
            let targets = dataset.gather_targets(chunk);
            let (outs, cache) = model.forward(&batch, true, &mut dropout_rng)?;
            let (loss, grads) = member_loss(&outs, &targets, dataset.task)?;
            loss_sum += loss * chunk.len() as Real;
            model.zero_grads();
            model.backward(&cache.expect("training forward caches"), &grads)?;
            let norm = clip_gradients(model, cfg.clip_norm)?;
            max_clipped = max_clipped.max(norm);
            adamw_step(model, &mut state, cfg)?;
        }
        train_loss.push(loss_sum / order.len() as Real);
        let metric = split_metric(model, dataset, Split::Val, cfg.batch_size)?;
        val_metric.push(metric);
        hook(epoch, model)?;

        let improved = match &best {
            None => true,
            Some((_, b, _)) => improves(dataset.task, metric, *b),
        };
        if improved {
            best = Some((epoch, metric, model.clone()));
            since_improve = 0;
        } else {
            since_improve += 1;
        }
        stopped_epoch = epoch;
        if since_improve >= cfg.patience {
            break;
        }
    }

    let (best_epoch, best_val_metric, best_model) = best.expect("at least one epoch ran");
    *model = best_model;
    Ok(TrainReport {
        train_loss,
        val_metric,
        best_epoch,
        best_val_metric,
        stopped_epoch,
        wall_time_s: start.elapsed().as_secs_f64(),
        max_clipped_grad_norm: max_clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, SyntheticKind};
    use crate::layers::{AdapterKind, PleEmbedding};
    use crate::model::ModelConfig;

    fn small_model(
        dataset: &TabularDataset,
        variant: AdapterKind,
        sigma: Real,
        hidden: usize,
        seed: u64,
    ) -> EnsembleModel {
        let embedding =
            PleEmbedding::fit(&dataset.train_numeric_columns(), 8, vec![]).unwrap();
        EnsembleModel::init(
            ModelConfig {
                task: dataset.task,
                members: 4,
                rank: 2,
                sigma_init: sigma,
                blocks: 2,
                hidden,
                p_drop: 0.0,
                variant,
                n_bins: 8,
                seed,
            },
            embedding,
        )
        .unwrap()
    }

    #[test]
    fn adamw_zero_grad_no_decay_is_identity() {
        let ds = make_synthetic(SyntheticKind::LinearRegression, 50, 1).unwrap();
        let mut model = small_model(&ds, AdapterKind::MultiplicativeLowRank, 0.5, 6, 2);
        let before = model.clone();
        let mut state = AdamState::new(model.param_len());
        model.zero_grads();
        adamw_step(&mut model, &mut state, &TrainConfig::default()).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn adamw_first_step_moves_by_lr() {
        // Fresh state, g = 1 everywhere: bias-corrected step is
        // lr / (1 + eps), i.e. approximately lr.
        let ds = make_synthetic(SyntheticKind::LinearRegression, 50, 1).unwrap();
        let mut model = small_model(&ds, AdapterKind::AdditiveLowRank, 0.5, 6, 2);
        let before = model.clone();
        let mut state = AdamState::new(model.param_len());
        model.zero_grads();
        model.for_each_param_mut(&mut |_, g| g.fill(1.0));
        let cfg = TrainConfig {
            lr: 0.1,
            ..TrainConfig::default()
        };
        adamw_step(&mut model, &mut state, &cfg).unwrap();
        let mut got = Vec::new();
        model.for_each_param_mut(&mut |p, _| got.extend_from_slice(p));
        let mut want = Vec::new();
        let mut b = before;
        b.for_each_param_mut(&mut |p, _| want.extend_from_slice(p));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - (w - 0.1)).abs() < 2e-9, "{g} vs {}", w - 0.1);
        }
    }

    #[test]
    fn adamw_decay_only_scales_parameters() {
        // g = 0, lr = 0.1, wd = 0.1: theta = 1 becomes 0.99 exactly.
        let ds = make_synthetic(SyntheticKind::LinearRegression, 50, 1).unwrap();
        let mut model = small_model(&ds, AdapterKind::Rank1Mask, 0.5, 6, 2);
        model.for_each_param_mut(&mut |p, g| {
            p.fill(1.0);
            g.fill(0.0);
        });
        let mut state = AdamState::new(model.param_len());
        let cfg = TrainConfig {
            lr: 0.1,
            weight_decay: 0.1,
            ..TrainConfig::default()
        };
        adamw_step(&mut model, &mut state, &cfg).unwrap();
        model.for_each_param_mut(&mut |p, _| {
            for x in p.iter() {
                assert_eq!(*x, 0.99);
            }
        });
    }

    #[test]
    fn clip_leaves_small_gradients_alone_and_scales_large_ones() {
        let ds = make_synthetic(SyntheticKind::LinearRegression, 50, 1).unwrap();
        let mut model = small_model(&ds, AdapterKind::MultiplicativeLowRank, 0.5, 6, 2);
        // All-zero gradients: untouched, norm 0.
        model.zero_grads();
        assert_eq!(clip_gradients(&mut model, 1.0).unwrap(), 0.0);
        // Two entries (3, 4) and the rest zero: norm 5, clipped to (0.6, 0.8).
        let mut slot = 0;
        model.for_each_param_mut(&mut |_, g| {
            for x in g.iter_mut() {
                *x = match slot {
                    0 => 3.0,
                    1 => 4.0,
                    _ => 0.0,
                };
                slot += 1;
            }
        });
        let norm = clip_gradients(&mut model, 1.0).unwrap();
        assert!((norm - 1.0).abs() < 1e-12);
        let mut seen = Vec::new();
        model.for_each_param_mut(&mut |_, g| seen.extend_from_slice(g));
        assert!((seen[0] - 0.6).abs() < 1e-15);
        assert!((seen[1] - 0.8).abs() < 1e-15);
        // Norm below the threshold: bitwise unchanged.
        model.for_each_param_mut(&mut |_, g| g.fill(0.0));
        let mut first = true;
        model.for_each_param_mut(&mut |_, g| {
            if first {
                g[0] = 0.5;
                first = false;
            }
        });
        assert_eq!(clip_gradients(&mut model, 1.0).unwrap(), 0.5);
        let mut seen = Vec::new();
        model.for_each_param_mut(&mut |_, g| seen.extend_from_slice(g));
        assert_eq!(seen[0], 0.5);
    }

    #[test]
    fn single_epoch_report_has_length_one() {
        let mut ds = make_synthetic(SyntheticKind::LinearRegression, 80, 3).unwrap();
        ds.standardize().unwrap();
        let mut model = small_model(&ds, AdapterKind::MultiplicativeLowRank, 0.5, 6, 2);
        let cfg = TrainConfig {
            max_epochs: 1,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let report = fit(&mut model, &ds, &cfg).unwrap();
        assert_eq!(report.train_loss.len(), 1);
        assert_eq!(report.val_metric.len(), 1);
        assert_eq!(report.stopped_epoch, 1);
        assert_eq!(report.best_epoch, 1);
    }

    #[test]
    fn constant_metric_with_patience_one_stops_at_epoch_two() {
        // lr so small the validation metric cannot change measurably:
        // actually freeze it entirely with lr -> tiny and sigma 0 so all
        // members coincide; the metric is then bitwise constant only if
        // parameters are, so use lr about 1e-300 to make steps underflow
        // the metric but stay a legal config.
        let mut ds = make_synthetic(SyntheticKind::TwoGaussiansBinary, 80, 3).unwrap();
        ds.standardize().unwrap();
        let mut model = small_model(&ds, AdapterKind::MultiplicativeLowRank, 0.0, 6, 2);
        let cfg = TrainConfig {
            lr: 1e-300,
            patience: 1,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let report = fit(&mut model, &ds, &cfg).unwrap();
        assert_eq!(report.stopped_epoch, 2);
        assert_eq!(report.best_epoch, 1);
        assert_eq!(report.val_metric[0], report.val_metric[1]);
    }

    #[test]
    fn early_stop_waits_exactly_patience_epochs_and_restores_best() {
        let mut ds = make_synthetic(SyntheticKind::TwoGaussiansBinary, 200, 5).unwrap();
        ds.standardize().unwrap();
        let mut model = small_model(&ds, AdapterKind::MultiplicativeLowRank, 0.5, 8, 7);
        let cfg = TrainConfig {
            lr: 5e-3,
            batch_size: 32,
            max_epochs: 120,
            patience: 4,
            ..TrainConfig::default()
        };
        let report = fit(&mut model, &ds, &cfg).unwrap();
        if report.stopped_epoch < cfg.max_epochs {
            // The final `patience` epochs are exactly the non-improving tail.
            assert_eq!(report.stopped_epoch, report.best_epoch + cfg.patience);
        }
        // The best value is the optimum of the recorded trace ...
        let best = report
            .val_metric
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(report.best_val_metric, best);
        assert_eq!(report.val_metric[report.best_epoch - 1], best);
        // ... and the restored parameters reproduce it exactly.
        let again = split_metric(&model, &ds, Split::Val, cfg.batch_size).unwrap();
        assert_eq!(again, report.best_val_metric);
    }

    #[test]
    fn fit_is_deterministic() {
        let mut ds = make_synthetic(SyntheticKind::XorMulticlass, 120, 9).unwrap();
        ds.standardize().unwrap();
        let cfg = TrainConfig {
            lr: 3e-3,
            batch_size: 32,
            max_epochs: 8,
            ..TrainConfig::default()
        };
        let run = || {
            let mut model = small_model(&ds, AdapterKind::Rank1Mask, 0.5, 8, 11);
            let report = fit(&mut model, &ds, &cfg).unwrap();
            (model, report)
        };
        let (m1, r1) = run();
        let (m2, r2) = run();
        assert_eq!(m1, m2);
        assert_eq!(r1.train_loss, r2.train_loss);
        assert_eq!(r1.val_metric, r2.val_metric);
    }

    #[test]
    fn clipped_norm_never_exceeds_limit() {
        let mut ds = make_synthetic(SyntheticKind::FriedmanRegression, 150, 13).unwrap();
        ds.standardize().unwrap();
        let mut model = small_model(&ds, AdapterKind::MultiplicativeLowRank, 1.0, 8, 3);
        let cfg = TrainConfig {
            lr: 3e-3,
            batch_size: 32,
            max_epochs: 10,
            ..TrainConfig::default()
        };
        let report = fit(&mut model, &ds, &cfg).unwrap();
        assert!(report.max_clipped_grad_norm <= 1.0 + 1e-12);
        assert!(report.max_clipped_grad_norm > 0.0);
    }

    #[test]
    fn linear_regression_converges_for_all_variants() {
        for variant in [
            AdapterKind::MultiplicativeLowRank,
            AdapterKind::Rank1Mask,
            AdapterKind::AdditiveLowRank,
        ] {
            let mut ds = make_synthetic(SyntheticKind::LinearRegression, 600, 17).unwrap();
            ds.standardize().unwrap();
            let mut model = small_model(&ds, variant, 0.5, 32, 23);
            let cfg = TrainConfig {
                lr: 1e-2,
                batch_size: 64,
                max_epochs: 100,
                patience: 100,
                ..TrainConfig::default()
            };
            fit(&mut model, &ds, &cfg).unwrap();
            let train_rmse = split_metric(&model, &ds, Split::Train, 64).unwrap();
            assert!(
                train_rmse < 0.05,
                "{variant:?}: train RMSE {train_rmse}"
            );
        }
    }

    #[test]
    fn report_jsonl_round_trips_records() {
        let mut ds = make_synthetic(SyntheticKind::LinearRegression, 80, 3).unwrap();
        ds.standardize().unwrap();
        let mut model = small_model(&ds, AdapterKind::AdditiveLowRank, 0.5, 6, 2);
        let cfg = TrainConfig {
            max_epochs: 3,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let report = fit(&mut model, &ds, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.jsonl");
        report.save_jsonl(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let rec: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(rec["epoch"], 2);
        assert_eq!(rec["train_loss"].as_f64().unwrap(), report.train_loss[1]);
    }
}
