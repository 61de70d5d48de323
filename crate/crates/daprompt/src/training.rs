//! Fine-tuning: answer labels, the summed two-head cross-entropy objective
//! with L2 regularization, AdamW updates, and dev-based threshold selection.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, ScopeFilter};
use crate::decision::{joint_decide, Verdict};
use crate::error::{Error, Result};
use crate::evaluation::{prf1, Confusion};
use crate::model::{score_candidates, Head, ModelGrads, PromptModel, VariantConfig};
use crate::templating::PromptInstance;

/// Hyperparameters of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub backbone_name: String,
    pub dim: usize,
    pub max_len: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Regularization strength (lambda in the loss).
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub neg_sample_p: f64,
    /// Redraw the negative sample each epoch instead of once per run.
    pub resample_per_epoch: bool,
    pub rho: f64,
    /// Pick rho on the dev split (when one exists) instead of using `rho`.
    pub select_rho: bool,
    pub variant: VariantConfig,
    pub scope: ScopeFilter,
    pub freeze_backbone: bool,
    /// Early-stopping patience in epochs on dev F1; 0 disables.
    pub patience: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            backbone_name: "tiny-attn".into(),
            dim: 48,
            max_len: 64,
            learning_rate: 1e-5,
            batch_size: 16,
            weight_decay: 0.01,
            epochs: 10,
            seed: 0,
            neg_sample_p: 0.2,
            resample_per_epoch: false,
            rho: 0.6,
            select_rho: false,
            variant: VariantConfig::default(),
            scope: ScopeFilter::All,
            freeze_backbone: false,
            patience: 3,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "learning_rate, batch_size and epochs must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.neg_sample_p) {
            return Err(Error::Config("neg_sample_p must lie in [0, 1]".into()));
        }
        if !(0.0..=2.0).contains(&self.rho) {
            return Err(Error::Config("rho must lie in [0, 2]".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        self.variant.validate()
    }
}

/// Progress of a training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub step: usize,
    pub epoch: usize,
    pub loss_history: Vec<f64>,
}

/// One training-log line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub epoch: usize,
    pub l1: f64,
    pub l2: f64,
    pub l_total: f64,
}

/// Answer ids for the two mask slots of an instance under a variant.
/// A `None` entry means the slot has no mask.
pub fn label_of(
    model: &PromptModel,
    instance: &PromptInstance,
) -> Result<(Option<usize>, Option<usize>)> {
    let v = &model.vocab;
    let variant = &model.variant;
    let positive = instance.gold == Label::Causal;
    if variant.conventional_prompt {
        let w = if positive { "cause" } else { "none" };
        return Ok((Some(v.tokenizer.id(w)), None));
    }
    if variant.single_mask {
        let answer = if positive { v.e2_id } else { v.none_id };
        return Ok((None, Some(answer)));
    }
    if variant.event_token_answers {
        let (s1, s2) = (&instance.event_surfaces.0, &instance.event_surfaces.1);
        if s1.is_empty() || s2.is_empty() {
            return Err(Error::Integrity("empty mention surface".into()));
        }
        let a1 = if positive { v.tokenizer.id(&s1[0]) } else { v.none_id };
        let a2 = if positive { v.tokenizer.id(&s2[0]) } else { v.none_id };
        return Ok((Some(a1), Some(a2)));
    }
    if positive {
        Ok((Some(v.e1_id), Some(v.e2_id)))
    } else {
        Ok((Some(v.none_id), Some(v.none_id)))
    }
}

fn candidate_sets(model: &PromptModel) -> (Vec<usize>, Vec<usize>) {
    let v = &model.vocab;
    if model.variant.conventional_prompt {
        let c = model.conventional_answer_ids();
        (c.clone(), c)
    } else if model.variant.event_token_answers {
        let c = v.candidate_set_event_tokens();
        (c.clone(), c)
    } else {
        (v.candidate_set_1.clone(), v.candidate_set_2.clone())
    }
}

/// The two loss components; `total` is exactly `l1 + l2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub l1: f64,
    pub l2: f64,
    pub total: f64,
}

fn backbone_param(name: &str) -> bool {
    !name.starts_with("head")
}

fn trainable(name: &str, freeze_backbone: bool) -> bool {
    !(freeze_backbone && backbone_param(name))
}

/// Mean cross-entropy per mask slot plus L2, with analytic gradients.
///
/// The regularizer `lambda * sum(theta^2)` counts each distinct trainable
/// parameter set once and is split evenly between L1 and L2 so that
/// `total == l1 + l2` holds exactly.
pub fn loss_and_grads(
    model: &PromptModel,
    batch: &[PromptInstance],
    lambda: f64,
    freeze_backbone: bool,
) -> Result<(LossParts, ModelGrads)> {
    if batch.is_empty() {
        return Err(Error::Contract("empty training batch".into()));
    }
    let k = batch.len() as f64;
    let (cands1, cands2) = candidate_sets(model);
    let mut grads = ModelGrads::zeros_like(model);
    let mut ce1 = 0.0;
    let mut ce2 = 0.0;

    for inst in batch {
        let (a1, a2) = label_of(model, inst)?;
        let cache = model.encode(&inst.tokens)?;
        let mut d_hidden = Array2::zeros(cache.hidden.raw_dim());

        let slot = |pos: Option<usize>,
                        answer: Option<usize>,
                        head: &Head,
                        cands: &[usize],
                        use_head2: bool,
                        ce: &mut f64,
                        d_hidden: &mut Array2<f64>,
                        grads: &mut ModelGrads|
         -> Result<()> {
            let (Some(pos), Some(answer)) = (pos, answer) else {
                return Ok(());
            };
            if pos >= cache.hidden.nrows() {
                return Err(Error::Integrity(format!("mask position {pos} out of range")));
            }
            let h = cache.hidden.row(pos);
            let probs = score_candidates(head, &h, cands);
            let ai = cands.iter().position(|&c| c == answer).ok_or_else(|| {
                Error::Integrity(format!("label id {answer} outside candidate set"))
            })?;
            *ce += -(probs[ai].max(1e-300)).ln();
            let (gw, gb) = if use_head2 {
                match (&mut grads.head2_w, &mut grads.head2_b) {
                    (Some(w), Some(b)) => (w, b),
                    _ => (&mut grads.head1_w, &mut grads.head1_b),
                }
            } else {
                (&mut grads.head1_w, &mut grads.head1_b)
            };
            for (j, &c) in cands.iter().enumerate() {
                let dlogit = probs[j] - f64::from(j == ai);
                let mut row = gw.row_mut(c);
                row.scaled_add(dlogit, &h);
                gb[(0, c)] += dlogit;
                let mut dh = d_hidden.row_mut(pos);
                dh.scaled_add(dlogit, &head.w.row(c));
            }
            Ok(())
        };

        slot(
            inst.mask1_pos,
            a1,
            &model.head1,
            &cands1,
            false,
            &mut ce1,
            &mut d_hidden,
            &mut grads,
        )?;
        slot(
            inst.mask2_pos,
            a2,
            model.head_for_mask2(),
            &cands2,
            true,
            &mut ce2,
            &mut d_hidden,
            &mut grads,
        )?;

        if !freeze_backbone {
            model.encode_backward(&cache, &d_hidden, &mut grads);
        }
    }

    grads.visit_mut(|name, g| {
        if trainable(name, freeze_backbone) {
            g.mapv_inplace(|x| x / k);
        } else {
            g.fill(0.0);
        }
    });

    // regularization: lambda * ||theta||^2 over distinct trainable parameters
    let mut reg = 0.0;
    if lambda > 0.0 {
        model.visit_params(|name, p| {
            if trainable(name, freeze_backbone) {
                reg += p.mapv(|x| x * x).sum();
            }
        });
        reg *= lambda;
        let mut updates: BTreeMap<String, Array2<f64>> = BTreeMap::new();
        model.visit_params(|name, p| {
            if trainable(name, freeze_backbone) {
                updates.insert(name.to_string(), p * (2.0 * lambda));
            }
        });
        grads.visit_mut(|name, g| {
            if let Some(u) = updates.get(name) {
                *g += u;
            }
        });
    }

    let l1 = ce1 / k + reg / 2.0;
    let l2 = ce2 / k + reg / 2.0;
    Ok((
        LossParts {
            l1,
            l2,
            total: l1 + l2,
        },
        grads,
    ))
}

/// Loss only; used by the finite-difference checks.
pub fn compute_loss(
    model: &PromptModel,
    batch: &[PromptInstance],
    lambda: f64,
    freeze_backbone: bool,
) -> Result<LossParts> {
    loss_and_grads(model, batch, lambda, freeze_backbone).map(|(l, _)| l)
}

/// AdamW-style adaptive optimizer. Weight decay flows through the loss
/// gradient (the L2 term of the objective), so `step` applies plain
/// bias-corrected adaptive updates.
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: BTreeMap<String, Array2<f64>>,
    v: BTreeMap<String, Array2<f64>>,
}

impl AdamW {
    pub fn new(lr: f64) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn step(&mut self, model: &mut PromptModel, grads: &ModelGrads, freeze_backbone: bool) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut gmap: BTreeMap<String, Array2<f64>> = BTreeMap::new();
        grads.visit(|name, g| {
            gmap.insert(name.to_string(), g.clone());
        });
        let (beta1, beta2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        let (ms, vs) = (&mut self.m, &mut self.v);
        model.visit_params_mut(|name, p| {
            if !trainable(name, freeze_backbone) {
                return;
            }
            let Some(g) = gmap.get(name) else { return };
            let m = ms
                .entry(name.to_string())
                .or_insert_with(|| Array2::zeros(g.raw_dim()));
            let v = vs
                .entry(name.to_string())
                .or_insert_with(|| Array2::zeros(g.raw_dim()));
            m.zip_mut_with(g, |m, &g| *m = beta1 * *m + (1.0 - beta1) * g);
            v.zip_mut_with(g, |v, &g| *v = beta2 * *v + (1.0 - beta2) * g * g);
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
            });
        });
    }
}

/// Train in place over shuffled seeded mini-batches.
///
/// `dev` (when non-empty) drives early stopping on dev F1 at the configured
/// rho. Returns the updated state; the per-step log goes to `log_sink`.
pub fn fit(
    model: &mut PromptModel,
    instances: &[PromptInstance],
    dev: &[PromptInstance],
    cfg: &TrainingConfig,
    mut state: TrainState,
    mut log_sink: impl FnMut(&StepLog),
) -> Result<TrainState> {
    cfg.validate()?;
    if instances.is_empty() {
        return Err(Error::Contract("no training instances".into()));
    }
    let mut opt = AdamW::new(cfg.learning_rate);
    let mut best_dev_f1 = f64::NEG_INFINITY;
    let mut bad_epochs = 0usize;

    for epoch in state.epoch..cfg.epochs {
        let mut order: Vec<usize> = (0..instances.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<PromptInstance> =
                chunk.iter().map(|&i| instances[i].clone()).collect();
            let (loss, grads) =
                loss_and_grads(model, &batch, cfg.weight_decay, cfg.freeze_backbone)?;
            if !loss.total.is_finite() {
                return Err(Error::Diverged { step: state.step });
            }
            opt.step(model, &grads, cfg.freeze_backbone);
            state.step += 1;
            state.loss_history.push(loss.total);
            log_sink(&StepLog {
                step: state.step,
                epoch,
                l1: loss.l1,
                l2: loss.l2,
                l_total: loss.total,
            });
        }
        state.epoch = epoch + 1;

        if !dev.is_empty() && cfg.patience > 0 {
            let f1 = dev_f1(model, dev, cfg.rho)?;
            if f1 > best_dev_f1 {
                best_dev_f1 = f1;
                bad_epochs = 0;
            } else {
                bad_epochs += 1;
                if bad_epochs >= cfg.patience {
                    break;
                }
            }
        }
    }
    Ok(state)
}

fn dev_f1(model: &PromptModel, dev: &[PromptInstance], rho: f64) -> Result<f64> {
    let mut c = Confusion::default();
    for inst in dev {
        let pred = model.predict_masks(inst)?;
        let verdict = if model.variant.conventional_prompt {
            if pred.dist1.as_ref().map_or(0.0, |d| d.answer_prob) > 0.5 {
                Verdict::Accept
            } else {
                Verdict::Reject
            }
        } else {
            let (p1, p2) = pred.decision_pair();
            joint_decide(p1, p2, rho)?.verdict
        };
        c.count(verdict, inst.gold);
    }
    Ok(prf1(&c).f1)
}

/// Grid element maximizing F1 on dev predictions; ties go to the smallest rho.
pub fn select_threshold(dev: &[(f64, f64, Label)], grid: &[f64]) -> Result<f64> {
    if dev.is_empty() {
        return Err(Error::Contract("dev predictions are empty".into()));
    }
    if grid.is_empty() {
        return Err(Error::Contract("threshold grid is empty".into()));
    }
    let mut best = (f64::NEG_INFINITY, grid[0]);
    for &rho in grid {
        let mut c = Confusion::default();
        for &(p1, p2, gold) in dev {
            c.count(joint_decide(p1, p2, rho)?.verdict, gold);
        }
        let f1 = prf1(&c).f1;
        if f1 > best.0 {
            best = (f1, rho);
        }
    }
    Ok(best.1)
}
