//! Masked-LM backbone, vocabulary enrichment and the two MLM classifier heads.
//!
//! The backbone is a small trainable encoder selected by name: `tiny-attn`
//! (local token mixing + one self-attention layer + tanh projection) or
//! `tiny-pool` (token + mean-context projection). Both produce per-position
//! hidden vectors; the heads score them over the enriched vocabulary,
//! restricted to each mask's candidate set and then softmax-normalized.

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::templating::PromptInstance;
use crate::vocab::{EnrichedVocabulary, Tokenizer};

/// Ablation switches. At most one of `single_mask`, `event_token_answers`,
/// `conventional_prompt` may be set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariantConfig {
    /// SiM: one mask predicts event 2, event 1 appears as raw surface words.
    pub single_mask: bool,
    /// ShM: one MLM head serves both masks.
    pub shared_head: bool,
    /// ET: score the event mention's own sub-token instead of a virtual token.
    pub event_token_answers: bool,
    /// Discrete conventional prompt baseline with answer words cause/none.
    pub conventional_prompt: bool,
    /// ET only: average over all mention sub-tokens instead of the first.
    pub et_mean_subtokens: bool,
}

impl VariantConfig {
    pub fn validate(&self) -> Result<()> {
        let exclusive = [
            self.single_mask,
            self.event_token_answers,
            self.conventional_prompt,
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if exclusive > 1 {
            return Err(Error::Config(
                "at most one of single_mask, event_token_answers, conventional_prompt".into(),
            ));
        }
        Ok(())
    }

    pub fn from_name(name: &str) -> Result<Self> {
        let mut v = VariantConfig::default();
        match name {
            "full" => {}
            "sim" => v.single_mask = true,
            "shm" => v.shared_head = true,
            "et" => v.event_token_answers = true,
            "prompt" => v.conventional_prompt = true,
            other => {
                return Err(Error::Config(format!(
                    "unknown variant {other}; expected full|sim|shm|et|prompt"
                )))
            }
        }
        Ok(v)
    }

    pub fn name(&self) -> &'static str {
        if self.conventional_prompt {
            "prompt"
        } else if self.event_token_answers {
            "et"
        } else if self.single_mask {
            "sim"
        } else if self.shared_head {
            "shm"
        } else {
            "full"
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arch {
    /// Local mixing + single-head self-attention + tanh projection.
    LocalAttn,
    /// Per-token projection plus mean-pooled context.
    MeanPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Backbone identity string, e.g. "tiny-attn" or "tiny-pool".
    pub backbone_name: String,
    pub dim: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            backbone_name: "tiny-attn".into(),
            dim: 48,
            max_len: 64,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn arch(&self) -> Result<Arch> {
        match self.backbone_name.as_str() {
            "tiny-attn" => Ok(Arch::LocalAttn),
            "tiny-pool" => Ok(Arch::MeanPool),
            other => Err(Error::Config(format!(
                "unknown backbone {other}; expected tiny-attn or tiny-pool"
            ))),
        }
    }
}

/// One MLM classifier head: a score row per enriched-vocabulary entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    /// (vocab_total, dim)
    pub w: Array2<f64>,
    /// (1, vocab_total)
    pub b: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ArchParams {
    LocalAttn {
        u_prev: Array2<f64>,
        u_next: Array2<f64>,
        wq: Array2<f64>,
        wk: Array2<f64>,
        wv: Array2<f64>,
        w1: Array2<f64>,
        b1: Array2<f64>,
    },
    MeanPool {
        wt: Array2<f64>,
        wc: Array2<f64>,
        b: Array2<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneParams {
    /// (vocab_total, dim) token embeddings, virtual rows included.
    pub embed: Array2<f64>,
    /// (max_len, dim) position embeddings.
    pub pos: Array2<f64>,
    pub arch: ArchParams,
    /// The backbone's own MLM head; heads are copied from it on separation.
    pub mlm_head: Head,
}

/// Full model: backbone + enriched vocabulary + the two classifier heads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptModel {
    pub config: ModelConfig,
    pub variant: VariantConfig,
    pub vocab: EnrichedVocabulary,
    pub backbone: BackboneParams,
    pub head1: Head,
    /// `None` in shared-head mode: head1 serves both masks.
    pub head2: Option<Head>,
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    let dist = Normal::new(0.0, std).expect("valid std");
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

impl PromptModel {
    /// Build a model with freshly initialized weights.
    ///
    /// The four VET rows are drawn from a normal distribution; the `<None>`
    /// embedding and output row are the mean of all base-vocabulary rows.
    pub fn new(tokenizer: Tokenizer, config: ModelConfig, variant: VariantConfig) -> Result<Self> {
        variant.validate()?;
        let arch = config.arch()?;
        let vocab = EnrichedVocabulary::extend(tokenizer)?;
        let d = config.dim;
        let v_total = vocab.total_size();
        let base = vocab.base_size;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        let emb_std = 0.1;
        let w_std = 1.0 / (d as f64).sqrt();

        let mut embed = normal_matrix(&mut rng, v_total, d, emb_std);
        let pos = normal_matrix(&mut rng, config.max_len, d, emb_std);
        let arch_params = match arch {
            Arch::LocalAttn => ArchParams::LocalAttn {
                u_prev: normal_matrix(&mut rng, d, d, w_std),
                u_next: normal_matrix(&mut rng, d, d, w_std),
                wq: normal_matrix(&mut rng, d, d, w_std),
                wk: normal_matrix(&mut rng, d, d, w_std),
                wv: normal_matrix(&mut rng, d, d, w_std),
                w1: normal_matrix(&mut rng, d, d, w_std),
                b1: Array2::zeros((1, d)),
            },
            Arch::MeanPool => ArchParams::MeanPool {
                wt: normal_matrix(&mut rng, d, d, w_std),
                wc: normal_matrix(&mut rng, d, d, w_std),
                b: Array2::zeros((1, d)),
            },
        };
        let mut head_w = normal_matrix(&mut rng, v_total, d, emb_std);
        let head_b = Array2::zeros((1, v_total));

        // <None> rows: mean of the base-vocabulary rows.
        let none = vocab.none_id;
        let embed_mean = embed
            .slice(ndarray::s![..base, ..])
            .mean_axis(Axis(0))
            .expect("non-empty base vocabulary");
        embed.row_mut(none).assign(&embed_mean);
        let head_mean = head_w
            .slice(ndarray::s![..base, ..])
            .mean_axis(Axis(0))
            .expect("non-empty base vocabulary");
        head_w.row_mut(none).assign(&head_mean);

        let mlm_head = Head {
            w: head_w,
            b: head_b,
        };
        let head1 = mlm_head.clone();
        let head2 = if variant.shared_head {
            None
        } else {
            Some(mlm_head.clone())
        };
        Ok(PromptModel {
            config,
            variant,
            vocab,
            backbone: BackboneParams {
                embed,
                pos,
                arch: arch_params,
                mlm_head,
            },
            head1,
            head2,
        })
    }

    /// Zero all weights; every restricted softmax becomes uniform. Test stub.
    pub fn zero_weights(&mut self) {
        self.visit_params_mut(|_, a| a.fill(0.0));
    }

    /// Head serving `[MASK2]` (head1 itself in shared mode).
    pub fn head_for_mask2(&self) -> &Head {
        self.head2.as_ref().unwrap_or(&self.head1)
    }

    /// L2 distance between the two heads' parameters; 0 when shared.
    pub fn head_distance(&self) -> f64 {
        match &self.head2 {
            None => 0.0,
            Some(h2) => {
                let dw = (&self.head1.w - &h2.w).mapv(|x| x * x).sum();
                let db = (&self.head1.b - &h2.b).mapv(|x| x * x).sum();
                (dw + db).sqrt()
            }
        }
    }

    /// Visit every parameter tensor with a stable name, immutably.
    pub fn visit_params(&self, mut f: impl FnMut(&str, &Array2<f64>)) {
        f("embed", &self.backbone.embed);
        f("pos", &self.backbone.pos);
        match &self.backbone.arch {
            ArchParams::LocalAttn {
                u_prev,
                u_next,
                wq,
                wk,
                wv,
                w1,
                b1,
            } => {
                f("u_prev", u_prev);
                f("u_next", u_next);
                f("wq", wq);
                f("wk", wk);
                f("wv", wv);
                f("w1", w1);
                f("b1", b1);
            }
            ArchParams::MeanPool { wt, wc, b } => {
                f("wt", wt);
                f("wc", wc);
                f("b", b);
            }
        }
        f("head1.w", &self.head1.w);
        f("head1.b", &self.head1.b);
        if let Some(h2) = &self.head2 {
            f("head2.w", &h2.w);
            f("head2.b", &h2.b);
        }
    }

    /// Visit every parameter tensor with a stable name, mutably.
    pub fn visit_params_mut(&mut self, mut f: impl FnMut(&str, &mut Array2<f64>)) {
        f("embed", &mut self.backbone.embed);
        f("pos", &mut self.backbone.pos);
        match &mut self.backbone.arch {
            ArchParams::LocalAttn {
                u_prev,
                u_next,
                wq,
                wk,
                wv,
                w1,
                b1,
            } => {
                f("u_prev", u_prev);
                f("u_next", u_next);
                f("wq", wq);
                f("wk", wk);
                f("wv", wv);
                f("w1", w1);
                f("b1", b1);
            }
            ArchParams::MeanPool { wt, wc, b } => {
                f("wt", wt);
                f("wc", wc);
                f("b", b);
            }
        }
        f("head1.w", &mut self.head1.w);
        f("head1.b", &mut self.head1.b);
        if let Some(h2) = &mut self.head2 {
            f("head2.w", &mut h2.w);
            f("head2.b", &mut h2.b);
        }
    }

    /// Restore invariants after deserialization.
    pub fn reindex(&mut self) {
        self.vocab.tokenizer.reindex();
    }
}

/// Forward-pass intermediates kept for the backward pass.
pub struct EncodeCache {
    pub ids: Vec<usize>,
    kind: CacheKind,
    pub hidden: Array2<f64>,
}

enum CacheKind {
    LocalAttn {
        x: Array2<f64>,
        y: Array2<f64>,
        q: Array2<f64>,
        k: Array2<f64>,
        v: Array2<f64>,
        a: Array2<f64>,
        m: Array2<f64>,
    },
    MeanPool {
        x: Array2<f64>,
        c: Array1<f64>,
    },
}

fn shift_down(x: &Array2<f64>) -> Array2<f64> {
    // row i becomes row i-1's content; row 0 is zero
    let mut out = Array2::zeros(x.raw_dim());
    let n = x.nrows();
    if n > 1 {
        out.slice_mut(ndarray::s![1.., ..])
            .assign(&x.slice(ndarray::s![..n - 1, ..]));
    }
    out
}

fn shift_up(x: &Array2<f64>) -> Array2<f64> {
    // row i becomes row i+1's content; last row is zero
    let mut out = Array2::zeros(x.raw_dim());
    let n = x.nrows();
    if n > 1 {
        out.slice_mut(ndarray::s![..n - 1, ..])
            .assign(&x.slice(ndarray::s![1.., ..]));
    }
    out
}

fn softmax_rows(s: &Array2<f64>) -> Array2<f64> {
    let mut out = s.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|x| x / sum);
    }
    out
}

impl PromptModel {
    /// Encode a token sequence into per-position hidden vectors.
    pub fn encode(&self, ids: &[usize]) -> Result<EncodeCache> {
        let n = ids.len();
        if n == 0 || n > self.config.max_len {
            return Err(Error::Contract(format!(
                "sequence length {n} outside 1..={}",
                self.config.max_len
            )));
        }
        let d = self.config.dim;
        let mut x = Array2::zeros((n, d));
        for (i, &id) in ids.iter().enumerate() {
            let row = &self.backbone.embed.row(id) + &self.backbone.pos.row(i);
            x.row_mut(i).assign(&row);
        }
        match &self.backbone.arch {
            ArchParams::LocalAttn {
                u_prev,
                u_next,
                wq,
                wk,
                wv,
                w1,
                b1,
            } => {
                let y = &x + &shift_down(&x).dot(u_prev) + &shift_up(&x).dot(u_next);
                let q = y.dot(wq);
                let k = y.dot(wk);
                let v = y.dot(wv);
                let scale = 1.0 / (d as f64).sqrt();
                let s = q.dot(&k.t()) * scale;
                let a = softmax_rows(&s);
                let z = a.dot(&v);
                let m = &y + &z;
                let hpre = m.dot(w1) + b1;
                let hidden = hpre.mapv(f64::tanh);
                Ok(EncodeCache {
                    ids: ids.to_vec(),
                    kind: CacheKind::LocalAttn { x, y, q, k, v, a, m },
                    hidden,
                })
            }
            ArchParams::MeanPool { wt, wc, b } => {
                let c = x.mean_axis(Axis(0)).expect("non-empty sequence");
                let ctx = c.dot(wc);
                let hpre = x.dot(wt) + &ctx + b;
                let hidden = hpre.mapv(f64::tanh);
                Ok(EncodeCache {
                    ids: ids.to_vec(),
                    kind: CacheKind::MeanPool { x, c },
                    hidden,
                })
            }
        }
    }

    /// Backpropagate `d_hidden` through the backbone, accumulating into `grads`.
    pub fn encode_backward(
        &self,
        cache: &EncodeCache,
        d_hidden: &Array2<f64>,
        grads: &mut ModelGrads,
    ) {
        let d = self.config.dim;
        let dhpre = d_hidden * &cache.hidden.mapv(|h| 1.0 - h * h);
        match (&self.backbone.arch, &cache.kind) {
            (
                ArchParams::LocalAttn {
                    u_prev,
                    u_next,
                    wq,
                    wk,
                    wv,
                    w1,
                    ..
                },
                CacheKind::LocalAttn { x, y, q, k, v, a, m },
            ) => {
                let (gu_prev, gu_next, gwq, gwk, gwv, gw1, gb1) = match &mut grads.arch {
                    ArchGrads::LocalAttn {
                        u_prev,
                        u_next,
                        wq,
                        wk,
                        wv,
                        w1,
                        b1,
                    } => (u_prev, u_next, wq, wk, wv, w1, b1),
                    _ => unreachable!("arch/grads mismatch"),
                };
                *gw1 += &m.t().dot(&dhpre);
                *gb1 += &dhpre.sum_axis(Axis(0)).insert_axis(Axis(0));
                let dm = dhpre.dot(&w1.t());
                let mut dy = dm.clone();
                let dz = dm;
                let da = dz.dot(&v.t());
                let dv = a.t().dot(&dz);
                // softmax backward per row
                let mut ds = Array2::zeros(a.raw_dim());
                for i in 0..a.nrows() {
                    let ai = a.row(i);
                    let dai = da.row(i);
                    let dot: f64 = ai.iter().zip(dai.iter()).map(|(p, g)| p * g).sum();
                    let mut row = ds.row_mut(i);
                    for j in 0..ai.len() {
                        row[j] = ai[j] * (dai[j] - dot);
                    }
                }
                let scale = 1.0 / (d as f64).sqrt();
                let dq = ds.dot(k) * scale;
                let dk = ds.t().dot(q) * scale;
                *gwq += &y.t().dot(&dq);
                *gwk += &y.t().dot(&dk);
                *gwv += &y.t().dot(&dv);
                dy += &dq.dot(&wq.t());
                dy += &dk.dot(&wk.t());
                dy += &dv.dot(&wv.t());
                *gu_prev += &shift_down(x).t().dot(&dy);
                *gu_next += &shift_up(x).t().dot(&dy);
                // y_i = x_i + x_{i-1} u_prev + x_{i+1} u_next
                let mut dx = dy.clone();
                dx += &shift_up(&dy.dot(&u_prev.t()));
                dx += &shift_down(&dy.dot(&u_next.t()));
                accumulate_embedding(grads, &cache.ids, &dx);
            }
            (ArchParams::MeanPool { wt, wc, .. }, CacheKind::MeanPool { x, c }) => {
                let (gwt, gwc, gb) = match &mut grads.arch {
                    ArchGrads::MeanPool { wt, wc, b } => (wt, wc, b),
                    _ => unreachable!("arch/grads mismatch"),
                };
                let col = dhpre.sum_axis(Axis(0));
                *gwt += &x.t().dot(&dhpre);
                let c2 = c.clone().insert_axis(Axis(1)); // (d, 1)
                let col2 = col.clone().insert_axis(Axis(0)); // (1, d)
                *gwc += &c2.dot(&col2);
                *gb += &col.clone().insert_axis(Axis(0));
                let mut dx = dhpre.dot(&wt.t());
                let dc = col.dot(&wc.t()) / x.nrows() as f64;
                for mut row in dx.rows_mut() {
                    row += &dc;
                }
                accumulate_embedding(grads, &cache.ids, &dx);
            }
            _ => unreachable!("arch/cache mismatch"),
        }
    }
}

fn accumulate_embedding(grads: &mut ModelGrads, ids: &[usize], dx: &Array2<f64>) {
    for (i, &id) in ids.iter().enumerate() {
        let mut e = grads.embed.row_mut(id);
        e += &dx.row(i);
        let mut p = grads.pos.row_mut(i);
        p += &dx.row(i);
    }
}

/// Gradient buffers shaped like the model parameters.
pub struct ModelGrads {
    pub embed: Array2<f64>,
    pub pos: Array2<f64>,
    pub arch: ArchGrads,
    pub head1_w: Array2<f64>,
    pub head1_b: Array2<f64>,
    pub head2_w: Option<Array2<f64>>,
    pub head2_b: Option<Array2<f64>>,
}

pub enum ArchGrads {
    LocalAttn {
        u_prev: Array2<f64>,
        u_next: Array2<f64>,
        wq: Array2<f64>,
        wk: Array2<f64>,
        wv: Array2<f64>,
        w1: Array2<f64>,
        b1: Array2<f64>,
    },
    MeanPool {
        wt: Array2<f64>,
        wc: Array2<f64>,
        b: Array2<f64>,
    },
}

impl ModelGrads {
    pub fn zeros_like(model: &PromptModel) -> Self {
        let arch = match &model.backbone.arch {
            ArchParams::LocalAttn {
                u_prev,
                u_next,
                wq,
                wk,
                wv,
                w1,
                b1,
            } => ArchGrads::LocalAttn {
                u_prev: Array2::zeros(u_prev.raw_dim()),
                u_next: Array2::zeros(u_next.raw_dim()),
                wq: Array2::zeros(wq.raw_dim()),
                wk: Array2::zeros(wk.raw_dim()),
                wv: Array2::zeros(wv.raw_dim()),
                w1: Array2::zeros(w1.raw_dim()),
                b1: Array2::zeros(b1.raw_dim()),
            },
            ArchParams::MeanPool { wt, wc, b } => ArchGrads::MeanPool {
                wt: Array2::zeros(wt.raw_dim()),
                wc: Array2::zeros(wc.raw_dim()),
                b: Array2::zeros(b.raw_dim()),
            },
        };
        ModelGrads {
            embed: Array2::zeros(model.backbone.embed.raw_dim()),
            pos: Array2::zeros(model.backbone.pos.raw_dim()),
            arch,
            head1_w: Array2::zeros(model.head1.w.raw_dim()),
            head1_b: Array2::zeros(model.head1.b.raw_dim()),
            head2_w: model.head2.as_ref().map(|h| Array2::zeros(h.w.raw_dim())),
            head2_b: model.head2.as_ref().map(|h| Array2::zeros(h.b.raw_dim())),
        }
    }

    /// Visit gradient tensors under the same names as `PromptModel::visit_params`.
    pub fn visit(&self, mut f: impl FnMut(&str, &Array2<f64>)) {
        f("embed", &self.embed);
        f("pos", &self.pos);
        match &self.arch {
            ArchGrads::LocalAttn {
                u_prev,
                u_next,
                wq,
                wk,
                wv,
                w1,
                b1,
            } => {
                f("u_prev", u_prev);
                f("u_next", u_next);
                f("wq", wq);
                f("wk", wk);
                f("wv", wv);
                f("w1", w1);
                f("b1", b1);
            }
            ArchGrads::MeanPool { wt, wc, b } => {
                f("wt", wt);
                f("wc", wc);
                f("b", b);
            }
        }
        f("head1.w", &self.head1_w);
        f("head1.b", &self.head1_b);
        if let (Some(w), Some(b)) = (&self.head2_w, &self.head2_b) {
            f("head2.w", w);
            f("head2.b", b);
        }
    }

    pub fn visit_mut(&mut self, mut f: impl FnMut(&str, &mut Array2<f64>)) {
        f("embed", &mut self.embed);
        f("pos", &mut self.pos);
        match &mut self.arch {
            ArchGrads::LocalAttn {
                u_prev,
                u_next,
                wq,
                wk,
                wv,
                w1,
                b1,
            } => {
                f("u_prev", u_prev);
                f("u_next", u_next);
                f("wq", wq);
                f("wk", wk);
                f("wv", wv);
                f("w1", w1);
                f("b1", b1);
            }
            ArchGrads::MeanPool { wt, wc, b } => {
                f("wt", wt);
                f("wc", wc);
                f("b", b);
            }
        }
        f("head1.w", &mut self.head1_w);
        f("head1.b", &mut self.head1_b);
        if let (Some(w), Some(b)) = (&mut self.head2_w, &mut self.head2_b) {
            f("head2.w", w);
            f("head2.b", b);
        }
    }
}

/// Probability distribution of one mask over its candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskDist {
    /// Candidate ids in scoring order.
    pub candidates: Vec<usize>,
    /// Softmax-normalized probabilities aligned with `candidates`.
    pub probs: Vec<f64>,
    /// Probability of the answer token this mask tracks (P1 / P2).
    pub answer_prob: f64,
}

impl MaskDist {
    /// Probability of a vocabulary id; exactly 0 outside the candidate set.
    pub fn prob_of(&self, id: usize) -> f64 {
        self.candidates
            .iter()
            .position(|&c| c == id)
            .map_or(0.0, |i| self.probs[i])
    }
}

/// Per-instance head outputs and the extracted scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPrediction {
    pub dist1: Option<MaskDist>,
    pub dist2: Option<MaskDist>,
}

impl MaskPrediction {
    pub fn p1(&self) -> Option<f64> {
        self.dist1.as_ref().map(|d| d.answer_prob)
    }
    pub fn p2(&self) -> Option<f64> {
        self.dist2.as_ref().map(|d| d.answer_prob)
    }

    /// The (p1, p2) pair for decision making. Single-mask predictions
    /// duplicate the surviving probability so the joint rule sees 2p.
    pub fn decision_pair(&self) -> (f64, f64) {
        match (self.p1(), self.p2()) {
            (Some(a), Some(b)) => (a, b),
            (Some(a), None) => (a, a),
            (None, Some(b)) => (b, b),
            (None, None) => (0.0, 0.0),
        }
    }
}

/// Softmax over the candidate subset of head scores at one hidden vector.
pub fn score_candidates(head: &Head, hidden: &ndarray::ArrayView1<f64>, cands: &[usize]) -> Vec<f64> {
    let logits: Vec<f64> = cands
        .iter()
        .map(|&c| head.w.row(c).dot(hidden) + head.b[(0, c)])
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl PromptModel {
    fn mask_hidden<'c>(
        &self,
        cache: &'c EncodeCache,
        pos: usize,
    ) -> Result<ndarray::ArrayView1<'c, f64>> {
        if pos >= cache.hidden.nrows() {
            return Err(Error::Integrity(format!(
                "mask position {pos} out of range for sequence of length {}",
                cache.hidden.nrows()
            )));
        }
        Ok(cache.hidden.row(pos))
    }

    /// Run both MLM classifiers on an instance and extract P1 / P2.
    ///
    /// Honors the variant flags: single-mask emits one distribution, the
    /// event-token variant scores mention sub-tokens, and the conventional
    /// baseline scores its two answer words.
    pub fn predict_masks(&self, instance: &PromptInstance) -> Result<MaskPrediction> {
        if self.variant.conventional_prompt {
            return self.predict_conventional(instance);
        }
        if self.variant.event_token_answers {
            return self.predict_event_tokens(instance);
        }
        let cache = self.encode(&instance.tokens)?;
        let dist1 = match instance.mask1_pos {
            None => None,
            Some(pos) => {
                let h = self.mask_hidden(&cache, pos)?;
                let probs = score_candidates(&self.head1, &h, &self.vocab.candidate_set_1);
                let answer_prob = probs[self
                    .vocab
                    .candidate_set_1
                    .iter()
                    .position(|&c| c == self.vocab.e1_id)
                    .expect("<E1> is a candidate")];
                Some(MaskDist {
                    candidates: self.vocab.candidate_set_1.clone(),
                    probs,
                    answer_prob,
                })
            }
        };
        let dist2 = match instance.mask2_pos {
            None => None,
            Some(pos) => {
                let h = self.mask_hidden(&cache, pos)?;
                let probs = score_candidates(self.head_for_mask2(), &h, &self.vocab.candidate_set_2);
                let answer_prob = probs[self
                    .vocab
                    .candidate_set_2
                    .iter()
                    .position(|&c| c == self.vocab.e2_id)
                    .expect("<E2> is a candidate")];
                Some(MaskDist {
                    candidates: self.vocab.candidate_set_2.clone(),
                    probs,
                    answer_prob,
                })
            }
        };
        Ok(MaskPrediction { dist1, dist2 })
    }

    /// ET ablation: P_k reads the probability of event-k's own sub-token(s)
    /// under a distribution with no virtual event answers.
    pub fn predict_event_tokens(&self, instance: &PromptInstance) -> Result<MaskPrediction> {
        let (s1, s2) = (&instance.event_surfaces.0, &instance.event_surfaces.1);
        if s1.is_empty() || s2.is_empty() {
            return Err(Error::Integrity("empty mention surface".into()));
        }
        let cache = self.encode(&instance.tokens)?;
        let cands = self.vocab.candidate_set_event_tokens();
        let build = |pos: Option<usize>, head: &Head, surface: &[String]| -> Result<Option<MaskDist>> {
            let Some(pos) = pos else { return Ok(None) };
            let h = self.mask_hidden(&cache, pos)?;
            let probs = score_candidates(head, &h, &cands);
            let prob_of_word = |w: &String| {
                self.vocab
                    .tokenizer
                    .exact_id(w)
                    .map_or(0.0, |id| probs[id])
            };
            let answer_prob = if self.variant.et_mean_subtokens {
                surface.iter().map(prob_of_word).sum::<f64>() / surface.len() as f64
            } else {
                prob_of_word(&surface[0])
            };
            Ok(Some(MaskDist {
                candidates: cands.clone(),
                probs,
                answer_prob,
            }))
        };
        let dist1 = build(instance.mask1_pos, &self.head1, s1)?;
        let dist2 = build(instance.mask2_pos, self.head_for_mask2(), s2)?;
        Ok(MaskPrediction { dist1, dist2 })
    }

    /// Conventional-prompt baseline: distribution over the answer words
    /// {cause, none} at the single mask. The decision is argmax, ties to None.
    pub fn predict_conventional(&self, instance: &PromptInstance) -> Result<MaskPrediction> {
        let pos = instance
            .mask1_pos
            .ok_or_else(|| Error::Integrity("conventional instance lacks a mask".into()))?;
        let cache = self.encode(&instance.tokens)?;
        let h = self.mask_hidden(&cache, pos)?;
        let cands = self.conventional_answer_ids();
        let probs = score_candidates(&self.head1, &h, &cands);
        let answer_prob = probs[0]; // P(cause)
        Ok(MaskPrediction {
            dist1: Some(MaskDist {
                candidates: cands,
                probs,
                answer_prob,
            }),
            dist2: None,
        })
    }

    /// Answer-word ids of the conventional baseline: [cause, none].
    pub fn conventional_answer_ids(&self) -> Vec<usize> {
        vec![self.vocab.tokenizer.id("cause"), self.vocab.tokenizer.id("none")]
    }
}
