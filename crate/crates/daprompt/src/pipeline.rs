//! High-level runs shared by the command-line tool and integration tests:
//! whole-corpus training, evaluation at a threshold, sweeps and ablations.

use std::path::Path;

use crate::checkpoint::{save_checkpoint, save_run_manifest, RunManifest, TrainLogWriter};
use crate::corpus::{
    negative_sample, plan_folds_ctb, plan_folds_esc, Corpus, Document, FoldPlan, Label,
};
use crate::decision::{sweep, RuleMode, SweepPoint};
use crate::error::{Error, Result};
use crate::evaluation::{
    build_instances, predict_instances, scoped_reports, CrossValReport, MetricsReport,
    PairPrediction,
};
use crate::model::{ModelConfig, PromptModel};
use crate::training::{fit, TrainState, TrainingConfig};
use crate::vocab::Tokenizer;

/// Fold plan by dataset convention: `esc` (topic folds + dev) or `ctb`
/// (document folds, no dev).
pub fn plan_for(corpus: &Corpus, kind: &str) -> Result<FoldPlan> {
    match kind {
        "esc" => plan_folds_esc(corpus),
        "ctb" => plan_folds_ctb(corpus),
        other => Err(Error::Config(format!(
            "unknown fold plan {other}; expected esc or ctb"
        ))),
    }
}

/// Train one model on every document of the corpus.
///
/// When `out_dir` is given, the checkpoint, run manifest and per-step
/// training log are written there.
pub fn train_full(
    corpus: &Corpus,
    cfg: &TrainingConfig,
    out_dir: Option<&Path>,
) -> Result<(PromptModel, TrainState)> {
    cfg.validate()?;
    let tokenizer = Tokenizer::build(corpus.vocabulary());
    let mut model = PromptModel::new(
        tokenizer,
        ModelConfig {
            backbone_name: cfg.backbone_name.clone(),
            dim: cfg.dim,
            max_len: cfg.max_len,
            seed: cfg.seed,
        },
        cfg.variant,
    )?;
    let docs: Vec<&Document> = corpus.documents().collect();
    let all = build_instances(&docs, &cfg.variant, &model, cfg.scope)?;
    let train = negative_sample(&all, cfg.neg_sample_p, cfg.seed)?;

    let mut log_writer = match out_dir {
        Some(dir) => Some(TrainLogWriter::create(dir)?),
        None => None,
    };
    let mut log_error = None;
    let state = fit(
        &mut model,
        &train,
        &[],
        cfg,
        TrainState::default(),
        |log| {
            if let Some(w) = log_writer.as_mut() {
                if let Err(e) = w.append(log) {
                    log_error.get_or_insert(e);
                }
            }
        },
    )?;
    if let Some(e) = log_error {
        return Err(e);
    }
    if let Some(dir) = out_dir {
        save_checkpoint(dir, &model, &state)?;
        save_run_manifest(dir, &RunManifest::new(cfg, corpus)?)?;
    }
    Ok((model, state))
}

/// Score every pair of the corpus and report metrics at threshold `rho`.
pub fn evaluate(
    corpus: &Corpus,
    model: &PromptModel,
    rho: f64,
    scope: crate::corpus::ScopeFilter,
) -> Result<(Vec<PairPrediction>, Vec<MetricsReport>)> {
    let docs: Vec<&Document> = corpus.documents().collect();
    let instances = build_instances(&docs, &model.variant, model, scope)?;
    let preds = predict_instances(model, &instances)?;
    let reports = scoped_reports(&preds, rho, model.variant.conventional_prompt, None)?;
    Ok((preds, reports))
}

/// Threshold sweep of existing predictions.
pub fn sweep_predictions(
    preds: &[PairPrediction],
    mode: RuleMode,
    grid: &[f64],
) -> Result<Vec<SweepPoint>> {
    let triples: Vec<(f64, f64, Label)> = preds.iter().map(|p| (p.p1, p.p2, p.gold)).collect();
    sweep(&triples, mode, grid)
}

/// CSV table over ablation results: one row per variant and scope.
pub fn ablation_table_csv(results: &[CrossValReport]) -> String {
    let mut out = String::from("variant,scope,precision,recall,f1,n_pairs\n");
    for r in results {
        for m in &r.averaged {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{}\n",
                r.variant,
                m.scope.as_str(),
                m.precision,
                m.recall,
                m.f1,
                m.n_pairs
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkpoint::load_checkpoint;
    use crate::corpus::ScopeFilter;
    use crate::decision::default_grid;
    use crate::evaluation::reports_to_csv;
    use crate::synthetic::{generate, SyntheticConfig};

    fn tiny_corpus() -> Corpus {
        generate(&SyntheticConfig {
            n_docs: 12,
            n_topics: 8,
            seed: 3,
        })
        .unwrap()
    }

    fn tiny_cfg() -> TrainingConfig {
        TrainingConfig {
            dim: 8,
            max_len: 48,
            learning_rate: 1e-3,
            epochs: 1,
            batch_size: 8,
            neg_sample_p: 0.5,
            patience: 0,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn plan_kinds() {
        let corpus = tiny_corpus();
        let esc = plan_for(&corpus, "esc").unwrap();
        assert_eq!(esc.folds.len(), 5);
        assert_eq!(esc.dev_units.len(), 2);
        let ctb = plan_for(&corpus, "ctb").unwrap();
        assert_eq!(ctb.folds.len(), 10);
        assert!(ctb.dev_units.is_empty());
        assert!(plan_for(&corpus, "nope").is_err());
    }

    #[test]
    fn train_checkpoint_evaluate_round_trip() {
        let corpus = tiny_corpus();
        let cfg = tiny_cfg();
        let dir = tempfile::tempdir().unwrap();
        let (model, state) = train_full(&corpus, &cfg, Some(dir.path())).unwrap();
        assert!(state.step > 0);
        assert!(dir.path().join("train_log.jsonl").exists());
        assert!(dir.path().join("run_manifest.json").exists());

        let (loaded, loaded_state) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(loaded_state, state);
        let (_, direct) = evaluate(&corpus, &model, 0.6, ScopeFilter::All).unwrap();
        let (_, reloaded) = evaluate(&corpus, &loaded, 0.6, ScopeFilter::All).unwrap();
        // byte-identical reports from the restored checkpoint
        assert_eq!(reports_to_csv(&direct), reports_to_csv(&reloaded));
    }

    #[test]
    fn evaluate_is_deterministic() {
        let corpus = tiny_corpus();
        let (model, _) = train_full(&corpus, &tiny_cfg(), None).unwrap();
        let (preds_a, reports_a) = evaluate(&corpus, &model, 0.6, ScopeFilter::All).unwrap();
        let (preds_b, reports_b) = evaluate(&corpus, &model, 0.6, ScopeFilter::All).unwrap();
        assert_eq!(preds_a, preds_b);
        assert_eq!(
            serde_json::to_string(&reports_a).unwrap(),
            serde_json::to_string(&reports_b).unwrap()
        );
    }

    #[test]
    fn sweep_over_predictions() {
        let corpus = tiny_corpus();
        let (model, _) = train_full(&corpus, &tiny_cfg(), None).unwrap();
        let (preds, _) = evaluate(&corpus, &model, 0.6, ScopeFilter::All).unwrap();
        let rows = sweep_predictions(&preds, RuleMode::Joint, &default_grid()).unwrap();
        assert_eq!(rows.len(), 21);
        assert_eq!(rows[0].recall, 1.0); // rho = 0 accepts everything
    }

    #[test]
    fn scope_filter_restricts_instances() {
        let corpus = tiny_corpus();
        let (model, _) = train_full(&corpus, &tiny_cfg(), None).unwrap();
        let (all, _) = evaluate(&corpus, &model, 0.6, ScopeFilter::All).unwrap();
        let (intra, _) = evaluate(&corpus, &model, 0.6, ScopeFilter::Intra).unwrap();
        assert!(intra.len() < all.len());
        assert!(intra.iter().all(|p| p.scope == crate::corpus::Scope::Intra));
    }
}
