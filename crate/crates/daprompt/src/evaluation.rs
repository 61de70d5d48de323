//! Metrics, scoped reports, cross-validation and the ablation runner.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    enumerate_pairs, negative_sample, scope_matches, Corpus, Document, FoldPlan, Label, Labeled,
    Scope,
};
use crate::decision::{joint_decide, Decision, SweepPoint, Verdict};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, PromptModel, VariantConfig};
use crate::templating::{build_instance, PromptInstance};
use crate::training::{fit, select_threshold, StepLog, TrainState, TrainingConfig};
use crate::vocab::Tokenizer;

/// Binary confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn count(&mut self, verdict: Verdict, gold: Label) {
        match (verdict, gold) {
            (Verdict::Accept, Label::Causal) => self.tp += 1,
            (Verdict::Accept, Label::None) => self.fp += 1,
            (Verdict::Reject, Label::Causal) => self.fn_ += 1,
            (Verdict::Reject, Label::None) => self.tn += 1,
        }
    }

    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Count verdict/gold pairs; the slices must be aligned.
pub fn confusion(decisions: &[Decision], golds: &[Label]) -> Result<Confusion> {
    if decisions.len() != golds.len() {
        return Err(Error::Contract(format!(
            "{} decisions vs {} gold labels",
            decisions.len(),
            golds.len()
        )));
    }
    let mut c = Confusion::default();
    for (d, &g) in decisions.iter().zip(golds) {
        c.count(d.verdict, g);
    }
    Ok(c)
}

/// Which slice of the pairs a report covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeKind {
    Intra,
    Cross,
    Overall,
}

impl ScopeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScopeKind::Intra => "intra",
            ScopeKind::Cross => "cross",
            ScopeKind::Overall => "overall",
        }
    }
}

/// Precision/recall/F1 over one slice of pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scope: ScopeKind,
    pub fold_id: Option<usize>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_pairs: u64,
}

/// Precision, recall and F1 with the 0/0 := 0 convention.
pub fn prf1(c: &Confusion) -> MetricsReport {
    let p_den = c.tp + c.fp;
    let r_den = c.tp + c.fn_;
    let precision = if p_den == 0 { 0.0 } else { c.tp as f64 / p_den as f64 };
    let recall = if r_den == 0 { 0.0 } else { c.tp as f64 / r_den as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    MetricsReport {
        scope: ScopeKind::Overall,
        fold_id: None,
        precision,
        recall,
        f1,
        n_pairs: c.total(),
    }
}

/// One scored pair: the decision inputs plus everything needed for slicing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPrediction {
    pub doc_id: String,
    pub first: String,
    pub second: String,
    pub scope: Scope,
    pub p1: f64,
    pub p2: f64,
    pub gold: Label,
}

/// Verdict for one prediction: the joint rule at `rho`, or argmax (P(cause)
/// above one half, ties to reject) for the conventional baseline.
pub fn decide_prediction(p1: f64, p2: f64, rho: f64, conventional: bool) -> Result<Verdict> {
    if conventional {
        Ok(if p1 > 0.5 { Verdict::Accept } else { Verdict::Reject })
    } else {
        Ok(joint_decide(p1, p2, rho)?.verdict)
    }
}

/// Intra/cross/overall confusions; intra + cross sum to overall by construction.
pub fn scoped_confusions(
    preds: &[PairPrediction],
    rho: f64,
    conventional: bool,
) -> Result<[Confusion; 3]> {
    let mut intra = Confusion::default();
    let mut cross = Confusion::default();
    for p in preds {
        let v = decide_prediction(p.p1, p.p2, rho, conventional)?;
        match p.scope {
            Scope::Intra => intra.count(v, p.gold),
            Scope::Cross => cross.count(v, p.gold),
        }
    }
    let mut overall = intra;
    overall.add(&cross);
    Ok([intra, cross, overall])
}

/// The three scoped reports for one decision threshold.
pub fn scoped_reports(
    preds: &[PairPrediction],
    rho: f64,
    conventional: bool,
    fold_id: Option<usize>,
) -> Result<Vec<MetricsReport>> {
    let [intra, cross, overall] = scoped_confusions(preds, rho, conventional)?;
    Ok([
        (ScopeKind::Intra, intra),
        (ScopeKind::Cross, cross),
        (ScopeKind::Overall, overall),
    ]
    .into_iter()
    .map(|(scope, c)| MetricsReport {
        scope,
        fold_id,
        ..prf1(&c)
    })
    .collect())
}

/// Arithmetic mean per scope across folds; folds with no pairs in a scope are
/// skipped for that scope. `n_pairs` sums. Permutation-invariant by summing
/// before dividing.
pub fn average_reports(per_fold: &[Vec<MetricsReport>]) -> Vec<MetricsReport> {
    [ScopeKind::Intra, ScopeKind::Cross, ScopeKind::Overall]
        .into_iter()
        .map(|scope| {
            let rows: Vec<&MetricsReport> = per_fold
                .iter()
                .flatten()
                .filter(|r| r.scope == scope && r.n_pairs > 0)
                .collect();
            let n = rows.len() as f64;
            let sum = |f: fn(&MetricsReport) -> f64| {
                if rows.is_empty() {
                    0.0
                } else {
                    rows.iter().map(|r| f(r)).sum::<f64>() / n
                }
            };
            MetricsReport {
                scope,
                fold_id: None,
                precision: sum(|r| r.precision),
                recall: sum(|r| r.recall),
                f1: sum(|r| r.f1),
                n_pairs: rows.iter().map(|r| r.n_pairs).sum(),
            }
        })
        .collect()
}

fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

/// CSV with a fixed header and (scope, fold) ordering; byte-stable for equal
/// inputs.
pub fn reports_to_csv(reports: &[MetricsReport]) -> String {
    let mut rows: Vec<&MetricsReport> = reports.iter().collect();
    rows.sort_by_key(|r| (r.scope, r.fold_id));
    let mut out = String::from("scope,fold,precision,recall,f1,n_pairs\n");
    for r in rows {
        let fold = r.fold_id.map_or(String::from("avg"), |i| i.to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.scope.as_str(),
            fold,
            fmt_f(r.precision),
            fmt_f(r.recall),
            fmt_f(r.f1),
            r.n_pairs
        ));
    }
    out
}

/// CSV form of a threshold sweep, one row per grid point.
pub fn sweep_to_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("threshold,precision,recall,f1\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f(p.threshold),
            fmt_f(p.precision),
            fmt_f(p.recall),
            fmt_f(p.f1)
        ));
    }
    out
}

impl Labeled for PromptInstance {
    fn label(&self) -> Label {
        self.gold
    }
}

fn docs_for_units<'c>(corpus: &'c Corpus, units: &[String]) -> Result<Vec<&'c Document>> {
    let mut docs = Vec::new();
    for unit in units {
        let mut found = false;
        for d in corpus.documents() {
            if d.topic_id == *unit || d.doc_id == *unit {
                docs.push(d);
                found = true;
            }
        }
        if !found {
            return Err(Error::Config(format!(
                "fold unit {unit} matches no topic or document"
            )));
        }
    }
    Ok(docs)
}

/// Build prompt instances for every in-scope pair of the given documents.
pub fn build_instances(
    docs: &[&Document],
    variant: &VariantConfig,
    model: &PromptModel,
    scope: crate::corpus::ScopeFilter,
) -> Result<Vec<PromptInstance>> {
    let mut out = Vec::new();
    for doc in docs {
        for pair in enumerate_pairs(doc) {
            if !scope_matches(pair.scope, scope) {
                continue;
            }
            out.push(build_instance(
                doc,
                &pair,
                variant,
                &model.vocab,
                model.config.max_len,
            )?);
        }
    }
    Ok(out)
}

/// Score instances into per-pair predictions.
pub fn predict_instances(
    model: &PromptModel,
    instances: &[PromptInstance],
) -> Result<Vec<PairPrediction>> {
    instances
        .iter()
        .map(|inst| {
            let pred = model.predict_masks(inst)?;
            let (p1, p2) = pred.decision_pair();
            Ok(PairPrediction {
                doc_id: inst.pair_ref.doc_id.clone(),
                first: inst.pair_ref.first.clone(),
                second: inst.pair_ref.second.clone(),
                scope: inst.scope,
                p1,
                p2,
                gold: inst.gold,
            })
        })
        .collect()
}

/// Result of training and evaluating one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold_id: usize,
    /// Decision threshold used on the test split.
    pub rho: f64,
    pub n_train_instances: usize,
    pub reports: Vec<MetricsReport>,
    pub train_state: TrainState,
}

/// Full cross-validation output for one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub variant: String,
    pub per_fold: Vec<FoldResult>,
    pub averaged: Vec<MetricsReport>,
}

impl CrossValReport {
    /// Averaged F1 of one scope slice.
    pub fn f1(&self, scope: ScopeKind) -> f64 {
        self.averaged
            .iter()
            .find(|r| r.scope == scope)
            .map_or(0.0, |r| r.f1)
    }
}

/// Train and evaluate each fold of the plan, returning per-fold and averaged
/// metrics. Deterministic for a fixed config.
pub fn cross_validate(
    corpus: &Corpus,
    plan: &FoldPlan,
    cfg: &TrainingConfig,
) -> Result<CrossValReport> {
    cross_validate_logged(corpus, plan, cfg, |_| {})
}

/// `cross_validate` with a per-step training-log callback.
pub fn cross_validate_logged(
    corpus: &Corpus,
    plan: &FoldPlan,
    cfg: &TrainingConfig,
    mut log_sink: impl FnMut(&StepLog),
) -> Result<CrossValReport> {
    cfg.validate()?;
    if plan.folds.is_empty() {
        return Err(Error::Config("fold plan has no folds".into()));
    }
    let tokenizer = Tokenizer::build(corpus.vocabulary());
    let dev_docs = docs_for_units(corpus, &plan.dev_units)?;
    let mut per_fold = Vec::with_capacity(plan.folds.len());

    for (fold_id, fold) in plan.folds.iter().enumerate() {
        let fold_seed = cfg.seed.wrapping_add(fold_id as u64);
        let mut model = PromptModel::new(
            tokenizer.clone(),
            ModelConfig {
                backbone_name: cfg.backbone_name.clone(),
                dim: cfg.dim,
                max_len: cfg.max_len,
                seed: fold_seed,
            },
            cfg.variant,
        )?;
        let train_docs = docs_for_units(corpus, &fold.train_units)?;
        let test_docs = docs_for_units(corpus, &fold.test_units)?;
        let all_train = build_instances(&train_docs, &cfg.variant, &model, cfg.scope)?;
        let train = negative_sample(&all_train, cfg.neg_sample_p, fold_seed)?;
        let dev = build_instances(&dev_docs, &cfg.variant, &model, cfg.scope)?;

        let fold_cfg = TrainingConfig {
            seed: fold_seed,
            ..cfg.clone()
        };
        let state = fit(&mut model, &train, &dev, &fold_cfg, TrainState::default(), |log| {
            log_sink(log)
        })?;

        let rho = if cfg.variant.conventional_prompt {
            cfg.rho
        } else if cfg.select_rho && !dev.is_empty() {
            let dev_preds = predict_instances(&model, &dev)?;
            let triples: Vec<(f64, f64, Label)> =
                dev_preds.iter().map(|p| (p.p1, p.p2, p.gold)).collect();
            select_threshold(&triples, &crate::decision::default_grid())?
        } else {
            cfg.rho
        };

        let test = build_instances(&test_docs, &cfg.variant, &model, cfg.scope)?;
        let preds = predict_instances(&model, &test)?;
        let reports =
            scoped_reports(&preds, rho, cfg.variant.conventional_prompt, Some(fold_id))?;
        per_fold.push(FoldResult {
            fold_id,
            rho,
            n_train_instances: train.len(),
            reports,
            train_state: state,
        });
    }

    let averaged = average_reports(
        &per_fold
            .iter()
            .map(|f| f.reports.clone())
            .collect::<Vec<_>>(),
    );
    Ok(CrossValReport {
        variant: cfg.variant.name().to_string(),
        per_fold,
        averaged,
    })
}

/// The standard ablation sweep: the full model and its four reduced variants,
/// all sharing the base config and seed.
pub const ABLATION_VARIANTS: [&str; 5] = ["full", "sim", "shm", "et", "prompt"];

pub fn run_ablation(
    corpus: &Corpus,
    plan: &FoldPlan,
    base: &TrainingConfig,
) -> Result<Vec<CrossValReport>> {
    ABLATION_VARIANTS
        .iter()
        .map(|name| {
            let cfg = TrainingConfig {
                variant: VariantConfig::from_name(name)?,
                ..base.clone()
            };
            cross_validate(corpus, plan, &cfg)
        })
        .collect()
}

/// Gold labels of predictions keyed by (doc, first, second); used for audits.
pub fn prediction_gold_map(preds: &[PairPrediction]) -> HashMap<(String, String, String), Label> {
    preds
        .iter()
        .map(|p| ((p.doc_id.clone(), p.first.clone(), p.second.clone()), p.gold))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::DecisionRule;
    use proptest::prelude::*;

    fn decision(v: Verdict) -> Decision {
        Decision {
            verdict: v,
            p1: 0.5,
            p2: 0.5,
            rule: DecisionRule::joint(0.6),
        }
    }

    #[test]
    fn metrics_oracle_case() {
        let c = Confusion {
            tp: 64,
            fp: 36,
            fn_: 26,
            tn: 874,
        };
        let m = prf1(&c);
        assert!((m.precision - 0.640).abs() < 1e-9);
        assert!((m.recall - 0.711).abs() < 1e-3);
        assert!((m.f1 - 0.674).abs() < 1e-3);
        assert_eq!(m.n_pairs, 1000);
    }

    #[test]
    fn zero_denominator_conventions() {
        let all_reject = Confusion {
            tp: 0,
            fp: 0,
            fn_: 5,
            tn: 5,
        };
        let m = prf1(&all_reject);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        let no_pos = Confusion {
            tp: 0,
            fp: 3,
            fn_: 0,
            tn: 5,
        };
        let m = prf1(&no_pos);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        let empty = prf1(&Confusion::default());
        assert_eq!(empty.f1, 0.0);
    }

    #[test]
    fn perfect_and_inverted_predictions() {
        let perfect = Confusion {
            tp: 10,
            fp: 0,
            fn_: 0,
            tn: 20,
        };
        assert_eq!(prf1(&perfect).f1, 1.0);
        let inverted = Confusion {
            tp: 0,
            fp: 20,
            fn_: 10,
            tn: 0,
        };
        assert_eq!(prf1(&inverted).f1, 0.0);
    }

    #[test]
    fn confusion_counts_all_four_cells() {
        let decisions = vec![
            decision(Verdict::Accept),
            decision(Verdict::Accept),
            decision(Verdict::Reject),
            decision(Verdict::Reject),
        ];
        let golds = vec![Label::Causal, Label::None, Label::Causal, Label::None];
        let c = confusion(&decisions, &golds).unwrap();
        assert_eq!(
            c,
            Confusion {
                tp: 1,
                fp: 1,
                fn_: 1,
                tn: 1
            }
        );
        assert!(confusion(&decisions, &golds[..3]).is_err());
    }

    #[test]
    fn scoped_reports_decompose() {
        let preds = vec![
            PairPrediction {
                doc_id: "d".into(),
                first: "a".into(),
                second: "b".into(),
                scope: Scope::Intra,
                p1: 0.9,
                p2: 0.9,
                gold: Label::Causal,
            },
            PairPrediction {
                doc_id: "d".into(),
                first: "a".into(),
                second: "c".into(),
                scope: Scope::Cross,
                p1: 0.1,
                p2: 0.1,
                gold: Label::None,
            },
            PairPrediction {
                doc_id: "d".into(),
                first: "b".into(),
                second: "c".into(),
                scope: Scope::Cross,
                p1: 0.8,
                p2: 0.7,
                gold: Label::None,
            },
        ];
        let [intra, cross, overall] = scoped_confusions(&preds, 0.6, false).unwrap();
        assert_eq!(intra.total() + cross.total(), overall.total());
        assert_eq!(intra.tp + cross.tp, overall.tp);
        assert_eq!(overall.total(), 3);
        let reports = scoped_reports(&preds, 0.6, false, Some(2)).unwrap();
        assert_eq!(reports.len(), 3);
        assert!(reports.iter().all(|r| r.fold_id == Some(2)));
    }

    #[test]
    fn averaging_is_permutation_invariant_and_skips_empty() {
        let fold = |f1: f64, n: u64| {
            vec![MetricsReport {
                scope: ScopeKind::Overall,
                fold_id: Some(0),
                precision: f1,
                recall: f1,
                f1,
                n_pairs: n,
            }]
        };
        let a = vec![fold(0.5, 10), fold(0.7, 10), fold(0.0, 0)];
        let b = vec![fold(0.0, 0), fold(0.7, 10), fold(0.5, 10)];
        let avg_a = average_reports(&a);
        let avg_b = average_reports(&b);
        assert_eq!(avg_a, avg_b);
        let overall = avg_a.iter().find(|r| r.scope == ScopeKind::Overall).unwrap();
        // the empty fold is excluded from the mean
        assert!((overall.f1 - 0.6).abs() < 1e-12);
        assert_eq!(overall.n_pairs, 20);
    }

    #[test]
    fn csv_is_stable_and_ordered() {
        let reports = vec![
            MetricsReport {
                scope: ScopeKind::Overall,
                fold_id: Some(1),
                precision: 0.5,
                recall: 0.5,
                f1: 0.5,
                n_pairs: 4,
            },
            MetricsReport {
                scope: ScopeKind::Intra,
                fold_id: Some(0),
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                n_pairs: 2,
            },
        ];
        let csv = reports_to_csv(&reports);
        let mut shuffled = reports.clone();
        shuffled.reverse();
        assert_eq!(csv, reports_to_csv(&shuffled));
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("scope,fold,precision,recall,f1,n_pairs"));
        assert!(lines.next().unwrap().starts_with("intra,0,"));
    }

    #[test]
    fn conventional_rule_ties_reject() {
        assert_eq!(
            decide_prediction(0.5, 0.5, 0.6, true).unwrap(),
            Verdict::Reject
        );
        assert_eq!(
            decide_prediction(0.51, 0.0, 0.6, true).unwrap(),
            Verdict::Accept
        );
    }

    proptest! {
        #[test]
        fn recount_matches_manual_tallies(cells in proptest::collection::vec((0..2usize, 0..2usize), 0..200)) {
            let mut c = Confusion::default();
            for &(v, g) in &cells {
                let verdict = if v == 0 { Verdict::Accept } else { Verdict::Reject };
                let gold = if g == 0 { Label::Causal } else { Label::None };
                c.count(verdict, gold);
            }
            let tp = cells.iter().filter(|&&(v, g)| v == 0 && g == 0).count() as u64;
            let tn = cells.iter().filter(|&&(v, g)| v == 1 && g == 1).count() as u64;
            prop_assert_eq!(c.tp, tp);
            prop_assert_eq!(c.tn, tn);
            prop_assert_eq!(c.total(), cells.len() as u64);
            let m = prf1(&c);
            prop_assert!((0.0..=1.0).contains(&m.precision));
            prop_assert!((0.0..=1.0).contains(&m.recall));
            prop_assert!((0.0..=1.0).contains(&m.f1));
        }
    }
}
