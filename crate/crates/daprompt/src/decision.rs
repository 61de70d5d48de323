//! Rationality evaluation: thresholding (P1, P2) into Accept/Reject and
//! sweeping threshold grids into precision/recall/F1 curves.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::evaluation::{prf1, Confusion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleMode {
    Joint,
    Individual,
}

/// Decision rule; Joint uses `rho`, Individual uses `(rho1, rho2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub mode: RuleMode,
    pub rho: f64,
    pub rho1: f64,
    pub rho2: f64,
}

impl DecisionRule {
    pub fn joint(rho: f64) -> Self {
        DecisionRule {
            mode: RuleMode::Joint,
            rho,
            rho1: 0.0,
            rho2: 0.0,
        }
    }

    pub fn individual(rho1: f64, rho2: f64) -> Self {
        DecisionRule {
            mode: RuleMode::Individual,
            rho: 0.0,
            rho1,
            rho2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub p1: f64,
    pub p2: f64,
    pub rule: DecisionRule,
}

fn check_prob(name: &str, v: f64, hi: f64) -> Result<()> {
    if !(0.0..=hi).contains(&v) || v.is_nan() {
        return Err(Error::Contract(format!("{name}={v} outside [0, {hi}]")));
    }
    Ok(())
}

/// Joint rule: Accept iff p1 + p2 >= rho (the boundary accepts).
pub fn joint_decide(p1: f64, p2: f64, rho: f64) -> Result<Decision> {
    check_prob("p1", p1, 1.0)?;
    check_prob("p2", p2, 1.0)?;
    check_prob("rho", rho, 2.0)?;
    let verdict = if p1 + p2 >= rho {
        Verdict::Accept
    } else {
        Verdict::Reject
    };
    Ok(Decision {
        verdict,
        p1,
        p2,
        rule: DecisionRule::joint(rho),
    })
}

/// Individual rule: Accept iff p1 >= rho1 and p2 >= rho2.
pub fn individual_decide(p1: f64, p2: f64, rho1: f64, rho2: f64) -> Result<Decision> {
    check_prob("p1", p1, 1.0)?;
    check_prob("p2", p2, 1.0)?;
    check_prob("rho1", rho1, 1.0)?;
    check_prob("rho2", rho2, 1.0)?;
    let verdict = if p1 >= rho1 && p2 >= rho2 {
        Verdict::Accept
    } else {
        Verdict::Reject
    };
    Ok(Decision {
        verdict,
        p1,
        p2,
        rule: DecisionRule::individual(rho1, rho2),
    })
}

/// One row of a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Default sweep grid: 0.0 to 2.0 in steps of 0.1 (21 points).
pub fn default_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 10.0).collect()
}

fn confusion_at(
    predictions: &[(f64, f64, Label)],
    mode: RuleMode,
    threshold: f64,
) -> Result<Confusion> {
    let mut c = Confusion::default();
    for &(p1, p2, gold) in predictions {
        let d = match mode {
            RuleMode::Joint => joint_decide(p1, p2, threshold)?,
            // equal individual thresholds at the joint-equivalent sum
            RuleMode::Individual => individual_decide(p1, p2, threshold / 2.0, threshold / 2.0)?,
        };
        c.count(d.verdict, gold);
    }
    Ok(c)
}

/// Metrics at each grid threshold. The individual family sweeps equal
/// thresholds (t/2, t/2) so its axis is comparable with the joint rule.
pub fn sweep(
    predictions: &[(f64, f64, Label)],
    mode: RuleMode,
    grid: &[f64],
) -> Result<Vec<SweepPoint>> {
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Contract("sweep grid must be sorted ascending".into()));
    }
    if predictions.is_empty() {
        return Ok(Vec::new());
    }
    grid.iter()
        .map(|&t| {
            let c = confusion_at(predictions, mode, t)?;
            let m = prf1(&c);
            Ok(SweepPoint {
                threshold: t,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
            })
        })
        .collect()
}
