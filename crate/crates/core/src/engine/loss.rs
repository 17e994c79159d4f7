use serde::{Deserialize, Serialize};

use crate::lang::DescriptionDistribution;
use crate::mdp::TabularPolicy;
use crate::{Error, Result};

/// Value reported for the NLL of a zero-probability action.
pub const L2_CAP: f64 = 100.0;

/// `KL(target ‖ model)`. With `smoothing = Some(ε)` the model is mixed with
/// the uniform distribution over the joint support at weight ε first.
pub fn compute_l1(
    target: &DescriptionDistribution,
    model: &DescriptionDistribution,
    smoothing: Option<f64>,
) -> Result<f64> {
    let smoothed;
    let model = match smoothing {
        Some(eps) if eps > 0.0 => {
            if eps >= 1.0 {
                return Err(Error::Config(format!("smoothing {eps} must lie in [0, 1)")));
            }
            let mut mix = DescriptionDistribution::default();
            let support: std::collections::BTreeSet<_> =
                target.iter().chain(model.iter()).map(|(d, _)| d.clone()).collect();
            let uniform = eps / support.len() as f64;
            for d in support {
                let q = model.prob(&d);
                mix.accumulate(d, (1.0 - eps) * q + uniform);
            }
            smoothed = mix;
            &smoothed
        }
        _ => model,
    };
    let mut kl = 0.0;
    for (d, p) in target.iter() {
        if p == 0.0 {
            continue;
        }
        let q = model.prob(d);
        if q == 0.0 {
            return Err(Error::ZeroModelMass { description: d.canonical() });
        }
        kl += p * (p / q).ln();
    }
    Ok(kl.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Value {
    pub loss: f64,
    /// The action had zero probability and `loss` is [`L2_CAP`].
    pub capped: bool,
}

/// `−log π(a^r | s)`.
pub fn compute_l2(policy: &TabularPolicy, state: usize, refined_action: usize) -> Result<L2Value> {
    if state >= policy.num_states() {
        return Err(Error::StateOutOfRange(state));
    }
    if refined_action >= policy.num_actions() {
        return Err(Error::ActionOutOfRange(refined_action));
    }
    let p = policy.prob(state, refined_action);
    let loss = -p.ln();
    if p == 0.0 || loss > L2_CAP {
        return Ok(L2Value { loss: L2_CAP, capped: true });
    }
    Ok(L2Value { loss: loss.max(0.0), capped: false })
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// `−log softmax(logits)[action]`, computed stably.
pub fn l2_from_logits(logits: &[f64], action: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[action]
}

/// Gradient of [`l2_from_logits`] with respect to the logits.
pub fn l2_logit_gradient(logits: &[f64], action: usize) -> Vec<f64> {
    let mut g = softmax(logits);
    g[action] -= 1.0;
    g
}
