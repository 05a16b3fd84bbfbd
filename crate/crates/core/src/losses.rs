//! Training objectives as plain functions of probabilities, labels, rewards
//! and value estimates. No gradients are computed here.

use crate::error::{Error, Result};
use crate::mapf::Action;

/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` before taking logs.
pub const CLAMP: f64 = 1e-12;
pub const DEFAULT_ALPHA_IMP: f64 = 0.5;
pub const DEFAULT_ENTROPY_WEIGHT: f64 = 0.01;
pub const DEFAULT_GAMMA: f64 = 0.95;

/// A distribution over the five actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbVector(pub [f64; Action::COUNT]);

impl ProbVector {
    pub fn new(entries: [f64; Action::COUNT]) -> Result<Self> {
        if entries.iter().any(|&p| p.is_nan() || p < 0.0) {
            return Err(Error::contract(format!("negative or NaN probability in {entries:?}")));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::contract(format!("probabilities sum to {sum}")));
        }
        Ok(ProbVector(entries))
    }

    pub fn uniform() -> Self {
        ProbVector([1.0 / Action::COUNT as f64; Action::COUNT])
    }

    pub fn one_hot(action: Action) -> Self {
        let mut e = [0.0; Action::COUNT];
        e[action.index()] = 1.0;
        ProbVector(e)
    }

    /// Shannon entropy in nats; `0 ln 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self
            .0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardTrace {
    pub rewards: Vec<f64>,
    /// Value of the state after the last reward.
    pub bootstrap_value: f64,
    pub gamma: f64,
}

fn clamp(p: f64) -> f64 {
    p.clamp(CLAMP, 1.0 - CLAMP)
}

fn same_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::contract(format!("{what}: lengths {a} and {b} differ")));
    }
    if a == 0 {
        return Err(Error::contract(format!("{what}: empty batch")));
    }
    Ok(())
}

/// Mean categorical cross-entropy between one-hot targets and predictions.
pub fn imitation_loss(targets: &[ProbVector], predictions: &[ProbVector]) -> Result<f64> {
    same_len(targets.len(), predictions.len(), "imitation loss")?;
    let total: f64 = targets
        .iter()
        .zip(predictions)
        .map(|(a, p)| {
            -a.0.iter()
                .zip(&p.0)
                .filter(|(t, _)| **t != 0.0)
                .map(|(t, q)| t * clamp(*q).ln())
                .sum::<f64>()
        })
        .sum();
    Ok(total / targets.len() as f64)
}

/// Mean binary cross-entropy between {0, 1} labels and predictions.
pub fn priority_loss(targets: &[u8], predictions: &[f64]) -> Result<f64> {
    same_len(targets.len(), predictions.len(), "priority loss")?;
    let mut total = 0.0;
    for (&p, &q) in targets.iter().zip(predictions) {
        if p > 1 {
            return Err(Error::contract(format!("priority label {p} is not 0 or 1")));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::contract(format!("prediction {q} outside [0, 1]")));
        }
        let q = clamp(q);
        total -= if p == 1 { q.ln() } else { (1.0 - q).ln() };
    }
    Ok(total / targets.len() as f64)
}

pub fn combined_priority_loss(l_imp: f64, l_imt: f64, alpha_imp: f64) -> Result<f64> {
    if alpha_imp.is_nan() || alpha_imp < 0.0 {
        return Err(Error::contract(format!("alpha_imp must be >= 0, got {alpha_imp}")));
    }
    Ok(alpha_imp * l_imp + l_imt)
}

/// `R_t = r_t + γ R_{t+1}`, seeded with the bootstrap value past the end.
pub fn discounted_return(trace: &RewardTrace) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&trace.gamma) {
        return Err(Error::contract(format!("gamma {} outside [0, 1)", trace.gamma)));
    }
    if trace.rewards.is_empty() {
        return Err(Error::contract("reward trace is empty"));
    }
    let mut out = vec![0.0; trace.rewards.len()];
    let mut next = trace.bootstrap_value;
    for (t, r) in trace.rewards.iter().enumerate().rev() {
        next = r + trace.gamma * next;
        out[t] = next;
    }
    Ok(out)
}

/// Mean squared error between value estimates and returns.
pub fn value_loss(predicted: &[f64], returns: &[f64]) -> Result<f64> {
    same_len(predicted.len(), returns.len(), "value loss")?;
    let sse: f64 = predicted.iter().zip(returns).map(|(v, r)| (v - r).powi(2)).sum();
    Ok(sse / predicted.len() as f64)
}

pub fn advantage(trace: &RewardTrace, values: &[f64]) -> Result<Vec<f64>> {
    same_len(trace.rewards.len(), values.len(), "advantage")?;
    Ok(discounted_return(trace)?
        .into_iter()
        .zip(values)
        .map(|(r, v)| r - v)
        .collect())
}

/// Entropy-regularised policy-gradient loss,
/// `-(1/B) Σ [log π(a|o)·A + σ_H·H(π)]`.
///
/// The entropy bonus enters with the sign that lowers the loss for flatter
/// policies, so minimising it favours exploration.
pub fn policy_loss(
    log_probs_of_taken_actions: &[f64],
    advantages: &[f64],
    policy_dists: &[ProbVector],
    entropy_weight: f64,
) -> Result<f64> {
    same_len(log_probs_of_taken_actions.len(), advantages.len(), "policy loss")?;
    same_len(advantages.len(), policy_dists.len(), "policy loss")?;
    if entropy_weight.is_nan() || entropy_weight < 0.0 {
        return Err(Error::contract(format!("entropy weight must be >= 0, got {entropy_weight}")));
    }
    let total: f64 = log_probs_of_taken_actions
        .iter()
        .zip(advantages)
        .zip(policy_dists)
        .map(|((lp, a), pi)| lp * a + entropy_weight * pi.entropy())
        .sum();
    Ok(-total / advantages.len() as f64)
}
