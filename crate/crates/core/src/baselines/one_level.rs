//! One-level MEMM over activities, fed by calibrated classifier posteriors.

use crate::error::{Error, Result};

/// Restricts an activity transition table (neutral in the last row and column)
/// to the activities themselves and renormalizes each row.
pub fn activity_subtable(act_trans: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = act_trans.len().saturating_sub(1);
    act_trans[..n]
        .iter()
        .map(|row| {
            let sub = &row[..n];
            let s: f64 = sub.iter().sum();
            if s > 0.0 {
                sub.iter().map(|v| v / s).collect()
            } else {
                vec![1.0 / n as f64; n]
            }
        })
        .collect()
}

/// `α'(j) ∝ Σ_k α(k)·P(j|k)·P(j|x)/P(j)` with a uniform `P(j)`.
pub fn one_level_step(alpha: &[f64], posterior: &[f64], trans: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = alpha.len();
    if posterior.len() != n || trans.len() != n || trans.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: posterior.len(),
        });
    }
    let prior = 1.0 / n as f64;
    let mut next: Vec<f64> = (0..n)
        .map(|j| {
            let carried: f64 = (0..n).map(|k| alpha[k] * trans[k][j]).sum();
            carried * posterior[j] / prior
        })
        .collect();
    let s: f64 = next.iter().sum();
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::InvalidModel("one-level recursion lost all mass".into()));
    }
    next.iter_mut().for_each(|v| *v /= s);
    Ok(next)
}

/// Streaming state of the one-level model, starting from a uniform belief.
#[derive(Debug, Clone)]
pub struct OneLevelTracker {
    alpha: Vec<f64>,
    trans: Vec<Vec<f64>>,
}

impl OneLevelTracker {
    pub fn new(trans: Vec<Vec<f64>>) -> Self {
        let n = trans.len();
        Self {
            alpha: vec![1.0 / n as f64; n],
            trans,
        }
    }

    pub fn step(&mut self, posterior: &[f64]) -> Result<&[f64]> {
        self.alpha = one_level_step(&self.alpha, posterior, &self.trans)?;
        Ok(&self.alpha)
    }

    pub fn belief(&self) -> &[f64] {
        &self.alpha
    }
}
