//! Online graph-structure selection.
//!
//! At time `t` every split point `t'` in `[max(0, t − T), t − 1]` is tried:
//! frames `t'+1..=t` form the newest substructure and the structure chosen at
//! `t'` explains everything before it. For each activity `z`
//!
//! ```text
//! cand(z, t') = Σ_{z'} P(z' | O; G_{t'}) · max_y P(z, y… | O_{t'+1..t}, z')
//! P(z | O; G_t) ∝ max_{t'} cand(z, t')
//! ```
//!
//! The stored vector is renormalized every step. All arithmetic is in log
//! space. Each step costs `O(n·m²·T²)` with `T` the substructure cap.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::substructure::{BoundaryPrior, LogTables};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_WINDOW: usize = 90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Longest substructure, in frames.
    pub max_window: usize,
    pub boundary: BoundaryPrior,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            max_window: DEFAULT_MAX_WINDOW,
            boundary: BoundaryPrior::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Arg-max activity; ties go to the lowest index.
    pub activity: usize,
    /// `P(z | O; G_t)`.
    pub posterior: Vec<f64>,
    pub log_posterior: Vec<f64>,
    /// Per activity, the split `t'` that achieved the maximum.
    pub best_split: Vec<usize>,
}

/// Per-stream dynamic-programming memory.
#[derive(Debug, Clone, Default)]
pub struct DetectorState {
    t: usize,
    initialized: bool,
    /// Emission rows of the last `T` frames, newest at the back.
    emissions: VecDeque<Vec<f64>>,
    /// `log P(y|x)` of the last `T + 1` frames.
    log_posteriors: VecDeque<Vec<f64>>,
    /// `log P(z | O; G_{t'})` for the last `T` times, newest at the back.
    scores: VecDeque<Vec<f64>>,
}

impl DetectorState {
    /// State at time 0 with a uniform activity distribution.
    pub fn new(num_activities: usize) -> Self {
        let mut scores = VecDeque::new();
        scores.push_back(vec![-(num_activities as f64).ln(); num_activities]);
        Self {
            t: 0,
            initialized: true,
            emissions: VecDeque::new(),
            log_posteriors: VecDeque::new(),
            scores,
        }
    }

    pub fn time(&self) -> usize {
        self.t
    }

    /// Most recent `log P(z | O; G_t)`.
    pub fn latest(&self) -> Option<&[f64]> {
        self.scores.back().map(Vec::as_slice)
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Advances the detector by one frame given that frame's `log P(y|x)`.
pub fn structure_step(
    state: &mut DetectorState,
    log_posterior: &[f64],
    tables: &LogTables,
    config: &DetectorConfig,
) -> Result<StepOutput> {
    if !state.initialized {
        return Err(Error::UninitializedState);
    }
    let n = tables.num_activities();
    let m = tables.num_sub_activities();
    if log_posterior.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: log_posterior.len(),
        });
    }
    if state.scores.back().map_or(0, Vec::len) != n {
        return Err(Error::InvalidModel("detector state does not match the model".into()));
    }
    let cap = config.max_window.max(1);
    let t = state.t + 1;

    state.emissions.push_back(tables.emission(log_posterior));
    if state.emissions.len() > cap {
        state.emissions.pop_front();
    }
    state.log_posteriors.push_back(log_posterior.to_vec());
    if state.log_posteriors.len() > cap + 1 {
        state.log_posteriors.pop_front();
    }

    let longest = cap.min(t);
    let emissions: Vec<&[f64]> = state.emissions.iter().map(Vec::as_slice).collect();
    let uniform = vec![-(m as f64).ln(); m];
    let scores = &state.scores;
    let posts = &state.log_posteriors;

    let per_activity: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|z| {
            let mut entry = vec![0.0; m];
            let mut scratch = Vec::with_capacity(m);
            let mut best = f64::NEG_INFINITY;
            let mut best_split = t - 1;
            for len in 1..=longest {
                let split = t - len;
                let prev = &scores[scores.len() - len];
                let carried = log_sum_exp((0..n).map(|zp| prev[zp] + tables.log_act(zp, z)));
                let boundary: &[f64] = match config.boundary {
                    BoundaryPrior::CarriedOver if split > 0 => &posts[posts.len() - 1 - len],
                    _ => &uniform,
                };
                tables.boundary(z, boundary, &mut entry);
                let window = &emissions[emissions.len() - len..];
                let cand = carried + tables.chain_max(z, &entry, window, &mut scratch);
                // strict comparison keeps the later split on ties
                if cand > best {
                    best = cand;
                    best_split = split;
                }
            }
            (best, best_split)
        })
        .collect();

    let norm = log_sum_exp(per_activity.iter().map(|p| p.0));
    if !norm.is_finite() {
        return Err(Error::InvalidModel(format!("non-finite activity scores at t = {t}")));
    }
    let log_post: Vec<f64> = per_activity.iter().map(|p| p.0 - norm).collect();
    let activity = log_post
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
        .0;

    state.scores.push_back(log_post.clone());
    if state.scores.len() > cap {
        state.scores.pop_front();
    }
    state.t = t;

    Ok(StepOutput {
        activity,
        posterior: log_post.iter().map(|v| v.exp()).collect(),
        log_posterior: log_post,
        best_split: per_activity.iter().map(|p| p.1).collect(),
    })
}

/// Runs the detector over a whole stream of per-frame log posteriors.
pub fn detect_stream(
    log_posteriors: &[Vec<f64>],
    tables: &LogTables,
    config: &DetectorConfig,
) -> Result<Vec<StepOutput>> {
    let mut state = DetectorState::new(tables.num_activities());
    log_posteriors
        .iter()
        .map(|lp| structure_step(&mut state, lp, tables, config))
        .collect()
}
