//! Transition tables of the two-layer model.
//!
//! Activities are indexed `0..n` in training order, with the neutral activity
//! at index `n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NEUTRAL: &str = "neutral";
/// Smoothing floor for sub-activity transitions.
pub const TRANSITION_FLOOR: f64 = 1e-6;

/// Hand-set `P(z | z_prev)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManualActivityTransitions {
    /// Activity → same activity.
    pub stay: f64,
    /// Activity → neutral.
    pub to_neutral: f64,
    /// Activity → any other activity, split evenly.
    pub to_other: f64,
    /// Neutral → neutral; the remainder is split evenly over the activities.
    pub neutral_stay: f64,
}

impl Default for ManualActivityTransitions {
    fn default() -> Self {
        Self {
            stay: 0.6,
            to_neutral: 0.3,
            to_other: 0.1,
            neutral_stay: 0.4,
        }
    }
}

impl ManualActivityTransitions {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.stay, self.to_neutral, self.to_other, self.neutral_stay];
        if vals.iter().any(|v| !(0.0..=1.0).contains(v) || !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "manual transition values must lie in [0, 1]".into(),
            ));
        }
        if self.stay + self.to_neutral <= 0.0 || self.neutral_stay >= 1.0 {
            return Err(Error::InvalidConfig(
                "manual transition rows cannot be normalized".into(),
            ));
        }
        Ok(())
    }

    /// Row-stochastic `(n+1)×(n+1)` table, rows indexed by the previous
    /// activity. With a single activity the `to_other` mass has nowhere to go
    /// and the row is renormalized.
    pub fn table(&self, n: usize) -> Vec<Vec<f64>> {
        let size = n + 1;
        let mut rows = Vec::with_capacity(size);
        for prev in 0..n {
            let mut row = vec![0.0; size];
            for (z, v) in row.iter_mut().enumerate().take(n) {
                *v = if z == prev {
                    self.stay
                } else {
                    self.to_other / (n - 1) as f64
                };
            }
            row[n] = self.to_neutral;
            normalize(&mut row);
            rows.push(row);
        }
        let mut neutral = vec![(1.0 - self.neutral_stay) / n.max(1) as f64; size];
        neutral[n] = self.neutral_stay;
        normalize(&mut neutral);
        rows.push(neutral);
        rows
    }
}

fn normalize(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    if s > 0.0 {
        row.iter_mut().for_each(|v| *v /= s);
    } else {
        let u = 1.0 / row.len() as f64;
        row.iter_mut().for_each(|v| *v = u);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTables {
    /// Non-neutral activity names; neutral is implicit at index `len()`.
    pub activities: Vec<String>,
    /// `sub_trans[z][y][y']` = P(y' | y, z) for non-neutral z.
    pub sub_trans: Vec<Vec<Vec<f64>>>,
    /// `neutral_trans[y][y']` = P(y' | y, neutral).
    pub neutral_trans: Vec<Vec<f64>>,
    /// `act_trans[z_prev][z]` = P(z | z_prev), neutral included.
    pub act_trans: Vec<Vec<f64>>,
    /// P(y).
    pub sub_prior: Vec<f64>,
    /// P(z₀), uniform.
    pub act_prior: Vec<f64>,
    pub floor: f64,
}

/// Soft labels of one training sequence.
#[derive(Debug, Clone)]
pub struct LabeledPosteriors {
    pub activity: String,
    /// Per-frame `P(y | x)` rows.
    pub posteriors: Vec<Vec<f64>>,
}

/// Counts soft sub-activity transitions per activity.
///
/// For each activity the expected transition counts
/// `Σ_t P(y_{t−1} = y)·P(y_t = y')` are row-normalized (rows never visited
/// become uniform) and mixed with the floor as `(1 − mε)·p + ε`, so every
/// entry is at least `ε` and rows still sum to one.
pub fn estimate_transitions(
    sequences: &[LabeledPosteriors],
    activities: &[String],
    sub_prior: &[f64],
    manual: &ManualActivityTransitions,
    floor: f64,
) -> Result<TransitionTables> {
    manual.validate()?;
    let m = sub_prior.len();
    if m == 0 {
        return Err(Error::InvalidModel("empty sub-activity set".into()));
    }
    if !(floor > 0.0 && floor * m as f64 <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "transition floor {floor} is invalid for {m} sub-activities"
        )));
    }
    let mut sub_trans = Vec::with_capacity(activities.len());
    for act in activities {
        let mut counts = vec![vec![0.0; m]; m];
        let mut seen = false;
        for seq in sequences.iter().filter(|s| &s.activity == act) {
            seen = true;
            for pair in seq.posteriors.windows(2) {
                if pair[0].len() != m || pair[1].len() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        got: pair[0].len().min(pair[1].len()),
                    });
                }
                for (y, &a) in pair[0].iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    for (c, &b) in counts[y].iter_mut().zip(&pair[1]) {
                        *c += a * b;
                    }
                }
            }
        }
        if !seen {
            return Err(Error::MissingActivityData(act.clone()));
        }
        for row in counts.iter_mut() {
            normalize(row);
            for v in row.iter_mut() {
                *v = (1.0 - m as f64 * floor) * *v + floor;
            }
        }
        sub_trans.push(counts);
    }
    let neutral_trans = neutral_transition(&sub_trans, floor);
    let n = activities.len();
    Ok(TransitionTables {
        activities: activities.to_vec(),
        sub_trans,
        neutral_trans,
        act_trans: manual.table(n),
        sub_prior: sub_prior.to_vec(),
        act_prior: vec![1.0 / (n + 1) as f64; n + 1],
        floor,
    })
}

/// `P(y'|y, neutral) ∝ max(ε, 1 − Σ_z P(y'|y, z))`, row-normalized.
pub fn neutral_transition(sub_trans: &[Vec<Vec<f64>>], floor: f64) -> Vec<Vec<f64>> {
    let m = sub_trans.first().map_or(0, |t| t.len());
    let mut rows = vec![vec![0.0; m]; m];
    for (y, row) in rows.iter_mut().enumerate() {
        for (y2, v) in row.iter_mut().enumerate() {
            let used: f64 = sub_trans.iter().map(|t| t[y][y2]).sum();
            *v = (1.0 - used).max(floor);
        }
        normalize(row);
    }
    rows
}

impl TransitionTables {
    /// Number of activities including neutral.
    pub fn num_activities(&self) -> usize {
        self.activities.len() + 1
    }

    pub fn num_sub_activities(&self) -> usize {
        self.sub_prior.len()
    }

    pub fn neutral_index(&self) -> usize {
        self.activities.len()
    }

    pub fn activity_name(&self, z: usize) -> &str {
        self.activities.get(z).map_or(NEUTRAL, String::as_str)
    }

    /// Sub-activity transition rows for activity `z` (neutral included).
    pub fn sub_rows(&self, z: usize) -> &[Vec<f64>] {
        if z < self.activities.len() {
            &self.sub_trans[z]
        } else {
            &self.neutral_trans
        }
    }

    /// Checks shapes, row sums (within 1e-9) and positivity.
    pub fn validate(&self) -> Result<()> {
        let m = self.num_sub_activities();
        let n1 = self.num_activities();
        let check_rows = |name: &str, rows: &[Vec<f64>], width: usize| -> Result<()> {
            for (i, r) in rows.iter().enumerate() {
                if r.len() != width {
                    return Err(Error::InvalidModel(format!("{name} row {i} has {} entries", r.len())));
                }
                let s: f64 = r.iter().sum();
                if (s - 1.0).abs() > 1e-9 || r.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                    return Err(Error::InvalidModel(format!("{name} row {i} is not a distribution")));
                }
            }
            Ok(())
        };
        if self.sub_trans.len() != self.activities.len() {
            return Err(Error::InvalidModel("sub_trans/activities length mismatch".into()));
        }
        for t in &self.sub_trans {
            if t.len() != m {
                return Err(Error::InvalidModel("sub_trans has wrong row count".into()));
            }
            check_rows("sub_trans", t, m)?;
        }
        if self.neutral_trans.len() != m || self.act_trans.len() != n1 {
            return Err(Error::InvalidModel("table shapes are inconsistent".into()));
        }
        check_rows("neutral_trans", &self.neutral_trans, m)?;
        check_rows("act_trans", &self.act_trans, n1)?;
        check_rows("sub_prior", std::slice::from_ref(&self.sub_prior), m)?;
        check_rows("act_prior", std::slice::from_ref(&self.act_prior), n1)?;
        Ok(())
    }
}
