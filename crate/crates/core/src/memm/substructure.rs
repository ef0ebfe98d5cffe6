//! Scoring of a single substructure: one activity node together with the
//! contiguous run of sub-activity nodes attached to it.

use serde::{Deserialize, Serialize};

use super::tables::TransitionTables;
use crate::error::{Error, Result};

/// Distribution assumed for the sub-activity just before a substructure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPrior {
    #[default]
    Uniform,
    /// The GMM posterior of the frame preceding the substructure.
    CarriedOver,
}

/// Log-domain copy of the tables, laid out for the inner Viterbi loop.
#[derive(Debug, Clone)]
pub struct LogTables {
    n: usize,
    m: usize,
    /// `into[z][y * m + y']` = log P(y | y', z), neutral at `z = n − 1`.
    into: Vec<Vec<f64>>,
    /// `act[z_prev * n + z]` = log P(z | z_prev).
    act: Vec<f64>,
    log_prior: Vec<f64>,
}

impl LogTables {
    pub fn new(tables: &TransitionTables) -> Self {
        let n = tables.num_activities();
        let m = tables.num_sub_activities();
        let into = (0..n)
            .map(|z| {
                let rows = tables.sub_rows(z);
                let mut flat = vec![0.0; m * m];
                for (y_prev, row) in rows.iter().enumerate() {
                    for (y, p) in row.iter().enumerate() {
                        flat[y * m + y_prev] = p.ln();
                    }
                }
                flat
            })
            .collect();
        let act = tables
            .act_trans
            .iter()
            .flat_map(|r| r.iter().map(|p| p.ln()))
            .collect();
        Self {
            n,
            m,
            into,
            act,
            log_prior: tables.sub_prior.iter().map(|p| p.ln()).collect(),
        }
    }

    pub fn num_activities(&self) -> usize {
        self.n
    }

    pub fn num_sub_activities(&self) -> usize {
        self.m
    }

    pub fn log_act(&self, z_prev: usize, z: usize) -> f64 {
        self.act[z_prev * self.n + z]
    }

    /// `log P(y|x) − log P(y)` for one frame.
    pub fn emission(&self, log_posterior: &[f64]) -> Vec<f64> {
        log_posterior
            .iter()
            .zip(&self.log_prior)
            .map(|(a, b)| a - b)
            .collect()
    }

    /// Log of the first factor's boundary sum, `log Σ_{y'} P(y|y',z)·b(y')`,
    /// for every `y`.
    pub fn boundary(&self, z: usize, log_boundary: &[f64], out: &mut [f64]) {
        let m = self.m;
        let into = &self.into[z];
        for (y, o) in out.iter_mut().enumerate() {
            let row = &into[y * m..(y + 1) * m];
            let mut max = f64::NEG_INFINITY;
            for (a, b) in row.iter().zip(log_boundary) {
                max = max.max(a + b);
            }
            let s: f64 = row
                .iter()
                .zip(log_boundary)
                .map(|(a, b)| (a + b - max).exp())
                .sum();
            *o = max + s.ln();
        }
    }

    /// Max-product chain score over a window, in log space, without the
    /// activity transition term. `emissions[i]` is the emission row of the
    /// i-th frame; `entry[y]` the boundary term for the first frame.
    pub fn chain_max(&self, z: usize, entry: &[f64], emissions: &[&[f64]], scratch: &mut Vec<f64>) -> f64 {
        let m = self.m;
        let into = &self.into[z];
        let mut delta: Vec<f64> = entry.iter().zip(emissions[0]).map(|(a, b)| a + b).collect();
        scratch.resize(m, 0.0);
        for e in &emissions[1..] {
            for y in 0..m {
                let row = &into[y * m..(y + 1) * m];
                let mut best = f64::NEG_INFINITY;
                for (d, t) in delta.iter().zip(row) {
                    let v = d + t;
                    if v > best {
                        best = v;
                    }
                }
                scratch[y] = best + e[y];
            }
            std::mem::swap(&mut delta, scratch);
        }
        delta.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Full Viterbi with backtracking; returns the score and the best path.
    fn chain_path(&self, z: usize, entry: &[f64], emissions: &[Vec<f64>]) -> (f64, Vec<usize>) {
        let m = self.m;
        let into = &self.into[z];
        let mut delta: Vec<f64> = entry.iter().zip(&emissions[0]).map(|(a, b)| a + b).collect();
        let mut back: Vec<Vec<usize>> = Vec::with_capacity(emissions.len());
        for e in &emissions[1..] {
            let mut next = vec![0.0; m];
            let mut arg = vec![0usize; m];
            for y in 0..m {
                let row = &into[y * m..(y + 1) * m];
                let mut best = f64::NEG_INFINITY;
                let mut best_prev = 0;
                for (yp, (d, t)) in delta.iter().zip(row).enumerate() {
                    if d + t > best {
                        best = d + t;
                        best_prev = yp;
                    }
                }
                next[y] = best + e[y];
                arg[y] = best_prev;
            }
            back.push(arg);
            delta = next;
        }
        let (mut y, score) = delta
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let mut path = vec![y];
        for arg in back.iter().rev() {
            y = arg[y];
            path.push(y);
        }
        path.reverse();
        (score, path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstructureScore {
    /// `log max_{y-path} P(z, y-path | O, z_prev)`.
    pub log_score: f64,
    /// Maximizing sub-activity index per frame of the window.
    pub path: Vec<usize>,
}

/// Scores activity `z` following `z_prev` over a window of frames.
///
/// `window` holds the per-frame log posteriors `log P(y|x)`. `log_boundary`
/// is the log distribution of the sub-activity preceding the window (`None`
/// for uniform). The maximum over sub-activity sequences is exact (Viterbi).
pub fn substructure_score(
    z: usize,
    z_prev: usize,
    window: &[Vec<f64>],
    log_boundary: Option<&[f64]>,
    tables: &TransitionTables,
    max_window: usize,
) -> Result<SubstructureScore> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    if window.len() > max_window {
        return Err(Error::WindowTooLong {
            len: window.len(),
            cap: max_window,
        });
    }
    let n = tables.num_activities();
    let m = tables.num_sub_activities();
    if z >= n || z_prev >= n {
        return Err(Error::InvalidConfig(format!("activity index out of range (n = {n})")));
    }
    for row in window {
        if row.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: row.len(),
            });
        }
    }
    let lt = LogTables::new(tables);
    let uniform = vec![-(m as f64).ln(); m];
    let b = log_boundary.unwrap_or(&uniform);
    let mut entry = vec![0.0; m];
    lt.boundary(z, b, &mut entry);
    let emissions: Vec<Vec<f64>> = window.iter().map(|r| lt.emission(r)).collect();
    let (chain, path) = lt.chain_path(z, &entry, &emissions);
    Ok(SubstructureScore {
        log_score: lt.log_act(z_prev, z) + chain,
        path,
    })
}
