//! Independent reference implementations shared by the integration tests.
//! Everything here works in the probability domain or by plain enumeration so
//! that it shares no code path with the library's log-space routines.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skelact::memm::{neutral_transition, TransitionTables};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_distribution(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Random stochastic tables with `n_act` activities plus neutral and `m`
/// sub-activities. Sub-activity rows are scaled so that their column sums stay
/// below one and the neutral rows are informative.
pub fn random_tables(rng: &mut ChaCha8Rng, n_act: usize, m: usize) -> TransitionTables {
    let sub_trans: Vec<Vec<Vec<f64>>> = (0..n_act)
        .map(|_| (0..m).map(|_| random_distribution(rng, m)).collect())
        .collect();
    let floor = 1e-6;
    let neutral_trans = neutral_transition(&sub_trans, floor);
    let act_trans = (0..=n_act).map(|_| random_distribution(rng, n_act + 1)).collect();
    TransitionTables {
        activities: (0..n_act).map(|i| format!("a{i}")).collect(),
        sub_trans,
        neutral_trans,
        act_trans,
        sub_prior: random_distribution(rng, m),
        act_prior: vec![1.0 / (n_act + 1) as f64; n_act + 1],
        floor,
    }
}

/// `P(y_t = y' | y_{t-1} = y, z)`, neutral at the last activity index.
pub fn sub_prob(tables: &TransitionTables, z: usize, y: usize, y2: usize) -> f64 {
    if z < tables.activities.len() {
        tables.sub_trans[z][y][y2]
    } else {
        tables.neutral_trans[y][y2]
    }
}

/// Max over all `m^L` sub-activity paths of the substructure probability,
/// by explicit enumeration. `posteriors[t][y]` is `P(y | x_t)`, `boundary`
/// the distribution of the sub-activity before the window.
pub fn brute_force_substructure(
    tables: &TransitionTables,
    z: usize,
    z_prev: usize,
    posteriors: &[Vec<f64>],
    boundary: &[f64],
) -> f64 {
    let m = tables.sub_prior.len();
    let len = posteriors.len();
    let mut best = 0.0_f64;
    let mut path = vec![0usize; len];
    loop {
        let mut p = tables.act_trans[z_prev][z];
        let first: f64 = (0..m).map(|yp| sub_prob(tables, z, yp, path[0]) * boundary[yp]).sum();
        p *= first;
        for t in 0..len {
            p *= posteriors[t][path[t]] / tables.sub_prior[path[t]];
            if t > 0 {
                p *= sub_prob(tables, z, path[t - 1], path[t]);
            }
        }
        best = best.max(p);
        // odometer increment
        let mut i = 0;
        loop {
            if i == len {
                return best;
            }
            path[i] += 1;
            if path[i] < m {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

/// Max-product chain over a window in the probability domain, excluding the
/// activity transition.
pub fn chain_probability(tables: &TransitionTables, z: usize, posteriors: &[Vec<f64>], boundary: &[f64]) -> f64 {
    let m = tables.sub_prior.len();
    let ratio = |t: usize, y: usize| posteriors[t][y] / tables.sub_prior[y];
    let mut delta: Vec<f64> = (0..m)
        .map(|y| (0..m).map(|yp| sub_prob(tables, z, yp, y) * boundary[yp]).sum::<f64>() * ratio(0, y))
        .collect();
    for t in 1..posteriors.len() {
        delta = (0..m)
            .map(|y| {
                (0..m)
                    .map(|yp| delta[yp] * sub_prob(tables, z, yp, y))
                    .fold(0.0, f64::max)
                    * ratio(t, y)
            })
            .collect();
    }
    delta.into_iter().fold(0.0, f64::max)
}

/// Activity posterior at time `t` by unmemoized recursion over split points,
/// so every one of the `2^(t−1)` segmentations of frames `1..=t` is visited.
/// `carried_over` selects the previous frame's posterior as the boundary
/// distribution instead of the uniform one.
pub fn recursive_structure_posterior(
    tables: &TransitionTables,
    posteriors: &[Vec<f64>],
    t: usize,
    max_window: usize,
    carried_over: bool,
) -> Vec<f64> {
    let n = tables.act_trans.len();
    let m = tables.sub_prior.len();
    if t == 0 {
        return vec![1.0 / n as f64; n];
    }
    let uniform = vec![1.0 / m as f64; m];
    let earliest = t.saturating_sub(max_window);
    let mut best = vec![0.0_f64; n];
    for split in earliest..t {
        let prev = recursive_structure_posterior(tables, posteriors, split, max_window, carried_over);
        let boundary = if carried_over && split > 0 {
            &posteriors[split - 1]
        } else {
            &uniform
        };
        let window = &posteriors[split..t];
        for (z, b) in best.iter_mut().enumerate() {
            let carried: f64 = (0..n).map(|zp| prev[zp] * tables.act_trans[zp][z]).sum();
            let cand = carried * chain_probability(tables, z, window, boundary);
            *b = b.max(cand);
        }
    }
    let s: f64 = best.iter().sum();
    best.into_iter().map(|v| v / s).collect()
}

/// Random sub-activity posteriors, one row per frame.
pub fn random_posteriors(rng: &mut ChaCha8Rng, len: usize, m: usize) -> Vec<Vec<f64>> {
    (0..len).map(|_| random_distribution(rng, m)).collect()
}
