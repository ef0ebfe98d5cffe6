//! Gaussian mixture models over standardized feature vectors, and the
//! per-location bank of sub-activity clusters built from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton_io::Location;

/// Clusters fitted per in-location activity.
pub const CLUSTERS_PER_ACTIVITY: usize = 5;
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Lower bound on any log posterior, keeping every sub-activity in support.
pub const LOG_POSTERIOR_FLOOR: f64 = -745.0;
const MIN_CLUSTER_WEIGHT: f64 = 1e-8;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub max_iterations: usize,
    /// Stop when the mean per-sample log-likelihood improves by less than this.
    pub tolerance: f64,
    pub variance_floor: f64,
    /// Fail if the log-likelihood ever drops by more than 1e-7.
    pub check_monotone: bool,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            tolerance: 1e-6,
            variance_floor: VARIANCE_FLOOR,
            check_monotone: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "activity", rename_all = "snake_case")]
pub enum ClusterOrigin {
    Activity(String),
    /// Fitted to an activity that never happens at the bank's location.
    Negative(String),
}

impl ClusterOrigin {
    pub fn activity(&self) -> &str {
        match self {
            ClusterOrigin::Activity(a) | ClusterOrigin::Negative(a) => a,
        }
    }

    pub fn is_negative(&self) -> bool {
        matches!(self, ClusterOrigin::Negative(_))
    }
}

/// Gaussian with diagonal covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCluster {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub weight: f64,
    pub origin: ClusterOrigin,
}

impl GaussianCluster {
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((xi, mi), vi) in x.iter().zip(&self.mean).zip(&self.variance) {
            let d = xi - mi;
            acc += LN_2PI + vi.ln() + d * d / vi;
        }
        -0.5 * acc
    }
}

/// Result of one EM run.
#[derive(Debug, Clone)]
pub struct GmmFit {
    pub clusters: Vec<GaussianCluster>,
    /// Total log-likelihood before each M-step, then the final value.
    pub log_likelihoods: Vec<f64>,
    pub iterations: usize,
}

impl GmmFit {
    pub fn final_log_likelihood(&self) -> f64 {
        self.log_likelihoods.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp(samples: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = samples.len();
    let mut centers = vec![samples[rng.random_range(0..n)].clone()];
    let mut dist: Vec<f64> = samples.iter().map(|s| sq_dist(s, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in dist.iter().enumerate() {
                if target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(samples[next].clone());
        let c = centers.last().unwrap();
        for (d, s) in dist.iter_mut().zip(samples) {
            *d = d.min(sq_dist(s, c));
        }
    }
    centers
}

fn check_samples(samples: &[Vec<f64>], needed: usize) -> Result<usize> {
    if samples.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            got: samples.len(),
        });
    }
    let d = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    Ok(d)
}

/// EM for a `k`-component diagonal GMM with k-means++ initialization.
pub fn fit_gmm(samples: &[Vec<f64>], k: usize, seed: u64) -> Result<GmmFit> {
    fit_gmm_with(samples, k, seed, &EmOptions::default())
}

pub fn fit_gmm_with(samples: &[Vec<f64>], k: usize, seed: u64, opts: &EmOptions) -> Result<GmmFit> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    let dim = check_samples(samples, 2 * k)?;
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut global_mean = vec![0.0; dim];
    for s in samples {
        for (m, v) in global_mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    global_mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut global_var = vec![0.0; dim];
    for s in samples {
        for ((g, v), m) in global_var.iter_mut().zip(s).zip(&global_mean) {
            *g += (v - m) * (v - m);
        }
    }
    global_var
        .iter_mut()
        .for_each(|g| *g = (*g / n as f64).max(opts.variance_floor));

    let mut clusters: Vec<GaussianCluster> = kmeans_pp(samples, k, &mut rng)
        .into_iter()
        .map(|mean| GaussianCluster {
            mean,
            variance: global_var.clone(),
            weight: 1.0 / k as f64,
            origin: ClusterOrigin::Activity(String::new()),
        })
        .collect();

    let mut reseeded = vec![false; k];
    let mut lls = Vec::new();
    let mut previous_mean_ll = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut just_reseeded = false;

    loop {
        // E-step
        let rows: Vec<(Vec<f64>, f64)> = samples
            .par_iter()
            .map(|x| {
                let lp: Vec<f64> = clusters
                    .iter()
                    .map(|c| c.weight.ln() + c.log_density(x))
                    .collect();
                let lse = log_sum_exp(&lp);
                (lp.iter().map(|v| (v - lse).exp()).collect(), lse)
            })
            .collect();
        let ll: f64 = rows.iter().map(|r| r.1).sum();
        if opts.check_monotone && !just_reseeded {
            if let Some(&prev) = lls.last() {
                if ll < prev - 1e-7 {
                    return Err(Error::InvalidModel(format!(
                        "EM log-likelihood decreased from {prev} to {ll}"
                    )));
                }
            }
        }
        just_reseeded = false;
        lls.push(ll);
        let mean_ll = ll / n as f64;
        if iterations >= opts.max_iterations || (mean_ll - previous_mean_ll).abs() < opts.tolerance {
            break;
        }
        previous_mean_ll = mean_ll;
        iterations += 1;

        // M-step
        let mut new_clusters = Vec::with_capacity(k);
        let mut collapsed = None;
        for (j, c) in clusters.iter().enumerate() {
            let nk: f64 = rows.iter().map(|r| r.0[j]).sum();
            let weight = nk / n as f64;
            if weight < MIN_CLUSTER_WEIGHT || nk <= 0.0 {
                collapsed = Some((j, weight));
                new_clusters.push(c.clone());
                continue;
            }
            let mut mean = vec![0.0; dim];
            for (r, x) in rows.iter().zip(samples) {
                let g = r.0[j];
                for (m, v) in mean.iter_mut().zip(x) {
                    *m += g * v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            let mut variance = vec![0.0; dim];
            for (r, x) in rows.iter().zip(samples) {
                let g = r.0[j];
                for ((s, v), m) in variance.iter_mut().zip(x).zip(&mean) {
                    *s += g * (v - m) * (v - m);
                }
            }
            variance
                .iter_mut()
                .for_each(|s| *s = (*s / nk).max(opts.variance_floor));
            new_clusters.push(GaussianCluster {
                mean,
                variance,
                weight,
                origin: c.origin.clone(),
            });
        }
        clusters = new_clusters;

        if let Some((j, weight)) = collapsed {
            if reseeded[j] {
                return Err(Error::DegenerateCluster { cluster: j, weight });
            }
            reseeded[j] = true;
            // move the dead component onto the worst-explained sample
            let worst = rows
                .iter()
                .enumerate()
                .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            clusters[j].mean = samples[worst].clone();
            clusters[j].variance = global_var.clone();
            clusters[j].weight = 1.0 / k as f64;
            let total: f64 = clusters.iter().map(|c| c.weight).sum();
            clusters.iter_mut().for_each(|c| c.weight /= total);
            previous_mean_ll = f64::NEG_INFINITY;
            just_reseeded = true;
        }
    }
    Ok(GmmFit {
        clusters,
        log_likelihoods: lls,
        iterations,
    })
}

/// Per-dimension affine standardization fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Zero mean and unit variance per dimension; constant dimensions keep a
    /// scale of 1.
    pub fn fit<'a>(samples: impl IntoIterator<Item = &'a [f64]> + Clone) -> Result<Self> {
        let mut n = 0usize;
        let mut mean: Vec<f64> = Vec::new();
        for s in samples.clone() {
            if mean.is_empty() {
                mean = vec![0.0; s.len()];
            }
            if s.len() != mean.len() {
                return Err(Error::DimensionMismatch {
                    expected: mean.len(),
                    got: s.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; mean.len()];
        for s in samples {
            for ((a, v), m) in var.iter_mut().zip(s).zip(&mean) {
                *a += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n as f64).sqrt();
                if sd > 1e-9 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }
}

/// Training frames of one activity.
#[derive(Debug, Clone)]
pub struct ActivitySamples {
    pub activity: String,
    /// Locations at which the activity was recorded.
    pub locations: Vec<Location>,
    pub samples: Vec<Vec<f64>>,
}

/// The sub-activity vocabulary of one location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubActivityBank {
    pub location: Location,
    pub clusters: Vec<GaussianCluster>,
    pub standardizer: Standardizer,
    /// Final EM log-likelihood per source activity, in fitting order.
    pub fit_log_likelihoods: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct BankOptions {
    pub clusters_per_activity: usize,
    pub em: EmOptions,
    pub seed: u64,
}

impl Default for BankOptions {
    fn default() -> Self {
        Self {
            clusters_per_activity: CLUSTERS_PER_ACTIVITY,
            em: EmOptions::default(),
            seed: 0,
        }
    }
}

/// Fits the location's bank: a 5-cluster mixture per in-location activity and
/// a single negative cluster per activity recorded only elsewhere. Features
/// are standardized with statistics from all supplied samples.
pub fn build_bank(training: &[ActivitySamples], location: Location, opts: &BankOptions) -> Result<SubActivityBank> {
    let standardizer = Standardizer::fit(
        training
            .iter()
            .flat_map(|a| a.samples.iter().map(Vec::as_slice)),
    )?;
    let fits: Vec<Result<(Vec<GaussianCluster>, f64, usize)>> = training
        .par_iter()
        .enumerate()
        .map(|(i, act)| {
            let in_location = act.locations.contains(&location);
            let k = if in_location { opts.clusters_per_activity } else { 1 };
            let needed = if in_location { 10.max(2 * k) } else { 2 };
            if act.samples.len() < needed {
                return Err(Error::TooFewSamples {
                    needed,
                    got: act.samples.len(),
                });
            }
            let std_samples = act
                .samples
                .iter()
                .map(|s| standardizer.apply(s))
                .collect::<Result<Vec<_>>>()?;
            let seed = opts.seed.wrapping_add(1_000_003 * i as u64);
            let fit = fit_gmm_with(&std_samples, k, seed, &opts.em)?;
            let origin = if in_location {
                ClusterOrigin::Activity(act.activity.clone())
            } else {
                ClusterOrigin::Negative(act.activity.clone())
            };
            let ll = fit.final_log_likelihood();
            let clusters = fit
                .clusters
                .into_iter()
                .map(|mut c| {
                    c.origin = origin.clone();
                    c
                })
                .collect();
            Ok((clusters, ll, act.samples.len()))
        })
        .collect();

    let mut clusters = Vec::new();
    let mut lls = Vec::new();
    for (act, fit) in training.iter().zip(fits) {
        let (cs, ll, count) = fit?;
        for mut c in cs {
            c.weight *= count as f64;
            clusters.push(c);
        }
        lls.push((act.activity.clone(), ll));
    }
    if !clusters.iter().any(|c| !c.origin.is_negative()) {
        return Err(Error::MissingActivityData(format!("no activity recorded at {location}")));
    }
    let total: f64 = clusters.iter().map(|c| c.weight).sum();
    clusters.iter_mut().for_each(|c| c.weight /= total);
    Ok(SubActivityBank {
        location,
        clusters,
        standardizer,
        fit_log_likelihoods: lls,
    })
}

impl SubActivityBank {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.standardizer.dimension()
    }

    /// `P(y)`: the mixture weights.
    pub fn prior(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.weight).collect()
    }

    /// Log posterior over sub-activities for an already standardized vector,
    /// floored at [`LOG_POSTERIOR_FLOOR`].
    pub fn log_posterior_standardized(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        let lp: Vec<f64> = self
            .clusters
            .iter()
            .map(|c| c.weight.ln() + c.log_density(x))
            .collect();
        let lse = log_sum_exp(&lp);
        let floored: Vec<f64> = lp.iter().map(|v| (v - lse).max(LOG_POSTERIOR_FLOOR)).collect();
        let renorm = log_sum_exp(&floored);
        Ok(floored.into_iter().map(|v| v - renorm).collect())
    }

    /// Log posterior for a raw (unstandardized) feature vector.
    pub fn log_posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.log_posterior_standardized(&self.standardizer.apply(x)?)
    }

    /// `P(y|x)` for a raw feature vector.
    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.log_posterior(x)?.into_iter().map(f64::exp).collect())
    }

    /// Per-frame posteriors of a featurized sequence.
    pub fn soft_labels(&self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        features.iter().map(|x| self.posterior(x)).collect()
    }
}
