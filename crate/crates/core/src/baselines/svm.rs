//! One-vs-rest linear max-margin classifier trained by primal sub-gradient
//! descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::platt::{platt_calibrate, sigmoid, PlattOptions};
use crate::error::{Error, Result};
use crate::gmm::Standardizer;

const MIN_PER_CLASS: usize = 10;
const PROBABILITY_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmOptions {
    pub epochs: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            epochs: 200,
            lambda: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearActivityClassifier {
    pub classes: Vec<String>,
    pub standardizer: Standardizer,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Sigmoid parameters `(A, B)` per class.
    pub calibration: Vec<(f64, f64)>,
}

/// Trains the naive per-frame classifier.
///
/// Samples are first put in a canonical order (by label, then features) and
/// then shuffled by the seed, so the result does not depend on the order in
/// which they were supplied.
pub fn train_naive(
    features: &[Vec<f64>],
    labels: &[String],
    opts: &SvmOptions,
) -> Result<LinearActivityClassifier> {
    if features.len() != labels.len() {
        return Err(Error::DegenerateLabels(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if !opts.lambda.is_finite() || opts.lambda <= 0.0 || opts.epochs == 0 {
        return Err(Error::InvalidConfig("SVM needs λ > 0 and at least one epoch".into()));
    }
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::DegenerateLabels("need at least two classes".into()));
    }
    for c in &classes {
        let count = labels.iter().filter(|l| *l == c).count();
        if count < MIN_PER_CLASS {
            return Err(Error::DegenerateLabels(format!(
                "class {c} has {count} samples, need {MIN_PER_CLASS}"
            )));
        }
    }
    let mut raw: Vec<(usize, &[f64])> = features
        .iter()
        .zip(labels)
        .map(|(x, l)| (classes.binary_search(l).expect("label is a class"), x.as_slice()))
        .collect();
    raw.sort_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| {
            a.1.iter()
                .zip(b.1)
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let standardizer = Standardizer::fit(raw.iter().map(|r| r.1))?;
    let mut rows: Vec<(usize, Vec<f64>)> = raw
        .iter()
        .map(|&(c, x)| standardizer.apply(x).map(|s| (c, s)))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rows.shuffle(&mut rng);
    let schedules: Vec<Vec<usize>> = (0..opts.epochs)
        .map(|_| {
            let mut order: Vec<usize> = (0..rows.len()).collect();
            order.shuffle(&mut rng);
            order
        })
        .collect();

    let fitted: Vec<(Vec<f64>, f64)> = (0..classes.len())
        .into_par_iter()
        .map(|c| pegasos(&rows, c, &schedules, opts.lambda))
        .collect();
    let (weights, bias): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();

    let mut clf = LinearActivityClassifier {
        classes,
        standardizer,
        weights,
        bias,
        calibration: Vec::new(),
    };
    let scores: Vec<Vec<f64>> = rows.iter().map(|(_, x)| clf.raw_scores_standardized(x)).collect();
    clf.calibration = (0..clf.classes.len())
        .into_par_iter()
        .map(|c| {
            let s: Vec<f64> = scores.iter().map(|r| r[c]).collect();
            let y: Vec<bool> = rows.iter().map(|(l, _)| *l == c).collect();
            platt_calibrate(&s, &y, &PlattOptions::default())
        })
        .collect();
    Ok(clf)
}

// Hinge-loss sub-gradient descent with step 1/(λt) and the bias treated as a
// weight on a constant feature.
fn pegasos(rows: &[(usize, Vec<f64>)], class: usize, schedules: &[Vec<usize>], lambda: f64) -> (Vec<f64>, f64) {
    let dim = rows[0].1.len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut t = 0usize;
    let radius = 1.0 / lambda.sqrt();
    for order in schedules {
        for &i in order {
            t += 1;
            let (label, x) = &rows[i];
            let y = if *label == class { 1.0 } else { -1.0 };
            let eta = 1.0 / (lambda * t as f64);
            let margin = y * (dot(&w, x) + b);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            b *= shrink;
            if margin < 1.0 {
                for (wv, xv) in w.iter_mut().zip(x) {
                    *wv += eta * y * xv;
                }
                b += eta * y;
            }
            let norm = (dot(&w, &w) + b * b).sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
                b *= s;
            }
        }
    }
    (w, b)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearActivityClassifier {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dimension(&self) -> usize {
        self.standardizer.dimension()
    }

    fn raw_scores_standardized(&self, x: &[f64]) -> Vec<f64> {
        self.weights.iter().zip(&self.bias).map(|(w, b)| dot(w, x) + b).collect()
    }

    /// Uncalibrated margin per class.
    pub fn raw_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.raw_scores_standardized(&self.standardizer.apply(x)?))
    }

    /// Arg-max raw score; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.raw_scores(x)?))
    }

    /// Calibrated per-class probabilities, each in `(0, 1)`.
    pub fn calibrated(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .raw_scores(x)?
            .iter()
            .zip(&self.calibration)
            .map(|(s, (a, b))| sigmoid(a * s + b).clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP))
            .collect())
    }

    /// `P(class | x)`: calibrated scores renormalized across classes.
    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut p = self.calibrated(x)?;
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        Ok(p)
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    xs.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(seed: u64) -> (Vec<Vec<f64>>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..60 {
            let c = i % 3;
            let center = [[3.0, 0.0], [-3.0, 0.0], [0.0, 4.0]][c];
            xs.push(vec![
                center[0] + rng.random_range(-1.0..1.0),
                center[1] + rng.random_range(-1.0..1.0),
            ]);
            ys.push(format!("c{c}"));
        }
        (xs, ys)
    }

    #[test]
    fn separable_blobs_are_fit_exactly() {
        let (xs, ys) = blobs(1);
        let opts = SvmOptions {
            epochs: 50,
            ..SvmOptions::default()
        };
        let clf = train_naive(&xs, &ys, &opts).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(&clf.classes[clf.predict(x).unwrap()], y);
            let p = clf.posterior(x).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn input_order_does_not_matter() {
        let (xs, ys) = blobs(2);
        let opts = SvmOptions {
            epochs: 5,
            ..SvmOptions::default()
        };
        let a = train_naive(&xs, &ys, &opts).unwrap();
        let (rx, ry): (Vec<_>, Vec<_>) = xs.into_iter().zip(ys).rev().unzip();
        let b = train_naive(&rx, &ry, &opts).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.bias, b.bias);
    }

    #[test]
    fn contradictory_duplicates_do_not_crash() {
        let (mut xs, mut ys) = blobs(3);
        xs.push(xs[0].clone());
        ys.push("c1".into());
        let clf = train_naive(&xs, &ys, &SvmOptions { epochs: 3, ..Default::default() }).unwrap();
        assert!(clf.predict(&xs[0]).unwrap() < 3);
    }

    #[test]
    fn degenerate_labels_are_rejected() {
        let xs = vec![vec![0.0]; 20];
        let ys = vec!["a".to_string(); 20];
        assert!(matches!(
            train_naive(&xs, &ys, &SvmOptions::default()),
            Err(Error::DegenerateLabels(_))
        ));
        let mut ys2 = ys.clone();
        ys2[0] = "b".into();
        assert!(matches!(
            train_naive(&xs, &ys2, &SvmOptions::default()),
            Err(Error::DegenerateLabels(_))
        ));
    }
}
