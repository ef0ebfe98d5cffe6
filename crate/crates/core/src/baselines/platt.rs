//! Sigmoid calibration of raw classifier scores.

/// Newton solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlattOptions {
    pub max_iterations: usize,
    /// Stop once both gradient components fall below this.
    pub tolerance: f64,
}

impl Default for PlattOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-8,
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

// -log σ(v), stable for large |v|.
fn neg_log_sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        (-v).exp().ln_1p()
    } else {
        -v + v.exp().ln_1p()
    }
}

fn objective(scores: &[f64], labels: &[bool], a: f64, b: f64) -> f64 {
    scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let v = a * s + b;
            if y {
                neg_log_sigmoid(v)
            } else {
                neg_log_sigmoid(-v)
            }
        })
        .sum()
}

/// Fits `(A, B)` so that `σ(A·s + B)` maximizes the Bernoulli likelihood of
/// the labels, using Newton steps with backtracking.
pub fn platt_calibrate(scores: &[f64], labels: &[bool], opts: &PlattOptions) -> (f64, f64) {
    debug_assert_eq!(scores.len(), labels.len());
    if scores.is_empty() {
        return (0.0, 0.0);
    }
    let positives = labels.iter().filter(|&&y| y).count() as f64;
    let n = scores.len() as f64;
    // Start from the log-odds of the base rate.
    let prior = ((positives + 1.0) / (n - positives + 1.0)).ln();
    let (mut a, mut b) = (0.0, prior);
    let mut f = objective(scores, labels, a, b);
    for _ in 0..opts.max_iterations {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&s, &y) in scores.iter().zip(labels) {
            let p = sigmoid(a * s + b);
            let r = p - if y { 1.0 } else { 0.0 };
            let w = p * (1.0 - p);
            ga += r * s;
            gb += r;
            haa += w * s * s;
            hab += w * s;
            hbb += w;
        }
        if ga.abs() < opts.tolerance && gb.abs() < opts.tolerance {
            break;
        }
        let ridge = 1e-12;
        haa += ridge;
        hbb += ridge;
        let det = haa * hbb - hab * hab;
        let (da, db) = if det > 0.0 {
            (-(hbb * ga - hab * gb) / det, -(haa * gb - hab * ga) / det)
        } else {
            (-ga, -gb)
        };
        let slope = ga * da + gb * db;
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(scores, labels, na, nb);
            if nf <= f + 1e-4 * step * slope {
                a = na;
                b = nb;
                f = nf;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (a, b)
}
