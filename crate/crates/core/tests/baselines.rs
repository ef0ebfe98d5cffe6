mod common;

use common::{random_distribution, rng};
use rand::Rng;
use skelact::baselines::{
    activity_subtable, platt_calibrate, train_naive, OneLevelTracker, PlattOptions, SvmOptions,
};

/// Belief after `posteriors.len()` steps from a uniform start, as a sum over
/// every activity path `z_0, z_1, …`.
fn enumerated_belief(trans: &[Vec<f64>], posteriors: &[Vec<f64>]) -> Vec<f64> {
    let n = trans.len();
    let len = posteriors.len() + 1;
    let mut belief = vec![0.0; n];
    let mut path = vec![0usize; len];
    loop {
        let mut w = 1.0 / n as f64;
        for t in 1..len {
            w *= trans[path[t - 1]][path[t]] * posteriors[t - 1][path[t]] * n as f64;
        }
        belief[path[len - 1]] += w;
        let mut i = 0;
        loop {
            if i == len {
                let s: f64 = belief.iter().sum();
                return belief.into_iter().map(|b| b / s).collect();
            }
            path[i] += 1;
            if path[i] < n {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

#[test]
fn one_level_recursion_equals_path_enumeration() {
    let mut r = rng(31);
    for case in 0..60 {
        let n = 2 + case % 3;
        let len = 1 + case % 6;
        let trans: Vec<Vec<f64>> = (0..n).map(|_| random_distribution(&mut r, n)).collect();
        let posteriors: Vec<Vec<f64>> = (0..len).map(|_| random_distribution(&mut r, n)).collect();
        let mut tracker = OneLevelTracker::new(trans.clone());
        for p in &posteriors {
            tracker.step(p).unwrap();
        }
        let expected = enumerated_belief(&trans, &posteriors);
        for (a, b) in tracker.belief().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "case {case}: {a} vs {b}");
        }
    }
}

#[test]
fn activity_subtable_drops_neutral_and_renormalizes() {
    let full = vec![
        vec![0.6, 0.2, 0.2],
        vec![0.1, 0.3, 0.6],
        vec![0.3, 0.3, 0.4],
    ];
    let sub = activity_subtable(&full);
    assert_eq!(sub.len(), 2);
    assert!((sub[0][0] - 0.75).abs() < 1e-15 && (sub[0][1] - 0.25).abs() < 1e-15);
    assert!((sub[1][0] - 0.25).abs() < 1e-15 && (sub[1][1] - 0.75).abs() < 1e-15);
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn nll(scores: &[f64], labels: &[bool], a: f64, b: f64) -> f64 {
    scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let p = sigmoid(a * s + b);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum()
}

#[test]
fn platt_solution_is_a_likelihood_optimum() {
    let mut r = rng(5);
    let scores: Vec<f64> = (0..300).map(|_| r.random_range(-3.0..3.0)).collect();
    let labels: Vec<bool> = scores
        .iter()
        .map(|&s| r.random_range(0.0..1.0) < sigmoid(1.7 * s - 0.4))
        .collect();
    let (a, b) = platt_calibrate(&scores, &labels, &PlattOptions::default());
    let (mut ga, mut gb) = (0.0, 0.0);
    for (&s, &y) in scores.iter().zip(&labels) {
        let resid = sigmoid(a * s + b) - if y { 1.0 } else { 0.0 };
        ga += resid * s;
        gb += resid;
    }
    assert!(ga.abs() < 1e-6 && gb.abs() < 1e-6, "gradient ({ga}, {gb})");
    let best = nll(&scores, &labels, a, b);
    for (da, db) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3)] {
        assert!(nll(&scores, &labels, a + da, b + db) > best);
    }
    assert!((a - 1.7).abs() < 0.5 && (b + 0.4).abs() < 0.4, "({a}, {b})");
}

#[test]
fn linear_classifier_separates_shifted_clouds_and_ignores_input_order() {
    let mut r = rng(9);
    let centers = [[0.0, 0.0, 0.0], [4.0, 0.0, 1.0], [0.0, 4.0, -1.0]];
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..60 {
            features.push(center.iter().map(|v| v + r.random_range(-1.0..1.0)).collect::<Vec<f64>>());
            labels.push(format!("class{c}"));
        }
    }
    let opts = SvmOptions {
        epochs: 50,
        ..SvmOptions::default()
    };
    let model = train_naive(&features, &labels, &opts).unwrap();
    let correct = features
        .iter()
        .zip(&labels)
        .filter(|(x, y)| model.classes[model.predict(x).unwrap()] == **y)
        .count();
    assert!(correct as f64 > 0.95 * features.len() as f64, "{correct}");
    for x in &features {
        let p = model.posterior(x).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    let mut order: Vec<usize> = (0..features.len()).collect();
    order.reverse();
    let shuffled_x: Vec<Vec<f64>> = order.iter().map(|&i| features[i].clone()).collect();
    let shuffled_y: Vec<String> = order.iter().map(|&i| labels[i].clone()).collect();
    assert_eq!(train_naive(&shuffled_x, &shuffled_y, &opts).unwrap(), model);
}

#[test]
fn a_single_class_is_rejected() {
    let features = vec![vec![1.0]; 20];
    let labels = vec!["only".to_string(); 20];
    assert!(train_naive(&features, &labels, &SvmOptions::default()).is_err());
}
