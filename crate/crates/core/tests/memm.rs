mod common;

use common::{random_posteriors, random_tables, recursive_structure_posterior, rng};
use skelact::memm::{
    detect_stream, structure_step, BoundaryPrior, DetectorConfig, DetectorState, LogTables, TransitionTables,
};
use skelact::Error;

fn logs(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.iter().map(|v| v.ln()).collect()).collect()
}

fn config(max_window: usize, boundary: BoundaryPrior) -> DetectorConfig {
    DetectorConfig { max_window, boundary }
}

#[test]
fn carried_over_boundary_matches_exhaustive_recursion() {
    let mut r = rng(11);
    for case in 0..40 {
        let n_act = 1 + case % 3;
        let m = 2 + case % 2;
        let len = 3 + case % 4;
        let max_window = 2 + case % 3;
        let tables = random_tables(&mut r, n_act, m);
        let posts = random_posteriors(&mut r, len, m);
        let lt = LogTables::new(&tables);
        let out = detect_stream(&logs(&posts), &lt, &config(max_window, BoundaryPrior::CarriedOver)).unwrap();
        for t in 1..=len {
            let expected = recursive_structure_posterior(&tables, &posts, t, max_window, true);
            for (a, b) in out[t - 1].posterior.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-9, "case {case} t {t}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn first_frame_uses_a_single_substructure() {
    let mut r = rng(3);
    let tables = random_tables(&mut r, 3, 4);
    let posts = random_posteriors(&mut r, 1, 4);
    let lt = LogTables::new(&tables);
    let out = detect_stream(&logs(&posts), &lt, &config(10, BoundaryPrior::Uniform)).unwrap();
    assert_eq!(out[0].best_split, vec![0; 4]);
    let expected = recursive_structure_posterior(&tables, &posts, 1, 10, false);
    for (a, b) in out[0].posterior.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn prefixes_reproduce_the_full_run_bit_for_bit() {
    let mut r = rng(8);
    let tables = random_tables(&mut r, 3, 5);
    let lt = LogTables::new(&tables);
    let stream = logs(&random_posteriors(&mut r, 40, 5));
    let cfg = config(7, BoundaryPrior::Uniform);
    let full = detect_stream(&stream, &lt, &cfg).unwrap();
    for cut in [1, 6, 7, 8, 25] {
        let prefix = detect_stream(&stream[..cut], &lt, &cfg).unwrap();
        assert_eq!(prefix[..], full[..cut]);
    }
}

#[test]
fn posteriors_are_distributions_and_splits_stay_in_the_window() {
    let mut r = rng(21);
    let tables = random_tables(&mut r, 4, 3);
    let lt = LogTables::new(&tables);
    let stream = logs(&random_posteriors(&mut r, 60, 3));
    let out = detect_stream(&stream, &lt, &config(9, BoundaryPrior::Uniform)).unwrap();
    for (i, step) in out.iter().enumerate() {
        let t = i + 1;
        assert!((step.posterior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(step.posterior.iter().all(|&p| (0.0..=1.0).contains(&p)));
        for &s in &step.best_split {
            assert!(s < t && s + 9 >= t, "t {t} split {s}");
        }
        let best = step.posterior.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(step.posterior[step.activity], best);
    }
}

/// Two activities, each owning one of two sub-activities, plus neutral.
fn two_activity_tables() -> TransitionTables {
    let stay = vec![vec![0.9, 0.1], vec![0.1, 0.9]];
    TransitionTables {
        activities: vec!["a".into(), "b".into()],
        sub_trans: vec![
            vec![vec![0.95, 0.05], vec![0.95, 0.05]],
            vec![vec![0.05, 0.95], vec![0.05, 0.95]],
        ],
        neutral_trans: stay,
        act_trans: vec![vec![0.8, 0.1, 0.1], vec![0.1, 0.8, 0.1], vec![0.1, 0.1, 0.8]],
        sub_prior: vec![0.5, 0.5],
        act_prior: vec![1.0 / 3.0; 3],
        floor: 1e-6,
    }
}

#[test]
fn a_change_of_activity_is_detected_within_one_window() {
    let tables = two_activity_tables();
    let lt = LogTables::new(&tables);
    let max_window = 12;
    let mut stream = vec![vec![0.9, 0.1]; 40];
    stream.extend(vec![vec![0.1, 0.9]; 40]);
    let out = detect_stream(&logs(&stream), &lt, &config(max_window, BoundaryPrior::Uniform)).unwrap();
    assert!(out[10..40].iter().all(|s| s.activity == 0));
    let switch = out[40..].iter().position(|s| s.activity == 1).expect("never switched");
    assert!(switch < max_window, "switched after {switch} frames");
    assert!(out[40 + max_window..].iter().all(|s| s.activity == 1));
}

#[test]
fn interchangeable_activities_stay_tied_and_the_lowest_index_wins() {
    let mut tables = two_activity_tables();
    tables.sub_trans = vec![vec![vec![0.5, 0.5]; 2]; 2];
    tables.neutral_trans = vec![vec![0.5, 0.5]; 2];
    tables.act_trans = vec![vec![1.0 / 3.0; 3]; 3];
    let lt = LogTables::new(&tables);
    let mut r = rng(4);
    let stream = logs(&random_posteriors(&mut r, 20, 2));
    for step in detect_stream(&stream, &lt, &config(5, BoundaryPrior::Uniform)).unwrap() {
        for p in &step.posterior {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(step.activity, 0);
    }
}

#[test]
fn state_errors_are_reported() {
    let tables = two_activity_tables();
    let lt = LogTables::new(&tables);
    let cfg = config(4, BoundaryPrior::Uniform);
    let mut blank = DetectorState::default();
    assert!(matches!(
        structure_step(&mut blank, &[0.5f64.ln(); 2], &lt, &cfg),
        Err(Error::UninitializedState)
    ));
    let mut state = DetectorState::new(3);
    assert!(matches!(
        structure_step(&mut state, &[0.0; 3], &lt, &cfg),
        Err(Error::DimensionMismatch { expected: 2, got: 3 })
    ));
    let mut wrong = DetectorState::new(5);
    assert!(structure_step(&mut wrong, &[0.5f64.ln(); 2], &lt, &cfg).is_err());
    assert_eq!(state.time(), 0);
    structure_step(&mut state, &[0.5f64.ln(); 2], &lt, &cfg).unwrap();
    assert_eq!(state.time(), 1);
}
