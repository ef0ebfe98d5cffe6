use nalgebra::{Unit, UnitQuaternion, Vector3};
use proptest::prelude::*;

use skelact::baselines::OneLevelTracker;
use skelact::features::rotation_to_halfspace_quaternion;
use skelact::gmm::{build_bank, ActivitySamples, BankOptions};
use skelact::skeleton_io::synth::{builtin_scripts, generate_synthetic};
use skelact::skeleton_io::{parse_sequence, serialize_sequence, JointOrder, Location};

fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn quaternions_land_in_the_half_space_and_reproduce_the_rotation(
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in 0.0f64..std::f64::consts::PI,
    ) {
        let v = Vector3::from(axis);
        prop_assume!(v.norm() > 1e-3);
        let r = UnitQuaternion::from_axis_angle(&Unit::new_normalize(v), angle).to_rotation_matrix().into_inner();
        let q = rotation_to_halfspace_quaternion(&r).unwrap();
        prop_assert!(q.is_half_space());
        prop_assert!((q.norm() - 1.0).abs() < 1e-12);
        prop_assert!((q.to_matrix() - r).abs().max() < 1e-9);
    }

    #[test]
    fn one_level_belief_stays_a_distribution(
        rows in prop::collection::vec(distribution(4), 4),
        stream in prop::collection::vec(distribution(4), 1..30),
    ) {
        let mut tracker = OneLevelTracker::new(rows);
        for p in &stream {
            let belief = tracker.step(p).unwrap();
            prop_assert!((belief.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(belief.iter().all(|&b| (0.0..=1.0).contains(&b)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn serialized_sequences_parse_back(seed in any::<u64>(), script in 0usize..4) {
        let seq = generate_synthetic(&builtin_scripts()[script], seed).unwrap();
        let order = JointOrder::default();
        let frames = &seq.frames[..20];
        let back = parse_sequence(&serialize_sequence(frames, &order), &order).unwrap();
        prop_assert_eq!(back.len(), frames.len());
        for (a, b) in frames.iter().zip(&back) {
            prop_assert_eq!(a.frame_index, b.frame_index);
            for (ja, jb) in a.joints.iter().zip(&b.joints) {
                prop_assert_eq!(ja.position, jb.position);
                prop_assert_eq!(ja.position_confidence, jb.position_confidence);
                match (ja.orientation, jb.orientation) {
                    (Some(ra), Some(rb)) => prop_assert!((ra - rb).abs().max() < 1e-12),
                    (None, None) => {}
                    _ => prop_assert!(false, "orientation presence changed"),
                }
            }
        }
    }
}

#[test]
fn bank_posteriors_are_normalized_everywhere() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let mut cloud = |center: f64, n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..3).map(|_| center + rng.random_range(-1.0..1.0)).collect())
            .collect()
    };
    let training = vec![
        ActivitySamples {
            activity: "near".into(),
            locations: vec![Location::Office],
            samples: cloud(0.0, 80),
        },
        ActivitySamples {
            activity: "far".into(),
            locations: vec![Location::Office],
            samples: cloud(6.0, 80),
        },
        ActivitySamples {
            activity: "elsewhere".into(),
            locations: vec![Location::Kitchen],
            samples: cloud(-6.0, 40),
        },
    ];
    let bank = build_bank(&training, Location::Office, &BankOptions::default()).unwrap();
    assert_eq!(bank.len(), 5 + 5 + 1);
    proptest!(|(x in prop::array::uniform3(-50.0f64..50.0))| {
        let p = bank.posterior(&x).unwrap();
        prop_assert_eq!(p.len(), bank.len());
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let lp = bank.log_posterior(&x).unwrap();
        prop_assert!(lp.iter().all(|v| v.is_finite()));
    });
}
