mod common;

use hsstv_core::check::{conjugate, random_vec};
use hsstv_core::prox::{
    distance, project_l2_ball, prox_box, prox_conjugate, prox_group_l12, prox_l1, GroupLayout,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{golden_section, group_minimizer};

#[test]
fn soft_threshold_matches_numerical_minimizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let x = random_vec(&mut rng, 5, 2.0);
        let gamma = rng.random_range(0.01..1.5);
        let p = prox_l1(&x, gamma).unwrap();
        for (xi, pi) in x.iter().zip(&p) {
            let m = golden_section(|z| z.abs() + (z - xi).powi(2) / (2.0 * gamma), -5.0, 5.0);
            worst = worst.max((m - pi).abs());
        }
    }
    assert!(worst <= 1e-6, "{worst:e}");
}

#[test]
fn group_shrinkage_matches_numerical_minimizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for trial in 0..200 {
        let size = 2 + trial % 3;
        let layout = GroupLayout::blocks(3, size).unwrap();
        let x = random_vec(&mut rng, 3 * size, 1.5);
        let gamma = rng.random_range(0.05..1.5);
        let p = prox_group_l12(&x, &layout, gamma).unwrap();
        for g in 0..3 {
            let members: Vec<usize> = (0..size).map(|j| g + 3 * j).collect();
            let xg: Vec<f64> = members.iter().map(|&i| x[i]).collect();
            let m = group_minimizer(&xg, gamma);
            for (k, &i) in members.iter().enumerate() {
                worst = worst.max((m[k] - p[i]).abs());
            }
        }
    }
    assert!(worst <= 1e-6, "{worst:e}");
}

#[test]
fn moreau_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let layout = GroupLayout::blocks(5, 4).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let x = random_vec(&mut rng, 20, 3.0);
        let c = random_vec(&mut rng, 20, 1.0);
        let gamma = rng.random_range(0.01..3.0);
        let radius = rng.random_range(0.0..3.0);
        let xs: Vec<f64> = x.iter().map(|v| v / gamma).collect();
        let cases = [
            (prox_l1(&x, gamma).unwrap(), conjugate::l1(&xs)),
            (
                prox_group_l12(&x, &layout, gamma).unwrap(),
                conjugate::group_l12(&xs, &layout),
            ),
            (
                project_l2_ball(&x, &c, radius).unwrap(),
                conjugate::ball(&xs, &c, radius, gamma),
            ),
            (
                prox_box(&x, 0.0, 1.0, gamma).unwrap(),
                conjugate::boxed(&xs, 0.0, 1.0, gamma),
            ),
        ];
        for (p, q) in &cases {
            for i in 0..x.len() {
                worst = worst.max((x[i] - p[i] - gamma * q[i]).abs());
            }
        }
        // the generic conjugate step agrees with the ℓ∞ projection
        let lib = prox_conjugate(prox_l1, &x, gamma).unwrap();
        for (a, b) in lib.iter().zip(conjugate::l1(&x)) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst <= 1e-12, "{worst:e}");
}

#[test]
fn soft_threshold_optimality_conditions() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let x = random_vec(&mut rng, 16, 2.0);
        let gamma = rng.random_range(0.1..1.0);
        let p = prox_l1(&x, gamma).unwrap();
        for (xi, pi) in x.iter().zip(&p) {
            if *pi == 0.0 {
                assert!(xi.abs() <= gamma);
            } else {
                assert!(((xi - pi) - gamma * pi.signum()).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn ball_projection_lands_inside() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let x = random_vec(&mut rng, 9, 4.0);
        let c = random_vec(&mut rng, 9, 1.0);
        let r = rng.random_range(0.0..2.0);
        let p = project_l2_ball(&x, &c, r).unwrap();
        assert!(distance(&p, &c) <= r * (1.0 + 1e-12) + 1e-15);
        if distance(&x, &c) <= r {
            assert_eq!(p, x);
        }
    }
}

#[test]
fn invalid_parameters() {
    assert!(prox_l1(&[1.0], 0.0).is_err());
    assert!(prox_box(&[1.0], 1.0, 0.0, 1.0).is_err());
    assert!(project_l2_ball(&[1.0], &[0.0], -1.0).is_err());
    let layout = GroupLayout::blocks(2, 2).unwrap();
    assert!(prox_group_l12(&[1.0, 2.0, 3.0], &layout, 1.0).is_err());
}

fn vec_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(250))]

    #[test]
    fn prox_maps_are_nonexpansive(x in vec_of(12), y in vec_of(12), c in vec_of(12), gamma in 0.01f64..3.0, r in 0.0f64..3.0) {
        let layout = GroupLayout::blocks(6, 2).unwrap();
        let d = distance(&x, &y);
        let pairs = [
            (prox_l1(&x, gamma).unwrap(), prox_l1(&y, gamma).unwrap()),
            (prox_group_l12(&x, &layout, gamma).unwrap(), prox_group_l12(&y, &layout, gamma).unwrap()),
            (project_l2_ball(&x, &c, r).unwrap(), project_l2_ball(&y, &c, r).unwrap()),
            (prox_box(&x, -1.0, 2.0, gamma).unwrap(), prox_box(&y, -1.0, 2.0, gamma).unwrap()),
        ];
        for (px, py) in &pairs {
            prop_assert!(distance(px, py) <= d * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn prox_is_idempotent_on_fixed_points(x in vec_of(8), lo in -1.0f64..0.0) {
        let p = prox_box(&x, lo, lo + 1.0, 1.0).unwrap();
        prop_assert_eq!(prox_box(&p, lo, lo + 1.0, 1.0).unwrap(), p);
        prop_assert_eq!(prox_l1(&[0.0; 8], 0.3).unwrap(), vec![0.0; 8]);
    }
}
