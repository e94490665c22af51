use conelab_core::{MetricTree, NpcTarget, TargetPoint};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn targets() -> Vec<NpcTarget> {
    vec![
        NpcTarget::Euclidean { dim: 3 },
        NpcTarget::HyperbolicPlane,
        NpcTarget::Tree(MetricTree::tripod(1.0).unwrap()),
    ]
}

fn sample(target: &NpcTarget, seed: u64, count: usize) -> Vec<TargetPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| target.random_point(&mut rng, 2.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn quadruple_comparison_holds(seed in any::<u64>()) {
        for target in targets() {
            let p = sample(&target, seed, 4);
            let res = target.npc_quadruple_residual(&p[0], &p[1], &p[2], &p[3]);
            prop_assert!(res.residual >= -1e-9, "{}: {:?}", target.label(), res);
        }
    }

    #[test]
    fn distance_is_a_metric(seed in any::<u64>()) {
        for target in targets() {
            let p = sample(&target, seed, 3);
            let d = |a: usize, b: usize| target.dist(&p[a], &p[b]);
            prop_assert!(d(0, 0).abs() < 1e-9);
            prop_assert!((d(0, 1) - d(1, 0)).abs() <= 1e-9 * (1.0 + d(0, 1)));
            prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
        }
    }

    #[test]
    fn geodesic_points_split_distance(seed in any::<u64>(), s in 0.0..=1.0f64) {
        for target in targets() {
            let p = sample(&target, seed, 2);
            let m = target.geodesic_point(&p[0], &p[1], s).unwrap();
            let d = target.dist(&p[0], &p[1]);
            prop_assert!((target.dist(&p[0], &m) - s * d).abs() <= 1e-7 * (1.0 + d));
            prop_assert!((target.dist(&m, &p[1]) - (1.0 - s) * d).abs() <= 1e-7 * (1.0 + d));
        }
    }

    #[test]
    fn midpoint_convexity_of_distance(seed in any::<u64>()) {
        // d(m(a,b), m(c,d)) ≤ (d(a,c) + d(b,d)) / 2 in a CAT(0) space
        for target in targets() {
            let p = sample(&target, seed, 4);
            let m1 = target.geodesic_point(&p[0], &p[1], 0.5).unwrap();
            let m2 = target.geodesic_point(&p[2], &p[3], 0.5).unwrap();
            let bound = 0.5 * (target.dist(&p[0], &p[2]) + target.dist(&p[1], &p[3]));
            prop_assert!(target.dist(&m1, &m2) <= bound + 1e-8);
        }
    }

    #[test]
    fn barycenter_minimizes_objective(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for target in targets() {
            let pts: Vec<(TargetPoint, f64)> = sample(&target, seed, n)
                .into_iter()
                .enumerate()
                .map(|(i, p)| (p, 0.5 + i as f64))
                .collect();
            let b = target.weighted_barycenter(&pts, 1e-12).unwrap();
            let best = target.barycenter_objective(&b, &pts);
            for _ in 0..20 {
                let q = target.random_point(&mut rng, 2.0);
                prop_assert!(best <= target.barycenter_objective(&q, &pts) + 1e-8);
            }
            // variance inequality: F(q) − F(b) ≥ W d²(q, b)
            let total: f64 = pts.iter().map(|p| p.1).sum();
            for (q, _) in &pts {
                let gap = target.barycenter_objective(q, &pts) - best;
                prop_assert!(gap + 1e-7 * (1.0 + best) >= total * target.dist(q, &b).powi(2));
            }
        }
    }

    #[test]
    fn tree_barycenter_matches_cyclic_averaging(seed in any::<u64>()) {
        let target = NpcTarget::Tree(MetricTree::tripod(1.0).unwrap());
        let pts: Vec<(TargetPoint, f64)> = sample(&target, seed, 4).into_iter().map(|p| (p, 1.0)).collect();
        let exact = target.weighted_barycenter(&pts, 1e-12).unwrap();
        let cyclic = target.cyclic_barycenter(&pts, 1e-12, 200_000).unwrap();
        prop_assert!(target.dist(&exact, &cyclic) < 1e-2);
    }
}

#[test]
fn seeded_quadruple_sweep_has_no_negative_residuals() {
    for target in targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let worst = (0..10_000)
            .map(|_| {
                let p: Vec<TargetPoint> = (0..4).map(|_| target.random_point(&mut rng, 2.0)).collect();
                target.npc_quadruple_residual(&p[0], &p[1], &p[2], &p[3]).residual
            })
            .fold(f64::INFINITY, f64::min);
        assert!(worst >= -1e-9, "{}: {worst}", target.label());
    }
}

#[test]
fn collinear_quadruple_is_an_equality() {
    let line = NpcTarget::real_line();
    let p: Vec<TargetPoint> = [0.0, 1.0, 3.0, 4.0].iter().map(|&x| TargetPoint::scalar(x)).collect();
    let res = line.npc_quadruple_residual(&p[0], &p[1], &p[2], &p[3]);
    assert_eq!(res.lhs, 4.0);
    assert_eq!(res.rhs, 4.0);
}
