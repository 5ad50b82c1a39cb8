use emflow::em::lower_bound_from_residuals;
use emflow::train::{loss_grad, softmax_field};
use emflow::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_flow(rng: &mut ChaCha8Rng, w: usize, h: usize) -> FlowField64 {
    FlowField::from_fn(w, h, |_, _| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
}

fn random_model(rng: &mut ChaCha8Rng, kind: ModelKind, k: usize) -> MotionModel64 {
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..kind.parameter_count()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    MotionModel::from_rows(kind, &rows).unwrap()
}

fn dist_strategy() -> impl Strategy<Value = DistanceKind> {
    prop_oneof![Just(DistanceKind::SquaredL2), Just(DistanceKind::L2Norm), Just(DistanceKind::L1Norm)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_rows_sum_to_one(seed in any::<u64>(), k in 1usize..5, dist in dist_strategy(), alpha in 1e-3f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_flow(&mut rng, 7, 5);
        let model = random_model(&mut rng, ModelKind::Affine, k);
        let seg = e_step(&residual_grid(&f, &model, dist), alpha);
        for i in 0..seg.sites() {
            let s: f64 = (0..k).map(|l| seg.prob(l, i)).sum();
            prop_assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn posterior_maximizes_the_bound(seed in any::<u64>(), dist in dist_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_flow(&mut rng, 6, 4);
        let model = random_model(&mut rng, ModelKind::Affine, 3);
        let lik = Likelihood { alpha: 0.5, dist };
        let r = residual_grid(&f, &model, dist);
        let post = lower_bound_from_residuals(&r, &e_step(&r, 0.5), &lik);
        let other = SoftSegmentation::uniform(3, 6, 4);
        prop_assert!(post >= lower_bound_from_residuals(&r, &other, &lik) - 1e-9);
    }

    #[test]
    fn loss_is_negated_bound(seed in any::<u64>(), dist in dist_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_flow(&mut rng, 5, 5);
        let model = random_model(&mut rng, ModelKind::FullQuadratic, 2);
        let logits = LogitField::new(2, 5, 5, (0..50).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let lik = Likelihood { alpha: 0.1, dist };
        prop_assert_eq!(loss(&f, &model, &logits, &lik), -lower_bound(&f, &model, &softmax_field(&logits), &lik));
    }

    #[test]
    fn gradient_is_tangent_to_simplex(seed in any::<u64>(), k in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_flow(&mut rng, 4, 3);
        let model = random_model(&mut rng, ModelKind::Affine, k);
        let logits = LogitField::new(k, 4, 3, (0..k * 12).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let g = loss_grad(&f, &model, &logits, &Likelihood { alpha: 0.05, dist: DistanceKind::L1Norm });
        for i in 0..12 {
            let s: f64 = (0..k).map(|l| g.get(l, i)).sum();
            let scale: f64 = (0..k).map(|l| g.get(l, i).abs()).sum::<f64>().max(1.0);
            prop_assert!(s.abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn augmentation_is_additive(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_flow(&mut rng, 9, 6);
        let (g, theta) = augment(&f, &mut rng, &AugmentRanges::default());
        let back = g.sub(&render_model(&theta, ModelKind::FullQuadratic, (9, 6))).unwrap();
        for (a, b) in back.vectors().iter().zip(f.vectors()) {
            prop_assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn hard_assignment_picks_most_probable(seed in any::<u64>(), k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logits = LogitField::new(k, 5, 4, (0..k * 20).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();
        let seg = softmax_field(&logits);
        let labels = hard_assign(&seg);
        for i in 0..20 {
            let l = labels.labels[i] as usize;
            for j in 0..k {
                prop_assert!(seg.prob(l, i) >= seg.prob(j, i));
            }
        }
    }
}
