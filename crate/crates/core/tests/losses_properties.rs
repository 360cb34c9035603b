mod common;

use ebt_core::gradcheck::{check_pred_grad, FD_STEP, MAX_REL_ERROR};
use ebt_core::{ebt, ebt_grad, wbce, wbce_grad, BinaryMap, LossKind, LossParams, PixelGrid};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{ebt_reference, random_map, random_pred, wbce_reference};

fn instance(seed: u64, h: usize, w: usize, density: f64, lo: f64, hi: f64) -> (PixelGrid, BinaryMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gt = random_map(&mut rng, h, w, density);
    (random_pred(&mut rng, h, w, lo, hi), gt)
}

fn loss(kind: LossKind, pred: &PixelGrid, gt: &BinaryMap, p: &LossParams) -> f64 {
    match kind {
        LossKind::Wbce => wbce(pred, gt, p.lambda, p.epsilon).unwrap().value,
        LossKind::Ebt => ebt(pred, gt, p).unwrap().value,
    }
}

fn grad(kind: LossKind, pred: &PixelGrid, gt: &BinaryMap, p: &LossParams) -> Vec<f64> {
    match kind {
        LossKind::Wbce => wbce_grad(pred, gt, p.lambda, p.epsilon).unwrap().0.as_slice().to_vec(),
        LossKind::Ebt => ebt_grad(pred, gt, p).unwrap().0.as_slice().to_vec(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_definition_oracles(seed in any::<u64>(), h in 1usize..16, w in 1usize..16,
                                  density in 0.0f64..0.5, r in 0usize..6,
                                  b_b in 0.0f64..2.0, b_t in 0.0f64..2.0) {
        let (pred, gt) = instance(seed, h, w, density, 0.0, 1.0);
        let params = LossParams { b_b, b_t, r, ..LossParams::default() };
        let got = ebt(&pred, &gt, &params).unwrap().value;
        let want = ebt_reference(&pred, &gt, r, [params.b_e, b_b, b_t], params.epsilon);
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
        let got = wbce(&pred, &gt, params.lambda, params.epsilon).unwrap().value;
        let want = wbce_reference(&pred, &gt, params.lambda, params.epsilon);
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn nonnegative(seed in any::<u64>(), h in 1usize..12, w in 1usize..12, density in 0.0f64..1.0) {
        let (pred, gt) = instance(seed, h, w, density, 0.0, 1.0);
        let p = LossParams::default();
        for kind in [LossKind::Wbce, LossKind::Ebt] {
            prop_assert!(loss(kind, &pred, &gt, &p) >= 0.0);
        }
    }

    #[test]
    fn perfect_prediction_is_a_floor(seed in any::<u64>(), h in 1usize..12, w in 1usize..12,
                                     density in 0.0f64..1.0) {
        let (other, gt) = instance(seed, h, w, density, 0.0, 1.0);
        let p = LossParams::default();
        let perfect = gt.to_pixels().map(|v| v.clamp(p.epsilon, 1.0 - p.epsilon));
        for kind in [LossKind::Wbce, LossKind::Ebt] {
            prop_assert!(loss(kind, &perfect, &gt, &p) <= loss(kind, &other, &gt, &p));
        }
    }

    #[test]
    fn finite_differences_on_8x8(seed in any::<u64>(), density in 0.05f64..0.6) {
        let (pred, gt) = instance(seed, 8, 8, density, 0.05, 0.95);
        let p = LossParams::default();
        for kind in [LossKind::Wbce, LossKind::Ebt] {
            let err = check_pred_grad(kind, &pred, &gt, &p, FD_STEP).unwrap();
            prop_assert!(err <= MAX_REL_ERROR, "{kind}: {err}");
        }
    }

    #[test]
    fn small_step_against_gradient_descends(seed in any::<u64>(), density in 0.05f64..0.6) {
        let (pred, gt) = instance(seed, 8, 8, density, 0.05, 0.95);
        let p = LossParams::default();
        for kind in [LossKind::Wbce, LossKind::Ebt] {
            let g = grad(kind, &pred, &gt, &p);
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assume!(norm > 0.0);
            let step = 1e-6 / norm;
            let moved = PixelGrid::new(8, 8, pred.as_slice().iter().zip(&g)
                .map(|(x, d)| x - step * d).collect()).unwrap();
            prop_assert!(loss(kind, &moved, &gt, &p) < loss(kind, &pred, &gt, &p));
        }
    }

    #[test]
    fn raising_boundary_weight_raises_loss(seed in any::<u64>(), h in 3usize..12, w in 3usize..12,
                                           lo in 0.0f64..1.5, delta in 0.01f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gt = random_map(&mut rng, h, w, 0.1);
        gt.set(h / 2, w / 2, true);
        gt.set(0, 0, false);
        let pred = random_pred(&mut rng, h, w, 0.05, 0.95);
        prop_assume!(ebt_core::classify(&gt, 1).unwrap().count_boundary() >= 1);
        let a = LossParams { b_b: lo, r: 1, ..LossParams::default() };
        let b = LossParams { b_b: lo + delta, ..a };
        prop_assert!(ebt(&pred, &gt, &b).unwrap().value > ebt(&pred, &gt, &a).unwrap().value);
    }
}

#[test]
fn three_by_three_center_edge_gradient_by_differences() {
    let gt = BinaryMap::from_rows(&[[0, 0, 0], [0, 1, 0], [0, 0, 0]]).unwrap();
    let pred = PixelGrid::filled(3, 3, 0.5).unwrap();
    let p = LossParams { r: 1, ..LossParams::default() };
    let g = ebt_grad(&pred, &gt, &p).unwrap();
    assert!((g.0.get(1, 1) + (8.0 / 9.0) / (0.5 * 9.0)).abs() < 1e-15);
    assert!((g.0.get(0, 0) - 0.8 * (1.0 / 9.0) / (0.5 * 9.0)).abs() < 1e-15);
    assert!(check_pred_grad(LossKind::Ebt, &pred, &gt, &p, FD_STEP).unwrap() < MAX_REL_ERROR);
}
