use critlab::cantor::{CantorMap, CantorSchedule, CellPair};
use critlab::dimension::{
    aligned_cube_count, box_dimension_of_set, fit_jacobian_constant, fit_line, grid_box_count, near_critical_dimension,
    CellShape, EpsilonRule,
};
use critlab::maps::{AffineMap, FoldingMap};
use critlab::regimes::RegimeParams;
use proptest::prelude::*;

fn schedule(q: &str, a: &str, d: &str, k: usize) -> CantorSchedule {
    CantorSchedule::build(&RegimeParams::parse(2, q, a, d).unwrap(), k).unwrap()
}

fn generations(s: &CantorSchedule, upto: usize) -> Vec<Vec<CellPair>> {
    (1..=upto).map(|i| s.cells(i).unwrap()).collect()
}

#[test]
fn cube_set_slope_is_d() {
    for (a, d, k) in [("1", "1", 6), ("1/2", "3/2", 6)] {
        let s = schedule("3", a, d, k);
        let r = box_dimension_of_set(&generations(&s, k), CellShape::Cube, Some(s.params().d)).unwrap();
        let slope = r.slope.unwrap();
        assert!((slope - s.params().d).abs() < 1e-9, "d = {d}: slope {slope}");
        assert!(r.residual.unwrap() < 1e-9);
        assert!(r.flag.is_none());
    }
}

#[test]
fn cube_set_needs_three_ordered_generations() {
    let s = schedule("3", "1", "1", 4);
    assert!(box_dimension_of_set(&generations(&s, 2), CellShape::Cube, None).is_err());
    let mut g = generations(&s, 4);
    g.swap(1, 2);
    assert!(box_dimension_of_set(&g, CellShape::Cube, None).is_err());
}

#[test]
fn rectangle_set_slope_reported() {
    let s = schedule("3", "1", "1", 4);
    let r = box_dimension_of_set(&generations(&s, 4), CellShape::Rectangle, None).unwrap();
    let slope = r.slope.unwrap();
    assert!(slope > 0.0 && slope < 2.0, "{slope}");
    assert!(r.counts.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(r.running_slope.len(), r.scales.len());
}

#[test]
fn aligned_cube_count_is_exact() {
    let s = schedule("3", "1", "1", 5);
    for i in 1..=5 {
        assert_eq!(aligned_cube_count(&s.cells(i).unwrap()).unwrap(), 1u64 << (2 * i));
    }
    assert_eq!(aligned_cube_count(&[]).unwrap(), 0);
}

#[test]
fn folding_crease_is_one_dimensional() {
    // For x₁ > 0 the Jacobian is 2.25·x₁^{α-1}; ε(s) = 2.25·(s/8)^{α-1} keeps
    // the strip {|J| ≤ ε} at an eighth of the box side, so boxes see a line.
    let f = FoldingMap::midpoint(2, 2.0, 0.5).unwrap();
    let beta = f.alpha() - 1.0;
    let c_hat = 0.5 * 2.25 * 8f64.powf(-beta);
    let rule = EpsilonRule::CantorMatched { n_over_d: 1.0, beta, c_hat, boxes_per_cube: 2 };
    let r = near_critical_dimension(&f, &rule, 10, 8, Some(1.0)).unwrap();
    assert!((r.slope.unwrap() - 1.0).abs() < 0.1, "{r:?}");
    for (side, count) in r.scales.iter().zip(&r.counts) {
        // Both columns of boxes along x₁ = 0 are occupied.
        assert!(*count as f64 >= 2.0 * 2.0 / side, "side {side}: {count}");
    }
}

#[test]
fn fixed_epsilon_counts_grow_with_epsilon() {
    let f = FoldingMap::midpoint(2, 2.0, 0.5).unwrap();
    let mut last: Option<Vec<u64>> = None;
    for eps in [1e-4, 1e-3, 1e-2, 1e-1] {
        let r = near_critical_dimension(&f, &EpsilonRule::Fixed { eps }, 7, 3, None).unwrap();
        if let Some(prev) = &last {
            assert!(prev.iter().zip(&r.counts).all(|(a, b)| b >= a));
        }
        last = Some(r.counts);
    }
}

#[test]
fn empty_near_critical_set_is_flagged() {
    let m = AffineMap::identity(2);
    let r = near_critical_dimension(&m, &EpsilonRule::Fixed { eps: 0.5 }, 6, 1, None).unwrap();
    assert!(r.counts.iter().all(|&c| c == 0));
    assert!(r.slope.is_none());
    assert!(r.flag.is_some());
}

#[test]
fn near_critical_refusals() {
    let m = AffineMap::identity(2);
    let rule = EpsilonRule::Fixed { eps: 0.5 };
    assert!(near_critical_dimension(&m, &rule, 2, 1, None).is_err());
    assert!(near_critical_dimension(&m, &rule, 40, 1, None).is_err());
    assert!(near_critical_dimension(&m, &rule, 6, 0, None).is_err());
}

#[test]
fn cantor_matched_levels_shrink() {
    let s = schedule("3", "1", "1", 8);
    let rule = EpsilonRule::for_schedule(&s, 2).unwrap();
    let levels = rule.levels(12);
    assert!(levels.len() >= 5);
    assert!(levels.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1));
    assert!(levels.last().unwrap().0 >= 2f64.powi(-11) * (1.0 - 1e-12));
    assert!(EpsilonRule::for_schedule(&s, 0).is_err());
    let c = fit_jacobian_constant(&s).unwrap();
    assert!((0.125..=8.0).contains(&c), "{c}");
}

#[test]
fn cantor_near_critical_slope_tracks_d() {
    let s = schedule("3", "1", "1", 10);
    let rule = EpsilonRule::for_schedule(&s, 2).unwrap();
    let r = near_critical_dimension(&CantorMap::new(s), &rule, 10, 3, Some(1.0)).unwrap();
    assert!((r.slope.unwrap() - 1.0).abs() < 0.1, "{r:?}");
}

#[test]
fn grid_count_validation() {
    let b = vec![(vec![0.0, 0.0], vec![1.0, 1.0])];
    assert!(grid_box_count(&b, 0.0, &[0.0, 0.0]).is_err());
    assert!(grid_box_count(&b, 0.5, &[0.0]).is_err());
    assert!(grid_box_count(&b, 1e-5, &[0.0, 0.0]).is_err());
}

#[test]
fn product_counts_multiply() {
    let s = schedule("3", "1", "1", 3);
    let rects: Vec<(Vec<f64>, Vec<f64>)> = s.cells(3).unwrap().iter().map(|c| c.rectangle()).collect();
    let segs: Vec<(Vec<f64>, Vec<f64>)> =
        (0..5).map(|k| (vec![-1.0 + 0.37 * k as f64], vec![-1.0 + 0.37 * k as f64 + 0.1])).collect();
    let product: Vec<(Vec<f64>, Vec<f64>)> = rects
        .iter()
        .flat_map(|(rl, rh)| {
            segs.iter().map(move |(sl, sh)| {
                let lo: Vec<f64> = rl.iter().chain(sl).copied().collect();
                let hi: Vec<f64> = rh.iter().chain(sh).copied().collect();
                (lo, hi)
            })
        })
        .collect();
    let sides = [0.5, 0.25, 0.125, 0.0625];
    let mut logs = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for side in sides {
        let a = grid_box_count(&rects, side, &[-1.0, -1.0]).unwrap();
        let b = grid_box_count(&segs, side, &[-1.0]).unwrap();
        let ab = grid_box_count(&product, side, &[-1.0, -1.0, -1.0]).unwrap();
        assert_eq!(ab, a * b);
        logs.0.push(-side.log2());
        logs.1.push((a as f64).log2());
        logs.2.push((b as f64).log2());
        logs.3.push((ab as f64).log2());
    }
    let slope = |y: &[f64]| fit_line(&logs.0, y).unwrap().0;
    assert!((slope(&logs.3) - slope(&logs.1) - slope(&logs.2)).abs() < 1e-9);
}

proptest! {
    #[test]
    fn fit_line_recovers_slope(m in -5.0..5.0f64, c in -5.0..5.0f64, len in 2usize..20) {
        let x: Vec<f64> = (0..len).map(|i| i as f64 * 0.7).collect();
        let y: Vec<f64> = x.iter().map(|v| m * v + c).collect();
        let (s, r) = fit_line(&x, &y).unwrap();
        prop_assert!((s - m).abs() < 1e-9);
        prop_assert!(r < 1e-9);
    }

    #[test]
    fn grid_count_monotone_under_refinement(
        boxes in prop::collection::vec((0.0..0.9f64, 0.0..0.9f64, 0.01..0.1f64), 1..12),
    ) {
        let b: Vec<(Vec<f64>, Vec<f64>)> =
            boxes.iter().map(|(x, y, w)| (vec![*x, *y], vec![x + w, y + w])).collect();
        let mut last = 0;
        for j in 0..7 {
            let c = grid_box_count(&b, 2f64.powi(-j), &[0.0, 0.0]).unwrap();
            let side = 2f64.powi(-j);
            let bound: u64 = boxes.iter().map(|(_, _, w)| ((w / side).ceil() as u64 + 1).pow(2)).sum();
            prop_assert!(c >= last);
            prop_assert!(c <= bound);
            last = c;
        }
    }
}
