use critlab::cantor::{CantorMap, CantorSchedule};
use critlab::maps::radial::ProfileSpec;
use critlab::maps::{AffineMap, Domain, FoldingMap, Mapping, RadialMap};
use critlab::regimes::RegimeParams;
use critlab::verify::{
    degree_2d, distortion, find_mollification_radius, grid_preimage_count, injectivity_scan, mollify_and_check,
    rectangle_loop, sign_constancy_scan, ApproxCheckConfig, InjectivityVerdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn folding() -> FoldingMap {
    FoldingMap::midpoint(2, 2.0, 0.5).unwrap()
}

fn cantor(k: usize) -> CantorMap {
    CantorMap::new(CantorSchedule::build(&RegimeParams::parse(2, "3", "1", "1").unwrap(), k).unwrap())
}

/// A target with three preimages: `0 < y₁ < |h(ỹ)|^α`.
fn triple_target(f: &FoldingMap, t: f64, frac: f64) -> [f64; 2] {
    [frac * f.fold_depth(&[t]).abs().powf(f.alpha()), t]
}

#[test]
fn identity_is_injective() {
    let r = injectivity_scan(&AffineMap::identity(2), &[-1.0, -1.0], &[1.0, 1.0], 128).unwrap();
    assert_eq!(r.verdict, InjectivityVerdict::InjectiveOnSample);
    assert_eq!(r.collision_count, 0);
}

#[test]
fn folding_collisions_lie_in_fold_region() {
    let f = folding();
    let r = injectivity_scan(&f, &[-1.0, -1.0], &[1.0, 1.0], 256).unwrap();
    assert_eq!(r.verdict, InjectivityVerdict::CollisionFound);
    assert!(!r.collisions.is_empty());
    for c in &r.collisions {
        let fx = f.value(&c.x).unwrap();
        let fy = f.value(&c.y).unwrap();
        let d = ((fx[0] - fy[0]).powi(2) + (fx[1] - fy[1]).powi(2)).sqrt();
        assert!(d <= r.tol * (1.0 + 1e-12));
        // Distinct points with nearby images straddle the fold.
        assert!(c.x[0].min(c.y[0]) <= 1e-9 && c.x[0].max(c.y[0]) >= f.fold_depth(&[c.x[1]]) - 0.02);
    }
}

#[test]
fn folding_degree_in_triple_region() {
    let f = folding();
    let lp = rectangle_loop([-1.0, -1.0], [1.0, 1.0], 2000);
    for (t, frac) in [(0.0, 0.5), (0.3, 0.3), (-0.5, 0.7)] {
        let y = triple_target(&f, t, frac);
        let d = degree_2d(&f, &lp, y).unwrap();
        assert_eq!(d.degree, 1);
        let pre = f.preimages(&y, 4096).unwrap();
        assert_eq!(pre.count, 3);
        let signed: i64 = pre.preimages.iter().map(|x| f.jacobian(x).unwrap().signum() as i64).sum();
        assert_eq!(signed, d.degree);
    }
}

#[test]
fn degree_matches_signed_preimages_for_random_targets() {
    let f = folding();
    let lp = rectangle_loop([-1.0, -1.0], [1.0, 1.0], 2000);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for _ in 0..60 {
        let y = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
        let Ok(d) = degree_2d(&f, &lp, y) else { continue };
        let Ok(pre) = f.preimages(&y, 4096) else { continue };
        let jacs: Vec<f64> = pre.preimages.iter().map(|x| f.jacobian(x).unwrap()).collect();
        if jacs.iter().any(|j| j.abs() < 1e-6) {
            continue;
        }
        let signed: i64 = jacs.iter().map(|j| j.signum() as i64).sum();
        assert_eq!(signed, d.degree, "y = {y:?}");
        checked += 1;
    }
    assert!(checked >= 40, "only {checked} regular targets");
}

#[test]
fn sign_structure() {
    let id = sign_constancy_scan(&AffineMap::identity(2), &[-1.0, -1.0], &[1.0, 1.0], 64, 1e-12).unwrap();
    assert_eq!(id.pos_fraction, 1.0);
    assert_eq!(id.neg_fraction, 0.0);
    let fold = sign_constancy_scan(&folding(), &[-1.0, -1.0], &[1.0, 1.0], 128, 1e-12).unwrap();
    assert!(fold.pos_fraction > 0.0 && fold.neg_fraction > 0.0);
    assert!((fold.pos_fraction + fold.neg_fraction + fold.zero_count as f64 / fold.sampled as f64 - 1.0).abs() < 1e-12);
    let c = sign_constancy_scan(&cantor(4), &[-1.0, -1.0], &[1.0, 1.0], 128, 0.0).unwrap();
    assert_eq!(c.neg_fraction, 0.0);
}

#[test]
fn distortion_examples() {
    assert_eq!(distortion(&AffineMap::identity(2), &[0.2, 0.3]).unwrap(), 1.0);
    let m = RadialMap::from_spec(2, ProfileSpec::Power { c: 1.0, p: 2.0 }, Domain::unit_cube(2)).unwrap();
    for x in [[0.3, 0.4], [-0.1, 0.7], [0.5, -0.5]] {
        assert!((distortion(&m, &x).unwrap() - 2.0).abs() < 1e-12);
    }
    assert_eq!(distortion(&folding(), &[0.0, 0.3]).unwrap(), 1.0);
}

#[test]
fn mollification_approaches_map() {
    let f = cantor(4);
    let (lo, hi) = ([0.1, 0.8], [0.9, 0.9]);
    let mut last_gap = f64::INFINITY;
    let mut last_dist = f64::INFINITY;
    let mut r = 0.05;
    for _ in 0..4 {
        let c = ApproxCheckConfig { delta: 0.1, eta: 0.05, kernel_radius: r };
        let rep = mollify_and_check(&f, &c, lo, hi, 64).unwrap();
        let gap = (rep.min_jac - rep.min_jac_unmollified).abs();
        assert!(gap <= last_gap * (1.0 + 1e-9), "r = {r}: {gap} after {last_gap}");
        assert!(rep.sup_distance <= last_dist * (1.0 + 1e-9));
        last_gap = gap;
        last_dist = rep.sup_distance;
        r *= 0.5;
    }
}

#[test]
fn mollification_radius_found() {
    let f = cantor(4);
    let c = ApproxCheckConfig { delta: 0.1, eta: 0.02, kernel_radius: 0.05 };
    let reps = find_mollification_radius(&f, &c, [0.1, 0.8], [0.9, 0.9], 64, 6).unwrap();
    let last = reps.last().unwrap();
    assert!(last.meets_delta && last.within_eta && last.injective, "{last:?}");
    assert!(last.min_jac >= c.delta);
}

#[test]
fn mollification_refuses_degenerate_neighbourhood() {
    let c = ApproxCheckConfig { delta: 0.1, eta: 0.05, kernel_radius: 0.05 };
    assert!(mollify_and_check(&folding(), &c, [-0.3, -0.3], [0.3, 0.3], 32).is_err());
    let bad = ApproxCheckConfig { delta: 0.0, ..c };
    assert!(mollify_and_check(&AffineMap::identity(2), &bad, [-0.3, -0.3], [0.3, 0.3], 32).is_err());
}

#[test]
fn preimage_count_in_three_dimensions() {
    let f = FoldingMap::midpoint(3, 2.0, 0.5).unwrap();
    let t = [0.1, -0.2];
    let y = [0.5 * f.fold_depth(&t).abs().powf(f.alpha()), t[0], t[1]];
    let r = grid_preimage_count(&f, &[-1.0; 3], &[1.0; 3], 96, &y).unwrap();
    assert_eq!(r.count, 3, "{r:?}");
    let one = grid_preimage_count(&f, &[-1.0; 3], &[1.0; 3], 48, &[0.5, 0.1, 0.1]).unwrap();
    assert_eq!(one.count, 1);
}

#[test]
fn degree_requires_planar_map_and_margin() {
    let lp = rectangle_loop([-1.0, -1.0], [1.0, 1.0], 100);
    assert!(degree_2d(&AffineMap::identity(3), &lp, [0.0, 0.0]).is_err());
    assert!(degree_2d(&AffineMap::identity(2), &lp[..2], [0.0, 0.0]).is_err());
    assert!(degree_2d(&AffineMap::identity(2), &lp, [1.0, 0.0]).is_err());
}
