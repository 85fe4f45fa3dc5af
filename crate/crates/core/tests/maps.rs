use critlab::calculus::{fd_jacobian, DiffConfig};
use critlab::maps::ball::admissible_beta;
use critlab::maps::dense::{factor_df_sup, LogProfile};
use critlab::maps::folding::{admissible_alpha, FoldBranch};
use critlab::maps::radial::ProfileSpec;
use critlab::maps::{BallMap, DenseMap, Domain, FoldingMap, Mapping, Profile, RadialMap};
use proptest::prelude::*;

fn radial(n: usize, spec: ProfileSpec) -> RadialMap {
    RadialMap::from_spec(n, spec, Domain::unit_cube(n)).unwrap()
}

fn square() -> ProfileSpec {
    ProfileSpec::Polynomial { coeffs: vec![0.0, 0.0, 1.0] }
}

#[test]
fn radial_identity() {
    let m = radial(3, ProfileSpec::identity());
    let x = [0.3, -0.2, 0.5];
    let q = m.quantities(&x).unwrap();
    assert_eq!(m.value(&x).unwrap(), x.to_vec());
    assert!((q.jac - 1.0).abs() < 1e-15);
    assert!(q.d2f_norm.abs() < 1e-15);
}

#[test]
fn radial_square_profile() {
    let m = radial(2, square());
    let x = [0.3, 0.4];
    let q = m.quantities(&x).unwrap();
    assert!((q.jac - 0.5).abs() < 1e-14);
    assert!((q.d2f_norm - 2.0).abs() < 1e-14);
    assert!((q.df_norm - 1.0).abs() < 1e-14);
    let fd = fd_jacobian(&m, &x, &DiffConfig::default()).unwrap();
    assert!((fd - 0.5).abs() < 1e-9);
    let v = m.value(&x).unwrap();
    assert!((v[0] - 0.15).abs() < 1e-15 && (v[1] - 0.2).abs() < 1e-15);
}

#[test]
fn radial_rejects_center() {
    assert!(radial(2, square()).quantities(&[0.0, 0.0]).is_err());
    assert!(radial(2, square()).jet(&[0.0, 0.0]).is_err());
}

#[test]
fn folding_identity_at_left_face() {
    let f = FoldingMap::midpoint(3, 2.0, 0.5).unwrap();
    for xt in [[0.0, 0.0], [0.3, -0.5], [0.9, 0.2]] {
        let x = [-1.0, xt[0], xt[1]];
        let v = f.value(&x).unwrap();
        for (a, b) in v.iter().zip(&x) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn folding_crease_and_negative_region() {
    let f = FoldingMap::midpoint(2, 2.0, 0.5).unwrap();
    for t in [-0.9, 0.0, 0.5] {
        assert_eq!(f.jacobian(&[0.0, t]).unwrap(), 0.0);
    }
    assert_eq!(f.fold_depth(&[0.0]), -0.5);
    assert!(f.jacobian(&[-0.25, 0.0]).unwrap() < 0.0);
    assert_eq!(f.branch_of(-0.2, -0.5), FoldBranch::InnerFold);
    assert_eq!(f.branch_of(-0.3, -0.5), FoldBranch::OuterFold);
    assert_eq!(f.branch_of(-0.6, -0.5), FoldBranch::Lower);
    assert!(f.value(&[1.5, 0.0]).is_err());
}

#[test]
fn folding_admissible_interval() {
    let (lo, hi) = admissible_alpha(2.0, 0.5);
    assert_eq!((lo, hi), (1.5, 3.0));
    assert!(FoldingMap::new(2, 2.0, 0.5, 1.45).is_err());
    assert!(FoldingMap::new(2, 2.0, 0.5, 3.0).is_err());
    assert!(FoldingMap::with_alpha(2, 1.45).is_ok());
    assert!(FoldingMap::with_alpha(1, 2.0).is_err());
    assert_eq!(FoldingMap::midpoint(2, 2.0, 0.5).unwrap().alpha(), 2.25);
}

#[test]
fn folding_preimage_examples() {
    let f = FoldingMap::midpoint(2, 2.0, 0.5).unwrap();
    let top = f.fold_depth(&[0.1]).abs().powf(f.alpha());
    assert_eq!(f.preimages(&[0.5 * top, 0.1], 1024).unwrap().count, 3);
    // Below the fold region the outer branch is injective.
    assert_eq!(f.preimages(&[-0.8, 0.1], 1024).unwrap().count, 1);
    assert_eq!(f.preimages(&[-1.0, 0.0], 1024).unwrap().count, 1);
    let out = f.preimages(&[2.0, 0.0], 1024).unwrap();
    assert!(out.out_of_range && out.count == 0);
    assert!(f.preimages(&[0.0, 0.0], 32).is_err());
}

#[test]
fn folding_preimages_map_to_target() {
    let f = FoldingMap::midpoint(2, 2.0, 0.5).unwrap();
    let y = [0.01, -0.3];
    let r = f.preimages(&y, 4096).unwrap();
    for x in &r.preimages {
        let v = f.value(x).unwrap();
        assert!((v[0] - y[0]).abs() < 1e-10 && (v[1] - y[1]).abs() < 1e-15);
    }
}

#[test]
fn ball_examples() {
    let b = BallMap::new(3, 4.0, 1.0, 1.75).unwrap();
    for t in [-1.0, -0.3, 0.0, 0.7, 1.0] {
        assert_eq!(b.value(&[0.0, 0.0, t]).unwrap(), vec![0.0; 3]);
    }
    let j = b.jacobian(&[1.0, 0.0, 0.5]).unwrap();
    assert!((j - 1.0).abs() < 1e-14);
    let fd = fd_jacobian(&b, &[1.0 - 1e-3, 0.0, 0.5], &DiffConfig::default()).unwrap();
    assert!((fd - b.jacobian(&[1.0 - 1e-3, 0.0, 0.5]).unwrap()).abs() < 1e-8);
    assert!(b.value(&[0.0, 0.0, 2.5]).is_err());
}

#[test]
fn ball_admissible_interval() {
    let (lo, hi) = admissible_beta(3, 4.0, 1.0);
    assert_eq!((lo, hi), (1.5, 2.0));
    assert!(BallMap::new(3, 8.0, 1.0, 1.75).is_err());
    assert!(BallMap::with_beta(3, 1.75).is_ok());
}

#[test]
fn ball_injective_on_boundary() {
    let b = BallMap::with_beta(3, 1.75).unwrap();
    let mut pts = Vec::new();
    let m = 15;
    for i in 0..m {
        for j in 0..m {
            let u = -1.0 + 2.0 * i as f64 / (m - 1) as f64;
            let v = -1.0 + 2.0 * j as f64 / (m - 1) as f64;
            pts.push([u, v, -2.0]);
            pts.push([u, v, 2.0]);
            pts.push([-1.0, u, 2.0 * v]);
            pts.push([1.0, u, 2.0 * v]);
            pts.push([u, -1.0, 2.0 * v]);
            pts.push([u, 1.0, 2.0 * v]);
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    assert!(pts.len() >= 1000);
    let images: Vec<Vec<f64>> = pts.iter().map(|p| b.value(p).unwrap()).collect();
    for i in 0..images.len() {
        for j in 0..i {
            let d: f64 = images[i].iter().zip(&images[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!(d > 1e-12, "{:?} and {:?} collide", pts[i], pts[j]);
        }
    }
}

#[test]
fn dense_examples() {
    let empty = DenseMap::new(vec![], None).unwrap();
    assert_eq!(empty.value(&[0.2, -0.3]).unwrap(), vec![0.2, -0.3]);
    assert_eq!(empty.jacobian(&[0.2, -0.3]).unwrap(), 1.0);

    let centers = vec![[0.5, 0.0], [-0.4, 0.3], [0.1, -0.6]];
    let m = DenseMap::new(centers.clone(), None).unwrap();
    for c in &centers {
        assert_eq!(m.jacobian(c).unwrap(), 0.0);
    }
    assert!(m.df_bound() <= 2.0);

    let r = 0.09;
    let single = DenseMap::new(vec![[0.0, 0.0]], Some(vec![r])).unwrap();
    let y = [r / 3.0 * 3.0 * 0.6, r * 0.8];
    assert_eq!(single.value(&y).unwrap(), y.to_vec());
}

#[test]
fn dense_profile_middle_slope_and_bounds() {
    let p = LogProfile::new(0.01).unwrap();
    let slope = 1.0 + 1.0 / (100f64).ln();
    assert!((p.middle_slope() - slope).abs() < 1e-15);
    assert!((p.d1(0.011) - slope).abs() < 1e-14);
    assert_eq!(p.value(0.5), 0.5);
    let sups: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|r| factor_df_sup(*r).unwrap()).collect();
    assert!(sups.iter().all(|s| *s <= 2.0 && *s > 1.0));
    assert!(sups.windows(2).all(|w| w[1] < w[0]), "{sups:?}");
}

#[test]
fn dense_identity_on_unit_circle() {
    let m = DenseMap::new(vec![[0.5, 0.0], [-0.4, 0.3], [0.1, -0.6], [0.2, 0.55], [-0.5, -0.4]], None).unwrap();
    for k in 0..64 {
        let t = k as f64 * std::f64::consts::TAU / 64.0;
        let x = [t.cos(), t.sin()];
        let v = m.value(&x).unwrap();
        assert!((v[0] - x[0]).abs() < 1e-15 && (v[1] - x[1]).abs() < 1e-15);
    }
}

#[test]
fn dense_rejects_bad_centers() {
    assert!(DenseMap::new(vec![[1.0, 0.0]], None).is_err());
    assert!(DenseMap::new(vec![[0.1, 0.1], [0.1, 0.1]], None).is_err());
    assert!(DenseMap::new(vec![[0.1, 0.1]], Some(vec![0.5])).is_err());
}

proptest! {
    #[test]
    fn folding_seams_continuous(alpha in 1.2..3.5f64, t in -0.95..0.95f64) {
        let f = FoldingMap::with_alpha(2, alpha).unwrap();
        prop_assert!(f.seam_mismatch(&[t]) < 1e-9);
    }

    #[test]
    fn folding_sign_structure(alpha in 1.6..2.9f64, x1 in -1.0..1.0f64, t in -0.95..0.95f64) {
        let f = FoldingMap::new(2, 2.0, 0.5, alpha).unwrap();
        let h = f.fold_depth(&[t]);
        let j = f.jacobian(&[x1, t]).unwrap();
        if x1 > 1e-9 || x1 < h - 1e-9 {
            prop_assert!(j > 0.0, "J = {j} at x1 = {x1}, h = {h}");
        } else if x1 > h + 1e-9 && x1 < -1e-9 && (x1 - 0.5 * h).abs() > 1e-9 {
            prop_assert!(j < 0.0, "J = {j} at x1 = {x1}, h = {h}");
        }
    }

    #[test]
    fn radial_jacobian_formula(p in 0.5..3.0f64, x in prop::array::uniform3(-0.9..0.9f64)) {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(r > 0.05);
        let m = radial(3, ProfileSpec::Power { c: 1.0, p });
        let q = m.quantities(&x).unwrap();
        let expected = p * r.powf(p - 1.0) * r.powf(p - 1.0).powi(2);
        prop_assert!((q.jac - expected).abs() <= 1e-12 * expected.max(1.0));
        prop_assert!((m.jacobian(&x).unwrap() - q.jac).abs() <= 1e-10 * q.jac.max(1.0));
    }

    #[test]
    fn ball_jacobian_formula(beta in 1.55..1.95f64, x in prop::array::uniform3(-1.0..1.0f64)) {
        let b = BallMap::with_beta(3, beta).unwrap();
        let xb = (x[0] * x[0] + x[1] * x[1]).sqrt();
        prop_assume!(xb > 1e-3);
        let j = b.jacobian(&x).unwrap();
        prop_assert!((j - xb.powf(beta)).abs() < 1e-12);
    }
}
