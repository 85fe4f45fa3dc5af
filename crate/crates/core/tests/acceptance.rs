//! End-to-end acceptance run. Each criterion prints one PASS/FAIL line to
//! stderr (outside the test harness capture) and the test fails if any
//! criterion fails.

use std::io::Write;
use std::time::{Duration, Instant};

use critlab::calculus::{fd_gradient, fd_hessian_norm, DiffConfig};
use critlab::cantor::{CantorMap, CantorSchedule};
use critlab::dimension::{near_critical_dimension, EpsilonRule};
use critlab::maps::dense::{factor_d2_energy, DenseMap};
use critlab::maps::radial::ProfileSpec;
use critlab::maps::{BallMap, Domain, FoldingMap, Mapping, RadialMap, TrigMap};
use critlab::quadrature::{
    cantor_series, el_check, energy, key_estimate_check, series_summary, BumpTest, EnergyParams, JacobianField,
    LinearField, Psi,
};
use critlab::regimes::{classify, RegimeParams};
use critlab::verify::{injectivity_scan, sign_constancy_scan, InjectivityVerdict};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: u32, name: &str, limit: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let o = run();
    let elapsed = t.elapsed();
    let in_time = elapsed <= limit;
    let pass = o.pass && in_time;
    let line = format!(
        "[{}] criterion {id:>2} {name}: {} ({:.2}s, limit {}s)",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    let _ = writeln!(std::io::stderr(), "{line}");
    pass
}

fn regime_partition() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for n in [2u32, 3] {
        for iq in 0..20 {
            let q = n as f64 + 0.05 + iq as f64 * 0.25;
            for ia in 0..20 {
                let a = 0.1 + ia as f64 * 0.1;
                for id in 0..20 {
                    let d = (id as f64 + 0.5) * n as f64 / 20.0;
                    let p = RegimeParams::new(n, q, a, d).expect("valid tuple");
                    let v = classify(&p);
                    checked += 1;
                    if v.critical_set_null == v.counterexample_exists {
                        bad.push((n, q, a, d));
                    }
                }
            }
        }
    }
    Outcome { pass: bad.is_empty(), detail: format!("{checked} tuples, {} violations", bad.len()) }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Difference step at `x`: the default, reduced to a hundredth of the width
/// of any smooth transition strip the point lies in or near.
fn local_step(map: &dyn Mapping, x: &[f64]) -> f64 {
    let mut h: f64 = DiffConfig::default().step;
    for l in map.loci().iter().filter(|l| !l.singular) {
        let p = l.proximity(x);
        if p.distance < 2.0 * p.scale {
            h = h.min(0.01 * p.scale);
        }
    }
    h.max(1e-8)
}

/// Worst relative errors of `Df` and `J` against central differences on
/// `count` sampled points. Points the difference oracle refuses (singular
/// standoff, stencil outside the domain) and points `skip` rejects for the
/// chosen step are replaced.
fn derivative_errors(
    map: &dyn Mapping,
    rng: &mut ChaCha8Rng,
    count: usize,
    sample: &dyn Fn(&mut ChaCha8Rng) -> Vec<f64>,
    skip: &dyn Fn(&[f64], f64) -> bool,
) -> (f64, f64, usize) {
    let dom = map.domain();
    let (mut df_err, mut j_err): (f64, f64) = (0.0, 0.0);
    let mut done = 0;
    let mut rejected = 0;
    while done < count {
        let x = sample(rng);
        if !dom.contains(&x) {
            continue;
        }
        let c = DiffConfig { step: local_step(map, &x), ..DiffConfig::default() };
        if skip(&x, c.step) {
            rejected += 1;
            continue;
        }
        let fd = match fd_gradient(map, &x, &c) {
            Ok(m) => m,
            Err(_) => {
                rejected += 1;
                continue;
            }
        };
        let jet = map.jet(&x).expect("closed-form jet");
        let scale = max_abs(&jet.df).max(1e-300);
        df_err = df_err.max(max_abs(&(&jet.df - &fd)) / scale);
        let j = jet.jacobian();
        let jfd = fd.determinant();
        j_err = j_err.max((j - jfd).abs() / j.abs().max(jfd.abs()).max(1e-300));
        done += 1;
    }
    (df_err, j_err, rejected)
}

fn derivative_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let schedule = CantorSchedule::build(&RegimeParams::parse(2, "3", "1", "1").unwrap(), 4).unwrap();
    let maps: Vec<(&str, Box<dyn Mapping>)> = vec![
        (
            "radial",
            Box::new(
                RadialMap::from_spec(3, ProfileSpec::Power { c: 1.0, p: 1.5 }, Domain::unit_cube(3)).unwrap(),
            ),
        ),
        ("folding", Box::new(FoldingMap::midpoint(2, 2.0, 0.5).unwrap())),
        ("ball", Box::new(BallMap::new(3, 4.0, 1.0, 1.75).unwrap())),
        ("cantor", Box::new(CantorMap::new(schedule))),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut check = |name: &str,
                     map: &dyn Mapping,
                     sample: &dyn Fn(&mut ChaCha8Rng) -> Vec<f64>,
                     skip: &dyn Fn(&[f64], f64) -> bool| {
        let (df, j, rejected) = derivative_errors(map, &mut rng, 1000, sample, skip);
        parts.push(format!("{name} df {df:.1e} jac {j:.1e} (rejected {rejected})"));
        df < 1e-6 && j < 1e-6
    };
    for (name, map) in &maps {
        let (lo, hi) = map.domain().bounding_box();
        let uniform = move |rng: &mut ChaCha8Rng| -> Vec<f64> {
            lo.iter().zip(&hi).map(|(l, h)| rng.gen_range(*l..*h)).collect()
        };
        pass &= check(name, map.as_ref(), &uniform, &|_, _| false);
    }
    // Dense factors are the identity outside small disks; sample inside them.
    // The profile of a factor of radius R is only C^{1,1} where its
    // logarithmic piece meets the linear one, at |x - c| = R/3.
    let centers = vec![[0.5, 0.0], [-0.4, 0.3], [0.1, -0.6]];
    let radii = vec![0.1, 0.01, 0.001];
    let dense = DenseMap::new(centers.clone(), Some(radii.clone())).unwrap();
    let (cs, rs) = (centers.clone(), radii.clone());
    let in_disks = move |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let k = rng.gen_range(0..cs.len());
        let rho = rs[k] * rng.gen_range(0.0..1.0f64);
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        vec![cs[k][0] + rho * th.cos(), cs[k][1] + rho * th.sin()]
    };
    let near_join = move |x: &[f64], h: f64| {
        centers.iter().zip(&radii).any(|(c, r)| (((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt() - r / 3.0).abs() < 10.0 * h)
    };
    pass &= check("dense", &dense, &in_disks, &near_join);
    // Radial Hessian norm: the max-entry norm of the difference tensor
    // against the closed-form radial norm.
    let n = 3;
    let radial = RadialMap::from_spec(n, ProfileSpec::Power { c: 1.0, p: 1.5 }, Domain::unit_cube(n)).unwrap();
    let (mut lo_ratio, mut hi_ratio) = (f64::INFINITY, 0.0f64);
    let mut done = 0;
    while done < 1000 {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.9..0.9)).collect();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r < 0.05 {
            continue;
        }
        let fd = fd_hessian_norm(&radial, &x, &DiffConfig::default()).unwrap();
        let closed = radial.quantities(&x).unwrap().d2f_norm;
        let ratio = fd / closed;
        lo_ratio = lo_ratio.min(ratio);
        hi_ratio = hi_ratio.max(ratio);
        done += 1;
    }
    let nn = n as f64;
    pass &= lo_ratio >= 1.0 / nn && hi_ratio <= nn;
    parts.push(format!("radial |D2f| ratio in [{lo_ratio:.3}, {hi_ratio:.3}]"));
    Outcome { pass, detail: parts.join("; ") }
}

fn cantor_energy() -> Outcome {
    let p = RegimeParams::parse(2, "3", "1", "1").unwrap();
    let s = CantorSchedule::build(&p, 4).unwrap();
    let summary = series_summary(&s, 6).unwrap();
    let r = 2f64.powf(-1.0 / 3.0);
    let mut pass = summary.d2_exponent_exact.as_deref() == Some("-1/3")
        && summary.jac_exponent_exact.as_deref() == Some("-1/3")
        && (summary.d2_norm_ratio - r).abs() < 1e-12
        && (summary.jac_ratio - r).abs() < 1e-12;
    let mut ratio_err: f64 = 0.0;
    for (sums, ratio) in [
        (&summary.partial_sums_d2_norm, summary.d2_norm_ratio),
        (&summary.partial_sums_jac, summary.jac_ratio),
        (&summary.partial_sums_d2, summary.d2_integral_ratio),
    ] {
        pass &= sums.len() == 6 && sums.windows(2).all(|w| w[1] > w[0]);
        let inc: Vec<f64> = std::iter::once(sums[0]).chain(sums.windows(2).map(|w| w[1] - w[0])).collect();
        for w in inc.windows(2) {
            ratio_err = ratio_err.max((w[1] / w[0] - ratio).abs() / ratio);
        }
    }
    pass &= ratio_err < 1e-12;

    let report = cantor_series(&s, &EnergyParams::new(3.0, 1.0, 1e-3)).unwrap();
    let c_hat = report.series.as_ref().and_then(|x| x.fitted_d2_constant).unwrap();
    let band = |v: f64| (1.0 / 16.0..=16.0).contains(&v);
    let mut d2_band = Vec::new();
    let mut jac_band = Vec::new();
    for g in report.per_generation.iter().filter(|g| g.i <= 4) {
        let d2 = g.numeric_d2 / (c_hat * g.analytic_d2_term);
        let jac = g.numeric_jac / g.analytic_jac_term;
        pass &= band(d2) && band(jac);
        d2_band.push(format!("{d2:.3}"));
        jac_band.push(format!("{jac:.3}"));
    }
    pass &= report.per_generation.len() == 4;
    Outcome {
        pass,
        detail: format!(
            "exponents {:?}/{:?}, ratio error {ratio_err:.1e}, fitted D2 constant {c_hat:.3e}, D2/(C*analytic) [{}], J/analytic [{}]",
            summary.d2_exponent_exact,
            summary.jac_exponent_exact,
            d2_band.join(", "),
            jac_band.join(", ")
        ),
    }
}

fn folding_divergence() -> Outcome {
    let (q, a) = (2.0, 0.5);
    let lo = [-1.0, -1.0];
    let hi = [1.0, 1.0];
    let p = EnergyParams::new(q, a, 1e-3);
    let bad = FoldingMap::with_alpha(2, 2.0 - 1.0 / q - 0.05).unwrap();
    let good = FoldingMap::new(2, q, a, 1.9).unwrap();
    let rb = energy(&bad, &p, &lo, &hi).unwrap();
    let rg = energy(&good, &p, &lo, &hi).unwrap();
    let pass = !rb.converged && rg.converged && rg.d2_integral.is_finite();
    Outcome {
        pass,
        detail: format!(
            "alpha 1.45: converged={} d2={:.3e}; alpha 1.9: converged={} d2={:.4} jac={:.4}",
            rb.converged, rb.d2_integral, rg.converged, rg.d2_integral, rg.jac_neg_integral
        ),
    }
}

fn dimension_slopes() -> Outcome {
    let run = |d: &str, a: &str, k: usize, depth: u32| {
        let p = RegimeParams::parse(2, "3", a, d).unwrap();
        let s = CantorSchedule::build(&p, k).unwrap();
        let rule = EpsilonRule::for_schedule(&s, 2).unwrap();
        let map = CantorMap::new(s);
        near_critical_dimension(&map, &rule, depth, 3, None).unwrap().slope
    };
    let s1 = run("1", "1", 10, 10);
    let s15 = run("3/2", "1/2", 7, 8);
    let ok1 = s1.is_some_and(|v| (0.85..=1.15).contains(&v));
    let ok15 = s15.is_some_and(|v| (1.3..=1.7).contains(&v));
    Outcome { pass: ok1 && ok15, detail: format!("d=1 slope {s1:?}, d=1.5 slope {s15:?}") }
}

fn witnesses() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let fold = FoldingMap::midpoint(2, 2.0, 0.5).unwrap();
    let mut counts = Vec::new();
    while counts.len() < 20 {
        let yt: f64 = rng.gen_range(-0.8..0.8);
        let top = fold.fold_depth(&[yt]).abs().powf(fold.alpha());
        let y1 = rng.gen_range(0.05..0.95) * top;
        counts.push(fold.preimages(&[y1, yt], 4096).unwrap().count);
    }
    let fold_ok = counts.iter().all(|&c| c == 3);

    let ball = BallMap::new(3, 4.0, 1.0, 1.75).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let t = -1.0 + 2.0 * k as f64 / 99.0;
        let v = ball.value(&[0.0, 0.0, t]).unwrap();
        worst = worst.max(v.iter().map(|c| c * c).sum::<f64>().sqrt());
    }
    let ball_ok = worst <= 1e-12;

    let s = CantorSchedule::build(&RegimeParams::parse(2, "3", "1", "1").unwrap(), 4).unwrap();
    let inj = injectivity_scan(&CantorMap::new(s), &[-1.0, -1.0], &[1.0, 1.0], 512).unwrap();
    let cantor_ok = inj.verdict == InjectivityVerdict::InjectiveOnSample;
    Outcome {
        pass: fold_ok && ball_ok && cantor_ok,
        detail: format!(
            "folding preimage counts {:?}; ball segment image max norm {worst:.1e}; cantor k=4 {:?} ({} collisions)",
            counts, inj.verdict, inj.collision_count
        ),
    }
}

fn sign_structure() -> Outcome {
    let fold = FoldingMap::midpoint(2, 2.0, 0.5).unwrap();
    let sf = sign_constancy_scan(&fold, &[-1.0, -1.0], &[1.0, 1.0], 512, 0.0).unwrap();
    let s = CantorSchedule::build(&RegimeParams::parse(2, "3", "1", "1").unwrap(), 4).unwrap();
    let sc = sign_constancy_scan(&CantorMap::new(s), &[-1.0, -1.0], &[1.0, 1.0], 512, 0.0).unwrap();
    Outcome {
        pass: sf.pos_fraction > 0.0 && sf.neg_fraction > 0.0 && sc.neg_fraction == 0.0,
        detail: format!(
            "folding +{:.4} -{:.4}; cantor -{} (+{:.4})",
            sf.pos_fraction, sf.neg_fraction, sc.neg_fraction, sc.pos_fraction
        ),
    }
}

fn euler_lagrange() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut errs = Vec::new();
    for _ in 0..5 {
        let n = 2;
        // The step perturbs D²f by h·|D²φ|; keep that small against |D²f|.
        let eps: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.1)).collect();
        let freq: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(1.5..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect())
            .collect();
        let phase: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..6.28)).collect();
        let f = TrigMap::new(eps, freq, phase, Domain::unit_cube(n)).unwrap();
        let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.4..0.4)).collect();
        let amp: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.05..0.05)).collect();
        let phi = BumpTest::new(center, rng.gen_range(0.2..0.5), amp).unwrap();
        let mut p = EnergyParams::new(3.0, 1.0, 1e-6);
        p.psi = Psi::FrobeniusPower;
        errs.push(el_check(&f, &phi, &p, 1e-4).unwrap().relative_error);
    }
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    Outcome { pass: worst < 1e-3, detail: format!("worst relative error {worst:.2e} over 5 pairs") }
}

fn key_estimate() -> Outcome {
    let p = RegimeParams::new(2, 3.0, 0.5, 1.0).unwrap();
    let lin = LinearField { coeffs: vec![1.0, 0.0], offset: 0.0, domain: Domain::unit_cube(2) };
    let rl = key_estimate_check(&lin, &[vec![0.0, 0.0]], &p, 3.0, &[1, 2, 3, 4, 5]).unwrap();

    let (q, a) = (2.0, 0.5);
    let fold = FoldingMap::midpoint(2, q, a).unwrap();
    let pf = RegimeParams::new(2, q, a, 1.0).unwrap();
    let field = JacobianField { map: &fold };
    let rf = key_estimate_check(&field, &[vec![0.0, 0.3]], &pf, q, &[2, 3, 4, 5, 6]);
    let (fold_ok, fold_detail) = match &rf {
        Ok(r) => (
            r.max_ratio.is_finite() && r.max_ratio > 0.0 && r.variation < 10.0,
            format!("folding max ratio {:.3e}, variation {:.3}", r.max_ratio, r.variation),
        ),
        Err(e) => (false, format!("folding error: {e}")),
    };
    Outcome {
        pass: rl.variation <= 1.05 && fold_ok,
        detail: format!("linear variation {:.4}; {fold_detail}", rl.variation),
    }
}

fn dense_map() -> Outcome {
    let centers = vec![[0.5, 0.0], [-0.4, 0.3], [0.1, -0.6], [0.2, 0.55], [-0.5, -0.4]];
    let m = DenseMap::new(centers.clone(), None).unwrap();
    let jmax = centers.iter().map(|c| m.jacobian(c).unwrap().abs()).fold(0.0, f64::max);
    let bound = m.df_bound();
    let energies: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|r| factor_d2_energy(*r).unwrap()).collect();
    let decreasing = energies.windows(2).all(|w| w[1] < w[0]);
    Outcome {
        pass: jmax <= 1e-10 && bound <= 2.0 && decreasing,
        detail: format!("max |J| at centers {jmax:.1e}, |Df| bound {bound:.4}, D2 energies {energies:?}"),
    }
}

#[test]
fn acceptance_criteria() {
    let results = [
        report(1, "regime partition", Duration::from_secs(1), regime_partition),
        report(2, "derivative oracle", Duration::from_secs(30), derivative_oracle),
        report(3, "cantor energy series", Duration::from_secs(600), cantor_energy),
        report(4, "folding divergence", Duration::from_secs(300), folding_divergence),
        report(5, "near-critical dimension", Duration::from_secs(600), dimension_slopes),
        report(6, "non-injectivity witnesses", Duration::from_secs(300), witnesses),
        report(7, "jacobian sign structure", Duration::from_secs(300), sign_structure),
        report(8, "euler-lagrange residual", Duration::from_secs(120), euler_lagrange),
        report(9, "key estimate", Duration::from_secs(300), key_estimate),
        report(10, "dense critical map", Duration::from_secs(300), dense_map),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, p)| !**p).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
