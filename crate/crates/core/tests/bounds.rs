mod common;

use common::*;
use poisson_disorder::bounds::*;
use poisson_disorder::model::{flow_signed, DiscountMode, ModelParams, Statistic3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn all_cases() -> Vec<(ModelParams, CaseTag)> {
    vec![
        (case_i(), CaseTag::CaseI),
        (case_iia(), CaseTag::CaseIIa),
        (case_iibi1(), CaseTag::CaseIIbi1),
        (case_iibi2(), CaseTag::CaseIIbi2),
        (case_iibii1(), CaseTag::CaseIIbii1),
        (case_iibii2(), CaseTag::CaseIIbii2),
        (case_iii(), CaseTag::CaseIII),
    ]
}

fn planar(x: f64, y: f64) -> Statistic3 {
    Statistic3 { phi_x: x, phi_p: y, phi_1: 0.5 * y }
}

/// Feasible planar point with `φ× ∈ [0, x_hi]` and `φ⁺ ∈ [2√φ×, y_hi]`.
fn random_planar<R: Rng>(rng: &mut R, x_hi: f64, y_hi: f64) -> (f64, f64) {
    loop {
        let x = rng.random_range(0.0..x_hi);
        let y = rng.random_range(0.0..y_hi);
        if y >= 2.0 * x.sqrt() {
            return (x, y);
        }
    }
}

#[test]
fn classification_of_reference_parameters() {
    for (p, tag) in all_cases() {
        assert_eq!(classify_case(&p), tag, "{p:?}");
    }
    let literal = case_iia().with_mode(DiscountMode::PaperLiteral);
    assert_eq!(classify_case(&literal), CaseTag::CaseIIbi2);
}

#[test]
fn tangent_curve_reaches_the_intersection() {
    for p in [case_iibi2(), case_iibii2(), case_iia().with_mode(DiscountMode::PaperLiteral)] {
        let curve = curve_c1(&p).unwrap();
        let end = flow_signed(curve.t_star, &Statistic3 { phi_x: curve.x_star, phi_p: 0.0, phi_1: 0.0 }, &p);
        assert!((end.phi_x - curve.x_i).abs() <= 1e-10 * curve.x_i.max(1.0));
        assert!((end.phi_p - curve.y_i).abs() <= 1e-10 * curve.y_i.max(1.0));
        assert!((curve.x_i + curve.y_i - p.kappa()).abs() < 1e-12);
        // The sum is stationary along the flow at I.
        let (l, a) = (p.lambda(), p.a());
        let slope = (l + a) * curve.y_i + 2.0 * a * curve.x_i + 2.0 * l;
        assert!(slope.abs() < 1e-10);
        assert_eq!(curve.y_i > 0.0, a * p.kappa() + l < 0.0);
        for (x, y) in curve.samples(400, &p) {
            assert!(x + y >= p.kappa() - 1e-9);
        }
    }
    assert!(curve_c1(&case_i()).is_err());
}

#[test]
fn certified_points_have_zero_deterministic_infimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (p, tag) in all_cases() {
        if tag == CaseTag::CaseIII {
            continue;
        }
        let cert = Certifier::new(&p);
        let b = continuation_bounding_box(&p);
        let mut certified = 0;
        for _ in 0..400 {
            let (x, y) = random_planar(&mut rng, 1.5 * b.x_max, 1.5 * b.y_max);
            let s = planar(x, y);
            let inf = deterministic_infimum(x, y, &p).unwrap();
            if cert.contains(&s) {
                certified += 1;
                assert!(inf.value >= -1e-12, "{tag}: ({x}, {y}) has {inf:?}");
            }
            if in_advantageous(&s, &p) {
                assert!(inf.value < 0.0);
            }
        }
        assert!(certified > 0, "{tag}");
    }
}

#[test]
fn d0_sign_decides_stopping_outside_the_advantageous_region() {
    let p = case_iia();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b = continuation_bounding_box(&p);
    let mut checked = [0usize; 2];
    for _ in 0..1000 {
        let (x, y) = random_planar(&mut rng, 2.0 * b.x_max, 2.0 * b.y_max);
        if x + y <= p.kappa() {
            continue;
        }
        let d0 = d0_functional(x, y, &p).unwrap();
        if d0.abs() < 1e-6 {
            continue;
        }
        let inf = deterministic_infimum(x, y, &p).unwrap();
        if d0 > 0.0 {
            assert!(inf.value >= -1e-12, "({x}, {y}): d0 = {d0}, {inf:?}");
            checked[0] += 1;
        } else {
            assert!(inf.value <= d0 + 1e-9, "({x}, {y}): d0 = {d0}, {inf:?}");
            checked[1] += 1;
        }
    }
    assert!(checked[0] > 0 && checked[1] > 0, "{checked:?}");
    assert!(d0_functional(0.0, 0.0, &case_i()).is_err());
}

#[test]
fn d0_is_affine() {
    let p = case_iia();
    let d = D0Coefficients::for_params(&p);
    let f = |x: f64, y: f64| d0_functional(x, y, &p).unwrap();
    assert_eq!(f(0.0, 0.0), d.k);
    assert!((f(1.0, 0.0) - f(0.0, 0.0) - d.c0).abs() < 1e-14);
    assert!((f(0.0, 1.0) - f(0.0, 0.0) - d.c1).abs() < 1e-14);
    assert!((f(0.3, 1.7) - (0.3 * d.c0 + 1.7 * d.c1 + d.k)).abs() < 1e-14);
}

#[test]
fn everything_outside_the_box_is_certified() {
    for (p, tag) in all_cases() {
        let b = continuation_bounding_box(&p);
        let cert = Certifier::new(&p);
        let n = 24;
        let mut shell = 0;
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..=n {
                    let s = Statistic3 {
                        phi_x: 3.0 * b.x_max * i as f64 / n as f64,
                        phi_p: 3.0 * b.y_max * j as f64 / n as f64,
                        phi_1: 3.0 * b.z_max * k as f64 / n as f64,
                    };
                    if !s.is_feasible() || b.contains(&s) {
                        continue;
                    }
                    shell += 1;
                    assert!(cert.contains(&s), "{tag}: {s:?} outside {b:?}");
                }
            }
        }
        assert!(shell > 0);
        assert!(b.sum_bound >= p.kappa());
    }
}

#[test]
fn deterministic_minimizer_sits_on_the_level() {
    let p = case_i();
    let inf = deterministic_infimum(0.0, 0.0, &p).unwrap();
    assert!(inf.value < 0.0 && inf.t_opt.is_finite());
    let q = flow_signed(inf.t_opt, &Statistic3::ORIGIN, &p);
    assert!((q.sum() - p.kappa()).abs() < 1e-9);
    assert!(deterministic_infimum(-1.0, 0.0, &p).is_err());
    assert!(deterministic_infimum(1.0, 1.0, &p).is_err());
}

#[test]
fn reports_match_the_case() {
    let r = region_report(&case_iibi2());
    assert_eq!(r.case, CaseTag::CaseIIbi2);
    assert!(r.intersection.is_some() && r.t_star.is_some() && r.d0.is_none());
    let r = region_report(&case_iia());
    assert!(r.d0.is_some() && r.intersection.is_none() && r.mean_reversion.is_some());
    let r = region_report(&case_i());
    assert!(r.mean_reversion.is_none() && r.d0.is_none());
    for (p, _) in all_cases() {
        for (x, y) in boundary_polyline(&p, 50) {
            assert!(y + 1e-9 >= 2.0 * x.sqrt());
            assert!(x + y >= p.kappa() - 1e-9);
        }
    }
}
