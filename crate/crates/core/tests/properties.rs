use proptest::prelude::*;

use translab::altproj::run_ap_sets;
use translab::cones::{cone_min_sum_norm, ConeKind, ConeSample, SlicePair};
use translab::constants::{estimate, ConstantKind};
use translab::constructions::{bisector_foot, rescale_normals};
use translab::{corpus, RadiusSchedule, SetSpec, Vector};

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bisector_foot_is_equidistant_and_orthogonal(a in vec3(), b in vec3(), x in vec3()) {
        let (a, b, x) = (Vector::new(a), Vector::new(b), Vector::new(x));
        prop_assume!(a.dist(&b) > 1e-6);
        let xp = bisector_foot(&a, &b, &x).unwrap();
        let m = (&a + &b).scaled(0.5);
        let scale = 1f64.max(a.dist(&b)).max(x.dist(&m));
        prop_assert!((xp.dist(&a) - xp.dist(&b)).abs() / scale < 1e-10);
        prop_assert!((&x - &xp).dot(&(&xp - &m)).abs() / (scale * scale) < 1e-10);
    }

    #[test]
    fn rescaled_normals_keep_norms_and_align(a in vec3(), b in vec3(), xp in vec3(), u in vec3(), w in vec3(), t in 0.01..0.99f64) {
        let (a, b, xp) = (Vector::new(a), Vector::new(b), Vector::new(xp));
        prop_assume!(xp.dist(&a) > 1e-6 && xp.dist(&b) > 1e-6);
        let (Some(u), Some(w)) = (Vector::new(u).normalized(), Vector::new(w).normalized()) else { return Ok(()) };
        let (x1, x2) = (u.scaled(t), w.scaled(1.0 - t));
        let (p1, p2) = rescale_normals(&a, &b, &xp, &x1, &x2).unwrap();
        prop_assert!((p1.norm() - x1.norm()).abs() < 1e-12);
        prop_assert!((p2.norm() - x2.norm()).abs() < 1e-12);
        prop_assert!((p1.norm() + p2.norm() - 1.0).abs() < 1e-12);
        prop_assert!((p1.cosine(&(&xp - &a)).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((p2.cosine(&(&xp - &b)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convex_ap_residuals_do_not_increase(n1 in vec3(), n2 in vec3(), x0 in vec3()) {
        let (Some(n1), Some(n2)) = (Vector::new(n1).normalized(), Vector::new(n2).normalized()) else { return Ok(()) };
        let a = SetSpec::half_space(n1, 0.0).unwrap();
        let b = SetSpec::ball(n2, 1.5).unwrap();
        let t = run_ap_sets(&a, &b, &Vector::new(x0), 50, 1e-12).unwrap();
        for w in t.residuals.windows(2).skip(1) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn min_sum_norm_stays_in_unit_interval(pairs in prop::collection::vec((vec3(), vec3(), 0.0..1.0f64), 0..8)) {
        let mut s = ConeSample { basepoint: Vector::zeros(3), kind: ConeKind::Relative, pairs: Vec::new(), sequences: Vec::new() };
        for (u, w, t) in pairs {
            let (Some(u), Some(w)) = (Vector::new(u).normalized(), Vector::new(w).normalized()) else { continue };
            s.pairs.push(SlicePair { x1s: u.scaled(t), x2s: w.scaled(1.0 - t), in_c: false, provenance: 0 });
        }
        let m = cone_min_sum_norm(&s);
        prop_assert!((0.0..=1.0).contains(&m));
    }
}

#[test]
fn scaling_a_scene_keeps_its_constants() {
    let s = corpus::scene::<f64>("lines_pi_3").unwrap();
    let sched = RadiusSchedule::geometric(0.5, 0.5, 3, 300, 5).unwrap();
    for k in [ConstantKind::Itr, ConstantKind::Str] {
        let e1 = estimate(k, &s, &sched).unwrap().extrapolated;
        let e2 = estimate(k, &s.scaled(4.0), &sched.scaled(4.0)).unwrap().extrapolated;
        assert!((e1 - e2).abs() < 1e-6, "{k}: {e1} vs {e2}");
    }
}

#[test]
fn single_precision_estimates_agree() {
    let s = corpus::scene::<f32>("perpendicular_axes").unwrap();
    let sched = translab::constants::RadiusSchedule::<f32>::geometric(0.5, 0.5, 3, 300, 5).unwrap();
    let e = estimate(ConstantKind::ItrC, &s, &sched).unwrap();
    assert!((e.extrapolated - std::f32::consts::FRAC_1_SQRT_2).abs() < 0.03);
}

#[test]
fn orthogonal_pairs_on_a_grid_have_min_one_over_sqrt2() {
    let u = Vector::from_f64(&[1.0, 0.0]);
    let w = Vector::from_f64(&[0.0, 1.0]);
    let pairs = (1..20)
        .map(|j| {
            let t = j as f64 / 20.0;
            SlicePair { x1s: u.scaled(t), x2s: w.scaled(1.0 - t), in_c: true, provenance: 0 }
        })
        .collect();
    let s = ConeSample { basepoint: Vector::zeros(2), kind: ConeKind::Restricted, pairs, sequences: Vec::new() };
    assert!((cone_min_sum_norm(&s) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
}
