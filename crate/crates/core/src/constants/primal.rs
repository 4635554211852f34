//! Primal constants: subtransversality and transversality ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{SetSpec, CERTIFY_TOL};
use crate::sampling::{random_in_ball, sample_rng};
use crate::scalar::Real;
use crate::vector::Vector;

use super::sampler::TripleSampler;
use super::{sweep, ConstantEstimate, ConstantKind, Diagnostics, RadiusSchedule, Scene};

const STR_STREAM: u64 = 0x7374_72;
const TR_STREAM: u64 = 0x7472;
const AP_MAX_ITER: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct IntersectionDistance<T> {
    pub value: T,
    /// Set when the value comes from alternating projections on a nonconvex
    /// pair: the limit is a point of `A ∩ B` but not necessarily the nearest.
    pub heuristic: bool,
}

/// `dist(x, A ∩ B)` for the scene, using the oracle when present.
pub fn intersection_distance<T: Real>(scene: &Scene<T>, x: &Vector<T>) -> Result<IntersectionDistance<T>> {
    match &scene.intersection {
        Some(i) => Ok(IntersectionDistance { value: i.distance(x)?, heuristic: false }),
        None => pair_intersection_distance(&scene.a, &scene.b, x),
    }
}

/// `dist(x, a ∩ b)` without an oracle: exact for polyhedral pairs, Dykstra
/// for convex pairs, alternating projections otherwise.
pub(crate) fn pair_intersection_distance<T: Real>(
    a: &SetSpec<T>,
    b: &SetSpec<T>,
    x: &Vector<T>,
) -> Result<IntersectionDistance<T>> {
    if a.is_convex() && b.is_convex() {
        let both = SetSpec::Intersection { sets: vec![a.clone(), b.clone()] };
        return Ok(IntersectionDistance { value: both.distance(x)?, heuristic: false });
    }
    let mut y = x.clone();
    let tol = T::of(CERTIFY_TOL);
    for _ in 0..AP_MAX_ITER {
        let next = a.project_one(&b.project_one(&y)?)?;
        let step = next.dist(&y);
        y = next;
        if step <= T::of(1e-15) * (T::one() + y.norm()) {
            break;
        }
    }
    if b.distance(&y)? <= tol {
        Ok(IntersectionDistance { value: x.dist(&y), heuristic: true })
    } else {
        Err(Error::IntersectionUnavailable(
            "alternating projections stalled away from the intersection".into(),
        ))
    }
}

/// `max{d_A, d_B} / d_{A∩B}` never exceeds 1; values within rounding of 1
/// are snapped to it.
fn ratio<T: Real>(num: T, den: T) -> T {
    let r = num / den;
    if r >= T::one() - T::of(1e-12) {
        T::one()
    } else {
        r
    }
}

fn outside_floor<T: Real>(x: &Vector<T>) -> T {
    T::of(1e-12) * (T::one() + x.norm())
}

pub fn estimate_str<T: Real>(scene: &Scene<T>, sched: &RadiusSchedule<T>) -> Result<ConstantEstimate<T>> {
    let sampler = TripleSampler::new(scene, sched.seed, STR_STREAM);
    let (per_radius, flagged) = sweep(sched, |_, radius, i| {
        let x = sampler.base_point(radius, i);
        let d = intersection_distance(scene, &x)?;
        if d.value <= outside_floor(&x) {
            return Ok(None);
        }
        let num = scene.a.distance(&x)?.max(scene.b.distance(&x)?);
        Ok(Some((ratio(num, d.value), d.heuristic)))
    })?;
    let mut diag = Diagnostics { flagged_samples: flagged, notes: Vec::new() };
    if flagged > 0 {
        diag.notes.push("intersection distances from alternating projections (nonconvex pair)".into());
    }
    Ok(ConstantEstimate::assemble(ConstantKind::Str, scene, per_radius, diag))
}

pub fn estimate_tr<T: Real>(scene: &Scene<T>, sched: &RadiusSchedule<T>) -> Result<ConstantEstimate<T>> {
    let sampler = TripleSampler::new(scene, sched.seed, TR_STREAM);
    let n = scene.dim();
    let (per_radius, flagged) = sweep(sched, |_, radius, i| {
        let x = sampler.base_point(radius, i);
        let mut rng = sample_rng(sched.seed, TR_STREAM, i);
        let x1: Vector<T> = random_in_ball::<T, _>(&mut rng, n).scaled(radius);
        let x2: Vector<T> = random_in_ball::<T, _>(&mut rng, n).scaled(radius);
        let a = scene.a.translated(&-&x1);
        let b = scene.b.translated(&-&x2);
        let d = match pair_intersection_distance(&a, &b, &x) {
            Ok(d) => d,
            Err(Error::EmptyIntersection | Error::IntersectionUnavailable(_)) => return Ok(Some((T::zero(), true))),
            Err(e) => return Err(e),
        };
        if d.value <= outside_floor(&x) {
            return Ok(None);
        }
        let num = a.distance(&x)?.max(b.distance(&x)?);
        Ok(Some((ratio(num, d.value), d.heuristic)))
    })?;
    let mut diag = Diagnostics { flagged_samples: flagged, notes: Vec::new() };
    if flagged > 0 {
        diag.notes.push(
            "translated pairs with empty or unavailable intersection counted as ratio 0, or AP distances used".into(),
        );
    }
    Ok(ConstantEstimate::assemble(ConstantKind::Tr, scene, per_radius, diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector<f64> {
        Vector::from_f64(c)
    }

    fn line(dir: &[f64]) -> SetSpec<f64> {
        SetSpec::affine(v(&[0.0, 0.0]), vec![v(dir)]).unwrap()
    }

    #[test]
    fn str_of_perpendicular_axes() {
        let s = Scene::new("axes", line(&[1.0, 0.0]), line(&[0.0, 1.0]), v(&[0.0, 0.0]), None).unwrap();
        let sched = RadiusSchedule::geometric(0.5, 0.5, 2, 400, 1).unwrap();
        let e = estimate_str(&s, &sched).unwrap();
        assert!((e.extrapolated - 0.5f64.sqrt()).abs() < 0.02, "{}", e.extrapolated);
        assert_eq!(e.diagnostics.flagged_samples, 0);
    }

    #[test]
    fn identical_half_planes_give_ratio_one() {
        let h = SetSpec::half_space(v(&[0.0, 1.0]), 0.0).unwrap();
        let s = Scene::new("same", h.clone(), h, v(&[0.0, 0.0]), None).unwrap();
        let sched = RadiusSchedule::geometric(0.5, 0.5, 2, 50, 1).unwrap();
        for e in [estimate_str(&s, &sched).unwrap(), estimate_tr(&s, &sched).unwrap()] {
            assert_eq!(e.extrapolated, 1.0);
            assert!(e.total_feasible() > 0);
        }
    }

    #[test]
    fn skew_translation_counts_as_zero() {
        let x = SetSpec::affine(v(&[0.0, 0.0, 0.0]), vec![v(&[1.0, 0.0, 0.0])]).unwrap();
        let y = SetSpec::affine(v(&[0.0, 0.0, 0.0]), vec![v(&[0.0, 1.0, 0.0])]).unwrap();
        let s = Scene::new("axes3", x, y, v(&[0.0, 0.0, 0.0]), None).unwrap();
        let sched = RadiusSchedule::geometric(0.5, 0.5, 2, 30, 1).unwrap();
        let e = estimate_tr(&s, &sched).unwrap();
        assert_eq!(e.extrapolated, 0.0);
        assert!(e.diagnostics.flagged_samples > 0);
    }

    #[test]
    fn nonconvex_fallback_is_flagged() {
        let c = SetSpec::sphere(v(&[0.0, 0.0]), 1.0).unwrap();
        let l = line(&[1.0, 0.0]);
        let d = pair_intersection_distance(&c, &l, &v(&[0.9, 0.1])).unwrap();
        assert!(d.heuristic);
        assert!((d.value - v(&[0.9, 0.1]).dist(&v(&[1.0, 0.0]))).abs() < 1e-9);
    }
}
