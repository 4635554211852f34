//! Dual constants: intrinsic transversality and its weak, relaxed and angle
//! forms. All of them share the configurations of [`TripleSampler`].

use std::f64::consts::FRAC_PI_2;

use crate::error::Result;
use crate::geometry::NormalFan;
use crate::sampling::{random_in_ball, sample_rng};
use crate::scalar::Real;
use crate::vector::Vector;

use super::sampler::{
    aligned_relaxed_pair, bisector_foot_raw, relaxed_t_interval, segment_min_norm, segment_min_norm_on, Triple,
    TripleSampler, TRIPLE_STREAM,
};
use super::{sweep, ConstantEstimate, ConstantKind, Diagnostics, RadiusSchedule, Scene};

const INNER_STREAM: u64 = 0x6974_725f_77;
const INNER_LEVELS: i32 = 6;
const INNER_CONFIGS: u64 = 4;
const TILT_STEPS: usize = 10;

/// The triple with `x` moved onto the bisector of `[a, b]`.
fn on_bisector<T: Real>(s: &TripleSampler<'_, T>, tr: Triple<T>, radius: T) -> Result<Option<Triple<T>>> {
    let x = bisector_foot_raw(&tr.a, &tr.b, &tr.x);
    s.finish(tr.a, tr.b, x, radius, tr.mode)
}

/// Unit vectors of the fan's cone within the alignment cap around `w`:
/// the best-aligned one, then tilts of it towards `-away`.
fn capped_units<T: Real>(fan: &NormalFan<T>, w: &Vector<T>, away: &Vector<T>, cap: T) -> Vec<Vector<T>> {
    let mut out = Vec::new();
    let Some(c) = fan.nearest(w).normalized() else { return out };
    if c.dot(w) <= cap {
        return out;
    }
    for j in 1..=TILT_STEPS {
        let g = T::of(j as f64 / TILT_STEPS as f64);
        if let Some(u) = fan.nearest(&c.add_scaled(-g, away)).normalized() {
            if u.dot(w) > cap {
                out.push(u);
            }
        }
    }
    out.push(c);
    out
}

/// Best `‖x1* + x2*‖` at one configuration of the intrinsic condition.
fn itr_value<T: Real>(tr: &Triple<T>, radius: T) -> Option<T> {
    let w1 = (&tr.x - &tr.a).normalized()?;
    let w2 = (&tr.x - &tr.b).normalized()?;
    let cap = T::one() - radius;
    let c1 = tr.fan_a.nearest(&w1).normalized()?;
    let c2 = tr.fan_b.nearest(&w2).normalized()?;
    let u1s = capped_units(&tr.fan_a, &w1, &c2, cap);
    let u2s = capped_units(&tr.fan_b, &w2, &c1, cap);
    let mut best: Option<T> = None;
    for u1 in &u1s {
        for u2 in &u2s {
            let (m, _) = segment_min_norm(u1, u2);
            best = Some(best.map_or(m, |b| b.min(m)));
        }
    }
    best
}

pub fn estimate_itr<T: Real>(scene: &Scene<T>, sched: &RadiusSchedule<T>) -> Result<ConstantEstimate<T>> {
    let sampler = TripleSampler::new(scene, sched.seed, TRIPLE_STREAM);
    let (per_radius, _) = sweep(sched, |_, radius, i| {
        let Some(tr) = sampler.draw(radius, i, None)? else { return Ok(None) };
        let r = tr.x.dist(&tr.a) / tr.x.dist(&tr.b);
        let tr = if (r - T::one()).abs() < radius {
            tr
        } else {
            match on_bisector(&sampler, tr, radius)? {
                Some(t) => t,
                None => return Ok(None),
            }
        };
        Ok(itr_value(&tr, radius).map(|v| (v, false)))
    })?;
    Ok(ConstantEstimate::assemble(ConstantKind::Itr, scene, per_radius, Diagnostics::default()))
}

pub fn estimate_itr_c<T: Real>(scene: &Scene<T>, sched: &RadiusSchedule<T>) -> Result<ConstantEstimate<T>> {
    let sampler = TripleSampler::new(scene, sched.seed, TRIPLE_STREAM);
    let (per_radius, _) = sweep(sched, |k, radius, i| {
        let Some(tr) = sampler.draw(radius, i, None)? else { return Ok(None) };
        let Some(tr) = on_bisector(&sampler, tr, radius)? else { return Ok(None) };
        let p = aligned_relaxed_pair(&tr.a, &tr.b, &tr.x, &tr.fan_a, &tr.fan_b, sched.slack(k));
        Ok(p.map(|p| (p.sum_norm(), false)))
    })?;
    Ok(ConstantEstimate::assemble(ConstantKind::ItrC, scene, per_radius, Diagnostics::default()))
}

/// Inner configuration of the weak condition at shrinkage `eps`: nearby base
/// points and equidistant anchors `x1'`, `x2'`, with exactly aligned normals
/// whose cone residuals stay below `slack`.
fn inner_value<T: Real>(scene: &Scene<T>, tr: &Triple<T>, eps: T, slack: T, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Option<T>> {
    let n = scene.dim();
    let ball = |rng: &mut rand_chacha::ChaCha8Rng| -> Vector<T> { random_in_ball::<T, _>(rng, n).scaled(eps) };
    let a2 = scene.a.project_one(&(&tr.a + &ball(rng)))?;
    let b2 = scene.b.project_one(&(&tr.b + &ball(rng)))?;
    let x1 = &tr.a + &ball(rng);
    let far = &tr.b + &ball(rng);
    let Some(dir) = (&tr.x - &far).normalized() else { return Ok(None) };
    let x2 = tr.x.add_scaled(-tr.x.dist(&x1), &dir);
    let (Some(u1), Some(u2)) = ((&tr.x - &x1).normalized(), (&tr.x - &x2).normalized()) else { return Ok(None) };
    let fa = scene.a.proximal_normals(&a2)?;
    let fb = scene.b.proximal_normals(&b2)?;
    Ok(relaxed_value(&u1, &u2, &fa, &fb, slack))
}

fn relaxed_value<T: Real>(u1: &Vector<T>, u2: &Vector<T>, fa: &NormalFan<T>, fb: &NormalFan<T>, slack: T) -> Option<T> {
    let (lo, hi) = relaxed_t_interval(fa.residual(u1), fb.residual(u2), slack)?;
    let (m, t) = segment_min_norm_on(u1, u2, lo, hi);
    (t > T::zero() && t < T::one()).then_some(m)
}

pub fn estimate_itr_w<T: Real>(scene: &Scene<T>, sched: &RadiusSchedule<T>) -> Result<ConstantEstimate<T>> {
    let sampler = TripleSampler::new(scene, sched.seed, TRIPLE_STREAM);
    let (per_radius, _) = sweep(sched, |k, rho, i| {
        let Some(tr) = sampler.draw(rho, i, None)? else { return Ok(None) };
        let Some(tr) = on_bisector(&sampler, tr, rho)? else { return Ok(None) };
        let (Some(u1), Some(u2)) = ((&tr.x - &tr.a).normalized(), (&tr.x - &tr.b).normalized()) else {
            return Ok(None);
        };
        let slack = sched.slack(k);
        let exact = relaxed_value(&u1, &u2, &tr.fan_a, &tr.fan_b, slack);
        // Inner shrinkage is relative to the configuration's own scale.
        let scale = rho.min(tr.x.dist(&tr.a));
        let mut best: Option<T> = None;
        for j in 1..=INNER_LEVELS {
            let eps = scale * T::of(0.5f64.powi(j));
            let mut rng = sample_rng(sched.seed ^ k as u64, INNER_STREAM, i * 64 + j as u64);
            let mut inner = exact;
            for _ in 0..INNER_CONFIGS {
                if let Some(v) = inner_value(scene, &tr, eps, slack, &mut rng)? {
                    inner = Some(inner.map_or(v, |m| m.min(v)));
                }
            }
            if let Some(v) = inner {
                best = Some(best.map_or(v, |b| b.max(v)));
            }
        }
        Ok(best.map(|v| (v, false)))
    })?;
    Ok(ConstantEstimate::assemble(ConstantKind::ItrW, scene, per_radius, Diagnostics::default()))
}

/// Angle between `v` and the cone, `π/2` when `v` is polar to it.
fn angle_to_cone<T: Real>(v: &Vector<T>, fan: &NormalFan<T>) -> T {
    let p = fan.nearest(v).norm();
    if p <= T::zero() {
        T::of(FRAC_PI_2)
    } else {
        p.min(T::one()).acos()
    }
}

fn negated<T: Real>(fan: &NormalFan<T>) -> NormalFan<T> {
    NormalFan {
        basepoint: fan.basepoint.clone(),
        generators: fan.generators.iter().map(|g| -g).collect(),
        exactness: fan.exactness,
    }
}

/// Score `sin(min over pairs of max{∠(a-b, N_B(b)), ∠(a-b, -N_A(a))})`: the
/// largest angle threshold that no sampled pair undercuts on both sides.
pub fn estimate_angle_itr<T: Real>(scene: &Scene<T>, sched: &RadiusSchedule<T>) -> Result<ConstantEstimate<T>> {
    let sampler = TripleSampler::new(scene, sched.seed, TRIPLE_STREAM);
    let (per_radius, _) = sweep(sched, |_, radius, i| {
        let Some(tr) = sampler.draw(radius, i, None)? else { return Ok(None) };
        let Some(v) = (&tr.a - &tr.b).normalized() else { return Ok(None) };
        let ab = angle_to_cone(&v, &tr.fan_b);
        let aa = angle_to_cone(&v, &negated(&tr.fan_a));
        Ok(Some((ab.max(aa).sin(), false)))
    })?;
    Ok(ConstantEstimate::assemble(ConstantKind::AngleItr, scene, per_radius, Diagnostics::default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RegionShape, SetSpec};

    fn v(c: &[f64]) -> Vector<f64> {
        Vector::from_f64(c)
    }

    fn axes() -> Scene<f64> {
        let x = SetSpec::affine(v(&[0.0, 0.0]), vec![v(&[1.0, 0.0])]).unwrap();
        let y = SetSpec::affine(v(&[0.0, 0.0]), vec![v(&[0.0, 1.0])]).unwrap();
        Scene::new("axes", x, y, v(&[0.0, 0.0]), None).unwrap()
    }

    fn sched() -> RadiusSchedule<f64> {
        RadiusSchedule::geometric(0.5, 0.5, 3, 300, 11).unwrap()
    }

    #[test]
    fn axes_give_inverse_sqrt2() {
        let s = axes();
        let target = 0.5f64.sqrt();
        for e in [
            estimate_itr(&s, &sched()).unwrap(),
            estimate_itr_c(&s, &sched()).unwrap(),
            estimate_itr_w(&s, &sched()).unwrap(),
        ] {
            assert!((e.extrapolated - target).abs() < 0.03, "{:?} {}", e.kind, e.extrapolated);
            assert!(!e.empty_feasible);
        }
        let a = estimate_angle_itr(&s, &sched()).unwrap();
        assert!(a.extrapolated > 0.5);
    }

    #[test]
    fn identical_sets_are_empty_feasible() {
        let h = SetSpec::half_space(v(&[0.0, 1.0]), 0.0).unwrap();
        let s = Scene::new("same", h.clone(), h, v(&[0.0, 0.0]), None).unwrap();
        for e in [
            estimate_itr(&s, &sched()).unwrap(),
            estimate_itr_c(&s, &sched()).unwrap(),
            estimate_itr_w(&s, &sched()).unwrap(),
            estimate_angle_itr(&s, &sched()).unwrap(),
        ] {
            assert!(e.empty_feasible);
            assert_eq!(e.extrapolated, 1.0);
        }
    }

    #[test]
    fn tangential_scene_decays() {
        let a = SetSpec::region(RegionShape::ParabolaEpigraph, v(&[0.0, 0.0]), 1.0).unwrap();
        let b = SetSpec::half_space(v(&[0.0, 1.0]), 0.0).unwrap();
        let s = Scene::new("tangent", a, b, v(&[0.0, 0.0]), None).unwrap();
        let e = estimate_itr_c(&s, &RadiusSchedule::geometric(0.25, 0.5, 4, 200, 3).unwrap()).unwrap();
        let vals = e.values();
        assert!(vals[3] < vals[0] && vals[3] < 0.1, "{vals:?}");
    }
}
