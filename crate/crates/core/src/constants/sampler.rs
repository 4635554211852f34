//! Generation of `(a, b, x)` configurations near the reference point.
//!
//! Three generators are interleaved by sample index:
//! - a normal ray from `A`: `a = P_A(y)`, a proximal normal `n` at `a`, and
//!   the point `x = a + d n` equidistant from `a` and `B`, with `b = P_B(x)`;
//! - the same construction started from `B`;
//! - `x` first, with `a = P_A(x)` and `b = P_B(x)`.
//!
//! The quasi-random base points are shared across radii (scaled by the
//! radius), so per-radius sample sets are scaled copies of each other.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{NormalFan, SetSpec};
use crate::sampling::{ball_coords, ball_point_from_unit, derive_seed, random_in_ball, sample_rng, Halton};
use crate::scalar::Real;
use crate::vector::Vector;

use super::{NormalPairSample, RadiusSchedule, Scene};

pub(crate) const TRIPLE_STREAM: u64 = 0x7472_6970;
const RAY_GRID: usize = 32;
const BISECTIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    NormalRayFromA,
    NormalRayFromB,
    PointFirst,
}

#[derive(Debug, Clone)]
pub struct Triple<T> {
    pub a: Vector<T>,
    pub b: Vector<T>,
    pub x: Vector<T>,
    pub fan_a: NormalFan<T>,
    pub fan_b: NormalFan<T>,
    pub mode: SamplerMode,
}

pub(crate) struct TripleSampler<'s, T> {
    scene: &'s Scene<T>,
    halton: Halton,
    seed: u64,
    stream: u64,
}

impl<'s, T: Real> TripleSampler<'s, T> {
    pub fn new(scene: &'s Scene<T>, seed: u64, stream: u64) -> Self {
        let halton = Halton::new(ball_coords(scene.dim()), derive_seed(seed, stream));
        TripleSampler { scene, halton, seed, stream }
    }

    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        sample_rng(self.seed, self.stream, index)
    }

    /// Base point `index` of the ball `B_radius(xbar)`.
    pub fn base_point(&self, radius: T, index: u64) -> Vector<T> {
        let n = self.scene.dim();
        self.scene
            .xbar
            .add_scaled(radius, &ball_point_from_unit::<T>(&self.halton.point(index), n))
    }

    /// Draws configuration `index` at `radius`. `perturb` (relative to the
    /// radius) moves `a` and `b` along the set before the normals are taken.
    pub fn draw(&self, radius: T, index: u64, perturb: Option<T>) -> Result<Option<Triple<T>>> {
        let mut rng = self.rng(index);
        // Each mode walks the whole Halton sequence; indexing it with `index`
        // itself would tie the mode to the base-3 coordinate.
        let y = self.base_point(radius, index / 3);
        let mode = match index % 3 {
            0 => SamplerMode::NormalRayFromA,
            1 => SamplerMode::NormalRayFromB,
            _ => SamplerMode::PointFirst,
        };
        let sc = self.scene;
        let (a, b, x) = match mode {
            SamplerMode::NormalRayFromA | SamplerMode::NormalRayFromB => {
                let (s, other) = if mode == SamplerMode::NormalRayFromA { (&sc.a, &sc.b) } else { (&sc.b, &sc.a) };
                let mut p = pick(s.project(&y)?, &mut rng);
                if let Some(eta) = perturb {
                    p = perturbed(s, &p, eta * radius, &mut rng)?;
                }
                if p.dist(&sc.xbar) > radius || other.distance(&p)? <= T::of(super::EXCLUSION_REL) * radius {
                    return Ok(None);
                }
                let fan = s.proximal_normals(&p)?;
                let Some(n) = random_fan_direction(&fan, &mut rng) else { return Ok(None) };
                let Some(d) = equidistant_along_ray(&p, &n, other, T::of(2.0) * radius)? else { return Ok(None) };
                let x = p.add_scaled(d, &n);
                let q = pick(other.project(&x)?, &mut rng);
                if mode == SamplerMode::NormalRayFromA {
                    (p, q, x)
                } else {
                    (q, p, x)
                }
            }
            SamplerMode::PointFirst => {
                let mut a = pick(sc.a.project(&y)?, &mut rng);
                let mut b = pick(sc.b.project(&y)?, &mut rng);
                if let Some(eta) = perturb {
                    a = perturbed(&sc.a, &a, eta * radius, &mut rng)?;
                    b = perturbed(&sc.b, &b, eta * radius, &mut rng)?;
                }
                (a, b, y)
            }
        };
        self.finish(a, b, x, radius, mode)
    }

    /// Checks the admissibility constraints and attaches the normal fans.
    pub fn finish(&self, a: Vector<T>, b: Vector<T>, x: Vector<T>, radius: T, mode: SamplerMode) -> Result<Option<Triple<T>>> {
        let sc = self.scene;
        let slack = radius * (T::one() + T::of(1e-12));
        if a.dist(&sc.xbar) > slack || b.dist(&sc.xbar) > slack || x.dist(&sc.xbar) > slack {
            return Ok(None);
        }
        // Relative to the radius so that |x - a| keeps ~6 significant digits.
        let floor = T::of(1e-10) * radius;
        if x.dist(&a) <= floor || x.dist(&b) <= floor {
            return Ok(None);
        }
        if !sc.in_a_only(&a, radius)? || !sc.in_b_only(&b, radius)? {
            return Ok(None);
        }
        let fan_a = sc.a.proximal_normals(&a)?;
        let fan_b = sc.b.proximal_normals(&b)?;
        Ok(Some(Triple { a, b, x, fan_a, fan_b, mode }))
    }
}

fn pick<T: Real>(mut pts: Vec<Vector<T>>, rng: &mut ChaCha8Rng) -> Vector<T> {
    let i = if pts.len() > 1 { rng.gen_range(0..pts.len()) } else { 0 };
    pts.swap_remove(i)
}

fn perturbed<T: Real>(s: &SetSpec<T>, p: &Vector<T>, scale: T, rng: &mut ChaCha8Rng) -> Result<Vector<T>> {
    let w: Vector<T> = random_in_ball(rng, p.dim());
    Ok(pick(s.project(&p.add_scaled(scale, &w))?, rng))
}

/// A unit vector of the fan's cone: a single generator or a random conic
/// combination of them.
pub(crate) fn random_fan_direction<T: Real>(fan: &NormalFan<T>, rng: &mut ChaCha8Rng) -> Option<Vector<T>> {
    let g = &fan.generators;
    match g.len() {
        0 => None,
        1 => Some(g[0].clone()),
        k => {
            if rng.gen_bool(0.5) {
                return Some(g[rng.gen_range(0..k)].clone());
            }
            let mut v = Vector::zeros(g[0].dim());
            for gi in g {
                v.axpy(T::of(rng.gen::<f64>()), gi);
            }
            v.normalized()
        }
    }
}

/// Smallest `d in (0, max_d]` with `dist(p + d n, other) = d`, located on a
/// grid and refined by bisection. `d -> dist(p + d n, other) - d` is
/// nonincreasing, so the root is unique up to flat stretches.
pub(crate) fn equidistant_along_ray<T: Real>(p: &Vector<T>, n: &Vector<T>, other: &SetSpec<T>, max_d: T) -> Result<Option<T>> {
    let f = |d: T| -> Result<T> { Ok(other.distance(&p.add_scaled(d, n))? - d) };
    if f(T::zero())? <= T::zero() {
        return Ok(None);
    }
    let mut lo = T::zero();
    let mut hi = None;
    for j in 1..=RAY_GRID {
        let d = max_d * T::of(j as f64 / RAY_GRID as f64);
        if f(d)? <= T::zero() {
            hi = Some(d);
            break;
        }
        lo = d;
    }
    let Some(mut hi) = hi else { return Ok(None) };
    for _ in 0..BISECTIONS {
        let mid = (lo + hi) * T::of(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d = (lo + hi) * T::of(0.5);
    Ok(if d > T::zero() { Some(d) } else { None })
}

/// `min over t in [0,1] of |t u1 + (1-t) u2|`, i.e. the distance from the
/// origin to the segment `[u2, u1]`, with the minimizing `t`.
pub fn segment_min_norm<T: Real>(u1: &Vector<T>, u2: &Vector<T>) -> (T, T) {
    let d = u1 - u2;
    let dd = d.norm_sq();
    if dd == T::zero() {
        return (u2.norm(), T::of(0.5));
    }
    let t = (-u2.dot(&d) / dd).clamp_to(T::zero(), T::one());
    (u2.add_scaled(t, &d).norm(), t)
}

/// `min over t in [lo, hi] of |t u1 + (1-t) u2|` for a subinterval of `[0,1]`.
pub(crate) fn segment_min_norm_on<T: Real>(u1: &Vector<T>, u2: &Vector<T>, lo: T, hi: T) -> (T, T) {
    let d = u1 - u2;
    let dd = d.norm_sq();
    let t = if dd == T::zero() {
        (lo + hi) * T::of(0.5)
    } else {
        (-u2.dot(&d) / dd).clamp_to(lo, hi)
    };
    (u2.add_scaled(t, &d).norm(), t)
}

/// Feasible `t`-interval for exactly aligned normals `t u1`, `(1-t) u2` whose
/// distances to the cones must stay below `slack`, given unit residuals
/// `r1`, `r2`. Strict inequalities are honored up to a relative 1e-12.
pub(crate) fn relaxed_t_interval<T: Real>(r1: T, r2: T, slack: T) -> Option<(T, T)> {
    let margin = T::one() - T::of(1e-12);
    let hi = if r1 > T::zero() { (slack / r1 * margin).min(T::one()) } else { T::one() };
    let lo = if r2 > T::zero() { (T::one() - slack / r2 * margin).max(T::zero()) } else { T::zero() };
    if lo > hi {
        None
    } else {
        Some((lo, hi))
    }
}

/// Exactly aligned, relaxed-cone normal pair at `(a, b, x)`: `x1* = t (x-a)/|x-a|`,
/// `x2* = (1-t) (x-b)/|x-b|` with the `t` minimizing `|x1* + x2*|` among those
/// keeping both cone residuals below `slack`.
pub(crate) fn aligned_relaxed_pair<T: Real>(
    a: &Vector<T>,
    b: &Vector<T>,
    x: &Vector<T>,
    fan_a: &NormalFan<T>,
    fan_b: &NormalFan<T>,
    slack: T,
) -> Option<NormalPairSample<T>> {
    let u1 = (x - a).normalized()?;
    let u2 = (x - b).normalized()?;
    let r1 = fan_a.residual(&u1);
    let r2 = fan_b.residual(&u2);
    let (lo, hi) = relaxed_t_interval(r1, r2, slack)?;
    let (_, t) = segment_min_norm_on(&u1, &u2, lo, hi);
    if t <= T::zero() || t >= T::one() {
        return None;
    }
    let x1s = u1.scaled(t);
    let x2s = u2.scaled(T::one() - t);
    Some(NormalPairSample::build(a, b, x, x1s, x2s, r1 * t, r2 * (T::one() - t)))
}

/// Foot of `x` on the perpendicular bisector of `[a, b]`, without checks.
pub(crate) fn bisector_foot_raw<T: Real>(a: &Vector<T>, b: &Vector<T>, x: &Vector<T>) -> Vector<T> {
    let ba = b - a;
    let m = (a + b).scaled(T::of(0.5));
    let c = ba.dot(&(x - &m)) / ba.norm_sq();
    x.add_scaled(-c, &ba)
}

/// Admissible exactly aligned pairs of the relaxed-cone kind at radius index
/// `k` of the schedule, one per feasible sample.
pub fn sample_normal_pairs<T: Real>(scene: &Scene<T>, sched: &RadiusSchedule<T>, k: usize) -> Result<Vec<NormalPairSample<T>>> {
    let sampler = TripleSampler::new(scene, sched.seed, TRIPLE_STREAM);
    let radius = sched.radii[k];
    let slack = sched.slack(k);
    let mut out = Vec::new();
    for i in 0..sched.samples_per_radius as u64 {
        if let Some(tr) = sampler.draw(radius, i, None)? {
            let x = bisector_foot_raw(&tr.a, &tr.b, &tr.x);
            if let Some(tr) = sampler.finish(tr.a, tr.b, x, radius, tr.mode)? {
                if let Some(p) = aligned_relaxed_pair(&tr.a, &tr.b, &tr.x, &tr.fan_a, &tr.fan_b, slack) {
                    out.push(p);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn v(c: &[f64]) -> Vector<f64> {
        Vector::from_f64(c)
    }

    #[test]
    fn segment_min_matches_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let u1: Vector<f64> = crate::sampling::random_unit(&mut rng, 3);
            let u2: Vector<f64> = crate::sampling::random_unit(&mut rng, 3);
            let (m, _) = segment_min_norm(&u1, &u2);
            // Grid minimum followed by a golden-section polish.
            let f = |t: f64| u2.add_scaled(t, &(&u1 - &u2)).norm();
            let mut best = (0..=1000).map(|i| i as f64 / 1000.0).min_by(|a, b| f(*a).partial_cmp(&f(*b)).unwrap()).unwrap();
            let (mut lo, mut hi) = ((best - 1e-3).max(0.0), (best + 1e-3).min(1.0));
            for _ in 0..200 {
                let m1 = lo + (hi - lo) * 0.382;
                let m2 = lo + (hi - lo) * 0.618;
                if f(m1) < f(m2) {
                    hi = m2
                } else {
                    lo = m1
                }
            }
            best = 0.5 * (lo + hi);
            assert!((m - f(best)).abs() < 1e-9);
        }
    }

    #[test]
    fn orthogonal_units_give_inverse_sqrt2() {
        let (m, t) = segment_min_norm(&v(&[1.0, 0.0]), &v(&[0.0, 1.0]));
        assert!((m - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((t - 0.5).abs() < 1e-15);
    }

    #[test]
    fn equidistant_ray_root() {
        let b = SetSpec::affine(v(&[0.0, 0.0]), vec![v(&[0.0, 1.0])]).unwrap();
        // From p = (1, 0) along (-1, 0): dist((1-d, 0), y-axis) = 1 - d = d.
        let d = equidistant_along_ray(&v(&[1.0, 0.0]), &v(&[-1.0, 0.0]), &b, 2.0).unwrap().unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn relaxed_interval_bounds() {
        assert_eq!(relaxed_t_interval(0.0f64, 0.0, 0.1), Some((0.0, 1.0)));
        let (lo, hi) = relaxed_t_interval(0.5f64, 0.0, 0.1).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 0.2).abs() < 1e-9 && hi < 0.2);
        assert!(relaxed_t_interval(0.5f64, 0.5, 0.1).is_none());
    }
}
