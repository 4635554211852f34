//! Primal characterization through distances to the diagonal of the
//! max-norm product space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dykstra, SetSpec};
use crate::scalar::Real;
use crate::vector::Vector;

use super::sampler::{bisector_foot_raw, TripleSampler, TRIPLE_STREAM};
use super::{ConstantEstimate, ConstantKind, Diagnostics, RadiusSchedule, RadiusValue, Scene};

/// Number of points of the `α` grid on `[0, 1]`.
pub const ALPHA_GRID: usize = 64;
/// `ρ = δ 2^-j` for `j = 1..=RHO_LEVELS`.
pub const RHO_LEVELS: i32 = 20;
const MM_ITERS: usize = 100;
const TRUNC_AP_ITERS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ProductDistance<T> {
    /// `+∞` when a truncated set is empty.
    pub value: T,
    pub point: Option<Vector<T>>,
    pub empty_truncation: bool,
    /// Set when a truncated projection of a nonconvex set was approximated.
    pub heuristic: bool,
}

impl<T: Real> ProductDistance<T> {
    fn empty() -> Self {
        ProductDistance { value: T::infinity(), point: None, empty_truncation: true, heuristic: false }
    }
}

/// A nearest point of `set ∩ B̄_λ(center)` to `y`, with a flag for the
/// approximate nonconvex case, or `None` when the truncation is empty.
pub fn truncated_projection<T: Real>(
    set: &SetSpec<T>,
    center: &Vector<T>,
    lambda: T,
    y: &Vector<T>,
) -> Result<Option<(Vector<T>, bool)>> {
    if set.distance(center)? > lambda {
        return Ok(None);
    }
    let slack = lambda * (T::one() + T::of(1e-12));
    let ps = set.project(y)?;
    if let Some(p) = ps.iter().find(|p| p.dist(center) <= slack) {
        return Ok(Some((p.clone(), false)));
    }
    if let SetSpec::Affine { .. } = set {
        // A ball cut by an affine set is a ball of the affine set.
        let c = set.project_one(center)?;
        let dc = c.dist(center);
        let r = (lambda * lambda - dc * dc).max(T::zero()).sqrt();
        let p = &ps[0];
        let d = p - &c;
        let n = d.norm();
        return Ok(Some((if n <= r { p.clone() } else { c.add_scaled(r / n, &d) }, false)));
    }
    let ball = SetSpec::Ball { center: center.clone(), radius: lambda };
    if set.is_convex() {
        return match dykstra(&[set, &ball], y) {
            Ok(p) => Ok(Some((p, false))),
            Err(Error::EmptyIntersection) => Ok(None),
            Err(e) => Err(e),
        };
    }
    let mut z = ps[0].clone();
    for _ in 0..TRUNC_AP_ITERS {
        let next = set.project_one(&ball.project_one(&z)?)?;
        let step = next.dist(&z);
        z = next;
        if step <= T::of(1e-15) * (T::one() + z.norm()) {
            break;
        }
    }
    Ok((z.dist(center) <= slack).then_some((z, true)))
}

/// `argmin over y ∈ B̄_ρ(x) of max{‖y - p‖, ‖y - q‖}`, by enumeration of the
/// optimality cases: the midpoint, a single active term on the sphere, or
/// both terms equal on the sphere.
fn min_max_in_ball<T: Real>(x: &Vector<T>, rho: T, p: &Vector<T>, q: &Vector<T>) -> Vector<T> {
    let f = |y: &Vector<T>| y.dist(p).max(y.dist(q));
    let to_ball = |y: &Vector<T>| {
        let d = y.dist(x);
        if d <= rho {
            y.clone()
        } else {
            x.add_scaled(rho / d, &(y - x))
        }
    };
    let m = (p + q).scaled(T::of(0.5));
    if m.dist(x) <= rho {
        return m;
    }
    let mut best = to_ball(p);
    let mut fb = f(&best);
    let mut consider = |y: Vector<T>| {
        let fy = f(&y);
        if fy < fb {
            fb = fy;
            best = y;
        }
    };
    consider(to_ball(q));
    let e = q - p;
    let ee = e.norm_sq();
    if ee > T::zero() {
        // Bisector hyperplane {<e, y> = <e, m>} cut by the ball is a disk.
        let off = (e.dot(x) - e.dot(&m)) / ee;
        let h = x.add_scaled(-off, &e);
        let r2 = rho * rho - off * off * ee;
        if r2 >= T::zero() {
            let r = r2.sqrt();
            let d = &m - &h;
            let n = d.norm();
            consider(if n <= r { m.clone() } else { h.add_scaled(r / n, &d) });
        }
    }
    best
}

/// `inf over x' ∈ B̄_ρ(x) of max{dist(x', A ∩ B̄_λ(a)), dist(x', B ∩ B̄_λ(b))}`
/// by majorize-minimize from a few starts: with the nearest points fixed,
/// the max of the two point distances is minimized exactly over the ball.
pub fn product_diag_distance<T: Real>(
    a_set: &SetSpec<T>,
    a: &Vector<T>,
    b_set: &SetSpec<T>,
    b: &Vector<T>,
    lambda: T,
    x: &Vector<T>,
    rho: T,
) -> Result<ProductDistance<T>> {
    if !(rho > T::zero() && lambda > T::zero()) {
        return Err(Error::Precondition("product distance needs rho > 0 and lambda > 0".into()));
    }
    let eval = |y: &Vector<T>| -> Result<Option<(T, Vector<T>, Vector<T>, bool)>> {
        let (Some((pa, ha)), Some((pb, hb))) =
            (truncated_projection(a_set, a, lambda, y)?, truncated_projection(b_set, b, lambda, y)?)
        else {
            return Ok(None);
        };
        Ok(Some((y.dist(&pa).max(y.dist(&pb)), pa, pb, ha || hb)))
    };
    let Some((f0, pa0, pb0, h0)) = eval(x)? else { return Ok(ProductDistance::empty()) };
    let mut starts = vec![x.clone()];
    if let (Some(ua), Some(ub)) = ((x - &pa0).normalized(), (x - &pb0).normalized()) {
        if let Some(dir) = (&ua + &ub).normalized() {
            starts.push(x.add_scaled(-rho, &dir));
        }
    }
    let mut best = ProductDistance { value: f0, point: Some(x.clone()), empty_truncation: false, heuristic: h0 };
    let tol = T::of(1e-15) * (T::one() + x.norm());
    for s in starts {
        let Some((mut fy, mut pa, mut pb, mut heur)) = eval(&s)? else { continue };
        let mut y = s;
        for _ in 0..MM_ITERS {
            let next = min_max_in_ball(x, rho, &pa, &pb);
            let Some((fn_, na, nb, h)) = eval(&next)? else { break };
            let gain = fy - fn_;
            if fn_ <= fy {
                y = next;
                fy = fn_;
                pa = na;
                pb = nb;
                heur |= h;
            }
            if !(gain > tol) {
                break;
            }
        }
        if fy < best.value {
            best = ProductDistance { value: fy, point: Some(y), empty_truncation: false, heuristic: heur };
        }
    }
    Ok(best)
}

fn alpha(i: usize) -> f64 {
    i as f64 / (ALPHA_GRID - 1) as f64
}

/// Bit `i` set when grid value `α_i` admits some `ρ`.
fn feasible_alphas<T: Real>(scene: &Scene<T>, a: &Vector<T>, b: &Vector<T>, x: &Vector<T>, delta: T) -> Result<(u64, bool)> {
    let full: u64 = u64::MAX;
    let r = x.dist(a);
    let inv_sqrt_eps = T::one() / delta.sqrt();
    let mut mask = 0u64;
    let mut heur = false;
    let d_at = |lambda: T, rho: T| product_diag_distance(&scene.a, a, &scene.b, b, lambda, x, rho);
    for j in 1..=RHO_LEVELS {
        let rho = delta * T::of(0.5f64.powi(j));
        let at_min = d_at(rho * inv_sqrt_eps, rho)?;
        let at_max = d_at((T::one() + inv_sqrt_eps) * rho, rho)?;
        heur |= at_min.heuristic || at_max.heuristic;
        let close = (at_min.value - at_max.value).abs() <= T::of(1e-13) * (T::one() + r);
        for i in 0..ALPHA_GRID {
            if mask & (1 << i) != 0 {
                continue;
            }
            let al = T::of(alpha(i));
            let ok = if at_min.value + al * rho <= r {
                true
            } else if at_max.value + al * rho > r {
                false
            } else if close {
                // Both ends agree up to rounding and straddle the threshold.
                at_max.value + al * rho <= r
            } else {
                let d = d_at((al + inv_sqrt_eps) * rho, rho)?;
                heur |= d.heuristic;
                d.value + al * rho <= r
            };
            if ok {
                mask |= 1 << i;
            }
        }
        if mask == full {
            break;
        }
    }
    Ok((mask, heur))
}

/// Per radius, the largest grid `α` such that every sampled equidistant
/// triple admits `ρ` on the grid with `D + αρ ≤ ‖x - a‖`, where `D` is the
/// product distance at `λ = (α + 1/√ε)ρ` and `ε` is the radius.
pub fn estimate_itr_p<T: Real>(scene: &Scene<T>, sched: &RadiusSchedule<T>) -> Result<ConstantEstimate<T>> {
    let sampler = TripleSampler::new(scene, sched.seed, TRIPLE_STREAM);
    let mut per_radius = Vec::with_capacity(sched.radii.len());
    let mut flagged = 0;
    for &radius in &sched.radii {
        let masks: Vec<Option<(u64, bool)>> = (0..sched.samples_per_radius as u64)
            .into_par_iter()
            .map(|i| -> Result<Option<(u64, bool)>> {
                let Some(tr) = sampler.draw(radius, i, None)? else { return Ok(None) };
                let x = bisector_foot_raw(&tr.a, &tr.b, &tr.x);
                let Some(tr) = sampler.finish(tr.a, tr.b, x, radius, tr.mode)? else { return Ok(None) };
                Ok(Some(feasible_alphas(scene, &tr.a, &tr.b, &tr.x, radius)?))
            })
            .collect::<Result<_>>()?;
        let mut all = u64::MAX;
        let mut count = 0;
        for (m, h) in masks.into_iter().flatten() {
            all &= m;
            count += 1;
            flagged += h as usize;
        }
        let value = if count == 0 {
            T::one()
        } else {
            (0..ALPHA_GRID).rev().find(|&i| all & (1 << i) != 0).map_or(T::zero(), |i| T::of(alpha(i)))
        };
        per_radius.push(RadiusValue { radius, value, feasible_count: count });
    }
    let mut diag = Diagnostics { flagged_samples: flagged, notes: Vec::new() };
    if flagged > 0 {
        diag.notes.push("truncated projections onto nonconvex sets were approximated".into());
    }
    Ok(ConstantEstimate::assemble(ConstantKind::ItrP, scene, per_radius, diag))
}
