use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{orthogonal_complement, project_onto_cone};
use crate::scalar::Real;
use crate::vector::Vector;

use super::project::project_region;
use super::{sample_set_points, RegionShape, SetSpec, MEMBERSHIP_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FanExactness {
    /// Generators span the extreme rays of the proximal normal cone.
    Exact,
    /// Generators were filtered numerically (unions, curved intersections).
    Sampled,
}

/// Finitely generated model of the proximal normal cone at `basepoint`.
/// An empty generator list is the cone `{0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct NormalFan<T> {
    pub basepoint: Vector<T>,
    pub generators: Vec<Vector<T>>,
    pub exactness: FanExactness,
}

impl<T: Real> NormalFan<T> {
    pub fn is_trivial(&self) -> bool {
        self.generators.is_empty()
    }

    /// Distance from `v` to the conic hull of the generators.
    pub fn residual(&self, v: &Vector<T>) -> T {
        project_onto_cone(v, &self.generators).distance
    }

    /// Nearest point of the cone to `v`.
    pub fn nearest(&self, v: &Vector<T>) -> Vector<T> {
        project_onto_cone(v, &self.generators).point
    }
}

impl<T: Real> SetSpec<T> {
    /// Unit generators of the proximal normal cone at `a`, which must lie in
    /// the set.
    pub fn proximal_normals(&self, a: &Vector<T>) -> Result<NormalFan<T>> {
        let d = self.distance(a)?;
        if d > T::of(MEMBERSHIP_TOL) {
            return Err(Error::NotInSet { distance: d.to_f64_lossy() });
        }
        let mut gens = self.fan_generators(a)?;
        let exactness = if self.fan_is_exact() {
            FanExactness::Exact
        } else {
            let mut kept = Vec::with_capacity(gens.len());
            for g in gens {
                if proximal_certificate(self, a, &g)?.is_some() {
                    kept.push(g);
                }
            }
            gens = kept;
            FanExactness::Sampled
        };
        dedupe_directions(&mut gens);
        Ok(NormalFan { basepoint: a.clone(), generators: gens, exactness })
    }

    fn fan_is_exact(&self) -> bool {
        match self {
            SetSpec::Union { sets } => sets.len() == 1 && sets[0].fan_is_exact(),
            SetSpec::Intersection { .. } => self.is_polyhedral(),
            _ => true,
        }
    }

    /// Candidate generators before any numerical filtering.
    fn fan_generators(&self, a: &Vector<T>) -> Result<Vec<Vector<T>>> {
        let tol = T::of(MEMBERSHIP_TOL);
        let n = a.dim();
        Ok(match self {
            SetSpec::Affine { basis, .. } => {
                let mut out = Vec::new();
                for c in orthogonal_complement(basis, n) {
                    out.push(-&c);
                    out.push(c);
                }
                out
            }
            SetSpec::HalfSpace { normal, offset } => {
                if normal.dot(a) - *offset >= -tol {
                    vec![normal.clone()]
                } else {
                    Vec::new()
                }
            }
            SetSpec::Ball { center, radius } => {
                if *radius == T::zero() {
                    all_axes(n)
                } else if a.dist(center) >= *radius - tol {
                    (a - center).normalized().into_iter().collect()
                } else {
                    Vec::new()
                }
            }
            SetSpec::Sphere { center, radius } => {
                if *radius == T::zero() {
                    all_axes(n)
                } else {
                    match (a - center).normalized() {
                        Some(u) => vec![u.clone(), -u],
                        None => Vec::new(),
                    }
                }
            }
            SetSpec::Polyhedron { half_spaces } => half_spaces
                .iter()
                .filter(|h| h.normal.dot(a) - h.offset >= -tol)
                .map(|h| h.normal.clone())
                .collect(),
            SetSpec::Region { shape, vertex, curvature } => {
                let on_graph = project_region(RegionShape::ParabolaGraph, vertex, *curvature, a)
                    .first()
                    .map_or(false, |p| p.dist(a) <= tol);
                if !on_graph {
                    return Ok(Vec::new());
                }
                let last = n - 1;
                let mut g: Vec<T> = (0..last).map(|i| T::of(2.0) * *curvature * (a[i] - vertex[i])).collect();
                g.push(-T::one());
                let g = Vector::new(g).normalized().expect("gradient has unit last entry");
                match shape {
                    RegionShape::ParabolaEpigraph => vec![g],
                    RegionShape::ParabolaHypograph => vec![-g],
                    RegionShape::ParabolaGraph => vec![g.clone(), -g],
                }
            }
            SetSpec::Union { sets } | SetSpec::Intersection { sets } => {
                let mut out = Vec::new();
                for s in sets {
                    if s.distance(a)? <= tol {
                        out.extend(s.fan_generators(a)?);
                    }
                }
                out
            }
        })
    }
}

fn all_axes<T: Real>(n: usize) -> Vec<Vector<T>> {
    (0..n)
        .flat_map(|i| {
            let e = Vector::unit(n, i);
            [e.clone(), -e]
        })
        .collect()
}

fn dedupe_directions<T: Real>(gens: &mut Vec<Vector<T>>) {
    let mut out: Vec<Vector<T>> = Vec::with_capacity(gens.len());
    for g in gens.drain(..) {
        if !out.iter().any(|h| h.dist(&g) <= T::of(1e-9)) {
            out.push(g);
        }
    }
    out.sort_by(|a, b| a.lex_cmp(b));
    *gens = out;
}

/// Looks for `t > 0` with `a ∈ P(a + t v)`. Starting from `t = 1 + |a|` the
/// step is halved until the inclusion holds, then refined by bisection
/// towards the largest such `t`. Returns that `t`, or `None` if no step down
/// to `2^-20 t` works; smaller steps would be swamped by the union tie
/// tolerance.
pub fn proximal_certificate<T: Real>(set: &SetSpec<T>, a: &Vector<T>, v: &Vector<T>) -> Result<Option<T>> {
    let holds = |t: T| -> Result<bool> {
        let ps = set.project(&a.add_scaled(t, v))?;
        let tol = T::of(1e-7) * t * v.norm() + T::of(1e-13) * (T::one() + a.norm());
        Ok(ps.iter().any(|p| p.dist(a) <= tol))
    };
    let t0 = T::one() + a.norm();
    let mut t = t0;
    let mut found = false;
    for _ in 0..=20 {
        if holds(t)? {
            found = true;
            break;
        }
        t = t * T::of(0.5);
    }
    if !found {
        return Ok(None);
    }
    if t == t0 {
        return Ok(Some(t));
    }
    let (mut lo, mut hi) = (t, t * T::of(2.0));
    for _ in 0..30 {
        let mid = (lo + hi) * T::of(0.5);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct FrechetResidual<T> {
    /// `max(0, sup <v, x - a> / (|v| |x - a|))` over the probe points.
    pub value: T,
    pub points_used: usize,
    /// Set when no probe point other than `a` itself was found.
    pub degenerate: bool,
}

/// Empirical test of `v ∈ N_S(a)` (Fréchet) at scale `probe_radius`: the
/// largest normalized inner product of `v` with chords from `a` to nearby
/// set points.
pub fn frechet_normal_residual<T: Real>(
    set: &SetSpec<T>,
    a: &Vector<T>,
    v: &Vector<T>,
    probe_radius: T,
    probe_count: usize,
    seed: u64,
) -> Result<FrechetResidual<T>> {
    if probe_count == 0 {
        return Err(Error::Precondition("probe_count must be positive".into()));
    }
    set.check_point(v)?;
    let vn = v.norm();
    if vn == T::zero() {
        return Err(Error::Degenerate("zero normal direction".into()));
    }
    let d = set.distance(a)?;
    if d > T::of(MEMBERSHIP_TOL) {
        return Err(Error::NotInSet { distance: d.to_f64_lossy() });
    }
    let sample = sample_set_points(set, a, probe_radius, probe_count, seed)?;
    let floor = T::of(1e-12) * (T::one() + a.norm());
    let mut best = T::zero();
    let mut used = 0;
    for x in &sample.points {
        let w = x - a;
        let wn = w.norm();
        if wn <= floor {
            continue;
        }
        used += 1;
        best = best.max(v.dot(&w) / (vn * wn));
    }
    Ok(FrechetResidual { value: best.min(T::one()), points_used: used, degenerate: used == 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector<f64> {
        Vector::from_f64(c)
    }

    fn axis(i: usize) -> SetSpec<f64> {
        SetSpec::affine(v(&[0.0, 0.0]), vec![Vector::unit(2, i)]).unwrap()
    }

    #[test]
    fn line_fan_is_both_normals() {
        let f = axis(0).proximal_normals(&v(&[1.0, 0.0])).unwrap();
        assert_eq!(f.generators, vec![v(&[0.0, -1.0]), v(&[0.0, 1.0])]);
        assert_eq!(f.exactness, FanExactness::Exact);
    }

    #[test]
    fn sphere_fan_is_both_radial_directions() {
        let s = SetSpec::sphere(v(&[0.0, 0.0]), 1.0).unwrap();
        let f = s.proximal_normals(&v(&[1.0, 0.0])).unwrap();
        assert_eq!(f.generators, vec![v(&[-1.0, 0.0]), v(&[1.0, 0.0])]);
    }

    #[test]
    fn union_of_axes_has_trivial_fan_at_crossing() {
        let u = SetSpec::union(vec![axis(0), axis(1)]).unwrap();
        let f = u.proximal_normals(&v(&[0.0, 0.0])).unwrap();
        assert!(f.is_trivial());
        let g = u.proximal_normals(&v(&[2.0, 0.0])).unwrap();
        assert_eq!(g.generators.len(), 2);
    }

    #[test]
    fn point_outside_is_error() {
        assert!(matches!(axis(0).proximal_normals(&v(&[0.0, 1.0])), Err(Error::NotInSet { .. })));
    }

    #[test]
    fn epigraph_fan_points_down_at_vertex() {
        let e = SetSpec::region(RegionShape::ParabolaEpigraph, v(&[0.0, 0.0]), 1.0).unwrap();
        let f = e.proximal_normals(&v(&[0.0, 0.0])).unwrap();
        assert_eq!(f.generators, vec![v(&[0.0, -1.0])]);
        assert!(e.proximal_normals(&v(&[0.0, 1.0])).unwrap().is_trivial());
    }

    #[test]
    fn frechet_residual_examples() {
        let x = axis(0);
        let o = v(&[0.0, 0.0]);
        let r = frechet_normal_residual(&x, &o, &v(&[0.0, 1.0]), 0.5, 64, 1).unwrap();
        assert!(r.value < 1e-12 && !r.degenerate);
        let t = frechet_normal_residual(&x, &o, &v(&[1.0, 0.0]), 0.5, 64, 1).unwrap();
        assert!((t.value - 1.0).abs() < 1e-12);
        let g = SetSpec::region(RegionShape::ParabolaGraph, o.clone(), 1.0).unwrap();
        let p = frechet_normal_residual(&g, &o, &v(&[0.0, -1.0]), 0.1, 64, 1).unwrap();
        assert!(p.value < 1e-12 && p.points_used > 0);
        assert!(frechet_normal_residual(&x, &o, &v(&[0.0, 1.0]), 0.5, 0, 1).is_err());
    }
}
