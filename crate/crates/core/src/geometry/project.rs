use crate::error::{Error, Result};
use crate::linalg::{orthogonal_complement, project_onto_equalities};
use crate::scalar::Real;
use crate::vector::Vector;

use super::{RegionShape, SetSpec, TIE_TOL};

/// Above this many candidate active sets a polyhedral intersection is
/// projected with Dykstra's algorithm instead of exact enumeration.
const MAX_ACTIVE_SETS: usize = 200_000;
const DYKSTRA_MAX_SWEEPS: usize = 20_000;
/// Dykstra declares the intersection empty when the gap has not shrunk by
/// 0.1% over this many checkpoints (64 sweeps each).
const STALL_CHECKPOINTS: usize = 4;
/// A Dykstra limit must be within this distance of every member.
pub const CERTIFY_TOL: f64 = 1e-10;

impl<T: Real> SetSpec<T> {
    /// All nearest points of the set to `x`, sorted lexicographically.
    /// Convex sets return exactly one point.
    pub fn project(&self, x: &Vector<T>) -> Result<Vec<Vector<T>>> {
        self.check_point(x)?;
        let mut pts = self.project_raw(x)?;
        pts.sort_by(|a, b| a.lex_cmp(b));
        dedupe(&mut pts);
        Ok(pts)
    }

    /// The lexicographically smallest nearest point.
    pub fn project_one(&self, x: &Vector<T>) -> Result<Vector<T>> {
        Ok(self.project(x)?.swap_remove(0))
    }

    pub fn distance(&self, x: &Vector<T>) -> Result<T> {
        self.check_point(x)?;
        self.distance_raw(x)
    }

    fn distance_raw(&self, x: &Vector<T>) -> Result<T> {
        match self {
            SetSpec::HalfSpace { normal, offset } => Ok((normal.dot(x) - *offset).max(T::zero())),
            SetSpec::Ball { center, radius } => Ok((x.dist(center) - *radius).max(T::zero())),
            SetSpec::Sphere { center, radius } => Ok((x.dist(center) - *radius).abs()),
            SetSpec::Union { sets } => {
                let mut best = T::infinity();
                for s in sets {
                    best = best.min(s.distance_raw(x)?);
                }
                Ok(best)
            }
            _ => {
                let p = self.project_raw(x)?;
                Ok(x.dist(&p[0]))
            }
        }
    }

    pub(crate) fn project_raw(&self, x: &Vector<T>) -> Result<Vec<Vector<T>>> {
        match self {
            SetSpec::Affine { basepoint, basis } => {
                let d = x - basepoint;
                let mut y = basepoint.clone();
                for q in basis {
                    y.axpy(d.dot(q), q);
                }
                Ok(vec![y])
            }
            SetSpec::HalfSpace { normal, offset } => {
                let s = normal.dot(x) - *offset;
                if s <= T::zero() {
                    Ok(vec![x.clone()])
                } else {
                    Ok(vec![x.add_scaled(-s, normal)])
                }
            }
            SetSpec::Ball { center, radius } => {
                let d = x - center;
                let r = d.norm();
                if r <= *radius {
                    Ok(vec![x.clone()])
                } else {
                    Ok(vec![center.add_scaled(*radius / r, &d)])
                }
            }
            SetSpec::Sphere { center, radius } => {
                let d = x - center;
                let r = d.norm();
                if *radius == T::zero() {
                    Ok(vec![center.clone()])
                } else if r == T::zero() {
                    // Every point of the sphere is nearest; report the axis points.
                    let n = x.dim();
                    let mut out = Vec::with_capacity(2 * n);
                    for i in 0..n {
                        let e = Vector::unit(n, i);
                        out.push(center.add_scaled(*radius, &e));
                        out.push(center.add_scaled(-*radius, &e));
                    }
                    Ok(out)
                } else {
                    Ok(vec![center.add_scaled(*radius / r, &d)])
                }
            }
            SetSpec::Polyhedron { .. } => self.project_polyhedral(x),
            SetSpec::Region { shape, vertex, curvature } => Ok(project_region(*shape, vertex, *curvature, x)),
            SetSpec::Union { sets } => {
                let mut branches = Vec::with_capacity(sets.len());
                let mut best = T::infinity();
                for s in sets {
                    let ps = s.project_raw(x)?;
                    let d = x.dist(&ps[0]);
                    best = best.min(d);
                    branches.push((d, ps));
                }
                let cut = best + T::of(TIE_TOL);
                Ok(branches
                    .into_iter()
                    .filter(|(d, _)| *d <= cut)
                    .flat_map(|(_, ps)| ps)
                    .collect())
            }
            SetSpec::Intersection { sets } => {
                if sets.len() == 1 {
                    return sets[0].project_raw(x);
                }
                if self.is_polyhedral() {
                    return self.project_polyhedral(x);
                }
                if !self.is_convex() {
                    return Err(Error::Unsupported(
                        "projection onto an intersection with nonconvex members".into(),
                    ));
                }
                // Polyhedral members are merged into one exactly projected block.
                let (poly, rest): (Vec<&SetSpec<T>>, Vec<&SetSpec<T>>) = sets.iter().partition(|s| s.is_polyhedral());
                let merged;
                let mut blocks = rest;
                if !poly.is_empty() {
                    merged = SetSpec::Intersection { sets: poly.into_iter().cloned().collect() };
                    blocks.push(&merged);
                }
                Ok(vec![dykstra(&blocks, x)?])
            }
        }
    }

    /// Collects the linear description `(equalities, inequalities <=)` of a
    /// polyhedral set.
    fn linear_constraints(&self, eq: &mut Vec<(Vector<T>, T)>, ineq: &mut Vec<(Vector<T>, T)>) {
        match self {
            SetSpec::Affine { basepoint, basis } => {
                for c in orthogonal_complement(basis, basepoint.dim()) {
                    let v = c.dot(basepoint);
                    eq.push((c, v));
                }
            }
            SetSpec::HalfSpace { normal, offset } => ineq.push((normal.clone(), *offset)),
            SetSpec::Polyhedron { half_spaces } => {
                ineq.extend(half_spaces.iter().map(|h| (h.normal.clone(), h.offset)));
            }
            SetSpec::Intersection { sets } | SetSpec::Union { sets } => {
                for s in sets {
                    s.linear_constraints(eq, ineq);
                }
            }
            _ => unreachable!("linear_constraints called on a non-polyhedral set"),
        }
    }

    /// Exact projection onto a polyhedral set by active-set enumeration: the
    /// nearest point is the projection onto the affine hull of its active
    /// constraints, so the closest feasible candidate over all active sets is it.
    fn project_polyhedral(&self, x: &Vector<T>) -> Result<Vec<Vector<T>>> {
        let mut eq = Vec::new();
        let mut ineq = Vec::new();
        self.linear_constraints(&mut eq, &mut ineq);
        let n = x.dim();
        let m = ineq.len();
        let feasible = |y: &Vector<T>| {
            let s = T::one() + y.norm();
            ineq.iter()
                .all(|(g, h)| g.dot(y) - *h <= T::of(1e-11) * (s + h.abs()))
        };
        let max_size = n.min(m);
        let total: usize = (0..=max_size).map(|k| binomial(m, k)).sum();
        if total > MAX_ACTIVE_SETS {
            let parts: Vec<SetSpec<T>> = ineq
                .into_iter()
                .map(|(normal, offset)| SetSpec::HalfSpace { normal, offset })
                .chain(std::iter::once(SetSpec::Intersection {
                    sets: eq.into_iter().map(|(normal, offset)| hyperplane(normal, offset)).collect(),
                }))
                .collect();
            let refs: Vec<&SetSpec<T>> = parts.iter().collect();
            return Ok(vec![dykstra(&refs, x)?]);
        }
        let mut best: Option<(T, Vector<T>)> = None;
        let mut rows = eq.clone();
        let base = rows.len();
        for k in 0..=max_size {
            for_each_combination(m, k, &mut |idx| {
                rows.truncate(base);
                rows.extend(idx.iter().map(|&i| ineq[i].clone()));
                if let Some(y) = project_onto_equalities(x, &rows) {
                    if feasible(&y) {
                        let d = x.dist(&y);
                        if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                            best = Some((d, y));
                        }
                    }
                }
            });
        }
        best.map(|(_, y)| vec![y]).ok_or(Error::EmptyIntersection)
    }
}

fn hyperplane<T: Real>(normal: Vector<T>, offset: T) -> SetSpec<T> {
    let n = normal.dim();
    let basis = orthogonal_complement(&[normal.clone()], n);
    SetSpec::Affine { basepoint: normal.scaled(offset), basis }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r: usize = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

fn for_each_combination(m: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < i + m - k) else { return };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Dykstra's algorithm for the projection onto an intersection of closed
/// convex sets. The limit is certified to lie in every set within
/// [`CERTIFY_TOL`].
pub fn dykstra<T: Real>(sets: &[&SetSpec<T>], x: &Vector<T>) -> Result<Vector<T>> {
    let k = sets.len();
    let mut y = x.clone();
    let mut incr = vec![Vector::zeros(x.dim()); k];
    let scale = T::one() + x.norm();
    let step_tol = T::of(1e-15) * scale;
    // Gap (largest member distance) at the last few checkpoints.
    let mut history: Vec<T> = Vec::new();
    for sweep in 0..DYKSTRA_MAX_SWEEPS {
        let start = y.clone();
        for (s, p) in sets.iter().zip(incr.iter_mut()) {
            let z = &y + &*p;
            let proj = s.project_raw(&z)?.swap_remove(0);
            *p = &z - &proj;
            y = proj;
        }
        if y.dist(&start) <= step_tol {
            break;
        }
        if sweep % 64 == 63 {
            let g = gap(sets, &y)?;
            if g <= T::of(1e-14) * scale {
                break;
            }
            history.push(g);
            if history.len() > STALL_CHECKPOINTS {
                let old = history[history.len() - 1 - STALL_CHECKPOINTS];
                if g > T::of(1e-6) * scale && g > old * T::of(0.999) {
                    return Err(Error::EmptyIntersection);
                }
            }
        }
    }
    if certified(sets, &y, T::of(CERTIFY_TOL))? {
        Ok(y)
    } else if gap(sets, &y)? > T::of(1e-6) * scale {
        Err(Error::EmptyIntersection)
    } else {
        Err(Error::IntersectionUnavailable(
            "Dykstra iterates did not settle in every member set".into(),
        ))
    }
}

fn gap<T: Real>(sets: &[&SetSpec<T>], y: &Vector<T>) -> Result<T> {
    let mut g = T::zero();
    for s in sets {
        g = g.max(s.distance_raw(y)?);
    }
    Ok(g)
}

fn certified<T: Real>(sets: &[&SetSpec<T>], y: &Vector<T>, tol: T) -> Result<bool> {
    for s in sets {
        if s.distance_raw(y)? > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Removes points closer than a relative 1e-12 to an earlier one. Expects a
/// lexicographically sorted list.
fn dedupe<T: Real>(pts: &mut Vec<Vector<T>>) {
    let mut out: Vec<Vector<T>> = Vec::with_capacity(pts.len());
    for p in pts.drain(..) {
        let tol = T::of(1e-12) * (T::one() + p.norm());
        if !out.iter().any(|q| q.dist(&p) <= tol) {
            out.push(p);
        }
    }
    *pts = out;
}

/// Real roots of the depressed cubic `s^3 + p s + q = 0`, Newton-polished.
pub(crate) fn depressed_cubic_roots<T: Real>(p: T, q: T) -> Vec<T> {
    let two = T::of(2.0);
    let three = T::of(3.0);
    let half_q = q / two;
    let disc = half_q * half_q + (p / three).powi(3);
    let mut roots = if disc > T::zero() {
        // One real root; pick the cube root without cancellation.
        let sd = disc.sqrt();
        let w = if half_q >= T::zero() { -half_q - sd } else { -half_q + sd };
        let a = w.cbrt();
        let s = if a == T::zero() { T::zero() } else { a - p / (three * a) };
        vec![s]
    } else if p == T::zero() {
        vec![T::zero()]
    } else {
        let r = two * (-p / three).sqrt();
        let arg = ((three * q) / (two * p) * (-three / p).sqrt()).clamp_to(-T::one(), T::one());
        let phi = arg.acos() / three;
        let third = T::of(2.0 * std::f64::consts::PI / 3.0);
        (0..3).map(|j| r * (phi - third * T::of(j as f64)).cos()).collect()
    };
    for s in roots.iter_mut() {
        for _ in 0..4 {
            let f = *s * *s * *s + p * *s + q;
            let df = three * *s * *s + p;
            if df == T::zero() {
                break;
            }
            let next = *s - f / df;
            if !next.is_finite() {
                break;
            }
            *s = next;
        }
    }
    roots
}

/// Projection onto a paraboloid region `{x_n - v_n (>=|<=|=) k |x' - v'|^2}`.
pub(crate) fn project_region<T: Real>(shape: RegionShape, vertex: &Vector<T>, k: T, x: &Vector<T>) -> Vec<Vector<T>> {
    let n = x.dim();
    let last = n - 1;
    let u = Vector::new((0..last).map(|i| x[i] - vertex[i]).collect());
    let h = x[last] - vertex[last];
    let m = u.norm();
    let q = k * m * m;
    match shape {
        RegionShape::ParabolaEpigraph if h >= q => return vec![x.clone()],
        RegionShape::ParabolaHypograph if h <= q => return vec![x.clone()],
        RegionShape::ParabolaGraph if h == q => return vec![x.clone()],
        _ => {}
    }
    let lift = |z: &Vector<T>| {
        let mut c: Vec<T> = (0..last).map(|i| vertex[i] + z[i]).collect();
        c.push(vertex[last] + k * z.norm_sq());
        Vector::new(c)
    };
    let obj = |s: T| (s - m) * (s - m) + (k * s * s - h) * (k * s * s - h);
    let two = T::of(2.0);
    let tie = |a: T, b: T| (a - b).abs() <= T::of(1e-12) * (T::one() + a.abs());
    if m > T::zero() {
        // Stationary points along the ray through u: 2k^2 s^3 + (1 - 2kh) s - m = 0.
        let kk = two * k * k;
        let roots = depressed_cubic_roots((T::one() - two * k * h) / kk, -m / kk);
        let best = roots.iter().map(|&s| obj(s)).fold(T::infinity(), T::min);
        let dir = u.scaled(T::one() / m);
        let mut out: Vec<Vector<T>> = Vec::new();
        for &s in &roots {
            if tie(obj(s), best) {
                out.push(lift(&dir.scaled(s)));
            }
        }
        out
    } else {
        // On the axis: either the vertex or a whole ring of radius sqrt(sigma).
        let f0 = h * h;
        let sigma = (two * k * h - T::one()) / (two * k * k);
        let mut out = Vec::new();
        let ring = if sigma > T::zero() { sigma + (k * sigma - h) * (k * sigma - h) } else { T::infinity() };
        if f0 <= ring || tie(f0, ring) {
            out.push(lift(&Vector::zeros(last)));
        }
        if ring < f0 || tie(f0, ring) {
            let r = sigma.sqrt();
            for i in 0..last {
                let e = Vector::<T>::unit(last, i);
                out.push(lift(&e.scaled(r)));
                out.push(lift(&e.scaled(-r)));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HalfSpace;

    fn v(c: &[f64]) -> Vector<f64> {
        Vector::from_f64(c)
    }

    fn axis(i: usize) -> SetSpec<f64> {
        SetSpec::affine(v(&[0.0, 0.0]), vec![Vector::unit(2, i)]).unwrap()
    }

    #[test]
    fn primitive_projections() {
        let h = SetSpec::half_space(v(&[0.0, 1.0]), 0.0).unwrap();
        assert_eq!(h.project(&v(&[3.0, 2.0])).unwrap(), vec![v(&[3.0, 0.0])]);
        let b = SetSpec::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(b.project(&v(&[2.0, 0.0])).unwrap(), vec![v(&[1.0, 0.0])]);
        assert_eq!(axis(0).distance(&v(&[5.0, -3.0])).unwrap(), 3.0);
        assert_eq!(axis(0).distance(&v(&[5.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn union_reports_ties() {
        let u = SetSpec::union(vec![axis(0), axis(1)]).unwrap();
        let p = u.project(&v(&[1.0, 1.0])).unwrap();
        assert_eq!(p, vec![v(&[0.0, 1.0]), v(&[1.0, 0.0])]);
        assert_eq!(u.project_one(&v(&[1.0, 1.0])).unwrap(), v(&[0.0, 1.0]));
        assert_eq!(u.distance(&v(&[1.0, 2.0])).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        assert!(matches!(axis(0).project(&v(&[1.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn polyhedron_vertex_projection() {
        // Quadrant x <= 0, y <= 0.
        let p = SetSpec::polyhedron(vec![
            HalfSpace { normal: v(&[1.0, 0.0]), offset: 0.0 },
            HalfSpace { normal: v(&[0.0, 1.0]), offset: 0.0 },
        ])
        .unwrap();
        assert_eq!(p.project(&v(&[2.0, 3.0])).unwrap(), vec![v(&[0.0, 0.0])]);
        assert_eq!(p.project(&v(&[2.0, -3.0])).unwrap(), vec![v(&[0.0, -3.0])]);
    }

    #[test]
    fn slab_intersection_is_axis() {
        let s = SetSpec::intersection(vec![
            SetSpec::half_space(v(&[0.0, 1.0]), 0.0).unwrap(),
            SetSpec::half_space(v(&[0.0, -1.0]), 0.0).unwrap(),
        ])
        .unwrap();
        let p = s.project_one(&v(&[0.3, 0.7])).unwrap();
        assert!(p[1].abs() <= 1e-15 && (p[0] - 0.3).abs() <= 1e-15);
    }

    #[test]
    fn dykstra_ball_line() {
        let s = SetSpec::intersection(vec![SetSpec::ball(v(&[0.0, 0.0]), 1.0).unwrap(), axis(0)]).unwrap();
        let p = s.project_one(&v(&[3.0, 1.0])).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-9 && p[1].abs() < 1e-9);
        let far = SetSpec::Intersection {
            sets: vec![
                SetSpec::ball(v(&[0.0, 5.0]), 1.0).unwrap(),
                axis(0),
            ],
        };
        assert!(far.validated().is_err());
    }

    #[test]
    fn nonconvex_intersection_unsupported() {
        let s = SetSpec::Intersection {
            sets: vec![SetSpec::sphere(v(&[0.0, 0.0]), 1.0).unwrap(), axis(0)],
        };
        assert!(matches!(s.project(&v(&[0.5, 0.5])), Err(Error::Unsupported(_))));
    }

    #[test]
    fn cubic_roots_satisfy_equation() {
        for &(p, q) in &[(-3.0, 1.0), (1.0, -2.0), (0.0, -8.0), (-1.0, 0.0), (2.5, 1e-9)] {
            let rs = depressed_cubic_roots::<f64>(p, q);
            assert!(!rs.is_empty());
            for s in rs {
                assert!((s * s * s + p * s + q).abs() < 1e-10, "p={p} q={q} s={s}");
            }
        }
        assert_eq!(depressed_cubic_roots::<f64>(-3.0, 1.0).len(), 3);
    }

    #[test]
    fn parabola_projection_matches_brute_force() {
        let epi = SetSpec::region(RegionShape::ParabolaEpigraph, v(&[0.0, 0.0]), 1.0).unwrap();
        let hyp = SetSpec::region(RegionShape::ParabolaHypograph, v(&[0.0, 0.0]), 1.0).unwrap();
        let pts = [v(&[1.0, -1.0]), v(&[0.3, -0.2]), v(&[2.0, 0.5]), v(&[-0.7, 3.0]), v(&[0.0, 2.0])];
        for x in &pts {
            for set in [&epi, &hyp] {
                let d = set.distance(x).unwrap();
                // Brute force over the graph t -> (t, t^2).
                let mut best = f64::INFINITY;
                let inside = match set {
                    SetSpec::Region { shape: RegionShape::ParabolaEpigraph, .. } => x[1] >= x[0] * x[0],
                    _ => x[1] <= x[0] * x[0],
                };
                if inside {
                    best = 0.0;
                } else {
                    for i in 0..=400_000 {
                        let t = -4.0 + 8.0 * i as f64 / 400_000.0;
                        best = best.min(((x[0] - t).powi(2) + (x[1] - t * t).powi(2)).sqrt());
                    }
                }
                assert!((d - best).abs() < 1e-6, "x={x:?} d={d} brute={best}");
            }
        }
        // Above the focus on the axis the hypograph has two tied nearest points.
        assert_eq!(hyp.project(&v(&[0.0, 2.0])).unwrap().len(), 2);
    }

    #[test]
    fn sphere_center_returns_axis_points() {
        let s = SetSpec::sphere(v(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(s.project(&v(&[0.0, 0.0])).unwrap().len(), 4);
    }

    #[test]
    fn combinations_enumerated() {
        let mut n = 0;
        for_each_combination(5, 2, &mut |_| n += 1);
        assert_eq!(n, 10);
        let mut m = 0;
        for_each_combination(3, 0, &mut |i| {
            assert!(i.is_empty());
            m += 1
        });
        assert_eq!(m, 1);
        assert_eq!(binomial(6, 3), 20);
    }
}
