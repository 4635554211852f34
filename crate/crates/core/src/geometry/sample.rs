use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{ball_coords, ball_point_from_unit, Halton};
use crate::scalar::Real;
use crate::vector::Vector;

use super::SetSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct PointSample<T> {
    pub points: Vec<Vector<T>>,
    pub requested: usize,
    pub attempts: usize,
    /// True when fewer than `requested` points were found.
    pub short: bool,
}

/// Points of `set` inside `B_radius(center)`, obtained by projecting
/// quasi-random points of that ball onto the set and keeping those that land
/// inside it. Deterministic in `seed`.
pub fn sample_set_points<T: Real>(
    set: &SetSpec<T>,
    center: &Vector<T>,
    radius: T,
    count: usize,
    seed: u64,
) -> Result<PointSample<T>> {
    set.check_point(center)?;
    if !(radius > T::zero()) || count == 0 {
        return Err(Error::Precondition("sampling needs radius > 0 and count >= 1".into()));
    }
    let n = center.dim();
    let h = Halton::new(ball_coords(n), seed);
    let max_attempts = 20 * count;
    let mut points = Vec::with_capacity(count);
    let mut attempts = 0;
    let slack = radius * (T::one() + T::of(1e-12));
    while points.len() < count && attempts < max_attempts {
        let y = center.add_scaled(radius, &ball_point_from_unit::<T>(&h.point(attempts as u64), n));
        attempts += 1;
        let ps = set.project(&y)?;
        let p = &ps[attempts % ps.len()];
        if p.dist(center) <= slack {
            points.push(p.clone());
        }
    }
    let short = points.len() < count;
    Ok(PointSample { points, requested: count, attempts, short })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SetSpec;

    fn v(c: &[f64]) -> Vector<f64> {
        Vector::from_f64(c)
    }

    #[test]
    fn line_samples_have_shape() {
        let x = SetSpec::affine(v(&[0.0, 0.0]), vec![v(&[1.0, 0.0])]).unwrap();
        let s = sample_set_points(&x, &v(&[0.0, 0.0]), 1.0, 3, 7).unwrap();
        assert_eq!(s.points.len(), 3);
        for p in &s.points {
            assert_eq!(p[1], 0.0);
            assert!(p[0].abs() < 1.0);
        }
    }

    #[test]
    fn ball_samples_near_boundary_point() {
        let b = SetSpec::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        let s = sample_set_points(&b, &v(&[1.0, 0.0]), 0.1, 50, 2).unwrap();
        assert!(!s.points.is_empty());
        for p in &s.points {
            assert!(p.dist(&v(&[1.0, 0.0])) <= 0.1 + 1e-12);
            assert!(p.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn slab_samples_lie_on_axis() {
        let s = SetSpec::intersection(vec![
            SetSpec::half_space(v(&[0.0, 1.0]), 0.0).unwrap(),
            SetSpec::half_space(v(&[0.0, -1.0]), 0.0).unwrap(),
        ])
        .unwrap();
        let pts = sample_set_points(&s, &v(&[0.0, 0.0]), 1.0, 40, 5).unwrap();
        assert_eq!(pts.points.len(), 40);
        assert!(pts.points.iter().all(|p| p[1].abs() <= 1e-12));
    }

    #[test]
    fn far_set_gives_short_sample() {
        let b = SetSpec::ball(v(&[10.0, 0.0]), 1.0).unwrap();
        let s = sample_set_points(&b, &v(&[0.0, 0.0]), 1.0, 5, 1).unwrap();
        assert!(s.short && s.points.is_empty());
    }
}
