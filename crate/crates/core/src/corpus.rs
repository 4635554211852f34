//! Bundled scenes. The same scenes ship as JSON files under `corpus/`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use crate::constants::Scene;
use crate::error::Result;
use crate::geometry::{HalfSpace, RegionShape, SetSpec};
use crate::scalar::Real;
use crate::vector::Vector;

pub const SCENE_IDS: [&str; 6] = [
    "perpendicular_axes",
    "lines_pi_3",
    "identical_half_planes",
    "tangential_parabola",
    "axes_in_r3",
    "disk_line_45",
];

fn v<T: Real>(c: &[f64]) -> Vector<T> {
    Vector::from_f64(c)
}

fn line<T: Real>(dir: &[f64]) -> Result<SetSpec<T>> {
    SetSpec::affine(Vector::zeros(dir.len()), vec![v(dir)])
}

fn with_description<T: Real>(mut s: Scene<T>, d: &str) -> Scene<T> {
    s.description = d.into();
    s
}

/// Builds the bundled scene with the given id.
pub fn scene<T: Real>(id: &str) -> Result<Scene<T>> {
    let origin2 = || Vector::zeros(2);
    let s = match id {
        "perpendicular_axes" => with_description(
            Scene::new(id, line(&[1.0, 0.0])?, line(&[0.0, 1.0])?, origin2(), Some(SetSpec::point(origin2())))?,
            "x- and y-axis in R^2 at the origin; constants 1/sqrt2",
        ),
        "lines_pi_3" => with_description(
            Scene::new(
                id,
                line(&[1.0, 0.0])?,
                line(&[(PI / 3.0).cos(), (PI / 3.0).sin()])?,
                origin2(),
                Some(SetSpec::point(origin2())),
            )?,
            "two lines at angle pi/3; constants sin(pi/6) = 0.5",
        ),
        "identical_half_planes" => {
            let h = SetSpec::half_space(v(&[0.0, 1.0]), T::zero())?;
            with_description(
                Scene::new(id, h.clone(), h.clone(), v(&[0.0, -2.0]), Some(h))?,
                "A = B = {x2 <= 0} at an interior point; every local feasible set is empty",
            )
        }
        "tangential_parabola" => with_description(
            Scene::new(
                id,
                SetSpec::region(RegionShape::ParabolaEpigraph, origin2(), T::one())?,
                SetSpec::half_space(v(&[0.0, 1.0]), T::zero())?,
                origin2(),
                Some(SetSpec::point(origin2())),
            )?,
            "epigraph of x1^2 against the lower half-plane; tangent at the origin",
        ),
        "axes_in_r3" => {
            let o = Vector::zeros(3);
            with_description(
                Scene::new(id, line(&[1.0, 0.0, 0.0])?, line(&[0.0, 1.0, 0.0])?, o.clone(), Some(SetSpec::point(o)))?,
                "perpendicular axes embedded in R^3; not transversal, intrinsically transversal",
            )
        }
        "disk_line_45" => {
            let r = 4.0;
            let c = [-r * FRAC_1_SQRT_2, r * FRAC_1_SQRT_2];
            let seg = SetSpec::polyhedron(vec![
                HalfSpace { normal: v(&[0.0, 1.0]), offset: T::zero() },
                HalfSpace { normal: v(&[0.0, -1.0]), offset: T::zero() },
                HalfSpace { normal: v(&[1.0, 0.0]), offset: T::zero() },
                HalfSpace { normal: v(&[-1.0, 0.0]), offset: T::of(r * SQRT_2) },
            ])?;
            with_description(
                Scene::new(id, SetSpec::ball(v(&c), T::of(r))?, line(&[1.0, 0.0])?, origin2(), Some(seg))?,
                "disk of radius 4 through the origin, boundary at 45 degrees to the x-axis",
            )
        }
        _ => return Err(crate::Error::Parse(format!("unknown bundled scene `{id}`"))),
    };
    Ok(s)
}

/// All bundled scenes in [`SCENE_IDS`] order.
pub fn scenes<T: Real>() -> Result<Vec<Scene<T>>> {
    SCENE_IDS.iter().map(|id| scene(id)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenes_validate_and_roundtrip() {
        for s in scenes::<f64>().unwrap() {
            let back = Scene::<f64>::from_json(&s.to_json()).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn shipped_files_match_builtin() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
        for id in SCENE_IDS {
            let text = std::fs::read_to_string(dir.join(format!("{id}.json"))).unwrap();
            let s = Scene::<f64>::from_json(&text).unwrap();
            let b = scene::<f64>(id).unwrap();
            assert_eq!(s.id, b.id);
            assert_eq!(s.a, b.a);
            assert_eq!(s.b, b.b);
            assert_eq!(s.intersection, b.intersection);
        }
    }
}
