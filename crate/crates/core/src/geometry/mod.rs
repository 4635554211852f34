//! Exact set oracles for a closed algebra of primitive sets in R^n:
//! membership, projection, distance and proximal normal cones.
//!
//! Sets are described declaratively by [`SetSpec`], which round-trips through
//! JSON (see `docs/schema.md`).

mod normals;
mod project;
mod sample;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::orthonormalize;
use crate::scalar::Real;
use crate::vector::Vector;

pub use project::{dykstra, CERTIFY_TOL};
pub use normals::{frechet_normal_residual, proximal_certificate, FanExactness, FrechetResidual, NormalFan};
pub use sample::{sample_set_points, PointSample};

/// Absolute tolerance on distance for membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Projections of a union whose distances are within this of the optimum are
/// all reported.
pub const TIE_TOL: f64 = 1e-9;
/// Default bound on union/intersection nesting.
pub const DEFAULT_MAX_DEPTH: usize = 6;

/// `{x : <normal, x> <= offset}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct HalfSpace<T> {
    pub normal: Vector<T>,
    pub offset: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionShape {
    /// `{x : x_n - v_n >= k |x' - v'|^2}`
    ParabolaEpigraph,
    /// `{x : x_n - v_n <= k |x' - v'|^2}`
    ParabolaHypograph,
    /// `{x : x_n - v_n  = k |x' - v'|^2}`
    ParabolaGraph,
}

/// Declarative description of a nonempty closed subset of R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub enum SetSpec<T> {
    /// `basepoint + span(basis)`; the basis is orthonormalized on validation.
    Affine {
        basepoint: Vector<T>,
        #[serde(default)]
        basis: Vec<Vector<T>>,
    },
    HalfSpace {
        normal: Vector<T>,
        offset: T,
    },
    Ball {
        center: Vector<T>,
        radius: T,
    },
    Sphere {
        center: Vector<T>,
        radius: T,
    },
    Polyhedron {
        half_spaces: Vec<HalfSpace<T>>,
    },
    /// Paraboloid-type region with vertex `vertex` and curvature `k > 0`,
    /// opening towards the last coordinate.
    Region {
        shape: RegionShape,
        vertex: Vector<T>,
        curvature: T,
    },
    Union {
        sets: Vec<SetSpec<T>>,
    },
    Intersection {
        sets: Vec<SetSpec<T>>,
    },
}

impl<T: Real> SetSpec<T> {
    /// Line (or higher-dimensional affine set) through `point` spanned by `dirs`.
    pub fn affine(point: Vector<T>, dirs: Vec<Vector<T>>) -> Result<Self> {
        SetSpec::Affine { basepoint: point, basis: dirs }.validated()
    }

    /// The single point `p` (a zero-dimensional affine set).
    pub fn point(p: Vector<T>) -> Self {
        SetSpec::Affine { basepoint: p, basis: Vec::new() }
    }

    pub fn half_space(normal: Vector<T>, offset: T) -> Result<Self> {
        SetSpec::HalfSpace { normal, offset }.validated()
    }

    pub fn ball(center: Vector<T>, radius: T) -> Result<Self> {
        SetSpec::Ball { center, radius }.validated()
    }

    pub fn sphere(center: Vector<T>, radius: T) -> Result<Self> {
        SetSpec::Sphere { center, radius }.validated()
    }

    pub fn polyhedron(half_spaces: Vec<HalfSpace<T>>) -> Result<Self> {
        SetSpec::Polyhedron { half_spaces }.validated()
    }

    pub fn region(shape: RegionShape, vertex: Vector<T>, curvature: T) -> Result<Self> {
        SetSpec::Region { shape, vertex, curvature }.validated()
    }

    pub fn union(sets: Vec<SetSpec<T>>) -> Result<Self> {
        SetSpec::Union { sets }.validated()
    }

    pub fn intersection(sets: Vec<SetSpec<T>>) -> Result<Self> {
        SetSpec::Intersection { sets }.validated()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: SetSpec<T> = serde_json::from_str(s)?;
        raw.validated()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("set descriptions always serialize")
    }

    /// Ambient dimension. Only meaningful on validated sets.
    pub fn dim(&self) -> usize {
        match self {
            SetSpec::Affine { basepoint, .. } => basepoint.dim(),
            SetSpec::HalfSpace { normal, .. } => normal.dim(),
            SetSpec::Ball { center, .. } | SetSpec::Sphere { center, .. } => center.dim(),
            SetSpec::Polyhedron { half_spaces } => half_spaces.first().map_or(0, |h| h.normal.dim()),
            SetSpec::Region { vertex, .. } => vertex.dim(),
            SetSpec::Union { sets } | SetSpec::Intersection { sets } => sets.first().map_or(0, |s| s.dim()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            SetSpec::Union { sets } | SetSpec::Intersection { sets } => {
                1 + sets.iter().map(|s| s.depth()).max().unwrap_or(0)
            }
            _ => 0,
        }
    }

    /// True when the set is convex by construction.
    pub fn is_convex(&self) -> bool {
        match self {
            SetSpec::Affine { .. } | SetSpec::HalfSpace { .. } | SetSpec::Ball { .. } | SetSpec::Polyhedron { .. } => true,
            SetSpec::Sphere { radius, .. } => *radius == T::zero(),
            SetSpec::Region { shape, .. } => *shape == RegionShape::ParabolaEpigraph,
            SetSpec::Union { sets } => sets.len() == 1 && sets[0].is_convex(),
            SetSpec::Intersection { sets } => sets.iter().all(|s| s.is_convex()),
        }
    }

    /// True when the set is an intersection of finitely many half-spaces and
    /// hyperplanes.
    pub fn is_polyhedral(&self) -> bool {
        match self {
            SetSpec::Affine { .. } | SetSpec::HalfSpace { .. } | SetSpec::Polyhedron { .. } => true,
            SetSpec::Intersection { sets } => sets.iter().all(|s| s.is_polyhedral()),
            SetSpec::Union { sets } => sets.len() == 1 && sets[0].is_polyhedral(),
            _ => false,
        }
    }

    /// Checks invariants and returns a normalized copy: unit half-space
    /// normals, orthonormal affine bases, nonempty polyhedra and intersections.
    pub fn validated(&self) -> Result<Self> {
        self.validated_with_depth(DEFAULT_MAX_DEPTH)
    }

    pub fn validated_with_depth(&self, max_depth: usize) -> Result<Self> {
        if self.depth() > max_depth {
            return Err(Error::InvalidSet(format!(
                "nesting depth {} exceeds limit {max_depth}",
                self.depth()
            )));
        }
        let out = self.normalize()?;
        // Nonemptiness of the composite variants is checked by projecting the
        // origin; the primitive variants are nonempty by construction.
        if matches!(out, SetSpec::Polyhedron { .. } | SetSpec::Intersection { .. }) {
            out.project(&Vector::zeros(out.dim()))?;
        }
        Ok(out)
    }

    fn normalize(&self) -> Result<Self> {
        let finite = |v: &Vector<T>, what: &'static str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::NonFinite(what))
            }
        };
        let nonempty_dim = |n: usize| {
            if n == 0 {
                Err(Error::InvalidSet("dimension must be at least 1".into()))
            } else {
                Ok(())
            }
        };
        Ok(match self {
            SetSpec::Affine { basepoint, basis } => {
                nonempty_dim(basepoint.dim())?;
                finite(basepoint, "affine basepoint")?;
                for b in basis {
                    b.check_dim(basepoint.dim())?;
                    finite(b, "affine basis")?;
                }
                let q = orthonormalize(basis, T::of(1e-9));
                if q.len() != basis.len() {
                    return Err(Error::InvalidSet("affine basis vectors are linearly dependent".into()));
                }
                SetSpec::Affine { basepoint: basepoint.clone(), basis: q }
            }
            SetSpec::HalfSpace { normal, offset } => {
                let h = normalize_half_space(normal, *offset)?;
                SetSpec::HalfSpace { normal: h.normal, offset: h.offset }
            }
            SetSpec::Ball { center, radius } | SetSpec::Sphere { center, radius } => {
                nonempty_dim(center.dim())?;
                finite(center, "center")?;
                if !(radius.is_finite() && *radius >= T::zero()) {
                    return Err(Error::InvalidSet("radius must be finite and nonnegative".into()));
                }
                if matches!(self, SetSpec::Ball { .. }) {
                    SetSpec::Ball { center: center.clone(), radius: *radius }
                } else {
                    SetSpec::Sphere { center: center.clone(), radius: *radius }
                }
            }
            SetSpec::Polyhedron { half_spaces } => {
                if half_spaces.is_empty() {
                    return Err(Error::InvalidSet("polyhedron needs at least one half-space".into()));
                }
                let n = half_spaces[0].normal.dim();
                let hs = half_spaces
                    .iter()
                    .map(|h| {
                        h.normal.check_dim(n)?;
                        normalize_half_space(&h.normal, h.offset)
                    })
                    .collect::<Result<Vec<_>>>()?;
                SetSpec::Polyhedron { half_spaces: hs }
            }
            SetSpec::Region { shape, vertex, curvature } => {
                if vertex.dim() < 2 {
                    return Err(Error::InvalidSet("paraboloid regions need dimension >= 2".into()));
                }
                finite(vertex, "region vertex")?;
                if !(curvature.is_finite() && *curvature > T::zero()) {
                    return Err(Error::InvalidSet("region curvature must be positive".into()));
                }
                SetSpec::Region { shape: *shape, vertex: vertex.clone(), curvature: *curvature }
            }
            SetSpec::Union { sets } | SetSpec::Intersection { sets } => {
                if sets.is_empty() {
                    return Err(Error::InvalidSet("union/intersection needs at least one member".into()));
                }
                let members = sets.iter().map(|s| s.normalize()).collect::<Result<Vec<_>>>()?;
                let n = members[0].dim();
                for m in &members {
                    if m.dim() != n {
                        return Err(Error::DimensionMismatch { expected: n, got: m.dim() });
                    }
                }
                if matches!(self, SetSpec::Union { .. }) {
                    SetSpec::Union { sets: members }
                } else {
                    SetSpec::Intersection { sets: members }
                }
            }
        })
    }

    /// The set `self + v`.
    pub fn translated(&self, v: &Vector<T>) -> Self {
        match self {
            SetSpec::Affine { basepoint, basis } => SetSpec::Affine {
                basepoint: basepoint + v,
                basis: basis.clone(),
            },
            SetSpec::HalfSpace { normal, offset } => SetSpec::HalfSpace {
                normal: normal.clone(),
                offset: *offset + normal.dot(v),
            },
            SetSpec::Ball { center, radius } => SetSpec::Ball { center: center + v, radius: *radius },
            SetSpec::Sphere { center, radius } => SetSpec::Sphere { center: center + v, radius: *radius },
            SetSpec::Polyhedron { half_spaces } => SetSpec::Polyhedron {
                half_spaces: half_spaces
                    .iter()
                    .map(|h| HalfSpace { normal: h.normal.clone(), offset: h.offset + h.normal.dot(v) })
                    .collect(),
            },
            SetSpec::Region { shape, vertex, curvature } => SetSpec::Region {
                shape: *shape,
                vertex: vertex + v,
                curvature: *curvature,
            },
            SetSpec::Union { sets } => SetSpec::Union { sets: sets.iter().map(|s| s.translated(v)).collect() },
            SetSpec::Intersection { sets } => SetSpec::Intersection {
                sets: sets.iter().map(|s| s.translated(v)).collect(),
            },
        }
    }

    /// The set `c * self` for `c > 0` (dilation about the origin).
    pub fn scaled(&self, c: T) -> Self {
        match self {
            SetSpec::Affine { basepoint, basis } => SetSpec::Affine {
                basepoint: basepoint.scaled(c),
                basis: basis.clone(),
            },
            SetSpec::HalfSpace { normal, offset } => SetSpec::HalfSpace { normal: normal.clone(), offset: *offset * c },
            SetSpec::Ball { center, radius } => SetSpec::Ball { center: center.scaled(c), radius: *radius * c },
            SetSpec::Sphere { center, radius } => SetSpec::Sphere { center: center.scaled(c), radius: *radius * c },
            SetSpec::Polyhedron { half_spaces } => SetSpec::Polyhedron {
                half_spaces: half_spaces
                    .iter()
                    .map(|h| HalfSpace { normal: h.normal.clone(), offset: h.offset * c })
                    .collect(),
            },
            // y_n = k |y'|^2 scales to y_n = (k / c) |y'|^2.
            SetSpec::Region { shape, vertex, curvature } => SetSpec::Region {
                shape: *shape,
                vertex: vertex.scaled(c),
                curvature: *curvature / c,
            },
            SetSpec::Union { sets } => SetSpec::Union { sets: sets.iter().map(|s| s.scaled(c)).collect() },
            SetSpec::Intersection { sets } => SetSpec::Intersection {
                sets: sets.iter().map(|s| s.scaled(c)).collect(),
            },
        }
    }

    /// Membership within [`MEMBERSHIP_TOL`].
    pub fn contains(&self, x: &Vector<T>) -> Result<bool> {
        Ok(self.distance(x)? <= T::of(MEMBERSHIP_TOL))
    }

    /// Converts the scalar type (e.g. to evaluate an `f64` scene in `f32`).
    pub fn cast<U: Real>(&self) -> SetSpec<U> {
        let cv = |v: &Vector<T>| Vector::<U>::new(v.iter().map(|c| U::of(c.to_f64_lossy())).collect());
        let cs = |s: T| U::of(s.to_f64_lossy());
        match self {
            SetSpec::Affine { basepoint, basis } => SetSpec::Affine {
                basepoint: cv(basepoint),
                basis: basis.iter().map(cv).collect(),
            },
            SetSpec::HalfSpace { normal, offset } => SetSpec::HalfSpace { normal: cv(normal), offset: cs(*offset) },
            SetSpec::Ball { center, radius } => SetSpec::Ball { center: cv(center), radius: cs(*radius) },
            SetSpec::Sphere { center, radius } => SetSpec::Sphere { center: cv(center), radius: cs(*radius) },
            SetSpec::Polyhedron { half_spaces } => SetSpec::Polyhedron {
                half_spaces: half_spaces
                    .iter()
                    .map(|h| HalfSpace { normal: cv(&h.normal), offset: cs(h.offset) })
                    .collect(),
            },
            SetSpec::Region { shape, vertex, curvature } => SetSpec::Region {
                shape: *shape,
                vertex: cv(vertex),
                curvature: cs(*curvature),
            },
            SetSpec::Union { sets } => SetSpec::Union { sets: sets.iter().map(|s| s.cast()).collect() },
            SetSpec::Intersection { sets } => SetSpec::Intersection { sets: sets.iter().map(|s| s.cast()).collect() },
        }
    }

    pub(crate) fn check_point(&self, x: &Vector<T>) -> Result<()> {
        x.check_dim(self.dim())?;
        if !x.is_finite() {
            return Err(Error::NonFinite("query point"));
        }
        Ok(())
    }
}

fn normalize_half_space<T: Real>(normal: &Vector<T>, offset: T) -> Result<HalfSpace<T>> {
    if normal.dim() == 0 {
        return Err(Error::InvalidSet("dimension must be at least 1".into()));
    }
    if !normal.is_finite() || !offset.is_finite() {
        return Err(Error::NonFinite("half-space"));
    }
    let n = normal.norm();
    if n == T::zero() {
        return Err(Error::InvalidSet("half-space normal must be nonzero".into()));
    }
    Ok(HalfSpace { normal: normal.scaled(T::one() / n), offset: offset / n })
}
