//! Sampling estimators for the transversality constants of a pair of sets
//! over a shrinking-radius schedule.
//!
//! Every per-radius value is a minimum over finitely many feasible samples,
//! hence an upper bound of the true infimum at that radius.

mod dual;
mod ordering;
mod primal;
mod product;
pub(crate) mod sampler;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_set_points, SetSpec, MEMBERSHIP_TOL};
use crate::scalar::Real;
use crate::vector::Vector;

pub use dual::{estimate_angle_itr, estimate_itr, estimate_itr_c, estimate_itr_w};
pub use ordering::{check_orderings, OrderingCheck, OrderingReport};
pub use primal::{estimate_str, estimate_tr, intersection_distance, IntersectionDistance};
pub use product::{estimate_itr_p, product_diag_distance, truncated_projection, ProductDistance};
pub use sampler::{sample_normal_pairs, segment_min_norm, SamplerMode, Triple};

/// Relative threshold separating `A∖B` from `A ∩ B` during sampling.
pub const EXCLUSION_REL: f64 = 1e-12;

/// A pair of closed sets with a common reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Scene<T> {
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub a: SetSpec<T>,
    pub b: SetSpec<T>,
    pub xbar: Vector<T>,
    /// Optional exact description of `A ∩ B`, used for intersection distances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intersection: Option<SetSpec<T>>,
    #[serde(default)]
    pub ambient_dim: usize,
}

impl<T: Real> Scene<T> {
    pub fn new(
        id: impl Into<String>,
        a: SetSpec<T>,
        b: SetSpec<T>,
        xbar: Vector<T>,
        intersection: Option<SetSpec<T>>,
    ) -> Result<Self> {
        Scene { id: id.into(), description: String::new(), a, b, xbar, intersection, ambient_dim: 0 }.validated()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Scene<T> = serde_json::from_str(s)?;
        raw.validated()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenes always serialize")
    }

    pub fn dim(&self) -> usize {
        self.xbar.dim()
    }

    /// Validates both sets, the reference point and the intersection oracle.
    pub fn validated(&self) -> Result<Self> {
        let a = self.a.validated()?;
        let b = self.b.validated()?;
        let n = self.xbar.dim();
        if n == 0 {
            return Err(Error::InvalidSet("scene dimension must be at least 1".into()));
        }
        if !self.xbar.is_finite() {
            return Err(Error::NonFinite("scene reference point"));
        }
        for s in [&a, &b] {
            if s.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.dim() });
            }
        }
        if self.ambient_dim != 0 && self.ambient_dim != n {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim, got: n });
        }
        for (name, s) in [("A", &a), ("B", &b)] {
            let d = s.distance(&self.xbar)?;
            if d > T::of(MEMBERSHIP_TOL) {
                return Err(Error::Precondition(format!(
                    "reference point is not in {name} (distance {:e})",
                    d.to_f64_lossy()
                )));
            }
        }
        let intersection = match &self.intersection {
            Some(i) => {
                let i = i.validated()?;
                if i.dim() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: i.dim() });
                }
                // Spot check: oracle points near xbar must lie in both sets.
                let pts = sample_set_points(&i, &self.xbar, T::one(), 32, 0x1c7)?;
                if pts.points.is_empty() {
                    return Err(Error::InvalidSet("intersection oracle has no points near the reference point".into()));
                }
                for p in &pts.points {
                    if !a.contains(p)? || !b.contains(p)? {
                        return Err(Error::InvalidSet("intersection oracle is not contained in both sets".into()));
                    }
                }
                Some(i)
            }
            None => None,
        };
        Ok(Scene {
            id: self.id.clone(),
            description: self.description.clone(),
            a,
            b,
            xbar: self.xbar.clone(),
            intersection,
            ambient_dim: n,
        })
    }

    /// The scene dilated by `c > 0` about the origin.
    pub fn scaled(&self, c: T) -> Self {
        Scene {
            id: self.id.clone(),
            description: self.description.clone(),
            a: self.a.scaled(c),
            b: self.b.scaled(c),
            xbar: self.xbar.scaled(c),
            intersection: self.intersection.as_ref().map(|s| s.scaled(c)),
            ambient_dim: self.ambient_dim,
        }
    }

    /// `a ∈ A∖B` at sampling radius `radius`: `dist(a, B)` must exceed
    /// [`EXCLUSION_REL`]` * radius`. An absolute threshold would cut off
    /// boundary points whose distance to the other set is quadratic in the
    /// radius (tangential pairs).
    pub fn in_a_only(&self, a: &Vector<T>, radius: T) -> Result<bool> {
        Ok(self.b.distance(a)? > T::of(EXCLUSION_REL) * radius)
    }

    pub fn in_b_only(&self, b: &Vector<T>, radius: T) -> Result<bool> {
        Ok(self.a.distance(b)? > T::of(EXCLUSION_REL) * radius)
    }
}

/// Shrinking radii with per-radius sample budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct RadiusSchedule<T> {
    pub radii: Vec<T>,
    pub samples_per_radius: usize,
    /// Slack on relaxed normal-cone membership, per radius. Defaults to
    /// `radius^2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<Vec<T>>,
    pub seed: u64,
}

impl<T: Real> RadiusSchedule<T> {
    /// `count` radii `delta0 * factor^k`.
    pub fn geometric(delta0: T, factor: T, count: usize, samples_per_radius: usize, seed: u64) -> Result<Self> {
        let mut radii = Vec::with_capacity(count);
        let mut r = delta0;
        for _ in 0..count {
            radii.push(r);
            r = r * factor;
        }
        RadiusSchedule { radii, samples_per_radius, relaxation: None, seed }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.radii.is_empty() {
            return Err(Error::InvalidSet("radius schedule is empty".into()));
        }
        if self.samples_per_radius == 0 {
            return Err(Error::InvalidSet("samples_per_radius must be at least 1".into()));
        }
        if self.radii.iter().any(|r| !(r.is_finite() && *r > T::zero())) {
            return Err(Error::InvalidSet("radii must be finite and positive".into()));
        }
        if self.radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidSet("radii must be strictly decreasing".into()));
        }
        if let Some(rel) = &self.relaxation {
            if rel.len() != self.radii.len() || rel.iter().any(|s| !(s.is_finite() && *s > T::zero())) {
                return Err(Error::InvalidSet("relaxation needs one positive slack per radius".into()));
            }
        }
        Ok(self)
    }

    pub fn slack(&self, k: usize) -> T {
        match &self.relaxation {
            Some(r) => r[k],
            None => self.radii[k] * self.radii[k],
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        RadiusSchedule {
            radii: self.radii.iter().map(|r| *r * c).collect(),
            samples_per_radius: self.samples_per_radius,
            relaxation: self.relaxation.as_ref().map(|v| v.iter().map(|s| *s * c * c).collect()),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantKind {
    Str,
    Tr,
    Itr,
    ItrW,
    ItrC,
    ItrP,
    AngleItr,
}

impl ConstantKind {
    pub const ALL: [ConstantKind; 7] = [
        ConstantKind::Str,
        ConstantKind::Tr,
        ConstantKind::Itr,
        ConstantKind::ItrW,
        ConstantKind::ItrC,
        ConstantKind::ItrP,
        ConstantKind::AngleItr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstantKind::Str => "str",
            ConstantKind::Tr => "tr",
            ConstantKind::Itr => "itr",
            ConstantKind::ItrW => "itr_w",
            ConstantKind::ItrC => "itr_c",
            ConstantKind::ItrP => "itr_p",
            ConstantKind::AngleItr => "angle_itr",
        }
    }
}

impl fmt::Display for ConstantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConstantKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ConstantKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown constant kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct RadiusValue<T> {
    pub radius: T,
    pub value: T,
    pub feasible_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Samples whose value rests on a heuristic (e.g. an empty translated
    /// intersection counted as ratio 0, or an alternating-projection distance).
    pub flagged_samples: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ConstantEstimate<T> {
    pub kind: ConstantKind,
    pub scene_id: String,
    pub per_radius: Vec<RadiusValue<T>>,
    /// Value at the smallest radius.
    pub extrapolated: T,
    /// Largest change between the last three per-radius values.
    pub drift: T,
    pub empty_feasible: bool,
    pub diagnostics: Diagnostics,
}

impl<T: Real> ConstantEstimate<T> {
    pub(crate) fn assemble(
        kind: ConstantKind,
        scene: &Scene<T>,
        per_radius: Vec<RadiusValue<T>>,
        diagnostics: Diagnostics,
    ) -> Self {
        let empty_feasible = per_radius.iter().all(|r| r.feasible_count == 0);
        let extrapolated = if empty_feasible {
            T::one()
        } else {
            per_radius.last().map_or(T::one(), |r| r.value)
        };
        let tail: Vec<T> = per_radius.iter().rev().take(3).map(|r| r.value).collect();
        let drift = tail.windows(2).map(|w| (w[0] - w[1]).abs()).fold(T::zero(), T::max);
        ConstantEstimate {
            kind,
            scene_id: scene.id.clone(),
            per_radius,
            extrapolated,
            drift,
            empty_feasible,
            diagnostics,
        }
    }

    pub fn values(&self) -> Vec<T> {
        self.per_radius.iter().map(|r| r.value).collect()
    }

    pub fn total_feasible(&self) -> usize {
        self.per_radius.iter().map(|r| r.feasible_count).sum()
    }
}

/// An admissible normal pair `(x1*, x2*)` at `(a, b, x)` with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct NormalPairSample<T> {
    pub a: Vector<T>,
    pub b: Vector<T>,
    pub x: Vector<T>,
    pub x1s: Vector<T>,
    pub x2s: Vector<T>,
    /// `|x - a| / |x - b|`
    pub ratio: T,
    pub align1: T,
    pub align2: T,
    pub cone_residual1: T,
    pub cone_residual2: T,
}

impl<T: Real> NormalPairSample<T> {
    pub fn sum_norm(&self) -> T {
        (&self.x1s + &self.x2s).norm()
    }

    pub(crate) fn build(
        a: &Vector<T>,
        b: &Vector<T>,
        x: &Vector<T>,
        x1s: Vector<T>,
        x2s: Vector<T>,
        cone_residual1: T,
        cone_residual2: T,
    ) -> Self {
        let da = x - a;
        let db = x - b;
        NormalPairSample {
            ratio: da.norm() / db.norm(),
            align1: x1s.cosine(&da).unwrap_or(T::one()),
            align2: x2s.cosine(&db).unwrap_or(T::one()),
            a: a.clone(),
            b: b.clone(),
            x: x.clone(),
            x1s,
            x2s,
            cone_residual1,
            cone_residual2,
        }
    }
}

/// Evaluates `f(radius_index, radius, sample_index)` over the whole schedule
/// (samples in parallel) and reduces each radius to its minimum. A sample
/// returns `None` when infeasible and `Some((value, flagged))` otherwise.
pub(crate) fn sweep<T, F>(sched: &RadiusSchedule<T>, f: F) -> Result<(Vec<RadiusValue<T>>, usize)>
where
    T: Real,
    F: Fn(usize, T, u64) -> Result<Option<(T, bool)>> + Sync,
{
    use rayon::prelude::*;
    let mut out = Vec::with_capacity(sched.radii.len());
    let mut flagged = 0;
    for (k, &radius) in sched.radii.iter().enumerate() {
        let vals: Vec<Option<(T, bool)>> = (0..sched.samples_per_radius as u64)
            .into_par_iter()
            .map(|i| f(k, radius, i))
            .collect::<Result<_>>()?;
        let mut best = T::one();
        let mut count = 0;
        for (v, fl) in vals.into_iter().flatten() {
            count += 1;
            flagged += fl as usize;
            best = best.min(v.clamp_to(T::zero(), T::one()));
        }
        out.push(RadiusValue { radius, value: best, feasible_count: count });
    }
    Ok((out, flagged))
}

/// Runs the estimator for `kind`.
pub fn estimate<T: Real>(kind: ConstantKind, scene: &Scene<T>, sched: &RadiusSchedule<T>) -> Result<ConstantEstimate<T>> {
    match kind {
        ConstantKind::Str => estimate_str(scene, sched),
        ConstantKind::Tr => estimate_tr(scene, sched),
        ConstantKind::Itr => estimate_itr(scene, sched),
        ConstantKind::ItrW => estimate_itr_w(scene, sched),
        ConstantKind::ItrC => estimate_itr_c(scene, sched),
        ConstantKind::ItrP => estimate_itr_p(scene, sched),
        ConstantKind::AngleItr => estimate_angle_itr(scene, sched),
    }
}
