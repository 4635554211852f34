//! Samplers for pairs of relative limiting normals on the unit-sum slice
//! `‖x1*‖ + ‖x2*‖ = 1`, and comparisons on the cone
//! `C = {(x1*, x2*) : <x1*, x2*> ≤ 0}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::sampler::{bisector_foot_raw, relaxed_t_interval, TripleSampler, TRIPLE_STREAM};
use crate::constants::{RadiusSchedule, Scene};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vector::Vector;

/// Pairs closer than this on the slice are merged.
pub const SLICE_MESH: f64 = 1e-2;
/// Tolerance on `<x1*, x2*> ≤ 0`.
pub const IN_C_TOL: f64 = 1e-9;
/// Default comparison tolerance, twice the mesh.
pub const COMPARE_TOL: f64 = 2.0 * SLICE_MESH;
const T_STEPS: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    Relative,
    Restricted,
}

/// One term `(a_k, b_k, x_k, x1k*, x2k*)` of a generating sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SequenceTerm<T> {
    pub radius: T,
    pub a: Vector<T>,
    pub b: Vector<T>,
    pub x: Vector<T>,
    pub x1s: Vector<T>,
    pub x2s: Vector<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SlicePair<T> {
    pub x1s: Vector<T>,
    pub x2s: Vector<T>,
    pub in_c: bool,
    /// Index into [`ConeSample::sequences`].
    pub provenance: usize,
}

impl<T: Real> SlicePair<T> {
    pub fn sum_norm(&self) -> T {
        (&self.x1s + &self.x2s).norm()
    }

    fn dist(&self, other: &Self) -> T {
        let d1 = self.x1s.dist(&other.x1s);
        let d2 = self.x2s.dist(&other.x2s);
        (d1 * d1 + d2 * d2).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ConeSample<T> {
    pub basepoint: Vector<T>,
    pub kind: ConeKind,
    pub pairs: Vec<SlicePair<T>>,
    pub sequences: Vec<Vec<SequenceTerm<T>>>,
}

impl<T: Real> ConeSample<T> {
    /// The generating sequence of pair `i`.
    pub fn sequence(&self, i: usize) -> Option<&[SequenceTerm<T>]> {
        let p = self.pairs.get(i)?;
        self.sequences.get(p.provenance).map(|s| s.as_slice())
    }
}

fn t_grid<T: Real>() -> impl Iterator<Item = T> {
    (1..=T_STEPS).map(|j| T::of(j as f64 / (T_STEPS + 1) as f64))
}

/// Terms at one radius for every `t` of the grid (`None` where infeasible).
fn terms_at<T: Real>(
    sampler: &TripleSampler<'_, T>,
    kind: ConeKind,
    radius: T,
    slack: T,
    index: u64,
) -> Result<Vec<Option<SequenceTerm<T>>>> {
    let mut out = vec![None; T_STEPS];
    let Some(tr) = sampler.draw(radius, index, None)? else { return Ok(out) };
    let ratio = tr.x.dist(&tr.a) / tr.x.dist(&tr.b);
    let tr = if kind == ConeKind::Relative && (ratio - T::one()).abs() < radius {
        tr
    } else {
        let x = bisector_foot_raw(&tr.a, &tr.b, &tr.x);
        match sampler.finish(tr.a, tr.b, x, radius, tr.mode)? {
            Some(t) => t,
            None => return Ok(out),
        }
    };
    let (Some(w1), Some(w2)) = ((&tr.x - &tr.a).normalized(), (&tr.x - &tr.b).normalized()) else { return Ok(out) };
    let (u1, u2, lo, hi) = match kind {
        ConeKind::Relative => {
            let cap = T::one() - radius;
            let (Some(u1), Some(u2)) = (tr.fan_a.nearest(&w1).normalized(), tr.fan_b.nearest(&w2).normalized()) else {
                return Ok(out);
            };
            if u1.dot(&w1) <= cap || u2.dot(&w2) <= cap {
                return Ok(out);
            }
            (u1, u2, T::zero(), T::one())
        }
        ConeKind::Restricted => {
            let Some((lo, hi)) = relaxed_t_interval(tr.fan_a.residual(&w1), tr.fan_b.residual(&w2), slack) else {
                return Ok(out);
            };
            (w1, w2, lo, hi)
        }
    };
    for (slot, t) in out.iter_mut().zip(t_grid::<T>()) {
        if t >= lo && t <= hi {
            *slot = Some(SequenceTerm {
                radius,
                a: tr.a.clone(),
                b: tr.b.clone(),
                x: tr.x.clone(),
                x1s: u1.scaled(t),
                x2s: u2.scaled(T::one() - t),
            });
        }
    }
    Ok(out)
}

fn sample_cone<T: Real>(scene: &Scene<T>, sched: &RadiusSchedule<T>, kind: ConeKind) -> Result<ConeSample<T>> {
    let sampler = TripleSampler::new(scene, sched.seed, TRIPLE_STREAM);
    let last = sched.radii.len() - 1;
    // Sequences indexed by (sample, t): terms along the schedule, ending at
    // the smallest radius.
    let per_sample: Vec<Vec<Vec<SequenceTerm<T>>>> = (0..sched.samples_per_radius as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<Vec<SequenceTerm<T>>>> {
            let mut seqs: Vec<Vec<SequenceTerm<T>>> = vec![Vec::new(); T_STEPS];
            for (k, &r) in sched.radii.iter().enumerate() {
                let terms = terms_at(&sampler, kind, r, sched.slack(k), i)?;
                if k == last && terms.iter().all(|t| t.is_none()) {
                    return Ok(Vec::new());
                }
                for (s, t) in seqs.iter_mut().zip(terms) {
                    if let Some(t) = t {
                        s.push(t);
                    }
                }
            }
            Ok(seqs
                .into_iter()
                .filter(|s| !s.is_empty() && s.last().map_or(false, |t| t.radius == sched.radii[last]))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut candidates: Vec<Vec<SequenceTerm<T>>> = per_sample.into_iter().flatten().collect();
    let key = |s: &Vec<SequenceTerm<T>>| {
        let t = s.last().expect("sequences are nonempty");
        let mut k = t.x1s.coords().to_vec();
        k.extend_from_slice(t.x2s.coords());
        Vector::new(k)
    };
    candidates.sort_by(|p, q| key(p).lex_cmp(&key(q)));
    let mesh = T::of(SLICE_MESH);
    let mut pairs: Vec<SlicePair<T>> = Vec::new();
    let mut sequences = Vec::new();
    for seq in candidates {
        let t = seq.last().expect("sequences are nonempty");
        let p = SlicePair {
            x1s: t.x1s.clone(),
            x2s: t.x2s.clone(),
            in_c: t.x1s.dot(&t.x2s) <= T::of(IN_C_TOL),
            provenance: sequences.len(),
        };
        if pairs.iter().any(|q| q.in_c == p.in_c && q.dist(&p) < mesh) {
            continue;
        }
        pairs.push(p);
        sequences.push(seq);
    }
    Ok(ConeSample { basepoint: scene.xbar.clone(), kind, pairs, sequences })
}

/// Pairs of relative limiting normals: exact proximal normals at
/// `a_k ∈ A∖B`, `b_k ∈ B∖A`, with distance ratio and alignments tending to
/// 1 along the schedule.
pub fn sample_relative_cone<T: Real>(scene: &Scene<T>, sched: &RadiusSchedule<T>) -> Result<ConeSample<T>> {
    sample_cone(scene, sched, ConeKind::Relative)
}

/// Restricted pairs: equidistant `x_k`, exactly aligned normals, cone
/// residuals below the schedule's slack.
pub fn sample_restricted_cone<T: Real>(scene: &Scene<T>, sched: &RadiusSchedule<T>) -> Result<ConeSample<T>> {
    sample_cone(scene, sched, ConeKind::Restricted)
}

/// The pairs with `<x1*, x2*> ≤ tol`.
pub fn restrict_to_c<T: Real>(sample: &ConeSample<T>, tol: T) -> ConeSample<T> {
    let mut out = ConeSample { basepoint: sample.basepoint.clone(), kind: sample.kind, pairs: Vec::new(), sequences: Vec::new() };
    for p in &sample.pairs {
        if p.x1s.dot(&p.x2s) <= tol {
            let mut q = p.clone();
            q.in_c = true;
            q.provenance = out.sequences.len();
            out.sequences.push(sample.sequences.get(p.provenance).cloned().unwrap_or_default());
            out.pairs.push(q);
        }
    }
    out
}

/// `min ‖x1* + x2*‖` over the stored pairs; 1 for an empty sample.
pub fn cone_min_sum_norm<T: Real>(sample: &ConeSample<T>) -> T {
    sample.pairs.iter().map(|p| p.sum_norm()).fold(T::one(), T::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeComparison {
    /// `sup` over relative pairs in `C` of the distance to the nearest
    /// restricted pair in `C`.
    pub discrepancy: f64,
    pub min_relative: f64,
    pub min_restricted: f64,
    pub relative_pairs: usize,
    pub restricted_pairs: usize,
    pub tol: f64,
    pub passed: bool,
}

pub fn compare_cones_on_c<T: Real>(rel: &ConeSample<T>, res: &ConeSample<T>, tol: T) -> Result<ConeComparison> {
    if rel.basepoint != res.basepoint {
        return Err(Error::Precondition("cone samples have different basepoints".into()));
    }
    let ctol = T::of(IN_C_TOL);
    let rc = restrict_to_c(rel, ctol);
    let sc = restrict_to_c(res, ctol);
    let discrepancy = rc
        .pairs
        .iter()
        .map(|p| sc.pairs.iter().map(|q| p.dist(q)).fold(T::infinity(), T::min))
        .fold(T::zero(), T::max)
        .to_f64_lossy();
    let min_relative = cone_min_sum_norm(&rc).to_f64_lossy();
    let min_restricted = cone_min_sum_norm(&sc).to_f64_lossy();
    let tol = tol.to_f64_lossy();
    Ok(ConeComparison {
        discrepancy,
        min_relative,
        min_restricted,
        relative_pairs: rc.pairs.len(),
        restricted_pairs: sc.pairs.len(),
        tol,
        passed: discrepancy <= tol && (min_relative - min_restricted).abs() <= tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OppositeReport {
    /// Largest `‖x*‖` with a stored pair within `tol` of `(x*, -x*)`; 0 if none.
    pub largest: f64,
    pub count: usize,
}

pub fn check_opposite_pairs<T: Real>(sample: &ConeSample<T>, tol: T) -> OppositeReport {
    let mut largest = T::zero();
    let mut count = 0;
    let r2 = T::of(std::f64::consts::SQRT_2);
    for p in &sample.pairs {
        // Nearest (x*, -x*) has x* = (x1* - x2*)/2 at distance ‖x1* + x2*‖/√2.
        if p.sum_norm() / r2 <= tol {
            count += 1;
            largest = largest.max(p.x1s.dist(&p.x2s) / T::of(2.0));
        }
    }
    OppositeReport { largest: largest.to_f64_lossy(), count }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn sched() -> RadiusSchedule<f64> {
        RadiusSchedule::geometric(0.5, 0.5, 6, 300, 2).unwrap()
    }

    #[test]
    fn axes_slice_is_orthogonal_pairs() {
        let s = corpus::scene::<f64>("perpendicular_axes").unwrap();
        let rel = sample_relative_cone(&s, &sched()).unwrap();
        assert!(!rel.pairs.is_empty());
        for p in &rel.pairs {
            assert!((p.x1s.norm() + p.x2s.norm() - 1.0).abs() < 1e-12);
            assert!(p.x1s[0].abs() < 1e-12 && p.x2s[1].abs() < 1e-12);
            assert!(p.in_c);
        }
        assert!((cone_min_sum_norm(&rel) - 0.5f64.sqrt()).abs() < 1e-12);
        let res = sample_restricted_cone(&s, &sched()).unwrap();
        let c = compare_cones_on_c(&rel, &res, COMPARE_TOL).unwrap();
        assert!(c.passed, "{c:?}");
        assert_eq!(check_opposite_pairs(&rel, 1e-2).count, 0);
    }

    #[test]
    fn identical_sets_give_empty_samples() {
        let s = corpus::scene::<f64>("identical_half_planes").unwrap();
        let rel = sample_relative_cone(&s, &sched()).unwrap();
        let res = sample_restricted_cone(&s, &sched()).unwrap();
        assert!(rel.pairs.is_empty() && res.pairs.is_empty());
        assert_eq!(cone_min_sum_norm(&rel), 1.0);
        assert_eq!(compare_cones_on_c(&rel, &res, COMPARE_TOL).unwrap().discrepancy, 0.0);
        assert_eq!(check_opposite_pairs(&rel, 1e-2).largest, 0.0);
    }

    #[test]
    fn tangential_scene_has_near_opposite_pairs() {
        let s = corpus::scene::<f64>("tangential_parabola").unwrap();
        let res = sample_restricted_cone(&s, &sched()).unwrap();
        let o = check_opposite_pairs(&res, 1e-2);
        assert!(o.count > 0 && (o.largest - 0.5).abs() < 0.05, "{o:?}");
    }

    #[test]
    fn restriction_filters_by_inner_product() {
        let mk = |a: [f64; 2], b: [f64; 2]| SlicePair {
            x1s: Vector::from_f64(&a),
            x2s: Vector::from_f64(&b),
            in_c: false,
            provenance: 0,
        };
        let s = ConeSample {
            basepoint: Vector::from_f64(&[0.0, 0.0]),
            kind: ConeKind::Relative,
            pairs: vec![mk([0.5, 0.0], [0.0, 0.5]), mk([0.5, 0.0], [0.3, 0.4]), mk([0.5, 0.0], [-0.5, 0.0])],
            sequences: vec![Vec::new()],
        };
        let c = restrict_to_c(&s, 1e-9);
        assert_eq!(c.pairs.len(), 2);
        assert_eq!(cone_min_sum_norm(&c), 0.0);
        assert_eq!(check_opposite_pairs(&c, 1e-9).largest, 0.5);
    }
}
