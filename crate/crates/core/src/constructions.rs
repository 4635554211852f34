//! The bisector construction behind the dual characterizations: the foot
//! `x'` of `x` on the perpendicular bisector of `[a, b]`, normals rescaled
//! onto `x' - a` and `x' - b`, and the inequality chain bounding how far
//! both move. Also a best-effort search for primal-dual witnesses.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::ConeSample;
use crate::constants::{product_diag_distance, truncated_projection, Scene};
use crate::error::{Error, Result};
use crate::geometry::SetSpec;
use crate::sampling::{random_in_ball, random_unit, sample_rng};
use crate::scalar::Real;
use crate::vector::Vector;

/// Strict inequalities are checked as non-strict with this margin.
pub const STRICT_MARGIN: f64 = 1e-12;
/// Bound on the equidistance and orthogonality residuals of `x'`.
pub const FOOT_TOL: f64 = 1e-10;
const CHAIN_STREAM: u64 = 0x6368_6169;
const CASE1_STREAM: u64 = 0x6361_7331;
const WITNESS_STREAM: u64 = 0x7769_746e;

/// `x - (<b - a, x - m> / |b - a|^2)(b - a)` with `m = (a + b)/2`.
pub fn bisector_foot<T: Real>(a: &Vector<T>, b: &Vector<T>, x: &Vector<T>) -> Result<Vector<T>> {
    let ba = b - a;
    if ba.norm_sq() == T::zero() {
        return Err(Error::Degenerate("bisector of a = b".into()));
    }
    let m = (a + b).scaled(T::of(0.5));
    let c = ba.dot(&(x - &m)) / ba.norm_sq();
    Ok(x.add_scaled(-c, &ba))
}

/// `(|x1*|/|x'-a|)(x'-a)` and `(|x2*|/|x'-b|)(x'-b)`.
pub fn rescale_normals<T: Real>(
    a: &Vector<T>,
    b: &Vector<T>,
    xprime: &Vector<T>,
    x1s: &Vector<T>,
    x2s: &Vector<T>,
) -> Result<(Vector<T>, Vector<T>)> {
    let (Some(u1), Some(u2)) = ((xprime - a).normalized(), (xprime - b).normalized()) else {
        return Err(Error::Degenerate("x' coincides with a or b".into()));
    };
    Ok((u1.scaled(x1s.norm()), u2.scaled(x2s.norm())))
}

fn dp_margins(beta: f64, alpha: f64, delta: f64, d: f64) -> (f64, f64) {
    let m1 = 0.5 - beta * beta - 2.0 * (d.sqrt() + d);
    let m2 = delta.min(alpha - beta) - normal_shift_factor(d);
    (m1, m2)
}

/// `sqrt(2d) + 2 sqrt((2d - d^2)/(4 - 6d + 3d^2))`: bound on the relative
/// displacement of a rescaled normal.
pub fn normal_shift_factor(d: f64) -> f64 {
    (2.0 * d).sqrt() + 2.0 * ((2.0 * d - d * d) / (4.0 - 6.0 * d + 3.0 * d * d)).sqrt()
}

/// Largest `δ' ≤ δ/3` (to bisection accuracy) with
/// `2(√δ' + δ') < 1/2 - β²` and `normal_shift_factor(δ') < min{δ, α - β}`.
/// Both left sides increase with `δ'`.
pub fn delta_prime_for(beta: f64, alpha: f64, delta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < alpha && beta < std::f64::consts::FRAC_1_SQRT_2 && delta > 0.0) {
        return Err(Error::Precondition(format!("need 0 < beta < min(alpha, 1/sqrt2) and delta > 0, got beta={beta}, alpha={alpha}, delta={delta}")));
    }
    let ok = |d: f64| {
        let (m1, m2) = dp_margins(beta, alpha, delta, d);
        m1 > 0.0 && m2 > 0.0
    };
    let top = (delta / 3.0).min(2.0 / 3.0);
    if ok(top) {
        return Ok(top);
    }
    let (mut lo, mut hi) = (0.0, top);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo < 1e-15 {
        return Err(Error::Infeasible(format!("no admissible delta' above 1e-15 for beta={beta}, alpha={alpha}, delta={delta}")));
    }
    Ok(lo)
}

/// A Case 2 configuration: `<x - a, x - b> ≤ 0`, distance ratio within
/// `1 ± δ'`, normals aligned with `x - a`, `x - b` up to cosine `1 - δ'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ConstructionInstance<T> {
    pub a: Vector<T>,
    pub b: Vector<T>,
    pub x: Vector<T>,
    pub x1s: Vector<T>,
    pub x2s: Vector<T>,
    pub delta_prime: T,
    pub m: Vector<T>,
    pub xprime: Vector<T>,
    pub x1s_prime: Vector<T>,
    pub x2s_prime: Vector<T>,
}

fn check_normals<T: Real>(x1s: &Vector<T>, x2s: &Vector<T>) -> Result<()> {
    let (n1, n2) = (x1s.norm(), x2s.norm());
    if n1 == T::zero() || n2 == T::zero() {
        return Err(Error::Precondition("normals must be nonzero".into()));
    }
    if (n1 + n2 - T::one()).abs() > T::of(STRICT_MARGIN) {
        return Err(Error::Precondition(format!("normals must satisfy |x1*| + |x2*| = 1, got {}", n1 + n2)));
    }
    Ok(())
}

fn check_alignment<T: Real>(s: &Vector<T>, d: &Vector<T>, cap: T, which: &str) -> Result<()> {
    let c = s.cosine(d).ok_or_else(|| Error::Degenerate(format!("{which}: zero vector")))?;
    if c <= cap - T::of(STRICT_MARGIN) {
        return Err(Error::Precondition(format!("{which} alignment cosine {c} not above {cap}")));
    }
    Ok(())
}

impl<T: Real> ConstructionInstance<T> {
    pub fn new(a: Vector<T>, b: Vector<T>, x: Vector<T>, x1s: Vector<T>, x2s: Vector<T>, delta_prime: T) -> Result<Self> {
        let n = a.dim();
        for v in [&b, &x, &x1s, &x2s] {
            v.check_dim(n)?;
        }
        if !(delta_prime > T::zero() && delta_prime < T::one()) {
            return Err(Error::Precondition("delta' must lie in (0, 1)".into()));
        }
        let (da, db) = (&x - &a, &x - &b);
        let scale = da.norm() * db.norm();
        if scale == T::zero() {
            return Err(Error::Degenerate("x coincides with a or b".into()));
        }
        if da.dot(&db) > T::of(STRICT_MARGIN) * scale {
            return Err(Error::Precondition("Case 2 needs <x - a, x - b> <= 0".into()));
        }
        let ratio = da.norm() / db.norm();
        let m = T::of(STRICT_MARGIN);
        if ratio <= T::one() - delta_prime - m || ratio >= T::one() + delta_prime + m {
            return Err(Error::Precondition(format!("distance ratio {ratio} outside 1 ± {delta_prime}")));
        }
        check_normals(&x1s, &x2s)?;
        let cap = T::one() - delta_prime;
        check_alignment(&x1s, &da, cap, "x1*")?;
        check_alignment(&x2s, &db, cap, "x2*")?;
        let xprime = bisector_foot(&a, &b, &x)?;
        let (x1s_prime, x2s_prime) = rescale_normals(&a, &b, &xprime, &x1s, &x2s)?;
        let mid = (&a + &b).scaled(T::of(0.5));
        Ok(ConstructionInstance { a, b, x, x1s, x2s, delta_prime, m: mid, xprime, x1s_prime, x2s_prime })
    }
}

/// One inequality `lhs ≤ rhs` of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLink {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub margin: f64,
    pub passed: bool,
}

impl ChainLink {
    fn le<T: Real>(name: &str, lhs: T, rhs: T) -> Self {
        let (l, r) = (lhs.to_f64_lossy(), rhs.to_f64_lossy());
        let passed = l <= r + STRICT_MARGIN * r.abs().max(1.0);
        ChainLink { name: name.into(), lhs: l, rhs: r, margin: r - l, passed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub links: Vec<ChainLink>,
}

impl ChainReport {
    pub fn passed(&self) -> bool {
        self.links.iter().all(|l| l.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ChainLink> {
        self.links.iter().filter(|l| !l.passed)
    }
}

/// Test hook: a deliberately wrong bisector foot (sign of the projection
/// coefficient flipped), used to check that failures are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    NegatedBisector,
}

/// Relative equidistance and orthogonality residuals of `x'`.
fn foot_residuals<T: Real>(a: &Vector<T>, b: &Vector<T>, x: &Vector<T>, xp: &Vector<T>) -> (T, T) {
    let m = (a + b).scaled(T::of(0.5));
    let scale = T::one().max(a.dist(b)).max(x.dist(&m));
    let eq = (xp.dist(a) - xp.dist(b)).abs() / scale;
    let orth = (x - xp).dot(&(xp - &m)).abs() / (scale * scale);
    (eq, orth)
}

/// Checks every link of the chain for a validated instance.
pub fn verify_construction_chain<T: Real>(inst: &ConstructionInstance<T>) -> Result<ChainReport> {
    verify_with_fault(inst, Fault::None)
}

pub fn verify_with_fault<T: Real>(inst: &ConstructionInstance<T>, fault: Fault) -> Result<ChainReport> {
    let (a, b, x, d) = (&inst.a, &inst.b, &inst.x, inst.delta_prime);
    let (xp, x1p, x2p) = match fault {
        Fault::None => (inst.xprime.clone(), inst.x1s_prime.clone(), inst.x2s_prime.clone()),
        Fault::NegatedBisector => {
            let ba = b - a;
            let c = ba.dot(&(x - &inst.m)) / ba.norm_sq();
            let xp = x.add_scaled(c, &ba);
            let (p1, p2) = rescale_normals(a, b, &xp, &inst.x1s, &inst.x2s)?;
            (xp, p1, p2)
        }
    };
    let one = T::one();
    let two = T::of(2.0);
    let (eq, orth) = foot_residuals(a, b, x, &xp);
    let shift = x.dist(&xp);
    let shift2 = shift * shift;
    let (ra, rb) = (x.dist(a), x.dist(b));
    let num = two * d - d * d;
    let step1 = num / (T::of(4.0) * (one - d) * (one - d)) * (ra * ra).min(rb * rb);
    let step2 = (T::of(4.0) - T::of(6.0) * d + T::of(3.0) * d * d) / num;
    let combined = T::of(normal_shift_factor(d.to_f64_lossy()));
    let dir_change = |p: &Vector<T>| -> T {
        let u = (&xp - p).normalized().unwrap_or_else(|| Vector::zeros(p.dim()));
        let w = (x - p).normalized().unwrap_or_else(|| Vector::zeros(p.dim()));
        u.dist(&w)
    };
    let links = vec![
        ChainLink::le("equidistance", eq, T::of(FOOT_TOL)),
        ChainLink::le("orthogonality", orth, T::of(FOOT_TOL)),
        ChainLink::le("step1", shift2, step1),
        ChainLink::le("step2_a", step2 * shift2, xp.dist(a) * xp.dist(a)),
        ChainLink::le("step2_b", step2 * shift2, xp.dist(b) * xp.dist(b)),
        ChainLink::le("step3_a", dir_change(a), two * shift / xp.dist(a)),
        ChainLink::le("step3_b", dir_change(b), two * shift / xp.dist(b)),
        ChainLink::le("combined_a", x1p.dist(&inst.x1s), inst.x1s.norm() * combined),
        ChainLink::le("combined_b", x2p.dist(&inst.x2s), inst.x2s.norm() * combined),
    ];
    Ok(ChainReport { links })
}

/// A unit vector whose cosine with the unit vector `u` is `c`.
fn tilted<T: Real, R: Rng>(rng: &mut R, u: &Vector<T>, c: f64) -> Vector<T> {
    loop {
        let r: Vector<T> = random_unit(rng, u.dim());
        let v = r.add_scaled(-r.dot(u), u);
        if let Some(v) = v.normalized() {
            let s = (1.0 - c * c).max(0.0).sqrt();
            return u.scaled(T::of(c)).add_scaled(T::of(s), &v);
        }
    }
}

/// Normals `t w1`, `(1 - t) w2` with `w_i` inside the alignment caps.
fn capped_normals<T: Real, R: Rng>(rng: &mut R, da: &Vector<T>, db: &Vector<T>, dp: f64) -> Option<(Vector<T>, Vector<T>)> {
    let (u1, u2) = (da.normalized()?, db.normalized()?);
    let c1 = 1.0 - dp * rng.gen_range(0.0..0.999_999);
    let c2 = 1.0 - dp * rng.gen_range(0.0..0.999_999);
    let t = T::of(rng.gen_range(0.05..0.95));
    Some((tilted(rng, &u1, c1).scaled(t), tilted(rng, &u2, c2).scaled(T::one() - t)))
}

/// How random Case 2 instances place `x` in the ratio band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceMode {
    /// Shrink `x` towards `x'` until the ratio enters the band.
    Shrink,
    /// Put the ratio within 1e-12 of an edge of the band.
    Boundary,
}

/// Acceptance statistics of the rejection sampler.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub attempts: usize,
    pub accepted: usize,
}

fn ratio_at<T: Real>(a: &Vector<T>, b: &Vector<T>, xp: &Vector<T>, dir: &Vector<T>, s: T) -> T {
    let y = xp.add_scaled(s, dir);
    y.dist(a) / y.dist(b)
}

/// Draws instance `index` of the randomized corpus in dimension `n`.
/// Returns `None` (counted as a rejection) when a draw is infeasible.
pub fn random_case2_instance<T: Real>(seed: u64, index: u64, n: usize, dp: T, mode: InstanceMode) -> Result<Option<ConstructionInstance<T>>> {
    let mut rng = sample_rng(seed, CHAIN_STREAM, index);
    let a: Vector<T> = random_in_ball(&mut rng, n);
    let b: Vector<T> = random_in_ball(&mut rng, n);
    if a.dist(&b) < T::of(1e-3) {
        return Ok(None);
    }
    // x in the ball with diameter [a, b] gives <x - a, x - b> <= 0.
    let m = (&a + &b).scaled(T::of(0.5));
    let w: Vector<T> = random_in_ball(&mut rng, n);
    let x = m.add_scaled(a.dist(&b) * T::of(0.5), &w);
    let xp = bisector_foot(&a, &b, &x)?;
    let dir = &x - &xp;
    let band = |r: T| (r - T::one()).abs() < dp;
    let s = match mode {
        InstanceMode::Shrink => {
            let mut s = T::one();
            for _ in 0..200 {
                if band(ratio_at(&a, &b, &xp, &dir, s)) {
                    break;
                }
                s = s * T::of(0.5);
            }
            s
        }
        InstanceMode::Boundary => {
            if band(ratio_at(&a, &b, &xp, &dir, T::one())) {
                return Ok(None);
            }
            let target = dp - T::of(STRICT_MARGIN);
            let (mut lo, mut hi) = (T::zero(), T::one());
            for _ in 0..200 {
                let mid = (lo + hi) * T::of(0.5);
                if (ratio_at(&a, &b, &xp, &dir, mid) - T::one()).abs() < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        }
    };
    let x = xp.add_scaled(s, &dir);
    let (da, db) = (&x - &a, &x - &b);
    let Some((x1s, x2s)) = capped_normals(&mut rng, &da, &db, dp.to_f64_lossy()) else { return Ok(None) };
    match ConstructionInstance::new(a, b, x, x1s, x2s, dp) {
        Ok(inst) => Ok(Some(inst)),
        Err(Error::Precondition(_)) | Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Outcome of the randomized chain run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRun {
    pub delta_prime: f64,
    pub instances: usize,
    pub stats: AcceptanceStats,
    /// Failing instance indices with their failing link names.
    pub failures: Vec<(u64, Vec<String>)>,
    pub max_equidistance: f64,
    pub max_orthogonality: f64,
}

impl ChainRun {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.instances > 0
    }
}

/// Verifies the chain on `count` accepted instances, alternating dimensions
/// 2 and 3, with every eighth instance drawn at the edge of the ratio band.
pub fn run_chain_corpus<T: Real>(count: usize, dp: T, seed: u64, fault: Fault) -> Result<ChainRun> {
    let batch = (count as u64).max(1) * 4;
    let draws: Vec<(u64, Option<ConstructionInstance<T>>)> = (0..batch)
        .into_par_iter()
        .map(|i| {
            let n = 2 + (i % 2) as usize;
            let mode = if i % 8 == 7 { InstanceMode::Boundary } else { InstanceMode::Shrink };
            random_case2_instance(seed, i, n, dp, mode).map(|r| (i, r))
        })
        .collect::<Result<_>>()?;
    let mut stats = AcceptanceStats::default();
    let mut accepted = Vec::with_capacity(count);
    for (i, inst) in draws {
        if accepted.len() == count {
            break;
        }
        stats.attempts += 1;
        if let Some(inst) = inst {
            accepted.push((i, inst));
        }
    }
    stats.accepted = accepted.len();
    let reports: Vec<(u64, ChainReport)> = accepted
        .par_iter()
        .map(|(i, inst)| verify_with_fault(inst, fault).map(|r| (*i, r)))
        .collect::<Result<_>>()?;
    let mut run = ChainRun {
        delta_prime: dp.to_f64_lossy(),
        instances: reports.len(),
        stats,
        failures: Vec::new(),
        max_equidistance: 0.0,
        max_orthogonality: 0.0,
    };
    for (i, r) in reports {
        run.max_equidistance = run.max_equidistance.max(r.links[0].lhs);
        run.max_orthogonality = run.max_orthogonality.max(r.links[1].lhs);
        if !r.passed() {
            run.failures.push((i, r.failures().map(|l| l.name.clone()).collect()));
        }
    }
    Ok(run)
}

/// Case 1 (`<x - a, x - b> > 0`): `|x1* + x2*|^2 > 1/2 - 2(√δ' + δ')`.
pub fn case1_bound<T: Real>(a: &Vector<T>, b: &Vector<T>, x: &Vector<T>, x1s: &Vector<T>, x2s: &Vector<T>, dp: T) -> Result<ChainLink> {
    let (da, db) = (x - a, x - b);
    if da.dot(&db) <= T::zero() {
        return Err(Error::Precondition("Case 1 needs <x - a, x - b> > 0".into()));
    }
    check_normals(x1s, x2s)?;
    let cap = T::one() - dp;
    check_alignment(x1s, &da, cap, "x1*")?;
    check_alignment(x2s, &db, cap, "x2*")?;
    let lhs = (x1s + x2s).norm_sq();
    let rhs = T::of(0.5) - T::of(2.0) * (dp.sqrt() + dp);
    // Reported as rhs ≤ lhs.
    Ok(ChainLink::le("case1", rhs, lhs))
}

/// Runs [`case1_bound`] on `count` random positive-inner-product instances.
/// Returns the number of failures and the smallest margin.
pub fn run_case1_corpus<T: Real>(count: usize, dp: T, seed: u64) -> Result<(usize, f64)> {
    let links: Vec<Option<ChainLink>> = (0..count as u64)
        .into_par_iter()
        .map(|i| -> Result<Option<ChainLink>> {
            let mut rng = sample_rng(seed, CASE1_STREAM, i);
            let n = 2 + (i % 2) as usize;
            loop {
                let a: Vector<T> = random_in_ball(&mut rng, n);
                let b: Vector<T> = random_in_ball(&mut rng, n);
                let x: Vector<T> = random_in_ball(&mut rng, n).scaled(T::of(2.0));
                let (da, db) = (&x - &a, &x - &b);
                if da.dot(&db) <= T::of(1e-9) {
                    continue;
                }
                let Some((x1s, x2s)) = capped_normals(&mut rng, &da, &db, dp.to_f64_lossy()) else { continue };
                return case1_bound(&a, &b, &x, &x1s, &x2s, dp).map(Some);
            }
        })
        .collect::<Result<_>>()?;
    let links: Vec<ChainLink> = links.into_iter().flatten().collect();
    let fails = links.iter().filter(|l| !l.passed).count();
    let min_margin = links.iter().map(|l| l.margin).fold(f64::INFINITY, f64::min);
    Ok((fails, min_margin))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct WitnessSearchProblem<T> {
    pub a_set: SetSpec<T>,
    pub b_set: SetSpec<T>,
    pub x: Vector<T>,
    pub a: Vector<T>,
    pub b: Vector<T>,
    pub rho: T,
    pub eps: T,
    pub lambda: T,
    pub tau: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Witness<T> {
    pub a_hat: Vector<T>,
    pub b_hat: Vector<T>,
    pub x_hat: Vector<T>,
    pub x1s: Vector<T>,
    pub x2s: Vector<T>,
    pub sum_norm: T,
    /// `<x1*, x̂ - â> + <x2*, x̂ - b̂> - τ max{|x̂ - â|, |x̂ - b̂|}`
    pub primal_margin: T,
}

impl<T: Real> WitnessSearchProblem<T> {
    pub fn validate(&self) -> Result<()> {
        let n = self.x.dim();
        self.a.check_dim(n)?;
        self.b.check_dim(n)?;
        let (r, e, l, t) = (self.rho, self.eps, self.lambda, self.tau);
        if !(r > T::zero() && e > T::zero() && l > T::zero() && t > T::zero()) {
            return Err(Error::Precondition("rho, eps, lambda, tau must be positive".into()));
        }
        if l < e + r {
            return Err(Error::Precondition("need lambda >= eps + rho".into()));
        }
        if t >= (l - e) / (l + e) {
            return Err(Error::Precondition("need tau < (lambda - eps)/(lambda + eps)".into()));
        }
        let far = self.x.dist(&self.a).max(self.x.dist(&self.b));
        let pd = product_diag_distance(&self.a_set, &self.a, &self.b_set, &self.b, l, &self.x, r)?;
        if !(e < far && far < pd.value + e) {
            return Err(Error::Precondition(format!(
                "hypothesis fails: need eps < {far} < product distance {} + eps",
                pd.value
            )));
        }
        Ok(())
    }

    /// Rechecks the four conclusions for a candidate, to 1e-9.
    pub fn accepts(&self, w: &Witness<T>) -> Result<bool> {
        let tol = T::of(1e-9);
        let (n1, n2) = (w.x1s.norm(), w.x2s.norm());
        if (n1 + n2 - T::one()).abs() > tol {
            return Ok(false);
        }
        if (&w.x1s + &w.x2s).norm() >= self.eps / self.rho {
            return Ok(false);
        }
        if w.x_hat.dist(&self.x) > self.rho + tol
            || w.a_hat.dist(&self.a) > self.lambda + tol
            || w.b_hat.dist(&self.b) > self.lambda + tol
            || self.a_set.distance(&w.a_hat)? > tol
            || self.b_set.distance(&w.b_hat)? > tol
        {
            return Ok(false);
        }
        let fa = self.a_set.proximal_normals(&w.a_hat)?;
        let fb = self.b_set.proximal_normals(&w.b_hat)?;
        if fa.residual(&w.x1s) > tol || fb.residual(&w.x2s) > tol {
            return Ok(false);
        }
        let (da, db) = (&w.x_hat - &w.a_hat, &w.x_hat - &w.b_hat);
        Ok(w.x1s.dot(&da) + w.x2s.dot(&db) > self.tau * da.norm().max(db.norm()))
    }
}

/// Multistart search over `x̂ ∈ B_ρ(x)`, nearest points of the truncated
/// sets and normals from the proximal fans. `None` is not a refutation.
pub fn lemma_witness_search<T: Real>(prob: &WitnessSearchProblem<T>, budget: usize) -> Result<Option<Witness<T>>> {
    if budget == 0 {
        return Err(Error::Precondition("witness search budget must be positive".into()));
    }
    prob.validate()?;
    let n = prob.x.dim();
    for i in 0..budget as u64 {
        let mut rng = sample_rng(0, WITNESS_STREAM, i);
        let x_hat = if i == 0 { prob.x.clone() } else { prob.x.add_scaled(prob.rho, &random_in_ball(&mut rng, n)) };
        let (Some((a_hat, _)), Some((b_hat, _))) = (
            truncated_projection(&prob.a_set, &prob.a, prob.lambda, &x_hat)?,
            truncated_projection(&prob.b_set, &prob.b, prob.lambda, &x_hat)?,
        ) else {
            continue;
        };
        let fa = prob.a_set.proximal_normals(&a_hat)?;
        let fb = prob.b_set.proximal_normals(&b_hat)?;
        let dir = |f: &crate::geometry::NormalFan<T>, d: Vector<T>| f.nearest(&d).normalized();
        let (Some(u1), Some(u2)) = (dir(&fa, &x_hat - &a_hat), dir(&fb, &x_hat - &b_hat)) else { continue };
        let (da, db) = (&x_hat - &a_hat, &x_hat - &b_hat);
        let span = da.norm().max(db.norm());
        let mut best: Option<Witness<T>> = None;
        for j in 1..64 {
            let t = T::of(j as f64 / 64.0);
            let (x1s, x2s) = (u1.scaled(t), u2.scaled(T::one() - t));
            let w = Witness {
                sum_norm: (&x1s + &x2s).norm(),
                primal_margin: x1s.dot(&da) + x2s.dot(&db) - prob.tau * span,
                a_hat: a_hat.clone(),
                b_hat: b_hat.clone(),
                x_hat: x_hat.clone(),
                x1s,
                x2s,
            };
            if best.as_ref().map_or(true, |b| w.primal_margin > b.primal_margin) && prob.accepts(&w)? {
                best = Some(w);
            }
        }
        if best.is_some() {
            return Ok(best);
        }
    }
    Ok(None)
}

/// Per-term diagnostics of the bisector construction along a generating
/// sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceTermCheck {
    pub radius: f64,
    pub equidistance: f64,
    pub alignment_gap: f64,
    /// `|x_k - x_k'|`
    pub point_shift: f64,
    /// `max_i |x_ik*' - x_ik*|`
    pub normal_shift: f64,
    /// `max_i dist(x_ik*', N(a_k) or N(b_k))`
    pub cone_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceCheck {
    pub terms: Vec<SequenceTermCheck>,
    /// Equidistance of every `x_k'` to 1e-10.
    pub equidistance_ok: bool,
    /// Exact alignment of every rescaled pair to 1e-12.
    pub alignment_ok: bool,
    /// Finite proxy for convergence: the shift and cone residuals at the
    /// last term do not exceed those at the first.
    pub residuals_decreasing: bool,
}

impl SequenceCheck {
    pub fn passed(&self) -> bool {
        self.equidistance_ok && self.alignment_ok && self.residuals_decreasing
    }
}

/// Absolute roundoff allowance when comparing sequence residuals.
pub const RESIDUAL_FLOOR: f64 = 1e-10;

/// Applies the bisector construction along the generating sequence of pair
/// `pair_index` of `sample`, which must lie in `C`.
pub fn theorem2_sequence_check<T: Real>(scene: &Scene<T>, sample: &ConeSample<T>, pair_index: usize) -> Result<SequenceCheck> {
    let pair = sample
        .pairs
        .get(pair_index)
        .ok_or_else(|| Error::Precondition(format!("no pair {pair_index} in sample")))?;
    if pair.x1s.dot(&pair.x2s) > T::of(crate::cones::IN_C_TOL) {
        return Err(Error::Precondition("pair is outside C".into()));
    }
    let seq = sample
        .sequence(pair_index)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Precondition(format!("pair {pair_index} has no generating sequence")))?;
    let mut terms = Vec::with_capacity(seq.len());
    for t in seq {
        let xp = bisector_foot(&t.a, &t.b, &t.x)?;
        let (p1, p2) = rescale_normals(&t.a, &t.b, &xp, &t.x1s, &t.x2s)?;
        let (eq, _) = foot_residuals(&t.a, &t.b, &t.x, &xp);
        let c1 = p1.cosine(&(&xp - &t.a)).unwrap_or(T::zero());
        let c2 = p2.cosine(&(&xp - &t.b)).unwrap_or(T::zero());
        let fa = scene.a.proximal_normals(&t.a)?;
        let fb = scene.b.proximal_normals(&t.b)?;
        terms.push(SequenceTermCheck {
            radius: t.radius.to_f64_lossy(),
            equidistance: eq.to_f64_lossy(),
            alignment_gap: (T::one() - c1.min(c2)).to_f64_lossy(),
            point_shift: t.x.dist(&xp).to_f64_lossy(),
            normal_shift: p1.dist(&t.x1s).max(p2.dist(&t.x2s)).to_f64_lossy(),
            cone_residual: fa.residual(&p1).max(fb.residual(&p2)).to_f64_lossy(),
        });
    }
    let first = &terms[0];
    let last = &terms[terms.len() - 1];
    // Absolute roundoff allowance; near tangency the rounding noise itself
    // grows as the radius shrinks.
    let le = |l: f64, f: f64| l <= f + RESIDUAL_FLOOR;
    let residuals_decreasing = le(last.point_shift, first.point_shift)
        && le(last.normal_shift, first.normal_shift)
        && le(last.cone_residual, first.cone_residual);
    Ok(SequenceCheck {
        equidistance_ok: terms.iter().all(|t| t.equidistance < FOOT_TOL),
        alignment_ok: terms.iter().all(|t| t.alignment_gap < 1e-12),
        residuals_decreasing,
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector<f64> {
        Vector::from_f64(c)
    }

    #[test]
    fn bisector_foot_examples() {
        assert_eq!(bisector_foot(&v(&[-1.0, 0.0]), &v(&[1.0, 0.0]), &v(&[0.5, 1.0])).unwrap(), v(&[0.0, 1.0]));
        assert_eq!(bisector_foot(&v(&[0.0, 1.0]), &v(&[0.0, -1.0]), &v(&[1.0, 0.0])).unwrap(), v(&[1.0, 0.0]));
        assert!(matches!(bisector_foot(&v(&[1.0, 1.0]), &v(&[1.0, 1.0]), &v(&[0.0, 0.0])), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rescale_example() {
        let (p1, _) = rescale_normals(&v(&[0.0, 0.0]), &v(&[3.0, 0.0]), &v(&[1.0, 1.0]), &v(&[0.0, 0.5]), &v(&[0.5, 0.0])).unwrap();
        let h = 0.5 / 2f64.sqrt();
        assert!(p1.dist(&v(&[h, h])) < 1e-15);
        assert!(rescale_normals(&v(&[0.0, 0.0]), &v(&[3.0, 0.0]), &v(&[0.0, 0.0]), &v(&[0.0, 0.5]), &v(&[0.5, 0.0])).is_err());
    }

    #[test]
    fn delta_prime_behaviour() {
        let d = delta_prime_for(0.5, 0.6, 0.1).unwrap();
        let (m1, m2) = dp_margins(0.5, 0.6, 0.1, d);
        assert!(m1 > 0.0 && m2 > 0.0);
        assert!(dp_margins(0.5, 0.6, 0.1, d * (1.0 + 1e-9)).1 <= 0.0);
        let small = delta_prime_for(1e-6, 0.3, 0.3).unwrap();
        assert!(small > 1e-3);
        let r2 = std::f64::consts::FRAC_1_SQRT_2;
        let tight = delta_prime_for(r2 - 1e-4, 0.9, 0.5).unwrap();
        assert!(tight < 1e-7);
        // 1/2 - beta^2 ~ 1.4e-9 leaves no room above the 1e-15 floor.
        assert!(matches!(delta_prime_for(r2 - 1e-9, 0.9, 0.5), Err(Error::Infeasible(_))));
        assert!(delta_prime_for(0.6, 0.5, 0.1).is_err());
    }

    #[test]
    fn symmetric_instance_passes_with_zero_shift() {
        let h = 0.5 / 2f64.sqrt();
        let inst = ConstructionInstance::new(v(&[-1.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[h, h]), v(&[-h, h]), 0.01).unwrap();
        assert_eq!(inst.xprime, inst.x);
        let r = verify_construction_chain(&inst).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.links.len(), 9);
    }

    #[test]
    fn instance_validation_rejects_case1() {
        let e = ConstructionInstance::new(v(&[-1.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 3.0]), v(&[0.0, 0.5]), v(&[0.0, 0.5]), 0.01);
        assert!(matches!(e, Err(Error::Precondition(_))));
    }

    #[test]
    fn small_random_corpus_and_fault() {
        let run = run_chain_corpus::<f64>(500, 1e-2, 9, Fault::None).unwrap();
        assert!(run.passed(), "{:?}", run.failures.first());
        assert_eq!(run.instances, 500);
        let bad = run_chain_corpus::<f64>(200, 1e-2, 9, Fault::NegatedBisector).unwrap();
        assert!(!bad.passed());
    }

    #[test]
    fn witness_on_axes() {
        let line = |d: &[f64]| SetSpec::affine(v(&[0.0, 0.0]), vec![v(d)]).unwrap();
        let mut p = WitnessSearchProblem {
            a_set: line(&[1.0, 0.0]),
            b_set: line(&[0.0, 1.0]),
            x: v(&[1.0, 1.0]),
            a: v(&[1.0, 0.0]),
            b: v(&[0.0, 1.0]),
            rho: 0.3,
            eps: 0.4,
            lambda: 0.7,
            tau: 0.2,
        };
        let w = lemma_witness_search(&p, 50).unwrap().expect("witness");
        assert!(w.sum_norm < 4.0 / 3.0 && p.accepts(&w).unwrap());
        assert!(lemma_witness_search(&p, 0).is_err());
        p.eps = 1.5;
        p.lambda = 2.0;
        assert!(matches!(lemma_witness_search(&p, 10), Err(Error::Precondition(_))));
    }

    #[test]
    fn sequence_check_on_axes_and_outside_c() {
        use crate::cones::{sample_relative_cone, SlicePair};
        use crate::constants::RadiusSchedule;
        let scene = crate::corpus::scene::<f64>("perpendicular_axes").unwrap();
        let sched = RadiusSchedule::geometric(0.5, 0.5, 6, 90, 4).unwrap();
        let sample = sample_relative_cone(&scene, &sched).unwrap();
        let i = (0..sample.pairs.len()).find(|&i| sample.sequence(i).unwrap().len() == 6).expect("full sequence");
        let c = theorem2_sequence_check(&scene, &sample, i).unwrap();
        assert!(c.passed(), "{c:?}");
        let mut bad = sample.clone();
        bad.pairs.push(SlicePair { x1s: v(&[0.5, 0.0]), x2s: v(&[0.3, 0.4]), in_c: false, provenance: 0 });
        assert!(theorem2_sequence_check(&scene, &bad, bad.pairs.len() - 1).is_err());
        bad.sequences.clear();
        assert!(theorem2_sequence_check(&scene, &bad, 0).is_err());
    }

    #[test]
    fn delta_prime_example_value() {
        let d = delta_prime_for(0.5, 0.6, 0.1).unwrap();
        assert!(d > 1e-3 && d < 2e-3, "{d}");
    }
}
