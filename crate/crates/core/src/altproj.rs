//! Alternating projections and linear-rate fitting.

use serde::{Deserialize, Serialize};

use crate::constants::Scene;
use crate::error::{Error, Result};
use crate::geometry::SetSpec;
use crate::scalar::Real;
use crate::vector::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Trajectory<T> {
    /// `x0, b0 ∈ P_B(x0), a1 ∈ P_A(b0), b1, ...`
    pub points: Vec<Vector<T>>,
    /// `max{dist(p, A), dist(p, B)}` for every point.
    pub residuals: Vec<T>,
    /// Residual at the end of each full B-then-A cycle, preceded by the
    /// residual of `x0`.
    pub cycle_residuals: Vec<T>,
    pub converged: bool,
    pub limit: Option<Vector<T>>,
}

impl<T: Real> Trajectory<T> {
    /// Rows `step, x_0 .. x_{n-1}, residual`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let n = self.points.first().map_or(0, |p| p.dim());
        let mut header = vec!["step".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.push("residual".into());
        w.write_record(&header)?;
        for (k, (p, r)) in self.points.iter().zip(&self.residuals).enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(p.iter().map(|c| format!("{:e}", c.to_f64_lossy())));
            row.push(format!("{:e}", r.to_f64_lossy()));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn residual<T: Real>(a: &SetSpec<T>, b: &SetSpec<T>, p: &Vector<T>) -> Result<T> {
    Ok(a.distance(p)?.max(b.distance(p)?))
}

/// Alternating projections `B, A, B, A, ...` from `x0` for at most
/// `max_iter` full cycles, stopping once a residual drops below `tol`.
/// Ties are broken towards the lexicographically smallest nearest point.
pub fn run_ap_sets<T: Real>(a: &SetSpec<T>, b: &SetSpec<T>, x0: &Vector<T>, max_iter: usize, tol: T) -> Result<Trajectory<T>> {
    if max_iter == 0 {
        return Err(Error::Precondition("max_iter must be at least 1".into()));
    }
    if !x0.is_finite() {
        return Err(Error::NonFinite("initial point"));
    }
    let r0 = residual(a, b, x0)?;
    let mut t = Trajectory {
        points: vec![x0.clone()],
        residuals: vec![r0],
        cycle_residuals: vec![r0],
        converged: r0 < tol,
        limit: None,
    };
    let mut y = x0.clone();
    'outer: for _ in 0..max_iter {
        if t.converged {
            break;
        }
        for (k, s) in [b, a].into_iter().enumerate() {
            y = s.project_one(&y)?;
            let r = residual(a, b, &y)?;
            t.points.push(y.clone());
            t.residuals.push(r);
            if k == 1 {
                t.cycle_residuals.push(r);
            }
            if r < tol {
                t.converged = true;
                // A half cycle only counts when it terminated exactly.
                if k == 0 && r == T::zero() {
                    t.cycle_residuals.push(r);
                }
                break 'outer;
            }
        }
    }
    if t.converged {
        t.limit = Some(y);
    }
    Ok(t)
}

pub fn run_ap<T: Real>(scene: &Scene<T>, x0: &Vector<T>, max_iter: usize, tol: T) -> Result<Trajectory<T>> {
    scene.a.check_point(x0)?;
    run_ap_sets(&scene.a, &scene.b, x0, max_iter, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound(serialize = "T: Real", deserialize = "T: Real"))]
pub enum LinearRate<T> {
    /// Per-cycle contraction factor in `[0, 1]`.
    Rate(T),
    /// A residual reached exactly 0.
    FiniteTermination,
}

impl<T: Real> LinearRate<T> {
    /// The rate, with finite termination counted as 0.
    pub fn value(&self) -> T {
        match self {
            LinearRate::Rate(r) => *r,
            LinearRate::FiniteTermination => T::zero(),
        }
    }
}

/// Least-squares slope of `log r_k` against `k` over `residuals[burn_in..]`,
/// exponentiated and capped at 1.
pub fn fit_linear_rate<T: Real>(residuals: &[T], burn_in: usize) -> Result<LinearRate<T>> {
    if residuals.iter().any(|r| *r == T::zero()) {
        return Ok(LinearRate::FiniteTermination);
    }
    if residuals.len() < burn_in + 3 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs at least {} residuals, got {}",
            burn_in + 3,
            residuals.len()
        )));
    }
    let ys: Vec<f64> = residuals[burn_in..].iter().map(|r| r.to_f64_lossy().ln()).collect();
    let n = ys.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, y) in ys.iter().enumerate() {
        let dx = k as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    Ok(LinearRate::Rate(T::of((sxy / sxx).exp().min(1.0))))
}

/// Per-cycle rate of a trajectory.
pub fn estimate_linear_rate<T: Real>(traj: &Trajectory<T>, burn_in: usize) -> Result<LinearRate<T>> {
    fit_linear_rate(&traj.cycle_residuals, burn_in)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector<f64> {
        Vector::from_f64(c)
    }

    fn line(dir: &[f64]) -> SetSpec<f64> {
        SetSpec::affine(v(&[0.0, 0.0]), vec![v(dir)]).unwrap()
    }

    #[test]
    fn axes_terminate_in_two_steps() {
        let t = run_ap_sets(&line(&[1.0, 0.0]), &line(&[0.0, 1.0]), &v(&[1.0, 1.0]), 10, 1e-14).unwrap();
        assert!(t.converged && t.points.len() <= 3);
        assert_eq!(t.limit.clone().unwrap(), v(&[0.0, 0.0]));
        assert_eq!(estimate_linear_rate(&t, 0).unwrap(), LinearRate::FiniteTermination);
    }

    #[test]
    fn lines_at_pi_3_contract_by_a_quarter() {
        let th = std::f64::consts::PI / 3.0;
        let t = run_ap_sets(&line(&[1.0, 0.0]), &line(&[th.cos(), th.sin()]), &v(&[0.3, -0.2]), 100, 1e-13).unwrap();
        assert!(t.converged);
        let r = estimate_linear_rate(&t, 1).unwrap().value();
        assert!((r - 0.25).abs() < 1e-6, "{r}");
        assert!(t.residuals.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn geometric_residuals_give_their_ratio() {
        let r: Vec<f64> = (0..20).map(|k| 0.5f64.powi(k)).collect();
        assert!((fit_linear_rate(&r, 2).unwrap().value() - 0.5).abs() < 1e-12);
        assert!(fit_linear_rate(&r[..4], 2).is_err());
    }

    #[test]
    fn identical_sets_converge_at_once() {
        let h = SetSpec::half_space(v(&[0.0, 1.0]), 0.0).unwrap();
        let t = run_ap_sets(&h, &h, &v(&[0.5, 2.0]), 10, 1e-14).unwrap();
        assert!(t.converged && t.points.len() == 2);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let t = run_ap_sets(&line(&[1.0, 0.0]), &line(&[0.0, 1.0]), &v(&[1.0, 1.0]), 10, 1e-14).unwrap();
        let s = t.to_csv().unwrap();
        assert!(s.starts_with("step,x0,x1,residual\n"));
        assert_eq!(s.lines().count(), t.points.len() + 1);
    }
}
