//! Consistency checks between the estimated constants of one scene.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{ConstantEstimate, ConstantKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    /// Human-readable form, e.g. `itr <= itr_w`.
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs + slack - lhs`; negative on failure.
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub scene_id: String,
    pub slack: f64,
    pub checks: Vec<OrderingCheck>,
}

impl OrderingReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&OrderingCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Checks every inequality whose two sides were estimated:
/// `tr ≤ itr ≤ itr_w ≤ itr_c ≤ 1`, `itr_w ≤ str`, `min{itr_c, 1/√2} ≤ itr`,
/// `itr ≤ itr_p ≤ itr_c`, and, when `itr_c ≤ 1/√2`, that `itr`, `itr_w`,
/// `itr_p` and `itr_c` agree within `slack`.
pub fn check_orderings<T: Real>(estimates: &[ConstantEstimate<T>], slack: T) -> Result<OrderingReport> {
    let Some(first) = estimates.first() else {
        return Err(Error::Precondition("no estimates to check".into()));
    };
    if estimates.iter().any(|e| e.scene_id != first.scene_id) {
        return Err(Error::Precondition("estimates come from different scenes".into()));
    }
    let slack = slack.to_f64_lossy();
    let vals: BTreeMap<ConstantKind, f64> = estimates.iter().map(|e| (e.kind, e.extrapolated.to_f64_lossy())).collect();
    let mut checks = Vec::new();
    let mut le = |name: String, lhs: f64, rhs: f64| {
        let margin = rhs + slack - lhs;
        checks.push(OrderingCheck { name, lhs, rhs, margin, passed: margin >= 0.0 });
    };
    use ConstantKind::*;
    let pairs = [(Tr, Itr), (Itr, ItrW), (ItrW, ItrC), (Itr, ItrC), (ItrW, Str), (Itr, ItrP), (ItrP, ItrC)];
    for (l, r) in pairs {
        if let (Some(&a), Some(&b)) = (vals.get(&l), vals.get(&r)) {
            le(format!("{l} <= {r}"), a, b);
        }
    }
    for (&k, &v) in &vals {
        le(format!("{k} <= 1"), v, 1.0);
    }
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    if let (Some(&c), Some(&i)) = (vals.get(&ItrC), vals.get(&Itr)) {
        le("min(itr_c, 1/sqrt2) <= itr".into(), c.min(s2), i);
    }
    if let Some(&c) = vals.get(&ItrC) {
        if c <= s2 {
            for (l, r) in [(Itr, ItrW), (ItrW, ItrC), (ItrP, ItrC)] {
                if let (Some(&a), Some(&b)) = (vals.get(&l), vals.get(&r)) {
                    le(format!("|{l} - {r}| <= slack"), (a - b).abs(), 0.0);
                }
            }
        }
    }
    Ok(OrderingReport { scene_id: first.scene_id.clone(), slack, checks })
}
