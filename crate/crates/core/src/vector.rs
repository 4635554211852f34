//! Dense coordinate vectors in R^n.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A point or dual vector in R^n. Normals live in the same space as points.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Vector<T>(pub Vec<T>);

impl<T: Real> Vector<T> {
    pub fn new(coords: Vec<T>) -> Self {
        Vector(coords)
    }

    pub fn from_f64(coords: &[f64]) -> Self {
        Vector(coords.iter().map(|&c| T::of(c)).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![T::zero(); n])
    }

    /// The `i`-th standard basis vector of R^n.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = T::one();
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    #[inline]
    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    /// Euclidean norm, computed with scaling so tiny and huge entries do not
    /// under/overflow.
    pub fn norm(&self) -> T {
        let scale = self.0.iter().fold(T::zero(), |m, &c| m.max(c.abs()));
        if scale == T::zero() || !scale.is_finite() {
            return scale;
        }
        let s = self
            .0
            .iter()
            .fold(T::zero(), |acc, &c| acc + (c / scale) * (c / scale));
        scale * s.sqrt()
    }

    pub fn dist(&self, other: &Self) -> T {
        (self - other).norm()
    }

    pub fn scaled(&self, s: T) -> Self {
        Vector(self.0.iter().map(|&c| c * s).collect())
    }

    /// `self + s * dir`
    pub fn add_scaled(&self, s: T, dir: &Self) -> Self {
        Vector(
            self.0
                .iter()
                .zip(&dir.0)
                .map(|(&a, &d)| a + s * d)
                .collect(),
        )
    }

    pub fn axpy(&mut self, s: T, dir: &Self) {
        for (a, &d) in self.0.iter_mut().zip(&dir.0) {
            *a += s * d;
        }
    }

    /// Unit vector in the direction of `self`, or `None` for (near) zero vectors.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n > T::min_positive_value() * T::of(1e6) && n.is_finite() {
            Some(self.scaled(T::one() / n))
        } else {
            None
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                got: self.dim(),
            })
        }
    }

    /// Lexicographic comparison, used to break ties deterministically.
    pub fn lex_cmp(&self, other: &Self) -> std::cmp::Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.partial_cmp(b) {
                Some(std::cmp::Ordering::Equal) | None => continue,
                Some(o) => return o,
            }
        }
        self.dim().cmp(&other.dim())
    }

    /// Cosine of the angle between two nonzero vectors, clamped to `[-1, 1]`.
    pub fn cosine(&self, other: &Self) -> Option<T> {
        let d = self.norm() * other.norm();
        if d > T::zero() {
            Some((self.dot(other) / d).clamp_to(-T::one(), T::one()))
        } else {
            None
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.to_f64_lossy()).collect()
    }

    /// Embeds into R^m by zero padding (m >= n).
    pub fn padded(&self, m: usize) -> Self {
        let mut v = self.0.clone();
        v.resize(m, T::zero());
        Vector(v)
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl<'a, T: Real> $trait<&'a Vector<T>> for &'a Vector<T> {
            type Output = Vector<T>;
            fn $method(self, rhs: &'a Vector<T>) -> Vector<T> {
                debug_assert_eq!(self.dim(), rhs.dim());
                Vector(self.0.iter().zip(&rhs.0).map(|(&a, &b)| a $op b).collect())
            }
        }
        impl<T: Real> $trait<Vector<T>> for Vector<T> {
            type Output = Vector<T>;
            fn $method(self, rhs: Vector<T>) -> Vector<T> {
                &self $op &rhs
            }
        }
        impl<'a, T: Real> $trait<&'a Vector<T>> for Vector<T> {
            type Output = Vector<T>;
            fn $method(self, rhs: &'a Vector<T>) -> Vector<T> {
                &self $op rhs
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);

impl<T: Real> Mul<T> for &Vector<T> {
    type Output = Vector<T>;
    fn mul(self, s: T) -> Vector<T> {
        self.scaled(s)
    }
}

impl<T: Real> Mul<T> for Vector<T> {
    type Output = Vector<T>;
    fn mul(self, s: T) -> Vector<T> {
        self.scaled(s)
    }
}

impl<T: Real> Neg for &Vector<T> {
    type Output = Vector<T>;
    fn neg(self) -> Vector<T> {
        Vector(self.0.iter().map(|&c| -c).collect())
    }
}

impl<T: Real> Neg for Vector<T> {
    type Output = Vector<T>;
    fn neg(self) -> Vector<T> {
        -&self
    }
}

impl<T: Real> AddAssign<&Vector<T>> for Vector<T> {
    fn add_assign(&mut self, rhs: &Vector<T>) {
        for (a, &b) in self.0.iter_mut().zip(&rhs.0) {
            *a += b;
        }
    }
}

impl<T: Real> SubAssign<&Vector<T>> for Vector<T> {
    fn sub_assign(&mut self, rhs: &Vector<T>) {
        for (a, &b) in self.0.iter_mut().zip(&rhs.0) {
            *a -= b;
        }
    }
}

impl<T: Real> From<Vec<T>> for Vector<T> {
    fn from(v: Vec<T>) -> Self {
        Vector(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_handles_extreme_magnitudes() {
        let v = Vector::<f64>::new(vec![3e200, 4e200]);
        assert!((v.norm() / 5e200 - 1.0).abs() < 1e-15);
        let w = Vector::<f64>::new(vec![3e-200, 4e-200]);
        assert!((w.norm() / 5e-200 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lex_cmp_orders_by_first_difference() {
        let a = Vector::<f64>::from_f64(&[0.0, 1.0]);
        let b = Vector::<f64>::from_f64(&[1.0, 0.0]);
        assert_eq!(a.lex_cmp(&b), std::cmp::Ordering::Less);
    }

    #[test]
    fn zero_vector_has_no_direction() {
        assert!(Vector::<f32>::zeros(3).normalized().is_none());
    }
}
