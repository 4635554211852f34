//! Small dense linear algebra used by the set oracles. Dimensions here are
//! tiny (ambient n <= ~6), so everything is direct.

use crate::scalar::Real;
use crate::vector::Vector;

/// Modified Gram-Schmidt with one reorthogonalization pass. Vectors whose
/// residual norm drops below `tol` (relative to their original norm) are
/// discarded as dependent.
pub fn orthonormalize<T: Real>(vectors: &[Vector<T>], tol: T) -> Vec<Vector<T>> {
    let mut basis: Vec<Vector<T>> = Vec::new();
    for v in vectors {
        let n0 = v.norm();
        if n0 == T::zero() {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = w.dot(q);
                w.axpy(-c, q);
            }
        }
        let n = w.norm();
        if n > tol * n0 {
            basis.push(w.scaled(T::one() / n));
        }
    }
    basis
}

/// Orthonormal basis of the orthogonal complement of span(`basis`) in R^n.
/// `basis` must already be orthonormal.
pub fn orthogonal_complement<T: Real>(basis: &[Vector<T>], n: usize) -> Vec<Vector<T>> {
    let mut all: Vec<Vector<T>> = basis.to_vec();
    let k = all.len();
    for i in 0..n {
        all.push(Vector::unit(n, i));
    }
    let q = orthonormalize(&all, T::of(1e-8));
    q.into_iter().skip(k).collect()
}

/// Euclidean projection of `x` onto the affine set `{y : <r_i, y> = c_i}`.
/// Returns `None` when the constraints are inconsistent.
pub fn project_onto_equalities<T: Real>(x: &Vector<T>, rows: &[(Vector<T>, T)]) -> Option<Vector<T>> {
    // Orthonormalize the rows while carrying right-hand sides along.
    let mut q: Vec<(Vector<T>, T)> = Vec::new();
    let tol = T::of(1e-10);
    for (r, c) in rows {
        let n0 = r.norm();
        if n0 == T::zero() {
            if c.abs() > tol {
                return None;
            }
            continue;
        }
        let mut w = r.clone();
        let mut rhs = *c;
        for _ in 0..2 {
            for (qi, ci) in &q {
                let s = w.dot(qi);
                w.axpy(-s, qi);
                rhs -= s * *ci;
            }
        }
        let n = w.norm();
        if n > T::of(1e-9) * n0 {
            q.push((w.scaled(T::one() / n), rhs / n));
        } else if rhs.abs() > tol * (T::one() + c.abs()) {
            return None;
        }
    }
    let mut y = x.clone();
    for (qi, ci) in &q {
        let s = y.dot(qi) - *ci;
        y.axpy(-s, qi);
    }
    Some(y)
}

/// Solves the square system `m * z = rhs` by Gaussian elimination with partial
/// pivoting. `None` if the matrix is numerically singular.
pub fn solve<T: Real>(mut m: Vec<Vec<T>>, mut rhs: Vec<T>) -> Option<Vec<T>> {
    let n = rhs.len();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |a, &b| a.max(b.abs()));
    if scale == T::zero() {
        return None;
    }
    let eps = T::of(1e-12) * scale;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        if m[piv][col].abs() <= eps {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != T::zero() {
                for k in col..n {
                    let v = m[col][k];
                    m[row][k] -= f * v;
                }
                let r = rhs[col];
                rhs[row] -= f * r;
            }
        }
    }
    let mut z = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for k in row + 1..n {
            s -= m[row][k] * z[k];
        }
        z[row] = s / m[row][row];
    }
    Some(z)
}

/// Result of projecting onto a finitely generated convex cone.
#[derive(Debug, Clone)]
pub struct ConeProjection<T> {
    pub point: Vector<T>,
    pub distance: T,
}

/// Projects `v` onto the conic hull of `generators` (the cone {0} when the
/// list is empty).
///
/// Small generator sets are handled exactly by enumerating linearly independent
/// active subsets (Caratheodory); larger ones fall back to projected gradient
/// on the nonnegative coefficients.
pub fn project_onto_cone<T: Real>(v: &Vector<T>, generators: &[Vector<T>]) -> ConeProjection<T> {
    let n = v.dim();
    let k = generators.len();
    let mut best = ConeProjection {
        point: Vector::zeros(n),
        distance: v.norm(),
    };
    if k == 0 {
        return best;
    }
    if k > 12 {
        return project_onto_cone_pg(v, generators);
    }
    let neg_tol = T::of(-1e-12);
    for mask in 1u32..(1u32 << k) {
        let size = mask.count_ones() as usize;
        if size > n {
            continue;
        }
        let idx: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let gram: Vec<Vec<T>> = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| generators[i].dot(&generators[j])).collect())
            .collect();
        let rhs: Vec<T> = idx.iter().map(|&i| generators[i].dot(v)).collect();
        let Some(coef) = solve(gram, rhs) else { continue };
        if coef.iter().any(|&c| c < neg_tol) {
            continue;
        }
        let mut p = Vector::zeros(n);
        for (&i, &c) in idx.iter().zip(&coef) {
            p.axpy(c.max(T::zero()), &generators[i]);
        }
        let d = v.dist(&p);
        if d < best.distance {
            best = ConeProjection { point: p, distance: d };
        }
    }
    best
}

fn project_onto_cone_pg<T: Real>(v: &Vector<T>, generators: &[Vector<T>]) -> ConeProjection<T> {
    let k = generators.len();
    let n = v.dim();
    // Lipschitz constant of the gradient: largest eigenvalue of G^T G, bounded by
    // the squared Frobenius norm.
    let lip: T = generators.iter().map(|g| g.norm_sq()).sum();
    let step = T::one() / lip.max(T::of(1e-30));
    let mut c = vec![T::zero(); k];
    for _ in 0..2000 {
        let mut p = Vector::zeros(n);
        for (g, &ci) in generators.iter().zip(&c) {
            p.axpy(ci, g);
        }
        let r = &p - v;
        for (ci, g) in c.iter_mut().zip(generators) {
            *ci = (*ci - step * g.dot(&r)).max(T::zero());
        }
    }
    let mut p = Vector::zeros(n);
    for (g, &ci) in generators.iter().zip(&c) {
        p.axpy(ci, g);
    }
    let d = v.dist(&p);
    ConeProjection { point: p, distance: d }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector<f64> {
        Vector::from_f64(c)
    }

    #[test]
    fn complement_of_line_in_plane() {
        let basis = orthonormalize(&[v(&[1.0, 1.0])], 1e-12);
        let comp = orthogonal_complement(&basis, 2);
        assert_eq!(comp.len(), 1);
        assert!(comp[0].dot(&basis[0]).abs() < 1e-14);
    }

    #[test]
    fn inconsistent_equalities_detected() {
        let rows = vec![(v(&[0.0, 1.0]), 0.0), (v(&[0.0, 2.0]), 1.0)];
        assert!(project_onto_equalities(&v(&[1.0, 1.0]), &rows).is_none());
    }

    #[test]
    fn dependent_consistent_equalities() {
        let rows = vec![(v(&[0.0, 1.0]), 1.0), (v(&[0.0, -2.0]), -2.0)];
        let y = project_onto_equalities(&v(&[3.0, 5.0]), &rows).unwrap();
        assert!((y[0] - 3.0).abs() < 1e-14 && (y[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cone_projection_quadrant() {
        let gens = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        let p = project_onto_cone(&v(&[2.0, -3.0]), &gens);
        assert!((p.point[0] - 2.0).abs() < 1e-14 && p.point[1].abs() < 1e-14);
        assert!((p.distance - 3.0).abs() < 1e-14);
        let inside = project_onto_cone(&v(&[2.0, 3.0]), &gens);
        assert!(inside.distance < 1e-14);
    }

    #[test]
    fn cone_projection_subspace_pairs() {
        let gens = vec![v(&[0.0, 1.0]), v(&[0.0, -1.0])];
        let p = project_onto_cone(&v(&[1.0, -2.0]), &gens);
        assert!((p.point[1] + 2.0).abs() < 1e-14);
        assert!((p.distance - 1.0).abs() < 1e-14);
    }

    #[test]
    fn projected_gradient_matches_enumeration() {
        let mut gens = Vec::new();
        for i in 0..14 {
            let a = i as f64 * 0.1;
            gens.push(v(&[a.cos(), a.sin()]));
        }
        let target = v(&[-1.0, 0.3]);
        let pg = project_onto_cone_pg(&target, &gens);
        let exact = project_onto_cone(&target, &gens[..12]);
        // Cone of the first 12 is a subset, so pg's distance can only be smaller.
        assert!(pg.distance <= exact.distance + 1e-6);
    }
}
