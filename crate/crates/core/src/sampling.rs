//! Reproducible quasi-random sampling.
//!
//! Every random choice is derived from `(seed, stream, index)` so a sample's
//! value never depends on which thread produced it or in which order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;
use crate::vector::Vector;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed; distinct `(seed, stream)` pairs give unrelated seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Independent generator for sample `index` of `stream`.
pub fn sample_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, stream), index))
}

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// Randomly shifted (Cranley-Patterson) Halton sequence.
#[derive(Debug, Clone)]
pub struct Halton {
    shift: Vec<f64>,
}

impl Halton {
    pub fn new(dims: usize, seed: u64) -> Self {
        assert!(dims <= PRIMES.len(), "Halton sequence supports at most 16 dimensions");
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x4841_4c54));
        let shift = (0..dims).map(|_| rng.gen::<f64>()).collect();
        Halton { shift }
    }

    pub fn dims(&self) -> usize {
        self.shift.len()
    }

    /// Point `i` of the sequence in `[0,1)^dims`. Index 0 is skipped internally.
    pub fn point(&self, i: u64) -> Vec<f64> {
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(&s, p)| {
                let u = radical_inverse(i + 1, p) + s;
                u - u.floor()
            })
            .collect()
    }
}

/// Number of uniform coordinates consumed by [`ball_point_from_unit`].
pub fn ball_coords(n: usize) -> usize {
    match n {
        1..=3 => n,
        _ => n + 1,
    }
}

/// Maps uniform coordinates to a uniformly distributed point of the closed
/// unit ball in R^n.
pub fn ball_point_from_unit<T: Real>(u: &[f64], n: usize) -> Vector<T> {
    let tau = std::f64::consts::TAU;
    let coords: Vec<f64> = match n {
        1 => vec![2.0 * u[0] - 1.0],
        2 => {
            let r = u[0].sqrt();
            let a = tau * u[1];
            vec![r * a.cos(), r * a.sin()]
        }
        3 => {
            let r = u[0].cbrt();
            let z = 2.0 * u[1] - 1.0;
            let s = (1.0 - z * z).max(0.0).sqrt();
            let a = tau * u[2];
            vec![r * s * a.cos(), r * s * a.sin(), r * z]
        }
        _ => {
            let r = u[0].powf(1.0 / n as f64);
            let g: Vec<f64> = u[1..=n]
                .iter()
                .map(|&p| inverse_normal_cdf(p.clamp(1e-12, 1.0 - 1e-12)))
                .collect();
            let norm = g.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-300);
            g.iter().map(|c| r * c / norm).collect()
        }
    };
    Vector::from_f64(&coords)
}

/// Uniform random unit vector in R^n.
pub fn random_unit<T: Real, R: Rng>(rng: &mut R, n: usize) -> Vector<T> {
    loop {
        let g: Vec<f64> = (0..n)
            .map(|_| inverse_normal_cdf(rng.gen_range(1e-12..1.0 - 1e-12)))
            .collect();
        let norm = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return Vector::from_f64(&g.iter().map(|c| c / norm).collect::<Vec<_>>());
        }
    }
}

/// Uniform random point of the closed unit ball in R^n.
pub fn random_in_ball<T: Real, R: Rng>(rng: &mut R, n: usize) -> Vector<T> {
    let u: Vec<f64> = (0..ball_coords(n)).map(|_| rng.gen::<f64>()).collect();
    ball_point_from_unit(&u, n)
}

/// Acklam's rational approximation of the standard normal quantile
/// (relative error below 1.2e-9).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549671010243732,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    let lo = 0.02425;
    if p < lo {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - lo {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Quasi-random points of the ball `B_radius(center)`; point `i` depends only on
/// `(seed, i)`.
pub fn ball_points<T: Real>(center: &Vector<T>, radius: T, count: usize, seed: u64) -> Vec<Vector<T>> {
    let n = center.dim();
    let h = Halton::new(ball_coords(n), seed);
    (0..count as u64)
        .map(|i| center.add_scaled(radius, &ball_point_from_unit::<T>(&h.point(i), n)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base2() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn halton_is_seed_deterministic() {
        let a = Halton::new(3, 7).point(11);
        let b = Halton::new(3, 7).point(11);
        let c = Halton::new(3, 8).point(11);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn ball_points_stay_in_ball() {
        for n in 1..=5 {
            let c = Vector::<f64>::zeros(n);
            for p in ball_points(&c, 0.5, 200, 3) {
                assert!(p.norm() <= 0.5 + 1e-12);
            }
        }
    }

    #[test]
    fn inverse_normal_symmetry() {
        for &p in &[0.01, 0.1, 0.3, 0.45] {
            assert!((inverse_normal_cdf(p) + inverse_normal_cdf(1.0 - p)).abs() < 1e-8);
        }
        assert!((inverse_normal_cdf(0.975) - 1.959964).abs() < 1e-5);
    }

    #[test]
    fn sample_rng_streams_independent_of_order() {
        let mut a = sample_rng(1, 2, 3);
        let mut b = sample_rng(1, 2, 3);
        assert_eq!(a.gen::<u64>(), b.gen::<u64>());
        let mut c = sample_rng(1, 2, 4);
        assert_ne!(sample_rng(1, 2, 3).gen::<u64>(), c.gen::<u64>());
    }
}
