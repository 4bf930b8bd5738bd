//! Low-discrepancy sampling of boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u32; 64] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293,
    307, 311,
];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % b) as f64;
        index /= b;
        f *= inv;
    }
    r
}

/// Halton sequence in `[0, 1)^dim`, optionally randomised by a seeded
/// Cranley–Patterson rotation. Point `i` uses index `i + 1`, so the origin
/// is never produced by the unrotated sequence.
#[derive(Debug, Clone)]
pub struct Halton {
    shift: Vec<f64>,
}

impl Halton {
    pub fn new(dim: usize) -> Self {
        assert!(dim <= PRIMES.len(), "Halton sampling supports up to {} dimensions", PRIMES.len());
        Self { shift: vec![0.0; dim] }
    }

    pub fn seeded(dim: usize, seed: u64) -> Self {
        let mut h = Self::new(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in &mut h.shift {
            *s = rng.gen::<f64>();
        }
        h
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn unit_point(&self, i: usize) -> Vec<f64> {
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, p)| (radical_inverse(i as u64 + 1, p) + s).fract())
            .collect()
    }

    /// Point `i` mapped affinely into the box.
    pub fn box_point(&self, i: usize, domain: &[(f64, f64)]) -> Vec<f64> {
        self.unit_point(i)
            .into_iter()
            .zip(domain)
            .map(|(u, (lo, hi))| lo + u * (hi - lo))
            .collect()
    }

    /// Point `i` mapped into the open box, kept a relative margin away
    /// from the faces.
    pub fn interior_point(&self, i: usize, domain: &[(f64, f64)], margin: f64) -> Vec<f64> {
        self.unit_point(i)
            .into_iter()
            .zip(domain)
            .map(|(u, (lo, hi))| lo + (margin + u * (1.0 - 2.0 * margin)) * (hi - lo))
            .collect()
    }
}
