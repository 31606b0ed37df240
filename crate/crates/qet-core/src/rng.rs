//! Seeded randomness.
//!
//! Every stochastic routine draws from `ChaCha8Rng`. Independent streams are
//! derived from one user seed with [`stream_rng`]: the seed fixes the ChaCha
//! key and the stream index selects ChaCha's 64-bit stream counter, so
//! streams never overlap and results are bit-identical across platforms and
//! thread schedules.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::qcore::ComplexMatrix;

pub type QetRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> QetRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `stream` of the generator keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> QetRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Matrix of i.i.d. standard complex Gaussians (real and imaginary parts
/// each N(0, 1/2)).
pub fn ginibre(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let data = (0..rows * cols)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Complex64::new(a * s, b * s)
        })
        .collect();
    ComplexMatrix::from_vec(rows, cols, data)
}

/// Gram–Schmidt on the columns of a tall matrix, with the phase fix that
/// makes QR of a Ginibre matrix Haar-distributed.
pub fn orthonormalize_columns(m: &ComplexMatrix) -> ComplexMatrix {
    let (rows, cols) = (m.rows(), m.cols());
    let mut q = ComplexMatrix::zeros(rows, cols);
    for j in 0..cols {
        let mut v = m.column(j);
        for k in 0..j {
            let qk = q.column(k);
            let proj: Complex64 = qk.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for i in 0..rows {
                v[i] -= proj * qk[i];
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        // R's diagonal equals the projection length, which is real positive
        // here, so Gram–Schmidt already yields the Haar-correct phases.
        for i in 0..rows {
            q[(i, j)] = v[i] / norm;
        }
    }
    q
}

/// Haar-random d×d unitary.
pub fn haar_unitary(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    orthonormalize_columns(&ginibre(rng, d, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream_rng(7, 1).random()).collect();
        let mut r1 = stream_rng(7, 1);
        let mut r2 = stream_rng(7, 2);
        let x: u64 = r1.random();
        let y: u64 = r2.random();
        assert_eq!(a[0], x);
        assert_ne!(x, y);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut r = seeded_rng(3);
        for d in [2, 4, 8] {
            assert!(haar_unitary(&mut r, d).unitarity_defect() < 1e-12);
        }
    }
}
