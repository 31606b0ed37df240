//! Cyclic Jacobi eigensolver for small Hermitian matrices.

use super::matrix::{re, ComplexMatrix, C64};
use crate::error::{QetError, Result};

pub const MAX_EIG_DIM: usize = 16;
const MAX_SWEEPS: usize = 64;

/// Eigen-decomposition `m = V diag(values) V†` with ascending eigenvalues;
/// eigenvectors are the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Eigen {
    pub fn vector(&self, i: usize) -> Vec<C64> {
        self.vectors.column(i)
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = ComplexMatrix::diag_real(&self.values);
        &(&self.vectors * &d) * &self.vectors.dagger()
    }

    /// Applies a real function to the spectrum: V f(Λ) V†.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let n = self.values.len();
        let mut d = ComplexMatrix::zeros(n, n);
        for (i, &x) in self.values.iter().enumerate() {
            d[(i, i)] = f(x);
        }
        &(&self.vectors * &d) * &self.vectors.dagger()
    }
}

/// Hermitian eigen-decomposition. Rejects inputs whose Hermiticity defect
/// exceeds 1e-10 or whose dimension exceeds 16.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<Eigen> {
    if !m.is_square() {
        return Err(QetError::DimensionMismatch(format!(
            "eigensolver needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    if n > MAX_EIG_DIM {
        return Err(QetError::DimensionMismatch(format!(
            "eigensolver limited to {MAX_EIG_DIM}x{MAX_EIG_DIM}, got {n}x{n}"
        )));
    }
    m.ensure_hermitian(1e-10)?;

    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (a[(i, i)].re, i)).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (col, &(_, src)) in pairs.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = v[(row, src)];
        }
    }
    let values = pairs.iter().map(|p| p.0).collect();
    Ok(Eigen { values, vectors })
}

/// One Jacobi rotation annihilating a[p][q]. The unitary J acts on the
/// (p, q) plane as [[c, s], [−s e^{−iφ}, c e^{−iφ}]] with φ = arg a[p][q],
/// i.e. a phase fix making the pivot real followed by a real rotation.
fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag < 1e-300 {
        return;
    }
    let n = a.rows();
    let phase = apq / mag; // e^{iφ}
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let cth = 1.0 / (1.0 + t * t).sqrt();
    let sth = t * cth;
    let jpp = re(cth);
    let jpq = re(sth);
    let jqp = -phase.conj() * sth;
    let jqq = phase.conj() * cth;

    // a ← a J (columns)
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * jpp + akq * jqp;
        a[(k, q)] = akp * jpq + akq * jqq;
    }
    // a ← J† a (rows)
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
        a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
    }
    a[(p, q)] = re(0.0);
    a[(q, p)] = re(0.0);
    a[(p, p)] = re(a[(p, p)].re);
    a[(q, q)] = re(a[(q, q)].re);
    // v ← v J
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * jpp + vkq * jqp;
        v[(k, q)] = vkp * jpq + vkq * jqq;
    }
}

/// Singular values of a (possibly rectangular) matrix, descending.
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let g = if m.rows() <= m.cols() {
        m * &m.dagger()
    } else {
        &m.dagger() * m
    };
    let e = hermitian_eig(&g)?;
    let mut s: Vec<f64> = e.values.iter().map(|&x| x.max(0.0).sqrt()).collect();
    s.reverse();
    Ok(s)
}

/// exp(−i t H) for Hermitian H.
pub fn unitary_evolution(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let e = hermitian_eig(h)?;
    Ok(e.map(|x| C64::from_polar(1.0, -x * t)))
}

/// exp(i H) for Hermitian H.
pub fn expi_hermitian(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    unitary_evolution(h, -1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::c;

    #[test]
    fn sigma_z_spectrum() {
        let z = ComplexMatrix::from_real(2, 2, &[1., 0., 0., -1.]);
        let e = hermitian_eig(&z).unwrap();
        assert_eq!(e.values, vec![-1.0, 1.0]);
    }

    #[test]
    fn diagonal_sorted() {
        let d = ComplexMatrix::diag_real(&[3., 1., 2.]);
        let e = hermitian_eig(&d).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn complex_hermitian_reconstruction() {
        let m = ComplexMatrix::from_rows(&[
            &[c(2.0, 0.0), c(1.0, -1.0), c(0.0, 0.5)],
            &[c(1.0, 1.0), c(-1.0, 0.0), c(0.3, 0.2)],
            &[c(0.0, -0.5), c(0.3, -0.2), c(0.5, 0.0)],
        ]);
        let e = hermitian_eig(&m).unwrap();
        assert!((&e.reconstruct() - &m).frobenius_norm() < 1e-12);
        let gram = &e.vectors.dagger() * &e.vectors;
        assert!(gram.approx_eq(&ComplexMatrix::identity(3), 1e-12));
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_real(2, 2, &[0., 1., 0., 0.]);
        assert!(matches!(
            hermitian_eig(&m),
            Err(QetError::NonHermitian { .. })
        ));
    }

    #[test]
    fn rejects_oversized() {
        assert!(hermitian_eig(&ComplexMatrix::identity(17)).is_err());
    }

    #[test]
    fn singular_values_of_rectangular() {
        let m = ComplexMatrix::from_real(2, 3, &[3., 0., 0., 0., 4., 0.]);
        let s = singular_values(&m).unwrap();
        assert!((s[0] - 4.0).abs() < 1e-14 && (s[1] - 3.0).abs() < 1e-14);
    }
}
