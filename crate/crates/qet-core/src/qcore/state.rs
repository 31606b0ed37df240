use super::eig::hermitian_eig;
use super::matrix::{ComplexMatrix, C64, ZERO};
use crate::error::{QetError, Result};

/// Normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    /// Normalizes the given amplitudes; fails on a zero vector.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 1e-300) || !n.is_finite() {
            return Err(QetError::InvalidState("zero or non-finite amplitude vector".into()));
        }
        Ok(Self {
            amps: amps.into_iter().map(|a| a / n).collect(),
        })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; dim];
        amps[index] = C64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Applies an operator and renormalizes (for unitaries this is a no-op
    /// on the norm).
    pub fn evolve(&self, u: &ComplexMatrix) -> Result<Self> {
        if u.cols() != self.dim() {
            return Err(QetError::DimensionMismatch(format!(
                "operator {}x{} on state of dim {}",
                u.rows(),
                u.cols(),
                self.dim()
            )));
        }
        Self::new(u.matvec(&self.amps))
    }

    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix::outer(&self.amps, &self.amps)
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            matrix: self.projector(),
        }
    }
}

/// Density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    /// Validates Hermiticity and trace at 1e-12 and eigenvalues ≥ −1e-10.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(QetError::DimensionMismatch("density matrix must be square".into()));
        }
        matrix.ensure_hermitian(1e-12)?;
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(QetError::InvalidState(format!("trace {tr} ≠ 1")));
        }
        let min = hermitian_eig(&matrix)?.values[0];
        if min < -1e-10 {
            return Err(QetError::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix already known to be a valid state (produced by a
    /// trace-preserving map of a valid state). Only the Hermitian part is
    /// kept to scrub roundoff.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        Self {
            matrix: matrix.hermitian_part(),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale_re(1.0 / dim as f64),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Tr ρ²
    pub fn purity(&self) -> f64 {
        self.matrix.data().iter().map(|x| x.norm_sqr()).sum()
    }

    /// U ρ U†
    pub fn evolve(&self, u: &ComplexMatrix) -> Self {
        Self::from_trusted(&(u * &self.matrix) * &u.dagger())
    }

    /// Σ K ρ K† — caller guarantees completeness.
    pub fn apply_kraus(&self, kraus: &[ComplexMatrix]) -> Self {
        let mut acc = ComplexMatrix::zeros(self.dim(), self.dim());
        for k in kraus {
            acc = &acc + &(&(k * &self.matrix) * &k.dagger());
        }
        Self::from_trusted(acc)
    }

    /// Convex mixture Σ wᵢ ρᵢ.
    pub fn mixture(parts: &[(f64, &DensityOperator)]) -> Result<Self> {
        let dim = parts
            .first()
            .ok_or_else(|| QetError::InvalidState("empty mixture".into()))?
            .1
            .dim();
        let mut acc = ComplexMatrix::zeros(dim, dim);
        for (w, r) in parts {
            acc = &acc + &r.matrix.scale_re(*w);
        }
        Self::new(acc.hermitian_part())
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(hermitian_eig(&self.matrix)?.values)
    }

    /// ½‖ρ − σ‖₁
    pub fn trace_distance(&self, other: &DensityOperator) -> Result<f64> {
        let diff = (&self.matrix - &other.matrix).hermitian_part();
        let e = hermitian_eig(&diff)?;
        Ok(0.5 * e.values.iter().map(|x| x.abs()).sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_on_construction() {
        let s = StateVector::from_real(&[3.0, 4.0]).unwrap();
        let n: f64 = s.amplitudes().iter().map(|a| a.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_zero_vector() {
        assert!(StateVector::from_real(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn density_validation() {
        let bad = ComplexMatrix::diag_real(&[1.5, -0.5]);
        assert!(DensityOperator::new(bad).is_err());
        let ok = ComplexMatrix::diag_real(&[0.25, 0.75]);
        assert!((DensityOperator::new(ok).unwrap().purity() - 0.625).abs() < 1e-15);
    }

    #[test]
    fn trace_distance_orthogonal_states() {
        let a = StateVector::basis(2, 0).to_density();
        let b = StateVector::basis(2, 1).to_density();
        assert!((a.trace_distance(&b).unwrap() - 1.0).abs() < 1e-14);
    }
}
