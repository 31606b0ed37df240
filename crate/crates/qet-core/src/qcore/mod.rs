//! Dense complex linear algebra and few-qubit state utilities.
//!
//! Global register convention: A ⊗ An ⊗ B, with the leftmost factor the most
//! significant bit of a basis index. Two-qubit scenarios drop An.

mod eig;
mod matrix;
mod pauli;
mod state;

pub use eig::{expi_hermitian, hermitian_eig, singular_values, unitary_evolution, Eigen, MAX_EIG_DIM};
pub use matrix::{c, kron, kron_all, kron_vec, re, ComplexMatrix, C64, I, ONE, ZERO};
pub use pauli::{hadamard, id2, matexp_pauli_pair, ry, sigma_x, sigma_y, sigma_z, Pauli};
pub use state::{DensityOperator, StateVector};

use crate::error::{QetError, Result};

/// Subsystem tags of the global register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Subsystem {
    A,
    An,
    B,
}

/// Ordered subsystem labels; always a subsequence of A, An, B.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QubitOrdering {
    labels: Vec<Subsystem>,
}

impl QubitOrdering {
    pub fn ab() -> Self {
        Self {
            labels: vec![Subsystem::A, Subsystem::B],
        }
    }

    pub fn a_an_b() -> Self {
        Self {
            labels: vec![Subsystem::A, Subsystem::An, Subsystem::B],
        }
    }

    /// Rejects orderings that break the A ⊗ An ⊗ B convention.
    pub fn new(labels: Vec<Subsystem>) -> Result<Self> {
        let rank = |s: &Subsystem| match s {
            Subsystem::A => 0,
            Subsystem::An => 1,
            Subsystem::B => 2,
        };
        if labels.windows(2).any(|w| rank(&w[0]) >= rank(&w[1])) {
            return Err(QetError::DimensionMismatch(format!(
                "ordering {labels:?} violates A ⊗ An ⊗ B"
            )));
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[Subsystem] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn position(&self, s: Subsystem) -> Option<usize> {
        self.labels.iter().position(|&x| x == s)
    }
}

/// Partial trace over arbitrary local dimensions, keeping the listed factor
/// indices (output factors appear in ascending index order).
pub fn partial_trace_dims(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.rows() != total {
        return Err(QetError::DimensionMismatch(format!(
            "matrix {}x{} does not match factor dims {dims:?}",
            m.rows(),
            m.cols()
        )));
    }
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(QetError::DimensionMismatch(format!("keep {keep:?} out of range")));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !kept.contains(i)).collect();
    let dk: usize = kept.iter().map(|&i| dims[i]).product();
    let dt: usize = traced.iter().map(|&i| dims[i]).product();

    let compose = |kd: &[usize], td: &[usize]| -> usize {
        let mut full = vec![0; dims.len()];
        for (slot, &f) in kept.iter().enumerate() {
            full[f] = kd[slot];
        }
        for (slot, &f) in traced.iter().enumerate() {
            full[f] = td[slot];
        }
        full.iter().zip(dims).fold(0, |acc, (&x, &d)| acc * d + x)
    };
    let sub_digits = |mut idx: usize, which: &[usize]| -> Vec<usize> {
        let mut d = vec![0; which.len()];
        for s in (0..which.len()).rev() {
            d[s] = idx % dims[which[s]];
            idx /= dims[which[s]];
        }
        d
    };

    let mut out = ComplexMatrix::zeros(dk, dk);
    for i in 0..dk {
        let ki = sub_digits(i, &kept);
        for j in 0..dk {
            let kj = sub_digits(j, &kept);
            let mut acc = ZERO;
            for t in 0..dt {
                let td = sub_digits(t, &traced);
                acc += m[(compose(&ki, &td), compose(&kj, &td))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Partial trace of a register state, keeping the listed subsystems.
pub fn partial_trace(rho: &DensityOperator, ordering: &QubitOrdering, keep: &[Subsystem]) -> Result<DensityOperator> {
    let n = ordering.len();
    if rho.dim() != 1 << n {
        return Err(QetError::DimensionMismatch(format!(
            "state of dim {} does not match {n}-qubit ordering",
            rho.dim()
        )));
    }
    let idx: Vec<usize> = keep
        .iter()
        .map(|s| {
            ordering
                .position(*s)
                .ok_or_else(|| QetError::DimensionMismatch(format!("{s:?} not in ordering")))
        })
        .collect::<Result<_>>()?;
    let m = partial_trace_dims(rho.matrix(), &vec![2; n], &idx)?;
    Ok(DensityOperator::from_trusted(m))
}

/// Lifts an operator acting on `targets` (listed in the operator's own
/// factor order) to the full `n`-qubit register.
pub fn embed(op: &ComplexMatrix, targets: &[usize], n: usize) -> Result<ComplexMatrix> {
    let k = targets.len();
    if op.rows() != 1 << k || !op.is_square() {
        return Err(QetError::DimensionMismatch(format!(
            "operator {}x{} does not act on {k} qubits",
            op.rows(),
            op.cols()
        )));
    }
    if targets.iter().any(|&t| t >= n) || (1..k).any(|i| targets[..i].contains(&targets[i])) {
        return Err(QetError::DimensionMismatch(format!("bad targets {targets:?} for width {n}")));
    }
    let dim = 1 << n;
    let mut out = ComplexMatrix::zeros(dim, dim);
    let sub_index = |full: usize| -> usize {
        targets
            .iter()
            .fold(0, |acc, &t| (acc << 1) | ((full >> (n - 1 - t)) & 1))
    };
    let with_sub = |full: usize, sub: usize| -> usize {
        let mut r = full;
        for (i, &t) in targets.iter().enumerate() {
            let bit = (sub >> (k - 1 - i)) & 1;
            let pos = n - 1 - t;
            r = (r & !(1 << pos)) | (bit << pos);
        }
        r
    };
    for col in 0..dim {
        let sc = sub_index(col);
        for sr in 0..(1 << k) {
            let amp = op[(sr, sc)];
            if amp != ZERO {
                out[(with_sub(col, sr), col)] += amp;
            }
        }
    }
    Ok(out)
}

/// Borrowed view used by [`expect`].
#[derive(Clone, Copy, Debug)]
pub enum StateRef<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityOperator),
}

impl<'a> From<&'a StateVector> for StateRef<'a> {
    fn from(s: &'a StateVector) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityOperator> for StateRef<'a> {
    fn from(s: &'a DensityOperator) -> Self {
        StateRef::Mixed(s)
    }
}

/// Tr(ρ O) for a Hermitian observable.
pub fn expect<'a>(obs: &ComplexMatrix, state: impl Into<StateRef<'a>>) -> Result<f64> {
    obs.ensure_hermitian(1e-10)?;
    let v = match state.into() {
        StateRef::Pure(psi) => {
            if obs.cols() != psi.dim() {
                return Err(QetError::DimensionMismatch("observable vs state".into()));
            }
            let o_psi = obs.matvec(psi.amplitudes());
            psi.amplitudes()
                .iter()
                .zip(&o_psi)
                .map(|(a, b)| a.conj() * b)
                .sum::<C64>()
        }
        StateRef::Mixed(rho) => {
            if obs.cols() != rho.dim() {
                return Err(QetError::DimensionMismatch("observable vs state".into()));
            }
            (rho.matrix() * obs).trace()
        }
    };
    if v.im.abs() > 1e-10 {
        return Err(QetError::Numerical(format!("expectation has imaginary part {:.3e}", v.im)));
    }
    Ok(v.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell_phi_plus() -> StateVector {
        StateVector::from_real(&[1.0, 0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn sigma_z_on_first_factor_flips_sign_of_10() {
        let op = kron(&sigma_z(), &id2());
        let v = op.matvec(StateVector::basis(4, 2).amplitudes());
        assert_eq!(v[2], -ONE);
    }

    #[test]
    fn xx_squared_is_identity() {
        let xx = kron(&sigma_x(), &sigma_x());
        assert_eq!(&xx * &xx, ComplexMatrix::identity(4));
    }

    #[test]
    fn trace_out_a_of_product() {
        let rho = StateVector::basis(4, 0).to_density();
        let rb = partial_trace(&rho, &QubitOrdering::ab(), &[Subsystem::B]).unwrap();
        assert!(rb.matrix().approx_eq(&ComplexMatrix::diag_real(&[1.0, 0.0]), 1e-15));
    }

    #[test]
    fn trace_out_a_of_bell() {
        let rho = bell_phi_plus().to_density();
        let rb = partial_trace(&rho, &QubitOrdering::ab(), &[Subsystem::B]).unwrap();
        assert!(rb.matrix().approx_eq(&ComplexMatrix::diag_real(&[0.5, 0.5]), 1e-15));
    }

    #[test]
    fn partial_trace_dimension_mismatch() {
        let rho = DensityOperator::maximally_mixed(8);
        assert!(partial_trace(&rho, &QubitOrdering::ab(), &[Subsystem::A]).is_err());
    }

    #[test]
    fn partial_trace_mixed_dims() {
        // 3 ⊗ 2 product, keep the qutrit
        let a = ComplexMatrix::diag_real(&[0.2, 0.3, 0.5]);
        let b = ComplexMatrix::diag_real(&[0.6, 0.4]);
        let ab = kron(&a, &b);
        assert!(partial_trace_dims(&ab, &[3, 2], &[0]).unwrap().approx_eq(&a, 1e-15));
        assert!(partial_trace_dims(&ab, &[3, 2], &[1]).unwrap().approx_eq(&b, 1e-15));
    }

    #[test]
    fn expect_identity_and_plus() {
        let plus = StateVector::from_real(&[1.0, 1.0]).unwrap();
        assert!((expect(&sigma_x(), &plus).unwrap() - 1.0).abs() < 1e-15);
        let rho = DensityOperator::maximally_mixed(4);
        assert!((expect(&ComplexMatrix::identity(4), &rho).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn expect_rejects_non_hermitian() {
        let op = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let plus = StateVector::from_real(&[1.0, 1.0]).unwrap();
        assert!(expect(&op, &plus).is_err());
    }

    #[test]
    fn embed_matches_kron_in_order() {
        let op = kron(&sigma_x(), &sigma_z());
        let full = embed(&op, &[0, 2], 3).unwrap();
        let direct = kron_all(&[&sigma_x(), &id2(), &sigma_z()]);
        assert_eq!(full, direct);
        // reversed target order swaps the factors
        let rev = embed(&op, &[2, 0], 3).unwrap();
        assert_eq!(rev, kron_all(&[&sigma_z(), &id2(), &sigma_x()]));
    }

    #[test]
    fn ordering_convention_enforced() {
        assert!(QubitOrdering::new(vec![Subsystem::B, Subsystem::A]).is_err());
        assert!(QubitOrdering::new(vec![Subsystem::A, Subsystem::B]).is_ok());
    }
}
