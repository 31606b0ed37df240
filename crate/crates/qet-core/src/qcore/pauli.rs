use super::matrix::{c, kron, ComplexMatrix, ONE, ZERO};

/// Single-qubit Pauli operators with σz|0⟩ = |0⟩, σz|1⟩ = −|1⟩.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const XYZ: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> ComplexMatrix {
        match self {
            Pauli::I => ComplexMatrix::identity(2),
            Pauli::X => ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]),
            Pauli::Y => ComplexMatrix::from_rows(&[&[ZERO, c(0.0, -1.0)], &[c(0.0, 1.0), ZERO]]),
            Pauli::Z => ComplexMatrix::from_rows(&[&[ONE, ZERO], &[ZERO, -ONE]]),
        }
    }
}

pub fn sigma_x() -> ComplexMatrix {
    Pauli::X.matrix()
}

pub fn sigma_y() -> ComplexMatrix {
    Pauli::Y.matrix()
}

pub fn sigma_z() -> ComplexMatrix {
    Pauli::Z.matrix()
}

pub fn id2() -> ComplexMatrix {
    ComplexMatrix::identity(2)
}

pub fn hadamard() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_real(2, 2, &[s, s, s, -s])
}

/// exp(iθ p⊗q) = cos θ·1 + i sin θ·p⊗q, exact because (p⊗q)² = 1.
pub fn matexp_pauli_pair(theta: f64, p: Pauli, q: Pauli) -> ComplexMatrix {
    let pq = kron(&p.matrix(), &q.matrix());
    let id = ComplexMatrix::identity(4).scale_re(theta.cos());
    &id + &pq.scale(c(0.0, theta.sin()))
}

/// R_Y(φ) = exp(−iφσy/2).
pub fn ry(phi: f64) -> ComplexMatrix {
    let (s, co) = (phi / 2.0).sin_cos();
    ComplexMatrix::from_real(2, 2, &[co, -s, s, co])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::I;

    #[test]
    fn pair_exp_at_zero_is_identity() {
        assert_eq!(
            matexp_pauli_pair(0.0, Pauli::Y, Pauli::Y),
            ComplexMatrix::identity(4)
        );
    }

    #[test]
    fn pair_exp_quarter_turn() {
        let u = matexp_pauli_pair(std::f64::consts::FRAC_PI_2, Pauli::Y, Pauli::Y);
        let expect = kron(&sigma_y(), &sigma_y()).scale(I);
        assert!(u.approx_eq(&expect, 1e-15));
    }

    #[test]
    fn pair_exp_unitary() {
        let u = matexp_pauli_pair(1.0, Pauli::X, Pauli::Z);
        assert!(u.unitarity_defect() < 1e-12);
    }

    #[test]
    fn paulis_square_to_identity_and_anticommute() {
        for p in Pauli::XYZ {
            let m = p.matrix();
            assert!((&m * &m).approx_eq(&id2(), 0.0));
        }
        let xy = &sigma_x() * &sigma_y();
        assert!(xy.approx_eq(&sigma_z().scale(I), 0.0));
    }
}
