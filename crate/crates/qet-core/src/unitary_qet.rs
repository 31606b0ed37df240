//! Fully unitary (LOQC) protocol with a quantum ancilla An, plus the
//! explicit NMR extraction unitaries and the experiment's timing budget.
//!
//! Register: A ⊗ An ⊗ B (qubits 0, 1, 2). Hamiltonian on A⊗B:
//! H_ν = −h_ν σz^ν + h_ν f₃, V = 2kσx⊗σx + 4k²/(h_A+h_B)·f₃,
//! f₃ = (4k²/(h_A+h_B)² + 1)^{−1/2}.

use std::collections::BTreeMap;

use crate::error::{QetError, Result};
use crate::minimal_qet::bob_local;
use crate::qcore::{
    embed, expect, hadamard, id2, kron, partial_trace, sigma_x, sigma_y, sigma_z, ComplexMatrix, DensityOperator,
    QubitOrdering, StateVector, Subsystem, C64,
};

pub const QUBIT_A: usize = 0;
pub const QUBIT_AN: usize = 1;
pub const QUBIT_B: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitaryParams {
    pub h_a: f64,
    pub h_b: f64,
    pub k: f64,
}

impl UnitaryParams {
    pub fn new(h_a: f64, h_b: f64, k: f64) -> Result<Self> {
        let p = Self { h_a, h_b, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("h_a", self.h_a), ("h_b", self.h_b), ("k", self.k)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(QetError::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn f3(&self) -> f64 {
        let s = self.h_a + self.h_b;
        1.0 / (4.0 * self.k * self.k / (s * s) + 1.0).sqrt()
    }

    pub fn f_plus(&self) -> f64 {
        (1.0 + self.f3()).sqrt()
    }

    pub fn f_minus(&self) -> f64 {
        (1.0 - self.f3()).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct UnitaryModel {
    pub params: UnitaryParams,
    pub f3: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    pub h_a: ComplexMatrix,
    pub h_b: ComplexMatrix,
    pub v_ab: ComplexMatrix,
    pub h_total: ComplexMatrix,
    /// Ground state on A⊗B.
    pub ground: StateVector,
}

impl UnitaryModel {
    /// Operator on A⊗B lifted to the A⊗An⊗B register.
    pub fn lift(&self, op_ab: &ComplexMatrix) -> ComplexMatrix {
        embed(op_ab, &[QUBIT_A, QUBIT_B], 3).expect("4×4 operator")
    }

    /// |g⟩_AB ⊗ |0⟩_An in register order.
    pub fn ground_with_ancilla(&self) -> StateVector {
        let g = self.ground.amplitudes();
        let mut amps = vec![C64::new(0.0, 0.0); 8];
        for a in 0..2 {
            for b in 0..2 {
                amps[(a << 2) | b] = g[(a << 1) | b];
            }
        }
        StateVector::new(amps).expect("normalized ground")
    }
}

pub fn build_unitary_model(p: UnitaryParams) -> Result<UnitaryModel> {
    p.validate()?;
    let f3 = p.f3();
    let s = p.h_a + p.h_b;
    let id4 = ComplexMatrix::identity(4);
    let h_a = &kron(&sigma_z(), &id2()).scale_re(-p.h_a) + &id4.scale_re(p.h_a * f3);
    let h_b = &kron(&id2(), &sigma_z()).scale_re(-p.h_b) + &id4.scale_re(p.h_b * f3);
    let v_ab = &kron(&sigma_x(), &sigma_x()).scale_re(2.0 * p.k) + &id4.scale_re(4.0 * p.k * p.k / s * f3);
    let h_total = &(&h_a + &h_b) + &v_ab;
    let ground = StateVector::from_real(&[p.f_plus(), 0.0, 0.0, -p.f_minus()])?;
    Ok(UnitaryModel {
        params: p,
        f3,
        f_plus: p.f_plus(),
        f_minus: p.f_minus(),
        h_a,
        h_b,
        v_ab,
        h_total,
        ground,
    })
}

/// The ancilla measurement unitary on An⊗A (An is the left factor):
/// |0 0⟩→Φ⁻, |0 1⟩→Ψ⁻, |1 0⟩→Ψ⁺, |1 1⟩→Φ⁺.
pub fn ancilla_unitary() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_real(
        4,
        4,
        &[
            s, 0.0, 0.0, s, //
            0.0, s, s, 0.0, //
            0.0, -s, s, 0.0, //
            -s, 0.0, 0.0, s,
        ],
    )
}

/// CNOT on a two-qubit space with the left factor as control.
pub fn cnot() -> ComplexMatrix {
    ComplexMatrix::from_real(
        4,
        4,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, 1.0, 0.0,
        ],
    )
}

/// (Z⊗1)·CNOT·(H⊗1)·CNOT on An⊗A, optionally without the final Z.
pub fn ancilla_gate_sequence(with_final_z: bool) -> ComplexMatrix {
    let hh = kron(&hadamard(), &id2());
    let mut u = &(&cnot() * &hh) * &cnot();
    if with_final_z {
        u = &kron(&sigma_z(), &id2()) * &u;
    }
    u
}

/// Phase-aligned distance between the gate sequence and the ancilla unitary.
pub fn gate_decomposition_check() -> f64 {
    ancilla_unitary().phase_distance(&ancilla_gate_sequence(true))
}

/// Û_{B An} = u₀ ⊗ |0⟩⟨0| + u₁ ⊗ |1⟩⟨1| on B⊗An, lifted to the register.
pub fn conditional_extraction(u0: &ComplexMatrix, u1: &ComplexMatrix) -> Result<ComplexMatrix> {
    for u in [u0, u1] {
        if u.rows() != 2 || u.cols() != 2 {
            return Err(QetError::DimensionMismatch("extraction blocks must be 2×2".into()));
        }
        u.ensure_unitary(1e-10)?;
    }
    let p0 = ComplexMatrix::diag_real(&[1.0, 0.0]);
    let p1 = ComplexMatrix::diag_real(&[0.0, 1.0]);
    let block = &kron(u0, &p0) + &kron(u1, &p1);
    embed(&block, &[QUBIT_B, QUBIT_AN], 3)
}

/// Register state after Alice's ancilla interaction: U_{An A}(|g⟩⊗|0⟩).
pub fn post_ancilla_state(m: &UnitaryModel) -> StateVector {
    let u = embed(&ancilla_unitary(), &[QUBIT_AN, QUBIT_A], 3).expect("4×4");
    m.ground_with_ancilla().evolve(&u).expect("unitary")
}

/// B-marginal of the full LOQC circuit with Bob's blocks labelled by Alice's
/// σx outcome.
///
/// The ancilla unitary writes the σx^A outcome into the ancilla's σx basis
/// (|+⟩_An ↔ α = −1, |−⟩_An ↔ α = +1), so Bob reads it with a Hadamard on
/// An before the computationally controlled extraction: u₀ = U(α=−1),
/// u₁ = U(α=+1).
pub fn loqc_state(m: &UnitaryModel, u_plus: &ComplexMatrix, u_minus: &ComplexMatrix) -> Result<DensityOperator> {
    let readout = embed(&hadamard(), &[QUBIT_AN], 3)?;
    let ctrl = conditional_extraction(u_minus, u_plus)?;
    let psi = post_ancilla_state(m).evolve(&readout)?.evolve(&ctrl)?;
    Ok(psi.to_density())
}

pub fn loqc_b_marginal(m: &UnitaryModel, u_plus: &ComplexMatrix, u_minus: &ComplexMatrix) -> Result<DensityOperator> {
    let rho = loqc_state(m, u_plus, u_minus)?;
    partial_trace(&rho, &QubitOrdering::a_an_b(), &[Subsystem::B])
}

/// Minimal-protocol ensemble Σ_α (1⊗U_α) P(α) |g⟩⟨g| P(α) (1⊗U_α)† on A⊗B.
pub fn minimal_ensemble_state(m: &UnitaryModel, u_plus: &ComplexMatrix, u_minus: &ComplexMatrix) -> Result<DensityOperator> {
    let g = m.ground.projector();
    let mut acc = ComplexMatrix::zeros(4, 4);
    for (alpha, u) in [(1.0, u_plus), (-1.0, u_minus)] {
        let proj = kron(&(&id2() + &sigma_x().scale_re(alpha)).scale_re(0.5), &id2());
        let k = &kron(&id2(), u) * &proj;
        acc = &acc + &(&(&k * &g) * &k.dagger());
    }
    DensityOperator::new(acc.hermitian_part())
}

pub fn minimal_ensemble_b_marginal(
    m: &UnitaryModel,
    u_plus: &ComplexMatrix,
    u_minus: &ComplexMatrix,
) -> Result<DensityOperator> {
    let rho = minimal_ensemble_state(m, u_plus, u_minus)?;
    partial_trace(&rho, &QubitOrdering::ab(), &[Subsystem::B])
}

/// √(h_B²+4k²) − (h_B(h_A+h_B)+4k²)/√((h_A+h_B)²+4k²)
pub fn max_extraction_bound(p: UnitaryParams) -> f64 {
    let s = p.h_a + p.h_b;
    let k2 = 4.0 * p.k * p.k;
    (p.h_b * p.h_b + k2).sqrt() - (p.h_b * s + k2) / (s * s + k2).sqrt()
}

/// h_A/√(1 + 4k²/(h_A+h_B)²)
pub fn alice_energy(p: UnitaryParams) -> f64 {
    p.h_a * p.f3()
}

/// Energy injected by the ancilla interaction, from the register state.
pub fn alice_energy_numeric(m: &UnitaryModel) -> Result<f64> {
    expect(&m.lift(&m.h_total), &post_ancilla_state(m))
}

/// (U_rot, U_diag) acting on B⊗An.
pub fn nmr_extraction_unitaries(p: UnitaryParams) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let m = build_unitary_model(p)?;
    let r = p.h_b / (p.h_b * p.h_b + 4.0 * p.k * p.k).sqrt();
    let (f2p, f2m) = ((1.0 + r).sqrt(), (1.0 - r).sqrt());
    let (fp, fm) = (m.f_plus, m.f_minus);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let u_rot = ComplexMatrix::from_real(
        4,
        4,
        &[
            f2p, f2m, 0.0, 0.0, //
            0.0, 0.0, -f2p, f2m, //
            0.0, 0.0, f2m, f2p, //
            -f2m, f2p, 0.0, 0.0,
        ],
    )
    .scale_re(s);
    let u_diag = ComplexMatrix::from_real(
        4,
        4,
        &[
            0.0, fp, fm, 0.0, //
            fm, 0.0, 0.0, -fp, //
            fp, 0.0, 0.0, fm, //
            0.0, -fm, fp, 0.0,
        ],
    )
    .scale_re(s);
    Ok((u_rot, u_diag))
}

/// Energy change produced by applying U_rot·U_diag on (B, An) after the
/// ancilla interaction. Negative values are extracted energy.
pub fn nmr_extraction_energy(p: UnitaryParams) -> Result<f64> {
    let m = build_unitary_model(p)?;
    let (u_rot, u_diag) = nmr_extraction_unitaries(p)?;
    let u = embed(&(&u_rot * &u_diag), &[QUBIT_B, QUBIT_AN], 3)?;
    let before = post_ancilla_state(&m);
    let after = before.evolve(&u)?;
    let h = m.lift(&m.h_total);
    Ok(expect(&h, &after)? - expect(&h, &before)?)
}

/// Energy change for σx-outcome-conditioned blocks run through the LOQC
/// circuit.
pub fn loqc_extraction_energy(m: &UnitaryModel, u_plus: &ComplexMatrix, u_minus: &ComplexMatrix) -> Result<f64> {
    let h = m.lift(&m.h_total);
    let before = post_ancilla_state(m);
    let after = loqc_state(m, u_plus, u_minus)?;
    Ok(expect(&h, &after)? - expect(&h, &before)?)
}

/// Minimal-type extraction blocks cos θ·1 ∓ i sin θ·σy.
pub fn rotation_blocks(theta: f64) -> (ComplexMatrix, ComplexMatrix) {
    (bob_local(1.0, theta), bob_local(-1.0, theta))
}

/// Rotation angle with cos θ = F₊/√2, sin θ = F₋/√2 (θ ∈ (0, π/2)).
pub fn prep_angle(p: UnitaryParams) -> f64 {
    p.f_minus().atan2(p.f_plus())
}

/// Preparation unitary on the register: a rotation of B followed by CNOT
/// with B as control and A as target.
///
/// The rotation is exp(+iθσy) = cos θ·1 + i sin θ·σy, which gives
/// F₊|00⟩ − F₋|11⟩; the opposite rotation sense would produce the
/// relative sign of an excited state.
pub fn ground_prep_unitary(p: UnitaryParams) -> Result<ComplexMatrix> {
    p.validate()?;
    let theta = prep_angle(p);
    let rot = &id2().scale_re(theta.cos()) + &sigma_y().scale(C64::new(0.0, theta.sin()));
    let y = embed(&rot, &[QUBIT_B], 3)?;
    let cx = embed(&cnot(), &[QUBIT_B, QUBIT_A], 3)?;
    Ok(&cx * &y)
}

/// Timing budget of the NMR run: each ancilla coupling costs 1/J, and the
/// whole protocol must finish before energy can propagate over the A–B
/// coupling, t_AB = 1/J_AB.
#[derive(Clone, Debug, PartialEq)]
pub struct TimescaleBudget {
    pub j_couplings: BTreeMap<String, f64>,
    pub t_an_a: f64,
    pub t_an_b: f64,
    pub t_pulse: f64,
    pub t_total: f64,
    pub t_ab: f64,
    pub valid: bool,
}

pub fn timescale_budget(j_an_a: f64, j_an_b: f64, t_pulse: f64, j_ab: f64) -> Result<TimescaleBudget> {
    for (name, v) in [("j_an_a", j_an_a), ("j_an_b", j_an_b), ("j_ab", j_ab)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(QetError::param(name, format!("coupling must be positive, got {v}")));
        }
    }
    if !(t_pulse >= 0.0 && t_pulse.is_finite()) {
        return Err(QetError::param("t_pulse", format!("must be non-negative, got {t_pulse}")));
    }
    let t_an_a = 1.0 / j_an_a;
    let t_an_b = 1.0 / j_an_b;
    let t_total = t_an_a + t_an_b + t_pulse;
    let t_ab = 1.0 / j_ab;
    let j_couplings = BTreeMap::from([
        ("An-A".to_string(), j_an_a),
        ("An-B".to_string(), j_an_b),
        ("A-B".to_string(), j_ab),
    ]);
    Ok(TimescaleBudget {
        j_couplings,
        t_an_a,
        t_an_b,
        t_pulse,
        t_total,
        t_ab,
        valid: t_total < t_ab,
    })
}
