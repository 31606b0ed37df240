//! Minimal two-qubit LOCC protocol.
//!
//! H = H_A + H_B + V with H_A = hσz⊗1 + f, H_B = 1⊗hσz + f,
//! V = 2kσx⊗σx + 2(k²/h²)f and f = h²/√(h²+k²); the offsets pin the ground
//! energy and every local ground-state expectation to zero.

use crate::error::{QetError, Result};
use crate::qcore::{
    expect, hermitian_eig, id2, kron, sigma_x, sigma_y, sigma_z, unitary_evolution, ComplexMatrix, DensityOperator,
    StateVector, C64,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinimalParams {
    pub h: f64,
    pub k: f64,
}

impl MinimalParams {
    pub fn new(h: f64, k: f64) -> Result<Self> {
        let p = Self { h, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(QetError::param("h", format!("must be positive and finite, got {}", self.h)));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(QetError::param("k", format!("must be positive and finite, got {}", self.k)));
        }
        Ok(())
    }

    /// f(h,k) = h²/√(h²+k²)
    pub fn f(&self) -> f64 {
        self.h * self.h / self.h.hypot(self.k)
    }

    /// C± = √(1 ± f/h)
    pub fn c_plus(&self) -> f64 {
        (1.0 + self.f() / self.h).sqrt()
    }

    pub fn c_minus(&self) -> f64 {
        (1.0 - self.f() / self.h).sqrt()
    }
}

/// Energy bookkeeping of one protocol run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyLedger {
    /// Energy deposited by Alice's measurement.
    pub e_pa: f64,
    /// ⟨H_B⟩ after Bob's operation.
    pub e_hb: f64,
    /// ⟨V_AB⟩ after Bob's operation.
    pub e_vab: f64,
    /// Energy change caused by Bob's operation (negative = extracted).
    pub e_ub: f64,
}

#[derive(Clone, Debug)]
pub struct MinimalModel {
    pub params: MinimalParams,
    pub f: f64,
    pub h_a: ComplexMatrix,
    pub h_b: ComplexMatrix,
    pub v_ab: ComplexMatrix,
    pub h_total: ComplexMatrix,
    pub ground: StateVector,
}

impl MinimalModel {
    pub fn ground_density(&self) -> DensityOperator {
        self.ground.to_density()
    }
}

pub fn build_model(p: MinimalParams) -> Result<MinimalModel> {
    p.validate()?;
    let (h, k) = (p.h, p.k);
    let f = p.f();
    let id4 = ComplexMatrix::identity(4);
    let h_a = &kron(&sigma_z(), &id2()).scale_re(h) + &id4.scale_re(f);
    let h_b = &kron(&id2(), &sigma_z()).scale_re(h) + &id4.scale_re(f);
    let v_ab = &kron(&sigma_x(), &sigma_x()).scale_re(2.0 * k) + &id4.scale_re(2.0 * k * k / (h * h) * f);
    let h_total = &(&h_a + &h_b) + &v_ab;
    // (C₋|00⟩ − C₊|11⟩)/√2: the |11⟩ component dominates because σz|1⟩ = −|1⟩.
    let ground = StateVector::from_real(&[p.c_minus(), 0.0, 0.0, -p.c_plus()])?;
    Ok(MinimalModel {
        params: p,
        f,
        h_a,
        h_b,
        v_ab,
        h_total,
        ground,
    })
}

fn check_alpha(alpha: i32) -> Result<f64> {
    match alpha {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        _ => Err(QetError::param("alpha", format!("must be +1 or -1, got {alpha}"))),
    }
}

/// P_A(α) = ½(1 + ασx) ⊗ 1
pub fn projector(alpha: i32) -> Result<ComplexMatrix> {
    let a = check_alpha(alpha)?;
    let local = (&id2() + &sigma_x().scale_re(a)).scale_re(0.5);
    Ok(kron(&local, &id2()))
}

/// ρ₁ = ½|g⟩⟨g| + ½σx^A|g⟩⟨g|σx^A
pub fn post_measurement_state(m: &MinimalModel) -> DensityOperator {
    let g = m.ground_density();
    let flipped = g.evolve(&kron(&sigma_x(), &id2()));
    DensityOperator::mixture(&[(0.5, &g), (0.5, &flipped)]).expect("mixture of valid states")
}

/// θ* = ½·atan2(hk, h² + 2k²)
pub fn optimal_theta(p: MinimalParams) -> f64 {
    0.5 * (p.h * p.k).atan2(p.h * p.h + 2.0 * p.k * p.k)
}

/// 1_A ⊗ (cos θ·1 − iα sin θ·σy)
pub fn bob_unitary(alpha: i32, theta: f64) -> Result<ComplexMatrix> {
    let a = check_alpha(alpha)?;
    Ok(kron(&id2(), &bob_local(a, theta)))
}

pub(crate) fn bob_local(alpha: f64, theta: f64) -> ComplexMatrix {
    &id2().scale_re(theta.cos()) + &sigma_y().scale(C64::new(0.0, -alpha * theta.sin()))
}

/// ρ₂ = Σ_α U_B(α) P(α) |g⟩⟨g| P(α) U_B(α)†
pub fn protocol_state(m: &MinimalModel, theta: f64) -> Result<DensityOperator> {
    let g = m.ground.projector();
    let mut acc = ComplexMatrix::zeros(4, 4);
    for alpha in [1, -1] {
        let k = &bob_unitary(alpha, theta)? * &projector(alpha)?;
        acc = &acc + &(&(&k * &g) * &k.dagger());
    }
    DensityOperator::new(acc.hermitian_part())
}

/// Closed-form energy change caused by Bob's rotation.
pub fn e_ub_closed_form(p: MinimalParams, theta: f64) -> f64 {
    let (h, k) = (p.h, p.k);
    let s2 = (2.0 * theta).sin();
    let c2 = (2.0 * theta).cos();
    -(h * k * s2 - (h * h + 2.0 * k * k) * (1.0 - c2)) / h.hypot(k)
}

pub fn run_protocol(p: MinimalParams, theta: f64) -> Result<EnergyLedger> {
    if !theta.is_finite() {
        return Err(QetError::param("theta", "must be finite"));
    }
    let m = build_model(p)?;
    let rho1 = post_measurement_state(&m);
    let rho2 = protocol_state(&m, theta)?;
    let e_pa = expect(&m.h_total, &rho1)?;
    let e_hb = expect(&m.h_b, &rho2)?;
    let e_vab = expect(&m.v_ab, &rho2)?;
    let e_ub = expect(&m.h_total, &rho2)? - e_pa;
    let closed = e_ub_closed_form(p, theta);
    if (e_ub - closed).abs() > 1e-10 {
        return Err(QetError::Numerical(format!(
            "density-matrix E_UB {e_ub} disagrees with closed form {closed}"
        )));
    }
    Ok(EnergyLedger { e_pa, e_hb, e_vab, e_ub })
}

/// E_W = ⟨g|W†HW|g⟩ for a unitary W acting on B alone.
pub fn no_communication_cost(p: MinimalParams, w: &ComplexMatrix) -> Result<f64> {
    if w.rows() != 2 || w.cols() != 2 {
        return Err(QetError::DimensionMismatch("W must be a 2×2 operator on B".into()));
    }
    w.ensure_unitary(1e-10)?;
    let m = build_model(p)?;
    let psi = m.ground.evolve(&kron(&id2(), w))?;
    expect(&m.h_total, &psi)
}

/// ⟨H_B⟩ and ⟨V_AB⟩ at time t after Alice's measurement, evolved exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyFlow {
    pub t: f64,
    pub closed_form: f64,
    pub h_b: f64,
    pub v_ab: f64,
}

pub fn energy_flow(p: MinimalParams, t: f64) -> Result<EnergyFlow> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(QetError::param("t", format!("must be non-negative, got {t}")));
    }
    let m = build_model(p)?;
    let rho1 = post_measurement_state(&m);
    let u = unitary_evolution(&m.h_total, t)?;
    let rho_t = rho1.evolve(&u);
    let h_b = expect(&m.h_b, &rho_t)?;
    let v_ab = expect(&m.v_ab, &rho_t)?;
    let closed_form = 0.5 * m.f * (1.0 - (4.0 * p.k * t).cos());
    if (h_b - closed_form).abs() > 1e-9 {
        return Err(QetError::Numerical(format!(
            "evolved ⟨H_B⟩ {h_b} disagrees with closed form {closed_form}"
        )));
    }
    Ok(EnergyFlow {
        t,
        closed_form,
        h_b,
        v_ab,
    })
}

/// First time at which ⟨H_B(t)⟩ peaks: π/(4k).
pub fn characteristic_time(p: MinimalParams) -> f64 {
    std::f64::consts::PI / (4.0 * p.k)
}

/// Ground energy and ground vector straight from the eigensolver, used as an
/// independent check of the closed-form state.
pub fn numerical_ground(m: &MinimalModel) -> Result<(f64, StateVector)> {
    let e = hermitian_eig(&m.h_total)?;
    Ok((e.values[0], StateVector::new(e.vector(0))?))
}
