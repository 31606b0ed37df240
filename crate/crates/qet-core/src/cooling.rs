//! QET-assisted algorithmic cooling of qubit B.
//!
//! Three routes are modelled: the LOCC protocol with a generalized σx
//! measurement on A, a fully unitary protocol through an ancilla Aₙ
//! (register order A, Aₙ, B), and the partner-pairing heat-bath baseline.
//!
//! POVM outcome α = +1 is index 0 and α = −1 is index 1 throughout.

use crate::error::{QetError, Result};
use crate::minimal_qet::{self, MinimalParams};
use crate::optim::{nelder_mead_restarts, NelderMeadOptions};
use crate::qcore::{
    embed, expi_hermitian, hermitian_eig, id2, kron, partial_trace_dims, sigma_x, sigma_y, sigma_z, ComplexMatrix,
    DensityOperator, Pauli, C64,
};

const IDX_A: usize = 0;
const IDX_AN: usize = 1;
const IDX_B: usize = 2;

/// Generalized measurement M(α) = e^{iδ_α}(m_α 1 + e^{iγ_α} l_α σx).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PovmParams {
    pub m: [f64; 2],
    pub l: [f64; 2],
    pub gamma: [f64; 2],
    pub delta: [f64; 2],
}

impl PovmParams {
    pub fn new(m: [f64; 2], l: [f64; 2], gamma: [f64; 2], delta: [f64; 2]) -> Result<Self> {
        let p = Self { m, l, gamma, delta };
        p.validate()?;
        Ok(p)
    }

    /// Projective σx measurement.
    pub fn pvm() -> Self {
        Self {
            m: [0.5, 0.5],
            l: [0.5, -0.5],
            gamma: [0.0; 2],
            delta: [0.0; 2],
        }
    }

    /// One-parameter family m_α = cos η/√2, l_α = α sin η/√2: η = π/4 is the
    /// PVM, η = 0 carries no information.
    pub fn sharpness(eta: f64) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            m: [eta.cos() * s, eta.cos() * s],
            l: [eta.sin() * s, -eta.sin() * s],
            gamma: [0.0; 2],
            delta: [0.0; 2],
        }
    }

    /// Random γ = 0 member: (m₁, l₁) drawn inside the unit disc, then
    /// (m₀, l₀) solved from the two constraints; δ random.
    pub fn random_real(rng: &mut impl rand::Rng) -> Self {
        loop {
            let m1: f64 = rng.random_range(-1.0..1.0);
            let l1: f64 = rng.random_range(-1.0..1.0);
            let r2 = 1.0 - m1 * m1 - l1 * l1;
            let s = -m1 * l1;
            if r2 <= 1e-3 || (2.0 * s).abs() > r2 {
                continue;
            }
            let phi = 0.5 * (2.0 * s / r2).asin();
            let phi = if rng.random::<bool>() {
                phi
            } else {
                std::f64::consts::FRAC_PI_2 - phi
            };
            let r = r2.sqrt();
            return Self {
                m: [r * phi.cos(), m1],
                l: [r * phi.sin(), l1],
                gamma: [0.0; 2],
                delta: [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)],
            };
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.m.iter().chain(&self.l).chain(&self.gamma).chain(&self.delta);
        if all.clone().any(|x| !x.is_finite()) {
            return Err(QetError::param("povm", "entries must be finite"));
        }
        let norm: f64 = (0..2).map(|a| self.m[a].powi(2) + self.l[a].powi(2)).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(QetError::param("povm", format!("Σ(m²+l²) = {norm}, expected 1")));
        }
        let cross: f64 = (0..2).map(|a| self.m[a] * self.l[a] * self.gamma[a].cos()).sum();
        if cross.abs() > 1e-12 {
            return Err(QetError::param("povm", format!("Σ m l cos γ = {cross}, expected 0")));
        }
        Ok(())
    }

    /// p_A(α) = m² + l².
    pub fn p_a(&self, idx: usize) -> f64 {
        self.m[idx].powi(2) + self.l[idx].powi(2)
    }

    /// q_A(α) = 2 l m cos γ.
    pub fn q_a(&self, idx: usize) -> f64 {
        2.0 * self.l[idx] * self.m[idx] * self.gamma[idx].cos()
    }

    pub fn is_gamma_free(&self) -> bool {
        self.gamma.iter().all(|&g| g == 0.0)
    }
}

fn outcome_index(alpha: i32) -> Result<usize> {
    match alpha {
        1 => Ok(0),
        -1 => Ok(1),
        _ => Err(QetError::param("alpha", format!("must be ±1, got {alpha}"))),
    }
}

/// [M(+1), M(−1)] on A.
pub fn povm_operators(p: &PovmParams) -> Result<[ComplexMatrix; 2]> {
    p.validate()?;
    let op = |i: usize| {
        let m = &ComplexMatrix::identity(2).scale_re(p.m[i]) + &sigma_x().scale(C64::from_polar(p.l[i], p.gamma[i]));
        m.scale(C64::from_polar(1.0, p.delta[i]))
    };
    Ok([op(0), op(1)])
}

/// Energy-optimal Bob angle Ω_α = ½ atan2(−hk q_A, (h²+2k²) p_A) for
/// U_B = cos Ω + i sin Ω σy.
pub fn optimal_omega(p: MinimalParams, povm: &PovmParams, alpha: i32) -> Result<f64> {
    let i = outcome_index(alpha)?;
    let pa = povm.p_a(i);
    if pa <= 0.0 {
        return Err(QetError::InvalidState(format!("outcome {alpha} has zero probability")));
    }
    Ok(0.5 * (-p.h * p.k * povm.q_a(i)).atan2((p.h * p.h + 2.0 * p.k * p.k) * pa))
}

/// cos Ω 1 + i sin Ω σy.
pub fn bob_rotation(omega: f64) -> ComplexMatrix {
    &ComplexMatrix::identity(2).scale_re(omega.cos()) + &sigma_y().scale(C64::new(0.0, omega.sin()))
}

fn b_marginal(rho: &DensityOperator, dims: &[usize], b: usize) -> Result<DensityOperator> {
    Ok(DensityOperator::from_trusted(partial_trace_dims(rho.matrix(), dims, &[b])?))
}

/// Initial purity of B in the ground state: (2h²+k²)/(2(h²+k²)).
pub fn initial_purity(p: MinimalParams) -> f64 {
    let (h2, k2) = (p.h * p.h, p.k * p.k);
    (2.0 * h2 + k2) / (2.0 * (h2 + k2))
}

/// Σ_α U_B(Ω_α) M(α) ρ M(α)† U_B(Ω_α)† on the two-qubit system.
pub fn povm_protocol_state(rho: &DensityOperator, povm: &PovmParams, omegas: [f64; 2]) -> Result<DensityOperator> {
    let ms = povm_operators(povm)?;
    let kraus: Vec<ComplexMatrix> = (0..2).map(|i| kron(&ms[i], &bob_rotation(omegas[i]))).collect();
    Ok(rho.apply_kraus(&kraus))
}

/// Bob's energy change for the POVM protocol on the ground state.
pub fn povm_extraction_energy(p: MinimalParams, povm: &PovmParams, omegas: [f64; 2]) -> Result<f64> {
    let m = minimal_qet::build_model(p)?;
    let ms = povm_operators(povm)?;
    let g = m.ground_density();
    let post = g.apply_kraus(&ms.iter().map(|x| kron(x, &id2())).collect::<Vec<_>>());
    let fin = povm_protocol_state(&g, povm, omegas)?;
    let e = |r: &DensityOperator| (r.matrix() * &m.h_total).trace().re;
    Ok(e(&fin) - e(&post))
}

/// Final purity of B by direct simulation on the ground state.
pub fn final_purity_povm_simulated(p: MinimalParams, povm: &PovmParams, omegas: [f64; 2]) -> Result<f64> {
    let g = minimal_qet::build_model(p)?.ground_density();
    Ok(b_marginal(&povm_protocol_state(&g, povm, omegas)?, &[2, 2], 1)?.purity())
}

/// Closed-form final purity of B (γ = 0), with d = Ω₀ − Ω₁:
/// 2/(h²+k²)·[h²/2 + k²/4 − hk l₁m₁ sin 2d
///            + (4k²l₁²m₁² + h²(l₁²+m₁²−1)(l₁²+m₁²)) sin²d].
pub fn final_purity_povm(p: MinimalParams, povm: &PovmParams, omegas: [f64; 2]) -> Result<f64> {
    povm.validate()?;
    if !povm.is_gamma_free() {
        return Err(QetError::param("gamma", "closed form requires γ = 0"));
    }
    let (h, k) = (p.h, p.k);
    let (l1, m1) = (povm.l[1], povm.m[1]);
    let d = omegas[0] - omegas[1];
    let s = l1 * l1 + m1 * m1;
    Ok(2.0 / (h * h + k * k)
        * (h * h / 2.0 + k * k / 4.0 - h * k * l1 * m1 * (2.0 * d).sin()
            + (4.0 * k * k * l1 * l1 * m1 * m1 + h * h * (s - 1.0) * s) * d.sin().powi(2)))
}

/// Energy-optimal angles [Ω(+1), Ω(−1)].
pub fn energy_optimal_omegas(p: MinimalParams, povm: &PovmParams) -> Result<[f64; 2]> {
    Ok([optimal_omega(p, povm, 1)?, optimal_omega(p, povm, -1)?])
}

/// Angles maximizing B's final purity on the ground state. The purity is
/// A + B cos 2d + C sin 2d in d = Ω₀ − Ω₁; the three coefficients come from
/// three evaluations and the maximum sits at 2d = atan2(C, B).
pub fn purity_optimal_omegas(p: MinimalParams, povm: &PovmParams) -> Result<[f64; 2]> {
    let at = |d: f64| final_purity_povm(p, povm, [0.5 * d, -0.5 * d]);
    let (f0, f1, f2) = (at(0.0)?, at(std::f64::consts::FRAC_PI_2)?, at(std::f64::consts::FRAC_PI_4)?);
    // f0 = A + B, f1 = A − B, f2 = A + C
    let a = 0.5 * (f0 + f1);
    let b = 0.5 * (f0 - f1);
    let c = f2 - a;
    let d = 0.5 * c.atan2(b);
    Ok([0.5 * d, -0.5 * d])
}

/// Thermal state e^{−βH}/Z, evaluated with energies shifted by E₀.
pub fn thermal_state(beta: f64, hamiltonian: &ComplexMatrix) -> Result<DensityOperator> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(QetError::param("beta", format!("must be finite and ≥ 0, got {beta}")));
    }
    let e = hermitian_eig(hamiltonian)?;
    let e0 = e.values[0];
    let z: f64 = e.values.iter().map(|&x| (-beta * (x - e0)).exp()).sum();
    let rho = e.map(|x| C64::new((-beta * (x - e0)).exp() / z, 0.0));
    DensityOperator::new(rho.hermitian_part())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PurityReport {
    pub p_initial: f64,
    pub p_final: f64,
}

/// How Bob's angles are chosen in the LOCC cooling protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngleChoice {
    /// Ground-state energy-optimal angles.
    Energy,
    /// Ground-state purity-optimal angles.
    Purity,
    /// Purity-optimal angles re-optimized for the actual thermal input.
    Reoptimized,
}

/// LOCC cooling of B starting from the thermal state of the minimal model.
pub fn locc_cooling(p: MinimalParams, beta: f64, povm: &PovmParams, choice: AngleChoice) -> Result<PurityReport> {
    let m = minimal_qet::build_model(p)?;
    let rho = thermal_state(beta, &m.h_total)?;
    let p_initial = b_marginal(&rho, &[2, 2], 1)?.purity();
    let purity_at = |om: [f64; 2]| -> Result<f64> { Ok(b_marginal(&povm_protocol_state(&rho, povm, om)?, &[2, 2], 1)?.purity()) };
    let omegas = match choice {
        AngleChoice::Energy => energy_optimal_omegas(p, povm)?,
        AngleChoice::Purity => purity_optimal_omegas(p, povm)?,
        AngleChoice::Reoptimized => {
            let start = purity_optimal_omegas(p, povm)?;
            let half = std::f64::consts::FRAC_PI_2;
            let f = |x: &[f64]| -purity_at([x[0], x[1]]).unwrap_or(f64::NAN);
            let best = nelder_mead_restarts(&f, Some(&start), &[(-half, half); 2], 4, 0, &NelderMeadOptions::default());
            [best.x[0], best.x[1]]
        }
    };
    Ok(PurityReport {
        p_initial,
        p_final: purity_at(omegas)?,
    })
}

/// Two-qubit system H = h_A σz⊗1 + h_B 1⊗σz + c σx⊗σx used for thermal
/// inputs of the ancilla protocols.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoolingSystem {
    pub h_a: f64,
    pub h_b: f64,
    pub coupling: f64,
}

impl CoolingSystem {
    pub fn new(h_a: f64, h_b: f64, coupling: f64) -> Result<Self> {
        for (n, v) in [("h_a", h_a), ("h_b", h_b), ("k", coupling)] {
            if !v.is_finite() {
                return Err(QetError::param(n, "must be finite"));
            }
        }
        Ok(Self { h_a, h_b, coupling })
    }

    /// The minimal model's coupling convention (2k σxσx).
    pub fn minimal(p: MinimalParams) -> Self {
        Self {
            h_a: p.h,
            h_b: p.h,
            coupling: 2.0 * p.k,
        }
    }

    pub fn hamiltonian(&self) -> ComplexMatrix {
        let z1 = kron(&sigma_z(), &id2()).scale_re(self.h_a);
        let z2 = kron(&id2(), &sigma_z()).scale_re(self.h_b);
        let xx = kron(&sigma_x(), &sigma_x()).scale_re(self.coupling);
        &(&z1 + &z2) + &xx
    }
}

/// Closed-form B purity after U_B = exp(iσx^B σz^{Aₙ}) ∘ U_A = exp(iσy^A σy^{Aₙ})
/// on ρ_β ⊗ τ_β(h_an):
/// P = ½ + ½ cos²2 (1 + tanh²(βh_an) sin²2) z²,
/// z = [(h_A−h_B) S₋/√h₋ − (h_A+h_B) S₊/√h₊] / (C₊ + C₋),
/// with h± = (h_A ± h_B)² + k², S± = sinh(β√h±), C± = cosh(β√h±).
pub fn ancilla_protocol_purity(sys: CoolingSystem, beta: f64, h_an: f64) -> Result<PurityReport> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(QetError::param("beta", format!("must be finite and ≥ 0, got {beta}")));
    }
    let (ha, hb, k) = (sys.h_a, sys.h_b, sys.coupling);
    let hp = (ha + hb).powi(2) + k * k;
    let hm = (ha - hb).powi(2) + k * k;
    if hp <= 0.0 || hm <= 0.0 {
        return Err(QetError::param("k", "h± must be positive"));
    }
    let (rp, rm) = (hp.sqrt(), hm.sqrt());
    // Divide through by cosh to stay finite at large β.
    let (tp, tm) = ((beta * rp).tanh(), (beta * rm).tanh());
    let w = 1.0 / (1.0 + (beta * (rm - rp)).exp() * (1.0 + (-2.0 * beta * rm).exp()) / (1.0 + (-2.0 * beta * rp).exp()));
    // C₊/(C₊+C₋) = w, C₋/(C₊+C₋) = 1 − w
    let z = (ha - hb) * tm * (1.0 - w) / rm - (ha + hb) * tp * w / rp;
    let t = (beta * h_an).tanh();
    let s2 = 2f64.sin().powi(2);
    let c2 = 2f64.cos().powi(2);
    let p_final = 0.5 + 0.5 * c2 * (1.0 + t * t * s2) * z * z;
    let rho = thermal_state(beta, &sys.hamiltonian())?;
    Ok(PurityReport {
        p_initial: b_marginal(&rho, &[2, 2], 1)?.purity(),
        p_final,
    })
}

/// The alternative closed form with h_r = √(½(h₋²+h₊²) − 8h_A²h_B²) and
/// sin⁴2 factors. Kept for comparison; it does not agree with simulation.
pub fn ancilla_protocol_purity_hr_form(sys: CoolingSystem, beta: f64, h_an: f64) -> Result<f64> {
    let (ha, hb, k) = (sys.h_a, sys.h_b, sys.coupling);
    let hp = (ha + hb).powi(2) + k * k;
    let hm = (ha - hb).powi(2) + k * k;
    let rad = 0.5 * (hm * hm + hp * hp) - 8.0 * ha * ha * hb * hb;
    if rad < 0.0 {
        return Err(QetError::param("h_r", format!("negative radicand {rad}")));
    }
    let hr = rad.sqrt();
    let (sp, sm) = ((beta * hp.sqrt()).sinh(), (beta * hm.sqrt()).sinh());
    let (cp, cm) = ((beta * hp.sqrt()).cosh(), (beta * hm.sqrt()).cosh());
    let t = k * k * 2f64.sin().powi(4) * (beta * h_an).tanh().powi(2);
    let den = 2.0 * hm * hp * (cm + cp).powi(2);
    Ok(0.5 + (hm * sp * sp * (ha * ha + hb * hb + t) + sm * sm * (hp * ((ha - hb).powi(2) + t) + 2.0 * hb * hb * hr)
        - 2.0 * hr * sp * sm * (ha * ha + t))
        / den)
}

/// Coupling matrices of the probe Hamiltonians
/// H_A = Σ J_ij σ_i^A σ_j^{Aₙ}, H_B = Σ K_ij σ_i^B σ_j^{Aₙ}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeHamiltonians {
    pub j: [[f64; 3]; 3],
    pub k_mat: [[f64; 3]; 3],
    pub h_an: f64,
}

impl ProbeHamiltonians {
    /// J_yy = 1, K_xz = 1: exp(iσyσy) then exp(iσxσz).
    pub fn fixed_example(h_an: f64) -> Self {
        let mut j = [[0.0; 3]; 3];
        let mut k_mat = [[0.0; 3]; 3];
        j[1][1] = 1.0;
        k_mat[0][2] = 1.0;
        Self { j, k_mat, h_an }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.j.iter().chain(&self.k_mat).flatten().copied().collect()
    }

    pub fn from_slice(x: &[f64], h_an: f64) -> Self {
        let mut j = [[0.0; 3]; 3];
        let mut k_mat = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                j[r][c] = x[3 * r + c];
                k_mat[r][c] = x[9 + 3 * r + c];
            }
        }
        Self { j, k_mat, h_an }
    }

    fn pair_hamiltonian(c: &[[f64; 3]; 3]) -> ComplexMatrix {
        let mut h = ComplexMatrix::zeros(4, 4);
        for (i, pi) in Pauli::XYZ.iter().enumerate() {
            for (j, pj) in Pauli::XYZ.iter().enumerate() {
                if c[i][j] != 0.0 {
                    h = &h + &kron(&pi.matrix(), &pj.matrix()).scale_re(c[i][j]);
                }
            }
        }
        h
    }

    /// U_B U_A on (A, Aₙ, B).
    pub fn unitary(&self) -> Result<ComplexMatrix> {
        let ua = embed(&expi_hermitian(&Self::pair_hamiltonian(&self.j))?, &[IDX_A, IDX_AN], 3)?;
        let ub = embed(&expi_hermitian(&Self::pair_hamiltonian(&self.k_mat))?, &[IDX_B, IDX_AN], 3)?;
        Ok(&ub * &ua)
    }
}

/// ρ_β(AB) placed on (A, Aₙ, B) with the ancilla thermal under h_an σz.
pub fn ancilla_input_state(sys: CoolingSystem, beta: f64, h_an: f64) -> Result<DensityOperator> {
    let rab = thermal_state(beta, &sys.hamiltonian())?;
    let ran = thermal_state(beta, &sigma_z().scale_re(h_an))?;
    // (A⊗B)⊗Aₙ, then swap the last two factors.
    let joint = kron(rab.matrix(), ran.matrix());
    let swap = embed(&swap_gate(), &[1, 2], 3)?;
    Ok(DensityOperator::from_trusted(&(&swap * &joint) * &swap))
}

fn swap_gate() -> ComplexMatrix {
    ComplexMatrix::from_real(4, 4, &[1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.])
}

/// B purity after the probe unitaries, by direct simulation.
pub fn probe_purity(sys: CoolingSystem, beta: f64, probes: &ProbeHamiltonians) -> Result<f64> {
    let rho = ancilla_input_state(sys, beta, probes.h_an)?;
    probe_purity_on(&rho, probes)
}

fn probe_purity_on(rho: &DensityOperator, probes: &ProbeHamiltonians) -> Result<f64> {
    let out = rho.evolve(&probes.unitary()?);
    Ok(b_marginal(&out, &[2, 2, 2], IDX_B)?.purity())
}

/// Maximizes B's final purity over the 18 probe couplings in [−π, π].
/// Restart 0 starts from the fixed example, so the result never falls
/// below it.
pub fn optimize_probes(
    sys: CoolingSystem,
    beta: f64,
    h_an: f64,
    restarts: usize,
    seed: u64,
    opts: &NelderMeadOptions,
) -> Result<(ProbeHamiltonians, PurityReport)> {
    if restarts == 0 {
        return Err(QetError::param("restarts", "must be at least 1"));
    }
    let rho = ancilla_input_state(sys, beta, h_an)?;
    let p_initial = b_marginal(&thermal_state(beta, &sys.hamiltonian())?, &[2, 2], 1)?.purity();
    let f = |x: &[f64]| -probe_purity_on(&rho, &ProbeHamiltonians::from_slice(x, h_an)).unwrap_or(f64::NAN);
    let pi = std::f64::consts::PI;
    let start = ProbeHamiltonians::fixed_example(h_an).to_vec();
    let best = nelder_mead_restarts(&f, Some(&start), &[(-pi, pi); 18], restarts, seed, opts);
    Ok((
        ProbeHamiltonians::from_slice(&best.x, h_an),
        PurityReport {
            p_initial,
            p_final: -best.f,
        },
    ))
}

/// Single-qubit bath populations in the polarization convention:
/// diag((1+ε)/2, (1−ε)/2), ε = tanh(βh).
pub fn bath_populations(beta: f64, h: f64) -> [f64; 2] {
    let e = (beta * h).tanh();
    [(1.0 + e) / 2.0, (1.0 - e) / 2.0]
}

/// One PPA round on a diagonal register of `n_qubits` (qubit 0 most
/// significant): dephase, assign the sorted populations so the target's
/// |0⟩ half receives the largest ones, then reset every other qubit to the
/// bath state. Purity is label-symmetric, so |0⟩ is the polarized level.
pub fn ppa_step(state: &DensityOperator, n_qubits: usize, target: usize, bath_beta: f64, bath_h: f64) -> Result<DensityOperator> {
    if !(2..=3).contains(&n_qubits) || target >= n_qubits || state.dim() != 1 << n_qubits {
        return Err(QetError::DimensionMismatch(format!(
            "PPA needs 2 or 3 qubits with target < n, got n = {n_qubits}, target = {target}, dim = {}",
            state.dim()
        )));
    }
    let dim = 1 << n_qubits;
    let shift = n_qubits - 1 - target;
    let mut pops: Vec<f64> = (0..dim).map(|i| state.matrix()[(i, i)].re).collect();
    pops.sort_by(|a, b| b.total_cmp(a));
    let slots: Vec<usize> = (0..dim)
        .filter(|s| (s >> shift) & 1 == 0)
        .chain((0..dim).filter(|s| (s >> shift) & 1 == 1))
        .collect();
    let mut target_pop = [0.0; 2];
    for (v, s) in pops.iter().zip(&slots) {
        target_pop[(s >> shift) & 1] += v;
    }
    let bath = bath_populations(bath_beta, bath_h);
    let diag: Vec<f64> = (0..dim)
        .map(|s| {
            (0..n_qubits)
                .map(|q| {
                    let bit = (s >> (n_qubits - 1 - q)) & 1;
                    if q == target {
                        target_pop[bit]
                    } else {
                        bath[bit]
                    }
                })
                .product()
        })
        .collect();
    Ok(DensityOperator::from_trusted(ComplexMatrix::diag_real(&diag)))
}

/// Only the compression half of a PPA round (for inspection).
pub fn ppa_compress_populations(pops: &[f64], n_qubits: usize, target: usize) -> Vec<f64> {
    let dim = pops.len();
    let shift = n_qubits - 1 - target;
    let mut sorted = pops.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let slots = (0..dim)
        .filter(|s| (s >> shift) & 1 == 0)
        .chain((0..dim).filter(|s| (s >> shift) & 1 == 1));
    let mut out = vec![0.0; dim];
    for (v, s) in sorted.iter().zip(slots) {
        out[s] = *v;
    }
    out
}

/// Purity of the target qubit of a diagonal register.
pub fn target_purity(state: &DensityOperator, n_qubits: usize, target: usize) -> Result<f64> {
    Ok(b_marginal(state, &vec![2; n_qubits], target)?.purity())
}

/// Iterates PPA rounds from `state` until the target purity changes by less
/// than 1e-12 (at most `max_rounds`). The first round only brings the reset
/// qubits to the bath, so the check starts from the second. Returns the
/// final state and round count.
pub fn ppa_fixed_point(
    state: &DensityOperator,
    n_qubits: usize,
    target: usize,
    bath_beta: f64,
    bath_h: f64,
    max_rounds: usize,
) -> Result<(DensityOperator, usize)> {
    let mut cur = state.clone();
    let mut last = target_purity(&cur, n_qubits, target)?;
    for round in 1..=max_rounds {
        cur = ppa_step(&cur, n_qubits, target, bath_beta, bath_h)?;
        let p = target_purity(&cur, n_qubits, target)?;
        if round > 1 && (p - last).abs() < 1e-12 {
            return Ok((cur, round));
        }
        last = p;
    }
    Ok((cur, max_rounds))
}

/// PPA-n fixed-point purity of the target starting from the maximally
/// mixed register, bath qubits with gap `bath_h` at inverse temperature β.
pub fn ppa_purity(n_qubits: usize, beta: f64, bath_h: f64) -> Result<f64> {
    let start = DensityOperator::maximally_mixed(1 << n_qubits);
    let target = n_qubits - 1;
    let (fp, _) = ppa_fixed_point(&start, n_qubits, target, beta, bath_h, 10_000)?;
    target_purity(&fp, n_qubits, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn mp(h: f64, k: f64) -> MinimalParams {
        MinimalParams::new(h, k).unwrap()
    }

    #[test]
    fn pvm_footnote_reproduces_projectors() {
        let ops = povm_operators(&PovmParams::pvm()).unwrap();
        for (i, a) in [1, -1].into_iter().enumerate() {
            let p = minimal_qet::projector(a).unwrap();
            assert!(kron(&ops[i], &id2()).max_abs_diff(&p) < 1e-15);
        }
    }

    #[test]
    fn completeness() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..20 {
            let p = PovmParams::random_real(&mut rng);
            let ops = povm_operators(&p).unwrap();
            let s = &(&ops[0].dagger() * &ops[0]) + &(&ops[1].dagger() * &ops[1]);
            assert!(s.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-12);
        }
        // γ = π/2 satisfies the cross constraint for any m, l
        let p = PovmParams::new([0.5, 0.5], [0.5, 0.5], [std::f64::consts::FRAC_PI_2; 2], [0.0; 2]);
        assert!(p.is_ok());
    }

    #[test]
    fn constraint_violation_rejected() {
        assert!(PovmParams::new([0.5, 0.5], [0.5, 0.5], [0.0; 2], [0.0; 2]).is_err());
        assert!(PovmParams::new([0.6, 0.5], [0.5, -0.5], [0.0; 2], [0.0; 2]).is_err());
    }

    #[test]
    fn omega_pvm_matches_minimal_theta() {
        for (h, k) in [(1.0, 0.3), (1.0, 1.0), (2.0, 0.7)] {
            let p = mp(h, k);
            let th = minimal_qet::optimal_theta(p);
            let pv = PovmParams::pvm();
            assert!((optimal_omega(p, &pv, 1).unwrap() + th).abs() < 1e-14);
            assert!((optimal_omega(p, &pv, -1).unwrap() - th).abs() < 1e-14);
        }
        let none = PovmParams::sharpness(0.0);
        assert_eq!(optimal_omega(mp(1.0, 1.0), &none, 1).unwrap(), 0.0);
    }

    #[test]
    fn initial_purity_values() {
        assert!((initial_purity(mp(1.0, 1.0)) - 0.75).abs() < 1e-15);
        for (h, k) in [(1.0, 0.2), (1.3, 2.0), (0.5, 5.0)] {
            let p = mp(h, k);
            let g = minimal_qet::build_model(p).unwrap().ground_density();
            let pb = b_marginal(&g, &[2, 2], 1).unwrap().purity();
            assert!((pb - initial_purity(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn uninformative_measurement_keeps_purity() {
        let p = mp(1.0, 2.0);
        let povm = PovmParams::sharpness(0.0);
        let om = energy_optimal_omegas(p, &povm).unwrap();
        assert_eq!(om, [0.0, 0.0]);
        let v = final_purity_povm(p, &povm, om).unwrap();
        assert!((v - initial_purity(p)).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_simulation() {
        let mut rng = stream_rng(4, 0);
        for _ in 0..30 {
            let p = mp(rng.random_range(0.2..3.0), rng.random_range(0.2..3.0));
            let povm = PovmParams::random_real(&mut rng);
            let om = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            let a = final_purity_povm(p, &povm, om).unwrap();
            let b = final_purity_povm_simulated(p, &povm, om).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn purity_optimal_beats_initial_at_strong_coupling() {
        let p = mp(1.0, 5.0);
        let pv = PovmParams::pvm();
        let om = purity_optimal_omegas(p, &pv).unwrap();
        let best = final_purity_povm(p, &pv, om).unwrap();
        assert!(best > initial_purity(p) + 0.1);
        for d in [-1.0, -0.3, 0.2, 0.9] {
            assert!(final_purity_povm(p, &pv, [d, 0.0]).unwrap() <= best + 1e-14);
        }
    }

    #[test]
    fn thermal_limits() {
        let h = minimal_qet::build_model(mp(1.0, 1.0)).unwrap().h_total;
        let t0 = thermal_state(0.0, &h).unwrap();
        assert!(t0.matrix().max_abs_diff(&ComplexMatrix::identity(4).scale_re(0.25)) < 1e-15);
        let e = hermitian_eig(&h).unwrap();
        let beta = 45.0 / (e.values[1] - e.values[0]);
        let t = thermal_state(beta, &h).unwrap();
        let g = minimal_qet::build_model(mp(1.0, 1.0)).unwrap().ground.projector();
        assert!(t.matrix().max_abs_diff(&g) < 1e-8);
        let mut last = f64::INFINITY;
        for b in [0.0, 0.1, 0.3, 0.7, 1.5, 3.0] {
            let en = (thermal_state(b, &h).unwrap().matrix() * &h).trace().re;
            assert!(en <= last + 1e-14);
            last = en;
        }
    }

    #[test]
    fn ancilla_beta_zero_is_half() {
        for sys in [CoolingSystem::new(1.0, 1.0, 5.0).unwrap(), CoolingSystem::new(0.3, 2.0, 0.1).unwrap()] {
            let r = ancilla_protocol_purity(sys, 0.0, 1.0).unwrap();
            assert!((r.p_final - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn ancilla_closed_form_matches_simulation() {
        let mut rng = stream_rng(9, 0);
        for _ in 0..10 {
            let sys = CoolingSystem::new(rng.random_range(0.1..3.0), rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)).unwrap();
            let (beta, han) = (rng.random_range(0.0..3.0), rng.random_range(0.1..3.0));
            let cf = ancilla_protocol_purity(sys, beta, han).unwrap().p_final;
            let sim = probe_purity(sys, beta, &ProbeHamiltonians::fixed_example(han)).unwrap();
            assert!((cf - sim).abs() < 1e-10, "{cf} vs {sim}");
        }
    }

    #[test]
    fn ancilla_large_beta_finite() {
        let sys = CoolingSystem::new(1.0, 1.0, 5.0).unwrap();
        let r = ancilla_protocol_purity(sys, 500.0, 1.0).unwrap();
        assert!(r.p_final.is_finite() && r.p_final <= 1.0);
    }

    #[test]
    fn ppa_sorted_input_is_fixed_by_compression() {
        let pops = [0.4, 0.3, 0.2, 0.1];
        assert_eq!(ppa_compress_populations(&pops, 2, 1), vec![0.4, 0.2, 0.3, 0.1]);
        let sorted = [0.4, 0.1, 0.3, 0.2];
        assert_eq!(ppa_compress_populations(&sorted, 2, 1), vec![0.4, 0.2, 0.3, 0.1]);
        let already = [0.4, 0.2, 0.3, 0.1];
        assert_eq!(ppa_compress_populations(&already, 2, 1), already.to_vec());
    }

    #[test]
    fn ppa3_fixed_point_closed_form() {
        for beta in [0.2f64, 0.5, 1.0] {
            let e = beta.tanh();
            let e_inf = 2.0 * e / (1.0 + e * e);
            let p = ppa_purity(3, beta, 1.0).unwrap();
            assert!((p - (1.0 + e_inf * e_inf) / 2.0).abs() < 1e-10, "β={beta}");
        }
    }

    #[test]
    fn ppa_bad_register_rejected() {
        let s = DensityOperator::maximally_mixed(4);
        assert!(ppa_step(&s, 4, 0, 1.0, 1.0).is_err());
        assert!(ppa_step(&s, 2, 2, 1.0, 1.0).is_err());
    }
}
