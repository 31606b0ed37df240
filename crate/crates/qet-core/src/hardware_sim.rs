//! Gate-level, shot-based simulation of the two-qubit protocol as run on
//! superconducting hardware, including synthetic readout noise and
//! calibration-matrix mitigation.
//!
//! Qubit 0 is A, qubit 1 is B. Alice's σx measurement is a Hadamard on A
//! followed by a terminal Z readout (outcome bit 0 ↔ α = +1). Bob's
//! feedback is deferred: Λ(U) fires on |1⟩_A, Λ̃(U) = (X⊗1)Λ(U)(X⊗1) on |0⟩_A.
//!
//! Seeding: every circuit execution `i` in a run draws shots from
//! `stream_rng(seed, 2i)` and readout noise from `stream_rng(seed, 2i + 1)`.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{QetError, Result};
use crate::minimal_qet::{self, build_model, optimal_theta, EnergyLedger, MinimalParams};
use crate::qcore::{embed, hadamard, ry, sigma_x, sigma_z, ComplexMatrix, DensityOperator, StateVector};
use crate::rng::stream_rng;

pub const QUBIT_A: usize = 0;
pub const QUBIT_B: usize = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    Ry { qubit: usize, angle: f64 },
    H(usize),
    X(usize),
    Z(usize),
    Cnot { control: usize, target: usize },
    /// Applies `u` to `target` when `control` is |1⟩.
    CtrlU { control: usize, target: usize, u: ComplexMatrix },
    /// Applies `u` to `target` when `control` is |0⟩.
    ActrlU { control: usize, target: usize, u: ComplexMatrix },
    MeasureZ(usize),
}

impl Gate {
    fn operands(&self) -> Vec<usize> {
        match self {
            Gate::Ry { qubit, .. } => vec![*qubit],
            Gate::H(q) | Gate::X(q) | Gate::Z(q) | Gate::MeasureZ(q) => vec![*q],
            Gate::Cnot { control, target }
            | Gate::CtrlU { control, target, .. }
            | Gate::ActrlU { control, target, .. } => vec![*control, *target],
        }
    }

    /// Matrix on the full register, `None` for measurements.
    fn matrix(&self, width: usize) -> Result<Option<ComplexMatrix>> {
        let p0 = ComplexMatrix::diag_real(&[1.0, 0.0]);
        let p1 = ComplexMatrix::diag_real(&[0.0, 1.0]);
        let id = ComplexMatrix::identity(2);
        let (op, targets): (ComplexMatrix, Vec<usize>) = match self {
            Gate::Ry { qubit, angle } => (ry(*angle), vec![*qubit]),
            Gate::H(q) => (hadamard(), vec![*q]),
            Gate::X(q) => (sigma_x(), vec![*q]),
            Gate::Z(q) => (sigma_z(), vec![*q]),
            Gate::Cnot { control, target } => (
                &crate::qcore::kron(&p0, &id) + &crate::qcore::kron(&p1, &sigma_x()),
                vec![*control, *target],
            ),
            Gate::CtrlU { control, target, u } => (
                &crate::qcore::kron(&p0, &id) + &crate::qcore::kron(&p1, u),
                vec![*control, *target],
            ),
            Gate::ActrlU { control, target, u } => (
                &crate::qcore::kron(&p0, u) + &crate::qcore::kron(&p1, &id),
                vec![*control, *target],
            ),
            Gate::MeasureZ(_) => return Ok(None),
        };
        embed(&op, &targets, width).map(Some)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub width: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Self { width, gates: Vec::new() }
    }

    /// Appends a gate after checking operands and unitarity of payloads.
    pub fn push(&mut self, g: Gate) -> Result<&mut Self> {
        let ops = g.operands();
        if ops.iter().any(|&q| q >= self.width) {
            return Err(QetError::DimensionMismatch(format!("gate {g:?} exceeds width {}", self.width)));
        }
        if ops.len() == 2 && ops[0] == ops[1] {
            return Err(QetError::DimensionMismatch("control equals target".into()));
        }
        match &g {
            Gate::Ry { angle, .. } if !angle.is_finite() => {
                return Err(QetError::param("angle", "must be finite"));
            }
            Gate::CtrlU { u, .. } | Gate::ActrlU { u, .. } => {
                if u.rows() != 2 || u.cols() != 2 {
                    return Err(QetError::DimensionMismatch("controlled payload must be 2×2".into()));
                }
                u.ensure_unitary(1e-10)?;
            }
            _ => {}
        }
        self.gates.push(g);
        Ok(self)
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<&mut Self> {
        for g in gates {
            self.push(g)?;
        }
        Ok(self)
    }

    /// Qubits measured at the end, ascending. Fails if a measurement is
    /// followed by a unitary gate.
    pub fn measured_qubits(&self) -> Result<Vec<usize>> {
        let mut seen_measure = false;
        let mut qs = Vec::new();
        for g in &self.gates {
            match g {
                Gate::MeasureZ(q) => {
                    seen_measure = true;
                    if !qs.contains(q) {
                        qs.push(*q);
                    }
                }
                _ if seen_measure => {
                    return Err(QetError::InvalidState(
                        "measurements must be terminal in shot mode".into(),
                    ));
                }
                _ => {}
            }
        }
        qs.sort_unstable();
        Ok(qs)
    }

    /// Product of all unitary gates (measurements skipped).
    pub fn unitary(&self) -> Result<ComplexMatrix> {
        let mut u = ComplexMatrix::identity(1 << self.width);
        for g in &self.gates {
            if let Some(m) = g.matrix(self.width)? {
                u = &m * &u;
            }
        }
        Ok(u)
    }

    /// Final pure state from |0…0⟩ before readout.
    pub fn statevector(&self) -> Result<StateVector> {
        StateVector::basis(1 << self.width, 0).evolve(&self.unitary()?)
    }

    /// Output density operator with the terminal measurements applied as
    /// non-selective Z dephasing of the measured qubits.
    pub fn measured_output_density(&self) -> Result<DensityOperator> {
        let mut rho = self.statevector()?.to_density();
        for q in self.measured_qubits()? {
            let p0 = embed(&ComplexMatrix::diag_real(&[1.0, 0.0]), &[q], self.width)?;
            let p1 = embed(&ComplexMatrix::diag_real(&[0.0, 1.0]), &[q], self.width)?;
            rho = rho.apply_kraus(&[p0, p1]);
        }
        Ok(rho)
    }

    /// Exact outcome distribution over the measured qubits; index bit order
    /// follows ascending qubit index (lowest qubit = most significant).
    pub fn outcome_probabilities(&self) -> Result<Vec<f64>> {
        let measured = self.measured_qubits()?;
        if measured.is_empty() {
            return Err(QetError::InvalidState("circuit has no measurements".into()));
        }
        let psi = self.statevector()?;
        let mut probs = vec![0.0; 1 << measured.len()];
        for (idx, a) in psi.amplitudes().iter().enumerate() {
            let key = measured
                .iter()
                .fold(0usize, |acc, &q| (acc << 1) | ((idx >> (self.width - 1 - q)) & 1));
            probs[key] += a.norm_sqr();
        }
        Ok(probs)
    }
}

fn bitstring(index: usize, bits: usize) -> String {
    (0..bits)
        .map(|i| if (index >> (bits - 1 - i)) & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn bit_index(s: &str) -> Result<usize> {
    s.chars().try_fold(0usize, |acc, ch| match ch {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        _ => Err(QetError::InvalidState(format!("bad bitstring {s}"))),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotResult {
    /// Outcome bitstring (measured qubits ascending) → count.
    pub counts: BTreeMap<String, u64>,
    pub shots: u64,
    pub seed: u64,
    pub n_bits: usize,
}

impl ShotResult {
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        let mut f = vec![0.0; 1 << self.n_bits];
        for (k, &v) in &self.counts {
            f[bit_index(k)?] = v as f64 / self.shots as f64;
        }
        Ok(f)
    }
}

fn sample_index(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Roundoff tail: last outcome with non-zero probability.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws `shots` samples from the exact output distribution using
/// `stream_rng(seed, stream)`.
pub fn run_shots_stream(c: &Circuit, shots: u64, seed: u64, stream: u64) -> Result<ShotResult> {
    if shots == 0 {
        return Err(QetError::param("shots", "must be at least 1"));
    }
    let probs = c.outcome_probabilities()?;
    let n_bits = probs.len().trailing_zeros() as usize;
    let mut rng = stream_rng(seed, stream);
    let mut tallies = vec![0u64; probs.len()];
    for _ in 0..shots {
        tallies[sample_index(&mut rng, &probs)] += 1;
    }
    let counts = tallies
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(i, &n)| (bitstring(i, n_bits), n))
        .collect();
    Ok(ShotResult {
        counts,
        shots,
        seed,
        n_bits,
    })
}

pub fn run_shots(c: &Circuit, shots: u64, seed: u64) -> Result<ShotResult> {
    run_shots_stream(c, shots, seed, 0)
}

/// P(measured | true), rows indexed by the true bitstring.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    rows: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || !n.is_power_of_two() || rows.iter().any(|r| r.len() != n) {
            return Err(QetError::DimensionMismatch("confusion matrix must be 2^m × 2^m".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(QetError::param("confusion", format!("row {i} has entries outside [0,1]")));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(QetError::param("confusion", format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { rows })
    }

    pub fn identity(n_bits: usize) -> Self {
        let n = 1 << n_bits;
        Self {
            rows: (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
        }
    }

    /// Independent symmetric bit flips with probability `p` on each bit.
    pub fn symmetric_flip(p: f64, n_bits: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(QetError::param("noise", format!("flip probability {p} outside [0,1]")));
        }
        let n = 1 << n_bits;
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let flips = ((i ^ j) as u32).count_ones() as i32;
                        p.powi(flips) * (1.0 - p).powi(n_bits as i32 - flips)
                    })
                    .collect()
            })
            .collect();
        Self::new(rows)
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Distribution of measured outcomes for a true distribution `p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|j| (0..n).map(|i| p[i] * self.rows[i][j]).sum()).collect()
    }
}

/// Gauss–Jordan inverse with partial pivoting.
fn invert(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty");
        if a[piv][col].abs() < 1e-14 {
            return Err(QetError::Numerical("confusion matrix is singular".into()));
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[r][j] -= f * a[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Ok(inv)
}

fn norm1(m: &[Vec<f64>]) -> f64 {
    (0..m.len()).map(|j| m.iter().map(|r| r[j].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Inverse of the transposed confusion matrix, i.e. the linear map taking
/// measured distributions back to true ones. Rejects condition numbers
/// above 1e6.
pub fn mitigation_map(m: &ConfusionMatrix) -> Result<Vec<Vec<f64>>> {
    let n = m.dim();
    let t: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m.rows[j][i]).collect()).collect();
    let inv = invert(&t)?;
    let cond = norm1(&t) * norm1(&inv);
    if cond > 1e6 {
        return Err(QetError::Numerical(format!("confusion matrix condition number {cond:.3e} > 1e6")));
    }
    Ok(inv)
}

/// Unclipped quasi-probabilities for a measured distribution.
pub fn mitigate_distribution(freqs: &[f64], m: &ConfusionMatrix) -> Result<Vec<f64>> {
    if freqs.len() != m.dim() {
        return Err(QetError::DimensionMismatch("distribution vs confusion matrix".into()));
    }
    let inv = mitigation_map(m)?;
    Ok(inv.iter().map(|row| row.iter().zip(freqs).map(|(a, b)| a * b).sum()).collect())
}

/// Mitigated distribution: inverse map, negatives clipped to zero, then
/// renormalized.
pub fn mitigate(r: &ShotResult, m: &ConfusionMatrix) -> Result<BTreeMap<String, f64>> {
    let q = mitigate_distribution(&r.frequencies()?, m)?;
    let clipped: Vec<f64> = q.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(QetError::Numerical("mitigated distribution vanished after clipping".into()));
    }
    Ok(clipped
        .iter()
        .enumerate()
        .map(|(i, &x)| (bitstring(i, r.n_bits), x / total))
        .collect())
}

/// Resamples every shot through its confusion row using
/// `stream_rng(seed, stream)`; outcomes are processed in lexicographic order.
pub fn apply_readout_noise_stream(r: &ShotResult, m: &ConfusionMatrix, seed: u64, stream: u64) -> Result<ShotResult> {
    if m.dim() != 1 << r.n_bits {
        return Err(QetError::DimensionMismatch("confusion matrix vs outcome width".into()));
    }
    let mut rng = stream_rng(seed, stream);
    let mut tallies = vec![0u64; m.dim()];
    for (k, &n) in &r.counts {
        let row = &m.rows[bit_index(k)?];
        for _ in 0..n {
            tallies[sample_index(&mut rng, row)] += 1;
        }
    }
    Ok(ShotResult {
        counts: tallies
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(i, &n)| (bitstring(i, r.n_bits), n))
            .collect(),
        shots: r.shots,
        seed,
        n_bits: r.n_bits,
    })
}

pub fn apply_readout_noise(r: &ShotResult, m: &ConfusionMatrix, seed: u64) -> Result<ShotResult> {
    apply_readout_noise_stream(r, m, seed, 1)
}

/// g(h,k) = h/√(h²+k²) and θ = −arccos(√((1−g)/2)).
pub fn prep_angle(p: MinimalParams) -> f64 {
    let g = p.h / p.h.hypot(p.k);
    -((1.0 - g) / 2.0).sqrt().acos()
}

/// R_Y(2θ) on A then CNOT(A→B): prepares the ground state.
pub fn prep_circuit(p: MinimalParams) -> Result<Circuit> {
    p.validate()?;
    let mut c = Circuit::new(2);
    c.push(Gate::Ry {
        qubit: QUBIT_A,
        angle: 2.0 * prep_angle(p),
    })?
    .push(Gate::Cnot {
        control: QUBIT_A,
        target: QUBIT_B,
    })?;
    Ok(c)
}

/// Deferred classical control on control qubit A: `u1` when A reads 1
/// (Λ), `u0` when A reads 0 (Λ̃).
pub fn defer_measurement(u0: &ComplexMatrix, u1: &ComplexMatrix) -> Vec<Gate> {
    vec![
        Gate::CtrlU {
            control: QUBIT_A,
            target: QUBIT_B,
            u: u1.clone(),
        },
        Gate::ActrlU {
            control: QUBIT_A,
            target: QUBIT_B,
            u: u0.clone(),
        },
    ]
}

/// Bob's rotation U_B(α) = R_Y(2αφ).
pub fn bob_rotation(alpha: f64, phi: f64) -> ComplexMatrix {
    ry(2.0 * alpha * phi)
}

/// Observables read out by the estimation circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Observable {
    VAb,
    HB,
}

impl std::str::FromStr for Observable {
    type Err = QetError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V_AB" | "v_ab" | "vab" => Ok(Observable::VAb),
            "H_B" | "h_b" | "hb" => Ok(Observable::HB),
            other => Err(QetError::param("observable", format!("unknown observable `{other}`"))),
        }
    }
}

/// Linear estimator over the two-bit outcome distribution:
/// value = offset + Σ coeffs[o]·freq[o].
///
/// * V_AB: A and B are both read in the σx basis, so
///   ⟨V⟩ = 2k⟨Z_A Z_B⟩ + 2(k²/h²)f.
/// * H_B: B is read in the σz basis, ⟨H_B⟩ = h⟨Z_B⟩ + f.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimator {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

impl Estimator {
    pub fn for_observable(obs: Observable, p: MinimalParams) -> Self {
        let f = p.f();
        // Outcome index bits: (A, B), A most significant.
        let z_b = |o: usize| if o & 1 == 0 { 1.0 } else { -1.0 };
        let z_a = |o: usize| if o & 2 == 0 { 1.0 } else { -1.0 };
        match obs {
            Observable::VAb => Estimator {
                coeffs: (0..4).map(|o| 2.0 * p.k * z_a(o) * z_b(o)).collect(),
                offset: 2.0 * p.k * p.k / (p.h * p.h) * f,
            },
            Observable::HB => Estimator {
                coeffs: (0..4).map(|o| p.h * z_b(o)).collect(),
                offset: f,
            },
        }
    }

    pub fn value(&self, dist: &[f64]) -> f64 {
        self.offset + self.coeffs.iter().zip(dist).map(|(c, q)| c * q).sum::<f64>()
    }

    /// Multinomial standard error of the plug-in estimate from `shots`
    /// samples of `dist`, optionally pushed through a linear mitigation map.
    pub fn std_err(&self, dist: &[f64], shots: u64, map: Option<&[Vec<f64>]>) -> f64 {
        let coeffs: Vec<f64> = match map {
            None => self.coeffs.clone(),
            Some(m) => (0..dist.len())
                .map(|j| (0..dist.len()).map(|i| self.coeffs[i] * m[i][j]).sum())
                .collect(),
        };
        let mean: f64 = coeffs.iter().zip(dist).map(|(c, q)| c * q).sum();
        let second: f64 = coeffs.iter().zip(dist).map(|(c, q)| c * c * q).sum();
        ((second - mean * mean).max(0.0) / shots as f64).sqrt()
    }
}

/// Estimation circuit for `obs`, optionally including Bob's deferred
/// feedback at angle φ.
pub fn estimation_circuit(obs: Observable, p: MinimalParams, feedback_phi: Option<f64>) -> Result<Circuit> {
    let mut c = prep_circuit(p)?;
    c.push(Gate::H(QUBIT_A))?;
    if let Some(phi) = feedback_phi {
        c.extend(defer_measurement(&bob_rotation(1.0, phi), &bob_rotation(-1.0, phi)))?;
    }
    if obs == Observable::VAb {
        // A is already in the σx frame from Alice's measurement.
        c.push(Gate::H(QUBIT_B))?;
    }
    c.extend([Gate::MeasureZ(QUBIT_A), Gate::MeasureZ(QUBIT_B)])?;
    Ok(c)
}

/// Full protocol circuit measuring `obs` after Bob's optimal feedback.
pub fn measurement_circuit(obs: Observable, p: MinimalParams) -> Result<Circuit> {
    estimation_circuit(obs, p, Some(optimal_theta(p)))
}

/// Per-quantity outcome of a table run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantityEstimate {
    pub exact: f64,
    pub estimate: f64,
    pub std_err: f64,
    pub mitigated: Option<f64>,
    pub mitigated_std_err: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HardwareReport {
    pub params: MinimalParams,
    pub e_pa: QuantityEstimate,
    pub e_hb: QuantityEstimate,
    pub e_vab: QuantityEstimate,
    pub e_ub: QuantityEstimate,
}

impl HardwareReport {
    pub fn estimate_ledger(&self) -> EnergyLedger {
        EnergyLedger {
            e_pa: self.e_pa.estimate,
            e_hb: self.e_hb.estimate,
            e_vab: self.e_vab.estimate,
            e_ub: self.e_ub.estimate,
        }
    }

    pub fn quantities(&self) -> [(&'static str, &QuantityEstimate); 4] {
        [
            ("E_PA", &self.e_pa),
            ("H_B", &self.e_hb),
            ("V_AB", &self.e_vab),
            ("E_UB", &self.e_ub),
        ]
    }
}

/// Settings of a shot-mode run.
#[derive(Clone, Debug, PartialEq)]
pub struct ShotSettings {
    pub shots: u64,
    pub seed: u64,
    /// Symmetric per-bit readout flip probability.
    pub noise: Option<f64>,
    pub mitigate: bool,
}

/// Exact-mode table values, computed from circuit output distributions.
///
/// Alice's own term ⟨H_A⟩ after her σx readout is exactly f: the
/// post-measurement states are σx eigenstates with ⟨σz⟩ = 0.
pub fn table_reproduction_exact(p: MinimalParams) -> Result<EnergyLedger> {
    let phi = optimal_theta(p);
    let est = |obs, fb| -> Result<f64> {
        let c = estimation_circuit(obs, p, fb)?;
        Ok(Estimator::for_observable(obs, p).value(&c.outcome_probabilities()?))
    };
    let e_hb = est(Observable::HB, Some(phi))?;
    let e_vab = est(Observable::VAb, Some(phi))?;
    let e_pa = p.f() + est(Observable::HB, None)? + est(Observable::VAb, None)?;
    Ok(EnergyLedger {
        e_pa,
        e_hb,
        e_vab,
        e_ub: e_hb + e_vab,
    })
}

struct CircuitRun {
    est: f64,
    se: f64,
    mit: Option<(f64, f64)>,
}

fn run_estimator(
    obs: Observable,
    p: MinimalParams,
    fb: Option<f64>,
    s: &ShotSettings,
    index: u64,
) -> Result<CircuitRun> {
    let c = estimation_circuit(obs, p, fb)?;
    let e = Estimator::for_observable(obs, p);
    let mut r = run_shots_stream(&c, s.shots, s.seed, 2 * index)?;
    let mut confusion = None;
    if let Some(pf) = s.noise {
        let m = ConfusionMatrix::symmetric_flip(pf, 2)?;
        r = apply_readout_noise_stream(&r, &m, s.seed, 2 * index + 1)?;
        confusion = Some(m);
    }
    let freqs = r.frequencies()?;
    let est = e.value(&freqs);
    let se = e.std_err(&freqs, s.shots, None);
    let mit = match (&confusion, s.mitigate) {
        (Some(m), true) => {
            let map = mitigation_map(m)?;
            let md = mitigate(&r, m)?;
            let dist: Vec<f64> = md.values().copied().collect();
            Some((e.value(&dist), e.std_err(&freqs, s.shots, Some(&map))))
        }
        (None, true) => Some((est, se)),
        _ => None,
    };
    Ok(CircuitRun { est, se, mit })
}

/// Shot-mode reproduction of the four table quantities. E_UB combines the
/// two post-feedback circuits; E_PA adds f to the two pre-feedback ones.
pub fn table_reproduction(p: MinimalParams, s: &ShotSettings) -> Result<HardwareReport> {
    let exact = table_reproduction_exact(p)?;
    let phi = optimal_theta(p);
    let hb = run_estimator(Observable::HB, p, Some(phi), s, 0)?;
    let vab = run_estimator(Observable::VAb, p, Some(phi), s, 1)?;
    let hb0 = run_estimator(Observable::HB, p, None, s, 2)?;
    let vab0 = run_estimator(Observable::VAb, p, None, s, 3)?;

    let single = |exact: f64, r: &CircuitRun| QuantityEstimate {
        exact,
        estimate: r.est,
        std_err: r.se,
        mitigated: r.mit.map(|m| m.0),
        mitigated_std_err: r.mit.map(|m| m.1),
    };
    let combined = |exact: f64, base: f64, a: &CircuitRun, b: &CircuitRun| QuantityEstimate {
        exact,
        estimate: base + a.est + b.est,
        std_err: a.se.hypot(b.se),
        mitigated: a.mit.zip(b.mit).map(|(x, y)| base + x.0 + y.0),
        mitigated_std_err: a.mit.zip(b.mit).map(|(x, y)| x.1.hypot(y.1)),
    };
    Ok(HardwareReport {
        params: p,
        e_pa: combined(exact.e_pa, p.f(), &hb0, &vab0),
        e_hb: single(exact.e_hb, &hb),
        e_vab: single(exact.e_vab, &vab),
        e_ub: combined(exact.e_ub, 0.0, &hb, &vab),
    })
}

/// Channel side of the deferred-measurement equivalence: the protocol state
/// ρ₂ rotated into the readout frame of A (Hadamard on A).
pub fn feedback_channel_output(p: MinimalParams, phi: f64) -> Result<DensityOperator> {
    let m = build_model(p)?;
    let rho2 = minimal_qet::protocol_state(&m, phi)?;
    Ok(rho2.evolve(&embed(&hadamard(), &[QUBIT_A], 2)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp(h: f64, k: f64) -> MinimalParams {
        MinimalParams::new(h, k).unwrap()
    }

    #[test]
    fn prep_angle_example() {
        let th = prep_angle(mp(1.0, 1.0));
        assert!((th + 1.178_097).abs() < 1e-6);
        assert!((((1.0 - std::f64::consts::FRAC_1_SQRT_2) / 2.0).sqrt() - 0.382_683).abs() < 1e-6);
    }

    #[test]
    fn prep_circuit_prepares_ground() {
        for (h, k) in [(1.0, 0.2), (1.0, 1.0), (1.5, 1.0), (0.4, 3.0)] {
            let p = mp(h, k);
            let psi = prep_circuit(p).unwrap().statevector().unwrap();
            let g = build_model(p).unwrap().ground;
            assert!((psi.fidelity(&g) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ground_support_only_00_11() {
        let mut c = prep_circuit(mp(1.0, 1.0)).unwrap();
        c.extend([Gate::MeasureZ(0), Gate::MeasureZ(1)]).unwrap();
        let r = run_shots(&c, 1000, 5).unwrap();
        assert!(r.counts.keys().all(|k| k == "00" || k == "11"));
        assert_eq!(r.counts.values().sum::<u64>(), 1000);
    }

    #[test]
    fn single_shot() {
        let mut c = prep_circuit(mp(1.0, 1.0)).unwrap();
        c.push(Gate::MeasureZ(0)).unwrap();
        let r = run_shots(&c, 1, 1).unwrap();
        assert_eq!(r.counts.len(), 1);
    }

    #[test]
    fn non_terminal_measurement_rejected() {
        let mut c = Circuit::new(2);
        c.extend([Gate::MeasureZ(0), Gate::H(1)]).unwrap();
        assert!(run_shots(&c, 10, 0).is_err());
    }

    #[test]
    fn bad_operands_rejected() {
        let mut c = Circuit::new(2);
        assert!(c.push(Gate::H(2)).is_err());
        assert!(c.push(Gate::Cnot { control: 1, target: 1 }).is_err());
    }

    #[test]
    fn hb_estimator_trivial_state() {
        // |00⟩: Z_B = +1 → h + f
        let p = mp(1.0, 0.5);
        let mut c = Circuit::new(2);
        c.extend([Gate::MeasureZ(0), Gate::MeasureZ(1)]).unwrap();
        let v = Estimator::for_observable(Observable::HB, p).value(&c.outcome_probabilities().unwrap());
        assert!((v - (p.h + p.f())).abs() < 1e-15);
    }

    #[test]
    fn identity_confusion_is_noop() {
        let mut c = prep_circuit(mp(1.0, 0.5)).unwrap();
        c.extend([Gate::MeasureZ(0), Gate::MeasureZ(1)]).unwrap();
        let r = run_shots(&c, 500, 3).unwrap();
        let id = ConfusionMatrix::identity(2);
        assert_eq!(apply_readout_noise(&r, &id, 9).unwrap().counts, r.counts);
        let m = mitigate(&r, &id).unwrap();
        for (k, v) in &m {
            let raw = *r.counts.get(k).unwrap_or(&0) as f64 / 500.0;
            assert!((v - raw).abs() < 1e-15);
        }
    }

    #[test]
    fn malformed_confusion_rejected() {
        assert!(ConfusionMatrix::new(vec![vec![0.5, 0.4], vec![0.0, 1.0]]).is_err());
        assert!(ConfusionMatrix::new(vec![vec![1.0, 0.0, 0.0]]).is_err());
        let singular = ConfusionMatrix::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(mitigation_map(&singular).is_err());
    }

    #[test]
    fn clipping_yields_distribution() {
        let m = ConfusionMatrix::symmetric_flip(0.2, 2).unwrap();
        let r = ShotResult {
            counts: BTreeMap::from([("00".to_string(), 10)]),
            shots: 10,
            seed: 0,
            n_bits: 2,
        };
        let d = mitigate(&r, &m).unwrap();
        assert!((d.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d.values().all(|&x| x >= 0.0));
    }

    #[test]
    fn observable_parse() {
        assert_eq!("V_AB".parse::<Observable>().unwrap(), Observable::VAb);
        assert!("H_A".parse::<Observable>().is_err());
    }

    #[test]
    fn exact_table_matches_density_protocol() {
        for (h, k) in [(1.0, 0.2), (1.0, 1.0), (1.5, 1.0), (2.0, 0.7)] {
            let p = mp(h, k);
            let a = table_reproduction_exact(p).unwrap();
            let b = minimal_qet::run_protocol(p, optimal_theta(p)).unwrap();
            for (x, y) in [(a.e_pa, b.e_pa), (a.e_hb, b.e_hb), (a.e_vab, b.e_vab), (a.e_ub, b.e_ub)] {
                assert!((x - y).abs() < 1e-10, "({h},{k}): {a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn deferred_measurement_matches_feedback_channel() {
        let p = mp(1.5, 1.0);
        for phi in [0.0, 0.3, optimal_theta(p), -1.1] {
            let mut c = estimation_circuit(Observable::HB, p, Some(phi)).unwrap();
            c.gates.retain(|g| *g != Gate::MeasureZ(QUBIT_B));
            let lhs = c.measured_output_density().unwrap();
            let rhs = feedback_channel_output(p, phi).unwrap();
            assert!(lhs.matrix().max_abs_diff(rhs.matrix()) < 1e-12);
        }
    }
}
