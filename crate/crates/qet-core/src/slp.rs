//! Strong local passivity (SLP): whether any channel acting on A alone can
//! lower the energy of a bipartite state, plus the ground-population
//! threshold that guarantees it.
//!
//! With C_{AA'} = Tr_B[(ρ^{T_A}⊗1_{A'})(1_A⊗H_{A'B})] and the unnormalized
//! Choi projector J = Σ|ii⟩⟨jj| on A⊗A', the energy after a channel with Choi
//! operator Λ is Tr(Λ C). The pair is SLP w.r.t. A iff X = Tr_{A'}[J C] is
//! Hermitian and C − X⊗1_{A'} ⪰ 0.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{QetError, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::qcore::{hermitian_eig, singular_values, ComplexMatrix, DensityOperator, Eigen, C64, ZERO};
use crate::rng::{ginibre, haar_unitary, orthonormalize_columns, stream_rng};

const PSD_TOL: f64 = 1e-9;
const HERM_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SlpInstance {
    pub rho: DensityOperator,
    pub hamiltonian: ComplexMatrix,
    pub dim_a: usize,
    pub dim_b: usize,
}

impl SlpInstance {
    pub fn new(rho: DensityOperator, hamiltonian: ComplexMatrix, dim_a: usize, dim_b: usize) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 {
            return Err(QetError::param("dims", "must be positive"));
        }
        let d = dim_a * dim_b;
        if rho.dim() != d || hamiltonian.rows() != d || hamiltonian.cols() != d {
            return Err(QetError::DimensionMismatch(format!(
                "state is {}×{}, hamiltonian {}×{}, dims {dim_a}·{dim_b}",
                rho.dim(),
                rho.dim(),
                hamiltonian.rows(),
                hamiltonian.cols()
            )));
        }
        if d > 16 {
            return Err(QetError::DimensionMismatch(format!("d_A·d_B = {d} exceeds 16")));
        }
        hamiltonian.ensure_hermitian(1e-10)?;
        Ok(Self {
            rho,
            hamiltonian,
            dim_a,
            dim_b,
        })
    }

    /// Same pair with H → H + c·1.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            hamiltonian: &self.hamiltonian + &ComplexMatrix::identity(self.hamiltonian.rows()).scale_re(c),
            ..self.clone()
        }
    }

    pub fn energy(&self) -> f64 {
        (self.rho.matrix() * &self.hamiltonian).trace().re
    }
}

#[derive(Clone, Debug)]
pub struct SlpVerdict {
    pub is_slp: bool,
    pub c_operator: ComplexMatrix,
    pub condition_min_eigenvalue: f64,
    pub hermiticity_defect: f64,
}

/// C_{AA'}[(a,a'),(c,c')] = Σ_{b,f} ρ[(c,b),(a,f)] · H[(a',f),(c',b)].
pub fn build_c_operator(inst: &SlpInstance) -> Result<ComplexMatrix> {
    let (da, db) = (inst.dim_a, inst.dim_b);
    if da * db > 16 {
        return Err(QetError::DimensionMismatch("d_A·d_B exceeds 16".into()));
    }
    let rho = inst.rho.matrix();
    let h = &inst.hamiltonian;
    let ix = |a: usize, b: usize| a * db + b;
    let mut data = vec![ZERO; da.pow(4)];
    for a in 0..da {
        for ap in 0..da {
            for cc in 0..da {
                for cp in 0..da {
                    let mut s = ZERO;
                    for b in 0..db {
                        for f in 0..db {
                            s += rho[(ix(cc, b), ix(a, f))] * h[(ix(ap, f), ix(cp, b))];
                        }
                    }
                    data[(a * da + ap) * da * da + cc * da + cp] = s;
                }
            }
        }
    }
    Ok(ComplexMatrix::from_vec(da * da, da * da, data))
}

/// X[a,c] = Σ_e C[(e,e),(c,a)] = Tr_{A'}[J C].
fn choi_contraction(c: &ComplexMatrix, da: usize) -> ComplexMatrix {
    let mut x = vec![ZERO; da * da];
    for a in 0..da {
        for cc in 0..da {
            x[a * da + cc] = (0..da).map(|e| c[(e * da + e, cc * da + a)]).sum();
        }
    }
    ComplexMatrix::from_vec(da, da, x)
}

pub fn slp_check(inst: &SlpInstance) -> Result<SlpVerdict> {
    let da = inst.dim_a;
    let c = build_c_operator(inst)?;
    let x = choi_contraction(&c, da);
    let hermiticity_defect = x.hermiticity_defect();
    let x_ext = crate::qcore::kron(&x.hermitian_part(), &ComplexMatrix::identity(da));
    let cond = &c - &x_ext;
    let min_eig = hermitian_eig(&cond.hermitian_part())?.values[0];
    Ok(SlpVerdict {
        is_slp: hermiticity_defect < HERM_TOL && min_eig >= -PSD_TOL,
        c_operator: c,
        condition_min_eigenvalue: min_eig,
        hermiticity_defect,
    })
}

/// Energy after applying the channel with unnormalized Choi operator
/// `choi` (on A⊗A') to subsystem A: Tr(Λ C).
pub fn energy_after_choi(c: &ComplexMatrix, choi: &ComplexMatrix) -> f64 {
    (choi * c).trace().re
}

/// Unnormalized Choi operator Σ_k (1⊗K_k)|Φ⟩⟨Φ|(1⊗K_k)† of a channel:
/// input on the first factor, output on the second.
pub fn choi_of(kraus: &[ComplexMatrix]) -> ComplexMatrix {
    let d = kraus[0].cols();
    let mut out = ComplexMatrix::zeros(d * d, d * d);
    for k in kraus {
        // entry (i, o) = K[o, i]
        let v: Vec<C64> = (0..d * d).map(|idx| k[(idx % d, idx / d)]).collect();
        out = &out + &ComplexMatrix::outer(&v, &v);
    }
    out
}

/// Upper bound p* on the ground-state population above which any state
/// diagonal in the energy eigenbasis is SLP. Energies are measured from E₀;
/// q are Schmidt coefficients of each eigenvector across A|B:
/// p* = (1 + E₁ q₀,min² / max_{i≥1} E_i q_{i,max}²)⁻¹.
pub fn ground_population_threshold(eig: &Eigen, dim_a: usize) -> Result<f64> {
    let n = eig.values.len();
    if n < 2 || n % dim_a != 0 {
        return Err(QetError::DimensionMismatch(format!("{n} levels vs d_A = {dim_a}")));
    }
    let db = n / dim_a;
    let e0 = eig.values[0];
    let e1 = eig.values[1] - e0;
    if e1 <= 1e-10 {
        return Err(QetError::InvalidState(format!("degenerate ground state (gap {e1:.3e})")));
    }
    let schmidt = |i: usize| -> Result<Vec<f64>> {
        let v = eig.vector(i);
        singular_values(&ComplexMatrix::from_vec(dim_a, db, v))
    };
    let q0 = schmidt(0)?;
    let rank = dim_a.min(db);
    let q0_min = q0[rank - 1];
    if q0_min <= 1e-10 {
        return Err(QetError::InvalidState(format!(
            "ground state lacks full Schmidt rank (smallest coefficient {q0_min:.3e})"
        )));
    }
    let mut worst: f64 = 0.0;
    for i in 1..n {
        let qmax = schmidt(i)?[0];
        worst = worst.max((eig.values[i] - e0) * qmax * qmax);
    }
    Ok(1.0 / (1.0 + e1 * q0_min * q0_min / worst))
}

/// Generalized Pauli (clock-and-shift) unitaries X^a Z^b on dimension d.
fn clock_shift_unitaries(d: usize) -> Vec<ComplexMatrix> {
    let w = 2.0 * std::f64::consts::PI / d as f64;
    let mut out = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            let mut data = vec![ZERO; d * d];
            for j in 0..d {
                data[((j + a) % d) * d + j] = C64::from_polar(1.0, w * (b * j) as f64);
            }
            out.push(ComplexMatrix::from_vec(d, d, data));
        }
    }
    out
}

/// Number of best samples polished by Nelder–Mead in the extraction oracle.
const ORACLE_POLISH: usize = 4;

/// Two Kraus operators stacked into a 2d×d isometry.
fn split_isometry(v: &ComplexMatrix, d: usize) -> [ComplexMatrix; 2] {
    let block = |r0: usize| {
        let data = (0..d * d).map(|i| v[(r0 + i / d, i % d)]).collect();
        ComplexMatrix::from_vec(d, d, data)
    };
    [block(0), block(d)]
}

fn stack(k0: &ComplexMatrix, k1: &ComplexMatrix) -> ComplexMatrix {
    let d = k0.rows();
    let mut data = k0.data().to_vec();
    data.extend_from_slice(k1.data());
    ComplexMatrix::from_vec(2 * d, d, data)
}

/// Candidate channels of trial t: a Haar unitary, a Gaussian isometry, a
/// near-identity isometry [1; 0] + s·G with s log-uniform in [10⁻², 10^½],
/// and amplitude damping toward a Haar-random basis vector.
fn oracle_candidates(rng: &mut impl Rng, d: usize) -> Vec<ComplexMatrix> {
    let u = haar_unitary(rng, d);
    let gaussian = orthonormalize_columns(&ginibre(rng, 2 * d, d));
    let s = 10f64.powf(rng.random_range(-2.0..0.5));
    let mut g = ginibre(rng, 2 * d, d).scale_re(s);
    for i in 0..d {
        g[(i, i)] += C64::new(1.0, 0.0);
    }
    let near_identity = orthonormalize_columns(&g);
    let basis = haar_unitary(rng, d);
    let gamma: f64 = rng.random_range(0.0..1.0);
    let psi = basis.column(0);
    let mut k0 = ComplexMatrix::outer(&psi, &psi);
    let mut k1 = ComplexMatrix::zeros(d, d);
    for j in 1..d {
        let e = basis.column(j);
        k0 = &k0 + &ComplexMatrix::outer(&e, &e).scale_re((1.0 - gamma).sqrt());
        k1 = &k1 + &ComplexMatrix::outer(&psi, &e).scale_re(gamma.sqrt());
    }
    vec![stack(&u, &ComplexMatrix::zeros(d, d)), gaussian, near_identity, stack(&k0, &k1)]
}

/// Largest energy drop Tr(Hρ) − Tr(H Φ(ρ)) found over channels Φ on A.
///
/// The clock-and-shift unitaries are always tried. Trial t draws its
/// candidates from `stream_rng(seed, t)` (see `oracle_candidates`). The best
/// few sampled isometries are then polished by Nelder–Mead over the entries
/// of a 2d×d matrix that is orthonormalized before use: for states that
/// commute with H the extracting channels form a thin set that sampling alone
/// rarely hits. Every reported value is the gain of an actual channel.
pub fn brute_force_extraction_oracle(inst: &SlpInstance, trials: usize, seed: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let (da, db) = (inst.dim_a, inst.dim_b);
    let e0 = inst.energy();
    let lift = |k: &ComplexMatrix| crate::qcore::kron(k, &ComplexMatrix::identity(db));
    let gain = |ks: &[ComplexMatrix]| -> f64 {
        let lifted: Vec<ComplexMatrix> = ks.iter().map(lift).collect();
        let out = inst.rho.apply_kraus(&lifted);
        e0 - (out.matrix() * &inst.hamiltonian).trace().re
    };
    let mut sampled: Vec<(f64, usize, ComplexMatrix)> = (0..trials)
        .into_par_iter()
        .flat_map_iter(|t| {
            let mut rng = stream_rng(seed, t as u64);
            oracle_candidates(&mut rng, da)
                .into_iter()
                .enumerate()
                .map(move |(j, v)| (t * 4 + j, v))
        })
        .map(|(idx, v)| (gain(&split_isometry(&v, da)), idx, v))
        .collect();
    sampled.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let best_sampled = sampled[0].0;

    let n = 2 * da * da * 2;
    let to_params = |v: &ComplexMatrix| v.data().iter().flat_map(|z| [z.re, z.im]).collect::<Vec<f64>>();
    let objective = |x: &[f64]| -> f64 {
        let g = ComplexMatrix::from_vec(2 * da, da, x.chunks(2).map(|p| C64::new(p[0], p[1])).collect());
        -gain(&split_isometry(&orthonormalize_columns(&g), da))
    };
    let opts = NelderMeadOptions {
        max_evals: 3000,
        initial_step: 0.05,
        ..Default::default()
    };
    let polished = sampled
        .par_iter()
        .take(ORACLE_POLISH)
        .map(|(_, _, v)| -nelder_mead(&objective, &to_params(v), &vec![(-2.0, 2.0); n], &opts).f)
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let clock_shift = clock_shift_unitaries(da)
        .iter()
        .map(|u| gain(std::slice::from_ref(u)))
        .fold(f64::NEG_INFINITY, f64::max);
    best_sampled.max(polished).max(clock_shift)
}

/// Random pair with H drawn from the Gaussian unitary ensemble and ρ diagonal
/// in H's eigenbasis with flat-Dirichlet populations. With `passive` the
/// populations are sorted to decrease with energy.
pub fn random_energy_diagonal_instance(rng: &mut impl Rng, dim_a: usize, dim_b: usize, passive: bool) -> Result<SlpInstance> {
    let d = dim_a * dim_b;
    let g = ginibre(rng, d, d);
    let h = (&g + &g.dagger()).scale_re(0.5);
    let eig = hermitian_eig(&h)?;
    let mut pops: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = pops.iter().sum();
    pops.iter_mut().for_each(|p| *p /= total);
    if passive {
        // eigenvalues come out ascending
        pops.sort_by(|a, b| b.total_cmp(a));
    }
    let v = &eig.vectors;
    let rho = &(v * &ComplexMatrix::diag_real(&pops)) * &v.dagger();
    SlpInstance::new(DensityOperator::new(rho.hermitian_part())?, h, dim_a, dim_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimal_qet::{build_model, MinimalParams};
    use crate::qcore::{id2, kron, sigma_z, StateVector};

    fn local_z() -> ComplexMatrix {
        &kron(&sigma_z(), &id2()) + &kron(&id2(), &sigma_z())
    }

    fn inst(rho: DensityOperator, h: ComplexMatrix) -> SlpInstance {
        SlpInstance::new(rho, h, 2, 2).unwrap()
    }

    #[test]
    fn c_of_identity_pair() {
        let i = inst(DensityOperator::maximally_mixed(4), ComplexMatrix::identity(4));
        let c = build_c_operator(&i).unwrap();
        assert!(c.max_abs_diff(&ComplexMatrix::identity(4).scale_re(0.5)) < 1e-15);
    }

    #[test]
    fn c_support_for_product_state() {
        let rho = StateVector::basis(4, 0).to_density();
        let h = kron(&sigma_z(), &id2());
        let c = build_c_operator(&inst(rho, h)).unwrap();
        for r in 0..4 {
            for col in 0..4 {
                if r / 2 != 0 || col / 2 != 0 {
                    assert!(c[(r, col)].norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn local_ground_is_slp() {
        let rho = StateVector::basis(4, 3).to_density();
        assert!(slp_check(&inst(rho, local_z())).unwrap().is_slp);
    }

    #[test]
    fn excited_product_is_not_slp() {
        let i = inst(StateVector::basis(4, 0).to_density(), local_z());
        assert!(!slp_check(&i).unwrap().is_slp);
        assert!(brute_force_extraction_oracle(&i, 200, 1) >= 2.0 - 1e-6);
    }

    #[test]
    fn choi_energy_matches_kraus_action() {
        let p = MinimalParams::new(1.0, 1.0).unwrap();
        let m = build_model(p).unwrap();
        let i = inst(StateVector::basis(4, 1).to_density(), m.h_total.clone());
        let c = build_c_operator(&i).unwrap();
        let mut rng = stream_rng(3, 0);
        let u = haar_unitary(&mut rng, 2);
        let direct = (i.rho.evolve(&kron(&u, &id2())).matrix() * &i.hamiltonian).trace().re;
        assert!((energy_after_choi(&c, &choi_of(&[u])) - direct).abs() < 1e-12);
    }

    #[test]
    fn choi_energy_matches_non_unital_channel() {
        let mut rng = stream_rng(8, 0);
        let i = random_energy_diagonal_instance(&mut rng, 2, 2, false).unwrap();
        let v = orthonormalize_columns(&ginibre(&mut rng, 4, 2));
        let block = |r0: usize| ComplexMatrix::from_vec(2, 2, (0..4).map(|j| v[(r0 + j / 2, j % 2)]).collect());
        let ks = [block(0), block(2)];
        let lifted: Vec<ComplexMatrix> = ks.iter().map(|k| kron(k, &id2())).collect();
        let direct = (i.rho.apply_kraus(&lifted).matrix() * &i.hamiltonian).trace().re;
        let c = build_c_operator(&i).unwrap();
        assert!((energy_after_choi(&c, &choi_of(&ks)) - direct).abs() < 1e-12);
        // the identity channel's Choi operator recovers the energy
        assert!((energy_after_choi(&c, &choi_of(&[id2()])) - i.energy()).abs() < 1e-12);
    }

    #[test]
    fn minimal_ground_is_slp() {
        let p = MinimalParams::new(1.0, 1.0).unwrap();
        let m = build_model(p).unwrap();
        let i = inst(m.ground_density(), m.h_total.clone());
        assert!(slp_check(&i).unwrap().is_slp);
        assert!(brute_force_extraction_oracle(&i, 500, 7) < 1e-6);
    }

    #[test]
    fn energy_diagonal_instances_give_hermitian_x() {
        let mut rng = stream_rng(5, 0);
        for t in 0..10 {
            let i = random_energy_diagonal_instance(&mut rng, 2, 2, t % 2 == 0).unwrap();
            assert!(slp_check(&i).unwrap().hermiticity_defect < 1e-10);
        }
    }

    #[test]
    fn zero_trials() {
        let i = inst(StateVector::basis(4, 0).to_density(), local_z());
        assert_eq!(brute_force_extraction_oracle(&i, 0, 0), 0.0);
    }

    #[test]
    fn threshold_rejects_product_ground() {
        let p = MinimalParams::new(1.0, 1e-12).unwrap();
        let eig = hermitian_eig(&build_model(p).unwrap().h_total).unwrap();
        assert!(ground_population_threshold(&eig, 2).is_err());
    }

    #[test]
    fn bad_dims_rejected() {
        assert!(SlpInstance::new(DensityOperator::maximally_mixed(4), ComplexMatrix::identity(4), 2, 3).is_err());
    }
}
