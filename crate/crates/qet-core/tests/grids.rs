//! Parameter-grid invariants that span several modules.

use qet_core::cooling::{
    ancilla_protocol_purity, energy_optimal_omegas, final_purity_povm, initial_purity, locc_cooling,
    purity_optimal_omegas, AngleChoice, CoolingSystem, PovmParams,
};
use qet_core::hardware_sim::{table_reproduction, table_reproduction_exact, ShotSettings};
use qet_core::minimal_qet::{build_model, optimal_theta, run_protocol, MinimalParams};
use qet_core::slp::{brute_force_extraction_oracle, ground_population_threshold, slp_check, SlpInstance};
use qet_core::{hermitian_eig, unitary_qet};

const GRID: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 2.5];

#[test]
fn minimal_ground_states_are_slp() {
    for h in GRID {
        for k in GRID {
            let m = build_model(MinimalParams::new(h, k).unwrap()).unwrap();
            let inst = SlpInstance::new(m.ground_density(), m.h_total.clone(), 2, 2).unwrap();
            assert!(slp_check(&inst).unwrap().is_slp, "h={h} k={k}");
        }
    }
}

#[test]
fn minimal_ground_resists_the_oracle() {
    for (i, (h, k)) in [(0.5, 2.5), (1.0, 1.0), (2.5, 0.5)].into_iter().enumerate() {
        let m = build_model(MinimalParams::new(h, k).unwrap()).unwrap();
        let inst = SlpInstance::new(m.ground_density(), m.h_total.clone(), 2, 2).unwrap();
        assert!(brute_force_extraction_oracle(&inst, 200, i as u64) < 1e-6);
    }
}

#[test]
fn threshold_lies_in_unit_interval() {
    for h in GRID {
        for k in GRID {
            let m = build_model(MinimalParams::new(h, k).unwrap()).unwrap();
            let p = ground_population_threshold(&hermitian_eig(&m.h_total).unwrap(), 2).unwrap();
            assert!(p > 0.0 && p < 1.0, "h={h} k={k}: {p}");
        }
    }
}

#[test]
fn exact_table_equals_state_simulation() {
    for h in GRID {
        for k in GRID {
            let p = MinimalParams::new(h, k).unwrap();
            let a = table_reproduction_exact(p).unwrap();
            let b = run_protocol(p, optimal_theta(p)).unwrap();
            for (x, y) in [(a.e_pa, b.e_pa), (a.e_hb, b.e_hb), (a.e_vab, b.e_vab), (a.e_ub, b.e_ub)] {
                assert!((x - y).abs() < 1e-12, "h={h} k={k}");
            }
        }
    }
}

#[test]
fn shot_runs_are_reproducible() {
    let p = MinimalParams::new(1.0, 0.5).unwrap();
    let s = ShotSettings {
        shots: 20_000,
        seed: 7,
        noise: Some(0.02),
        mitigate: true,
    };
    assert_eq!(table_reproduction(p, &s).unwrap(), table_reproduction(p, &s).unwrap());
    let other = ShotSettings { seed: 8, ..s.clone() };
    assert_ne!(table_reproduction(p, &s).unwrap(), table_reproduction(p, &other).unwrap());
}

#[test]
fn nmr_bound_is_attained_and_positive() {
    for ha in GRID {
        for hb in GRID {
            for k in [0.3, 1.0, 2.0] {
                let p = unitary_qet::UnitaryParams::new(ha, hb, k).unwrap();
                let bound = unitary_qet::max_extraction_bound(p);
                assert!(bound > 0.0);
                assert!((unitary_qet::nmr_extraction_energy(p).unwrap() + bound).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn purity_optimal_angles_never_lose_to_energy_optimal() {
    for h in GRID {
        for k in GRID {
            let p = MinimalParams::new(h, k).unwrap();
            for povm in [PovmParams::pvm(), PovmParams::sharpness(0.6)] {
                let pe = final_purity_povm(p, &povm, energy_optimal_omegas(p, &povm).unwrap()).unwrap();
                let pp = final_purity_povm(p, &povm, purity_optimal_omegas(p, &povm).unwrap()).unwrap();
                assert!(pp >= pe - 1e-12, "h={h} k={k}");
                assert!(pp >= initial_purity(p) - 1e-12);
            }
        }
    }
}

#[test]
fn locc_cooling_reoptimized_never_heats() {
    for beta in [0.2, 1.0, 5.0] {
        let p = MinimalParams::new(1.0, 1.5).unwrap();
        let r = locc_cooling(p, beta, &PovmParams::pvm(), AngleChoice::Purity).unwrap();
        assert!(r.p_final >= r.p_initial - 1e-12, "β={beta}");
    }
}

#[test]
fn ancilla_purity_rises_from_half() {
    let sys = CoolingSystem::new(1.0, 1.0, 5.0).unwrap();
    let mut last = 0.5;
    for beta in [0.0, 0.05, 0.2, 1.0] {
        let p = ancilla_protocol_purity(sys, beta, 1.0).unwrap().p_final;
        assert!(p >= last - 1e-12 && p <= 1.0);
        last = p;
    }
}
