//! Subcommand dispatch: turns a resolved [`RunConfig`] into a result table
//! and a JSON metrics object.

use qet_core::cooling::{
    ancilla_protocol_purity, locc_cooling, optimize_probes, ppa_purity, AngleChoice, CoolingSystem, PovmParams,
};
use qet_core::hardware_sim::{table_reproduction, ShotSettings};
use qet_core::minimal_qet::{build_model, optimal_theta, run_protocol, MinimalParams};
use qet_core::optim::{golden_section, NelderMeadOptions};
use qet_core::qft1d::{
    alice_total_energy, density_parts, optimize_scenario, scaling_study, well_metrics, Family, FamilyKind,
    FieldScenario, Grid, ScenarioBounds, Smearing,
};
use qet_core::rng::stream_rng;
use qet_core::slp::{brute_force_extraction_oracle, random_energy_diagonal_instance, slp_check, SlpInstance};
use qet_core::unitary_qet::{
    alice_energy, build_unitary_model, loqc_b_marginal, loqc_extraction_energy, max_extraction_bound,
    minimal_ensemble_b_marginal, nmr_extraction_energy, rotation_blocks, timescale_budget, UnitaryParams,
};
use qet_core::{QetError, Result};
use serde_json::{json, Map, Value as Json};

use crate::config::RunConfig;
use crate::schema::Subcommand;
use crate::table::{Cell, ColumnType, Metadata, ResultTable};

use ColumnType::{Bool, Int, Real, Text};

/// Output of one run.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub table: ResultTable,
    pub metrics: Json,
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Runs `cfg`. `timestamp` goes into the table metadata unchanged.
pub fn run(cfg: &RunConfig, timestamp: Option<u64>) -> Result<Outcome> {
    let meta = Metadata {
        version: VERSION.to_string(),
        seed: cfg.seed,
        timestamp,
        config_echo: cfg.to_config_text(),
    };
    let (table, metrics) = match cfg.subcommand {
        Subcommand::Minimal => minimal(cfg, meta)?,
        Subcommand::Unitary => unitary(cfg, meta)?,
        Subcommand::Hardware => hardware(cfg, meta)?,
        Subcommand::Cooling => cooling(cfg, meta)?,
        Subcommand::Qft => qft(cfg, meta)?,
        Subcommand::Slp => slp(cfg, meta)?,
    };
    let mut doc = Map::new();
    doc.insert("version".into(), json!(VERSION));
    doc.insert("subcommand".into(), json!(cfg.subcommand.name()));
    doc.insert("seed".into(), json!(cfg.seed));
    doc.insert("metrics".into(), Json::Object(metrics));
    Ok(Outcome {
        table,
        metrics: Json::Object(doc),
    })
}

type Parts = (ResultTable, Map<String, Json>);

fn require(ok: bool, key: &'static str, reason: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(QetError::param(key, reason()))
    }
}

/// JSON has no NaN/∞; those become null.
fn num(v: f64) -> Json {
    if v.is_finite() {
        json!(v)
    } else {
        Json::Null
    }
}

fn minimal(cfg: &RunConfig, meta: Metadata) -> Result<Parts> {
    let p = MinimalParams::new(cfg.real("h"), cfg.real("k"))?;
    let theta = cfg.real_or_auto("theta").unwrap_or_else(|| optimal_theta(p));
    let l = run_protocol(p, theta)?;
    let mut t = ResultTable::new(
        &[("h", Real), ("k", Real), ("theta", Real), ("E_PA", Real), ("H_B", Real), ("V_AB", Real), ("E_UB", Real)],
        meta,
    );
    t.push(vec![p.h.into(), p.k.into(), theta.into(), l.e_pa.into(), l.e_hb.into(), l.e_vab.into(), l.e_ub.into()]);
    let mut m = Map::new();
    for (k, v) in [("theta", theta), ("E_PA", l.e_pa), ("H_B", l.e_hb), ("V_AB", l.e_vab), ("E_UB", l.e_ub)] {
        m.insert(k.into(), num(v));
    }
    Ok((t, m))
}

fn unitary(cfg: &RunConfig, meta: Metadata) -> Result<Parts> {
    let p = UnitaryParams::new(cfg.real("h_a"), cfg.real("h_b"), cfg.real("k"))?;
    let model = build_unitary_model(p)?;
    let theta = match cfg.real_or_auto("theta") {
        Some(t) => t,
        None => best_rotation_angle(&model)?,
    };
    let (u_plus, u_minus) = rotation_blocks(theta);
    let loqc = loqc_extraction_energy(&model, &u_plus, &u_minus)?;
    let td = loqc_b_marginal(&model, &u_plus, &u_minus)?
        .trace_distance(&minimal_ensemble_b_marginal(&model, &u_plus, &u_minus)?)?;
    let bound = max_extraction_bound(p);
    let nmr = nmr_extraction_energy(p)?;
    let b = timescale_budget(cfg.real("j_an_a"), cfg.real("j_an_b"), cfg.real("t_pulse"), cfg.real("j_ab"))?;
    let ea = alice_energy(p);

    let mut t = ResultTable::new(
        &[
            ("h_a", Real),
            ("h_b", Real),
            ("k", Real),
            ("theta", Real),
            ("alice_energy", Real),
            ("loqc_energy_change", Real),
            ("max_extraction", Real),
            ("nmr_energy_change", Real),
            ("loqc_locc_trace_distance", Real),
            ("t_total_s", Real),
            ("t_ab_s", Real),
            ("valid", Bool),
        ],
        meta,
    );
    t.push(vec![
        p.h_a.into(),
        p.h_b.into(),
        p.k.into(),
        theta.into(),
        ea.into(),
        loqc.into(),
        bound.into(),
        nmr.into(),
        td.into(),
        b.t_total.into(),
        b.t_ab.into(),
        b.valid.into(),
    ]);
    let mut m = Map::new();
    m.insert("theta".into(), num(theta));
    m.insert("alice_energy".into(), num(ea));
    m.insert("loqc_energy_change".into(), num(loqc));
    m.insert("max_extraction".into(), num(bound));
    m.insert("nmr_energy_change".into(), num(nmr));
    m.insert("loqc_locc_trace_distance".into(), num(td));
    m.insert(
        "timescale".into(),
        json!({
            "t_an_a_s": num(b.t_an_a), "t_an_b_s": num(b.t_an_b), "t_pulse_s": num(b.t_pulse),
            "t_total_s": num(b.t_total), "t_ab_s": num(b.t_ab), "valid": b.valid,
        }),
    );
    Ok((t, m))
}

/// Grid scan of the rotation-block angle over one period, then a
/// golden-section polish around the best grid point.
fn best_rotation_angle(model: &qet_core::unitary_qet::UnitaryModel) -> Result<f64> {
    let energy = |theta: f64| {
        let (up, um) = rotation_blocks(theta);
        loqc_extraction_energy(model, &up, &um)
    };
    let n = 360;
    let step = std::f64::consts::PI / n as f64;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..n {
        let theta = -std::f64::consts::FRAC_PI_2 + step * i as f64;
        let e = energy(theta)?;
        if e < best.0 {
            best = (e, theta);
        }
    }
    let (theta, _) = golden_section(|t| energy(t).unwrap_or(f64::INFINITY), best.1 - step, best.1 + step, 1e-12);
    Ok(theta)
}

fn hardware(cfg: &RunConfig, meta: Metadata) -> Result<Parts> {
    let p = MinimalParams::new(cfg.real("h"), cfg.real("k"))?;
    let shots = cfg.count("shots");
    let noise = cfg.real("noise");
    require(shots > 0, "shots", || "must be at least 1".into())?;
    require((0.0..0.5).contains(&noise), "noise", || format!("must lie in [0, 0.5), got {noise}"))?;
    let settings = ShotSettings {
        shots,
        seed: cfg.seed,
        noise: (noise > 0.0).then_some(noise),
        mitigate: cfg.flag("mitigate"),
    };
    let report = table_reproduction(p, &settings)?;

    let mut t = ResultTable::new(
        &[
            ("quantity", Text),
            ("exact", Real),
            ("estimate", Real),
            ("std_err", Real),
            ("z", Real),
            ("mitigated", Real),
            ("mitigated_std_err", Real),
            ("mitigated_z", Real),
        ],
        meta,
    );
    let z = |est: f64, exact: f64, se: f64| if se > 0.0 { (est - exact) / se } else { f64::NAN };
    let mut m = Map::new();
    for (name, q) in report.quantities() {
        let zq = z(q.estimate, q.exact, q.std_err);
        let zm = q.mitigated.zip(q.mitigated_std_err).map(|(v, se)| z(v, q.exact, se));
        t.push(vec![
            name.into(),
            q.exact.into(),
            q.estimate.into(),
            q.std_err.into(),
            zq.into(),
            q.mitigated.into(),
            q.mitigated_std_err.into(),
            zm.into(),
        ]);
        m.insert(
            name.into(),
            json!({
                "exact": num(q.exact), "estimate": num(q.estimate), "std_err": num(q.std_err), "z": num(zq),
                "mitigated": q.mitigated.map(num), "mitigated_std_err": q.mitigated_std_err.map(num),
            }),
        );
    }
    m.insert("shots".into(), json!(shots));
    Ok((t, m))
}

fn cooling(cfg: &RunConfig, meta: Metadata) -> Result<Parts> {
    let p = MinimalParams::new(cfg.real("h"), cfg.real("k"))?;
    let (b0, b1, n) = (cfg.real("beta_min"), cfg.real("beta_max"), cfg.count("beta_points"));
    let eta = cfg.real("eta");
    let ppa_n = cfg.count("ppa_qubits");
    let probes = cfg.flag("probes");
    let restarts = cfg.count("probe_restarts");
    require(b0 >= 0.0, "beta_min", || format!("must be ≥ 0, got {b0}"))?;
    require(b1 >= b0, "beta_max", || format!("must be ≥ beta_min, got {b1}"))?;
    require(n >= 1, "beta_points", || "must be at least 1".into())?;
    require((0.0..=1.0).contains(&eta), "eta", || format!("must lie in [0, 1], got {eta}"))?;
    require((2..=3).contains(&ppa_n), "ppa_qubits", || format!("must be 2 or 3, got {ppa_n}"))?;
    require(!probes || restarts >= 1, "probe_restarts", || "must be at least 1".into())?;
    let angles = match cfg.choice("angles") {
        "energy" => AngleChoice::Energy,
        "purity" => AngleChoice::Purity,
        _ => AngleChoice::Reoptimized,
    };
    let povm = PovmParams::sharpness(eta);
    povm.validate()?;
    let sys = CoolingSystem::minimal(p);
    let (h_an, bath_h) = (cfg.real("h_an"), cfg.real("bath_h"));

    let mut cols = vec![("beta", Real), ("p_initial", Real), ("p_locc", Real), ("p_ancilla", Real), ("p_ppa", Real)];
    if probes {
        cols.push(("p_probes", Real));
    }
    let mut t = ResultTable::new(&cols, meta);
    let names = ["p_locc", "p_ancilla", "p_ppa", "p_probes"];
    let mut best = [f64::NEG_INFINITY; 4];
    for i in 0..n {
        let beta = if n == 1 { b0 } else { b0 + (b1 - b0) * i as f64 / (n - 1) as f64 };
        let locc = locc_cooling(p, beta, &povm, angles)?;
        let anc = ancilla_protocol_purity(sys, beta, h_an)?;
        let ppa = ppa_purity(ppa_n as usize, beta, bath_h)?;
        let mut row: Vec<Cell> = vec![beta.into(), locc.p_initial.into(), locc.p_final.into(), anc.p_final.into(), ppa.into()];
        if probes {
            let (_, r) = optimize_probes(sys, beta, h_an, restarts as usize, cfg.seed, &NelderMeadOptions::default())?;
            row.push(r.p_final.into());
        }
        for (b, cell) in best.iter_mut().zip(&row[2..]) {
            if let Cell::Real(v) = cell {
                *b = b.max(*v);
            }
        }
        t.push(row);
    }
    let mut m = Map::new();
    let best: Map<String, Json> = names.iter().zip(best).filter(|(_, v)| v.is_finite()).map(|(n, v)| (n.to_string(), json!(v))).collect();
    m.insert("max_purity".into(), Json::Object(best));
    m.insert("beta_points".into(), json!(n));
    Ok((t, m))
}

fn qft(cfg: &RunConfig, meta: Metadata) -> Result<Parts> {
    let kind: FamilyKind = cfg.choice("family").parse()?;
    let delta = cfg.real("delta");
    let t_signal = cfg.real("t_signal");
    let points = cfg.count("points");
    let optimize = cfg.flag("optimize");
    require(delta > 0.0, "delta", || format!("must be positive, got {delta}"))?;
    require(t_signal > 0.0, "t_signal", || format!("must be positive, got {t_signal}"))?;
    for key in ["sigma_a", "sigma_b"] {
        let s = cfg.real(key);
        require(s >= 0.0, key, || format!("must be ≥ 0, got {s}"))?;
    }
    require(points >= 2, "points", || "must be at least 2".into())?;
    require(!optimize || cfg.count("restarts") >= 1, "restarts", || "must be at least 1".into())?;

    let mut m = Map::new();
    let scn = if optimize {
        let mut bounds = ScenarioBounds::matched(kind, delta);
        bounds.t_signal = (t_signal, t_signal);
        let opts = NelderMeadOptions {
            max_evals: cfg.count("max_evals") as usize,
            ..Default::default()
        };
        let o = optimize_scenario(kind, &bounds, cfg.count("restarts") as usize, cfg.seed, &opts)?;
        m.insert("optimizer".into(), json!({ "comoving_depth": num(o.depth), "evals": o.evals }));
        o.scenario
    } else {
        let alice = Smearing::new(Family::build(kind, cfg.real("sigma_a"), delta), cfg.real("lambda0"), 0.0)?;
        let bob = Smearing::new(Family::build(kind, cfg.real("sigma_b"), delta), cfg.real("mu0"), t_signal + cfg.real("offset"))?;
        FieldScenario::new(alice, bob, t_signal, cfg.real("sigma_y"))?
    };
    let t = cfg.real_or_auto("time").unwrap_or_else(|| scn.separation_time());
    require(t > scn.t_signal, "time", || format!("must exceed t_signal = {}, got {t}", scn.t_signal))?;

    let well = well_metrics(&scn, t, &Grid::around_well(&scn, t))?;
    let pad = scn.bob.family.sigma().max(scn.alice.family.sigma()) / 2.0 + 6.0 * scn.bob.delta().max(scn.alice.delta());
    let drift = t - scn.t_signal;
    let grid = Grid::new(
        (-t).min(scn.bob.center - drift) - pad,
        t.max(scn.bob.center + drift) + pad,
        points as usize,
    )?;
    let mut table = ResultTable::new(
        &[("x", Real), ("rho_alice", Real), ("rho_bob", Real), ("rho_qet", Real), ("rho_total", Real)],
        meta,
    );
    for x in grid.xs() {
        let d = density_parts(&scn, x, t)?;
        table.push(vec![x.into(), d.alice.into(), d.bob.into(), d.qet.into(), d.total().into()]);
    }

    m.insert("family".into(), json!(kind.to_string()));
    m.insert("optimized".into(), json!(optimize));
    m.insert("time".into(), num(t));
    m.insert(
        "scenario".into(),
        json!({
            "delta": num(delta), "t_signal": num(scn.t_signal), "lambda0": num(scn.alice.amplitude),
            "mu0": num(scn.bob.amplitude), "bob_center": num(scn.bob.center),
            "sigma_a": num(scn.alice.family.sigma()), "sigma_b": num(scn.bob.family.sigma()),
            "sigma_y": num(scn.sigma_y_expect), "norm_alpha": num(scn.norm_alpha),
            "alice_energy": num(alice_total_energy(&scn.alice)),
        }),
    );
    m.insert("empty".into(), json!(well.empty));
    for (k, v) in [
        ("depth", well.depth),
        ("width", well.width),
        ("delta_x", well.delta_x),
        ("delta_e", well.delta_e),
        ("center", well.center),
    ] {
        m.insert(k.into(), num(v));
    }
    if cfg.flag("scaling") {
        let (rows, fit) = scaling_study(&scn, &[1.0, 2.0, 4.0, 8.0], t, &Grid::around_well(&scn, t))?;
        let rows: Vec<Json> = rows
            .iter()
            .map(|r| json!({ "upsilon": r.upsilon, "depth": num(r.metrics.depth), "width": num(r.metrics.width),
                              "delta_e": num(r.metrics.delta_e), "norm_alpha": num(r.norm_alpha) }))
            .collect();
        m.insert(
            "scaling".into(),
            json!({
                "rows": rows, "width_exponent": num(fit.width_exponent), "depth_exponent": num(fit.depth_exponent),
                "norm_alpha_drift": num(fit.norm_alpha_drift), "product_spread": num(fit.product_spread),
            }),
        );
    }
    Ok((table, m))
}

fn slp(cfg: &RunConfig, meta: Metadata) -> Result<Parts> {
    let trials = cfg.count("trials") as usize;
    let threshold = cfg.real("threshold");
    require(threshold > 0.0, "threshold", || format!("must be positive, got {threshold}"))?;
    let mut cases: Vec<(String, SlpInstance)> = Vec::new();
    if cfg.choice("source") == "minimal" {
        let model = build_model(MinimalParams::new(cfg.real("h"), cfg.real("k"))?)?;
        cases.push(("minimal-ground".into(), SlpInstance::new(model.ground_density(), model.h_total.clone(), 2, 2)?));
    } else {
        let (da, db) = (cfg.count("dim_a") as usize, cfg.count("dim_b") as usize);
        require(da >= 2, "dim_a", || format!("must be at least 2, got {da}"))?;
        require(db >= 2, "dim_b", || format!("must be at least 2, got {db}"))?;
        require(da * db <= 16, "dim_b", || format!("dim_a·dim_b must be ≤ 16, got {}", da * db))?;
        let mut rng = stream_rng(cfg.seed, 0);
        for i in 0..cfg.count("instances") {
            let passive = i % 2 == 0;
            let inst = random_energy_diagonal_instance(&mut rng, da, db, passive)?;
            cases.push((if passive { "random-passive" } else { "random-active" }.into(), inst));
        }
    }

    let mut t = ResultTable::new(
        &[
            ("index", Int),
            ("source", Text),
            ("is_slp", Bool),
            ("condition_min_eigenvalue", Real),
            ("oracle_gain", Real),
            ("agree", Bool),
        ],
        meta,
    );
    let (mut n_slp, mut disagreements) = (0u64, 0u64);
    for (i, (source, inst)) in cases.iter().enumerate() {
        let v = slp_check(inst)?;
        let gain = brute_force_extraction_oracle(inst, trials, cfg.seed.wrapping_add(1 + i as u64));
        let agree = v.is_slp == (gain < threshold);
        n_slp += v.is_slp as u64;
        disagreements += (!agree) as u64;
        t.push(vec![
            (i as u64).into(),
            source.as_str().into(),
            v.is_slp.into(),
            v.condition_min_eigenvalue.into(),
            gain.into(),
            agree.into(),
        ]);
    }
    let mut m = Map::new();
    m.insert("instances".into(), json!(cases.len()));
    m.insert("slp".into(), json!(n_slp));
    m.insert("disagreements".into(), json!(disagreements));
    Ok((t, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, Invocation};

    fn cfg(cmd: Subcommand, flags: &[(&str, &str)]) -> RunConfig {
        let inv = Invocation {
            subcommand: Some(cmd),
            flags: flags.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            ..Default::default()
        };
        parse_config(&inv, None, None).unwrap().0
    }

    #[test]
    fn minimal_row_matches_reference() {
        let o = run(&cfg(Subcommand::Minimal, &[("h", "1"), ("k", "0.2")]), None).unwrap();
        let e = o.metrics["metrics"]["E_UB"].as_f64().unwrap();
        assert!((e + 0.0180).abs() < 1e-4, "{e}");
        assert_eq!(o.table.rows().len(), 1);
    }

    #[test]
    fn unitary_defaults_reproduce_budget() {
        let o = run(&cfg(Subcommand::Unitary, &[]), None).unwrap();
        let ts = &o.metrics["metrics"]["timescale"];
        assert!((ts["t_total_s"].as_f64().unwrap() - 0.0376).abs() < 1e-3);
        assert_eq!(ts["valid"], json!(true));
        let m = &o.metrics["metrics"];
        assert!(m["loqc_locc_trace_distance"].as_f64().unwrap() < 1e-12);
        let (loqc, bound) = (m["loqc_energy_change"].as_f64().unwrap(), m["max_extraction"].as_f64().unwrap());
        assert!((loqc + bound).abs() < 1e-10, "{loqc} vs {bound}");
    }

    #[test]
    fn cooling_sweep_has_one_row_per_beta() {
        let o = run(&cfg(Subcommand::Cooling, &[("beta_points", "3")]), None).unwrap();
        assert_eq!(o.table.rows().len(), 3);
        let p0 = o.table.column("p_ancilla").unwrap()[0].clone();
        assert_eq!(p0, Cell::Real(0.5));
    }

    #[test]
    fn default_qft_scenario_has_a_well() {
        let o = run(&cfg(Subcommand::Qft, &[("points", "64")]), None).unwrap();
        assert!(o.metrics["metrics"]["delta_e"].as_f64().unwrap() < 0.0);
        assert_eq!(o.table.rows().len(), 64);
    }

    #[test]
    fn slp_minimal_ground_agrees() {
        let o = run(&cfg(Subcommand::Slp, &[("trials", "50")]), None).unwrap();
        assert_eq!(o.metrics["metrics"]["disagreements"], json!(0));
        assert_eq!(o.metrics["metrics"]["slp"], json!(1));
    }

    #[test]
    fn invalid_parameters_are_reported_by_key() {
        for (cmd, flags, key) in [
            (Subcommand::Hardware, vec![("noise", "0.7")], "noise"),
            (Subcommand::Cooling, vec![("eta", "2")], "eta"),
            (Subcommand::Qft, vec![("time", "3")], "time"),
            (Subcommand::Cooling, vec![("ppa_qubits", "4")], "ppa_qubits"),
            (Subcommand::Minimal, vec![("k", "-1")], "k"),
        ] {
            match run(&cfg(cmd, &flags), None) {
                Err(QetError::InvalidParameter { name, .. }) => assert_eq!(name, key),
                other => panic!("{cmd}: {other:?}"),
            }
        }
    }
}
