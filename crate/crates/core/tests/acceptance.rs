//! End-to-end acceptance: one PASS/FAIL line per criterion, default configs.
//!
//! Runs without the libtest harness so the table is always printed:
//! `cargo test --release --test acceptance`.

use distorted_nls::cli::{
    self, asymptotics_report, decay_report, delta_report, dft_report, measure_report, nls_run, scatter_report,
    setup_on, solve_report, static_setup, Check, Command,
};
use distorted_nls::runstore::{PotentialSpec, RunConfig, RunStore, MANIFEST};
use std::collections::BTreeMap;
use std::path::Path;

struct Table {
    failed: Vec<usize>,
}

impl Table {
    fn line(&mut self, id: usize, title: &str, checks: &[Check], info: &str) {
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        let detail: Vec<String> = checks
            .iter()
            .map(|c| format!("{}={:.3e} ({})", c.name, c.value, c.bound))
            .collect();
        let info = if info.is_empty() { String::new() } else { format!(" [{info}]") };
        println!(
            "{} {id:>2} {title}: {}{info}",
            if pass { "PASS" } else { "FAIL" },
            detail.join(", ")
        );
        if !pass {
            self.failed.push(id);
        }
    }
}

fn pick(checks: &[Check], names: &[&str]) -> Vec<Check> {
    names
        .iter()
        .map(|n| {
            checks
                .iter()
                .find(|c| c.name == *n)
                .cloned()
                .unwrap_or_else(|| Check::holds(&format!("{n}_missing"), false))
        })
        .collect()
}

/// Every file of a run directory except the manifest, plus the manifest's
/// output checksums (its timings legitimately differ).
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        let name = e.file_name().to_string_lossy().into_owned();
        let bytes = std::fs::read(e.path()).unwrap();
        if name == MANIFEST {
            let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            out.insert(name, serde_json::to_vec(&v["outputs"]).unwrap());
        } else {
            out.insert(name, bytes);
        }
    }
    out
}

fn run_into(cmd: Command, cfg: &RunConfig, dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut store = RunStore::create(dir).unwrap();
    let checks = cli::run(cmd, cfg, &mut store).unwrap();
    store.write_json("checks.json", &checks).unwrap();
    store.finish(cmd.name(), cfg).unwrap();
    snapshot(dir)
}

fn main() {
    let cfg = RunConfig::default();
    let mut table = Table { failed: Vec::new() };

    // 1, 2: scattering identities on two potentials, barrier oracle.
    let (barrier, _) = scatter_report(&cfg).unwrap();
    let mut gauss_cfg = cfg.clone();
    gauss_cfg.potential = PotentialSpec::Gaussian {
        amplitude: 1.0,
        width: 1.0,
    };
    let (gauss, _) = scatter_report(&gauss_cfg).unwrap();
    let mut c1 = Vec::new();
    for (label, r) in [("barrier", &barrier), ("gaussian", &gauss)] {
        let d = &r.defects;
        c1.push(Check::lt(&format!("{label}_unitarity"), d.unitarity_plus.max(d.unitarity_minus), 1e-6));
        c1.push(Check::lt(&format!("{label}_t_conj"), d.t_conj, 1e-6));
        c1.push(Check::lt(
            &format!("{label}_r_conj"),
            d.r_plus_conj.max(d.r_minus_conj),
            1e-6,
        ));
        c1.push(Check::lt(&format!("{label}_cross"), d.cross, 1e-6));
    }
    table.line(
        1,
        "scattering identities",
        &c1,
        &format!(
            "literal |T(-k)-T(k)| = {:.3e} (barrier), not an identity",
            barrier.literal_t_even
        ),
    );
    table.line(2, "barrier oracle", &pick(&barrier.checks, &["barrier_oracle_rel_err"]), "");

    // 3: delta limit.
    let delta = delta_report(&cfg).unwrap();
    let rows: Vec<String> = delta.rows.iter().map(|(e, d)| format!("{e}:{d:.3e}")).collect();
    table.line(3, "delta limit", &delta.checks, &rows.join(" "));

    // 4, 5: distorted Fourier transform and its split.
    let st = static_setup(&cfg).unwrap();
    let dft = dft_report(&st, &cfg.potential).unwrap();
    table.line(
        4,
        "distorted FT",
        &pick(
            &dft.checks,
            &["plancherel_ratio_defect", "diagonalization_residual", "generic_vanishing_probe"],
        ),
        &format!("grid-node ratio {:.3e}", dft.vanishing_grid),
    );
    table.line(5, "split closure", &pick(&dft.checks, &["split_defect", "component_closure"]), "");

    // 6, 7, 8, 10: one shared nonlinear run.
    let run = nls_run(&cfg).unwrap();
    let solve = solve_report(&run, &cfg, true).unwrap();
    table.line(
        6,
        "conservation and order",
        &pick(&solve.checks, &["mass_drift", "energy_drift", "splitting_order"]),
        &format!(
            "x-quadrature drift M {:.2e}, H {:.2e}",
            solve.mass_drift_physical, solve.energy_drift_physical
        ),
    );
    let decay = decay_report(&cfg).unwrap();
    let mut c7 = pick(&solve.checks, &["sup_decay_slope"]);
    c7.extend(pick(
        &decay.checks,
        &[
            "weighted_sup_beta1_slope",
            "generic_weighted_sup_beta2_slope",
            "generic_smoothing_slope",
        ],
    ));
    table.line(7, "decay rates", &c7, "");
    table.line(
        8,
        "profile bounds",
        &pick(&solve.checks, &["profile_sup_over_eta", "dk_profile_growth"]),
        "",
    );

    // 9: spectral measure on the static grid.
    let measure = measure_report(&st, &cfg).unwrap();
    table.line(
        9,
        "spectral measure",
        &pick(
            &measure.checks,
            &["closure_independent", "commutator_residual", "commutator_order", "product_formula_mismatch"],
        ),
        "",
    );

    let static_barrier = setup_on(&cfg.potential, false, cfg.grid.grid().unwrap()).unwrap();
    let (asym, _) = asymptotics_report(&run, &static_barrier, &cfg).unwrap();
    table.line(
        10,
        "modified scattering",
        &pick(&asym.checks, &["ode_residual_slope", "cauchy_gaps_decreasing", "modulus_defect"]),
        &format!("rho = {:.3}", asym.fitted_rho.unwrap_or(f64::NAN)),
    );
    table.line(
        11,
        "stationary phase",
        &pick(&asym.checks, &["stationary_phase_rel_err", "stationary_phase_decreasing"]),
        &format!("error exponent {:.3}", asym.stationary_phase_exponent),
    );
    table.line(12, "negative-time identity", &pick(&asym.checks, &["negative_time_mismatch"]), "");

    // 13: PDO operator norms.
    table.line(
        13,
        "PDO probes",
        &pick(&decay.checks, &["pdo_mminus1_ratio", "pdo_dxm_ratio", "pdo_dkm_ratio"]),
        "",
    );

    // 14: byte-identical artifacts.
    let tmp = tempfile::tempdir().unwrap();
    let mut c14 = Vec::new();
    for cmd in [Command::Scatter, Command::DftCheck, Command::DeltaLimit, Command::DecayFit, Command::MeasureCheck] {
        let a = run_into(cmd, &cfg, &tmp.path().join(format!("{}-a", cmd.name())));
        let b = run_into(cmd, &cfg, &tmp.path().join(format!("{}-b", cmd.name())));
        c14.push(Check::holds(cmd.name(), a == b && !a.is_empty()));
    }
    table.line(14, "determinism", &c14, "");

    if table.failed.is_empty() {
        println!("acceptance: all 14 criteria pass");
    } else {
        println!("acceptance: failed criteria {:?}", table.failed);
        std::process::exit(1);
    }
}
