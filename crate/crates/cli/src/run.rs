//! Command implementations.

use std::path::{Path, PathBuf};

use bornlab::born::{born_measure, chi_square_test, expectation, mean, sample, variance, MomentKind, RandomVariable};
use bornlab::catalog::{CatalogState, Model, Potential};
use bornlab::experiments::{
    moment_divergence_report, run_double_slit, uncertainty_report, DoubleSlitConfig, DEFAULT_MIN_DISTANCE,
};
use bornlab::grid::{ComplexField, Grid};
use bornlab::madelung::{continuity_residual, force_residual, vorticity_residual};
use bornlab::observables::{
    angular_momentum, drift_velocity, energy_rv, osmotic_velocity, qm_energy_expect, qm_momentum_expect,
    qm_momentum_sq_expect,
};
use bornlab::propagator::{analytic_evolve, analytic_record, split_step, EvolutionRecord};
use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use crate::config::{Command, MethodSpec, RunConfig};
use crate::report::{write_csv, write_summary, Checks, Provenance, Summary};
use crate::CliError;

use Provenance::{Identity, Oracle, Threshold};

struct Setup {
    model: Model,
    state: CatalogState,
    grid: Grid,
    psi: ComplexField,
}

fn setup(config: &RunConfig) -> Result<Setup, CliError> {
    let model = config.model.as_ref().expect("validated").build()?;
    let state = config.state.as_ref().expect("validated").build(&model)?;
    let grid = config.grid.as_ref().expect("validated").build()?;
    if grid.dim() != model.dim() {
        return Err(CliError::Config(format!("grid has {} axes, model has {} coordinates", grid.dim(), model.dim())));
    }
    if config.body >= model.n_bodies() {
        return Err(CliError::Config(format!("body {} out of range for {} bodies", config.body, model.n_bodies())));
    }
    let psi = state.discretize(&grid)?;
    Ok(Setup { model, state, grid, psi })
}

/// Runs the configured command, writing artifacts under `out/<name>/`.
pub fn run(config: &RunConfig, out: &Path) -> Result<Summary, CliError> {
    let dir: PathBuf = out.join(config.run_name());
    let mut checks = Checks::new(&config.tolerances);
    let data = match config.command {
        Command::ListStates => list_states(),
        Command::Expect => expect(config, &mut checks, &dir)?,
        Command::Evolve => evolve(config, &mut checks, &dir)?,
        Command::MadelungCheck => madelung_check(config, &mut checks)?,
        Command::DoubleSlit => double_slit(config, &mut checks, &dir)?,
        Command::Moments => moments(config, &mut checks)?,
        Command::Uncertainty => uncertainty(config, &mut checks)?,
        Command::Sample => sampling(config, &mut checks, &dir)?,
    };
    let summary = Summary::new(config, checks.finish()?, data);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    write_summary(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn list_states() -> Value {
    json!({
        "models": [
            {"kind": "hydrogen", "parameters": {}, "notes": "atomic units, one body in three dimensions"},
            {"kind": "harmonic", "parameters": {"masses": "list of body masses", "body_dims": "dimensions per body", "hbar": "real", "omega": "real"}},
            {"kind": "free", "parameters": {"masses": "list of body masses", "body_dims": "dimensions per body", "hbar": "real"}}
        ],
        "states": [
            {"kind": "hydrogen", "parameters": {"n": ">= 1", "l": "0..n-1", "m": "-l..l"}, "model": "hydrogen"},
            {"kind": "harmonic", "parameters": {"quanta": "one non-negative integer per coordinate"}, "model": "harmonic"},
            {"kind": "gaussian", "parameters": {"center": "per coordinate", "sigma": "> 0", "k0": "per coordinate"}, "model": "any"},
            {"kind": "superposition", "parameters": {"terms": "list of {coefficient: [re, im], state}"}, "model": "shared by the terms"}
        ]
    })
}

/// Writes `fields.csv`: coordinates, rho, drift velocity per axis, energy, mask.
fn write_fields(dir: &Path, psi: &ComplexField, model: &Model) -> Result<(), CliError> {
    ensure_dir(dir)?;
    let grid = psi.grid();
    let d = grid.dim();
    let rho = psi.density();
    let velocities = (0..model.n_bodies()).map(|a| drift_velocity(psi, model, a)).collect::<bornlab::Result<Vec<_>>>()?;
    let e = energy_rv(psi, model)?;
    let mut header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
    header.push("rho".into());
    header.extend((0..d).map(|k| format!("v{k}")));
    header.push("energy".into());
    header.push("mask".into());
    let rows = (0..grid.len()).map(|i| {
        let mut row = grid.point_vec(i);
        row.push(rho[i]);
        for v in &velocities {
            row.extend((0..v.n_components()).map(|k| v.component(k)[i]));
        }
        row.push(e.component(0)[i]);
        row.push(if e.mask()[i] { 1.0 } else { 0.0 });
        row
    });
    write_csv(&dir.join("fields.csv"), &header, rows)
}

fn expect(config: &RunConfig, checks: &mut Checks, dir: &Path) -> Result<Value, CliError> {
    let Setup { model, state, grid, psi } = setup(config)?;
    let measure = born_measure(&psi)?;
    let norm2 = measure.raw_mass();
    let mut bodies = Vec::new();
    for a in 0..model.n_bodies() {
        let m = model.mass(a)?;
        let v = drift_velocity(&psi, &model, a)?;
        let u = osmotic_velocity(&psi, &model, a)?;
        let ev = expectation(&v, &measure, 1, MomentKind::Raw)?;
        let eu = expectation(&u, &measure, 1, MomentKind::Raw)?;
        let p = qm_momentum_expect(&psi, &model, a)?;
        let p2 = qm_momentum_sq_expect(&psi, &model, a)?;
        for k in 0..ev.len() {
            let qm = p[k].re / norm2;
            let natural = (p2[k] / norm2).sqrt();
            checks.rel(format!("momentum.body{a}.axis{k}"), m * ev[k], qm, natural, 1e-10, Identity);
        }
        bodies.push(json!({"body": a, "mean_drift_velocity": ev, "mean_osmotic_velocity": eu}));
    }
    let e = energy_rv(&psi, &model)?;
    let ee = mean(&e, &measure)?;
    let var_e = variance(&e, &measure)?;
    let qe = qm_energy_expect(&psi, &model)? / norm2;
    checks.rel("energy.identity", ee, qe, 0.0, 1e-10, Identity);
    if let Some(en) = state.eigen_energy() {
        checks.rel("energy.eigenvalue", ee, en, 0.0, 1e-6, Oracle);
        checks.at_most("energy.variance_ratio", var_e / (en * en), 1e-10, Identity);
    }
    let mut lz_value = Value::Null;
    if let (Potential::Coulomb { .. }, Some(q)) = (model.potential(), state.quantum_numbers()) {
        let l = angular_momentum(&psi, &model, 0, [0.0; 3])?;
        let lz = expectation(&l, &measure, 1, MomentKind::Raw)?[2];
        let m = q[2] as f64;
        let worst = (0..grid.len()).filter(|&i| l.mask()[i]).map(|i| (l.component(2)[i] - m).abs()).fold(0.0_f64, f64::max);
        checks.rel("angular_momentum.z", lz, m, 1.0, 1e-6, Oracle);
        checks.at_most("angular_momentum.z.pointwise", worst / m.abs().max(1.0), 1e-6, Oracle);
        lz_value = json!(lz);
    }
    if config.output.fields {
        write_fields(dir, &psi, &model)?;
    }
    Ok(json!({
        "state": state.label(),
        "bodies": bodies,
        "energy": {"mean": ee, "variance": var_e, "qm": qe},
        "angular_momentum_z": lz_value,
    }))
}

fn evolution_method(config: &RunConfig, state: &CatalogState) -> Result<MethodSpec, CliError> {
    let method = config.evolution.as_ref().map(|e| e.method).unwrap_or_default();
    Ok(match method {
        MethodSpec::Auto if state.is_stationary_superposition() => MethodSpec::Analytic,
        MethodSpec::Auto => MethodSpec::SplitStep,
        MethodSpec::Analytic if !state.is_stationary_superposition() => {
            return Err(CliError::Config("analytic evolution needs an eigen-superposition".into()))
        }
        m => m,
    })
}

fn evolve(config: &RunConfig, checks: &mut Checks, dir: &Path) -> Result<Value, CliError> {
    let Setup { model, state, grid, psi } = setup(config)?;
    let ev = config.evolution.as_ref().expect("validated");
    if !(ev.dt > 0.0) || ev.stride == 0 {
        return Err(CliError::Config("evolution needs dt > 0 and stride >= 1".into()));
    }
    let record: EvolutionRecord = match evolution_method(config, &state)? {
        MethodSpec::Analytic => {
            let times: Vec<f64> = (0..=ev.steps)
                .filter(|s| s % ev.stride == 0 || *s == ev.steps)
                .map(|s| s as f64 * ev.dt)
                .collect();
            analytic_record(&state, &grid, &times)?
        }
        _ => split_step(&psi, &model, ev.dt, ev.steps, ev.stride)?,
    };
    let energies = record
        .states
        .iter()
        .map(|s| Ok(qm_energy_expect(s, &model)? / s.norm().powi(2)))
        .collect::<Result<Vec<f64>, CliError>>()?;
    let e0 = energies[0];
    let drift = energies.iter().map(|e| (e - e0).abs()).fold(0.0_f64, f64::max);
    checks.at_most("norm_drift", record.norm_drift(), 1e-10, Threshold);
    checks.at_most("energy_drift", drift / e0.abs().max(f64::MIN_POSITIVE), 1e-6, Threshold);
    if config.output.fields {
        write_fields(dir, record.last(), &model)?;
    }
    Ok(json!({
        "method": record.method,
        "dt": record.dt,
        "times": record.times,
        "norms": record.norms,
        "energies": energies,
    }))
}

/// Three snapshots centered on `t = dt`, exact when the catalog allows it.
fn snapshots(config: &RunConfig, s: &Setup) -> Result<([ComplexField; 3], f64, &'static str), CliError> {
    let dt = config.evolution.as_ref().map(|e| e.dt).unwrap_or(1e-4);
    if !(dt > 0.0) {
        return Err(CliError::Config("evolution.dt must be positive".into()));
    }
    let times = [0.0, dt, 2.0 * dt];
    if s.state.is_stationary_superposition() {
        let [a, b, c] = times.map(|t| analytic_evolve(&s.state, &s.grid, t));
        return Ok(([a?, b?, c?], dt, "analytic"));
    }
    if matches!(s.model.potential(), Potential::Free) {
        if s.state.free_evolved(0.0).is_ok() {
            let scale = C64::new(1.0 / s.state.sample(&s.grid)?.norm(), 0.0);
            let at = |t: f64| -> Result<ComplexField, CliError> { Ok(s.state.free_evolved(t)?.sample(&s.grid)?.scaled(scale)) };
            return Ok(([at(times[0])?, at(times[1])?, at(times[2])?], dt, "analytic_free"));
        }
    }
    let rec = split_step(&s.psi, &s.model, dt, 2, 1)?;
    let mut it = rec.states.into_iter();
    let snaps = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
    Ok((snaps, dt, "split_step"))
}

fn madelung_check(config: &RunConfig, checks: &mut Checks) -> Result<Value, CliError> {
    let s = setup(config)?;
    let (snaps, dt, source) = snapshots(config, &s)?;
    let c = continuity_residual(&snaps, dt, &s.model)?;
    checks.at_most("continuity.l2", c.norm_l2, 1e-8, Threshold);
    let mut force = Vec::new();
    for a in 0..s.model.n_bodies() {
        let f = force_residual(&snaps, dt, &s.model, a)?;
        checks.at_most(format!("force.body{a}.l2"), f.norm_l2, 1e-8, Threshold);
        force.push(f);
    }
    let v = vorticity_residual(&snaps[1], &s.model)?;
    checks.at_most("vorticity.max", v.norm_max, 1e-6, Threshold);
    Ok(json!({"snapshots": source, "dt": dt, "continuity": c, "force": force, "vorticity": v}))
}

fn double_slit(config: &RunConfig, checks: &mut Checks, dir: &Path) -> Result<Value, CliError> {
    let ds: DoubleSlitConfig = config.double_slit.clone().unwrap_or_else(DoubleSlitConfig::default_config);
    let r = run_double_slit(&ds)?;
    checks.at_least("distance", r.distance, DEFAULT_MIN_DISTANCE, Threshold);
    checks.at_least("fringes.double", r.fringes_double as f64, 3.0, Threshold);
    checks.at_most("fringes.mixture", r.fringes_mixture as f64, 2.0, Threshold);
    checks.at_most("mirror_difference", r.mirror_difference, 1e-3, Identity);
    for run in [&r.both, &r.left, &r.right] {
        let which = serde_json::to_value(run.which).expect("serializes");
        let which = which.as_str().unwrap_or_default();
        checks.abs(format!("mass_budget.{which}"), run.mass_budget, 1.0, 1e-3, Identity);
    }
    ensure_dir(dir)?;
    let edges = &r.both.histogram.bin_edges;
    let header: Vec<String> =
        ["y_lo", "y_hi", "sigma_double", "sigma_left", "sigma_right", "mixture"].iter().map(|s| s.to_string()).collect();
    let rows = (0..r.mixture.len()).map(|j| {
        vec![
            edges[j],
            edges[j + 1],
            r.both.histogram.mass_per_bin[j],
            r.left.histogram.mass_per_bin[j],
            r.right.histogram.mass_per_bin[j],
            r.mixture[j],
        ]
    });
    write_csv(&dir.join("histogram.csv"), &header, rows)?;
    let brief = |run: &bornlab::experiments::SlitRun| {
        json!({
            "which": run.which,
            "transmitted_mass": run.histogram.transmitted_mass,
            "clipped_fraction": run.histogram.clipped_fraction,
            "net_flux_mass": run.net_flux_mass,
            "remaining_mass": run.remaining_mass,
            "mass_budget": run.mass_budget,
            "final_norm": run.final_norm,
        })
    };
    Ok(json!({
        "collection": r.both.histogram.collection,
        "distance": r.distance,
        "mirror_difference": r.mirror_difference,
        "fringes_double": r.fringes_double,
        "fringes_mixture": r.fringes_mixture,
        "runs": [brief(&r.both), brief(&r.left), brief(&r.right)],
    }))
}

fn moments(config: &RunConfig, checks: &mut Checks) -> Result<Value, CliError> {
    let Setup { model, state, grid, .. } = setup(config)?;
    let k_max = config.k_max.unwrap_or(4);
    let table = moment_divergence_report(&state, &model, &grid, k_max)?;
    let eigen = state.eigen_energy().is_some();
    for r in &table.rows {
        let name = format!("{}.k{}", r.observable, r.order);
        match (r.observable.as_str(), r.order) {
            ("position", _) => checks.rel(name, r.kolmogorov, r.qm, 1.0, 1e-9, Identity),
            ("energy", 1) => checks.rel(name, r.kolmogorov, r.qm, 1.0, 1e-10, Identity),
            ("energy", _) if eigen => checks.rel(name, r.kolmogorov, r.qm, 1.0, 1e-8, Oracle),
            _ => {}
        }
    }
    Ok(json!({"state": state.label(), "rows": table.rows}))
}

fn uncertainty(config: &RunConfig, checks: &mut Checks) -> Result<Value, CliError> {
    let Setup { model, psi, .. } = setup(config)?;
    let a = config.body;
    let r = uncertainty_report(&psi, &model, a)?;
    let m = model.mass(a)?;
    let half = 0.5 * model.hbar();
    for k in 0..r.sigma_x.len() {
        let sp2 = r.sigma_p_qm[k].powi(2);
        let split = r.m_sigma_v[k].powi(2) + r.m_sigma_u[k].powi(2);
        checks.rel(format!("decomposition.axis{k}"), split, sp2, 0.0, 1e-6, Identity);
        checks.at_least(format!("heisenberg.axis{k}"), r.qm_product[k] / half, 1.0 - 1e-9, Threshold);
    }
    Ok(json!({"body": a, "mass": m, "report": r}))
}

fn sampling(config: &RunConfig, checks: &mut Checks, dir: &Path) -> Result<Value, CliError> {
    let Setup { model, grid, psi, .. } = setup(config)?;
    let spec = config.sampling.clone().unwrap_or_default();
    let seed = config.seed.expect("validated");
    let measure = born_measure(&psi)?;
    let set = sample(&measure, spec.samples, seed)?;
    let chi = chi_square_test(&set, &measure, spec.bins)?;
    checks.at_least("chi_square.p_value", chi.p_value, 1e-3, Threshold);
    let v = drift_velocity(&psi, &model, config.body)?;
    let mut means = Vec::new();
    for k in 0..v.n_components() {
        let vals = set.values_of(&v, k);
        let n = vals.len() as f64;
        let mc = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|x| (x - mc).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
        let quad = mean(&RandomVariable::new(grid.clone(), vec![v.component(k).to_vec()], v.mask().to_vec())?, &measure)?;
        checks.abs(format!("mean_velocity.axis{k}"), mc, quad, 4.0 * sd / n.sqrt(), Threshold);
        means.push(json!({"monte_carlo": mc, "quadrature": quad, "sample_sd": sd}));
    }
    ensure_dir(dir)?;
    let header: Vec<String> = (0..grid.dim()).map(|k| format!("x{k}")).collect();
    write_csv(&dir.join("samples.csv"), &header, (0..set.len()).map(|i| set.point(i).to_vec()))?;
    Ok(json!({"samples": set.len(), "bins": spec.bins, "chi_square": chi, "mean_velocity": means}))
}
