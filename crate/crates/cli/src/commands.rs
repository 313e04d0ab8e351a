//! One function per subcommand, each turning a resolved config into an artifact.

use serde_json::{json, Value};

use qbridge::bohr_sommerfeld::{action, classical_period, classify_motion, quantize_with, QuantizeOptions as BsOptions};
use qbridge::model::{default_search_interval, find_equilibria, PotentialSpec, Stability};
use qbridge::oracle::{fd_eigensolve, ground_state_overlap, Boundary, OracleOptions as FdOptions};
use qbridge::propagator::{classical_action, classical_trajectory, kernel_phase, sliced_phase};
use qbridge::thermo::{
    match_at_lowest_minimum, matching_temperature, schrodinger_residual, thermo_profile, thermo_summary,
};
use qbridge::wigner::CharacteristicFunction;

use crate::config::{
    EnergyChoice, EquilibriumOptions, OracleOptions, Options, PropagateOptions, QuantizeOptions, RunConfig,
    ThermoOptions, WignerOptions,
};
use crate::error::CliError;
use crate::output::{num, opt, Artifact, Table};

pub fn run(config: &RunConfig) -> Result<Artifact, CliError> {
    match &config.options {
        Options::Wigner(o) => wigner(config, o),
        Options::Equilibrium(o) => equilibrium(config, o),
        Options::Thermo(o) => thermo(config, o),
        Options::Quantize(o) => quantize(config, o),
        Options::Propagate(o) => propagate(config, o),
        Options::Oracle(o) => oracle(config, o),
    }
}

fn wigner(config: &RunConfig, o: &WignerOptions) -> Result<Artifact, CliError> {
    let ens = config.ensemble.required()?;
    let rho = CharacteristicFunction::with_box(&ens, &config.potential, o.bounds.map(|b| (b.lo, b.hi)))?;
    let mut table = Table::new(&["q", "delta_q", "re", "im", "closed_form", "product_form", "residual"]);
    for q in o.q.points() {
        for dq in o.dq.points() {
            let sample = rho.quadrature(q, dq)?;
            let closed = rho.closed_form(q, dq)?;
            let product = rho.product_form(q, dq)?;
            let residual = rho.pde_residual(q, dq, o.form)?;
            table.push(vec![
                num(q),
                num(dq),
                num(sample.value.re),
                num(sample.value.im),
                num(closed.value.re),
                num(product.value.re),
                num(residual),
            ]);
        }
    }
    let mut artifact = Artifact::default();
    let (lo, hi) = rho.density().bounds();
    artifact.summary("normalization_box", [lo, hi]);
    artifact.summary("log_partition", rho.density().log_partition());
    artifact.table("samples", table);
    Ok(artifact)
}

fn equilibrium(config: &RunConfig, o: &EquilibriumOptions) -> Result<Artifact, CliError> {
    let spec = &config.potential;
    let (hbar, k_b) = (config.ensemble.hbar, config.ensemble.k_b);
    let interval = o.bounds_or_default(spec);
    let points = find_equilibria(spec, interval, o.tolerance)?;
    let mut table = Table::new(&["q0", "curvature", "stability", "matched_beta", "matched_temperature"]);
    for p in &points {
        let matched = match p.stability {
            Stability::Minimum => Some(matching_temperature(spec, p, hbar, k_b)?),
            _ => None,
        };
        table.push(vec![
            num(p.q0),
            num(p.curvature),
            serde_json::to_value(p.stability).expect("stability serializes"),
            opt(matched.map(|m| m.matched_beta)),
            opt(matched.map(|m| m.matched_temperature)),
        ]);
    }
    let mut artifact = Artifact::default();
    artifact.summary("interval", [interval.0, interval.1]);
    // a degenerate or absent minimum has no matched temperature; report null
    artifact.summary("matching", match_at_lowest_minimum(spec, hbar, k_b).ok());
    artifact.summary("E", thermo_summary(spec, hbar, k_b).ok().map(|s| s.energy));
    artifact.table("equilibria", table);
    Ok(artifact)
}

impl EquilibriumOptions {
    fn bounds_or_default(&self, spec: &PotentialSpec) -> (f64, f64) {
        self.interval.map_or_else(|| default_search_interval(spec), |i| (i.lo, i.hi))
    }
}

fn thermo(config: &RunConfig, o: &ThermoOptions) -> Result<Artifact, CliError> {
    let spec = &config.potential;
    let (hbar, k_b) = (config.ensemble.hbar, config.ensemble.k_b);
    let summary = thermo_summary(spec, hbar, k_b);
    let ens = match config.ensemble.beta {
        Some(beta) => config.ensemble.with_beta(beta),
        None => config.ensemble.with_beta(summary.clone()?.beta_matched),
    };
    let profile = thermo_profile(spec, &ens, &o.grid.points(), config.normalization)?;
    let mut table = Table::new(&["q", "V", "psi_sq", "S", "F_G", "schrodinger_residual"]);
    for i in 0..profile.q.len() {
        // the residual needs a real matched temperature somewhere; blank otherwise
        let residual = schrodinger_residual(spec, &ens, profile.q[i]).ok().map(|r| r.residual);
        table.push(vec![
            num(profile.q[i]),
            num(profile.potential[i]),
            num(profile.psi_sq[i]),
            num(profile.entropy[i]),
            num(profile.free_energy[i]),
            opt(residual),
        ]);
    }
    let mut artifact = Artifact::default();
    artifact.summary("beta", ens.beta);
    artifact.summary("T", profile.temperature);
    artifact.summary("summary", summary.ok());
    artifact.table("profile", table);
    Ok(artifact)
}

fn quantize(config: &RunConfig, o: &QuantizeOptions) -> Result<Artifact, CliError> {
    let options = BsOptions {
        class: o.class.kind(),
        order: o.order,
        oracle: o.oracle.then(|| FdOptions {
            grid_points: o.grid_points,
            ..FdOptions::default()
        }),
    };
    let spectrum = quantize_with(
        &config.potential,
        o.levels.first..=o.levels.last,
        config.ensemble.hbar,
        &options,
    )?;
    let spec = &config.potential;
    let mut table = Table::new(&["n", "target_action", "E_bs", "E_oracle", "relative_error", "period", "dJ_dE"]);
    for level in &spectrum.levels {
        let (period, slope) = period_and_slope(spec, level.e_bs);
        table.push(vec![
            Value::from(level.n),
            num(level.target_action),
            num(level.e_bs),
            opt(level.e_oracle),
            opt(level.relative_error),
            opt(period),
            opt(slope),
        ]);
    }
    let mut artifact = Artifact::default();
    artifact.summary("class", spectrum.class);
    artifact.summary("hbar", spectrum.hbar);
    artifact.table("levels", table);
    Ok(artifact)
}

/// Classical period and a central difference of `J(E)`; `None` where either is
/// undefined (a resting rotor, a level at a separatrix).
fn period_and_slope(spec: &PotentialSpec, energy: f64) -> (Option<f64>, Option<f64>) {
    let Ok(class) = classify_motion(spec, energy) else {
        return (None, None);
    };
    let period = classical_period(spec, energy, &class).ok();
    let h = 1e-5 * energy.abs().max(1.0);
    let slope = (|| {
        let up = action(spec, energy + h, &classify_motion(spec, energy + h).ok()?).ok()?;
        let down = action(spec, energy - h, &classify_motion(spec, energy - h).ok()?).ok()?;
        Some((up.action - down.action) / (2.0 * h))
    })();
    (period, slope)
}

fn propagate(config: &RunConfig, o: &PropagateOptions) -> Result<Artifact, CliError> {
    let spec = &config.potential;
    let hbar = config.ensemble.hbar;
    let energy = match o.energy {
        EnergyChoice::Auto => None,
        EnergyChoice::Value(e) => Some(e),
    };
    let kernel = kernel_phase(spec, o.from, o.to, o.time, energy, hbar)?;
    let mut table = Table::new(&["N", "S_N", "abs_error", "trapezoid_S", "total_phase", "prefactor_log"]);
    for &n in &o.slices.0 {
        let traj = classical_trajectory(spec, o.from, o.to, o.time, n)?;
        let phase = sliced_phase(&traj, spec, kernel.energy, hbar)?;
        table.push(vec![
            Value::from(n),
            num(phase.s_cl),
            num((phase.s_cl - kernel.s_cl).abs()),
            num(classical_action(&traj, spec)),
            num(phase.total_phase),
            num(phase.prefactor_log),
        ]);
    }
    let mut artifact = Artifact::default();
    artifact.summary("S_cl", kernel.s_cl);
    artifact.summary("E", kernel.energy);
    artifact.summary("energy_phase", kernel.energy_phase);
    artifact.summary("total_phase", kernel.total_phase);
    artifact.summary("prefactor_log", kernel.prefactor_log);
    artifact.summary("slices", kernel.slices);
    artifact.table("convergence", table);
    Ok(artifact)
}

fn oracle(config: &RunConfig, o: &OracleOptions) -> Result<Artifact, CliError> {
    let options = FdOptions {
        grid_points: o.grid_points,
        richardson: o.richardson,
        tolerance: o.tolerance,
    };
    let solution = fd_eigensolve(
        &config.potential,
        config.ensemble.hbar,
        o.bounds.map(|b| (b.lo, b.hi)),
        o.levels,
        o.boundary,
        &options,
    )?;
    let mut levels = Table::new(&["level", "eigenvalue", "raw_eigenvalue", "error_estimate"]);
    for k in 0..solution.eigenvalues.len() {
        levels.push(vec![
            Value::from(k),
            num(solution.eigenvalues[k]),
            num(solution.raw_eigenvalues[k]),
            num(solution.error_estimates[k]),
        ]);
    }
    let mut artifact = Artifact::default();
    artifact.summary("boundary", solution.boundary);
    artifact.summary("bounds", solution.bounds);
    artifact.summary("spacing", solution.spacing);
    artifact.summary("eigenvalues", &solution.eigenvalues);
    // overlap of e^{-beta V} with the ground state, at the given or matched beta
    let beta = config.ensemble.beta.or_else(|| {
        match_at_lowest_minimum(&config.potential, config.ensemble.hbar, config.ensemble.k_b)
            .ok()
            .map(|m| m.matched_beta)
    });
    let overlap = match (beta, o.boundary) {
        (Some(beta), Boundary::Dirichlet) => {
            ground_state_overlap(&config.potential, &config.ensemble.with_beta(beta), &solution).ok()
        }
        _ => None,
    };
    artifact.summary("overlap_beta", beta);
    artifact.summary("ground_state_overlap", overlap);
    artifact.table("levels", levels);
    if o.vectors {
        const NAMES: [&str; 16] = [
            "psi_0", "psi_1", "psi_2", "psi_3", "psi_4", "psi_5", "psi_6", "psi_7", "psi_8", "psi_9", "psi_10",
            "psi_11", "psi_12", "psi_13", "psi_14", "psi_15",
        ];
        if solution.eigenvectors.len() > NAMES.len() {
            return Err(CliError::validation(
                "options.vectors",
                &format!("eigenvector output is limited to {} levels", NAMES.len()),
            ));
        }
        let mut columns = vec!["q"];
        columns.extend(&NAMES[..solution.eigenvectors.len()]);
        let mut vectors = Table::new(&columns);
        for (i, &q) in solution.grid.iter().enumerate() {
            let mut row = vec![json!(q)];
            row.extend(solution.eigenvectors.iter().map(|v| num(v[i])));
            vectors.push(row);
        }
        artifact.table("eigenvectors", vectors);
        artifact.csv_table = 1;
    }
    Ok(artifact)
}
