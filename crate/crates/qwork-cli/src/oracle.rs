//! Brute-force oracle command: exact spectral lines of the configured quench
//! and the discrete Tasaki-Crooks table, with no measurement model in the
//! way.

use std::fs;
use std::path::Path;

use serde::Serialize;

use qwork::fluctuation::exact_delta_f_with;
use qwork::fock::{build_hamiltonian, gibbs_state_with};
use qwork::propagator::{default_step_count, propagate_with};
use qwork::spectrum::brute_force_lines;

use crate::config::RunConfig;
use crate::{at_stage, CliResult};

/// Lines with less weight than this carry no statistical information and are
/// left out of the ratio table.
const TABLE_WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct OracleRow {
    pub w_internal: f64,
    pub w_khz: f64,
    pub weight_forward: f64,
    pub weight_backward: f64,
    pub ratio: f64,
    pub crooks_prediction: f64,
    pub relative_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub beta_internal: f64,
    pub delta_f_internal: f64,
    pub delta_f_khz: f64,
    pub lines_forward: usize,
    pub lines_backward: usize,
    pub max_relative_deviation: f64,
    pub table: Vec<OracleRow>,
}

/// Strongest line within `tol` of `target`, if any carries weight.
pub fn best_line_match(lines: &[(f64, f64)], target: f64, tol: f64) -> Option<(f64, f64)> {
    lines
        .iter()
        .filter(|(w, p)| (w - target).abs() < tol && *p > TABLE_WEIGHT_FLOOR)
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .copied()
}

/// Computes exact forward/backward line spectra and the Crooks ratio table.
pub fn run_oracle(config: &RunConfig) -> CliResult<OracleReport> {
    config.validate()?;
    let dim = config.numerics.dim;
    let tol = config.tolerances();
    let params = config.ion_params()?;

    let intensity = config.forward_intensity()?;
    let (lambda_sched, epsilon_sched) =
        at_stage("iontrap", qwork::iontrap::build_ion_protocol(&intensity, &params))?;
    let t_q = lambda_sched.total_time();
    let h_i = at_stage(
        "fockspace",
        build_hamiltonian(
            1.0,
            at_stage("protocol", lambda_sched.eval(0.0))?,
            at_stage("protocol", epsilon_sched.eval(0.0))?,
            dim,
        ),
    )?;
    let h_f = at_stage(
        "fockspace",
        build_hamiltonian(
            1.0,
            at_stage("protocol", lambda_sched.eval(t_q))?,
            at_stage("protocol", epsilon_sched.eval(t_q))?,
            dim,
        ),
    )?;
    let beta = config.beta_internal();
    let rho_i = at_stage("fockspace", gibbs_state_with(&h_i, beta, &tol))?;
    let rho_f = at_stage("fockspace", gibbs_state_with(&h_f, beta, &tol))?;

    let steps = if config.numerics.steps > 0 {
        config.numerics.steps
    } else {
        default_step_count(&lambda_sched, 1.0)
    };
    let u_f = at_stage(
        "propagator",
        propagate_with(&lambda_sched, 1.0, Some(&epsilon_sched), dim, steps, &tol),
    )?;
    // the defining backward evolution is the adjoint of the forward one
    let u_b = u_f.dagger();

    let lines_f = at_stage("workdist", brute_force_lines(&u_f, &h_i, &h_f, &rho_i))?;
    let lines_b = at_stage("workdist", brute_force_lines(&u_b, &h_f, &h_i, &rho_f))?;
    let delta_f = at_stage("fluctuation", exact_delta_f_with(&h_i, &h_f, beta, &tol))?;

    let mut table = Vec::new();
    let mut max_dev = 0.0f64;
    for &(w, weight_f) in &lines_f {
        if weight_f < TABLE_WEIGHT_FLOOR {
            continue;
        }
        // the partner line of the backward process sits at −W; truncation
        // scatters satellite lines of negligible weight nearby, so take the
        // strongest line in the window
        let partner = best_line_match(&lines_b, -w, 1e-6);
        if let Some((_, weight_b)) = partner {
            let ratio = weight_f / weight_b;
            let prediction = (beta * (w - delta_f)).exp();
            let relative_deviation = (ratio / prediction - 1.0).abs();
            max_dev = max_dev.max(relative_deviation);
            table.push(OracleRow {
                w_internal: w,
                w_khz: config.internal_to_khz(w),
                weight_forward: weight_f,
                weight_backward: weight_b,
                ratio,
                crooks_prediction: prediction,
                relative_deviation,
            });
        }
    }

    Ok(OracleReport {
        beta_internal: beta,
        delta_f_internal: delta_f,
        delta_f_khz: config.internal_to_khz(delta_f),
        lines_forward: lines_f.len(),
        lines_backward: lines_b.len(),
        max_relative_deviation: max_dev,
        table,
    })
}

/// Writes oracle.json and crooks_table.csv into `dir`.
pub fn write_oracle(report: &OracleReport, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(report)
        .map_err(|e| crate::CliError::Config(format!("serialization failed: {e}")))?;
    json.push('\n');
    fs::write(dir.join("oracle.json"), json)?;

    let mut csv = String::from(
        "W_internal,W_khz,weight_forward,weight_backward,ratio,crooks_prediction,relative_deviation\n",
    );
    for r in &report.table {
        csv.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.3e}\n",
            r.w_internal,
            r.w_khz,
            r.weight_forward,
            r.weight_backward,
            r.ratio,
            r.crooks_prediction,
            r.relative_deviation
        ));
    }
    fs::write(dir.join("crooks_table.csv"), csv)?;
    Ok(())
}
