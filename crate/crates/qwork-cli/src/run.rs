//! End-to-end experiment runner: schedules → propagation → sampled signals →
//! work distributions → peaks → Tasaki-Crooks fit, with every intermediate
//! artifact persisted into a self-describing run directory.

use std::fs;
use std::path::Path;

use serde::Serialize;

use qwork::fluctuation::{crooks_points, exact_delta_f_with, fit_crooks, jarzynski_check_with, CrooksFit};
use qwork::fock::{build_hamiltonian, gibbs_state_with, thermal_tail};
use qwork::linalg::unitarity_residual;
use qwork::propagator::{default_step_count, propagate_with};
use qwork::ramsey::{measured_signal, CharSignal, Direction, RamseySweep};
use qwork::spectrum::{extract_peaks, invert_to_distribution_padded, Peak, PeakSet, WorkSpectrum};
use qwork::Error;

use crate::config::RunConfig;
use crate::{at_stage, plot, CliError, CliResult};

/// Command-line overrides applied on top of the parsed config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub dim: Option<usize>,
    pub noise: Option<f64>,
    pub no_plots: bool,
}

/// Everything one run produces, before serialization.
pub struct PipelineOutput {
    pub config: RunConfig,
    pub signal_forward: CharSignal,
    pub signal_backward: CharSignal,
    pub spectrum_forward: WorkSpectrum,
    pub spectrum_backward: WorkSpectrum,
    pub peaks_forward: Option<PeakSet>,
    pub peaks_backward: Option<PeakSet>,
    pub fit: Option<CrooksFit>,
    pub report: RunReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: String,
    pub seed: u64,
    pub units: UnitsReport,
    pub conventions: ConventionsReport,
    pub schedules: SchedulesReport,
    pub exact: ExactReport,
    pub fit: Option<FitReport>,
    pub fit_error: Option<String>,
    pub jarzynski: JarzynskiReport,
    pub truncation: TruncationReport,
    pub peaks: PeaksSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitsReport {
    pub trap_frequency_khz: f64,
    /// One internal time unit (1/ω₀) in μs.
    pub time_unit_us: f64,
    /// Internal energies are in units of ω₀; multiply by the trap frequency
    /// for ordinary kHz.
    pub energy_unit_khz: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConventionsReport {
    pub noise_model: &'static str,
    pub envelope: &'static str,
    pub repeated_tanh_shape: &'static str,
    pub switching_times: &'static str,
}

impl Default for ConventionsReport {
    fn default() -> Self {
        Self {
            noise_model: "additive Gaussian, per quadrature, sigma relative to |chi| <= 1, \
                          independent per sample and per direction",
            envelope: "exp(-u/tau) multiplies the exact signal",
            repeated_tanh_shape: "cycles x (slow up, fast down) then a final fast up-switch",
            switching_times: "repeated-tanh defaults use the absolute values 20 us (slow) and \
                              0.03 us (fast)",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SchedulesReport {
    /// λ(t) protocols in the schedule grammar, internal units.
    pub forward_lambda: String,
    pub backward_lambda: String,
    pub forward_epsilon: String,
    pub quench_time_us: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactReport {
    /// β in 1/ω₀.
    pub beta_internal: f64,
    /// ΔF in ω₀.
    pub delta_f_internal: f64,
    pub delta_f_khz: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub a_internal: f64,
    pub b: f64,
    pub beta_hat_internal: f64,
    pub delta_f_hat_internal: f64,
    pub delta_f_hat_khz: f64,
    pub residual_rms: f64,
    pub beta_hat_error_pct: f64,
    pub delta_f_hat_error_pct: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct JarzynskiReport {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    pub dim: usize,
    pub pad_levels: usize,
    pub thermal_tail_initial: f64,
    pub thermal_tail_final: f64,
    pub edge_population_forward: f64,
    pub edge_population_backward: f64,
    pub unitarity_residual_forward: f64,
    pub unitarity_residual_backward: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeaksSummary {
    pub forward: usize,
    pub backward: usize,
    pub matched: usize,
    pub dropped: usize,
}

/// Computes the whole pipeline for one configuration.
pub fn execute(config: &RunConfig) -> CliResult<PipelineOutput> {
    config.validate()?;
    let dim = config.numerics.dim;
    let tol = config.tolerances();
    let params = config.ion_params()?;

    // protocols
    let intensity_f = config.forward_intensity()?;
    let intensity_b = config.backward_intensity()?;
    let (lambda_f_sched, epsilon_f_sched) =
        at_stage("iontrap", qwork::iontrap::build_ion_protocol(&intensity_f, &params))?;
    let (lambda_b_sched, epsilon_b_sched) =
        at_stage("iontrap", qwork::iontrap::build_ion_protocol(&intensity_b, &params))?;

    // endpoint Hamiltonians and thermal states
    let t_q = lambda_f_sched.total_time();
    let lam_i = at_stage("protocol", lambda_f_sched.eval(0.0))?;
    let lam_f = at_stage("protocol", lambda_f_sched.eval(t_q))?;
    let eps_i = at_stage("protocol", epsilon_f_sched.eval(0.0))?;
    let eps_f = at_stage("protocol", epsilon_f_sched.eval(t_q))?;
    let h_i = at_stage("fockspace", build_hamiltonian(1.0, lam_i, eps_i, dim))?;
    let h_f = at_stage("fockspace", build_hamiltonian(1.0, lam_f, eps_f, dim))?;
    let beta = config.beta_internal();
    let rho_i = at_stage("fockspace", gibbs_state_with(&h_i, beta, &tol))?;
    let rho_f = at_stage("fockspace", gibbs_state_with(&h_f, beta, &tol))?;

    // propagation
    let steps = if config.numerics.steps > 0 {
        config.numerics.steps
    } else {
        default_step_count(&lambda_f_sched, 1.0)
    };
    let u_f = at_stage(
        "propagator",
        propagate_with(&lambda_f_sched, 1.0, Some(&epsilon_f_sched), dim, steps, &tol),
    )?;
    let u_b = at_stage(
        "propagator",
        propagate_with(&lambda_b_sched, 1.0, Some(&epsilon_b_sched), dim, steps, &tol),
    )?;
    for (rho, u) in [(&rho_i, &u_f), (&rho_f, &u_b)] {
        let edge = rho.evolved_edge_population(u, tol.n_pad);
        if edge > tol.edge_population {
            return Err(CliError::Stage {
                stage: "propagator",
                source: Error::TruncationTooSmall {
                    population: edge,
                    level: dim - tol.n_pad,
                },
            });
        }
    }

    // sampled signals
    let du = config.us_to_internal(config.measurement.du_us);
    let tau = config.tau_internal();
    let sigma = config.measurement.noise_sigma;
    let seed = config.measurement.seed;
    let m = config.measurement.samples;
    let signal_forward = at_stage(
        "interferometry",
        measured_signal(
            &RamseySweep {
                direction: Direction::Forward,
                evolution: &u_f,
                h_initial: &h_i,
                h_final: &h_f,
                state: &rho_i,
            },
            du,
            m,
            tau,
            sigma,
            seed,
        ),
    )?;
    let signal_backward = at_stage(
        "interferometry",
        measured_signal(
            &RamseySweep {
                direction: Direction::Backward,
                evolution: &u_b,
                h_initial: &h_f,
                h_final: &h_i,
                state: &rho_f,
            },
            du,
            m,
            tau,
            sigma,
            seed,
        ),
    )?;

    // inversion and peaks
    let spectrum_forward = at_stage(
        "workdist",
        invert_to_distribution_padded(&signal_forward, config.numerics.zero_pad),
    )?;
    let spectrum_backward = at_stage(
        "workdist",
        invert_to_distribution_padded(&signal_backward, config.numerics.zero_pad),
    )?;

    let mut fit_error: Option<String> = None;
    let threshold = config.fit.rel_threshold;
    let peaks_forward = match extract_peaks(&spectrum_forward, 1.0, threshold) {
        Ok(p) => Some(p),
        Err(e) => {
            fit_error = Some(format!("forward peak extraction: {e}"));
            None
        }
    };
    let peaks_backward = match extract_peaks(&spectrum_backward, 1.0, threshold) {
        Ok(p) => Some(p),
        Err(e) => {
            fit_error.get_or_insert_with(|| format!("backward peak extraction: {e}"));
            None
        }
    };

    // Crooks fit (non-fatal: a degenerate spectrum is a reportable outcome)
    let mut matched = 0usize;
    let mut dropped = 0usize;
    let fit = match (&peaks_forward, &peaks_backward) {
        (Some(pf), Some(pb)) => match crooks_points(pf, pb) {
            Ok(pts) => {
                matched = pts.points.len();
                dropped = pts.dropped;
                match fit_crooks(&pts.points) {
                    Ok(fit) => Some(fit),
                    Err(e) => {
                        fit_error.get_or_insert_with(|| format!("crooks fit: {e}"));
                        None
                    }
                }
            }
            Err(e) => {
                fit_error.get_or_insert_with(|| format!("peak matching: {e}"));
                None
            }
        },
        _ => None,
    };

    // exact references and the Jarzynski cross-check
    let delta_f = at_stage("fluctuation", exact_delta_f_with(&h_i, &h_f, beta, &tol))?;
    let (jarz_lhs, jarz_rhs) = at_stage(
        "fluctuation",
        jarzynski_check_with(&u_f, &h_i, &h_f, &rho_i, beta, &tol),
    )?;

    let fit_report = fit.as_ref().map(|f| FitReport {
        a_internal: f.a,
        b: f.b,
        beta_hat_internal: f.beta_hat,
        delta_f_hat_internal: f.delta_f_hat,
        delta_f_hat_khz: config.internal_to_khz(f.delta_f_hat),
        residual_rms: f.residual,
        beta_hat_error_pct: 100.0 * (f.beta_hat / beta - 1.0),
        delta_f_hat_error_pct: 100.0 * (f.delta_f_hat / delta_f - 1.0),
        points: f.points.len(),
    });

    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        units: UnitsReport {
            trap_frequency_khz: config.trap.frequency_khz,
            time_unit_us: config.internal_to_us(1.0),
            energy_unit_khz: config.trap.frequency_khz,
        },
        conventions: ConventionsReport::default(),
        schedules: SchedulesReport {
            forward_lambda: lambda_f_sched.to_text(),
            backward_lambda: lambda_b_sched.to_text(),
            forward_epsilon: epsilon_f_sched.to_text(),
            quench_time_us: config.internal_to_us(t_q),
            steps,
        },
        exact: ExactReport {
            beta_internal: beta,
            delta_f_internal: delta_f,
            delta_f_khz: config.internal_to_khz(delta_f),
        },
        fit: fit_report,
        fit_error,
        jarzynski: JarzynskiReport {
            lhs: jarz_lhs,
            rhs: jarz_rhs,
            relative_deviation: (jarz_lhs / jarz_rhs - 1.0).abs(),
        },
        truncation: TruncationReport {
            dim,
            pad_levels: tol.n_pad,
            thermal_tail_initial: at_stage("fockspace", thermal_tail(&h_i, beta, tol.n_pad))?,
            thermal_tail_final: at_stage("fockspace", thermal_tail(&h_f, beta, tol.n_pad))?,
            edge_population_forward: rho_i.evolved_edge_population(&u_f, tol.n_pad),
            edge_population_backward: rho_f.evolved_edge_population(&u_b, tol.n_pad),
            unitarity_residual_forward: unitarity_residual(u_f.entries(), dim),
            unitarity_residual_backward: unitarity_residual(u_b.entries(), dim),
        },
        peaks: PeaksSummary {
            forward: peaks_forward.as_ref().map_or(0, |p| p.peaks.len()),
            backward: peaks_backward.as_ref().map_or(0, |p| p.peaks.len()),
            matched,
            dropped,
        },
    };

    Ok(PipelineOutput {
        config: config.clone(),
        signal_forward,
        signal_backward,
        spectrum_forward,
        spectrum_backward,
        peaks_forward,
        peaks_backward,
        fit,
        report,
    })
}

/// Runs one experiment and persists all artifacts under `out_dir`.
pub fn run_experiment(
    config: &RunConfig,
    out_dir: &Path,
    options: &RunOptions,
) -> CliResult<RunReport> {
    let mut config = config.clone();
    if let Some(seed) = options.seed {
        config.measurement.seed = seed;
    }
    if let Some(dim) = options.dim {
        config.numerics.dim = dim;
    }
    if let Some(noise) = options.noise {
        config.measurement.noise_sigma = noise;
    }

    let output = execute(&config)?;
    fs::create_dir_all(out_dir)?;
    write_artifacts(&output, out_dir)?;
    if !options.no_plots {
        plot::emit_plots(&output, out_dir)?;
    }
    Ok(output.report)
}

#[derive(Serialize)]
struct SignalMeta<'a> {
    du_us: f64,
    tau_us: f64,
    noise_sigma: f64,
    seed: u64,
    direction: Direction,
    schedule_lambda: &'a str,
}

#[derive(Serialize)]
struct PeaksDoc<'a> {
    units: &'static str,
    omega0_khz: f64,
    grid_spacing_internal: f64,
    direction: Direction,
    peaks: &'a [Peak],
}

#[derive(Serialize)]
struct FitDoc<'a> {
    units: &'static str,
    omega0_khz: f64,
    beta_exact_internal: f64,
    delta_f_exact_internal: f64,
    #[serde(flatten)]
    fit: &'a CrooksFit,
}

fn write_artifacts(out: &PipelineOutput, dir: &Path) -> CliResult<()> {
    let cfg = &out.config;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    fs::write(dir.join("report.json"), pretty_json(&out.report)?)?;

    for (name, sig, sched) in [
        ("forward", &out.signal_forward, &out.report.schedules.forward_lambda),
        ("backward", &out.signal_backward, &out.report.schedules.backward_lambda),
    ] {
        let mut csv = String::from("u,re,im\n");
        for (k, v) in sig.values.iter().enumerate() {
            let u_us = k as f64 * cfg.measurement.du_us;
            csv.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", u_us, v.re, v.im));
        }
        fs::write(dir.join(format!("signal_{name}.csv")), csv)?;
        let meta = SignalMeta {
            du_us: cfg.measurement.du_us,
            tau_us: cfg.measurement.tau_us,
            noise_sigma: sig.noise_sigma,
            seed: sig.seed,
            direction: sig.direction,
            schedule_lambda: sched,
        };
        fs::write(dir.join(format!("signal_{name}.meta.json")), pretty_json(&meta)?)?;
    }

    for (name, spec) in [
        ("forward", &out.spectrum_forward),
        ("backward", &out.spectrum_backward),
    ] {
        // W in ordinary kHz, P per kHz, so the columns integrate to one
        let f_khz = cfg.trap.frequency_khz;
        let mut csv = String::from("W,P\n");
        for (w, p) in spec.w_grid.iter().zip(&spec.density) {
            csv.push_str(&format!("{:.12e},{:.12e}\n", w * f_khz, p / f_khz));
        }
        fs::write(dir.join(format!("spectrum_{name}.csv")), csv)?;
    }

    for (name, peaks) in [
        ("forward", &out.peaks_forward),
        ("backward", &out.peaks_backward),
    ] {
        if let Some(p) = peaks {
            let doc = PeaksDoc {
                units: "internal (omega0 = 1)",
                omega0_khz: cfg.trap.frequency_khz,
                grid_spacing_internal: p.grid_spacing,
                direction: p.direction,
                peaks: &p.peaks,
            };
            fs::write(dir.join(format!("peaks_{name}.json")), pretty_json(&doc)?)?;
        }
    }

    if let Some(fit) = &out.fit {
        let doc = FitDoc {
            units: "internal (omega0 = 1)",
            omega0_khz: cfg.trap.frequency_khz,
            beta_exact_internal: out.report.exact.beta_internal,
            delta_f_exact_internal: out.report.exact.delta_f_internal,
            fit,
        };
        fs::write(dir.join("crooks_fit.json"), pretty_json(&doc)?)?;
    }
    Ok(())
}

fn pretty_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// One-line human summary of a finished run.
pub fn summary_line(report: &RunReport) -> String {
    match &report.fit {
        Some(fit) => format!(
            "beta_hat = {:.4}/omega0 (exact {:.4}, {:+.2}%), dF_hat = {:.4} omega0 = {:.2} kHz \
             (exact {:.4}, {:+.2}%), jarzynski dev {:.2e}, {} matched peaks",
            fit.beta_hat_internal,
            report.exact.beta_internal,
            fit.beta_hat_error_pct,
            fit.delta_f_hat_internal,
            fit.delta_f_hat_khz,
            report.exact.delta_f_internal,
            fit.delta_f_hat_error_pct,
            report.jarzynski.relative_deviation,
            report.peaks.matched,
        ),
        None => format!(
            "no fit ({}), jarzynski dev {:.2e}",
            report
                .fit_error
                .as_deref()
                .unwrap_or("no fit error recorded"),
            report.jarzynski.relative_deviation,
        ),
    }
}
