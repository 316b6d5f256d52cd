//! Fast invariant battery behind `qwork selftest`: route equivalences,
//! eigensolver cross-checks, inversion identities, and the discrete
//! fluctuation theorems, each against an independent evaluation.

use num_complex::Complex64 as C64;

use qwork::fluctuation::{exact_delta_f_with, jarzynski_check_with};
use qwork::fock::{build_hamiltonian, gibbs_state_with, Tolerances, UnitaryOperator};
use qwork::linalg::{self, eigen_hermitian, sym_tridiag_eigen, unitarity_residual};
use qwork::propagator::{conditional_pair_from, default_step_count, propagate};
use qwork::ramsey::{
    apply_measurement_model, decoherence_factor, qubit_readout, ramsey_output, CharFunction,
    Direction,
};
use qwork::schedule::QuenchSchedule;
use qwork::spectrum::{brute_force_lines, invert_to_distribution_padded};

type TestResult = Result<(), String>;

fn check(ok: bool, msg: String) -> TestResult {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn relaxed() -> Tolerances {
    Tolerances {
        thermal_tail: 1e6,
        ..Default::default()
    }
}

fn eigen_reconstruction() -> TestResult {
    let dim = 24;
    let h = build_hamiltonian(1.0, 0.31, 0.12, dim).map_err(|e| e.to_string())?;
    let eig = h.eigen().map_err(|e| e.to_string())?;
    let recon = eig.apply(|x| C64::new(x, 0.0));
    let res = linalg::max_abs_diff(&recon, h.entries());
    check(res < 1e-11, format!("eigen reconstruction residual {res:.3e}"))?;
    let u = eig.apply(|x| C64::new(0.0, 0.9 * x).exp());
    let ur = unitarity_residual(&u, dim);
    check(ur < 1e-10, format!("phase-function unitarity {ur:.3e}"))
}

fn tridiagonal_matches_dense() -> TestResult {
    let dim = 32;
    let (diag, offdiag) = qwork::fock::hamiltonian_tridiag(1.0, 0.27, 0.05, dim);
    let tri = sym_tridiag_eigen(&diag, &offdiag).map_err(|e| e.to_string())?;
    let h = build_hamiltonian(1.0, 0.27, 0.05, dim).map_err(|e| e.to_string())?;
    let dense = eigen_hermitian(h.entries()).map_err(|e| e.to_string())?;
    let mut vals = tri.values.clone();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let dev = vals
        .iter()
        .zip(dense.values.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max)
        / (dim as f64);
    check(dev < 1e-12, format!("tridiagonal eigenvalue deviation {dev:.3e}"))
}

fn three_route_equality() -> TestResult {
    let dim = 24;
    let g = 0.2;
    let s = QuenchSchedule::tanh_switch(0.0, g, 1.3, None).map_err(|e| e.to_string())?;
    let steps = default_step_count(&s, 1.0);
    let u = propagate(&s, 1.0, None, dim, steps).map_err(|e| e.to_string())?;
    let h_i = build_hamiltonian(1.0, 0.0, 0.0, dim).map_err(|e| e.to_string())?;
    let h_f = build_hamiltonian(1.0, g, 0.0, dim).map_err(|e| e.to_string())?;
    let rho = gibbs_state_with(&h_i, 0.8, &relaxed()).map_err(|e| e.to_string())?;
    let eval = CharFunction::new(&u, &h_i, &h_f).map_err(|e| e.to_string())?;
    for &u_time in &[0.0, 0.9, 3.3, 8.1] {
        let chi = eval.forward(&rho, u_time).map_err(|e| e.to_string())?;
        let (t_down, t_up) =
            conditional_pair_from(&u, &s, u_time, 1.0, None, dim).map_err(|e| e.to_string())?;
        let l = decoherence_factor(&t_down, &t_up, &rho).map_err(|e| e.to_string())?;
        check(
            (chi - l).norm() < 1e-10,
            format!("trace vs decoherence factor at u = {u_time}: {chi} vs {l}"),
        )?;
        let q = ramsey_output(&t_down, &t_up, &rho).map_err(|e| e.to_string())?;
        let (sz, sy) = qubit_readout(&q);
        check(
            (sz - l.re).abs() < 1e-10 && (sy - l.im).abs() < 1e-10,
            format!("ramsey readout at u = {u_time}"),
        )?;
    }
    Ok(())
}

fn schedule_roundtrip() -> TestResult {
    for text in [
        "tanh 0 0.165 T=1.885 dur=15.08",
        "const 0 dur=1; tanh 0 1 T=0.1 dur=0.8; const 1 dur=1",
        "tanh 0 0.5 T=2; tanh 0.5 0 T=0.05; tanh 0 0.5 T=0.05",
    ] {
        let s = QuenchSchedule::parse(text).map_err(|e| e.to_string())?;
        let reparsed = QuenchSchedule::parse(&s.to_text()).map_err(|e| e.to_string())?;
        check(
            reparsed.segments() == s.segments(),
            format!("roundtrip changed: {text}"),
        )?;
    }
    Ok(())
}

fn discrete_crooks_and_jarzynski() -> TestResult {
    let dim = 64;
    let g = 0.165;
    let eps = 0.25;
    let beta = 2.0f64.ln();
    let tol = Tolerances::default();
    let s = QuenchSchedule::tanh_switch(0.0, g, 0.3 * std::f64::consts::TAU, None)
        .map_err(|e| e.to_string())?;
    let eps_sched = s.scaled(eps / g);
    let steps = default_step_count(&s, 1.0);
    let u = propagate(&s, 1.0, Some(&eps_sched), dim, steps).map_err(|e| e.to_string())?;
    let h_i = build_hamiltonian(1.0, 0.0, 0.0, dim).map_err(|e| e.to_string())?;
    let h_f = build_hamiltonian(1.0, g, eps, dim).map_err(|e| e.to_string())?;
    let rho_i = gibbs_state_with(&h_i, beta, &tol).map_err(|e| e.to_string())?;
    let rho_f = gibbs_state_with(&h_f, beta, &tol).map_err(|e| e.to_string())?;
    let delta_f = exact_delta_f_with(&h_i, &h_f, beta, &tol).map_err(|e| e.to_string())?;

    let lines_f = brute_force_lines(&u, &h_i, &h_f, &rho_i).map_err(|e| e.to_string())?;
    let lines_b =
        brute_force_lines(&u.dagger(), &h_f, &h_i, &rho_f).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for &(w, pf) in &lines_f {
        if pf < 1e-8 {
            continue;
        }
        if let Some((_, pb)) = crate::oracle::best_line_match(&lines_b, -w, 1e-6) {
            let ratio = pf / pb;
            let predict = (beta * (w - delta_f)).exp();
            check(
                (ratio / predict - 1.0).abs() < 1e-9,
                format!("discrete Crooks at W = {w}: {ratio} vs {predict}"),
            )?;
            checked += 1;
        }
    }
    check(checked >= 5, format!("only {checked} Crooks lines checked"))?;

    let (lhs, rhs) =
        jarzynski_check_with(&u, &h_i, &h_f, &rho_i, beta, &tol).map_err(|e| e.to_string())?;
    check(
        (lhs / rhs - 1.0).abs() < 1e-8,
        format!("jarzynski {lhs} vs {rhs}"),
    )
}

fn inversion_identities() -> TestResult {
    // single synthetic line: normalization and position
    let du = 0.5;
    let tau = 25.0;
    let w0 = 1.21;
    let values: Vec<C64> = (0..600)
        .map(|k| {
            let u = k as f64 * du;
            C64::new(0.0, w0 * u).exp() * (-u / tau).exp()
        })
        .collect();
    let sig = qwork::ramsey::CharSignal::new(du, values, tau, 0.0, 0, Direction::Forward)
        .map_err(|e| e.to_string())?;
    let spec = invert_to_distribution_padded(&sig, 4).map_err(|e| e.to_string())?;
    let total = spec.total();
    check(
        (total - 1.0).abs() < 1e-6,
        format!("spectrum normalization {total}"),
    )?;
    let peaks = qwork::spectrum::extract_peaks(&spec, 1.0, 1e-3).map_err(|e| e.to_string())?;
    check(
        peaks.peaks.len() == 1 && (peaks.peaks[0].w - w0).abs() < spec.d_w,
        format!("synthetic line found at {:?}", peaks.peaks.first().map(|p| p.w)),
    )?;

    // determinism of the measurement model
    let base = vec![C64::new(1.0, 0.0); 32];
    let a = apply_measurement_model(base.clone(), du, tau, 0.01, 5, Direction::Forward)
        .map_err(|e| e.to_string())?;
    let b = apply_measurement_model(base, du, tau, 0.01, 5, Direction::Forward)
        .map_err(|e| e.to_string())?;
    check(a.values == b.values, "noise model not deterministic".into())
}

fn sudden_limit_identity() -> TestResult {
    // U = 1 quench: zero-temperature weights against coherent-state statistics
    let dim = 48;
    let g = 0.165;
    let h_i = build_hamiltonian(1.0, 0.0, 0.0, dim).map_err(|e| e.to_string())?;
    let h_f = build_hamiltonian(1.0, g, 0.0, dim).map_err(|e| e.to_string())?;
    let rho = qwork::fock::DensityMatrix::fock_projector(dim, 0).map_err(|e| e.to_string())?;
    let lines = brute_force_lines(&UnitaryOperator::identity(dim), &h_i, &h_f, &rho)
        .map_err(|e| e.to_string())?;
    let mean = g * g;
    for k in 0..6usize {
        let w = k as f64 - mean;
        let weight: f64 = lines
            .iter()
            .filter(|(lw, _)| (lw - w).abs() < 0.5)
            .map(|(_, p)| p)
            .sum();
        let log_fact: f64 = (1..=k).map(|j| (j as f64).ln()).sum();
        let poisson = (-mean + k as f64 * mean.ln() - log_fact).exp();
        check(
            (weight - poisson).abs() < 1e-8,
            format!("Poisson weight k = {k}: {weight} vs {poisson}"),
        )?;
    }
    Ok(())
}

/// Runs the battery, printing one line per suite. Returns the failure count.
pub fn run_all() -> usize {
    let suites: Vec<(&str, fn() -> TestResult)> = vec![
        ("eigen reconstruction", eigen_reconstruction),
        ("tridiagonal vs dense eigensolver", tridiagonal_matches_dense),
        ("three-route characteristic function", three_route_equality),
        ("schedule text roundtrip", schedule_roundtrip),
        ("discrete Crooks + Jarzynski", discrete_crooks_and_jarzynski),
        ("inversion identities", inversion_identities),
        ("sudden-quench Poisson statistics", sudden_limit_identity),
    ];
    let mut failures = 0;
    for (name, f) in suites {
        match f() {
            Ok(()) => println!("selftest: {name} ... ok"),
            Err(msg) => {
                failures += 1;
                println!("selftest: {name} ... FAILED: {msg}");
            }
        }
    }
    failures
}
