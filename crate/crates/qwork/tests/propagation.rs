//! Propagator oracles: step-halving convergence order, the sudden and
//! adiabatic limits, and the time-reversal structure of the midpoint product.

mod common;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use qwork::fock::{build_hamiltonian, gibbs_state};
use qwork::linalg::{max_abs_diff, unitarity_residual, CMat};
use qwork::propagator::{default_step_count, propagate};
use qwork::schedule::QuenchSchedule;
use qwork::spectrum::brute_force_lines;

const G: f64 = 0.165;

fn fig1b_quench() -> QuenchSchedule {
    // tanh switch 0 → g with T = 0.3 trap periods
    QuenchSchedule::tanh_switch(0.0, G, 0.3 * std::f64::consts::TAU, None).unwrap()
}

#[test]
fn step_halving_converges_at_second_order() {
    let dim = 32;
    let s = fig1b_quench();
    let u1 = propagate(&s, 1.0, None, dim, 60).unwrap();
    let u2 = propagate(&s, 1.0, None, dim, 120).unwrap();
    let u4 = propagate(&s, 1.0, None, dim, 240).unwrap();
    let d1 = max_abs_diff(u1.entries(), u2.entries());
    let d2 = max_abs_diff(u2.entries(), u4.entries());
    let ratio = d1 / d2;
    assert!(
        (3.2..=4.8).contains(&ratio),
        "step-halving ratio {ratio} outside 4 ± 20% (d1 = {d1:.3e}, d2 = {d2:.3e})"
    );
}

#[test]
fn sudden_limit_reproduces_franck_condon_overlaps() {
    // t_Q → 0: transition probabilities become overlaps of displaced number
    // states, known in closed form through associated Laguerre polynomials
    let dim = 48;
    let t_q = 1e-5;
    let s = QuenchSchedule::tanh_switch(0.0, G, t_q / 8.0, Some(t_q)).unwrap();
    let u = propagate(&s, 1.0, None, dim, 100).unwrap();

    let h_f = build_hamiltonian(1.0, G, 0.0, dim).unwrap();
    let eig_f = h_f.eigen().unwrap();
    let amp = qwork::linalg::dagger(&eig_f.vectors).dot(u.entries());

    for n in 0..12 {
        for m in 0..12 {
            let got = amp[[m, n]].norm_sqr();
            let expect = common::displaced_overlap_sq(m, n, G);
            assert!(
                (got - expect).abs() < 2e-3,
                "p({m}|{n}) = {got:.6e}, Franck-Condon {expect:.6e}"
            );
        }
    }
}

#[test]
fn adiabatic_quench_keeps_weight_on_diagonal_transitions() {
    // T = 20 trap periods: ≥ 99% of the work distribution on n → n lines.
    // The spectrum is a rigid shift, so diagonal transitions all land at
    // W = ΔE₀ and the diagonal weight is the merged line weight there.
    let dim = 48;
    let t_slow = 20.0 * std::f64::consts::TAU;
    let s = QuenchSchedule::tanh_switch(0.0, G, t_slow, None).unwrap();
    let steps = default_step_count(&s, 1.0);
    let u = propagate(&s, 1.0, None, dim, steps).unwrap();

    let h_i = build_hamiltonian(1.0, 0.0, 0.0, dim).unwrap();
    let h_f = build_hamiltonian(1.0, G, 0.0, dim).unwrap();
    let rho = gibbs_state(&h_i, 2.0f64.ln()).unwrap();
    let lines = brute_force_lines(&u, &h_i, &h_f, &rho).unwrap();

    let shift = -G * G;
    let diagonal_weight: f64 = lines
        .iter()
        .filter(|(w, _)| (w - shift).abs() < 0.5)
        .map(|(_, p)| p)
        .sum();
    assert!(
        diagonal_weight >= 0.99,
        "adiabatic diagonal weight {diagonal_weight} < 0.99"
    );
}

#[test]
fn reversed_schedule_propagates_to_the_transpose() {
    // real symmetric step Hamiltonians and mirrored midpoints make the
    // reversed-protocol propagator exactly the transpose
    let dim = 24;
    let s = QuenchSchedule::repeated_tanh(0.0, G, 2.0, 0.2, 1, None, None).unwrap();
    let steps = 400;
    let u = propagate(&s, 1.0, None, dim, steps).unwrap();
    let u_rev = propagate(&s.reversed(), 1.0, None, dim, steps).unwrap();
    let transpose: CMat = u.entries().t().to_owned();
    assert!(max_abs_diff(u_rev.entries(), &transpose) < 1e-12);
}

#[test]
fn long_products_stay_unitary() {
    let dim = 32;
    let s = QuenchSchedule::repeated_tanh(0.0, G, 1.0, 0.02, 2, None, None).unwrap();
    let steps = default_step_count(&s, 1.0);
    assert!(steps > 5_000, "expected a long product, got {steps} steps");
    let u = propagate(&s, 1.0, None, dim, steps).unwrap();
    let res = unitarity_residual(u.entries(), dim);
    assert!(res < 1e-10, "unitarity residual {res:.3e} after {steps} steps");
}

#[test]
fn identity_schedule_gives_identity_up_to_phase() {
    let dim = 16;
    let s = QuenchSchedule::constant(0.0, 3.0).unwrap();
    let u = propagate(&s, 1.0, None, dim, 64).unwrap();
    // free evolution: diagonal phases e^{−i(n+1/2)t}
    let mut expect = Array2::<C64>::zeros((dim, dim));
    for n in 0..dim {
        expect[[n, n]] = C64::new(0.0, -(n as f64 + 0.5) * 3.0).exp();
    }
    assert!(max_abs_diff(u.entries(), &expect) < 1e-10);
}
