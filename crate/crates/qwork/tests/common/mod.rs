#![allow(dead_code)] // each test binary uses its own subset

//! Shared closed-form oracles for the integration suites. Everything here is
//! independent of the library's evolution and inversion code paths.

use qwork::fock::{gibbs_state_with, DensityMatrix, HermitianOperator, Tolerances};

/// Associated Laguerre polynomial L_n^{(k)}(x) by the three-term recurrence.
pub fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let kf = k as f64;
    let mut lm1 = 1.0; // L_0
    if n == 0 {
        return lm1;
    }
    let mut l = 1.0 + kf - x; // L_1
    for i in 1..n {
        let fi = i as f64;
        let next = ((2.0 * fi + kf + 1.0 - x) * l - (fi + kf) * lm1) / (fi + 1.0);
        lm1 = l;
        l = next;
    }
    l
}

/// |⟨m|D(α)|n⟩|² for real displacement α: the Franck-Condon factors between
/// number states of two oscillators displaced by α.
pub fn displaced_overlap_sq(m: usize, n: usize, alpha: f64) -> f64 {
    let (lo, hi) = if m < n { (m, n) } else { (n, m) };
    let diff = hi - lo;
    let x = alpha * alpha;
    // ln(lo!/hi!) = −Σ ln j over (lo, hi]
    let log_fact_ratio: f64 = -((lo + 1)..=hi).map(|j| (j as f64).ln()).sum::<f64>();
    let lag = laguerre(lo, diff, x);
    (log_fact_ratio + diff as f64 * x.ln() - x).exp() * lag * lag
}

/// Poisson weight e^{−μ} μ^k / k!.
pub fn poisson(mean: f64, k: usize) -> f64 {
    let log_fact: f64 = (1..=k).map(|j| (j as f64).ln()).sum();
    (-mean + k as f64 * mean.ln() - log_fact).exp()
}

/// Gibbs state with the truncation budget disabled, for identity tests at
/// small dimensions.
pub fn relaxed_gibbs(h: &HermitianOperator, beta: f64) -> DensityMatrix {
    let tol = Tolerances {
        thermal_tail: 1.0,
        ..Default::default()
    };
    gibbs_state_with(h, beta, &tol).unwrap()
}

#[allow(dead_code)]
pub fn max_weight_deviation(pairs: &[(f64, f64)]) -> f64 {
    pairs
        .iter()
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
