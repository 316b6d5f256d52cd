//! Routes to the characteristic function of the work distribution, and the
//! measurement-imperfection model producing sampled signals.
//!
//! Three equivalent routes are implemented and cross-checked in the tests:
//! the direct trace
//!
//! χ_F(u) = tr[U†(t_Q) e^{iuH(λ_f)} U(t_Q) e^{−iuH(λ_i)} ρ_β(λ_i)],
//!
//! the decoherence factor L = tr[T↑† T↓ ρ] of the staggered conditional
//! protocol, and a full joint qubit⊗oscillator Ramsey simulation read out
//! through ⟨σ_z⟩ = Re L and ⟨σ_y⟩ = Im L.

use ndarray::linalg::kron;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, HermitianOperator, UnitaryOperator};
use crate::linalg::{dagger, trace_of_product, CMat};

/// Sweep direction of a measured signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// Noise streams of the two directions must be independent; the backward
/// sweep draws from a disjoint stream block.
const BACKWARD_STREAM_BASE: u64 = 1 << 32;

/// Characteristic-function evaluator holding the evolution operator and the
/// initial/final Hamiltonians. Eigendecompositions are cached inside the
/// Hamiltonians, so a u-sweep pays for two factorizations total.
pub struct CharFunction<'a> {
    u_op: &'a UnitaryOperator,
    u_dag: CMat,
    h_i: &'a HermitianOperator,
    h_f: &'a HermitianOperator,
}

impl<'a> CharFunction<'a> {
    pub fn new(
        u_op: &'a UnitaryOperator,
        h_i: &'a HermitianOperator,
        h_f: &'a HermitianOperator,
    ) -> Result<Self> {
        if u_op.dim() != h_i.dim() || u_op.dim() != h_f.dim() {
            return Err(Error::DimensionMismatch {
                left: u_op.dim(),
                right: h_i.dim().max(h_f.dim()),
            });
        }
        // warm the caches up front so parallel sweeps never race on them
        h_i.eigen()?;
        h_f.eigen()?;
        Ok(Self {
            u_op,
            u_dag: dagger(u_op.entries()),
            h_i,
            h_f,
        })
    }

    /// χ_F(u) = tr[U† e^{iuH_f} U e^{−iuH_i} ρ]; `rho` is the initial-state
    /// Gibbs ensemble of the forward process.
    pub fn forward(&self, rho: &DensityMatrix, u: f64) -> Result<C64> {
        if rho.dim() != self.u_op.dim() {
            return Err(Error::DimensionMismatch {
                left: rho.dim(),
                right: self.u_op.dim(),
            });
        }
        let e_f = self.h_f.eigen()?.apply(|x| C64::new(0.0, u * x).exp());
        let e_i = self.h_i.eigen()?.apply(|x| C64::new(0.0, -u * x).exp());
        let sandwich = self.u_dag.dot(&e_f).dot(self.u_op.entries());
        let weighted = e_i.dot(rho.entries());
        Ok(trace_of_product(&sandwich, &weighted))
    }

    /// χ_B(u) = tr[U e^{iuH_i} U† e^{−iuH_f} ρ_f]: the backward process is
    /// generated by U† and starts from the Gibbs state of H_f.
    pub fn backward(&self, rho_f: &DensityMatrix, u: f64) -> Result<C64> {
        if rho_f.dim() != self.u_op.dim() {
            return Err(Error::DimensionMismatch {
                left: rho_f.dim(),
                right: self.u_op.dim(),
            });
        }
        let e_i = self.h_i.eigen()?.apply(|x| C64::new(0.0, u * x).exp());
        let e_f = self.h_f.eigen()?.apply(|x| C64::new(0.0, -u * x).exp());
        let sandwich = self.u_op.entries().dot(&e_i).dot(&self.u_dag);
        let weighted = e_f.dot(rho_f.entries());
        Ok(trace_of_product(&sandwich, &weighted))
    }

    /// Analytic continuation of χ_B to complex argument z, with the Gibbs
    /// factor of H_f merged into the spectral function so the evaluation is
    /// stable on the strip 0 ≤ Im z ≤ β. Used for the characteristic-function
    /// form of the Tasaki-Crooks relation, Z_i χ_F(u) = Z_f χ_B(−u + iβ).
    pub fn backward_continued(&self, beta: f64, z: C64) -> Result<C64> {
        let eig_f = self.h_f.eigen()?;
        let e0 = eig_f.values[0];
        let z_shifted: f64 = eig_f.values.iter().map(|&e| (-beta * (e - e0)).exp()).sum();
        let e_i = self.h_i.eigen()?.apply(|x| (C64::i() * z * x).exp());
        let weighted_f = eig_f.apply(|x| {
            (-C64::i() * z * x).exp() * (-beta * (x - e0)).exp() / z_shifted
        });
        let sandwich = self.u_op.entries().dot(&e_i).dot(&self.u_dag);
        Ok(trace_of_product(&sandwich, &weighted_f))
    }
}

/// One-shot χ_F(u); see [`CharFunction::forward`].
pub fn char_forward(
    u_op: &UnitaryOperator,
    h_i: &HermitianOperator,
    h_f: &HermitianOperator,
    rho: &DensityMatrix,
    u: f64,
) -> Result<C64> {
    CharFunction::new(u_op, h_i, h_f)?.forward(rho, u)
}

/// One-shot χ_B(u); see [`CharFunction::backward`].
pub fn char_backward(
    u_op: &UnitaryOperator,
    h_i: &HermitianOperator,
    h_f: &HermitianOperator,
    rho_f: &DensityMatrix,
    u: f64,
) -> Result<C64> {
    CharFunction::new(u_op, h_i, h_f)?.backward(rho_f, u)
}

/// Decoherence factor L = tr[T↑† T↓ ρ] of the probe qubit.
pub fn decoherence_factor(
    t_down: &UnitaryOperator,
    t_up: &UnitaryOperator,
    rho: &DensityMatrix,
) -> Result<C64> {
    if t_down.dim() != t_up.dim() || t_down.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            left: t_down.dim(),
            right: t_up.dim().max(rho.dim()),
        });
    }
    let overlap = dagger(t_up.entries()).dot(t_down.entries());
    Ok(trace_of_product(&overlap, rho.entries()))
}

/// Full Ramsey sequence on the joint qubit⊗oscillator space: Hadamard,
/// conditional evolution diag(T↓, T↑), Hadamard, trace out the oscillator.
/// The qubit starts in |↓⟩ and the output populations and coherences are
/// (1 ± Re L)/2 and ∓i·Im L/2.
pub fn ramsey_output(
    t_down: &UnitaryOperator,
    t_up: &UnitaryOperator,
    rho: &DensityMatrix,
) -> Result<DensityMatrix> {
    let n = rho.dim();
    if t_down.dim() != n || t_up.dim() != n {
        return Err(Error::DimensionMismatch {
            left: t_down.dim(),
            right: t_up.dim().max(n),
        });
    }

    // conditional evolution, block diagonal in the qubit basis (↓ first)
    let mut cond = CMat::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            cond[[i, j]] = t_down.entries()[[i, j]];
            cond[[n + i, n + j]] = t_up.entries()[[i, j]];
        }
    }

    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut hadamard = CMat::zeros((2, 2));
    hadamard[[0, 0]] = C64::new(inv_sqrt2, 0.0);
    hadamard[[0, 1]] = C64::new(inv_sqrt2, 0.0);
    hadamard[[1, 0]] = C64::new(inv_sqrt2, 0.0);
    hadamard[[1, 1]] = C64::new(-inv_sqrt2, 0.0);
    let h_joint = kron(&hadamard, &crate::linalg::identity(n));

    let mut qubit_down = CMat::zeros((2, 2));
    qubit_down[[0, 0]] = C64::new(1.0, 0.0);
    let rho_joint = kron(&qubit_down, rho.entries());

    let circuit = h_joint.dot(&cond).dot(&h_joint);
    let out = circuit.dot(&rho_joint).dot(&dagger(&circuit));

    let mut qubit = CMat::zeros((2, 2));
    for a in 0..2 {
        for b in 0..2 {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..n {
                s += out[[a * n + k, b * n + k]];
            }
            qubit[[a, b]] = s;
        }
    }
    DensityMatrix::new(qubit)
}

/// ⟨σ_z⟩ and ⟨σ_y⟩ of a qubit state in the (↓, ↑) basis with σ_z|↓⟩ = +|↓⟩.
pub fn qubit_readout(rho_q: &DensityMatrix) -> (f64, f64) {
    let m = rho_q.entries();
    let sz = (m[[0, 0]] - m[[1, 1]]).re;
    // tr[ρ σ_y] with σ_y = [[0, −i], [i, 0]]
    let sy = (C64::i() * m[[0, 1]] - C64::i() * m[[1, 0]]).re;
    (sz, sy)
}

/// A uniformly sampled characteristic-function signal χ(u_k), u_k = k·du,
/// after the decoherence envelope and additive Gaussian readout noise.
#[derive(Debug, Clone)]
pub struct CharSignal {
    pub du: f64,
    pub values: Vec<C64>,
    /// Decoherence time of the envelope exp(−u/τ); may be infinite.
    pub tau: f64,
    /// Std deviation of the additive noise, per quadrature, in units of the
    /// maximal signal (|χ| ≤ 1).
    pub noise_sigma: f64,
    pub seed: u64,
    pub direction: Direction,
}

impl CharSignal {
    /// Validates the noiseless-signal invariants where they apply.
    pub fn new(
        du: f64,
        values: Vec<C64>,
        tau: f64,
        noise_sigma: f64,
        seed: u64,
        direction: Direction,
    ) -> Result<Self> {
        if !(du > 0.0) {
            return Err(Error::InvalidArgument(format!("du must be positive, got {du}")));
        }
        if values.len() < 2 {
            return Err(Error::InvalidArgument(
                "a signal needs at least 2 samples".into(),
            ));
        }
        if noise_sigma == 0.0 {
            if tau.is_infinite() {
                let r = (values[0] - C64::new(1.0, 0.0)).norm();
                if r > 1e-10 {
                    return Err(Error::NumericalFailure {
                        context: "signal normalization χ(0) = 1",
                        residual: r,
                    });
                }
            }
            let over = values
                .iter()
                .map(|v| v.norm())
                .fold(0.0f64, f64::max);
            if over > 1.0 + 1e-10 {
                return Err(Error::NumericalFailure {
                    context: "signal bound |χ| ≤ 1",
                    residual: over - 1.0,
                });
            }
        }
        Ok(Self {
            du,
            values,
            tau,
            noise_sigma,
            seed,
            direction,
        })
    }

    pub fn samples(&self) -> usize {
        self.values.len()
    }
}

/// The operators of one sweep direction. For the backward sweep pass the
/// backward evolution (propagated reversed protocol or U†), with
/// `h_initial` the Hamiltonian the process starts from (H(λ_f)) and `state`
/// its Gibbs ensemble.
pub struct RamseySweep<'a> {
    pub direction: Direction,
    pub evolution: &'a UnitaryOperator,
    pub h_initial: &'a HermitianOperator,
    pub h_final: &'a HermitianOperator,
    pub state: &'a DensityMatrix,
}

/// Exact χ(u_k) on the sample grid, no envelope, no noise. Samples are
/// independent and evaluated in parallel.
pub fn sweep_char_values(sweep: &RamseySweep, du: f64, samples: usize) -> Result<Vec<C64>> {
    let eval = CharFunction::new(sweep.evolution, sweep.h_initial, sweep.h_final)?;
    (0..samples)
        .into_par_iter()
        .map(|k| eval.forward(sweep.state, k as f64 * du))
        .collect()
}

/// Applies the measurement-imperfection model to exact signal values:
/// values[k]·exp(−u_k/τ) + (ξ_k + iζ_k), with ξ, ζ ~ N(0, σ²) drawn from a
/// per-sample RNG stream so the result is independent of evaluation order.
pub fn apply_measurement_model(
    values: Vec<C64>,
    du: f64,
    tau: f64,
    noise_sigma: f64,
    seed: u64,
    direction: Direction,
) -> Result<CharSignal> {
    let stream_base = match direction {
        Direction::Forward => 0,
        Direction::Backward => BACKWARD_STREAM_BASE,
    };
    let noisy: Vec<C64> = values
        .into_iter()
        .enumerate()
        .map(|(k, chi)| {
            let envelope = (-(k as f64) * du / tau).exp();
            let mut v = chi * envelope;
            if noise_sigma > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream_base + k as u64);
                let xi: f64 = StandardNormal.sample(&mut rng);
                let zeta: f64 = StandardNormal.sample(&mut rng);
                v += C64::new(noise_sigma * xi, noise_sigma * zeta);
            }
            v
        })
        .collect();
    CharSignal::new(du, noisy, tau, noise_sigma, seed, direction)
}

/// Full measured signal for one sweep direction: exact χ on the grid, then
/// envelope and noise.
pub fn measured_signal(
    sweep: &RamseySweep,
    du: f64,
    samples: usize,
    tau: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<CharSignal> {
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "a sweep needs at least 2 samples".into(),
        ));
    }
    let values = sweep_char_values(sweep, du, samples)?;
    apply_measurement_model(values, du, tau, noise_sigma, seed, sweep.direction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::build_hamiltonian;
    use crate::linalg::max_abs_diff;
    use approx::assert_abs_diff_eq;

    // relaxed tail budget: these are algebraic-identity tests at small dims
    fn test_gibbs(h: &HermitianOperator, beta: f64) -> DensityMatrix {
        let tol = crate::fock::Tolerances {
            thermal_tail: 1.0,
            ..Default::default()
        };
        crate::fock::gibbs_state_with(h, beta, &tol).unwrap()
    }

    fn null_setup(dim: usize) -> (UnitaryOperator, HermitianOperator, HermitianOperator, DensityMatrix) {
        let h_i = build_hamiltonian(1.0, 0.0, 0.0, dim).unwrap();
        let h_f = build_hamiltonian(1.0, 0.0, 0.0, dim).unwrap();
        let rho = test_gibbs(&h_i, 0.8);
        let u = crate::fock::hermitian_function(&h_i, |x| C64::new(0.0, -1.7 * x).exp()).unwrap();
        (UnitaryOperator::new(u).unwrap(), h_i, h_f, rho)
    }

    #[test]
    fn char_at_zero_is_one() {
        let (u, h_i, h_f, rho) = null_setup(20);
        let chi = char_forward(&u, &h_i, &h_f, &rho, 0.0).unwrap();
        assert!((chi - C64::new(1.0, 0.0)).norm() < 1e-12);
        let chib = char_backward(&u, &h_i, &h_f, &rho, 0.0).unwrap();
        assert!((chib - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn null_quench_char_stays_one() {
        let (u, h_i, h_f, rho) = null_setup(20);
        for &t in &[0.3, 1.1, 4.7, 20.0] {
            let chi = char_forward(&u, &h_i, &h_f, &rho, t).unwrap();
            assert!((chi - C64::new(1.0, 0.0)).norm() < 1e-11, "u={t}: {chi}");
        }
    }

    #[test]
    fn decoherence_factor_unity_for_equal_branches() {
        let (u, _, _, rho) = null_setup(16);
        let l = decoherence_factor(&u, &u, &rho).unwrap();
        assert!((l - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ramsey_returns_down_state_for_equal_branches() {
        let (u, _, _, rho) = null_setup(12);
        let q = ramsey_output(&u, &u, &rho).unwrap();
        assert_abs_diff_eq!(q.entries()[[0, 0]].re, 1.0, epsilon = 1e-12);
        assert!(q.entries()[[0, 1]].norm() < 1e-12);
        let (sz, sy) = qubit_readout(&q);
        assert_abs_diff_eq!(sz, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sy, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn vanishing_overlap_gives_maximally_mixed_qubit() {
        // T↓ = 1, T↑ = swap on two Fock levels: L = ⟨0|T↑†|0⟩ = 0
        let dim = 2;
        let t_down = UnitaryOperator::identity(dim);
        let mut sw = CMat::zeros((dim, dim));
        sw[[0, 1]] = C64::new(1.0, 0.0);
        sw[[1, 0]] = C64::new(1.0, 0.0);
        let t_up = UnitaryOperator::new(sw).unwrap();
        let rho = DensityMatrix::fock_projector(dim, 0).unwrap();

        let l = decoherence_factor(&t_down, &t_up, &rho).unwrap();
        assert!(l.norm() < 1e-14);
        let q = ramsey_output(&t_down, &t_up, &rho).unwrap();
        let half = C64::new(0.5, 0.0);
        assert!((q.entries()[[0, 0]] - half).norm() < 1e-12);
        assert!((q.entries()[[1, 1]] - half).norm() < 1e-12);
        assert!(q.entries()[[0, 1]].norm() < 1e-12);
    }

    #[test]
    fn measured_signal_matches_pure_envelope_for_null_quench() {
        let (u, h_i, h_f, rho) = null_setup(16);
        let sweep = RamseySweep {
            direction: Direction::Forward,
            evolution: &u,
            h_initial: &h_i,
            h_final: &h_f,
            state: &rho,
        };
        let tau = 100.0;
        let sig = measured_signal(&sweep, 0.5, 64, tau, 0.0, 7).unwrap();
        for (k, v) in sig.values.iter().enumerate() {
            let expect = (-(k as f64) * 0.5 / tau).exp();
            assert!((v - C64::new(expect, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn measured_signal_deterministic_across_runs() {
        let (u, h_i, h_f, rho) = null_setup(12);
        let sweep = RamseySweep {
            direction: Direction::Forward,
            evolution: &u,
            h_initial: &h_i,
            h_final: &h_f,
            state: &rho,
        };
        let a = measured_signal(&sweep, 0.7, 40, 30.0, 0.01, 99).unwrap();
        let b = measured_signal(&sweep, 0.7, 40, 30.0, 0.01, 99).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn forward_and_backward_noise_streams_independent() {
        let vals = vec![C64::new(1.0, 0.0); 16];
        let f = apply_measurement_model(vals.clone(), 1.0, f64::INFINITY, 0.01, 3, Direction::Forward).unwrap();
        let b = apply_measurement_model(vals, 1.0, f64::INFINITY, 0.01, 3, Direction::Backward).unwrap();
        assert_ne!(f.values, b.values);
    }

    #[test]
    fn signal_invariants_enforced() {
        let bad = vec![C64::new(0.9, 0.0), C64::new(1.3, 0.0)];
        assert!(CharSignal::new(1.0, bad, f64::INFINITY, 0.0, 0, Direction::Forward).is_err());
    }

    #[test]
    fn backward_continued_at_real_argument_matches_backward() {
        let dim = 24;
        let h_i = build_hamiltonian(1.0, 0.0, 0.0, dim).unwrap();
        let h_f = build_hamiltonian(1.0, 0.165, 0.25, dim).unwrap();
        let beta = 0.9;
        let rho_f = test_gibbs(&h_f, beta);
        let u = crate::fock::hermitian_function(&h_f, |x| C64::new(0.0, -0.8 * x).exp()).unwrap();
        let u = UnitaryOperator::new(u).unwrap();
        let eval = CharFunction::new(&u, &h_i, &h_f).unwrap();
        for &t in &[0.0, 0.9, 2.3] {
            let direct = eval.backward(&rho_f, t).unwrap();
            let continued = eval.backward_continued(beta, C64::new(t, 0.0)).unwrap();
            assert!((direct - continued).norm() < 1e-11);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (u, h_i, _, rho) = null_setup(8);
        let h_big = build_hamiltonian(1.0, 0.0, 0.0, 10).unwrap();
        assert!(matches!(
            char_forward(&u, &h_i, &h_big, &rho, 0.5),
            Err(Error::DimensionMismatch { .. })
        ));
        let rho_small = {
            let h = build_hamiltonian(1.0, 0.0, 0.0, 6).unwrap();
            test_gibbs(&h, 1.0)
        };
        let td = UnitaryOperator::identity(8);
        assert!(decoherence_factor(&td, &u, &rho_small).is_err());
        let _ = max_abs_diff(u.entries(), u.entries());
    }
}
