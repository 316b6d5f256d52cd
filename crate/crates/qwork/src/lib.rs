//! Quantum work statistics of a driven harmonic oscillator, extracted the
//! way a trapped-ion experiment would: Ramsey interferometry of a probe
//! qubit whose coherence traces out the characteristic function of the work
//! distribution.
//!
//! The pipeline runs from a declarative quench protocol λ(t) through
//! time-ordered evolution, conditional Ramsey branches, sampled and
//! noise-corrupted characteristic signals, Fourier inversion to the work
//! distributions P_F(W) and P_B(W), spectral peak extraction, and finally a
//! Tasaki-Crooks fit P_F(W)/P_B(−W) = exp(β(W − ΔF)) recovering the inverse
//! temperature and free energy difference, with a Jarzynski cross-check.
//! Every step has an independent brute-force oracle in the test suites.
//!
//! Internal units: ħ = 1, ω₀ = 1, time in 1/ω₀.

pub mod error;
pub mod linalg;

pub mod fluctuation;
pub mod fock;
pub mod iontrap;
pub mod propagator;
pub mod ramsey;
pub mod schedule;
pub mod spectrum;

pub use error::{Error, Result};
pub use fluctuation::{crooks_points, exact_delta_f, fit_crooks, jarzynski_check, CrooksFit};
pub use fock::{
    beta_from_nbar, build_hamiltonian, gibbs_state, hermitian_function, ladder_operators,
    DensityMatrix, HermitianOperator, Tolerances, UnitaryOperator,
};
pub use iontrap::{build_ion_protocol, lamb_dicke_coefficients, IonParams};
pub use propagator::{conditional_pair, default_step_count, propagate};
pub use ramsey::{
    char_backward, char_forward, decoherence_factor, measured_signal, ramsey_output, CharSignal,
    Direction,
};
pub use schedule::{QuenchSchedule, Segment};
pub use spectrum::{brute_force_lines, extract_peaks, invert_to_distribution, PeakSet, WorkSpectrum};
