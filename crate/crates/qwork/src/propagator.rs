//! Time-ordered evolution under H(λ(t)) and the conditional Ramsey evolutions.
//!
//! The propagator is the midpoint exponential product
//!
//! U = Π_k exp(−i H(λ(t_k + dt/2)) dt),   dt = t_Q/steps,
//!
//! later times leftmost; second-order accurate in dt. Every factor is the
//! exact exponential of a Fock-basis Hamiltonian, which is real symmetric
//! tridiagonal, so each step runs through the dedicated QL solver instead of
//! a dense complex eigendecomposition.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{
    build_hamiltonian, hamiltonian_tridiag, hermitian_function, Tolerances, UnitaryOperator,
};
use crate::linalg::{sym_tridiag_eigen, unitarity_residual, CMat};
use crate::schedule::QuenchSchedule;

/// Spot-check cadence for unitarity during the product accumulation.
const CHECK_EVERY: usize = 64;

/// Default step count: dt ≤ min(T_min/10, 0.01·2π/ω), resolving the fastest
/// tanh feature of the schedule.
pub fn default_step_count(schedule: &QuenchSchedule, omega: f64) -> usize {
    let mut dt_max = 0.01 * std::f64::consts::TAU / omega;
    if let Some(t_min) = schedule.min_switching_time() {
        dt_max = dt_max.min(t_min / 10.0);
    }
    ((schedule.total_time() / dt_max).ceil() as usize).max(1)
}

/// Accumulated product state, kept as separate real and imaginary planes so
/// the per-step basis changes run as real matrix products.
struct SplitUnitary {
    re: Array2<f64>,
    im: Array2<f64>,
}

impl SplitUnitary {
    fn identity(dim: usize) -> Self {
        Self {
            re: Array2::eye(dim),
            im: Array2::zeros((dim, dim)),
        }
    }

    /// U ← Q diag(exp(−i e_k dt)) Qᵀ U, with Q given as rows of `qt`.
    fn apply_step(&mut self, qt: &Array2<f64>, energies: &[f64], dt: f64) {
        let mut vr = qt.dot(&self.re);
        let mut vi = qt.dot(&self.im);
        for (k, &e) in energies.iter().enumerate() {
            let (sn, cs) = (e * dt).sin_cos();
            let mut row_r = vr.row_mut(k);
            let mut row_i = vi.row_mut(k);
            for j in 0..row_r.len() {
                let a = row_r[j];
                let b = row_i[j];
                // e^{−iθ}(a + ib) = (cs·a + sn·b) + i(cs·b − sn·a)
                row_r[j] = cs * a + sn * b;
                row_i[j] = cs * b - sn * a;
            }
        }
        self.re = qt.t().dot(&vr);
        self.im = qt.t().dot(&vi);
    }

    fn to_complex(&self) -> CMat {
        let dim = self.re.nrows();
        CMat::from_shape_fn((dim, dim), |(i, j)| C64::new(self.re[[i, j]], self.im[[i, j]]))
    }
}

/// U(t_Q) for the quench `schedule` (the coupling λ(t)) at fixed oscillator
/// frequency `omega`, with default tolerances.
///
/// `epsilon_schedule`, when given, adds the c-number term ε(t)·1. It is kept
/// rather than discarded: it shifts the measured work values and ΔF.
pub fn propagate(
    schedule: &QuenchSchedule,
    omega: f64,
    epsilon_schedule: Option<&QuenchSchedule>,
    dim: usize,
    steps: usize,
) -> Result<UnitaryOperator> {
    propagate_with(schedule, omega, epsilon_schedule, dim, steps, &Tolerances::default())
}

pub fn propagate_with(
    schedule: &QuenchSchedule,
    omega: f64,
    epsilon_schedule: Option<&QuenchSchedule>,
    dim: usize,
    steps: usize,
    tol: &Tolerances,
) -> Result<UnitaryOperator> {
    if steps < 1 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, min: 2 });
    }
    if let Some(eps) = epsilon_schedule {
        if (eps.total_time() - schedule.total_time()).abs() > 1e-12 * schedule.total_time().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon schedule duration {} does not match quench duration {}",
                eps.total_time(),
                schedule.total_time()
            )));
        }
    }

    let t_q = schedule.total_time();
    let dt = t_q / steps as f64;
    let mut u = SplitUnitary::identity(dim);

    for k in 0..steps {
        let t_mid = (k as f64 + 0.5) * dt;
        // guard the last midpoint against rounding past t_Q
        let t_mid = t_mid.min(t_q);
        let lambda = schedule.eval(t_mid)?;
        let epsilon = match epsilon_schedule {
            Some(eps) => eps.eval(t_mid)?,
            None => 0.0,
        };
        let (diag, offdiag) = hamiltonian_tridiag(omega, lambda, epsilon, dim);
        let tri = sym_tridiag_eigen(&diag, &offdiag)?;
        u.apply_step(&tri.row_vectors, &tri.values, dt);

        if (k + 1) % CHECK_EVERY == 0 {
            let residual = unitarity_residual(&u.to_complex(), dim);
            if residual > tol.unitarity {
                return Err(Error::NumericalFailure {
                    context: "propagator unitarity",
                    residual,
                });
            }
        }
    }

    let entries = u.to_complex();
    let residual = unitarity_residual(&entries, dim);
    if residual > tol.unitarity {
        return Err(Error::NumericalFailure {
            context: "propagator unitarity",
            residual,
        });
    }
    Ok(UnitaryOperator::checked(entries, dim, tol.unitarity)?)
}

/// The conditional evolutions of the staggered Ramsey protocol at
/// u = t_R − t_Q:
///
/// T↑ = exp(−iu H(λ_f)) U(t_Q),   T↓ = U(t_Q) exp(−iu H(λ_i)).
///
/// Returned as (T↓, T↑).
pub fn conditional_pair(
    schedule: &QuenchSchedule,
    u_time: f64,
    omega: f64,
    epsilon_schedule: Option<&QuenchSchedule>,
    dim: usize,
    steps: usize,
) -> Result<(UnitaryOperator, UnitaryOperator)> {
    if u_time < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "Ramsey delay u must be nonnegative, got {u_time}"
        )));
    }
    let u_q = propagate(schedule, omega, epsilon_schedule, dim, steps)?;
    conditional_pair_from(&u_q, schedule, u_time, omega, epsilon_schedule, dim)
}

/// As [`conditional_pair`] but reusing an already computed U(t_Q); the
/// u-sweep shares one propagation.
pub fn conditional_pair_from(
    u_q: &UnitaryOperator,
    schedule: &QuenchSchedule,
    u_time: f64,
    omega: f64,
    epsilon_schedule: Option<&QuenchSchedule>,
    dim: usize,
) -> Result<(UnitaryOperator, UnitaryOperator)> {
    let t_q = schedule.total_time();
    let eps_at = |t: f64| -> Result<f64> {
        match epsilon_schedule {
            Some(eps) => eps.eval(t),
            None => Ok(0.0),
        }
    };
    let h_i = build_hamiltonian(omega, schedule.eval(0.0)?, eps_at(0.0)?, dim)?;
    let h_f = build_hamiltonian(omega, schedule.eval(t_q)?, eps_at(t_q)?, dim)?;

    let phase_i = hermitian_function(&h_i, |x| C64::new(0.0, -u_time * x).exp())?;
    let phase_f = hermitian_function(&h_f, |x| C64::new(0.0, -u_time * x).exp())?;

    let t_down = u_q.entries().dot(&phase_i);
    let t_up = phase_f.dot(u_q.entries());
    let tol = Tolerances::default();
    Ok((
        UnitaryOperator::checked(t_down, dim, tol.unitarity)?,
        UnitaryOperator::checked(t_up, dim, tol.unitarity)?,
    ))
}
