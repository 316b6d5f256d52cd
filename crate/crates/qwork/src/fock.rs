//! Operators and states on the truncated oscillator Hilbert space.
//!
//! Internal units set ħ = 1 and measure energies in angular frequency; the
//! natural choice downstream is ω₀ = 1 with time in 1/ω₀. A truncation to
//! `dim` Fock levels keeps `n_pad` guard levels at the top: thermal states
//! and evolved states must stay out of the guard band or construction fails
//! with a truncation error.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{
    self, dagger, eigen_hermitian, hermiticity_residual, unitarity_residual, CMat, EigenH,
};

/// Numerical tolerances and truncation budget. All checks in the crate that
/// are not fixed type invariants read from here.
#[derive(Debug, Clone)]
pub struct Tolerances {
    /// Max-norm bound for U†U − 1 on the physical block.
    pub unitarity: f64,
    /// Thermal population allowed above the guard boundary.
    pub thermal_tail: f64,
    /// Population allowed in the guard band for evolved states.
    pub edge_population: f64,
    /// Guard levels at the top of the truncated space.
    pub n_pad: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unitarity: 1e-10,
            thermal_tail: 1e-10,
            edge_population: 1e-8,
            n_pad: 8,
        }
    }
}

const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// Dense Hermitian operator on the truncated Fock space.
///
/// The eigendecomposition is computed on first use and cached; instances are
/// immutable, so the cache is safe to share across threads.
#[derive(Debug)]
pub struct HermitianOperator {
    dim: usize,
    entries: CMat,
    eigen: OnceLock<EigenH>,
}

impl Clone for HermitianOperator {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.clone(),
            eigen: OnceLock::new(),
        }
    }
}

impl HermitianOperator {
    /// Checks squareness, dim ≥ 2, and Hermiticity to 1e-12 (absolute).
    pub fn new(entries: CMat) -> Result<Self> {
        let dim = entries.nrows();
        if dim < 2 {
            return Err(Error::InvalidDimension { dim, min: 2 });
        }
        if entries.ncols() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: entries.ncols(),
            });
        }
        let res = hermiticity_residual(&entries);
        if res > HERMITICITY_TOL {
            return Err(Error::NumericalFailure {
                context: "hermiticity check",
                residual: res,
            });
        }
        Ok(Self {
            dim,
            entries,
            eigen: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    /// Cached eigendecomposition, ascending eigenvalues.
    pub fn eigen(&self) -> Result<&EigenH> {
        if let Some(e) = self.eigen.get() {
            return Ok(e);
        }
        let computed = eigen_hermitian(&self.entries)?;
        Ok(self.eigen.get_or_init(|| computed))
    }
}

/// Unitary operator, unitarity checked on the retained (physical) subspace.
#[derive(Debug, Clone)]
pub struct UnitaryOperator {
    dim: usize,
    entries: CMat,
}

impl UnitaryOperator {
    /// Full-space unitarity check at the default tolerance.
    pub fn new(entries: CMat) -> Result<Self> {
        let dim = entries.nrows();
        Self::checked(entries, dim, Tolerances::default().unitarity)
    }

    /// Unitarity checked on the leading `n_phys` levels only; near the
    /// truncation edge the full-space residual is not meaningful.
    pub fn checked(entries: CMat, n_phys: usize, tol: f64) -> Result<Self> {
        let dim = entries.nrows();
        if entries.ncols() != dim || dim == 0 {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: entries.ncols(),
            });
        }
        let residual = unitarity_residual(&entries, n_phys);
        if residual > tol {
            return Err(Error::NumericalFailure {
                context: "unitarity check",
                residual,
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            entries: linalg::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn dagger(&self) -> Self {
        Self {
            dim: self.dim,
            entries: dagger(&self.entries),
        }
    }
}

/// Density matrix: Hermitian, unit trace, positive semi-definite within
/// tolerance.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    dim: usize,
    entries: CMat,
}

impl DensityMatrix {
    pub fn new(entries: CMat) -> Result<Self> {
        let dim = entries.nrows();
        if entries.ncols() != dim || dim == 0 {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: entries.ncols(),
            });
        }
        let herm = hermiticity_residual(&entries);
        if herm > HERMITICITY_TOL {
            return Err(Error::NumericalFailure {
                context: "density hermiticity",
                residual: herm,
            });
        }
        let tr = linalg::trace(&entries);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::NumericalFailure {
                context: "density trace",
                residual: (tr - C64::new(1.0, 0.0)).norm(),
            });
        }
        let eig = eigen_hermitian(&entries)?;
        let min_ev = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_ev < -PSD_TOL {
            return Err(Error::NumericalFailure {
                context: "density positivity",
                residual: -min_ev,
            });
        }
        Ok(Self { dim, entries })
    }

    /// Projector |n⟩⟨n| on a Fock level.
    pub fn fock_projector(dim: usize, n: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidDimension { dim, min: n + 1 });
        }
        let mut entries = CMat::zeros((dim, dim));
        entries[[n, n]] = C64::new(1.0, 0.0);
        Ok(Self { dim, entries })
    }

    pub(crate) fn from_parts_unchecked(entries: CMat) -> Self {
        let dim = entries.nrows();
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    /// ⟨A⟩ = tr[ρA].
    pub fn expectation(&self, op: &CMat) -> C64 {
        linalg::trace_of_product(&self.entries, op)
    }

    /// Population in the top `n_pad` Fock levels.
    pub fn edge_population(&self, n_pad: usize) -> f64 {
        let lo = self.dim.saturating_sub(n_pad);
        (lo..self.dim).map(|j| self.entries[[j, j]].re).sum()
    }

    /// Population of the evolved state UρU† in the top `n_pad` Fock levels,
    /// computed without forming the full product.
    pub fn evolved_edge_population(&self, u: &UnitaryOperator, n_pad: usize) -> f64 {
        let n = self.dim;
        let j0 = n.saturating_sub(n_pad);
        let urho = u.entries().dot(&self.entries);
        let mut pop = 0.0;
        for j in j0..n {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..n {
                s += urho[[j, k]] * u.entries()[[j, k]].conj();
            }
            pop += s.re;
        }
        pop
    }
}

/// Lowering and raising operators on `dim` Fock levels:
/// lower[n−1][n] = √n, raise = lower†.
pub fn ladder_operators(dim: usize) -> Result<(CMat, CMat)> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, min: 2 });
    }
    let mut lower = CMat::zeros((dim, dim));
    for n in 1..dim {
        lower[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    let raise = dagger(&lower);
    Ok((lower, raise))
}

/// Diagonal and off-diagonal of H = ω(â†â + 1/2) + λ(â + â†) + ε1, which is
/// real symmetric tridiagonal in the Fock basis. Shared by
/// [`build_hamiltonian`] and the propagator so both use identical matrix
/// elements.
pub fn hamiltonian_tridiag(omega: f64, lambda: f64, epsilon: f64, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let diag: Vec<f64> = (0..dim).map(|n| omega * (n as f64 + 0.5) + epsilon).collect();
    let offdiag: Vec<f64> = (1..dim).map(|n| lambda * (n as f64).sqrt()).collect();
    (diag, offdiag)
}

/// H(λ) = ω(â†â + 1/2) + λ(â + â†) + ε1 on `dim` Fock levels.
///
/// λ carries the x₀ factor of the displacement perturbation; see the iontrap
/// module for the mapping from laser parameters.
pub fn build_hamiltonian(omega: f64, lambda: f64, epsilon: f64, dim: usize) -> Result<HermitianOperator> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, min: 2 });
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "oscillator frequency must be positive, got {omega}"
        )));
    }
    let (diag, offdiag) = hamiltonian_tridiag(omega, lambda, epsilon, dim);
    let mut m = CMat::zeros((dim, dim));
    for n in 0..dim {
        m[[n, n]] = C64::new(diag[n], 0.0);
        if n + 1 < dim {
            m[[n, n + 1]] = C64::new(offdiag[n], 0.0);
            m[[n + 1, n]] = C64::new(offdiag[n], 0.0);
        }
    }
    HermitianOperator::new(m)
}

/// Q f(Λ) Q† for Hermitian H = Q Λ Q†. `f` may be complex-valued, e.g.
/// x ↦ exp(iux) for evolution phases or x ↦ exp(−βx) for Gibbs weights.
pub fn hermitian_function(h: &HermitianOperator, f: impl Fn(f64) -> C64) -> Result<CMat> {
    Ok(h.eigen()?.apply(f))
}

/// Fock-level populations of exp(−βH)/Z without building the full state.
/// Returns (populations, ln Z).
fn gibbs_populations(h: &HermitianOperator, beta: f64) -> Result<(Vec<f64>, f64)> {
    let eig = h.eigen()?;
    let e0 = eig.values[0];
    let weights: Vec<f64> = eig.values.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z_shifted: f64 = weights.iter().sum();
    let ln_z = -beta * e0 + z_shifted.ln();
    let n = h.dim();
    let mut pops = vec![0.0f64; n];
    for (j, pop) in pops.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in 0..n {
            s += eig.vectors[[j, k]].norm_sqr() * weights[k];
        }
        *pop = s / z_shifted;
    }
    Ok((pops, ln_z))
}

/// Thermal population above the guard boundary; the truncation health check
/// behind [`gibbs_state`] and the free-energy routines.
pub fn thermal_tail(h: &HermitianOperator, beta: f64, n_pad: usize) -> Result<f64> {
    let (pops, _) = gibbs_populations(h, beta)?;
    let lo = h.dim().saturating_sub(n_pad);
    Ok(pops[lo..].iter().sum())
}

/// ln Z_β(H) = ln tr exp(−βH), evaluated stably from the spectrum.
pub fn ln_partition(h: &HermitianOperator, beta: f64) -> Result<f64> {
    let (_, ln_z) = gibbs_populations(h, beta)?;
    Ok(ln_z)
}

/// Gibbs state exp(−βH)/Z with the default truncation budget.
pub fn gibbs_state(h: &HermitianOperator, beta: f64) -> Result<DensityMatrix> {
    gibbs_state_with(h, beta, &Tolerances::default())
}

/// Gibbs state exp(−βH)/Z. Fails with a truncation error if the thermal tail
/// above the guard boundary exceeds the budget.
pub fn gibbs_state_with(h: &HermitianOperator, beta: f64, tol: &Tolerances) -> Result<DensityMatrix> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "inverse temperature must be positive, got {beta}"
        )));
    }
    let (pops, _) = gibbs_populations(h, beta)?;
    let lo = h.dim().saturating_sub(tol.n_pad);
    let tail: f64 = pops[lo..].iter().sum();
    if tail > tol.thermal_tail {
        return Err(Error::TruncationTooSmall {
            population: tail,
            level: lo,
        });
    }

    let eig = h.eigen()?;
    let e0 = eig.values[0];
    let mut m = eig.apply(|x| C64::new((-beta * (x - e0)).exp(), 0.0));
    let tr = linalg::trace(&m).re;
    m.mapv_inplace(|z| z / tr);
    Ok(DensityMatrix::from_parts_unchecked(m))
}

/// β corresponding to a mean thermal phonon number n̄ of an ω-oscillator:
/// n̄ = [exp(βω) − 1]^{−1}.
pub fn beta_from_nbar(nbar: f64, omega: f64) -> Result<f64> {
    if !(nbar > 0.0) || !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "nbar and omega must be positive, got nbar={nbar}, omega={omega}"
        )));
    }
    Ok((1.0 + 1.0 / nbar).ln() / omega)
}
