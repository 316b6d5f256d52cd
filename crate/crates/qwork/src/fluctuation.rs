//! Tasaki-Crooks assembly: peak-ratio points, the exponential fit recovering
//! β̂ and ΔF̂, the Jarzynski check, and exact ΔF from partition functions.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    gibbs_state_with, hermitian_function, ln_partition, thermal_tail, DensityMatrix,
    HermitianOperator, Tolerances, UnitaryOperator,
};
use crate::linalg::trace_of_product;
use crate::spectrum::PeakSet;

/// ΔF = (1/β)·ln[Z_β(H_i)/Z_β(H_f)] from the truncated spectra.
pub fn exact_delta_f(h_i: &HermitianOperator, h_f: &HermitianOperator, beta: f64) -> Result<f64> {
    exact_delta_f_with(h_i, h_f, beta, &Tolerances::default())
}

pub fn exact_delta_f_with(
    h_i: &HermitianOperator,
    h_f: &HermitianOperator,
    beta: f64,
    tol: &Tolerances,
) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "inverse temperature must be positive, got {beta}"
        )));
    }
    for h in [h_i, h_f] {
        let tail = thermal_tail(h, beta, tol.n_pad)?;
        if tail > tol.thermal_tail {
            return Err(Error::TruncationTooSmall {
                population: tail,
                level: h.dim().saturating_sub(tol.n_pad),
            });
        }
    }
    Ok((ln_partition(h_i, beta)? - ln_partition(h_f, beta)?) / beta)
}

/// Matched forward/backward peak-ratio points and the number of peaks that
/// found no partner.
#[derive(Debug, Clone)]
pub struct CrooksPoints {
    /// (W, amplitude_F(W)/amplitude_B(−W)) per matched line order.
    pub points: Vec<(f64, f64)>,
    /// Unmatched peaks dropped from both sets.
    pub dropped: usize,
}

/// Matches forward peaks at W with backward peaks at −W by line order; peak
/// positions must agree within twice the coarser grid spacing.
pub fn crooks_points(fwd: &PeakSet, bwd: &PeakSet) -> Result<CrooksPoints> {
    if fwd.peaks.is_empty() || bwd.peaks.is_empty() {
        return Err(Error::NoPeakOverlap);
    }
    let w_tol = 2.0 * fwd.grid_spacing.max(bwd.grid_spacing);
    let mut points = Vec::new();
    let mut matched_bwd = vec![false; bwd.peaks.len()];
    let mut dropped = 0usize;
    for f in &fwd.peaks {
        let partner = bwd
            .peaks
            .iter()
            .enumerate()
            .find(|(_, b)| b.order == f.order && (f.w + b.w).abs() <= w_tol);
        match partner {
            Some((bi, b)) => {
                matched_bwd[bi] = true;
                points.push((f.w, f.amplitude / b.amplitude));
            }
            None => dropped += 1,
        }
    }
    dropped += matched_bwd.iter().filter(|m| !**m).count();
    if points.is_empty() {
        return Err(Error::NoPeakOverlap);
    }
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(CrooksPoints { points, dropped })
}

/// One point entering the Crooks fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitPoint {
    pub w: f64,
    pub ratio: f64,
    pub log_ratio: f64,
}

/// Least-squares fit of ln[P_F(W)/P_B(−W)] = A·W − B.
///
/// A estimates the inverse temperature β and B/A the free energy difference
/// ΔF. Rescaling all amplitudes of one spectrum by a common factor moves only
/// B, never A.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrooksFit {
    pub points: Vec<FitPoint>,
    pub a: f64,
    pub b: f64,
    pub beta_hat: f64,
    pub delta_f_hat: f64,
    /// RMS of the log-space fit residuals.
    pub residual: f64,
}

/// Unweighted least squares through (W, ln ratio).
pub fn fit_crooks(points: &[(f64, f64)]) -> Result<CrooksFit> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least 2 ratio points, got {}",
            points.len()
        )));
    }
    for &(w, ratio) in points {
        if !(ratio > 0.0) {
            return Err(Error::NonpositiveRatio { w, ratio });
        }
    }
    let n = points.len() as f64;
    let fit_points: Vec<FitPoint> = points
        .iter()
        .map(|&(w, ratio)| FitPoint {
            w,
            ratio,
            log_ratio: ratio.ln(),
        })
        .collect();
    let w_mean = fit_points.iter().map(|p| p.w).sum::<f64>() / n;
    let y_mean = fit_points.iter().map(|p| p.log_ratio).sum::<f64>() / n;
    let sww: f64 = fit_points.iter().map(|p| (p.w - w_mean).powi(2)).sum();
    let swy: f64 = fit_points
        .iter()
        .map(|p| (p.w - w_mean) * (p.log_ratio - y_mean))
        .sum();
    if sww < 1e-300 {
        return Err(Error::DegenerateFit(
            "all ratio points share one W value".into(),
        ));
    }
    let a = swy / sww;
    let b = a * w_mean - y_mean;
    let residual = (fit_points
        .iter()
        .map(|p| (p.log_ratio - (a * p.w - b)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::DegenerateFit("non-finite fit parameters".into()));
    }
    Ok(CrooksFit {
        points: fit_points,
        a,
        b,
        beta_hat: a,
        delta_f_hat: b / a,
        residual,
    })
}

/// Jarzynski equality ⟨e^{−βW}⟩ = e^{−βΔF} as the u → iβ continuation of the
/// characteristic function. Returns (lhs, rhs) with
///
/// lhs = tr[U† e^{−βH_f} U e^{βH_i} ρ],   rhs = exp(−β·ΔF_exact).
///
/// The e^{+βH_i} factor amplifies truncation-edge states, so the thermal tail
/// budget here is a hundred times stricter than for state preparation.
pub fn jarzynski_check(
    u_op: &UnitaryOperator,
    h_i: &HermitianOperator,
    h_f: &HermitianOperator,
    rho: &DensityMatrix,
    beta: f64,
) -> Result<(f64, f64)> {
    jarzynski_check_with(u_op, h_i, h_f, rho, beta, &Tolerances::default())
}

pub fn jarzynski_check_with(
    u_op: &UnitaryOperator,
    h_i: &HermitianOperator,
    h_f: &HermitianOperator,
    rho: &DensityMatrix,
    beta: f64,
    tol: &Tolerances,
) -> Result<(f64, f64)> {
    let n = u_op.dim();
    if h_i.dim() != n || h_f.dim() != n || rho.dim() != n {
        return Err(Error::DimensionMismatch {
            left: n,
            right: h_i.dim().max(h_f.dim()).max(rho.dim()),
        });
    }
    let strict = Tolerances {
        thermal_tail: tol.thermal_tail * 1e-2,
        ..tol.clone()
    };
    for h in [h_i, h_f] {
        let tail = thermal_tail(h, beta, strict.n_pad)?;
        if tail > strict.thermal_tail {
            return Err(Error::TruncationTooSmall {
                population: tail,
                level: h.dim().saturating_sub(strict.n_pad),
            });
        }
    }

    let decay_f = hermitian_function(h_f, |x| C64::new((-beta * x).exp(), 0.0))?;
    let grow_i = hermitian_function(h_i, |x| C64::new((beta * x).exp(), 0.0))?;
    let sandwich = crate::linalg::dagger(u_op.entries())
        .dot(&decay_f)
        .dot(u_op.entries());
    let weighted = grow_i.dot(rho.entries());
    let lhs = trace_of_product(&sandwich, &weighted).re;

    let delta_f = exact_delta_f_with(h_i, h_f, beta, tol)?;
    let rhs = (-beta * delta_f).exp();
    Ok((lhs, rhs))
}

/// Convenience: Gibbs states of both endpoint Hamiltonians.
pub fn endpoint_gibbs(
    h_i: &HermitianOperator,
    h_f: &HermitianOperator,
    beta: f64,
    tol: &Tolerances,
) -> Result<(DensityMatrix, DensityMatrix)> {
    Ok((
        gibbs_state_with(h_i, beta, tol)?,
        gibbs_state_with(h_f, beta, tol)?,
    ))
}
