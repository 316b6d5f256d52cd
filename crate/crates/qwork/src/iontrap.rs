//! Mapping from physical trapped-ion parameters to the abstract quench
//! quantities.
//!
//! A far-detuned standing-wave dipole potential sin²(kx̂ + φ), expanded to
//! O(η³) in the Lamb-Dicke parameter η = k·x₀, contributes an energy shift,
//! a linear displacement and a frequency change:
//!
//! ε = Ω sin²φ,   g = ηΩ sin(2φ),   ω̃ = ω₀ + 4η²Ω cos(2φ).
//!
//! Only the pure displacement point φ = π/4 (ω̃ = ω₀) is supported as a
//! quench; the frequency-changing configurations are reported but rejected.

use crate::error::{Error, Result};
use crate::schedule::QuenchSchedule;

/// Relative detuning of ω̃ from ω₀ beyond which a quench is rejected.
const FREQUENCY_SHIFT_TOL: f64 = 1e-9;

/// Trap and laser parameters, all frequencies angular.
#[derive(Debug, Clone)]
pub struct IonParams {
    /// Trap frequency ω₀.
    pub omega0: f64,
    /// Lamb-Dicke parameter η = k·x₀ with x₀ = (2Mω₀)^{−1/2}.
    pub eta: f64,
    /// Maximum Rabi frequency Ω of either polarization.
    pub rabi_max: f64,
    /// Standing-wave phase relative to the trap center.
    pub phi: f64,
}

impl IonParams {
    pub fn new(omega0: f64, eta: f64, rabi_max: f64, phi: f64) -> Result<Self> {
        if !(omega0 > 0.0) || !(rabi_max >= 0.0) || !(eta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ion parameters must be positive: omega0={omega0}, eta={eta}, rabi_max={rabi_max}"
            )));
        }
        Ok(Self {
            omega0,
            eta,
            rabi_max,
            phi,
        })
    }

    /// The O(η³) expansion assumes η ≪ 1; callers should warn past 0.5.
    pub fn in_lamb_dicke_regime(&self) -> bool {
        self.eta <= 0.5
    }
}

/// The three Lamb-Dicke expansion coefficients at instantaneous Rabi
/// frequency Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambDickeCoefficients {
    /// Energy shift ε = Ω sin²φ.
    pub epsilon: f64,
    /// Linear coupling g = ηΩ sin(2φ).
    pub g: f64,
    /// Effective frequency ω̃ = ω₀ + 4η²Ω cos(2φ).
    pub omega_tilde: f64,
}

/// Evaluates the expansion coefficients; pure formula, no support check.
pub fn lamb_dicke_coefficients(rabi: f64, p: &IonParams) -> LambDickeCoefficients {
    LambDickeCoefficients {
        epsilon: rabi * p.phi.sin().powi(2),
        g: p.eta * rabi * (2.0 * p.phi).sin(),
        omega_tilde: p.omega0 + 4.0 * p.eta * p.eta * rabi * (2.0 * p.phi).cos(),
    }
}

/// Rejects configurations whose quench would change the trap frequency,
/// i.e. anything away from the pure-displacement point φ = π/4.
pub fn ensure_pure_displacement(rabi: f64, p: &IonParams) -> Result<()> {
    let c = lamb_dicke_coefficients(rabi, p);
    let shift = (c.omega_tilde - p.omega0).abs();
    if shift > FREQUENCY_SHIFT_TOL * p.omega0 {
        return Err(Error::UnsupportedQuench(format!(
            "frequency shift ω̃ − ω₀ = {shift:.3e} at Ω = {rabi}: only the displaced \
             configuration φ = π/4 is supported, got φ = {}",
            p.phi
        )));
    }
    Ok(())
}

/// Maps an intensity protocol Ω(t) to the coupling schedule λ(t) = g(t) and
/// the energy-shift schedule ε(t) for the propagator. Both coefficients are
/// linear in Ω, so the mapping is an exact segment-wise rescaling. The ε
/// term is kept: it shifts the measured work values and ΔF.
pub fn build_ion_protocol(
    intensity: &QuenchSchedule,
    p: &IonParams,
) -> Result<(QuenchSchedule, QuenchSchedule)> {
    ensure_pure_displacement(intensity.max_abs_value(), p)?;
    let lambda = intensity.scaled(p.eta * (2.0 * p.phi).sin());
    let epsilon = intensity.scaled(p.phi.sin().powi(2));
    Ok((lambda, epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    /// Internal units of the 300 kHz trap: ω₀ = 1, Ω measured in ω₀.
    fn paper_params() -> IonParams {
        IonParams::new(1.0, 0.33, 0.5, PI / 4.0).unwrap()
    }

    #[test]
    fn displacement_point_reproduces_paper_values() {
        // Ω = 150 kHz, ω₀ = 300 kHz: ε = Ω/2 = 75 kHz, g = ηΩ = 49.5 kHz
        let p = paper_params();
        let c = lamb_dicke_coefficients(p.rabi_max, &p);
        assert_abs_diff_eq!(c.epsilon, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(c.epsilon * 300.0, 75.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.g, 0.165, epsilon = 1e-15);
        assert_abs_diff_eq!(c.g * 300.0, 49.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.omega_tilde, 1.0, epsilon = 1e-12);
        assert!(ensure_pure_displacement(p.rabi_max, &p).is_ok());
    }

    #[test]
    fn tightened_configuration_formula_and_rejection() {
        let p = IonParams::new(1.0, 0.33, 0.5, 0.0).unwrap();
        let c = lamb_dicke_coefficients(p.rabi_max, &p);
        assert_abs_diff_eq!(c.epsilon, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.g, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.omega_tilde, 1.0 + 4.0 * 0.33 * 0.33 * 0.5, epsilon = 1e-15);
        assert!(matches!(
            ensure_pure_displacement(p.rabi_max, &p),
            Err(Error::UnsupportedQuench(_))
        ));
    }

    #[test]
    fn dark_laser_gives_free_oscillator() {
        let p = IonParams::new(1.0, 0.33, 0.5, 0.3).unwrap();
        let c = lamb_dicke_coefficients(0.0, &p);
        assert_eq!(c.epsilon, 0.0);
        assert_eq!(c.g, 0.0);
        assert_eq!(c.omega_tilde, 1.0);
        // no light, no shift: even odd phases are fine at Ω = 0
        assert!(ensure_pure_displacement(0.0, &p).is_ok());
    }

    #[test]
    fn protocol_maps_paper_endpoints() {
        let p = paper_params();
        let intensity = QuenchSchedule::tanh_switch(0.0, p.rabi_max, 1.885, None).unwrap();
        let (lambda, epsilon) = build_ion_protocol(&intensity, &p).unwrap();
        assert_abs_diff_eq!(lambda.lambda_final(), 0.165, epsilon = 1e-15);
        assert_abs_diff_eq!(epsilon.lambda_final(), 0.25, epsilon = 1e-15);
        assert_eq!(lambda.total_time(), intensity.total_time());
        // both scale linearly with Ω everywhere
        for k in 0..=50 {
            let t = intensity.total_time() * (k as f64 / 50.0);
            let om = intensity.eval(t).unwrap();
            assert_abs_diff_eq!(lambda.eval(t).unwrap(), 0.33 * om, epsilon = 1e-14);
            assert_abs_diff_eq!(epsilon.eval(t).unwrap(), 0.5 * om, epsilon = 1e-14);
        }
    }

    #[test]
    fn constant_intensity_maps_to_constants() {
        let p = paper_params();
        let intensity = QuenchSchedule::constant(0.3, 2.0).unwrap();
        let (lambda, epsilon) = build_ion_protocol(&intensity, &p).unwrap();
        assert_abs_diff_eq!(lambda.eval(1.0).unwrap(), 0.33 * 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(epsilon.eval(1.0).unwrap(), 0.15, epsilon = 1e-15);
    }

    #[test]
    fn tightened_protocol_rejected() {
        let p = IonParams::new(1.0, 0.33, 0.5, 0.0).unwrap();
        let intensity = QuenchSchedule::tanh_switch(0.0, p.rabi_max, 1.0, None).unwrap();
        assert!(build_ion_protocol(&intensity, &p).is_err());
    }
}
