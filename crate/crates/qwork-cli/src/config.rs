//! Run configuration: TOML sections [trap], [schedule_forward], optional
//! [schedule_backward], [measurement], [numerics], [fit], plus the conversion
//! to internal units (ω₀ = 1, time in 1/ω₀).
//!
//! Physical inputs use ordinary frequencies in kHz and times in μs; the
//! angular conversion ω₀ = 2π·f is applied here and nowhere else.

use serde::{Deserialize, Serialize};

use qwork::iontrap::IonParams;
use qwork::schedule::QuenchSchedule;
use qwork::Tolerances;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub trap: TrapSection,
    pub schedule_forward: ScheduleSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_backward: Option<ScheduleSection>,
    #[serde(default)]
    pub measurement: MeasurementSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub fit: FitSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    /// Trap frequency, ordinary kHz (the 300 kHz of a typical axial trap).
    #[serde(default = "default_trap_khz")]
    pub frequency_khz: f64,
    /// Lamb-Dicke parameter.
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Maximum Rabi frequency, ordinary kHz.
    #[serde(default = "default_rabi_khz")]
    pub rabi_max_khz: f64,
    /// Standing-wave phase in units of π (0.25 is the displacement point).
    #[serde(default = "default_phi_over_pi")]
    pub phi_over_pi: f64,
    /// Mean phonon number of the prepared thermal state.
    #[serde(default = "default_nbar")]
    pub nbar: f64,
}

fn default_trap_khz() -> f64 {
    300.0
}
fn default_eta() -> f64 {
    0.33
}
fn default_rabi_khz() -> f64 {
    150.0
}
fn default_phi_over_pi() -> f64 {
    0.25
}
fn default_nbar() -> f64 {
    1.0
}

impl Default for TrapSection {
    fn default() -> Self {
        Self {
            frequency_khz: default_trap_khz(),
            eta: default_eta(),
            rabi_max_khz: default_rabi_khz(),
            phi_over_pi: default_phi_over_pi(),
            nbar: default_nbar(),
        }
    }
}

/// Intensity protocol Ω(t), always from dark to full power.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// "tanh", "repeated_tanh", or "text".
    pub shape: String,
    /// tanh: switching time T in μs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switching_time_us: Option<f64>,
    /// tanh: segment duration in μs (default 8T).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_us: Option<f64>,
    /// repeated_tanh: slow switching time in μs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_slow_us: Option<f64>,
    /// repeated_tanh: fast switching time in μs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_fast_us: Option<f64>,
    /// repeated_tanh: number of slow-up/fast-down cycles before the final
    /// fast up-switch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycles: Option<usize>,
    /// text: schedule grammar, values as fractions of the maximum Rabi
    /// frequency, times in internal units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    /// Sample spacing in μs (0.5 μs is a 2 MHz sampling rate).
    #[serde(default = "default_du_us")]
    pub du_us: f64,
    /// Number of samples M; the window is M·du.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Decoherence time in μs; 0 disables the envelope.
    #[serde(default = "default_tau_us")]
    pub tau_us: f64,
    /// Additive Gaussian noise per quadrature, relative to |χ| ≤ 1.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_du_us() -> f64 {
    0.5
}
fn default_samples() -> usize {
    1000
}
fn default_tau_us() -> f64 {
    50.0
}
fn default_seed() -> u64 {
    1
}

impl Default for MeasurementSection {
    fn default() -> Self {
        Self {
            du_us: default_du_us(),
            samples: default_samples(),
            tau_us: default_tau_us(),
            noise_sigma: 0.0,
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_pad_levels")]
    pub pad_levels: usize,
    /// Propagator steps; 0 selects dt ≤ min(T_min/10, 0.01·2π/ω₀).
    #[serde(default)]
    pub steps: usize,
    #[serde(default = "default_zero_pad")]
    pub zero_pad: usize,
    #[serde(default = "default_unitarity_tol")]
    pub unitarity_tol: f64,
    #[serde(default = "default_thermal_tail_tol")]
    pub thermal_tail_tol: f64,
    #[serde(default = "default_edge_population_tol")]
    pub edge_population_tol: f64,
}

fn default_dim() -> usize {
    64
}
fn default_pad_levels() -> usize {
    8
}
fn default_zero_pad() -> usize {
    4
}
fn default_unitarity_tol() -> f64 {
    1e-10
}
fn default_thermal_tail_tol() -> f64 {
    1e-10
}
fn default_edge_population_tol() -> f64 {
    1e-8
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            pad_levels: default_pad_levels(),
            steps: 0,
            zero_pad: default_zero_pad(),
            unitarity_tol: default_unitarity_tol(),
            thermal_tail_tol: default_thermal_tail_tol(),
            edge_population_tol: default_edge_population_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Peak threshold relative to the spectrum maximum.
    #[serde(default = "default_rel_threshold")]
    pub rel_threshold: f64,
}

fn default_rel_threshold() -> f64 {
    1e-3
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            rel_threshold: default_rel_threshold(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        let c = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Config(msg.to_string()))
            }
        };
        c(self.trap.frequency_khz > 0.0, "trap.frequency_khz must be positive")?;
        c(self.trap.rabi_max_khz >= 0.0, "trap.rabi_max_khz must be nonnegative")?;
        c(self.trap.eta >= 0.0, "trap.eta must be nonnegative")?;
        c(self.trap.nbar > 0.0, "trap.nbar must be positive")?;
        c(self.measurement.du_us > 0.0, "measurement.du_us must be positive")?;
        c(self.measurement.samples >= 2, "measurement.samples must be at least 2")?;
        c(self.measurement.tau_us >= 0.0, "measurement.tau_us must be nonnegative")?;
        c(self.measurement.noise_sigma >= 0.0, "measurement.noise_sigma must be nonnegative")?;
        c(self.numerics.dim >= 2, "numerics.dim must be at least 2")?;
        c(
            self.numerics.pad_levels < self.numerics.dim,
            "numerics.pad_levels must be smaller than numerics.dim",
        )?;
        c(self.numerics.zero_pad >= 1, "numerics.zero_pad must be at least 1")?;
        c(
            self.fit.rel_threshold > 0.0 && self.fit.rel_threshold < 1.0,
            "fit.rel_threshold must lie in (0, 1)",
        )?;
        self.intensity_schedule(&self.schedule_forward)?;
        if let Some(b) = &self.schedule_backward {
            self.intensity_schedule(b)?;
        }
        Ok(())
    }

    /// Angular trap frequency per μs of wall time: internal time = t_us × this.
    pub fn omega0_per_us(&self) -> f64 {
        std::f64::consts::TAU * self.trap.frequency_khz * 1e-3
    }

    pub fn us_to_internal(&self, t_us: f64) -> f64 {
        t_us * self.omega0_per_us()
    }

    pub fn internal_to_us(&self, t: f64) -> f64 {
        t / self.omega0_per_us()
    }

    /// Energies in units of ω₀ map to ordinary kHz through the trap frequency.
    pub fn internal_to_khz(&self, e: f64) -> f64 {
        e * self.trap.frequency_khz
    }

    /// Rabi frequency in internal units (Ω/ω₀).
    pub fn rabi_max_internal(&self) -> f64 {
        self.trap.rabi_max_khz / self.trap.frequency_khz
    }

    pub fn ion_params(&self) -> CliResult<IonParams> {
        crate::at_stage(
            "iontrap",
            IonParams::new(
                1.0,
                self.trap.eta,
                self.rabi_max_internal(),
                self.trap.phi_over_pi * std::f64::consts::PI,
            ),
        )
    }

    /// β in internal units from the configured mean phonon number.
    pub fn beta_internal(&self) -> f64 {
        (1.0 + 1.0 / self.trap.nbar).ln()
    }

    /// Envelope decay time in internal units; 0 in the config means none.
    pub fn tau_internal(&self) -> f64 {
        if self.measurement.tau_us > 0.0 {
            self.us_to_internal(self.measurement.tau_us)
        } else {
            f64::INFINITY
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            unitarity: self.numerics.unitarity_tol,
            thermal_tail: self.numerics.thermal_tail_tol,
            edge_population: self.numerics.edge_population_tol,
            n_pad: self.numerics.pad_levels,
        }
    }

    /// Builds the Ω(t) intensity schedule of one section, internal units.
    pub fn intensity_schedule(&self, section: &ScheduleSection) -> CliResult<QuenchSchedule> {
        let rabi = self.rabi_max_internal();
        let need = |field: Option<f64>, name: &str| {
            field.ok_or_else(|| {
                CliError::Config(format!("schedule shape '{}' needs {name}", section.shape))
            })
        };
        let sched = match section.shape.as_str() {
            "tanh" => {
                let t = self.us_to_internal(need(section.switching_time_us, "switching_time_us")?);
                let dur = section.duration_us.map(|d| self.us_to_internal(d));
                QuenchSchedule::tanh_switch(0.0, rabi, t, dur)
            }
            "repeated_tanh" => {
                let t_slow = self.us_to_internal(need(section.t_slow_us, "t_slow_us")?);
                let t_fast = self.us_to_internal(need(section.t_fast_us, "t_fast_us")?);
                let cycles = section.cycles.unwrap_or(2);
                QuenchSchedule::repeated_tanh(0.0, rabi, t_slow, t_fast, cycles, None, None)
            }
            "text" => {
                let text = section.text.as_ref().ok_or_else(|| {
                    CliError::Config("schedule shape 'text' needs a text field".into())
                })?;
                QuenchSchedule::parse(text).map(|s| s.scaled(rabi))
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown schedule shape '{other}' (expected tanh, repeated_tanh, or text)"
                )))
            }
        };
        sched.map_err(|e| CliError::Config(e.to_string()))
    }

    /// Forward intensity schedule.
    pub fn forward_intensity(&self) -> CliResult<QuenchSchedule> {
        self.intensity_schedule(&self.schedule_forward)
    }

    /// Backward intensity schedule: an explicit override, or the reversed
    /// forward protocol.
    pub fn backward_intensity(&self) -> CliResult<QuenchSchedule> {
        match &self.schedule_backward {
            Some(section) => self.intensity_schedule(section),
            None => Ok(self.forward_intensity()?.reversed()),
        }
    }
}
