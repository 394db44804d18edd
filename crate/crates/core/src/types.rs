//! Domain types shared by the analytic model, the reduced model, the
//! time-domain simulator and the stability engine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ideal three-phase grid behind the converter AC filter.
///
/// `phase_voltage_amplitude` is the peak per-phase voltage; under the
/// amplitude-invariant transform it equals the steady-state v_gd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub phase_voltage_amplitude: f64,
    pub fundamental_angular_frequency: f64,
}

impl GridSpec {
    /// 230 V rms per phase, 50 Hz.
    pub fn default_lv_grid() -> Self {
        GridSpec {
            phase_voltage_amplitude: 230.0 * std::f64::consts::SQRT_2,
            fundamental_angular_frequency: 2.0 * std::f64::consts::PI * 50.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phase_voltage_amplitude > 0.0) {
            return Err(Error::InvalidDesign {
                field: "grid.phase_voltage_amplitude",
                reason: format!("must be > 0, got {}", self.phase_voltage_amplitude),
            });
        }
        if !(self.fundamental_angular_frequency > 0.0) {
            return Err(Error::InvalidDesign {
                field: "grid.fundamental_angular_frequency",
                reason: format!("must be > 0, got {}", self.fundamental_angular_frequency),
            });
        }
        Ok(())
    }

    pub fn fundamental_hz(&self) -> f64 {
        self.fundamental_angular_frequency / (2.0 * std::f64::consts::PI)
    }
}

/// Electrical plant parameters of the two-level voltage-source converter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverterDesign {
    /// Nominal DC-link voltage V_i [V].
    pub v_dc_nominal: f64,
    /// Rated output power P_o [W].
    pub p_out: f64,
    /// Conversion efficiency, (0, 1].
    #[serde(default = "default_efficiency")]
    pub efficiency: f64,
    /// Per-phase AC filter inductance L [H].
    pub filter_inductance: f64,
    /// Per-phase AC filter series resistance r [ohm].
    #[serde(default)]
    pub filter_resistance: f64,
    /// DC-link capacitance C_i [F].
    pub dc_capacitance: f64,
    /// Equivalent series resistance of the DC-link capacitor [ohm].
    #[serde(default)]
    pub dc_cap_esr: f64,
    /// Switching frequency [Hz].
    pub switching_frequency: f64,
    pub grid: GridSpec,
}

fn default_efficiency() -> f64 {
    1.0
}

impl ConverterDesign {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let checks: [(&'static str, f64, bool); 7] = [
            ("v_dc_nominal", self.v_dc_nominal, self.v_dc_nominal > 0.0),
            ("p_out", self.p_out, self.p_out >= 0.0),
            (
                "efficiency",
                self.efficiency,
                self.efficiency > 0.0 && self.efficiency <= 1.0,
            ),
            (
                "filter_inductance",
                self.filter_inductance,
                self.filter_inductance > 0.0,
            ),
            (
                "filter_resistance",
                self.filter_resistance,
                self.filter_resistance >= 0.0,
            ),
            (
                "dc_capacitance",
                self.dc_capacitance,
                self.dc_capacitance > 0.0,
            ),
            ("dc_cap_esr", self.dc_cap_esr, self.dc_cap_esr >= 0.0),
        ];
        for (field, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidDesign {
                    field,
                    reason: format!("out of range: {value}"),
                });
            }
        }
        if !(self.switching_frequency > 0.0) {
            return Err(Error::InvalidDesign {
                field: "switching_frequency",
                reason: format!("must be > 0, got {}", self.switching_frequency),
            });
        }
        Ok(())
    }

    /// Steady-state grid voltage on the d axis (d axis aligned with the
    /// grid voltage phasor, v_gq = 0).
    pub fn v_gd(&self) -> f64 {
        self.grid.phase_voltage_amplitude
    }
}

/// Current regulator parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regulator {
    /// Series PI, k_p (1 + 1/(tau_i s)).
    #[serde(rename = "PI")]
    Pi { k_p: f64, tau_i: f64 },
    /// Proportional-resonant, k_p + k_r s / (s^2 + 2 w_c s + w_r^2).
    #[serde(rename = "PR")]
    Pr {
        k_p: f64,
        k_r: f64,
        resonant_frequency: f64,
        #[serde(default)]
        damping: f64,
    },
}

impl Regulator {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Regulator::Pi { k_p, tau_i } => {
                if !(tau_i > 0.0) || !k_p.is_finite() {
                    return Err(Error::InvalidDesign {
                        field: "regulator.tau_i",
                        reason: format!("PI requires tau_i > 0, got {tau_i}"),
                    });
                }
            }
            Regulator::Pr {
                k_p,
                k_r,
                resonant_frequency,
                damping,
            } => {
                if !(resonant_frequency > 0.0) || !k_p.is_finite() || !k_r.is_finite() {
                    return Err(Error::InvalidDesign {
                        field: "regulator.resonant_frequency",
                        reason: format!("PR requires resonant_frequency > 0, got {resonant_frequency}"),
                    });
                }
                if damping < 0.0 {
                    return Err(Error::InvalidDesign {
                        field: "regulator.damping",
                        reason: format!("must be >= 0, got {damping}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Reference frame the current controller operates in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    #[serde(rename = "DQ")]
    Dq,
    AlphaBeta,
}

/// How the DC-link voltage enters the duty-ratio division.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Feedforward {
    /// Divide by the instantaneously sensed DC voltage.
    Ideal,
    /// Divide by the nominal (constant) DC voltage.
    Constant,
    /// Divide by a first-order low-pass filtered measurement.
    Filtered { bandwidth_hz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub frame: Frame,
    pub regulator: Regulator,
    pub feedforward: Feedforward,
    /// Controller execution rate [Hz].
    pub control_rate: f64,
}

impl ControllerSpec {
    pub fn validate(&self) -> Result<()> {
        self.regulator.validate()?;
        if let Feedforward::Filtered { bandwidth_hz } = self.feedforward {
            if !(bandwidth_hz > 0.0) {
                return Err(Error::InvalidDesign {
                    field: "feedforward.bandwidth_hz",
                    reason: format!("must be > 0, got {bandwidth_hz}"),
                });
            }
        }
        if !(self.control_rate > 0.0) {
            return Err(Error::InvalidDesign {
                field: "control_rate",
                reason: format!("must be > 0, got {}", self.control_rate),
            });
        }
        Ok(())
    }
}

/// Steady-state phasor quantities the small-signal model is linearized
/// around.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub i_d: f64,
    pub i_q: f64,
    pub d_d: f64,
    pub d_q: f64,
}

impl OperatingPoint {
    pub fn duty_magnitude(&self) -> f64 {
        (self.d_d * self.d_d + self.d_q * self.d_q).sqrt()
    }
}

/// Logarithmically spaced frequency grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub f_min: f64,
    pub f_max: f64,
    pub points: usize,
}

impl FrequencyGrid {
    pub fn new(f_min: f64, f_max: f64, points: usize) -> Result<Self> {
        let grid = FrequencyGrid {
            f_min,
            f_max,
            points,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let span_ok = if self.points == 1 {
            self.f_max >= self.f_min
        } else {
            self.f_max > self.f_min
        };
        if !(self.f_min > 0.0) || !span_ok {
            return Err(Error::InvalidDesign {
                field: "grid.f_min/f_max",
                reason: format!(
                    "need 0 < f_min < f_max, got {}..{}",
                    self.f_min, self.f_max
                ),
            });
        }
        if self.points == 0 {
            return Err(Error::InvalidDesign {
                field: "grid.points",
                reason: "need >= 1 point".into(),
            });
        }
        Ok(())
    }

    /// The generated frequencies are strictly increasing with exact
    /// endpoints.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.points;
        if n == 1 {
            return vec![self.f_min];
        }
        let log_min = self.f_min.ln();
        let log_max = self.f_max.ln();
        (0..n)
            .map(|i| {
                if i == 0 {
                    self.f_min
                } else if i == n - 1 {
                    self.f_max
                } else {
                    (log_min + (log_max - log_min) * i as f64 / (n - 1) as f64).exp()
                }
            })
            .collect()
    }

    /// Single-point "grid" used by one-off evaluations.
    pub fn single(f: f64) -> Vec<f64> {
        vec![f]
    }
}
