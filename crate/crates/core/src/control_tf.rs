//! Continuous-time transfer-function evaluation for the current
//! regulator and the input-voltage feedforward path.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::types::{Feedforward, Regulator};

/// Series PI: k_p (1 + 1/(tau_i s)).
pub fn pi_tf(k_p: f64, tau_i: f64, s: Complex64) -> Result<Complex64> {
    if s.norm() == 0.0 {
        return Err(Error::DegenerateFrequency { operation: "pi_tf" });
    }
    Ok(k_p * (Complex64::new(1.0, 0.0) + (tau_i * s).inv()))
}

/// Proportional-resonant: k_p + k_r s / (s^2 + 2 w_c s + w_r^2).
pub fn pr_tf(k_p: f64, k_r: f64, w_r: f64, w_c: f64, s: Complex64) -> Result<Complex64> {
    let den = s * s + 2.0 * w_c * s + w_r * w_r;
    if den.norm() == 0.0 {
        return Err(Error::DegenerateFrequency { operation: "pr_tf" });
    }
    Ok(k_p + k_r * s / den)
}

/// Evaluate whichever regulator the spec carries.
pub fn regulator_tf(reg: &Regulator, s: Complex64) -> Result<Complex64> {
    match *reg {
        Regulator::Pi { k_p, tau_i } => pi_tf(k_p, tau_i, s),
        Regulator::Pr {
            k_p,
            k_r,
            resonant_frequency,
            damping,
        } => pr_tf(k_p, k_r, resonant_frequency, damping, s),
    }
}

/// Feedforward transfer from DC-bus voltage perturbation to the voltage
/// used in the duty-ratio division.
pub fn feedforward_tf(mode: Feedforward, s: Complex64) -> Complex64 {
    match mode {
        Feedforward::Ideal => Complex64::new(1.0, 0.0),
        Feedforward::Constant => Complex64::new(0.0, 0.0),
        Feedforward::Filtered { bandwidth_hz } => {
            let wb = 2.0 * std::f64::consts::PI * bandwidth_hz;
            (Complex64::new(1.0, 0.0) + s / wb).inv()
        }
    }
}
