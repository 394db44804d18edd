//! Reduced-order input impedance: a negative constant-power-load
//! resistance in parallel with the DC-link capacitor.

use num_complex::Complex64;

use crate::curve::ImpedanceCurve;
use crate::error::{Error, Result};
use crate::types::{ConverterDesign, FrequencyGrid};

/// Negative CPL resistance with optional capacitor ESR. The ESR
/// extension goes beyond the plain R || C model and exists to use the
/// measured hardware parameters; it reduces to the plain form at esr = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedModel {
    /// Negative incremental resistance [ohm].
    pub r_cpl: f64,
    /// DC-link capacitance [F].
    pub c_i: f64,
    pub esr: Option<f64>,
}

impl ReducedModel {
    pub fn new(r_cpl: f64, c_i: f64, esr: Option<f64>) -> Result<Self> {
        if !(r_cpl < 0.0) {
            return Err(Error::InvalidDesign {
                field: "r_cpl",
                reason: format!("must be negative, got {r_cpl}"),
            });
        }
        if !(c_i > 0.0) {
            return Err(Error::InvalidDesign {
                field: "c_i",
                reason: format!("must be positive, got {c_i}"),
            });
        }
        Ok(ReducedModel { r_cpl, c_i, esr })
    }

    pub fn from_design(design: &ConverterDesign) -> Result<Self> {
        let esr = (design.dc_cap_esr > 0.0).then_some(design.dc_cap_esr);
        ReducedModel::new(r_cpl(design)?, design.dc_capacitance, esr)
    }
}

/// -V_i^2 eta / P_o.
pub fn r_cpl(design: &ConverterDesign) -> Result<f64> {
    design.validate()?;
    if design.p_out == 0.0 {
        // the reduced model degenerates to the bare capacitor
        return Err(Error::InvalidDesign {
            field: "p_out",
            reason: "no CPL resistance exists at zero power".into(),
        });
    }
    Ok(-design.v_dc_nominal * design.v_dc_nominal * design.efficiency / design.p_out)
}

/// Total reduced-model impedance. With ESR present this is the parallel
/// combination of R_CPL and (esr + 1/(sC)).
pub fn reduced_total_impedance(model: &ReducedModel, s: Complex64) -> Result<Complex64> {
    let frequency_hz = s.im.abs() / (2.0 * std::f64::consts::PI);
    match model.esr {
        None => {
            let den = Complex64::new(1.0, 0.0) + model.r_cpl * model.c_i * s;
            if den.norm() < 1e-12 {
                return Err(Error::ResonantSingularity { frequency_hz });
            }
            Ok(model.r_cpl / den)
        }
        Some(esr) => {
            if s.norm() == 0.0 {
                // DC limit of the parallel form
                let sum = model.r_cpl; // capacitor branch open
                return Ok(Complex64::new(sum, 0.0));
            }
            let z_c = esr + (s * model.c_i).inv();
            let sum = z_c + model.r_cpl;
            if sum.norm() < 1e-12 * (z_c.norm() + model.r_cpl.abs()) {
                return Err(Error::ResonantSingularity { frequency_hz });
            }
            Ok(model.r_cpl * z_c / sum)
        }
    }
}

/// Pointwise application of [`reduced_total_impedance`] on a grid.
pub fn sweep_reduced(model: &ReducedModel, grid: &FrequencyGrid) -> Result<ImpedanceCurve> {
    grid.validate()?;
    sweep_reduced_at(model, &grid.frequencies())
}

pub fn sweep_reduced_at(model: &ReducedModel, frequencies: &[f64]) -> Result<ImpedanceCurve> {
    let values = frequencies
        .iter()
        .map(|&f| {
            reduced_total_impedance(model, Complex64::new(0.0, 2.0 * std::f64::consts::PI * f))
        })
        .collect::<Result<Vec<_>>>()?;
    ImpedanceCurve::new(frequencies.to_vec(), values)
}
