//! Steady-state operating-point solver.
//!
//! Unity power factor (I_q = 0), d axis aligned with the grid voltage
//! phasor. The duty ratios follow from steady-state KVL of the filter.

use crate::error::{Error, Result};
use crate::types::{ConverterDesign, OperatingPoint};

pub fn solve_operating_point(design: &ConverterDesign) -> Result<OperatingPoint> {
    design.validate()?;
    let v_gd = design.v_gd();
    let v_i = design.v_dc_nominal;
    let r = design.filter_resistance;
    let w0 = design.grid.fundamental_angular_frequency;
    let l = design.filter_inductance;

    let i_d = 2.0 * design.p_out / (3.0 * v_gd);
    let i_q = 0.0;
    let d_d = (v_gd + r * i_d) / v_i;
    let d_q = w0 * l * i_d / v_i;

    let op = OperatingPoint { i_d, i_q, d_d, d_q };
    let m = op.duty_magnitude();
    if m > 1.0 {
        return Err(Error::InfeasibleOperatingPoint { duty_magnitude: m });
    }
    debug_assert!(
        (-r * i_d + w0 * l * i_q + d_d * v_i - v_gd).abs() < 1e-9 * v_i
            && (-r * i_q - w0 * l * i_d + d_q * v_i).abs() < 1e-9 * v_i
    );
    Ok(op)
}
