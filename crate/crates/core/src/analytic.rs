//! Analytic closed-loop input impedance of the DQ-current-controlled
//! converter.
//!
//! Per frequency the four coupled small-signal transfer functions from
//! DC-bus voltage to currents and duty ratios are obtained from a dense
//! 4x4 complex linear solve, then assembled into the inverter input
//! impedance and the total impedance with the DC-link capacitor. The
//! feedforward generalization multiplies only the duty operating-point
//! terms; the current-decoupling cross terms stay inside, matching a
//! control structure whose decoupling uses measured currents rather than
//! the measured DC voltage.

use num_complex::Complex64;

use crate::control_tf::{feedforward_tf, regulator_tf};
use crate::curve::{ImpedanceCurve, SweepGap, SweepResult};
use crate::error::{Error, Result};
use crate::operating_point::solve_operating_point;
use crate::types::{ControllerSpec, ConverterDesign, Frame, FrequencyGrid, OperatingPoint};

/// The four coupled transfer functions at one s = jw.
///
/// `g_idvi`/`g_iqvi` are amperes per volt of DC perturbation,
/// `g_ddvi`/`g_dqvi` duty per volt.
#[derive(Debug, Clone, Copy)]
pub struct CoupledTfs {
    pub g_idvi: Complex64,
    pub g_iqvi: Complex64,
    pub g_ddvi: Complex64,
    pub g_dqvi: Complex64,
}

const RESIDUAL_TOL: f64 = 1e-10;

/// Solve the coupled 4-unknown complex system by direct elimination with
/// partial pivoting, then verify the back-substituted residuals.
pub fn solve_coupled_tfs(
    design: &ConverterDesign,
    op: &OperatingPoint,
    ctrl: &ControllerSpec,
    s: Complex64,
) -> Result<CoupledTfs> {
    if ctrl.frame != Frame::Dq {
        return Err(Error::InvalidDesign {
            field: "controller.frame",
            reason: "analytic impedance is defined for the DQ frame only".into(),
        });
    }
    if s.norm() == 0.0 {
        return Err(Error::DegenerateFrequency {
            operation: "solve_coupled_tfs",
        });
    }
    let l = design.filter_inductance;
    let r = design.filter_resistance;
    let v_i = design.v_dc_nominal;
    let w0 = design.grid.fundamental_angular_frequency;
    let g_c = regulator_tf(&ctrl.regulator, s)?;
    let h_ff = feedforward_tf(ctrl.feedforward, s);

    let zl = s * l + r;
    let wl = Complex64::new(w0 * l, 0.0);
    let v = Complex64::new(v_i, 0.0);
    let zero = Complex64::new(0.0, 0.0);

    // Unknowns x = [G_idvi, G_iqvi, G_ddvi, G_dqvi].
    let a = [
        [zl, -wl, -v, zero],
        [wl, zl, zero, -v],
        [g_c, wl, v, zero],
        [-wl, g_c, zero, v],
    ];
    let b = [
        Complex64::new(op.d_d, 0.0),
        Complex64::new(op.d_q, 0.0),
        -op.d_d * h_ff,
        -op.d_q * h_ff,
    ];

    let frequency_hz = s.im.abs() / (2.0 * std::f64::consts::PI);
    let x = solve_4x4(a, b).ok_or(Error::SingularSystem { frequency_hz })?;

    // back-substituted relative residual of every equation
    let scale: f64 = a
        .iter()
        .flatten()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
        * x.iter().map(|c| c.norm()).fold(0.0, f64::max)
        + b.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for row in 0..4 {
        let lhs: Complex64 = (0..4).map(|col| a[row][col] * x[col]).sum();
        if (lhs - b[row]).norm() > RESIDUAL_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::SingularSystem { frequency_hz });
        }
    }

    Ok(CoupledTfs {
        g_idvi: x[0],
        g_iqvi: x[1],
        g_ddvi: x[2],
        g_dqvi: x[3],
    })
}

/// Gaussian elimination with partial pivoting on a 4x4 complex system.
/// Returns None when a pivot underflows relative to the matrix scale.
fn solve_4x4(a: [[Complex64; 4]; 4], b: [Complex64; 4]) -> Option<[Complex64; 4]> {
    let mut m = [[Complex64::new(0.0, 0.0); 5]; 4];
    let mut norm: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = a[i][j];
            norm = norm.max(a[i][j].norm());
        }
        m[i][4] = b[i];
    }
    for col in 0..4 {
        let pivot_row = (col..4)
            .max_by(|&i, &j| m[i][col].norm().partial_cmp(&m[j][col].norm()).unwrap())?;
        if m[pivot_row][col].norm() < 1e-13 * norm.max(f64::MIN_POSITIVE) {
            return None;
        }
        m.swap(col, pivot_row);
        let pivot = m[col][col];
        for row in col + 1..4 {
            let factor = m[row][col] / pivot;
            for k in col..5 {
                let sub = factor * m[col][k];
                m[row][k] -= sub;
            }
        }
    }
    let mut x = [Complex64::new(0.0, 0.0); 4];
    for row in (0..4).rev() {
        let mut acc = m[row][4];
        for k in row + 1..4 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Closed-loop inverter input impedance (capacitor excluded).
pub fn inverter_input_impedance(
    tfs: &CoupledTfs,
    op: &OperatingPoint,
    frequency_hz: f64,
) -> Result<Complex64> {
    let denom = op.i_d * tfs.g_ddvi
        + op.d_d * tfs.g_idvi
        + op.i_q * tfs.g_dqvi
        + op.d_q * tfs.g_iqvi;
    // open-circuit marker, not a crash: the converter draws no
    // small-signal current through the bridge at this point. The cutoff
    // is far above any feasible -V^2/P, so only exact cancellation (up to
    // solver roundoff) trips it.
    const OPEN_CIRCUIT_OHMS: f64 = 1e12;
    if denom.norm() * OPEN_CIRCUIT_OHMS < 2.0 / 3.0 {
        return Err(Error::InfiniteImpedance { frequency_hz });
    }
    Ok(Complex64::new(2.0 / 3.0, 0.0) / denom)
}

/// DC-link capacitor branch impedance, esr + 1/(sC).
pub fn capacitor_impedance(c_i: f64, esr: f64, s: Complex64) -> Result<Complex64> {
    if s.norm() == 0.0 {
        return Err(Error::DegenerateFrequency {
            operation: "capacitor_impedance",
        });
    }
    Ok(esr + (s * c_i).inv())
}

/// Parallel combination of the bridge impedance and the capacitor branch.
pub fn total_input_impedance(
    z_i: Complex64,
    z_ci: Complex64,
    frequency_hz: f64,
) -> Result<Complex64> {
    let sum = z_i + z_ci;
    if sum.norm() < 1e-12 * (z_i.norm() + z_ci.norm()).max(f64::MIN_POSITIVE) {
        // genuine parallel-resonance pole of the model
        return Err(Error::ResonantSingularity { frequency_hz });
    }
    Ok(z_ci * z_i / sum)
}

/// Sweep the analytic model over a frequency grid. Returns the inverter
/// impedance Z_i and the total impedance Z_iT; open-circuit points are
/// recorded as explicit gaps.
pub fn sweep_analytic(
    design: &ConverterDesign,
    ctrl: &ControllerSpec,
    grid: &FrequencyGrid,
) -> Result<(SweepResult, SweepResult)> {
    grid.validate()?;
    ctrl.validate()?;
    let op = solve_operating_point(design)?;
    sweep_analytic_at(design, &op, ctrl, &grid.frequencies())
}

/// Same as [`sweep_analytic`] but over explicit frequencies and a
/// pre-solved operating point.
pub fn sweep_analytic_at(
    design: &ConverterDesign,
    op: &OperatingPoint,
    ctrl: &ControllerSpec,
    frequencies: &[f64],
) -> Result<(SweepResult, SweepResult)> {
    let mut zi_f = Vec::new();
    let mut zi_v = Vec::new();
    let mut zt_f = Vec::new();
    let mut zt_v = Vec::new();
    let mut open = Vec::new();
    let mut gaps = Vec::new();

    for &f in frequencies {
        let s = Complex64::new(0.0, 2.0 * std::f64::consts::PI * f);
        let point = (|| -> Result<(Option<Complex64>, Complex64)> {
            let tfs = solve_coupled_tfs(design, op, ctrl, s)?;
            let z_ci = capacitor_impedance(design.dc_capacitance, design.dc_cap_esr, s)?;
            match inverter_input_impedance(&tfs, op, f) {
                Ok(z_i) => {
                    let z_t = total_input_impedance(z_i, z_ci, f)?;
                    Ok((Some(z_i), z_t))
                }
                // open bridge: the total impedance degenerates to the
                // capacitor branch
                Err(Error::InfiniteImpedance { .. }) => Ok((None, z_ci)),
                Err(e) => Err(e),
            }
        })();
        match point {
            Ok((maybe_zi, z_t)) => {
                if let Some(z_i) = maybe_zi {
                    zi_f.push(f);
                    zi_v.push(z_i);
                } else {
                    open.push(f);
                }
                zt_f.push(f);
                zt_v.push(z_t);
            }
            Err(error) => gaps.push(SweepGap {
                frequency_hz: f,
                error,
            }),
        }
    }

    let z_i = SweepResult {
        curve: ImpedanceCurve::new(zi_f, zi_v)?,
        open_circuit: open.clone(),
        gaps: Vec::new(),
    };
    let z_t = SweepResult {
        curve: ImpedanceCurve::new(zt_f, zt_v)?,
        open_circuit: open,
        gaps,
    };
    Ok((z_i, z_t))
}
