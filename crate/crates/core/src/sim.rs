//! Fixed-step time-domain simulation of the switching-averaged converter
//! with discrete current control and a perturbable DC source.
//!
//! The plant is integrated in the DQ frame with classic 4th-order
//! Runge-Kutta between controller samples. The regulator and decoupling
//! run at the control rate with zero-order-held voltage commands; the
//! duty-ratio division by the feedforward voltage is evaluated
//! continuously inside the plant derivative, mirroring the continuous-time
//! analytic model (no computation delay is modeled either).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operating_point::solve_operating_point;
use crate::transforms::{inverse_park, park};
use crate::types::{ControllerSpec, ConverterDesign, Feedforward, Frame, Regulator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub frequency: f64,
    pub amplitude: f64,
}

/// DC source behind a series resistance, optionally with a sinusoidal
/// perturbation added to its reference voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub v_nominal: f64,
    pub series_resistance: f64,
    #[serde(default)]
    pub injection: Option<Injection>,
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_nominal > 0.0) {
            return Err(Error::InvalidDesign {
                field: "source.v_nominal",
                reason: format!("must be > 0, got {}", self.v_nominal),
            });
        }
        if !(self.series_resistance > 0.0) {
            return Err(Error::InvalidDesign {
                field: "source.series_resistance",
                reason: format!("must be > 0, got {}", self.series_resistance),
            });
        }
        if let Some(inj) = &self.injection {
            if !(inj.frequency > 0.0) {
                return Err(Error::InvalidDesign {
                    field: "source.injection.frequency",
                    reason: format!("must be > 0, got {}", inj.frequency),
                });
            }
            // small-signal validity guard
            if !(inj.amplitude >= 0.0) || inj.amplitude >= 0.2 * self.v_nominal {
                return Err(Error::InvalidDesign {
                    field: "source.injection.amplitude",
                    reason: format!(
                        "must be in [0, 0.2 * v_nominal), got {}",
                        inj.amplitude
                    ),
                });
            }
        }
        Ok(())
    }

    fn voltage(&self, t: f64) -> f64 {
        match &self.injection {
            None => self.v_nominal,
            Some(inj) => {
                self.v_nominal
                    + inj.amplitude * (2.0 * std::f64::consts::PI * inj.frequency * t).sin()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Plant integration step [s].
    pub plant_step: f64,
    /// Total simulated time [s].
    pub duration: f64,
    /// Record every n-th plant step.
    pub record_decimation: usize,
}

impl SimConfig {
    pub fn validate(&self, ctrl: &ControllerSpec) -> Result<()> {
        if !(self.plant_step > 0.0) || self.plant_step > 1.0 / (10.0 * ctrl.control_rate) {
            return Err(Error::InvalidDesign {
                field: "sim.plant_step",
                reason: format!(
                    "need 0 < dt <= 1/(10 f_ctrl) = {:.3e}, got {:.3e}",
                    1.0 / (10.0 * ctrl.control_rate),
                    self.plant_step
                ),
            });
        }
        if !(self.duration > 0.0) {
            return Err(Error::InvalidDesign {
                field: "sim.duration",
                reason: format!("must be > 0, got {}", self.duration),
            });
        }
        if self.record_decimation == 0 {
            return Err(Error::InvalidDesign {
                field: "sim.record_decimation",
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Recorded simulation signals on a uniform time base.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub time: Vec<f64>,
    pub v_dc: Vec<f64>,
    /// Current into the converter DC port, capacitor branch included.
    pub i_dc_port: Vec<f64>,
    pub i_d: Vec<f64>,
    pub i_q: Vec<f64>,
    pub duty_d: Vec<f64>,
    pub duty_q: Vec<f64>,
    /// Recording rate [Hz].
    pub sample_rate: f64,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Full trace CSV (t, v_dc, i_dc_port, i_d, i_q).
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t_s,v_dc_V,i_dc_A,i_d_A,i_q_A")?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.time[k], self.v_dc[k], self.i_dc_port[k], self.i_d[k], self.i_q[k]
            )?;
        }
        Ok(())
    }

    /// Capture-format CSV (t_s, v_V, i_A) of the DC port, as accepted by
    /// the capture processor.
    pub fn write_capture_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t_s,v_V,i_A")?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e}",
                self.time[k], self.v_dc[k], self.i_dc_port[k]
            )?;
        }
        Ok(())
    }
}

/// The measured DC-port current series: the clamp sits before the
/// capacitor, so the capacitor branch is included.
pub fn dc_port_current(trace: &SimTrace) -> &[f64] {
    &trace.i_dc_port
}

#[derive(Debug, Clone, Copy)]
struct PiState {
    integ: f64,
}

impl PiState {
    fn step(&mut self, k_p: f64, tau_i: f64, dt: f64, error: f64) -> f64 {
        // backward Euler
        self.integ += k_p / tau_i * dt * error;
        k_p * error + self.integ
    }
}

/// Resonant biquad, Tustin-discretized with frequency prewarping at the
/// resonant frequency so the infinite gain lands exactly on w_r.
#[derive(Debug, Clone, Copy)]
struct ResonantBiquad {
    b0: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    s1: f64,
    s2: f64,
}

impl ResonantBiquad {
    fn new(k_r: f64, w_r: f64, w_c: f64, dt: f64) -> Self {
        let k = w_r / (0.5 * w_r * dt).tan();
        let a0 = k * k + 2.0 * w_c * k + w_r * w_r;
        ResonantBiquad {
            b0: k_r * k / a0,
            b2: -k_r * k / a0,
            a1: (2.0 * w_r * w_r - 2.0 * k * k) / a0,
            a2: (k * k - 2.0 * w_c * k + w_r * w_r) / a0,
            s1: 0.0,
            s2: 0.0,
        }
    }

    fn step(&mut self, x: f64) -> f64 {
        // direct form II transposed
        let y = self.b0 * x + self.s1;
        self.s1 = self.s2 - self.a1 * y;
        self.s2 = self.b2 * x - self.a2 * y;
        y
    }
}

enum RegulatorState {
    Pi {
        k_p: f64,
        tau_i: f64,
        d: PiState,
        q: PiState,
    },
    Pr {
        k_p: f64,
        alpha: ResonantBiquad,
        beta: ResonantBiquad,
    },
}

/// Held voltage command, in the controller's own frame.
#[derive(Debug, Clone, Copy)]
enum Command {
    Dq { d: f64, q: f64 },
    AlphaBeta { alpha: f64, beta: f64 },
}

struct Plant<'a> {
    design: &'a ConverterDesign,
    source: &'a SourceSpec,
    feedforward: Feedforward,
}

/// Plant state: [i_d, i_q, v_dc, x_ff] with x_ff the feedforward
/// low-pass state (unused unless Filtered).
type State = [f64; 4];

impl Plant<'_> {
    fn ff_voltage(&self, x: &State) -> f64 {
        match self.feedforward {
            Feedforward::Ideal => x[2],
            Feedforward::Constant => self.design.v_dc_nominal,
            Feedforward::Filtered { .. } => x[3],
        }
    }

    fn converter_voltage(&self, t: f64, x: &State, cmd: &Command) -> (f64, f64) {
        let w0 = self.design.grid.fundamental_angular_frequency;
        let v_ff = self.ff_voltage(x);
        let (cmd_d, cmd_q) = match *cmd {
            Command::Dq { d, q } => (d, q),
            Command::AlphaBeta { alpha, beta } => park(alpha, beta, w0 * t),
        };
        let ratio = x[2] / v_ff;
        (cmd_d * ratio, cmd_q * ratio)
    }

    fn duty(&self, t: f64, x: &State, cmd: &Command) -> (f64, f64) {
        let (vd, vq) = self.converter_voltage(t, x, cmd);
        (vd / x[2], vq / x[2])
    }

    fn deriv(&self, t: f64, x: &State, cmd: &Command) -> State {
        let d = self.design;
        let l = d.filter_inductance;
        let r = d.filter_resistance;
        let c = d.dc_capacitance;
        let w0 = d.grid.fundamental_angular_frequency;
        let v_gd = d.v_gd();

        let (v_conv_d, v_conv_q) = self.converter_voltage(t, x, cmd);
        let i_src = (self.source.voltage(t) - x[2]) / self.source.series_resistance;
        let i_conv = 1.5 * (v_conv_d * x[0] + v_conv_q * x[1]) / x[2];

        let di_d = (-r * x[0] + w0 * l * x[1] + v_conv_d - v_gd) / l;
        let di_q = (-r * x[1] - w0 * l * x[0] + v_conv_q) / l;
        let dv_dc = (i_src - i_conv) / c;
        let dx_ff = match self.feedforward {
            Feedforward::Filtered { bandwidth_hz } => {
                2.0 * std::f64::consts::PI * bandwidth_hz * (x[2] - x[3])
            }
            _ => 0.0,
        };
        [di_d, di_q, dv_dc, dx_ff]
    }

    fn rk4_step(&self, t: f64, x: &State, dt: f64, cmd: &Command) -> State {
        let k1 = self.deriv(t, x, cmd);
        let x2 = add_scaled(x, &k1, 0.5 * dt);
        let k2 = self.deriv(t + 0.5 * dt, &x2, cmd);
        let x3 = add_scaled(x, &k2, 0.5 * dt);
        let k3 = self.deriv(t + 0.5 * dt, &x3, cmd);
        let x4 = add_scaled(x, &k3, dt);
        let k4 = self.deriv(t + dt, &x4, cmd);
        let mut out = *x;
        for i in 0..4 {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }
}

fn add_scaled(x: &State, k: &State, h: f64) -> State {
    let mut out = *x;
    for i in 0..4 {
        out[i] += h * k[i];
    }
    out
}

const SATURATION_PATIENCE: usize = 20;

/// Run the averaged simulation. Deterministic: identical configs produce
/// bit-identical traces.
pub fn simulate(
    design: &ConverterDesign,
    ctrl: &ControllerSpec,
    source: &SourceSpec,
    cfg: &SimConfig,
) -> Result<SimTrace> {
    design.validate()?;
    ctrl.validate()?;
    source.validate()?;
    cfg.validate(ctrl)?;
    match (ctrl.frame, &ctrl.regulator) {
        (Frame::Dq, Regulator::Pi { .. }) | (Frame::AlphaBeta, Regulator::Pr { .. }) => {}
        (Frame::Dq, _) => {
            return Err(Error::InvalidDesign {
                field: "controller.regulator",
                reason: "DQ frame requires a PI regulator".into(),
            })
        }
        (Frame::AlphaBeta, _) => {
            return Err(Error::InvalidDesign {
                field: "controller.regulator",
                reason: "alpha-beta frame requires a PR regulator".into(),
            })
        }
    }

    let op = solve_operating_point(design)?;
    let i_ref_d = op.i_d;
    let w0 = design.grid.fundamental_angular_frequency;
    let v_gd = design.v_gd();
    let l = design.filter_inductance;

    let t_ctrl = 1.0 / ctrl.control_rate;
    let n_sub = (t_ctrl / cfg.plant_step).round().max(1.0) as usize;
    let dt = t_ctrl / n_sub as f64;
    let n_ctrl = (cfg.duration / t_ctrl).ceil() as usize;

    let mut reg = match ctrl.regulator {
        Regulator::Pi { k_p, tau_i } => RegulatorState::Pi {
            k_p,
            tau_i,
            d: PiState { integ: 0.0 },
            q: PiState { integ: 0.0 },
        },
        Regulator::Pr {
            k_p,
            k_r,
            resonant_frequency,
            damping,
        } => RegulatorState::Pr {
            k_p,
            alpha: ResonantBiquad::new(k_r, resonant_frequency, damping, t_ctrl),
            beta: ResonantBiquad::new(k_r, resonant_frequency, damping, t_ctrl),
        },
    };

    let plant = Plant {
        design,
        source,
        feedforward: ctrl.feedforward,
    };

    let mut x: State = [0.0, 0.0, source.v_nominal, source.v_nominal];
    let cap = cfg.duration as usize / 1 + 16;
    let mut trace = SimTrace {
        time: Vec::with_capacity(cap),
        v_dc: Vec::new(),
        i_dc_port: Vec::new(),
        i_d: Vec::new(),
        i_q: Vec::new(),
        duty_d: Vec::new(),
        duty_q: Vec::new(),
        sample_rate: 1.0 / (dt * cfg.record_decimation as f64),
    };

    let mut sat_count = 0usize;
    let mut sat_first = 0.0f64;
    let mut sat_mag = 0.0f64;
    let mut step_index = 0usize;

    for k in 0..n_ctrl {
        let t_k = k as f64 * t_ctrl;

        // controller sample
        let cmd = match &mut reg {
            RegulatorState::Pi { k_p, tau_i, d, q } => {
                let u_d = d.step(*k_p, *tau_i, t_ctrl, i_ref_d - x[0]);
                let u_q = q.step(*k_p, *tau_i, t_ctrl, -x[1]);
                Command::Dq {
                    d: u_d - w0 * l * x[1] + v_gd,
                    q: u_q + w0 * l * x[0],
                }
            }
            RegulatorState::Pr { k_p, alpha, beta } => {
                let theta = w0 * t_k;
                let (i_alpha, i_beta) = inverse_park(x[0], x[1], theta);
                let (ref_alpha, ref_beta) = inverse_park(i_ref_d, 0.0, theta);
                let (vg_alpha, vg_beta) = inverse_park(v_gd, 0.0, theta);
                let e_alpha = ref_alpha - i_alpha;
                let e_beta = ref_beta - i_beta;
                Command::AlphaBeta {
                    alpha: *k_p * e_alpha + alpha.step(e_alpha) + vg_alpha,
                    beta: *k_p * e_beta + beta.step(e_beta) + vg_beta,
                }
            }
        };

        // modulation feasibility at the sample instant
        let (d_d, d_q) = plant.duty(t_k, &x, &cmd);
        let d_mag = (d_d * d_d + d_q * d_q).sqrt();
        if d_mag > 1.0 {
            if sat_count == 0 {
                sat_first = t_k;
                sat_mag = d_mag;
            }
            sat_count += 1;
            if sat_count > SATURATION_PATIENCE {
                return Err(Error::ModulationSaturation {
                    first_violation_s: sat_first,
                    duty_magnitude: sat_mag,
                });
            }
        } else {
            sat_count = 0;
        }

        for sub in 0..n_sub {
            let t = t_k + sub as f64 * dt;
            if step_index % cfg.record_decimation == 0 {
                let (dd, dq) = plant.duty(t, &x, &cmd);
                trace.time.push(t);
                trace.v_dc.push(x[2]);
                trace
                    .i_dc_port
                    .push((source.voltage(t) - x[2]) / source.series_resistance);
                trace.i_d.push(x[0]);
                trace.i_q.push(x[1]);
                trace.duty_d.push(dd);
                trace.duty_q.push(dq);
            }
            step_index += 1;
            x = plant.rk4_step(t, &x, dt, &cmd);
        }

        if !x.iter().all(|v| v.is_finite()) || x[2].abs() > 5.0 * source.v_nominal {
            return Err(Error::NumericalDivergence {
                time_s: (k + 1) as f64 * t_ctrl,
                detail: format!(
                    "i_d = {:.3e}, i_q = {:.3e}, v_dc = {:.3e}",
                    x[0], x[1], x[2]
                ),
            });
        }
    }

    Ok(trace)
}
