//! Small-signal DC input impedance of grid-tied current-controlled
//! voltage-source converters: closed-form coupled transfer-function model,
//! a reduced negative-resistance/capacitor model, a switching-averaged
//! time-domain simulator with software frequency-response extraction, and
//! impedance-ratio stability analysis of source/load interconnections.
//!
//! Conventions used throughout:
//! - amplitude-invariant Clarke/Park transforms; three-phase power is
//!   (3/2)(v_d i_d + v_q i_q)
//! - peak phasor convention: x(t) = A sin(wt + phi) maps to A e^{j phi}
//! - DC-port current is positive into the converter, so a constant-power
//!   load reads a phase near 180 degrees

pub mod analytic;
pub mod compare;
pub mod control_tf;
pub mod curve;
pub mod error;
pub mod fra;
pub mod operating_point;
pub mod reduced;
pub mod sim;
pub mod stability;
pub mod svg;
pub mod transforms;
pub mod types;

pub use curve::{ImpedanceCurve, SweepGap, SweepResult, CURVE_CSV_HEADER};
pub use error::{Error, Result};
pub use types::{
    ControllerSpec, ConverterDesign, Feedforward, Frame, FrequencyGrid, GridSpec, OperatingPoint,
    Regulator,
};
