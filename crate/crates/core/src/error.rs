use thiserror::Error;

/// Errors shared across the whole toolkit. Every variant carries enough
/// context (frequency, field, time) to locate the failing point.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid design: {field}: {reason}")]
    InvalidDesign { field: &'static str, reason: String },

    #[error("infeasible operating point: |D| = {duty_magnitude:.6} exceeds 1")]
    InfeasibleOperatingPoint { duty_magnitude: f64 },

    #[error("{operation}: transfer function undefined at s = 0")]
    DegenerateFrequency { operation: &'static str },

    #[error("coupled small-signal system is numerically singular at {frequency_hz} Hz")]
    SingularSystem { frequency_hz: f64 },

    #[error("open-circuit input impedance at {frequency_hz} Hz (no small-signal port current)")]
    InfiniteImpedance { frequency_hz: f64 },

    #[error("parallel resonance singularity at {frequency_hz} Hz")]
    ResonantSingularity { frequency_hz: f64 },

    #[error("simulation diverged at t = {time_s:.6} s: {detail}")]
    NumericalDivergence { time_s: f64, detail: String },

    #[error("modulation saturated from t = {first_violation_s:.6} s (|d| = {duty_magnitude:.4})")]
    ModulationSaturation {
        first_violation_s: f64,
        duty_magnitude: f64,
    },

    #[error("cannot window an integer number of {f_target} Hz periods within 0.1%: {detail}")]
    NonCoherentWindow { f_target: f64, detail: String },

    #[error("extracted current phasor at {frequency_hz} Hz is below the noise floor")]
    LowSignal { frequency_hz: f64 },

    #[error("malformed capture: {0}")]
    MalformedCapture(String),

    #[error("malformed curve file: {0}")]
    MalformedCurveFile(String),

    #[error("frequency ranges do not overlap ({a_min}-{a_max} Hz vs {b_min}-{b_max} Hz)")]
    NoOverlap {
        a_min: f64,
        a_max: f64,
        b_min: f64,
        b_max: f64,
    },

    #[error("load impedance has an open-circuit gap at {frequency_hz} Hz")]
    DivisionByOpenCircuit { frequency_hz: f64 },

    #[error("Nyquist sampling too coarse near {frequency_hz} Hz (phase step {step_deg:.1} deg)")]
    RefineGridNeeded { frequency_hz: f64, step_deg: f64 },

    #[error("minor-loop sample within tolerance of the critical point at {frequency_hz} Hz")]
    PointOnContour { frequency_hz: f64 },

    #[error("empty curve")]
    EmptyCurve,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
