//! Amplitude-invariant Clarke and Park transforms.
//!
//! With these conventions a balanced three-phase set of amplitude A maps
//! to d = A, q = 0 when the d axis tracks the set, and three-phase power
//! is P = (3/2)(v_d i_d + v_q i_q).

/// Clarke transform, amplitude invariant.
pub fn clarke(a: f64, b: f64, c: f64) -> (f64, f64) {
    let alpha = (2.0 * a - b - c) / 3.0;
    let beta = (b - c) / 3f64.sqrt();
    (alpha, beta)
}

/// Inverse Clarke for zero-sum triples.
pub fn inverse_clarke(alpha: f64, beta: f64) -> (f64, f64, f64) {
    let a = alpha;
    let b = -0.5 * alpha + 0.5 * 3f64.sqrt() * beta;
    let c = -0.5 * alpha - 0.5 * 3f64.sqrt() * beta;
    (a, b, c)
}

/// Rotate stationary-frame quantities into the frame at angle `theta`.
pub fn park(alpha: f64, beta: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (alpha * c + beta * s, -alpha * s + beta * c)
}

/// Rotate rotating-frame quantities back to the stationary frame.
pub fn inverse_park(d: f64, q: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (d * c - q * s, d * s + q * c)
}
