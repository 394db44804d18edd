//! Interconnection stability from source/load impedance curves: minor-loop
//! gain, Middlebrook magnitude check, gain/phase margins at crossovers,
//! and a sampled Nyquist winding number about (-1, 0).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curve::{unwrap_phase, ImpedanceCurve};
use crate::error::{Error, Result};
use crate::types::FrequencyGrid;

/// Relative tolerance for declaring a sample on top of (-1, 0).
const CONTOUR_TOL: f64 = 1e-9;
/// Maximum admissible arg(T+1) step between successive samples [rad].
const MAX_PHASE_STEP: f64 = 30.0 * std::f64::consts::PI / 180.0;

/// Z_source / Z_load on the intersection grid of the two curves.
///
/// Both curves are resampled (log-magnitude / unwrapped phase, linear in
/// log-frequency) onto the union of their sample frequencies clipped to
/// the overlap, then divided pointwise.
pub fn minor_loop_gain(
    z_source: &ImpedanceCurve,
    z_load: &ImpedanceCurve,
) -> Result<ImpedanceCurve> {
    let grid = z_source.intersection_grid(z_load)?;
    let s = z_source.resample(&grid)?;
    let l = z_load.resample(&grid)?;
    let mut values = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let zl = l.values()[k];
        if zl.norm() == 0.0 {
            return Err(Error::DivisionByOpenCircuit {
                frequency_hz: grid[k],
            });
        }
        values.push(s.values()[k] / zl);
    }
    ImpedanceCurve::new(grid, values)
}

/// Middlebrook sufficient condition: |T| stays below unity with the given
/// margin (dB) at every sample.
pub fn middlebrook_check(minor_loop: &ImpedanceCurve, margin_db: f64) -> bool {
    let limit = 10f64.powf(-margin_db / 20.0);
    minor_loop.values().iter().all(|t| t.norm() < limit)
}

/// Frequency bands where |T| exceeds the Middlebrook limit.
pub fn middlebrook_violations(minor_loop: &ImpedanceCurve, margin_db: f64) -> Vec<(f64, f64)> {
    let limit = 10f64.powf(-margin_db / 20.0);
    let mut bands = Vec::new();
    let mut start: Option<f64> = None;
    for (f, t) in minor_loop.iter() {
        if t.norm() >= limit {
            start.get_or_insert(f);
        } else if let Some(s) = start.take() {
            bands.push((s, f));
        }
    }
    if let Some(s) = start {
        bands.push((s, minor_loop.f_max()));
    }
    bands
}

/// Gain/phase margins of the minor-loop gain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmpmMargins {
    /// Worst-case gain margin [dB]; infinite when the phase never
    /// reaches +-180 deg.
    pub gain_margin_db: f64,
    /// Worst-case phase margin [deg]; infinite without a unity-gain
    /// crossover.
    pub phase_margin_deg: f64,
    /// Unity-gain crossover frequencies [Hz], ascending.
    pub crossover_frequencies: Vec<f64>,
    /// (frequency, margin) at each unity-gain crossover.
    pub phase_margins: Vec<(f64, f64)>,
    /// (frequency, margin) at each +-180 deg phase crossing.
    pub gain_margins: Vec<(f64, f64)>,
}

/// Locate unity-gain and +-180 deg crossings by log-linear interpolation
/// between samples; headline margins are the worst case over all
/// crossings.
pub fn gmpm_margins(minor_loop: &ImpedanceCurve) -> GmpmMargins {
    let logf: Vec<f64> = minor_loop.frequencies().iter().map(|f| f.ln()).collect();
    let mag_db = minor_loop.magnitude_db();
    let phase: Vec<f64> = unwrap_phase(minor_loop.values().iter().map(|v| v.arg()))
        .into_iter()
        .map(f64::to_degrees)
        .collect();

    let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);

    let mut phase_margins = Vec::new();
    let mut crossovers = Vec::new();
    for k in 0..mag_db.len() - 1 {
        let (a, b) = (mag_db[k], mag_db[k + 1]);
        let hit = if a == 0.0 {
            Some(0.0)
        } else if a * b < 0.0 {
            Some(a / (a - b))
        } else {
            None
        };
        if let Some(t) = hit {
            let f = lerp(logf[k], logf[k + 1], t).exp();
            let ph = lerp(phase[k], phase[k + 1], t);
            // margin = distance of the phase from the nearest odd
            // multiple of 180 deg
            let margin = (ph.rem_euclid(360.0) - 180.0).abs();
            phase_margins.push((f, margin));
            crossovers.push(f);
        }
    }

    let mut gain_margins = Vec::new();
    for k in 0..phase.len() - 1 {
        let (a, b) = (phase[k], phase[k + 1]);
        let (lo, hi) = (a.min(b), a.max(b));
        // every odd multiple of 180 deg crossed in this interval
        let mut level = 180.0 * (2.0 * ((lo / 360.0 - 0.5).ceil()) + 1.0);
        while level <= hi {
            if level >= lo && b != a {
                let t = (level - a) / (b - a);
                if (0.0..=1.0).contains(&t) {
                    let f = lerp(logf[k], logf[k + 1], t).exp();
                    let m = lerp(mag_db[k], mag_db[k + 1], t);
                    gain_margins.push((f, -m));
                }
            }
            level += 360.0;
        }
    }
    gain_margins.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    gain_margins.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12 * b.0);

    GmpmMargins {
        gain_margin_db: gain_margins
            .iter()
            .map(|&(_, m)| m)
            .fold(f64::INFINITY, f64::min),
        phase_margin_deg: phase_margins
            .iter()
            .map(|&(_, m)| m)
            .fold(f64::INFINITY, f64::min),
        crossover_frequencies: crossovers,
        phase_margins,
        gain_margins,
    }
}

/// Winding number of the sampled Nyquist contour of T about (-1, 0).
///
/// Positive-frequency samples are mirrored to negative frequencies by
/// conjugation; the contour is closed across zero and infinite frequency
/// by straight segments. Sampling must be dense enough that arg(T+1)
/// steps stay below 30 degrees between neighbors.
pub fn nyquist_winding(minor_loop: &ImpedanceCurve) -> Result<i64> {
    let one = Complex64::new(1.0, 0.0);
    let shifted: Vec<Complex64> = minor_loop.values().iter().map(|&t| t + one).collect();
    for (k, z) in shifted.iter().enumerate() {
        let scale = (z.norm() + 1.0).max(minor_loop.values()[k].norm());
        if z.norm() <= CONTOUR_TOL * scale {
            return Err(Error::PointOnContour {
                frequency_hz: minor_loop.frequencies()[k],
            });
        }
    }

    // angle swept by the segment a -> b as seen from the origin
    let step = |a: Complex64, b: Complex64| -> f64 {
        let cross = a.re * b.im - a.im * b.re;
        let dot = a.re * b.re + a.im * b.im;
        cross.atan2(dot)
    };

    let mut total = 0.0f64;
    // data chain at positive frequencies
    for k in 0..shifted.len() - 1 {
        let d = step(shifted[k], shifted[k + 1]);
        if d.abs() >= MAX_PHASE_STEP {
            return Err(Error::RefineGridNeeded {
                frequency_hz: minor_loop.frequencies()[k + 1],
                step_deg: d.abs().to_degrees(),
            });
        }
        total += d;
    }
    // mirrored chain contributes the same sweep (conjugate symmetry,
    // traversed from -f_max to -f_min)
    total *= 2.0;
    // closure across f = 0 (conj(z_first) -> z_first) and across the
    // high-frequency gap (z_last -> conj(z_last)); straight segments
    // subtend less than pi as seen from any point not on them
    total += step(shifted[0].conj(), shifted[0]);
    total += step(*shifted.last().unwrap(), shifted.last().unwrap().conj());

    Ok((total / (2.0 * std::f64::consts::PI)).round() as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Stable => write!(f, "Stable"),
            Verdict::Unstable => write!(f, "Unstable"),
            Verdict::Marginal => write!(f, "Marginal"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StabilityOptions {
    /// Middlebrook magnitude margin [dB].
    pub middlebrook_margin_db: f64,
    /// Below this gain margin the verdict degrades to Marginal [dB].
    pub marginal_gain_db: f64,
    /// Below this phase margin the verdict degrades to Marginal [deg].
    pub marginal_phase_deg: f64,
    /// The winding-number verdict presumes the minor loop has no
    /// right-half-plane poles; this is asserted, not verified.
    pub assume_no_rhp_poles: bool,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            middlebrook_margin_db: 6.0,
            marginal_gain_db: 3.0,
            marginal_phase_deg: 15.0,
            assume_no_rhp_poles: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub minor_loop: ImpedanceCurve,
    pub margins: GmpmMargins,
    pub winding_number: i64,
    pub middlebrook_ok: bool,
    pub verdict: Verdict,
    /// Set when a contour sample fell on (-1, 0) and the winding number
    /// is therefore not well defined.
    pub on_contour: Option<f64>,
    /// Middlebrook violation bands (start, end) [Hz].
    pub violations: Vec<(f64, f64)>,
}

impl StabilityReport {
    pub fn write_text<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "minor-loop samples: {}", self.minor_loop.len())?;
        writeln!(
            w,
            "frequency range: {:.6} Hz .. {:.6} Hz",
            self.minor_loop.f_min(),
            self.minor_loop.f_max()
        )?;
        writeln!(w, "winding number: {}", self.winding_number)?;
        writeln!(w, "middlebrook: {}", if self.middlebrook_ok { "pass" } else { "fail" })?;
        for (a, b) in &self.violations {
            writeln!(w, "  magnitude excursion: {a:.3} Hz .. {b:.3} Hz")?;
        }
        if self.margins.gain_margin_db.is_finite() {
            writeln!(w, "gain margin: {:.3} dB", self.margins.gain_margin_db)?;
        } else {
            writeln!(w, "gain margin: infinite (no 180 deg crossing)")?;
        }
        if self.margins.phase_margin_deg.is_finite() {
            writeln!(w, "phase margin: {:.3} deg", self.margins.phase_margin_deg)?;
        } else {
            writeln!(w, "phase margin: infinite (no unity-gain crossover)")?;
        }
        for (f, m) in &self.margins.phase_margins {
            writeln!(w, "  unity-gain crossover at {f:.3} Hz: phase margin {m:.3} deg")?;
        }
        for (f, m) in &self.margins.gain_margins {
            writeln!(w, "  phase crossing at {f:.3} Hz: gain margin {m:.3} dB")?;
        }
        if let Some(f) = self.on_contour {
            writeln!(w, "contour passes through (-1, 0) near {f:.3} Hz")?;
        }
        writeln!(w, "verdict: {}", self.verdict)?;
        Ok(())
    }
}

/// Full analysis of a minor-loop gain curve.
pub fn analyze_minor_loop(
    minor_loop: &ImpedanceCurve,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    let margins = gmpm_margins(minor_loop);
    let middlebrook_ok = middlebrook_check(minor_loop, opts.middlebrook_margin_db);
    let violations = middlebrook_violations(minor_loop, opts.middlebrook_margin_db);

    let (winding_number, on_contour) = match nyquist_winding(minor_loop) {
        Ok(w) => (w, None),
        Err(Error::PointOnContour { frequency_hz }) => (0, Some(frequency_hz)),
        Err(e) => return Err(e),
    };

    let verdict = if on_contour.is_some() {
        Verdict::Marginal
    } else if winding_number != 0 {
        Verdict::Unstable
    } else if margins.gain_margin_db < opts.marginal_gain_db
        || margins.phase_margin_deg < opts.marginal_phase_deg
    {
        Verdict::Marginal
    } else {
        Verdict::Stable
    };

    Ok(StabilityReport {
        minor_loop: minor_loop.clone(),
        margins,
        winding_number,
        middlebrook_ok,
        verdict,
        on_contour,
        violations,
    })
}

/// Source/load convenience wrapper around [`analyze_minor_loop`].
pub fn analyze_interconnection(
    z_source: &ImpedanceCurve,
    z_load: &ImpedanceCurve,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    let t = minor_loop_gain(z_source, z_load)?;
    analyze_minor_loop(&t, opts)
}

/// Closed-form source impedance fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SourceImpedance {
    /// Flat resistance.
    R { r: f64 },
    /// Series resistance and inductance.
    Rl { r: f64, l: f64 },
    /// Series (r, l) branch paralleled by a capacitor: the classic
    /// underdamped input-filter shape with a peak at 1/(2 pi sqrt(LC)).
    RlcFilter { r: f64, l: f64, c: f64 },
}

impl SourceImpedance {
    pub fn eval(&self, s: Complex64) -> Complex64 {
        match *self {
            SourceImpedance::R { r } => Complex64::new(r, 0.0),
            SourceImpedance::Rl { r, l } => r + s * l,
            SourceImpedance::RlcFilter { r, l, c } => {
                let series = r + s * l;
                series / (1.0 + s * c * series)
            }
        }
    }
}

/// Evaluate a closed-form source impedance on a frequency grid.
pub fn build_source_impedance(
    kind: &SourceImpedance,
    grid: &FrequencyGrid,
) -> Result<ImpedanceCurve> {
    grid.validate()?;
    let freqs = grid.frequencies();
    let values = freqs
        .iter()
        .map(|&f| kind.eval(Complex64::new(0.0, 2.0 * std::f64::consts::PI * f)))
        .collect();
    ImpedanceCurve::new(freqs, values)
}
