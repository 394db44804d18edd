//! Frequency-indexed complex curves: the common currency between the
//! analytic model, the simulator-based extraction and the stability
//! engine. Includes the shared CSV format and Bode-geometry resampling.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const CURVE_CSV_HEADER: &str = "f_hz,re_ohm,im_ohm";

/// Sampled complex curve over strictly increasing positive frequencies.
/// Used both for impedances (ohms) and for the dimensionless minor-loop
/// gain.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceCurve {
    frequencies: Vec<f64>,
    values: Vec<Complex64>,
}

impl ImpedanceCurve {
    pub fn new(frequencies: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::EmptyCurve);
        }
        if frequencies.len() != values.len() {
            return Err(Error::MalformedCurveFile(format!(
                "length mismatch: {} frequencies vs {} values",
                frequencies.len(),
                values.len()
            )));
        }
        if frequencies[0] <= 0.0 || frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::MalformedCurveFile(
                "frequencies must be strictly increasing and positive".into(),
            ));
        }
        if frequencies.iter().any(|f| !f.is_finite())
            || values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::MalformedCurveFile("non-finite sample".into()));
        }
        Ok(ImpedanceCurve {
            frequencies,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn f_min(&self) -> f64 {
        self.frequencies[0]
    }

    pub fn f_max(&self) -> f64 {
        *self.frequencies.last().unwrap()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.frequencies
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn magnitude_db(&self) -> Vec<f64> {
        self.values.iter().map(|v| 20.0 * v.norm().log10()).collect()
    }

    /// Unwrapped phase in degrees (plain +-180 deg jump removal on the
    /// sampled sequence).
    pub fn phase_deg_unwrapped(&self) -> Vec<f64> {
        unwrap_phase(self.values.iter().map(|v| v.arg()))
            .into_iter()
            .map(f64::to_degrees)
            .collect()
    }

    /// Overlapping frequency range with another curve.
    pub fn overlap(&self, other: &ImpedanceCurve) -> Result<(f64, f64)> {
        let lo = self.f_min().max(other.f_min());
        let hi = self.f_max().min(other.f_max());
        if lo >= hi {
            return Err(Error::NoOverlap {
                a_min: self.f_min(),
                a_max: self.f_max(),
                b_min: other.f_min(),
                b_max: other.f_max(),
            });
        }
        Ok((lo, hi))
    }

    /// Union of both curves' sample frequencies clipped to the overlap.
    pub fn intersection_grid(&self, other: &ImpedanceCurve) -> Result<Vec<f64>> {
        let (lo, hi) = self.overlap(other)?;
        let mut grid: Vec<f64> = self
            .frequencies
            .iter()
            .chain(other.frequencies.iter())
            .copied()
            .filter(|&f| f >= lo && f <= hi)
            .collect();
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        if grid.len() < 2 {
            return Err(Error::NoOverlap {
                a_min: self.f_min(),
                a_max: self.f_max(),
                b_min: other.f_min(),
                b_max: other.f_max(),
            });
        }
        Ok(grid)
    }

    /// Resample onto `targets`, interpolating log-magnitude and unwrapped
    /// phase linearly in log-frequency. This preserves Bode-plot geometry,
    /// which is what impedance curves are smooth in. Targets must lie
    /// within the curve's range.
    pub fn resample(&self, targets: &[f64]) -> Result<ImpedanceCurve> {
        let mag: Vec<f64> = self.values.iter().map(|v| v.norm().ln()).collect();
        let phase = unwrap_phase(self.values.iter().map(|v| v.arg()));
        let logf: Vec<f64> = self.frequencies.iter().map(|f| f.ln()).collect();

        let mut values = Vec::with_capacity(targets.len());
        for &f in targets {
            if f < self.f_min() || f > self.f_max() {
                return Err(Error::NoOverlap {
                    a_min: self.f_min(),
                    a_max: self.f_max(),
                    b_min: f,
                    b_max: f,
                });
            }
            let x = f.ln();
            // last interval whose left endpoint is <= x
            let idx = match logf.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
                Ok(i) => {
                    values.push(Complex64::from_polar(mag[i].exp(), phase[i]));
                    continue;
                }
                Err(i) => i - 1,
            };
            let t = (x - logf[idx]) / (logf[idx + 1] - logf[idx]);
            let m = mag[idx] + t * (mag[idx + 1] - mag[idx]);
            let p = phase[idx] + t * (phase[idx + 1] - phase[idx]);
            values.push(Complex64::from_polar(m.exp(), p));
        }
        ImpedanceCurve::new(targets.to_vec(), values)
    }

    /// Write the shared curve CSV format (17 significant digits, so the
    /// roundtrip is lossless for f64).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CURVE_CSV_HEADER}")?;
        for (f, z) in self.iter() {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", f, z.re, z.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<ImpedanceCurve> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedCurveFile("empty file".into()))??;
        if header.trim() != CURVE_CSV_HEADER {
            return Err(Error::MalformedCurveFile(format!(
                "expected header '{CURVE_CSV_HEADER}', got '{header}'"
            )));
        }
        let mut frequencies = Vec::new();
        let mut values = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let mut field = |name: &str| -> Result<f64> {
                cols.next()
                    .ok_or_else(|| {
                        Error::MalformedCurveFile(format!("line {}: missing {name}", n + 2))
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| {
                        Error::MalformedCurveFile(format!("line {}: {name}: {e}", n + 2))
                    })
            };
            frequencies.push(field("f_hz")?);
            let re = field("re_ohm")?;
            let im = field("im_ohm")?;
            values.push(Complex64::new(re, im));
        }
        ImpedanceCurve::new(frequencies, values)
    }

    pub fn from_csv_path(path: &Path) -> Result<ImpedanceCurve> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(BufReader::new(file))
    }
}

/// Remove +-pi jumps from a phase sequence (radians).
pub fn unwrap_phase<I: IntoIterator<Item = f64>>(phases: I) -> Vec<f64> {
    let mut out = Vec::new();
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for p in phases {
        if let Some(prev) = prev {
            let mut d = p + offset - prev;
            while d > std::f64::consts::PI {
                offset -= 2.0 * std::f64::consts::PI;
                d -= 2.0 * std::f64::consts::PI;
            }
            while d <= -std::f64::consts::PI {
                offset += 2.0 * std::f64::consts::PI;
                d += 2.0 * std::f64::consts::PI;
            }
        }
        let unwrapped = p + offset;
        out.push(unwrapped);
        prev = Some(unwrapped);
    }
    out
}

/// Per-point sweep failure, attributed to its frequency.
#[derive(Debug)]
pub struct SweepGap {
    pub frequency_hz: f64,
    pub error: Error,
}

/// Sweep output: the finite-valued samples plus explicit gaps where a
/// point raised an open-circuit or singularity marker.
#[derive(Debug)]
pub struct SweepResult {
    pub curve: ImpedanceCurve,
    /// Frequencies where the impedance is an open circuit.
    pub open_circuit: Vec<f64>,
    /// Other per-point failures.
    pub gaps: Vec<SweepGap>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rc_curve(n: usize) -> ImpedanceCurve {
        // 10 ohm || 1 uF, well-behaved on Bode axes
        let freqs: Vec<f64> = (0..n)
            .map(|i| 10f64.powf(1.0 + 4.0 * i as f64 / (n - 1) as f64))
            .collect();
        let vals = freqs
            .iter()
            .map(|&f| {
                let s = Complex64::new(0.0, 2.0 * PI * f);
                let zc = (s * 1e-6).inv();
                10.0 * zc / (10.0 + zc)
            })
            .collect();
        ImpedanceCurve::new(freqs, vals).unwrap()
    }

    #[test]
    fn rejects_nonmonotonic_frequencies() {
        let bad = ImpedanceCurve::new(vec![1.0, 1.0], vec![Complex64::new(1.0, 0.0); 2]);
        assert!(bad.is_err());
    }

    #[test]
    fn csv_roundtrip_is_lossless() {
        let c = rc_curve(50);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let back = ImpedanceCurve::read_csv(buf.as_slice()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let r = ImpedanceCurve::read_csv("freq,re,im\n1,2,3\n".as_bytes());
        assert!(matches!(r, Err(Error::MalformedCurveFile(_))));
    }

    #[test]
    fn resample_matches_dense_evaluation() {
        let coarse = rc_curve(80);
        let dense = rc_curve(400);
        let resampled = coarse.resample(dense.frequencies()).unwrap();
        for ((_, a), (_, b)) in resampled.iter().zip(dense.iter()) {
            assert!((a.norm() / b.norm() - 1.0).abs() < 1e-3);
            assert!((a.arg() - b.arg()).abs() < 1e-3);
        }
    }

    #[test]
    fn resample_at_existing_sample_is_exact() {
        let c = rc_curve(30);
        let f = c.frequencies()[7];
        let r = c.resample(&[f]).unwrap();
        assert!((r.values()[0] - c.values()[7]).norm() < 1e-12 * c.values()[7].norm());
    }

    #[test]
    fn unwrap_removes_jumps() {
        let seq = vec![3.0, -3.0, 3.0];
        let u = unwrap_phase(seq);
        assert!((u[1] - (2.0 * PI - 3.0)).abs() < 1e-12);
        assert!((u[2] - 3.0 - 2.0 * PI).abs() < 1e-9 || (u[2] - 3.0).abs() < 1e-9);
        // successive steps are all within pi
        assert!(u.windows(2).all(|w| (w[1] - w[0]).abs() <= PI));
    }

    #[test]
    fn no_overlap_is_reported() {
        let a = rc_curve(10);
        let freqs = vec![1e6, 2e6];
        let vals = vec![Complex64::new(1.0, 0.0); 2];
        let b = ImpedanceCurve::new(freqs, vals).unwrap();
        assert!(matches!(a.overlap(&b), Err(Error::NoOverlap { .. })));
    }
}
