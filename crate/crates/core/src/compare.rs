//! Curve comparison metrics and the canned study scenarios, with plain
//! text report assembly.

use serde::{Deserialize, Serialize};

use crate::analytic::sweep_analytic;
use crate::curve::ImpedanceCurve;
use crate::error::Result;
use crate::fra::{sweep_fra_with, FraOptions};
use crate::reduced::{sweep_reduced_at, ReducedModel};
use crate::stability::{analyze_interconnection, build_source_impedance, SourceImpedance,
    StabilityOptions, Verdict};
use crate::types::{ControllerSpec, ConverterDesign, Feedforward, Frame, FrequencyGrid, GridSpec,
    Regulator};

/// Agreement thresholds used for pass/fail lines. The source studies are
/// Bode-visual only, so the numbers are this tool's choice; every report
/// footer restates them.
pub const MATCH_MAG_DB: f64 = 1.0;
pub const MATCH_PHASE_DEG: f64 = 5.0;
pub const MISMATCH_MAG_DB: f64 = 3.0;

/// Per-band worst-case deviation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandDeviation {
    pub f_lo: f64,
    pub f_hi: f64,
    pub max_mag_dev_db: f64,
    pub max_phase_dev_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviationMetrics {
    pub max_mag_dev_db: f64,
    pub max_phase_dev_deg: f64,
    pub worst_mag_frequency: f64,
    pub worst_phase_frequency: f64,
    pub per_band: Vec<BandDeviation>,
}

/// Worst-case magnitude (dB) and unwrapped-phase (deg) deviation between
/// two curves on the union grid of their overlap. Symmetric in (a, b).
pub fn deviation_metrics(
    a: &ImpedanceCurve,
    b: &ImpedanceCurve,
    bands: Option<&[(f64, f64)]>,
) -> Result<DeviationMetrics> {
    let grid = a.intersection_grid(b)?;
    let ra = a.resample(&grid)?;
    let rb = b.resample(&grid)?;
    let mag_a = ra.magnitude_db();
    let mag_b = rb.magnitude_db();
    let ph_a = ra.phase_deg_unwrapped();
    let ph_b = rb.phase_deg_unwrapped();

    // the two unwrappings may sit on branches 360 k deg apart; align once
    let branch = 360.0 * ((ph_a[0] - ph_b[0]) / 360.0).round();

    let mut metrics = DeviationMetrics {
        max_mag_dev_db: 0.0,
        max_phase_dev_deg: 0.0,
        worst_mag_frequency: grid[0],
        worst_phase_frequency: grid[0],
        per_band: Vec::new(),
    };
    let mut mag_dev = Vec::with_capacity(grid.len());
    let mut ph_dev = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let dm = (mag_a[k] - mag_b[k]).abs();
        let dp = (ph_a[k] - ph_b[k] - branch).abs();
        mag_dev.push(dm);
        ph_dev.push(dp);
        if dm > metrics.max_mag_dev_db {
            metrics.max_mag_dev_db = dm;
            metrics.worst_mag_frequency = grid[k];
        }
        if dp > metrics.max_phase_dev_deg {
            metrics.max_phase_dev_deg = dp;
            metrics.worst_phase_frequency = grid[k];
        }
    }
    if let Some(bands) = bands {
        for &(f_lo, f_hi) in bands {
            let mut band = BandDeviation {
                f_lo,
                f_hi,
                max_mag_dev_db: 0.0,
                max_phase_dev_deg: 0.0,
            };
            for k in 0..grid.len() {
                if grid[k] >= f_lo && grid[k] <= f_hi {
                    band.max_mag_dev_db = band.max_mag_dev_db.max(mag_dev[k]);
                    band.max_phase_dev_deg = band.max_phase_dev_deg.max(ph_dev[k]);
                }
            }
            metrics.per_band.push(band);
        }
    }
    Ok(metrics)
}

/// Caption-parameter fixtures for the three studied power levels plus the
/// measured-hardware DC-link parameters.
pub mod fixtures {
    use super::*;

    fn base(p_out: f64, l: f64, c: f64) -> ConverterDesign {
        ConverterDesign {
            v_dc_nominal: 700.0,
            p_out,
            efficiency: 1.0,
            filter_inductance: l,
            filter_resistance: 0.0,
            dc_capacitance: c,
            dc_cap_esr: 0.0,
            switching_frequency: 10e3,
            grid: GridSpec::default_lv_grid(),
        }
    }

    /// 5 kW unit: L = 1 mH, C_i = 24 uF, k_p = 1, tau_i = 14.3 ms.
    pub fn five_kw() -> (ConverterDesign, ControllerSpec) {
        (base(5e3, 1e-3, 24e-6), dq_pi(1.0, 14.3e-3))
    }

    /// 40 kW unit: L = 0.3 mH, C_i = 80 uF, k_p = 0.3, tau_i = 4.3 ms.
    pub fn forty_kw() -> (ConverterDesign, ControllerSpec) {
        (base(40e3, 0.3e-3, 80e-6), dq_pi(0.3, 4.3e-3))
    }

    /// 150 kW unit: L = 0.06 mH, C_i = 270 uF, k_p = 0.06,
    /// tau_i = 0.875 ms.
    pub fn one_fifty_kw() -> (ConverterDesign, ControllerSpec) {
        (base(150e3, 0.06e-3, 270e-6), dq_pi(0.06, 0.875e-3))
    }

    /// Measured lab DC-link: 14.1 mF bulk capacitance with 5 mOhm ESR
    /// behind a 0.5 mH line inductor.
    pub fn lab_dc_link() -> ConverterDesign {
        let mut d = base(5e3, 0.5e-3, 14.1e-3);
        d.dc_cap_esr = 0.005;
        d
    }

    pub fn dq_pi(k_p: f64, tau_i: f64) -> ControllerSpec {
        ControllerSpec {
            frame: Frame::Dq,
            regulator: Regulator::Pi { k_p, tau_i },
            feedforward: Feedforward::Ideal,
            control_rate: 10e3,
        }
    }

    /// Stationary-frame regulator tuned like the 5 kW PI: same k_p, the
    /// integral action moved into the resonant term (k_r = k_p / tau_i).
    pub fn alpha_beta_pr(k_p: f64, tau_i: f64, w0: f64) -> ControllerSpec {
        ControllerSpec {
            frame: Frame::AlphaBeta,
            regulator: Regulator::Pr {
                k_p,
                k_r: k_p / tau_i,
                resonant_frequency: w0,
                damping: 0.0,
            },
            feedforward: Feedforward::Ideal,
            control_rate: 10e3,
        }
    }

    /// Proportional gain giving a first-order current-loop bandwidth of
    /// `f_bw` with plant inductance `l` (k_p = 2 pi f_bw L).
    pub fn gain_for_bandwidth(f_bw: f64, l: f64) -> f64 {
        2.0 * std::f64::consts::PI * f_bw * l
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Powers,
    Bandwidth,
    AlphaBeta,
    Feedforward,
    All,
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "powers" => Ok(Suite::Powers),
            "bandwidth" => Ok(Suite::Bandwidth),
            "alphabeta" => Ok(Suite::AlphaBeta),
            "feedforward" => Ok(Suite::Feedforward),
            "all" => Ok(Suite::All),
            other => Err(format!(
                "unknown suite '{other}' (powers|bandwidth|alphabeta|feedforward|all)"
            )),
        }
    }
}

/// One scenario's outcome: pass/fail, human-readable lines, and the
/// curves that back them (label, curve) for artifact emission.
#[derive(Debug)]
pub struct ScenarioReport {
    pub name: String,
    pub pass: bool,
    pub lines: Vec<String>,
    pub curves: Vec<(String, ImpedanceCurve)>,
}

impl ScenarioReport {
    pub fn write_text<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "scenario: {}", self.name)?;
        for line in &self.lines {
            writeln!(w, "  {line}")?;
        }
        writeln!(w, "  result: {}", if self.pass { "PASS" } else { "FAIL" })?;
        writeln!(
            w,
            "  thresholds (tool-chosen): match <= {MATCH_MAG_DB} dB / {MATCH_PHASE_DEG} deg, \
             mismatch flag > {MISMATCH_MAG_DB} dB"
        )?;
        Ok(())
    }
}

/// Options threaded through suite runs; defaults match the acceptance
/// settings, tests can cheapen the FRA legs.
#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub fra: FraOptions,
    /// Points in each FRA sweep leg.
    pub fra_points: usize,
    /// Skip simulator-based legs entirely (analytic studies only).
    pub skip_fra: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            fra: FraOptions::default(),
            fra_points: 12,
            skip_fra: false,
        }
    }
}

pub fn run_scenario_suite(suite: Suite, opts: &SuiteOptions) -> Result<Vec<ScenarioReport>> {
    match suite {
        Suite::Powers => suite_powers(opts),
        Suite::Bandwidth => suite_bandwidth(opts),
        Suite::AlphaBeta => suite_alpha_beta(opts),
        Suite::Feedforward => suite_feedforward(opts),
        Suite::All => {
            let mut all = suite_powers(opts)?;
            all.extend(suite_bandwidth(opts)?);
            all.extend(suite_alpha_beta(opts)?);
            all.extend(suite_feedforward(opts)?);
            Ok(all)
        }
    }
}

fn reduced_on(design: &ConverterDesign, frequencies: &[f64]) -> Result<ImpedanceCurve> {
    sweep_reduced_at(&ReducedModel::from_design(design)?, frequencies)
}

/// Measurement band shared by the sweep legs: one decade below the
/// corner region up to the averaged-model ceiling f_sw / 5.
fn study_grid(points: usize) -> FrequencyGrid {
    FrequencyGrid {
        f_min: 10.0,
        f_max: 2000.0,
        points,
    }
}

fn suite_powers(opts: &SuiteOptions) -> Result<Vec<ScenarioReport>> {
    let cases = [
        ("powers/5kW", fixtures::five_kw()),
        ("powers/40kW", fixtures::forty_kw()),
        ("powers/150kW", fixtures::one_fifty_kw()),
    ];
    let mut reports = Vec::new();
    for (name, (design, ctrl)) in cases {
        let grid = study_grid(40);
        let (_, z_t) = sweep_analytic(&design, &ctrl, &grid)?;
        let reduced = reduced_on(&design, z_t.curve.frequencies())?;
        let m_analytic = deviation_metrics(&z_t.curve, &reduced, None)?;

        let mut lines = vec![format!(
            "analytic vs reduced: {:.3e} dB / {:.3e} deg max deviation",
            m_analytic.max_mag_dev_db, m_analytic.max_phase_dev_deg
        )];
        let mut curves = vec![
            ("analytic".to_string(), z_t.curve.clone()),
            ("reduced".to_string(), reduced.clone()),
        ];
        let mut pass = m_analytic.max_mag_dev_db <= MATCH_MAG_DB
            && m_analytic.max_phase_dev_deg <= MATCH_PHASE_DEG;

        if !opts.skip_fra {
            let fra = sweep_fra_with(&design, &ctrl, &study_grid(opts.fra_points), &opts.fra)?;
            let m_fra = deviation_metrics(&fra.curve, &reduced, None)?;
            lines.push(format!(
                "measured (simulator) vs reduced: {:.3} dB / {:.3} deg max deviation \
                 (worst at {:.1} Hz)",
                m_fra.max_mag_dev_db, m_fra.max_phase_dev_deg, m_fra.worst_mag_frequency
            ));
            pass = pass
                && m_fra.max_mag_dev_db <= MATCH_MAG_DB
                && m_fra.max_phase_dev_deg <= MATCH_PHASE_DEG
                && fra.gaps.is_empty();
            curves.push(("measured".to_string(), fra.curve));
        }

        reports.push(ScenarioReport {
            name: name.to_string(),
            pass,
            lines,
            curves,
        });
    }
    Ok(reports)
}

fn suite_bandwidth(opts: &SuiteOptions) -> Result<Vec<ScenarioReport>> {
    let (design, _) = fixtures::five_kw();
    // limited-bandwidth voltage sensing makes the controller tuning
    // visible in the input impedance; with instantaneous sensing the
    // cancellation is exact and both tunings would be indistinguishable
    let sensing = Feedforward::Filtered { bandwidth_hz: 1000.0 };
    let tau_i = 14.3e-3;
    let fast = {
        let mut c = fixtures::dq_pi(1.0, tau_i);
        c.feedforward = sensing;
        c
    };
    let slow = {
        let k_p = fixtures::gain_for_bandwidth(15.0, design.filter_inductance);
        let mut c = fixtures::dq_pi(k_p, tau_i);
        c.feedforward = sensing;
        c
    };

    let grid = study_grid(60);
    let (_, z_fast) = sweep_analytic(&design, &fast, &grid)?;
    let (_, z_slow) = sweep_analytic(&design, &slow, &grid)?;
    let reduced = reduced_on(&design, z_fast.curve.frequencies())?;

    let band = [(10.0, 100.0)];
    let m_fast = deviation_metrics(&z_fast.curve, &reduced, Some(&band))?;
    let m_slow = deviation_metrics(&z_slow.curve, &reduced, Some(&band))?;
    let dev_fast = m_fast.per_band[0].max_mag_dev_db;
    let dev_slow = m_slow.per_band[0].max_mag_dev_db;

    // both tunings against a stiff resistive source: the deviation must
    // not be instability-relevant
    let zs_grid = FrequencyGrid::new(10.0, 2000.0, 200)?;
    let z_source = build_source_impedance(&SourceImpedance::R { r: 0.1 }, &zs_grid)?;
    let stab_opts = StabilityOptions::default();
    let dense = FrequencyGrid::new(10.0, 2000.0, 200)?;
    let (_, zf_dense) = sweep_analytic(&design, &fast, &dense)?;
    let (_, zs_dense) = sweep_analytic(&design, &slow, &dense)?;
    let v_fast = analyze_interconnection(&z_source, &zf_dense.curve, &stab_opts)?.verdict;
    let v_slow = analyze_interconnection(&z_source, &zs_dense.curve, &stab_opts)?.verdict;

    let mut lines = vec![
        format!("160 Hz tuning, 10-100 Hz band: {dev_fast:.3} dB max deviation from reduced"),
        format!("15 Hz tuning, 10-100 Hz band: {dev_slow:.3} dB max deviation from reduced"),
        format!("slow > fast deviation ordering: {}", dev_slow > dev_fast),
        format!("verdict vs 0.1 ohm source: fast = {v_fast}, slow = {v_slow}"),
    ];
    let mut curves = vec![
        ("analytic-160Hz".to_string(), z_fast.curve),
        ("analytic-15Hz".to_string(), z_slow.curve),
        ("reduced".to_string(), reduced),
    ];
    let mut pass = dev_slow > dev_fast && v_fast == Verdict::Stable && v_slow == Verdict::Stable;

    if !opts.skip_fra {
        let fra = sweep_fra_with(&design, &slow, &study_grid(opts.fra_points), &opts.fra)?;
        let m = deviation_metrics(&fra.curve, &curves[1].1, None)?;
        lines.push(format!(
            "measured (simulator) vs analytic, 15 Hz tuning: {:.3} dB / {:.3} deg",
            m.max_mag_dev_db, m.max_phase_dev_deg
        ));
        pass = pass && m.max_mag_dev_db <= MATCH_MAG_DB && m.max_phase_dev_deg <= MATCH_PHASE_DEG;
        curves.push(("measured-15Hz".to_string(), fra.curve));
    }

    Ok(vec![ScenarioReport {
        name: "bandwidth".to_string(),
        pass,
        lines,
        curves,
    }])
}

fn suite_alpha_beta(opts: &SuiteOptions) -> Result<Vec<ScenarioReport>> {
    let (design, dq_ctrl) = fixtures::five_kw();
    let pr_ctrl = fixtures::alpha_beta_pr(
        1.0,
        14.3e-3,
        design.grid.fundamental_angular_frequency,
    );

    let grid = study_grid(40);
    let (_, z_t) = sweep_analytic(&design, &dq_ctrl, &grid)?;
    let reduced = reduced_on(&design, z_t.curve.frequencies())?;

    let mut lines = Vec::new();
    let mut curves = vec![
        ("analytic-dq".to_string(), z_t.curve.clone()),
        ("reduced".to_string(), reduced.clone()),
    ];
    let mut pass = true;

    if !opts.skip_fra {
        let fra = sweep_fra_with(&design, &pr_ctrl, &study_grid(opts.fra_points), &opts.fra)?;
        let m = deviation_metrics(&fra.curve, &reduced, None)?;
        lines.push(format!(
            "stationary-frame measured vs reduced: {:.3} dB / {:.3} deg max deviation",
            m.max_mag_dev_db, m.max_phase_dev_deg
        ));
        pass = m.max_mag_dev_db <= MATCH_MAG_DB
            && m.max_phase_dev_deg <= MATCH_PHASE_DEG
            && fra.gaps.is_empty();
        curves.push(("measured-alphabeta".to_string(), fra.curve));
    } else {
        lines.push("simulator legs skipped".to_string());
    }

    Ok(vec![ScenarioReport {
        name: "alphabeta".to_string(),
        pass,
        lines,
        curves,
    }])
}

fn suite_feedforward(opts: &SuiteOptions) -> Result<Vec<ScenarioReport>> {
    let (design, base_ctrl) = fixtures::five_kw();
    let modes: [(&str, Feedforward); 3] = [
        ("ideal", Feedforward::Ideal),
        ("filtered-1kHz", Feedforward::Filtered { bandwidth_hz: 1000.0 }),
        ("constant", Feedforward::Constant),
    ];

    let grid = FrequencyGrid::new(10.0, 1000.0, 60)?;
    let mut lines = Vec::new();
    let mut curves = Vec::new();
    let mut devs = Vec::new();
    for (label, ff) in modes {
        let mut ctrl = base_ctrl;
        ctrl.feedforward = ff;
        let (_, z_t) = sweep_analytic(&design, &ctrl, &grid)?;
        let reduced = reduced_on(&design, z_t.curve.frequencies())?;
        let m = deviation_metrics(&z_t.curve, &reduced, None)?;
        lines.push(format!(
            "{label}: {:.3} dB max deviation from reduced (worst at {:.1} Hz)",
            m.max_mag_dev_db, m.worst_mag_frequency
        ));
        curves.push((format!("analytic-{label}"), z_t.curve));
        devs.push(m.max_mag_dev_db);

        if !opts.skip_fra && label == "constant" {
            let fra = sweep_fra_with(&design, &ctrl, &study_grid(opts.fra_points), &opts.fra)?;
            curves.push((format!("measured-{label}"), fra.curve));
        }
    }
    let (ideal, filtered, constant) = (devs[0], devs[1], devs[2]);
    let pass = ideal < 0.5
        && filtered > 1.5
        && constant > MISMATCH_MAG_DB
        && constant > filtered
        && filtered > ideal;
    lines.push(format!(
        "ordering constant > filtered > ideal: {}",
        constant > filtered && filtered > ideal
    ));

    Ok(vec![ScenarioReport {
        name: "feedforward".to_string(),
        pass,
        lines,
        curves,
    }])
}
