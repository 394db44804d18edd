//! `invz` — converter input-impedance modeling and DC-bus stability
//! analysis from the command line.
//!
//! Exit codes: 0 success, 2 validation error (bad config, bad arguments,
//! unreadable input), 3 numerical error (divergence, saturation,
//! singular points, grid too coarse), 4 scenario threshold failure.
//!
//! Config files are JSON with top-level keys `design`, `controller` and
//! optionally `source` and `sim`, mapping one-to-one onto the library
//! types. SI units only.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use invz_core::analytic::sweep_analytic;
use invz_core::compare::{run_scenario_suite, Suite, SuiteOptions};
use invz_core::curve::ImpedanceCurve;
use invz_core::fra::{
    extract_impedance_with, process_capture_path, sweep_fra_with, FraOptions,
};
use invz_core::reduced::{sweep_reduced, ReducedModel};
use invz_core::sim::{simulate, SimConfig, SourceSpec};
use invz_core::stability::{
    analyze_interconnection, SourceImpedance, StabilityOptions,
};
use invz_core::svg::emit_bode_svg;
use invz_core::{ControllerSpec, ConverterDesign, FrequencyGrid};

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "\nconventions:",
    "\n  abc->dq transform: amplitude-invariant (peak-valued dq quantities)",
    "\n  phasor: single-bin DFT, peak convention A sin(wt + p) -> A e^{jp}",
    "\n  impedance sign: current flowing into the converter DC port is positive",
);

#[derive(Parser)]
#[command(
    name = "invz",
    version,
    long_version = LONG_VERSION,
    about = "Input impedance and DC-bus stability toolkit for grid-tie converters"
)]
struct Cli {
    /// Cap on worker threads for sweep parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form small-signal sweep of the total DC input impedance.
    SweepAnalytic {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        grid: GridArg,
        /// Output CSV (f_hz,re_ohm,im_ohm).
        #[arg(long)]
        out: PathBuf,
        /// Also render a Bode plot of bridge and total impedance.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Sweep of the reduced negative-resistance-plus-capacitor model.
    SweepReduced {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        grid: GridArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time-domain run; writes the recorded trace as CSV.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        /// Simulated time [s]; overrides `sim.duration` from the config.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure the input impedance at one frequency by simulated
    /// injection.
    Extract {
        #[command(flatten)]
        config: ConfigArg,
        /// Perturbation frequency [Hz].
        #[arg(long)]
        freq: f64,
        /// Injection amplitude [V]; default 1% of the nominal bus.
        #[arg(long)]
        amplitude: Option<f64>,
    },
    /// Injection measurement swept over a frequency grid.
    ExtractSweep {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        grid: GridArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract one impedance point from a recorded voltage/current
    /// capture (CSV: t_s,v_V,i_A).
    ProcessCapture {
        #[arg(long)]
        capture: PathBuf,
        #[arg(long)]
        freq: f64,
    },
    /// Minor-loop stability verdict for a source/load impedance pair.
    Stability {
        /// Source impedance: a curve CSV, or `builtin:r:R`,
        /// `builtin:rl:R,L`, `builtin:rlc:R,L,C` (SI units).
        #[arg(long)]
        source: String,
        /// Load impedance curve CSV.
        #[arg(long)]
        load: PathBuf,
        /// Text report destination.
        #[arg(long)]
        report: PathBuf,
        /// Middlebrook screening margin [dB].
        #[arg(long, default_value_t = 6.0)]
        margin_db: f64,
        /// Assert that both impedances come from individually stable
        /// subsystems (no right-half-plane poles in the minor loop).
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        assume_no_rhp_poles: bool,
    },
    /// Run a named study suite and write one report file per scenario.
    Scenarios {
        #[arg(long)]
        suite: Suite,
        /// Directory receiving the report files.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Analytic legs only; skip the simulator-based measurements.
        #[arg(long)]
        skip_fra: bool,
        /// Points per simulator-based sweep leg.
        #[arg(long, default_value_t = 12)]
        fra_points: usize,
    },
}

#[derive(Args)]
struct ConfigArg {
    /// JSON config with `design`, `controller` [, `source`, `sim`].
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct GridArg {
    /// Logarithmic frequency grid as fmin,fmax,points.
    #[arg(long, value_parser = parse_grid)]
    grid: FrequencyGrid,
}

fn parse_grid(s: &str) -> Result<FrequencyGrid, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected fmin,fmax,points".into());
    }
    let f_min: f64 = parts[0].trim().parse().map_err(|e| format!("fmin: {e}"))?;
    let f_max: f64 = parts[1].trim().parse().map_err(|e| format!("fmax: {e}"))?;
    let points: usize = parts[2].trim().parse().map_err(|e| format!("points: {e}"))?;
    FrequencyGrid::new(f_min, f_max, points).map_err(|e| e.to_string())
}

/// Top-level config schema. Unknown keys are ignored so configs can
/// carry free-form `description` annotations.
#[derive(Debug, Serialize, Deserialize)]
struct Config {
    #[serde(default)]
    description: Option<String>,
    design: ConverterDesign,
    controller: ControllerSpec,
    #[serde(default)]
    source: Option<SourceSpec>,
    #[serde(default)]
    sim: Option<SimConfig>,
}

/// A failure carrying its process exit code.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn validation(msg: impl Into<String>) -> Self {
        Failure {
            code: 2,
            msg: msg.into(),
        }
    }
}

impl From<invz_core::Error> for Failure {
    fn from(e: invz_core::Error) -> Self {
        use invz_core::Error::*;
        let code = match e {
            InvalidDesign { .. } | MalformedCapture(_) | MalformedCurveFile(_) | EmptyCurve
            | NoOverlap { .. } | Io(_) => 2,
            _ => 3,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn load_config(path: &Path) -> CliResult<Config> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("config {}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let cfg: Config = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let inner = e.inner().to_string();
        let at = e.path().to_string();
        // fold serde's "missing field `x`" into a full field path
        let detail = if let Some(field) = inner
            .strip_prefix("missing field `")
            .and_then(|r| r.split('`').next())
        {
            format!("missing field `{at}.{field}`")
        } else {
            format!("at `{at}`: {inner}")
        };
        Failure::validation(format!("config {}: {detail}", path.display()))
    })?;
    cfg.design.validate()?;
    cfg.controller.validate()?;
    if let Some(source) = &cfg.source {
        source.validate()?;
    }
    if let Some(sim) = &cfg.sim {
        sim.validate(&cfg.controller)?;
    }
    Ok(cfg)
}

/// Write through a same-directory temp file and rename into place, so a
/// failed run never leaves a partial artifact behind.
fn write_atomic(
    path: &Path,
    write: impl FnOnce(&mut dyn Write) -> invz_core::Result<()>,
) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| Failure::validation(format!("{}: {e}", dir.display())))?;
    write(&mut tmp)?;
    tmp.flush().map_err(invz_core::Error::Io)?;
    tmp.persist(path)
        .map_err(|e| Failure::validation(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

/// The averaged plant model ignores switching ripple; results above
/// f_sw / 5 are outside its validity band.
fn warn_model_ceiling(grid: &FrequencyGrid, f_sw: f64) {
    let ceiling = f_sw / 5.0;
    if grid.f_max > ceiling {
        eprintln!(
            "warning: grid extends to {} Hz; the averaged model is only \
             trustworthy up to f_sw/5 = {ceiling} Hz",
            grid.f_max
        );
    }
}

fn report_gaps(result: &invz_core::SweepResult) {
    for f in &result.open_circuit {
        eprintln!("note: open-circuit input impedance at {f} Hz (point omitted)");
    }
    for gap in &result.gaps {
        eprintln!("note: {} Hz omitted: {}", gap.frequency_hz, gap.error);
    }
}

fn print_point(f: f64, z: Complex64) {
    println!(
        "f = {f} Hz: Z = {:.6} {} j{:.6} ohm  (|Z| = {:.6} ohm, {:.3} deg)",
        z.re,
        if z.im < 0.0 { "-" } else { "+" },
        z.im.abs(),
        z.norm(),
        z.arg().to_degrees()
    );
}

fn parse_source_arg(spec: &str, load: &ImpedanceCurve) -> CliResult<ImpedanceCurve> {
    if let Some(rest) = spec.strip_prefix("builtin:") {
        let (kind, nums) = rest.split_once(':').unwrap_or((rest, ""));
        let vals: Vec<f64> = if nums.is_empty() {
            Vec::new()
        } else {
            nums.split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::validation(format!("--source {spec}: {e}")))?
        };
        let src = match (kind, vals.as_slice()) {
            ("r", [r]) => SourceImpedance::R { r: *r },
            ("rl", [r, l]) => SourceImpedance::Rl { r: *r, l: *l },
            ("rlc", [r, l, c]) => SourceImpedance::RlcFilter {
                r: *r,
                l: *l,
                c: *c,
            },
            _ => {
                return Err(Failure::validation(format!(
                    "--source {spec}: expected builtin:r:R, builtin:rl:R,L \
                     or builtin:rlc:R,L,C"
                )))
            }
        };
        let freqs = load.frequencies().to_vec();
        let values = freqs
            .iter()
            .map(|&f| src.eval(Complex64::new(0.0, 2.0 * std::f64::consts::PI * f)))
            .collect();
        Ok(ImpedanceCurve::new(freqs, values)?)
    } else {
        Ok(ImpedanceCurve::from_csv_path(Path::new(spec))?)
    }
}

/// Options for simulator-based measurements, honoring the config's
/// source resistance and plant step when present.
fn fra_options(cfg: &Config, amplitude: Option<f64>) -> FraOptions {
    let mut opts = FraOptions {
        amplitude,
        ..FraOptions::default()
    };
    if let Some(source) = &cfg.source {
        opts.source_resistance = source.series_resistance;
    }
    if let Some(sim) = &cfg.sim {
        opts.plant_step = sim.plant_step;
        opts.record_decimation = sim.record_decimation;
    }
    opts
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::validation("--jobs must be >= 1"));
        }
        // ignore the error if a pool already exists (e.g. under test)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }

    match cli.cmd {
        Cmd::SweepAnalytic {
            config,
            grid,
            out,
            svg,
        } => {
            let cfg = load_config(&config.config)?;
            warn_model_ceiling(&grid.grid, cfg.design.switching_frequency);
            let (z_i, z_t) = sweep_analytic(&cfg.design, &cfg.controller, &grid.grid)?;
            report_gaps(&z_i);
            report_gaps(&z_t);
            write_atomic(&out, |w| z_t.curve.write_csv(w))?;
            if let Some(svg_path) = svg {
                let title = cfg
                    .description
                    .clone()
                    .unwrap_or_else(|| "input impedance".to_string());
                write_atomic(&svg_path, |w| {
                    emit_bode_svg(
                        &[("bridge", &z_i.curve), ("total", &z_t.curve)],
                        &title,
                        w,
                    )
                })?;
            }
            Ok(())
        }
        Cmd::SweepReduced { config, grid, out } => {
            let cfg = load_config(&config.config)?;
            warn_model_ceiling(&grid.grid, cfg.design.switching_frequency);
            let model = ReducedModel::from_design(&cfg.design)?;
            let curve = sweep_reduced(&model, &grid.grid)?;
            write_atomic(&out, |w| curve.write_csv(w))
        }
        Cmd::Simulate {
            config,
            duration,
            out,
        } => {
            let cfg = load_config(&config.config)?;
            let source = cfg.source.ok_or_else(|| {
                Failure::validation("config: `simulate` requires a `source` section")
            })?;
            let mut sim = cfg.sim.ok_or_else(|| {
                Failure::validation("config: `simulate` requires a `sim` section")
            })?;
            if let Some(d) = duration {
                sim.duration = d;
            }
            sim.validate(&cfg.controller)?;
            let trace = simulate(&cfg.design, &cfg.controller, &source, &sim)?;
            write_atomic(&out, |w| trace.write_csv(w))
        }
        Cmd::Extract {
            config,
            freq,
            amplitude,
        } => {
            let cfg = load_config(&config.config)?;
            let opts = fra_options(&cfg, amplitude);
            let z = extract_impedance_with(&cfg.design, &cfg.controller, freq, &opts)?;
            print_point(freq, z);
            Ok(())
        }
        Cmd::ExtractSweep { config, grid, out } => {
            let cfg = load_config(&config.config)?;
            let opts = fra_options(&cfg, None);
            let result = sweep_fra_with(&cfg.design, &cfg.controller, &grid.grid, &opts)?;
            report_gaps(&result);
            if result.curve.is_empty() {
                return Err(Failure {
                    code: 3,
                    msg: "every point of the sweep failed".into(),
                });
            }
            write_atomic(&out, |w| result.curve.write_csv(w))
        }
        Cmd::ProcessCapture { capture, freq } => {
            let z = process_capture_path(&capture, freq)?;
            print_point(freq, z);
            Ok(())
        }
        Cmd::Stability {
            source,
            load,
            report,
            margin_db,
            assume_no_rhp_poles,
        } => {
            let z_load = ImpedanceCurve::from_csv_path(&load)?;
            let z_source = parse_source_arg(&source, &z_load)?;
            let opts = StabilityOptions {
                middlebrook_margin_db: margin_db,
                assume_no_rhp_poles,
                ..StabilityOptions::default()
            };
            let verdict = analyze_interconnection(&z_source, &z_load, &opts)?;
            write_atomic(&report, |w| verdict.write_text(w))?;
            println!("verdict: {}", verdict.verdict);
            Ok(())
        }
        Cmd::Scenarios {
            suite,
            out_dir,
            skip_fra,
            fra_points,
        } => {
            fs::create_dir_all(&out_dir)
                .map_err(|e| Failure::validation(format!("{}: {e}", out_dir.display())))?;
            let opts = SuiteOptions {
                skip_fra,
                fra_points,
                ..SuiteOptions::default()
            };
            let reports = run_scenario_suite(suite, &opts)?;
            let mut all_pass = true;
            for r in &reports {
                let file = out_dir.join(format!("{}.txt", r.name.replace('/', "_")));
                write_atomic(&file, |w| r.write_text(w))?;
                println!(
                    "{}: {} ({})",
                    r.name,
                    if r.pass { "PASS" } else { "FAIL" },
                    file.display()
                );
                all_pass &= r.pass;
            }
            if all_pass {
                Ok(())
            } else {
                let mut msg = String::from("scenario thresholds not met:");
                for r in reports.iter().filter(|r| !r.pass) {
                    let _ = write!(msg, " {}", r.name);
                }
                Err(Failure { code: 4, msg })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("invz: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
