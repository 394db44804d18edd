//! Throughput benchmarks for the hot paths: analytic sweeps, phasor
//! extraction, plant integration and Nyquist winding evaluation.

use std::f64::consts::PI;

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;
use std::hint::black_box;

use invz_core::analytic::sweep_analytic;
use invz_core::compare::fixtures;
use invz_core::curve::ImpedanceCurve;
use invz_core::fra::goertzel_phasor;
use invz_core::sim::{simulate, SimConfig, SourceSpec};
use invz_core::stability::{minor_loop_gain, nyquist_winding};
use invz_core::FrequencyGrid;

fn bench_analytic_sweep(c: &mut Criterion) {
    let (design, ctrl) = fixtures::five_kw();
    let grid = FrequencyGrid::new(1.0, 5000.0, 200).unwrap();
    c.bench_function("analytic_sweep_200pt", |b| {
        b.iter(|| sweep_analytic(black_box(&design), black_box(&ctrl), black_box(&grid)).unwrap())
    });
}

fn bench_phasor(c: &mut Criterion) {
    let fs = 500e3f64;
    let f = 73.0f64;
    let n = (fs / f).round() as usize * 10;
    let samples: Vec<f64> = (0..n)
        .map(|k| 3.0 * (2.0 * PI * f * k as f64 / fs + 0.3).sin())
        .collect();
    c.bench_function("phasor_extraction_68kpt", |b| {
        b.iter(|| goertzel_phasor(black_box(&samples), fs, f).unwrap())
    });
}

fn bench_simulation(c: &mut Criterion) {
    let (design, ctrl) = fixtures::five_kw();
    let source = SourceSpec {
        v_nominal: 700.0,
        series_resistance: 0.05,
        injection: None,
    };
    let cfg = SimConfig {
        plant_step: 2e-6,
        duration: 0.05,
        record_decimation: 10,
    };
    c.bench_function("simulate_50ms", |b| {
        b.iter(|| simulate(black_box(&design), &ctrl, &source, &cfg).unwrap())
    });
}

fn bench_winding(c: &mut Criterion) {
    // underdamped LC source against a constant-power load
    let freqs: Vec<f64> = (0..40_000)
        .map(|k| 100.0 * (300.0f64).powf(k as f64 / 39_999.0))
        .collect();
    let source = ImpedanceCurve::new(
        freqs.clone(),
        freqs
            .iter()
            .map(|&f| {
                let s = Complex64::new(0.0, 2.0 * PI * f);
                let series = 0.01 + s * 100e-6;
                series / (1.0 + s * 24e-6 * series)
            })
            .collect(),
    )
    .unwrap();
    let load =
        ImpedanceCurve::new(freqs.clone(), vec![Complex64::new(-98.0, 0.0); freqs.len()])
            .unwrap();
    let t = minor_loop_gain(&source, &load).unwrap();
    c.bench_function("nyquist_winding_40kpt", |b| {
        b.iter(|| nyquist_winding(black_box(&t)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_analytic_sweep,
    bench_phasor,
    bench_simulation,
    bench_winding
);
criterion_main!(benches);
