//! Throughput of the transmit/channel/receive chain, one benchmark per
//! stage: probe sequence generation, pulse shaping, beam weight design,
//! filter synthesis, transmit filtering, multipath propagation, and the
//! adaptive equalizer.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use uwbeam_core::beam::{
    apply_transmit_beamforming, design_single_beam, synthesize_time_filters, ArrayGeometry,
};
use uwbeam_core::channel::propagate;
use uwbeam_core::dsp::{generate_mseq, pulse_shape, MSequenceSpec, PulseSpec};
use uwbeam_core::harness::ExperimentConfig;
use uwbeam_core::receiver::{
    dfe_run, AdaptiveAlgorithm, Constellation, EqualizerConfig, SymbolTiming,
};

const FS: f64 = 39_062.5;
const NS: usize = 6;
const T: f64 = NS as f64 / FS;
const FC: f64 = 12_500.0;

fn pulse() -> PulseSpec {
    PulseSpec::new(0.25, T, 16, NS).unwrap()
}

fn symbols(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Constellation::Qpsk.random_symbols(n, &mut rng)
}

fn bench_chain(c: &mut Criterion) {
    let mut group = c.benchmark_group("chain");
    group.sample_size(10);

    let spec = MSequenceSpec::for_degree(12).unwrap();
    group.bench_function("mseq_degree_12", |b| {
        b.iter(|| generate_mseq(black_box(&spec)).unwrap())
    });

    let d = symbols(4096, 1);
    let p = pulse();
    group.bench_function("pulse_shape_4096_symbols", |b| {
        b.iter(|| pulse_shape(black_box(&d), &p).unwrap())
    });

    let geometry = ArrayGeometry::new(24, 0.05, 1500.0).unwrap();
    let angle = 17.3f64.to_radians();
    group.bench_function("design_weights_l4096", |b| {
        b.iter(|| design_single_beam(&geometry, black_box(angle), FC, FS, 4096, NS, 0.25).unwrap())
    });

    let weights = design_single_beam(&geometry, angle, FC, FS, 4096, NS, 0.25).unwrap();
    group.bench_function("synthesize_filters_l4096", |b| {
        b.iter(|| synthesize_time_filters(black_box(&weights)).unwrap())
    });

    let filters = synthesize_time_filters(&weights).unwrap();
    let frame = symbols(256, 2);
    group.bench_function("transmit_filter_256_symbols", |b| {
        b.iter(|| apply_transmit_beamforming(black_box(&frame), &p, &filters).unwrap())
    });

    let channel = ExperimentConfig::space().channel;
    let tx = apply_transmit_beamforming(&frame, &p, &filters).unwrap();
    group.bench_function("propagate_three_paths", |b| {
        b.iter(|| propagate(black_box(&tx), &channel, 0.0).unwrap())
    });

    let payload = symbols(2000, 3);
    let v = pulse_shape(&payload, &p).unwrap();
    let config =
        EqualizerConfig::new(20, 20, AdaptiveAlgorithm::rls(0.995), 1e-4, Constellation::Qpsk);
    let timing = SymbolTiming { symbol_period: T, fc: FC };
    group.bench_function("dfe_2000_symbols", |b| {
        b.iter(|| {
            dfe_run(black_box(&v), &config, &timing, &payload[..config.nt], 2000 - config.nt)
                .unwrap()
        })
    });

    group.finish();
}

criterion_group!(benches, bench_chain);
criterion_main!(benches);
