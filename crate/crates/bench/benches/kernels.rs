use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use vocoscope::netgraph::{conv1d, generator_forward, init_bundle, Conv1dParams, NetKind};
use vocoscope::spectral::StftPlan;
use vocoscope::{
    compute_metrics, extract_envelope, mel_spectrogram, stft, EnvelopeMode, MelSpectrogram, Tensor,
    VocoderConfig, Waveform,
};

fn signal(seconds: f64, phase: f64) -> Waveform {
    let sr = 24000;
    let n = (seconds * sr as f64) as usize;
    let samples = (0..n)
        .map(|t| {
            let s = t as f64 / sr as f64;
            0.4 * (2.0 * std::f64::consts::PI * 180.0 * s + phase).sin() + 0.05 * (9001.0 * s).sin()
        })
        .collect();
    Waveform::new(samples, sr).unwrap()
}

fn spectral(c: &mut Criterion) {
    let cfg = VocoderConfig::config_v1();
    let w = signal(1.0, 0.0);
    let plan = StftPlan::new(1024, 256, 1024, true).unwrap();
    c.bench_function("stft_1s", |b| b.iter(|| stft(black_box(&w), &plan).unwrap()));
    c.bench_function("mel_1s", |b| b.iter(|| mel_spectrogram(black_box(&w), &cfg).unwrap()));
}

fn envelope(c: &mut Criterion) {
    let w = signal(1.0, 0.0);
    c.bench_function("envelope_upper_1s", |b| {
        b.iter(|| extract_envelope(black_box(&w), EnvelopeMode::Upper).unwrap())
    });
    c.bench_function("envelope_lowpass300_1s", |b| {
        b.iter(|| extract_envelope(black_box(&w), EnvelopeMode::Lowpass300).unwrap())
    });
}

fn convolution(c: &mut Criterion) {
    let x = Tensor::new(vec![64, 4096], (0..64 * 4096).map(|i| ((i % 97) as f32 - 48.0) / 97.0).collect()).unwrap();
    let w = Tensor::new(vec![64, 64, 7], (0..64 * 64 * 7).map(|i| ((i % 13) as f32 - 6.0) / 130.0).collect()).unwrap();
    let p = Conv1dParams {
        stride: 1,
        dilation: 3,
        groups: 1,
        padding: 9,
    };
    c.bench_function("conv1d_64x4096_k7_d3", |b| b.iter(|| conv1d(black_box(&x), &w, None, p).unwrap()));
}

fn generator(c: &mut Criterion) {
    let cfg = VocoderConfig::config_v1();
    let spec = vocoscope::netgraph::build_generator(&cfg).unwrap();
    let weights = init_bundle(NetKind::Generator, &cfg, 0).unwrap();
    let mel = MelSpectrogram::new(cfg.num_mels, 4, vec![-5.0; cfg.num_mels * 4]).unwrap();
    let mut group = c.benchmark_group("generator");
    group.sample_size(10);
    group.bench_function("forward_4_frames", |b| {
        b.iter(|| generator_forward(&spec, &weights, black_box(&mel)).unwrap())
    });
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let cfg = VocoderConfig::config_v1();
    let (r, g) = (signal(2.0, 0.0), signal(2.0, 0.3));
    let mut group = c.benchmark_group("metrics");
    group.sample_size(10);
    group.bench_function("all_2s", |b| b.iter(|| compute_metrics(black_box(&r), &g, &cfg, None).unwrap()));
    group.finish();
}

criterion_group!(benches, spectral, envelope, convolution, generator, metrics);
criterion_main!(benches);
