//! Architecture constants, forward-pass geometry and weight handling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vocoscope::netgraph::*;
use vocoscope::*;

fn within(got: usize, want: f64, rel: f64) -> bool {
    ((got as f64 - want) / want).abs() <= rel
}

fn narrow() -> VocoderConfig {
    VocoderConfig {
        upsample_initial_channel: 16,
        ..VocoderConfig::config_v1()
    }
}

fn tone(n: usize) -> Waveform {
    let x = (0..n)
        .map(|t| 0.4 * (t as f64 * 0.07).sin() + 0.2 * (t as f64 * 0.31).cos())
        .collect();
    Waveform::new(x, 24000).unwrap()
}

#[test]
fn parameter_counts_match_reported_sizes() {
    let cfg = VocoderConfig::config_v1();
    let g = count_parameters(&build_generator(&cfg).unwrap());
    let med = count_parameters(&build_discriminator(DiscriminatorKind::Med, &cfg).unwrap());
    let mrd = count_parameters(&build_discriminator(DiscriminatorKind::Mrd, &cfg).unwrap());
    assert!(within(g, 13.95e6, 0.005), "generator {g}");
    assert!(within(med, 49.37e6, 0.005), "med {med}");
    assert!(within(mrd, 0.28e6, 0.05), "mrd {mrd}");
    assert!(within(g + med + mrd, 63.61e6, 0.005), "total {}", g + med + mrd);
}

#[test]
fn generator_output_is_frames_times_hop() {
    let cfg = narrow();
    let spec = build_generator(&cfg).unwrap();
    let w = init_bundle(NetKind::Generator, &cfg, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for frames in [1usize, 2, 3, 5, 11, 64, 257] {
        let mel = MelSpectrogram::new(
            80,
            frames,
            (0..80 * frames).map(|_| rng.random_range(-11.5..2.0)).collect(),
        )
        .unwrap();
        let out = generator_forward(&spec, &w, &mel).unwrap();
        assert_eq!(out.len(), frames * 256);
        assert_eq!(out.sample_rate(), 24000);
        assert!(out.samples().iter().all(|v| v.abs() <= 1.0));
    }
}

#[test]
fn full_width_generator_on_short_inputs() {
    let cfg = VocoderConfig::config_v1();
    let spec = build_generator(&cfg).unwrap();
    let w = init_bundle(NetKind::Generator, &cfg, 1).unwrap();
    for frames in [1usize, 3] {
        let mel = MelSpectrogram::new(80, frames, vec![-4.0; 80 * frames]).unwrap();
        let a = generator_forward(&spec, &w, &mel).unwrap();
        assert_eq!(a.len(), frames * 256);
        // bitwise deterministic
        assert_eq!(a, generator_forward(&spec, &w, &mel).unwrap());
    }
}

#[test]
fn zero_weights_give_silence() {
    for activation in [ActivationKind::Snakebeta, ActivationKind::Snake, ActivationKind::LeakyRelu] {
        let cfg = VocoderConfig {
            activation,
            ..narrow()
        };
        let spec = build_generator(&cfg).unwrap();
        let mut w = init_bundle(NetKind::Generator, &cfg, 9).unwrap();
        for (name, t) in w.tensors_mut() {
            if !name.ends_with(".alpha") && !name.ends_with(".beta") {
                t.data_mut().fill(0.0);
            }
        }
        let mel = MelSpectrogram::new(80, 4, vec![1.0; 320]).unwrap();
        let out = generator_forward(&spec, &w, &mel).unwrap();
        assert!(out.samples().iter().all(|&v| v == 0.0), "{activation:?}");
    }
}

#[test]
fn generator_rejects_bad_inputs() {
    let cfg = narrow();
    let spec = build_generator(&cfg).unwrap();
    let w = init_bundle(NetKind::Generator, &cfg, 1).unwrap();
    let mel = MelSpectrogram::new(40, 2, vec![0.0; 80]).unwrap();
    assert!(matches!(generator_forward(&spec, &w, &mel), Err(Error::Shape(_))));
    let other = init_bundle(NetKind::Discriminator(DiscriminatorKind::Mrd), &cfg, 1).unwrap();
    let mel = MelSpectrogram::new(80, 2, vec![0.0; 160]).unwrap();
    assert!(matches!(generator_forward(&spec, &other, &mel), Err(Error::Weights(_))));
}

#[test]
fn random_init_statistics() {
    let cfg = VocoderConfig::config_v1();
    let w = init_bundle(NetKind::Discriminator(DiscriminatorKind::Mrd), &cfg, 42).unwrap();
    let vals: Vec<f64> = w
        .iter()
        .flat_map(|nt| nt.tensor.data().to_vec())
        .map(|v| v as f64)
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 1e-3, "mean {mean}");
    assert!((std - 0.01).abs() < 0.001, "std {std}");

    let g = init_bundle(NetKind::Generator, &cfg, 42).unwrap();
    assert!(g.get("activation_post.alpha").unwrap().data().iter().all(|&v| v == 0.0));
    assert_eq!(g.meta.seed, Some(42));
    assert_eq!(g.meta.config_hash, cfg.hash());
    assert_eq!(g, init_bundle(NetKind::Generator, &cfg, 42).unwrap());
    assert_ne!(g, init_bundle(NetKind::Generator, &cfg, 43).unwrap());
}

#[test]
fn bundle_round_trip_preserves_forward_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = narrow();
    let spec = build_generator(&cfg).unwrap();
    let w = init_bundle(NetKind::Generator, &cfg, 7).unwrap();
    let stem = dir.path().join("gen");
    w.save(&stem).unwrap();
    let back = WeightBundle::load(&stem).unwrap();
    assert_eq!(w, back);
    let mel = MelSpectrogram::new(80, 3, vec![-2.0; 240]).unwrap();
    assert_eq!(
        generator_forward(&spec, &w, &mel).unwrap(),
        generator_forward(&spec, &back, &mel).unwrap()
    );
}

#[test]
fn discriminator_output_geometry() {
    let cfg = VocoderConfig::config_v1();
    let wav = tone(6000);
    for (kind, subs) in [
        (DiscriminatorKind::Mrd, 3),
        (DiscriminatorKind::Mpd, 5),
        (DiscriminatorKind::Msd, 3),
        (DiscriminatorKind::Med, 5),
    ] {
        let spec = build_discriminator(kind, &cfg).unwrap();
        let w = init_bundle(NetKind::Discriminator(kind), &cfg, 1).unwrap();
        let out = match kind {
            DiscriminatorKind::Med => med_forward(&spec, &w, &wav),
            DiscriminatorKind::Mrd => mrd_forward(&spec, &w, &wav),
            DiscriminatorKind::Mpd => mpd_forward(&spec, &w, &wav),
            DiscriminatorKind::Msd => msd_forward(&spec, &w, &wav),
        }
        .unwrap();
        assert_eq!(out.len(), subs, "{kind:?}");
        for (k, fm) in out.feature_maps.iter().enumerate() {
            assert_eq!(fm.len(), spec.depth());
            assert_eq!(fm.last().unwrap().len(), out.score_maps[k].len());
            assert!(fm.iter().all(|t| t.is_finite()));
        }
        let again = spec.forward(&w, &wav).unwrap();
        assert_eq!(out, again);
    }
    // wrong family
    let mrd = build_discriminator(DiscriminatorKind::Mrd, &cfg).unwrap();
    let w = init_bundle(NetKind::Discriminator(DiscriminatorKind::Mrd), &cfg, 1).unwrap();
    assert!(mpd_forward(&mrd, &w, &wav).is_err());
}

#[test]
fn branch_inputs() {
    let cfg = VocoderConfig::config_v1();
    let wav = tone(4801);

    let mpd = build_discriminator(DiscriminatorKind::Mpd, &cfg).unwrap();
    for (b, &p) in cfg.mpd_reshapes.iter().enumerate() {
        let t = mpd.branch_input(b, &wav).unwrap();
        let rows = 4801usize.div_ceil(p);
        assert_eq!(t.shape(), &[1, rows, p]);
        for i in 0..4801 {
            assert_eq!(t.data()[i], wav.samples()[i] as f32);
        }
    }

    let msd = build_discriminator(DiscriminatorKind::Msd, &cfg).unwrap();
    let lens: Vec<usize> = (0..3).map(|b| msd.branch_input(b, &wav).unwrap().len()).collect();
    assert_eq!(lens, vec![4801, 2401, 1201]);

    let med = build_discriminator(DiscriminatorKind::Med, &cfg).unwrap();
    let ident = EnvelopeMode::ALL.iter().position(|&m| m == EnvelopeMode::Identity).unwrap();
    let t = med.branch_input(ident, &wav).unwrap();
    assert!(t.data().iter().zip(wav.samples()).all(|(a, b)| *a == *b as f32));

    // frames x bins, so a time shift by one hop moves the input by one row
    let mrd = build_discriminator(DiscriminatorKind::Mrd, &cfg).unwrap();
    let long = tone(12_000);
    let shifted = long.with_samples(long.samples()[1200..].to_vec()).unwrap();
    for (b, r) in cfg.resolutions.iter().enumerate() {
        let a = mrd.branch_input(b, &long).unwrap();
        let s = mrd.branch_input(b, &shifted).unwrap();
        let bins = r.n_fft / 2 + 1;
        assert_eq!(a.shape()[2], bins);
        let rows = 1200 / r.hop;
        // compare interior frames away from the reflect-padded edges
        let margin = r.n_fft / r.hop + 1;
        for f in margin..s.shape()[1] - margin {
            for k in 0..bins {
                let x = a.data()[(f + rows) * bins + k];
                let y = s.data()[f * bins + k];
                assert!((x - y).abs() < 1e-3, "res {b} frame {f} bin {k}: {x} vs {y}");
            }
        }
    }
}
