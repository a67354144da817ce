//! Loss decomposition over real discriminator outputs.

use proptest::prelude::*;
use vocoscope::losses::*;
use vocoscope::netgraph::*;
use vocoscope::*;

fn wave(n: usize, phase: f64) -> Waveform {
    Waveform::new((0..n).map(|t| 0.5 * (t as f64 * 0.05 + phase).sin()).collect(), 24000).unwrap()
}

proptest! {
    #[test]
    fn breakdown_identity(
        terms in prop::collection::vec((0.0f64..4.0, 0.0f64..4.0, 0.0f64..3.0), 1..9),
        mel in 0.0f64..2.0,
        lfm in 0.0f64..5.0,
        lmel in 0.0f64..60.0,
    ) {
        let w = LossWeights::new(lfm, lmel).unwrap();
        let (d, (g, fm)): (Vec<f64>, (Vec<f64>, Vec<f64>)) =
            terms.iter().map(|&(a, b, c)| (a, (b, c))).unzip();
        let b = LossBreakdown::from_terms(d.clone(), g.clone(), fm.clone(), mel, w).unwrap();
        let expect_g: f64 = g.iter().zip(&fm).map(|(x, y)| x + lfm * y).sum::<f64>() + lmel * mel;
        prop_assert!((b.total_g - expect_g).abs() < 1e-9);
        prop_assert!((b.total_d - d.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn adversarial_losses_bounded(scores in prop::collection::vec(-3.0f32..3.0, 1..50)) {
        let dev = scores.iter().map(|s| (*s as f64 - 1.0).abs()).fold(0.0, f64::max);
        let g = adv_loss_g(&scores).unwrap();
        prop_assert!(g >= 0.0 && g <= dev * dev + 1e-12);
        let d = adv_loss_d(&scores, &scores).unwrap();
        prop_assert!(d >= 0.0);
    }
}

#[test]
fn perfect_generator_has_zero_generator_loss() {
    let cfg = VocoderConfig::config_v1();
    let spec = build_discriminator(DiscriminatorKind::Mrd, &cfg).unwrap();
    let w = init_bundle(NetKind::Discriminator(DiscriminatorKind::Mrd), &cfg, 1).unwrap();
    let real = wave(4800, 0.0);
    let mut out = spec.forward(&w, &real).unwrap();
    for s in &mut out.score_maps {
        s.data_mut().fill(1.0);
    }
    let b = total_losses(&out, &out, &real, &real, LossWeights::default(), &cfg).unwrap();
    assert_eq!(b.total_g, 0.0);
    assert!(b.fm_per_k.iter().all(|&v| v == 0.0));
    assert_eq!(b.mel, 0.0);
    // discriminator sees real == gen == 1: every k contributes mean(1^2) = 1
    assert_eq!(b.total_d, 3.0);
}

#[test]
fn flat_summation_over_combined_ensembles() {
    let cfg = VocoderConfig::config_v1();
    let real = wave(3000, 0.0);
    let gen = wave(3000, 0.3);
    let mut real_out: Option<DiscriminatorOutput> = None;
    let mut gen_out: Option<DiscriminatorOutput> = None;
    for kind in [DiscriminatorKind::Mpd, DiscriminatorKind::Mrd] {
        let spec = build_discriminator(kind, &cfg).unwrap();
        let w = init_bundle(NetKind::Discriminator(kind), &cfg, 2).unwrap();
        let (r, g) = (spec.forward(&w, &real).unwrap(), spec.forward(&w, &gen).unwrap());
        match (&mut real_out, &mut gen_out) {
            (Some(a), Some(b)) => {
                a.extend(r);
                b.extend(g);
            }
            _ => {
                real_out = Some(r);
                gen_out = Some(g);
            }
        }
    }
    let (r, g) = (real_out.unwrap(), gen_out.unwrap());
    assert_eq!(r.len(), 8);
    let weights = LossWeights::default();
    let b = total_losses(&r, &g, &real, &gen, weights, &cfg).unwrap();
    assert_eq!(b.adv_g_per_k.len(), 8);
    let rebuilt: f64 = (0..8)
        .map(|k| b.adv_g_per_k[k] + 2.0 * b.fm_per_k[k])
        .sum::<f64>()
        + 45.0 * b.mel;
    assert!((b.total_g - rebuilt).abs() < 1e-9);
    assert!(b.mel > 0.0 && b.fm_per_k.iter().all(|&v| v > 0.0));
    assert_eq!(b.mel, mel_loss(&gen, &real, &cfg).unwrap());

    let short = wave(2999, 0.0);
    assert!(total_losses(&r, &g, &short, &gen, weights, &cfg).is_err());
}
