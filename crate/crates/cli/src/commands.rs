//! Subcommand implementations. Each returns the JSON body to emit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use vocoscope::activations::{gradcheck, GradOp};
use vocoscope::metrics::{
    compute_metrics, embedding_stats, frechet_distance, length_consistency, MetricReport,
};
use vocoscope::netgraph::{
    build_discriminator, build_generator, count_parameters, generator_forward, init_bundle,
    DiscriminatorOutput, NetKind,
};
use vocoscope::spectral::{stft, MelAnalyzer, StftPlan};
use vocoscope::{
    envelope, load_config, losses, read_wav, write_wav, DiscriminatorKind, EnvelopeMode,
    MatrixDump, MelSpectrogram, Resolution, VocoderConfig, WavEncoding, Waveform, WeightBundle,
};

use crate::cli::*;
use crate::error::{CliError, CliResult};

pub fn config_of(arg: &ConfigArg) -> CliResult<VocoderConfig> {
    match &arg.config {
        Some(p) => Ok(load_config(p)?),
        None => Ok(VocoderConfig::config_v1()),
    }
}

fn encoding(e: Encoding) -> WavEncoding {
    match e {
        Encoding::Pcm16 => WavEncoding::Pcm16,
        Encoding::Float32 => WavEncoding::Float32,
    }
}

fn to_value(v: impl Serialize) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn envelope(a: &EnvelopeArgs) -> CliResult<Value> {
    let mode = EnvelopeMode::try_from(a.mode)?;
    let w = read_wav(&a.input)?;
    let env = envelope::extract_envelope_with_order(&w, mode, a.order)?;
    match a.format {
        EnvelopeFormat::Wav => write_wav(&env, &a.output, encoding(a.encoding))?,
        EnvelopeFormat::Dump => {
            let data = env.samples().iter().map(|&v| v as f32).collect();
            MatrixDump::new(1, env.len(), "envelope", data)?
                .with_meta("mode", mode.tag())
                .with_meta("order", a.order)
                .with_meta("cutoff", mode.cutoff_hz())
                .with_meta("sample_rate", env.sample_rate())
                .save(&a.output)?
        }
    }
    Ok(json!({
        "mode": mode.tag(),
        "mode_name": mode.to_string(),
        "samples": env.len(),
        "sample_rate": env.sample_rate(),
        "peak": env.peak(),
        "output": a.output,
    }))
}

pub fn spectrogram(a: &SpectrogramArgs, cfg: &VocoderConfig) -> CliResult<Value> {
    let w = read_wav(&a.input)?;
    w.require_rate(cfg.sampling_rate)?;
    let dump = match a.kind {
        SpecChoice::Mel => {
            if a.resolution.is_some() {
                return Err(CliError::Validation("--resolution applies to linear/log output only".into()));
            }
            let mel = MelAnalyzer::new(cfg)?.analyze(&w)?;
            MatrixDump::new(mel.mels, mel.frames, "mel", mel.values.iter().map(|&v| v as f32).collect())?
                .with_meta("n_fft", cfg.n_fft)
                .with_meta("hop", cfg.hop_size)
                .with_meta("win", cfg.win_size)
        }
        SpecChoice::Linear | SpecChoice::Log => {
            let r: Resolution = match &a.resolution {
                Some(v) => [v[0], v[1], v[2]].into(),
                None => [cfg.n_fft, cfg.hop_size, cfg.win_size].into(),
            };
            let mut s = stft(&w, &StftPlan::from_resolution(r)?)?;
            let kind = if a.kind == SpecChoice::Log {
                s = s.to_log();
                "log"
            } else {
                "linear"
            };
            MatrixDump::new(s.bins, s.frames, kind, s.values.iter().map(|&v| v as f32).collect())?
                .with_meta("n_fft", r.n_fft)
                .with_meta("hop", r.hop)
                .with_meta("win", r.win)
        }
    }
    .with_meta("sample_rate", w.sample_rate())
    .with_meta("config_hash", cfg.hash());
    dump.save(&a.output)?;
    Ok(json!({
        "kind": dump.header.kind,
        "rows": dump.header.rows,
        "cols": dump.header.cols,
        "output": a.output,
    }))
}

fn load_mel(path: &Path) -> CliResult<MelSpectrogram> {
    let d = MatrixDump::load(path)?;
    if d.header.kind != "mel" {
        return Err(CliError::Validation(format!(
            "{}: expected a mel dump, found kind `{}`",
            path.display(),
            d.header.kind
        )));
    }
    Ok(MelSpectrogram::new(
        d.header.rows,
        d.header.cols,
        d.data.iter().map(|&v| v as f64).collect(),
    )?)
}

fn load_bundle_for(stem: &Path, net: NetKind, cfg: &VocoderConfig) -> CliResult<WeightBundle> {
    let b = WeightBundle::load(stem)?;
    if !b.meta.net.is_empty() && b.meta.net != net.name() {
        return Err(CliError::Validation(format!(
            "{}: bundle holds `{}` weights, expected `{}`",
            stem.display(),
            b.meta.net,
            net.name()
        )));
    }
    if !b.meta.config_hash.is_empty() && b.meta.config_hash != cfg.hash() {
        log::warn!(
            "{}: bundle was created for config {}, running with {}",
            stem.display(),
            b.meta.config_hash,
            cfg.hash()
        );
    }
    Ok(b)
}

pub fn synth(a: &SynthArgs, cfg: &VocoderConfig) -> CliResult<Value> {
    let mel = match (&a.mel, &a.input) {
        (Some(p), _) => load_mel(p)?,
        (None, Some(p)) => MelAnalyzer::new(cfg)?.analyze(&read_wav(p)?)?,
        (None, None) => unreachable!("clap requires a source"),
    };
    let spec = build_generator(cfg)?;
    let weights = load_bundle_for(&a.weights, NetKind::Generator, cfg)?;
    let wav = generator_forward(&spec, &weights, &mel)?;
    write_wav(&wav, &a.output, encoding(a.encoding))?;
    let check = length_consistency(mel.frames, wav.len(), cfg.hop_size, cfg.sampling_rate)?;
    Ok(json!({
        "mel_frames": mel.frames,
        "samples": wav.len(),
        "sample_rate": wav.sample_rate(),
        "length_check": to_value(&check)?,
        "output": a.output,
    }))
}

pub fn parse_combo(s: &str) -> CliResult<Vec<DiscriminatorKind>> {
    const ALLOWED: [&str; 7] = ["med", "mrd", "mpd", "msd", "med+mrd", "mpd+msd", "med+mpd+mrd"];
    if !ALLOWED.contains(&s) {
        return Err(CliError::Validation(format!(
            "unknown discriminator combination `{s}`; expected one of {}",
            ALLOWED.join(", ")
        )));
    }
    s.split('+').map(|k| Ok(k.parse()?)).collect()
}

pub fn loss(a: &LossArgs, cfg: &VocoderConfig) -> CliResult<Value> {
    let kinds = parse_combo(&a.combo)?;
    let weights = losses::LossWeights::new(a.lambda_fm, a.lambda_mel)?;
    let mut stems: BTreeMap<String, PathBuf> = BTreeMap::new();
    for w in &a.weights {
        let (k, stem) = w
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("--weights expects kind=stem, got `{w}`")))?;
        let kind: DiscriminatorKind = k.parse()?;
        stems.insert(kind.name().to_string(), PathBuf::from(stem));
    }
    let real = read_wav(&a.real)?;
    let gen = read_wav(&a.gen)?;
    real.require_rate(cfg.sampling_rate)?;
    gen.require_rate(cfg.sampling_rate)?;
    let mut real_out: Option<DiscriminatorOutput> = None;
    let mut gen_out: Option<DiscriminatorOutput> = None;
    for kind in &kinds {
        let net = NetKind::Discriminator(*kind);
        let bundle = match (stems.get(kind.name()), a.init_seed) {
            (Some(stem), _) => load_bundle_for(stem, net, cfg)?,
            (None, Some(seed)) => init_bundle(net, cfg, seed)?,
            (None, None) => {
                return Err(CliError::Validation(format!(
                    "no weights for `{}`; pass --weights {}=STEM or --init-seed",
                    kind.name(),
                    kind.name()
                )))
            }
        };
        let spec = build_discriminator(*kind, cfg)?;
        let r = spec.forward(&bundle, &real)?;
        let g = spec.forward(&bundle, &gen)?;
        match (&mut real_out, &mut gen_out) {
            (Some(ro), Some(go)) => {
                ro.extend(r);
                go.extend(g);
            }
            _ => {
                real_out = Some(r);
                gen_out = Some(g);
            }
        }
    }
    let (r, g) = (real_out.expect("nonempty combo"), gen_out.expect("nonempty combo"));
    let breakdown = losses::total_losses(&r, &g, &real, &gen, weights, cfg)?;
    let mut body = to_value(&breakdown)?;
    body["combo"] = json!(a.combo);
    body["sub_discriminators"] = json!(r.labels);
    body["weights"] = to_value(weights)?;
    Ok(body)
}

#[derive(Debug, Serialize)]
pub struct PairReport {
    pub pair: String,
    #[serde(flatten)]
    pub report: MetricReport,
}

fn wav_files(dir: &Path) -> CliResult<BTreeMap<String, PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| vocoscope::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut out = BTreeMap::new();
    for e in entries {
        let p = e
            .map_err(|e| vocoscope::Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?
            .path();
        if p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")) {
            let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
            out.insert(name, p);
        }
    }
    Ok(out)
}

/// Pairs reference and generated files: two files, or two directories
/// matched by file name.
pub fn pair_inputs(reference: &Path, generated: &Path) -> CliResult<Vec<(String, PathBuf, PathBuf)>> {
    match (reference.is_dir(), generated.is_dir()) {
        (false, false) => {
            let name = reference.file_name().unwrap_or_default().to_string_lossy().into_owned();
            Ok(vec![(name, reference.to_path_buf(), generated.to_path_buf())])
        }
        (true, true) => {
            let r = wav_files(reference)?;
            let g = wav_files(generated)?;
            let missing: Vec<&String> = r.keys().filter(|k| !g.contains_key(*k)).collect();
            if !missing.is_empty() {
                return Err(CliError::Validation(format!(
                    "generated directory lacks {} reference file(s), e.g. {}",
                    missing.len(),
                    missing[0]
                )));
            }
            if r.is_empty() {
                return Err(CliError::Validation(format!("no .wav files in {}", reference.display())));
            }
            Ok(r.into_iter().map(|(k, p)| (k.clone(), p, g[&k].clone())).collect())
        }
        _ => Err(CliError::Validation("--ref and --gen must both be files or both be directories".into())),
    }
}

fn load_embeddings(path: &Path) -> CliResult<vocoscope::metrics::EmbeddingStats> {
    let d = MatrixDump::load(path)?;
    let data: Vec<f64> = d.data.iter().map(|&v| v as f64).collect();
    Ok(embedding_stats(d.header.rows, d.header.cols, &data)?)
}

pub const CSV_COLUMNS: [&str; 7] = ["pair", "FAD", "SSIM", "PCC", "MCD", "M-STFT", "Periodicity"];

fn write_csv(path: &Path, reports: &[PairReport]) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Runtime(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(CSV_COLUMNS).map_err(io)?;
    let fmt = |v: f64| format!("{v:.6}");
    let fad = |r: &MetricReport| r.fad.map(fmt).unwrap_or_default();
    for p in reports {
        let r = &p.report;
        w.write_record([
            p.pair.clone(),
            fad(r),
            fmt(r.ssim),
            fmt(r.pcc),
            fmt(r.mcd),
            fmt(r.m_stft),
            fmt(r.periodicity),
        ])
        .map_err(io)?;
    }
    if reports.len() > 1 {
        let n = reports.len() as f64;
        let mean = |f: fn(&MetricReport) -> f64| fmt(reports.iter().map(|p| f(&p.report)).sum::<f64>() / n);
        w.write_record([
            "mean".to_string(),
            fad(&reports[0].report),
            mean(|r| r.ssim),
            mean(|r| r.pcc),
            mean(|r| r.mcd),
            mean(|r| r.m_stft),
            mean(|r| r.periodicity),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn metrics(a: &MetricsArgs, cfg: &VocoderConfig) -> CliResult<Vec<PairReport>> {
    let jobs = a.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    let pairs = pair_inputs(&a.reference, &a.gen)?;
    let fad = match (&a.embeddings_ref, &a.embeddings_gen) {
        (Some(r), Some(g)) => Some(frechet_distance(&load_embeddings(r)?, &load_embeddings(g)?)?),
        _ => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let results: Vec<CliResult<PairReport>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|(name, r, g)| {
                let (rw, gw): (Waveform, Waveform) = (read_wav(r)?, read_wav(g)?);
                Ok(PairReport {
                    pair: name.clone(),
                    report: compute_metrics(&rw, &gw, cfg, fad)?,
                })
            })
            .collect()
    });
    let reports = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    if let Some(p) = &a.csv {
        write_csv(p, &reports)?;
    }
    Ok(reports)
}

pub fn gradcheck_cmd(a: &GradcheckArgs) -> CliResult<Value> {
    if a.n == 0 {
        return Err(CliError::Validation("--n must be positive".into()));
    }
    let op = match a.op {
        OpChoice::Snake => GradOp::Snake,
        OpChoice::Snakebeta => GradOp::Snakebeta,
        OpChoice::LeakyRelu => GradOp::LeakyRelu,
    };
    to_value(gradcheck(op, a.n, a.seed))
}

pub fn parse_net(s: &str) -> CliResult<NetKind> {
    Ok(s.parse()?)
}

pub fn paramcount(a: &ParamcountArgs, cfg: &VocoderConfig) -> CliResult<Value> {
    let count = |net: NetKind| -> CliResult<usize> {
        Ok(match net {
            NetKind::Generator => count_parameters(&build_generator(cfg)?),
            NetKind::Discriminator(k) => count_parameters(&build_discriminator(k, cfg)?),
        })
    };
    let entry = |n: usize| json!({ "parameters": n, "millions": n as f64 / 1e6 });
    if a.net == "all" {
        let mut nets = serde_json::Map::new();
        let mut counts = BTreeMap::new();
        for name in ["generator", "med", "mrd", "mpd", "msd"] {
            let n = count(parse_net(name)?)?;
            counts.insert(name, n);
            nets.insert(name.to_string(), entry(n));
        }
        let total = counts["generator"] + counts["med"] + counts["mrd"];
        Ok(json!({
            "nets": nets,
            "total": entry(total),
            "total_components": ["generator", "med", "mrd"],
        }))
    } else {
        let net = parse_net(&a.net)?;
        let mut v = entry(count(net)?);
        v["net"] = json!(net.name());
        Ok(v)
    }
}

pub fn lencheck(a: &LencheckArgs, cfg: &VocoderConfig) -> CliResult<Value> {
    let frames = match (a.mel_frames, &a.mel) {
        (Some(f), _) => f,
        (None, Some(p)) => load_mel(p)?.frames,
        _ => unreachable!("clap requires a frame source"),
    };
    let (len, rate) = match (a.wav_len, &a.wav) {
        (Some(n), _) => (n, cfg.sampling_rate),
        (None, Some(p)) => {
            let w = read_wav(p)?;
            (w.len(), w.sample_rate())
        }
        _ => unreachable!("clap requires a sample source"),
    };
    let hop = a.hop.unwrap_or(cfg.hop_size);
    to_value(length_consistency(frames, len, hop, rate)?)
}

pub fn init_weights(a: &InitWeightsArgs, cfg: &VocoderConfig) -> CliResult<Value> {
    let net = parse_net(&a.net)?;
    let bundle = init_bundle(net, cfg, a.seed)?;
    bundle.save(&a.output)?;
    let (manifest, bin) = vocoscope::netgraph::bundle_paths(&a.output);
    Ok(json!({
        "net": net.name(),
        "seed": a.seed,
        "tensors": bundle.len(),
        "parameters": bundle.num_values(),
        "manifest": manifest,
        "data": bin,
    }))
}
