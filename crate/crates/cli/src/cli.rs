use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "vocoscope", version, about = "GAN vocoder forensics toolkit")]
pub struct Cli {
    /// Omit the wall-clock timestamp so repeated runs are byte-identical.
    #[arg(long, global = true)]
    pub no_meta: bool,

    /// Increase log verbosity on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract one of the five envelope variants of a WAV file.
    Envelope(EnvelopeArgs),
    /// Write a mel, linear or log spectrogram as a float32 dump.
    Spectrogram(SpectrogramArgs),
    /// Run the generator on a mel dump (or on the mel of a WAV file).
    Synth(SynthArgs),
    /// Evaluate the adversarial / feature-matching / mel objective.
    Loss(LossArgs),
    /// Objective metrics between reference and generated audio.
    Metrics(MetricsArgs),
    /// Check activation derivatives against central differences.
    Gradcheck(GradcheckArgs),
    /// Count network parameters for a configuration.
    Paramcount(ParamcountArgs),
    /// Audit mel-frame / waveform length consistency.
    Lencheck(LencheckArgs),
    /// Write a randomly initialised weight bundle.
    InitWeights(InitWeightsArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Configuration JSON; the built-in 24 kHz configuration when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnvelopeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// -1 lower, 0 identity, 1 upper, 300 / 500 low-passed amplitude.
    #[arg(long, allow_hyphen_values = true)]
    pub mode: i32,
    #[arg(long)]
    pub output: PathBuf,
    /// Butterworth order for the low-pass modes.
    #[arg(long, default_value_t = vocoscope::envelope::DEFAULT_FILTER_ORDER)]
    pub order: usize,
    /// Float32 dump with a JSON header, or a WAV file.
    #[arg(long, value_enum, default_value_t = EnvelopeFormat::Dump)]
    pub format: EnvelopeFormat,
    /// Sample encoding when writing WAV.
    #[arg(long, value_enum, default_value_t = Encoding::Float32)]
    pub encoding: Encoding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnvelopeFormat {
    Dump,
    Wav,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Encoding {
    Pcm16,
    Float32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpecChoice {
    Mel,
    Linear,
    Log,
}

#[derive(Debug, Args)]
pub struct SpectrogramArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, value_enum, default_value_t = SpecChoice::Mel)]
    pub kind: SpecChoice,
    /// `n_fft,hop,win` for linear/log output; defaults to the config's.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub resolution: Option<Vec<usize>>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["mel", "input"])))]
pub struct SynthArgs {
    /// Mel dump (mels x frames).
    #[arg(long)]
    pub mel: Option<PathBuf>,
    /// WAV file whose mel spectrogram is resynthesised.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
    /// Generator weight bundle stem (`<stem>.manifest.json` + `<stem>.bin`).
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Encoding::Float32)]
    pub encoding: Encoding,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub gen: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
    /// One of med, mrd, mpd, msd, med+mrd, mpd+msd, med+mpd+mrd.
    #[arg(long)]
    pub combo: String,
    /// `kind=stem` weight bundle per discriminator family (repeatable).
    #[arg(long = "weights")]
    pub weights: Vec<String>,
    /// Randomly initialise families without a bundle, from this seed.
    #[arg(long)]
    pub init_seed: Option<u64>,
    #[arg(long, default_value_t = 2.0)]
    pub lambda_fm: f64,
    #[arg(long, default_value_t = 45.0)]
    pub lambda_mel: f64,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Reference WAV file or directory.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Generated WAV file or directory (paired by file name).
    #[arg(long)]
    pub gen: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
    /// Embedding dump (n x d) of the reference set, for FAD.
    #[arg(long, requires = "embeddings_gen")]
    pub embeddings_ref: Option<PathBuf>,
    /// Embedding dump (n x d) of the generated set, for FAD.
    #[arg(long, requires = "embeddings_ref")]
    pub embeddings_gen: Option<PathBuf>,
    /// CSV summary path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OpChoice {
    Snake,
    Snakebeta,
    #[value(name = "leaky_relu", alias = "leaky-relu")]
    LeakyRelu,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_enum)]
    pub op: OpChoice,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct ParamcountArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// generator, med, mrd, mpd, msd or all.
    #[arg(long, default_value = "all")]
    pub net: String,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("frames").required(true).args(["mel_frames", "mel"])))]
#[command(group(ArgGroup::new("samples").required(true).args(["wav_len", "wav"])))]
pub struct LencheckArgs {
    #[arg(long)]
    pub mel_frames: Option<usize>,
    /// Mel dump whose column count gives the frame count.
    #[arg(long)]
    pub mel: Option<PathBuf>,
    #[arg(long)]
    pub wav_len: Option<usize>,
    /// WAV file whose sample count is audited.
    #[arg(long)]
    pub wav: Option<PathBuf>,
    /// Hop size; the config's when omitted.
    #[arg(long)]
    pub hop: Option<usize>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct InitWeightsArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// generator, med, mrd, mpd or msd.
    #[arg(long)]
    pub net: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output stem.
    #[arg(long)]
    pub output: PathBuf,
}
