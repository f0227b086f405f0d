//! `attngap` command line: compare image sets by attention histograms,
//! cache profiles, dump plot-ready histograms, run the FID baseline and
//! generate synthetic sets.
//!
//! Every command is also a library function so tests can drive it without a
//! subprocess. [`run`] parses arguments, dispatches, and turns failures into
//! an exit code plus one diagnostic line on stderr:
//!
//! | code | kind         | typical cause                                   |
//! |------|--------------|-------------------------------------------------|
//! | 0    |              | success                                         |
//! | 2    | `usage`      | bad flags or arguments                          |
//! | 3    | `io`         | unreadable or unwritable path                   |
//! | 4    | `format`     | malformed SRGT, image, manifest or profile      |
//! | 5    | `config`     | fingerprint or stage mismatch, invalid settings |
//! | 6    | `degenerate` | zero-variance histogram, non-PSD covariance     |
//! | 7    | `input`      | empty set, missing stage, too few samples       |
//! | 8    | `shape`      | tensor layout or dimension mismatch             |

mod commands;
mod error;
mod sets;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use attngap::encoder::RefEncoderConfig;
use attngap::io::ReportFormat;
use attngap::metric::{
    default_stages, MetricConfig, StageId, TargetSize, DEFAULT_EXCLUDE_BELOW, DEFAULT_TEMPERATURE,
    QUANTIZATION_RULE,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{cmd_compare, cmd_fid, cmd_hist, cmd_profile, cmd_synth, format_fid};
pub use error::{CliError, ErrorKind};
pub use sets::{load_profile, profile_to_json, resolve_set, SetSource, PROFILE_KIND};

#[derive(Debug, Parser)]
#[command(name = "attngap", version, about = "Attention-histogram similarity between image sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score set A against one or more sets B, stage by stage.
    Compare(CompareArgs),
    /// Build a set's profile and save it as JSON for later comparisons.
    Profile(ProfileArgs),
    /// Write a set's averaged histograms as CSV, one row per bin and stage.
    Hist(HistArgs),
    /// Fréchet distance between two SRGT feature matrices.
    Fid(FidArgs),
    /// Generate a synthetic lane or noise set with a reference-mode manifest.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncoderMode {
    /// Read stage activations from the SRGT files a manifest lists.
    Manifest,
    /// Run the built-in seeded encoder on the set's images.
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Lane,
    Noise,
}

/// Settings shared by every command that builds profiles.
#[derive(Debug, Clone, PartialEq, Args)]
pub struct RunConfig {
    /// Spatial softmax temperature.
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    pub temperature: f64,
    /// Histogram bins 0..=N are left out of the correlation.
    #[arg(long, default_value_t = DEFAULT_EXCLUDE_BELOW)]
    pub exclude_below: u8,
    /// Attention map resolution: `input` or HxW.
    #[arg(long, default_value = "input", value_parser = parse_target_size)]
    pub target_size: TargetSize,
    /// Comma-separated stage labels.
    #[arg(long, default_value = "E2,E3,E4", value_delimiter = ',', value_parser = parse_stage)]
    pub stages: Vec<StageId>,
    /// Where stage activations come from.
    #[arg(long, value_enum, default_value_t = EncoderMode::Manifest)]
    pub encoder: EncoderMode,
    /// Weight seed of the reference encoder.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            exclude_below: DEFAULT_EXCLUDE_BELOW,
            target_size: TargetSize::Input,
            stages: default_stages(),
            encoder: EncoderMode::Manifest,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn reference(seed: u64) -> Self {
        Self {
            encoder: EncoderMode::Reference,
            seed,
            ..Self::default()
        }
    }

    pub fn encoder_config(&self) -> RefEncoderConfig {
        RefEncoderConfig::with_seed(self.seed)
    }

    /// The metric settings; the encoder choice goes into `provenance` so
    /// profiles from different activation sources never compare silently.
    pub fn metric_config(&self) -> MetricConfig {
        let provenance = match self.encoder {
            EncoderMode::Manifest => "manifest".to_string(),
            EncoderMode::Reference => self.encoder_config().describe(),
        };
        MetricConfig {
            temperature: self.temperature,
            target_size: self.target_size,
            exclude_below: self.exclude_below,
            quantization: QUANTIZATION_RULE.to_string(),
            provenance,
        }
    }
}

fn parse_target_size(s: &str) -> Result<TargetSize, String> {
    s.parse().map_err(|e: attngap::MetricError| e.to_string())
}

fn parse_stage(s: &str) -> Result<StageId, String> {
    StageId::new(s).map_err(|e| e.to_string())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse().map_err(|e: attngap::FormatError| e.to_string())
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    match parse_target_size(s)? {
        TargetSize::Fixed { height, width } => Ok((height, width)),
        TargetSize::Input => Err("expected HxW".into()),
    }
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Set A: manifest, image directory, or cached profile JSON.
    #[arg(long)]
    pub a: PathBuf,
    /// Set B; repeat to score A against several sets.
    #[arg(long, required = true)]
    pub b: Vec<PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
    /// Comma-separated report formats.
    #[arg(long, default_value = "json", value_delimiter = ',', value_parser = parse_format)]
    pub format: Vec<ReportFormat>,
    /// Directory that receives `report.<format>`; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub set: PathBuf,
    #[command(flatten)]
    pub run: RunConfig,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct HistArgs {
    #[arg(long)]
    pub set: PathBuf,
    #[command(flatten)]
    pub run: RunConfig,
    /// Output CSV file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FidArgs {
    /// SRGT 2-D f32 features, one row per sample.
    pub a: PathBuf,
    pub b: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, created if needed.
    #[arg(long)]
    pub out: PathBuf,
    /// Image size as HxW.
    #[arg(long, default_value = "64x64", value_parser = parse_size)]
    pub size: (usize, usize),
    /// Set name recorded in the manifest; defaults to the kind.
    #[arg(long)]
    pub name: Option<String>,
}

/// Runs one command line and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let text = e.to_string();
            let msg = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(|l| l.strip_prefix("error: ").unwrap_or(l))
                .collect::<Vec<_>>()
                .join("; ");
            let err = CliError::new(ErrorKind::Usage, msg);
            let _ = writeln!(stderr, "{}", err.diagnostic());
            return err.kind.code();
        }
    };
    let result = match &cli.command {
        Command::Compare(a) => cmd_compare(a, stdout),
        Command::Profile(a) => cmd_profile(a, stdout),
        Command::Hist(a) => cmd_hist(a, stdout),
        Command::Fid(a) => cmd_fid(&a.a, &a.b, stdout),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.diagnostic());
            e.kind.code()
        }
    }
}
