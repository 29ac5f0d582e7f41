use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bgsweep::bench::{self, Method, SweepConfig};
use bgsweep::datasets::{self, SequenceSpec, SyntheticConfig};
use bgsweep::evaluation::LabelPolicy;
use bgsweep::gmm::GmmParams;
use bgsweep::vibe::VibeParams;
use bgsweep::CompressionRatio;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bgsweep", version, about = "Background subtraction accuracy/CPU-time sweep over frame compression ratios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one compression ratio.
    Run {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        ratio: u32,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a list or range of compression ratios and emit relative metrics.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        /// `A..B`, `A..B:STEP` (inclusive) or `A,B,C`.
        #[arg(long, default_value = "0..99")]
        ratios: String,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// Workers for untimed sweeps; timed sweeps always run sequentially.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Skip timing (leaves the cpu columns empty) so --jobs can apply.
        #[arg(long)]
        no_timing: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic moving-square sequence as PGM files.
    Synth {
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        #[arg(long, default_value_t = 100)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        square: usize,
        #[arg(long, default_value_t = 5)]
        noise: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-score externally produced masks against groundtruth.
    Score {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Reject groundtruth values outside {0,50,85,170,255}.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Changedetection,
    Cmu,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Vibe,
    Gmm,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "changedetection")]
    layout: LayoutArg,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// ViBe random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Score every frame, ignoring temporalROI.txt.
    #[arg(long)]
    no_roi: bool,
    /// Dataset column value; defaults to the input directory's name.
    #[arg(long)]
    name: Option<String>,
    /// Filename prefix of CMU frames.
    #[arg(long, default_value = "")]
    frame_prefix: String,
    /// Filename prefix of CMU masks.
    #[arg(long, default_value = "")]
    mask_prefix: String,
    /// Write upsampled masks as PGM under DIR/ratio_NN/.
    #[arg(long)]
    dump_masks: Option<PathBuf>,
}

impl InputArgs {
    fn sweep_config(&self, ratios: Vec<CompressionRatio>, repeats: usize, out: &Path) -> SweepConfig {
        let name = self.name.clone().unwrap_or_else(|| dataset_name(&self.input));
        let mut spec = match self.layout {
            LayoutArg::Changedetection => SequenceSpec::change_detection(name, &self.input, self.gt.clone()),
            LayoutArg::Cmu => SequenceSpec::cmu(name, &self.input, self.gt.clone()),
        };
        if let datasets::Layout::Cmu(pattern) = &mut spec.layout {
            pattern.frame_prefix = self.frame_prefix.clone();
            pattern.mask_prefix = self.mask_prefix.clone();
        }
        let method = match self.method {
            MethodArg::Vibe => Method::Vibe(VibeParams::with_seed(self.seed)),
            MethodArg::Gmm => Method::Gmm(GmmParams::default()),
        };
        let mut config = SweepConfig::new(spec, method);
        config.ratios = ratios;
        config.options.timing_repeats = repeats;
        config.options.honor_roi = !self.no_roi;
        config.options.dump_masks = self.dump_masks.clone();
        config.output = Some(out.to_path_buf());
        config
    }
}

/// `.../highway/input` names the dataset `highway`.
fn dataset_name(input: &Path) -> String {
    let dir = if input.file_name().is_some_and(|n| n == "input") {
        input.parent().unwrap_or(input)
    } else {
        input
    };
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            input,
            ratio,
            repeats,
            out,
        } => {
            let ratio = CompressionRatio::new(ratio).context("parse arguments")?;
            let config = input.sweep_config(vec![ratio], repeats, &out);
            let records = bench::run_sweep(&config).context("run")?;
            report(&records);
        }
        Command::Sweep {
            input,
            ratios,
            repeats,
            jobs,
            no_timing,
            out,
        } => {
            let ratios = bench::parse_ratios(&ratios).context("parse arguments")?;
            let mut config = input.sweep_config(ratios, repeats, &out);
            config.parallelism = jobs;
            config.report_timings = !no_timing;
            if jobs > 1 && !no_timing {
                eprintln!("note: timed sweeps run sequentially; ignoring --jobs {jobs}");
            }
            let records = bench::run_sweep(&config).context("sweep")?;
            report(&records);
        }
        Command::Synth {
            width,
            height,
            frames,
            seed,
            square,
            noise,
            out,
        } => {
            let config = SyntheticConfig {
                width,
                height,
                frames,
                seed,
                square_size: square,
                noise_amplitude: noise,
                ..SyntheticConfig::default()
            };
            datasets::export_synthetic(&config, &out).context("synth")?;
            eprintln!("wrote {frames} frames to {}", out.display());
        }
        Command::Score {
            pred,
            gt,
            strict,
            out,
        } => {
            let policy = if strict {
                LabelPolicy::Strict
            } else {
                LabelPolicy::Lenient
            };
            let scores = bench::rescore(&pred, &gt, policy).context("score")?;
            if scores.is_empty() {
                bail!("score: no masks found in {}", pred.display());
            }
            let file = std::fs::File::create(&out)
                .with_context(|| format!("write: cannot create {}", out.display()))?;
            bench::write_score_csv(&scores, std::io::BufWriter::new(file)).context("write")?;
            eprintln!("scored {} frames", scores.len());
        }
    }
    Ok(())
}

fn report(records: &[bench::RatioRecord]) {
    for r in records {
        let f = r.f_measure.map_or("-".to_string(), |f| format!("{f:.4}"));
        let cpu = r.cpu_seconds.map_or("-".to_string(), |c| format!("{c:.4}s"));
        eprintln!("{} {} ratio {:>2}%: F={f} cpu={cpu}", r.dataset, r.method, r.ratio.percent());
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
