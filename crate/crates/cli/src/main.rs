//! `quake`: synthesize data, train and evaluate detectors, compare against
//! STA/LTA, and run live detection over UDP.

mod config;
mod live;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::RunConfig;
use quake_core::features::FeatureKind;
use quake_core::harness::{self, Dataset, ExperimentConfig, TrainRequest};
use quake_core::nn::{LstmReadout, ModelKind, TrainConfig};
use quake_core::synth::{self, SynthConfig};
use quake_core::waveform::Split;
use quake_core::Execution;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "quake", version, about = "Earthquake detection from waveform data")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for synthesis and training (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// More logging (-v debug, -vv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Cnn,
    Lstm,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Cnn => ModelKind::Cnn,
            KindArg::Lstm => ModelKind::Lstm,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FeatureArg {
    Mfcc,
    LogFilterbank,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReadoutArg {
    LastStep,
    Flatten,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

/// Feature options shared by commands that extract features.
#[derive(Args, Debug, Clone, Default)]
struct SetupArgs {
    /// Model input rate in Hz.
    #[arg(long)]
    rate: Option<u32>,
    /// Window length in seconds.
    #[arg(long)]
    window: Option<f64>,
    #[arg(long, value_enum)]
    features: Option<FeatureArg>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic earthquake / non-earthquake corpus.
    Synth {
        #[arg(long)]
        n_quake: Option<usize>,
        #[arg(long)]
        n_noise: Option<usize>,
        #[arg(long)]
        rate: Option<u32>,
        /// Clip length in seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Write the feature matrix of every clip's loudest window.
    Featurize {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        setup: SetupArgs,
    },
    /// Train a CNN or LSTM on the train split.
    Train {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum)]
        model: KindArg,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long, value_enum)]
        readout: Option<ReadoutArg>,
        #[command(flatten)]
        setup: SetupArgs,
    },
    /// Score a model file on one split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Train and score every model × rate × window cell.
    Sweep {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        windows: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<u32>>,
        #[arg(long, value_delimiter = ',', value_enum)]
        models: Option<Vec<KindArg>>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// STA/LTA threshold sweep next to trained models on the test split.
    CompareStalta {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Model files to include (repeatable).
        #[arg(long = "model")]
        models: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
    },
    /// Run the streaming detector on a WAV file or a UDP socket.
    Detect {
        #[arg(long)]
        model: PathBuf,
        /// Replay this file through the detector.
        #[arg(long, conflicts_with = "listen")]
        wav: Option<PathBuf>,
        /// Receive QUKE datagrams on this address, e.g. 127.0.0.1:9000.
        #[arg(long)]
        listen: Option<String>,
        /// Replay speed for --wav; omit for as fast as possible.
        #[arg(long)]
        speed: Option<f64>,
        /// Samples per replayed packet for --wav (1 to 256).
        #[arg(long, default_value_t = 256)]
        packet_samples: usize,
        /// Stop listening after this many seconds without data.
        #[arg(long)]
        idle_timeout: Option<f64>,
        /// Alarm log path [default: <out>/alarms.jsonl].
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Warm-up before the first evaluation, seconds.
        #[arg(long)]
        warmup: Option<f64>,
    },
    /// Stream a WAV file as QUKE datagrams to a UDP address.
    Replay {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        dest: String,
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Samples per packet (1 to 256).
        #[arg(long, default_value_t = 256)]
        packet_samples: usize,
    },
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    seed: Option<u64>,
    execution: Execution,
}

impl Ctx {
    fn manifest(&self, given: &Option<PathBuf>) -> PathBuf {
        given.clone().unwrap_or_else(|| self.out.join("manifest.csv"))
    }

    fn setup(&self, args: &SetupArgs) -> quake_core::nn::FeatureSetup {
        let kind = match args.features {
            Some(FeatureArg::Mfcc) => FeatureKind::Mfcc,
            Some(FeatureArg::LogFilterbank) => FeatureKind::LogFilterbank,
            None => self.cfg.setup.kind,
        };
        harness::feature_setup(
            &self.cfg.features,
            args.rate.unwrap_or(self.cfg.setup.rate_hz),
            args.window.unwrap_or(self.cfg.setup.window_s),
            kind,
        )
    }

    fn train_config(&self) -> TrainConfig {
        let mut t = self.cfg.train.clone();
        if let Some(s) = self.seed {
            t.rng_seed = s;
        }
        t.execution = self.execution;
        t
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// `Ok(false)` means the command ran but some requested work failed.
fn run(cli: Cli) -> Result<bool> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let seed = cli.seed.or(cfg.seed);
    let execution = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let ctx = Ctx { cfg, out, seed, execution };
    match cli.command {
        Command::Synth { n_quake, n_noise, rate, duration } => {
            let base = &ctx.cfg.synth;
            let sc = SynthConfig {
                n_quake: n_quake.unwrap_or(base.n_quake),
                n_noise: n_noise.unwrap_or(base.n_noise),
                sample_rate: rate.unwrap_or(base.sample_rate),
                duration_s: duration.unwrap_or(base.duration_s),
                seed: ctx.seed.unwrap_or(base.seed),
                train_fraction: base.train_fraction,
            };
            let s = synth::write_corpus(&sc, &ctx.out)?;
            println!(
                "wrote {} clips ({} earthquake, {} non-earthquake; {} train / {} test)",
                s.n_quake + s.n_noise,
                s.n_quake,
                s.n_noise,
                s.n_train,
                s.n_test
            );
            println!("manifest: {}", s.manifest.display());
            println!("events:   {}", s.events.display());
            Ok(true)
        }
        Command::Featurize { manifest, setup } => {
            let setup = ctx.setup(&setup);
            let r = harness::cmd_featurize(&ctx.manifest(&manifest), &setup, &ctx.out)?;
            println!("featurized {} clips; index {}", r.written.len(), r.index.display());
            for (path, err) in &r.failures {
                eprintln!("failed: {path}: {err}");
            }
            Ok(r.failures.is_empty())
        }
        Command::Train { manifest, model, epochs, batch_size, learning_rate, readout, setup } => {
            let mut train = ctx.train_config();
            train.epochs = epochs.unwrap_or(train.epochs);
            train.batch_size = batch_size.unwrap_or(train.batch_size);
            train.learning_rate = learning_rate.unwrap_or(train.learning_rate);
            let readout = match readout {
                Some(ReadoutArg::LastStep) => LstmReadout::LastStep,
                Some(ReadoutArg::Flatten) => LstmReadout::Flatten,
                None => ctx.cfg.setup.readout,
            };
            let req = TrainRequest { kind: model.into(), readout, setup: ctx.setup(&setup), train };
            let r = harness::cmd_train(&ctx.manifest(&manifest), &req, &ctx.out)?;
            let last = r.history.last().context("empty training history")?;
            println!(
                "epochs {} | final loss {:.5} | train accuracy {:.4} | seed {}",
                last.epoch, last.loss, r.train_accuracy, req.train.rng_seed
            );
            println!("model:   {}", r.model_path.display());
            println!("history: {}", r.history_path.display());
            Ok(true)
        }
        Command::Eval { model, manifest, split } => {
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            };
            let report = harness::cmd_eval(&model, &ctx.manifest(&manifest), split, ctx.execution)?;
            print!("{report}");
            Ok(true)
        }
        Command::Sweep { manifest, windows, rates, models, epochs } => {
            let s = &ctx.cfg.sweep;
            let mut train = ctx.train_config();
            train.epochs = epochs.unwrap_or(train.epochs);
            let exp = ExperimentConfig {
                windows_s: windows.unwrap_or_else(|| s.windows_s.clone()),
                rates_hz: rates.unwrap_or_else(|| s.rates_hz.clone()),
                models: models.map(|m| m.into_iter().map(Into::into).collect()).unwrap_or_else(|| s.models.clone()),
                feature_kind: ctx.cfg.setup.kind,
                readout: ctx.cfg.setup.readout,
                features: ctx.cfg.features.clone(),
                train,
            };
            let r = harness::cmd_sweep(&ctx.manifest(&manifest), &exp, &ctx.out, ctx.execution)?;
            print!("{}", harness::sweep_csv(&r.rows));
            println!("csv: {}", r.csv.display());
            for c in &r.charts {
                println!("chart: {}", c.display());
            }
            Ok(r.rows.iter().all(|row| !row.failed()))
        }
        Command::CompareStalta { manifest, models, thresholds } => {
            let manifest = ctx.manifest(&manifest);
            let dataset = Dataset::load(&manifest)?;
            let events = manifest.with_file_name("events.csv");
            let onsets = if events.exists() {
                synth::read_events(&events)?
            } else {
                log::warn!("{} not found; time-to-alarm will be unavailable", events.display());
                Default::default()
            };
            let classifiers = models.iter().map(|p| harness::read_classifier(p)).collect::<Result<Vec<_>, _>>()?;
            let thresholds = thresholds.unwrap_or_else(|| ctx.cfg.stalta.thresholds.clone());
            let rows = harness::compare_stalta(
                &dataset,
                &onsets,
                &ctx.cfg.stalta.base(),
                &thresholds,
                &classifiers,
                &ctx.cfg.detector,
                ctx.execution,
            )?;
            let text = harness::comparison_csv(&rows);
            std::fs::create_dir_all(&ctx.out)?;
            let path = ctx.out.join("compare_stalta.csv");
            std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
            print!("{text}");
            println!("csv: {}", path.display());
            Ok(true)
        }
        Command::Detect { model, wav, listen, speed, packet_samples, idle_timeout, log, threshold, warmup } => {
            let classifier = harness::read_classifier(&model)?;
            let mut det = ctx.cfg.detector.clone();
            det.alarm_threshold = threshold.unwrap_or(det.alarm_threshold);
            det.min_buffer_s = warmup.unwrap_or(det.min_buffer_s);
            let log_path = log.unwrap_or_else(|| ctx.out.join("alarms.jsonl"));
            let source = match (wav, listen) {
                (Some(w), None) => live::Source::Wav { path: w, speed: speed.unwrap_or(f64::INFINITY), packet_samples },
                (None, Some(addr)) => live::Source::Udp { addr, idle_timeout },
                _ => bail!("give exactly one of --wav or --listen"),
            };
            live::detect(&classifier, source, &det, &ctx.cfg.receive, &log_path)?;
            Ok(true)
        }
        Command::Replay { wav, dest, speed, packet_samples } => {
            live::replay(&wav, &dest, speed, packet_samples)?;
            Ok(true)
        }
    }
}
