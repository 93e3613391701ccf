use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lifas::checkpoint;
use lifas::config::RunConfig;
use lifas::data::{load_clip_samples, Exec};
use lifas::error::{Error, Result};
use lifas::evaluate::{confusion_table, evaluate, write_evaluation};
use lifas::export::{pgm, spectrogram_csv};
use lifas::fsio::{read_wav, write_atomic};
use lifas::manifest_io::{ingest, read_manifest, write_manifest};
use lifas::synth_io::{read_task_spec, write_corpus};
use lifas::train::fit;
use lifas_core::audio::resample;
use lifas_core::dsp::{melspectrogram, render_image};
use lifas_core::features::clip_image;
use lifas_core::manifest::split;
use lifas_core::nn::{softmax, Mode};
use lifas_core::synth::SyntheticTaskSpec;
use lifas_core::{Model, Split, Tensor};
use serde_json::{Map, Value};

#[derive(Parser)]
#[command(name = "lifas", version, about = "Spoken language identification from mel spectrogram images")]
struct Cli {
    /// Use one worker thread and no prefetching; results are bit-reproducible.
    #[arg(long, global = true)]
    single_threaded: bool,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the mel spectrogram size of a WAV file and optionally export it.
    Spectrogram {
        input: PathBuf,
        /// Write the rendered image as binary PGM.
        #[arg(long)]
        pgm: Option<PathBuf>,
        /// Write the dB spectrogram as CSV, one mel band per row.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate a synthetic band-noise corpus with a split manifest.
    Synth(SynthArgs),
    /// Build an unsplit manifest from `<root>/<language>/<session>/*.wav`.
    Ingest {
        root: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Assign speaker-disjoint train/val splits with fixed per-language counts.
    Split {
        manifest: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        train_per_lang: usize,
        #[arg(long)]
        val_per_lang: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model on the train split, validating after every epoch.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate a checkpoint on a manifest split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Val)]
        split: SplitArg,
        /// Write confusion.csv, confusion.txt and metrics.json here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Predict the language of WAV files.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    TwoClass,
    SixClass,
}

#[derive(Args)]
struct SynthArgs {
    /// Task description as JSON.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    train_per_class: usize,
    #[arg(long, default_value_t = 50)]
    val_per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    clip_len_samples: Option<usize>,
}

/// Flags mirror the keys of the JSON run configuration and override it.
#[derive(Args, Default)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_lr: Option<f64>,
    #[arg(long)]
    warmup_frac: Option<f64>,
    #[arg(long)]
    freq_mask_param: Option<usize>,
    #[arg(long)]
    time_mask_param: Option<usize>,
    #[arg(long)]
    n_freq_masks: Option<usize>,
    #[arg(long)]
    n_time_masks: Option<usize>,
    #[arg(long)]
    clip_len_samples: Option<usize>,
    #[arg(long)]
    prefetch_depth: Option<usize>,
    /// Any other configuration key, as `key=json`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn overrides(&self) -> Result<Map<String, Value>> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("epochs", self.epochs.map(Value::from));
        put("batch_size", self.batch_size.map(Value::from));
        put("momentum", self.momentum.map(Value::from));
        put("weight_decay", self.weight_decay.map(Value::from));
        put("seed", self.seed.map(Value::from));
        put("max_lr", self.max_lr.map(Value::from));
        put("warmup_frac", self.warmup_frac.map(Value::from));
        put("freq_mask_param", self.freq_mask_param.map(Value::from));
        put("time_mask_param", self.time_mask_param.map(Value::from));
        put("n_freq_masks", self.n_freq_masks.map(Value::from));
        put("n_time_masks", self.n_time_masks.map(Value::from));
        put("clip_len_samples", self.clip_len_samples.map(Value::from));
        put("prefetch_depth", self.prefetch_depth.map(Value::from));
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
            m.insert(k.to_string(), v);
        }
        Ok(m)
    }

    fn load(&self) -> Result<RunConfig> {
        RunConfig::load(self.config.as_deref(), self.overrides()?)
    }
}

fn cmd_spectrogram(input: &Path, pgm_out: Option<&Path>, csv_out: Option<&Path>, config: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::load(config, Map::new())?;
    let sc = &cfg.data.spectrogram;
    let clip = read_wav(input)?;
    let clip = resample(&clip, sc.sample_rate_hz).map_err(|source| Error::Audio {
        path: input.to_path_buf(),
        source,
    })?;
    let spec = melspectrogram(clip.samples(), sc)?;
    println!("{} x {}", spec.n_mels(), spec.n_frames());
    if let Some(p) = pgm_out {
        write_atomic(p, &pgm(&render_image(&spec, sc)))?;
    }
    if let Some(p) = csv_out {
        write_atomic(p, &spectrogram_csv(&spec))?;
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs, exec: &Exec) -> Result<()> {
    let mut spec = match (&args.spec, args.preset) {
        (Some(path), _) => read_task_spec(path)?,
        (None, Some(Preset::TwoClass)) => SyntheticTaskSpec::two_class(args.train_per_class, args.val_per_class, args.seed),
        (None, Some(Preset::SixClass)) => SyntheticTaskSpec::six_class(args.train_per_class, args.val_per_class, args.seed),
        (None, None) => return Err(Error::Config("one of --spec or --preset is required".into())),
    };
    if let Some(n) = args.clip_len_samples {
        spec.clip_len_samples = n;
    }
    let manifest = write_corpus(&spec, &args.out_dir, exec)?;
    println!(
        "wrote {} clips in {} classes to {} ({} train, {} val)",
        spec.n_classes * spec.clips_per_class(),
        spec.n_classes,
        args.out_dir.display(),
        manifest.entries_in(Split::Train).count(),
        manifest.entries_in(Split::Val).count()
    );
    Ok(())
}

fn cmd_train(manifest_path: &Path, out_dir: &Path, run: &RunArgs, exec: &Exec) -> Result<()> {
    let cfg = run.load()?;
    let manifest = read_manifest(manifest_path)?;
    manifest.check_speaker_disjoint()?;
    let spec = cfg.model_spec(manifest.labels())?;
    let model = Model::<f32>::init(spec, cfg.train.seed)?;
    log::info!("model has {} parameters", model.parameter_count());
    let mut resolved = serde_json::to_vec_pretty(&cfg).map_err(|e| Error::json("config", e))?;
    resolved.push(b'\n');
    write_atomic(&out_dir.join("config.json"), &resolved)?;
    let (_, history) = fit(model, &manifest, &cfg.fit_options(Some(out_dir)), exec)?;
    if let Some(ev) = &history.final_eval {
        write_evaluation(out_dir, ev)?;
        print!("{}", confusion_table(&ev.confusion));
        println!("val accuracy {:.4} over {} clips", ev.accuracy, ev.n_eval());
    }
    Ok(())
}

fn cmd_eval(ckpt: &Path, manifest_path: &Path, split_arg: SplitArg, out_dir: Option<&Path>, run: &RunArgs, exec: &Exec) -> Result<()> {
    let cfg = run.load()?;
    let model = checkpoint::load(ckpt)?;
    let manifest = read_manifest(manifest_path)?;
    let split = match split_arg {
        SplitArg::Train => Split::Train,
        SplitArg::Val => Split::Val,
    };
    let ev = evaluate(&model, &manifest, split, &cfg.data, cfg.train.batch_size, exec)?;
    print!("{}", confusion_table(&ev.confusion));
    for (label, acc) in &ev.per_class {
        match acc {
            Some(a) => println!("{label}: {a:.4}"),
            None => println!("{label}: undefined (no clips)"),
        }
    }
    println!("accuracy {:.4} over {} clips", ev.accuracy, ev.n_eval());
    if let Some(dir) = out_dir {
        write_evaluation(dir, &ev)?;
    }
    Ok(())
}

fn cmd_predict(ckpt: &Path, inputs: &[PathBuf], run: &RunArgs, exec: &Exec) -> Result<()> {
    let cfg = run.load()?;
    let model = checkpoint::load(ckpt)?;
    let labels = model.spec().labels.clone();
    let (h, w) = cfg.data.image_dims();
    for input in inputs {
        let samples = load_clip_samples(input, &cfg.data)?;
        let image = clip_image(&samples, &cfg.data.spectrogram, None)?;
        let x = Tensor::from_vec(&[1, 1, h, w], image.into_vec())?;
        let probs = softmax(&exec.install(|| model.forward(&x, Mode::Eval))?)?;
        let scores: Vec<f64> = probs.data().iter().map(|&p| f64::from(p)).collect();
        let best = lifas_core::metrics::argmax(&scores);
        let name = |i: usize| labels.get(i).cloned().unwrap_or_else(|| i.to_string());
        let detail: Vec<String> = scores.iter().enumerate().map(|(i, p)| format!("{}={p:.4}", name(i))).collect();
        println!("{}\t{}\t{}", input.display(), name(best), detail.join(" "));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let exec = Exec::from_env(cli.single_threaded)?;
    match cli.command {
        Command::Spectrogram { input, pgm, csv, config } => {
            cmd_spectrogram(&input, pgm.as_deref(), csv.as_deref(), config.as_deref())
        }
        Command::Synth(args) => cmd_synth(&args, &exec),
        Command::Ingest { root, out } => {
            let m = ingest(&root)?;
            if m.is_empty() {
                return Err(Error::Config(format!("no WAV files found under {}", root.display())));
            }
            write_manifest(&out, &m)?;
            println!("{} clips in {} languages", m.len(), m.labels().len());
            Ok(())
        }
        Command::Split { manifest, out, train_per_lang, val_per_lang, seed } => {
            let m = read_manifest(&manifest)?;
            let s = split(&m, train_per_lang, val_per_lang, seed)?;
            s.check_speaker_disjoint()?;
            write_manifest(&out, &s)?;
            println!(
                "{} train, {} val",
                s.entries_in(Split::Train).count(),
                s.entries_in(Split::Val).count()
            );
            Ok(())
        }
        Command::Train { manifest, out_dir, run } => cmd_train(&manifest, &out_dir, &run, &exec),
        Command::Eval { checkpoint, manifest, split, out_dir, run } => {
            cmd_eval(&checkpoint, &manifest, split, out_dir.as_deref(), &run, &exec)
        }
        Command::Predict { checkpoint, inputs, run } => cmd_predict(&checkpoint, &inputs, &run, &exec),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
