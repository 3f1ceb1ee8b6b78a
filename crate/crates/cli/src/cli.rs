use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use microgest::pipeline::{DetectMethod, Variant};
use microgest::Error;

use crate::commands::{self, BenchOptions, ProfileSource, TrainData};
use crate::config::{keys_help, Settings};

#[derive(Parser, Debug)]
#[command(name = "microgest", version, about = "Event-driven sEMG micro-gesture pipeline")]
pub struct Cli {
    /// TOML file of configuration keys.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Master seed, same as --set seed=N.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log progress (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct ProfileArgs {
    /// Calibration profile written by `calibrate`.
    #[arg(long, value_name = "FILE", conflicts_with = "calibrate_from")]
    pub profile: Option<PathBuf>,
    /// Calibrate on the fly from a neutral and an action recording.
    #[arg(long, num_args = 2, value_names = ["NEUTRAL", "ACTION"])]
    pub calibrate_from: Vec<PathBuf>,
}

impl ProfileArgs {
    fn source(&self, fallback: ProfileSource<'static>) -> ProfileSource<'_> {
        match (&self.profile, self.calibrate_from.as_slice()) {
            (Some(p), _) => ProfileSource::File(p),
            (None, [n, a]) => ProfileSource::Recordings(n, a),
            _ => fallback,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a labeled synthetic stream (or calibration recordings).
    Synth {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Write neutral and action calibration recordings instead.
        #[arg(long)]
        calibration: bool,
        /// Same as --set synth.classes=N.
        #[arg(long)]
        classes: Option<usize>,
        /// Same as --set synth.channels=N.
        #[arg(long)]
        channels: Option<usize>,
        /// Same as --set synth.actions_per_class=N.
        #[arg(long)]
        actions_per_class: Option<usize>,
        /// Same as --set synth.snr_db=X.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
        /// Same as --set synth.distractors=N.
        #[arg(long)]
        distractors: Option<usize>,
    },
    /// Build a calibration profile; without inputs the generator's recordings are used.
    Calibrate {
        #[arg(long, value_name = "FILE", requires = "action")]
        neutral: Option<PathBuf>,
        #[arg(long, value_name = "FILE", requires = "neutral")]
        action: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Encode a signal file into spikes.
    Encode {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Detect transient actions in a signal file.
    Detect {
        #[arg(long, default_value = "tad-lif", value_parser = parse_method)]
        method: DetectMethod,
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Ground-truth labels; fills recall and precision.
        #[arg(long, value_name = "FILE")]
        labels: Option<PathBuf>,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train the classifier on oracle-segmented actions.
    Train {
        /// Labeled stream to train on; defaults to a generated dataset.
        #[arg(long, value_name = "FILE", requires = "labels")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "FILE", requires = "input")]
        labels: Option<PathBuf>,
        #[arg(long, default_value = "full", value_parser = parse_variant)]
        variant: Variant,
        /// Same as --set train.epochs=N.
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Detect and classify actions in a signal file.
    Infer {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Detection, classification and energy benchmark in one JSON report.
    Bench {
        /// Extra variant to train next to `full`; repeatable, `all` for every variant.
        #[arg(long, value_name = "VARIANT")]
        ablate: Vec<String>,
        #[arg(long)]
        skip_detection: bool,
        #[arg(long)]
        skip_classification: bool,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

fn parse_method(s: &str) -> Result<DetectMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_STATE: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::State(_) | Error::Version { .. } => EXIT_STATE,
        _ => EXIT_VALIDATION,
    }
}

fn command() -> clap::Command {
    let keys = keys_help();
    Cli::command().after_help(keys.clone()).mut_subcommands(|sc| sc.after_help(keys.clone()))
}

/// Resolves the configuration: defaults, then `--config`, then flags.
pub fn settings(cli: &Cli) -> Result<Settings, Error> {
    let mut s = Settings::default();
    if let Some(path) = &cli.config {
        if !path.is_file() {
            return Err(Error::Io {
                path: path.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "config file not found"),
            });
        }
        s.apply_toml_file(path)?;
    }
    s.apply_assignments(cli.set.iter().map(String::as_str))?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    let mut shorthand = |key: &str, v: Option<String>| v.map_or(Ok(()), |v| s.set(key, &v));
    match &cli.command {
        Command::Synth { classes, channels, actions_per_class, snr_db, distractors, .. } => {
            shorthand("synth.classes", classes.map(|v| v.to_string()))?;
            shorthand("synth.channels", channels.map(|v| v.to_string()))?;
            shorthand("synth.actions_per_class", actions_per_class.map(|v| v.to_string()))?;
            shorthand("synth.snr_db", snr_db.map(|v| v.to_string()))?;
            shorthand("synth.distractors", distractors.map(|v| v.to_string()))?;
        }
        Command::Train { epochs, .. } => shorthand("train.epochs", epochs.map(|v| v.to_string()))?,
        _ => {}
    }
    s.finalize()?;
    Ok(s)
}

fn dispatch(cli: &Cli, s: &Settings) -> Result<(), Error> {
    match &cli.command {
        Command::Synth { out, calibration, .. } => commands::synth(s, out, *calibration),
        Command::Calibrate { neutral, action, out } => {
            commands::calibrate_cmd(s, neutral.as_deref(), action.as_deref(), out)
        }
        Command::Encode { input, profile, out } => {
            commands::encode(s, input, profile.source(ProfileSource::Missing), out)
        }
        Command::Detect { method, input, labels, profile, out } => {
            commands::detect_cmd(s, *method, input, labels.as_deref(), profile.source(ProfileSource::Missing), out)
        }
        Command::Train { input, labels, variant, profile, out, .. } => {
            let data = match (input, labels) {
                (Some(input), Some(labels)) => Some(TrainData { input, labels }),
                _ => None,
            };
            commands::train(s, *variant, data, profile.source(ProfileSource::Synthetic), out)
        }
        Command::Infer { input, model, profile, out } => {
            commands::infer_cmd(s, input, model, profile.source(ProfileSource::Missing), out)
        }
        Command::Bench { ablate, skip_detection, skip_classification, profile, out } => {
            let mut variants = vec![Variant::Full];
            for a in ablate {
                let extra: Vec<Variant> = if a == "all" { Variant::ALL.to_vec() } else { vec![a.parse()?] };
                for v in extra {
                    if !variants.contains(&v) {
                        variants.push(v);
                    }
                }
            }
            let opts = BenchOptions {
                variants,
                detection: !skip_detection,
                classification: !skip_classification,
            };
            commands::bench(s, &opts, profile.source(ProfileSource::Synthetic), out)
        }
    }
}

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_VALIDATION;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();

    let result = settings(&cli).and_then(|s| match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config { key: "threads".into(), msg: e.to_string() })?
            .install(|| dispatch(&cli, &s)),
        None => dispatch(&cli, &s),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
