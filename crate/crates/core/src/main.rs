use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use physaug::classifiers::{fit, ClassifierSpec};
use physaug::experiment::{emit_report, run_experiment, ExperimentConfig};
use physaug::gan::{generate, train, GanConfig, GanModel};
use physaug::metrics::{evaluate_quality, ScoreMetric};
use physaug::mixture::{train_mixture, MixturePlan};
use physaug::oracle::{generate_corpus, write_corpus, OracleSpec};
use physaug::signal::{load_recordings_dir, preprocess, Label, Split, Window, WindowedDataset};

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "physaug", version, about = "Conditional recurrent GAN augmentation for airflow windows")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelArg {
    #[value(name = "A")]
    A,
    #[value(name = "N")]
    N,
}

#[derive(Subcommand)]
enum Cmd {
    /// Preprocess a directory of recording documents into a windowed dataset.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic oracle corpus as recording documents.
    OracleGen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one GAN; writes every checkpoint, the final model and the loss history.
    TrainGan {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate labeled windows from a checkpoint.
    Generate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, value_enum, ignore_case = true)]
        label: LabelArg,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one GAN per subset of a mixture plan.
    TrainMixture {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// TSTR, TRTS, T-metric and MMD of synthetic against real windows.
    EvaluateQuality {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit the four downstream classifiers.
    TrainClassifiers {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run exp1, exp2 or exp3 and write report.json, summary.csv and trajectory.svg.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn mkdir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()).into())
}

/// Training windows of a dataset; all windows when nothing is tagged train.
fn training_windows(ds: &WindowedDataset) -> Vec<Window> {
    let train = ds.tagged_vec(Split::Train);
    if train.is_empty() { ds.windows().to_vec() } else { train }
}

fn save_checkpoints(dir: &Path, final_model: &GanModel, checkpoints: &[GanModel], prefix: &str) -> CliResult<()> {
    for cp in checkpoints {
        cp.save(dir.join(format!("{prefix}epoch_{:05}.json", cp.epoch)))?;
    }
    final_model.save(dir.join(format!("{prefix}final.json")))?;
    Ok(())
}

/// Returns whether any warning was flagged.
fn run(cmd: Cmd) -> CliResult<bool> {
    match cmd {
        Cmd::Ingest { input, out } => {
            let recs: Vec<_> = load_recordings_dir(&input)?.iter().map(preprocess).collect();
            let ds = WindowedDataset::from_recordings(&recs, Split::Train)?;
            info!("{} recordings, {} windows", recs.len(), ds.len());
            ds.save(&out)?;
        }
        Cmd::OracleGen { spec, out } => {
            let recs = generate_corpus(&OracleSpec::load(&spec)?)?;
            write_corpus(&recs, &out)?;
            info!("wrote {} recordings to {}", recs.len(), out.display());
        }
        Cmd::TrainGan { data, config, out } => {
            let ds = WindowedDataset::load(&data)?;
            let cfg = GanConfig::load(&config)?;
            let epochs = cfg.epochs;
            let windows = training_windows(&ds);
            mkdir(&out)?;
            let outcome = train(GanModel::new(cfg)?, &windows, epochs, |m| info!("checkpoint at epoch {}", m.epoch))?;
            save_checkpoints(&out, &outcome.model, &outcome.checkpoints, "")?;
            write_json(&out.join("history.json"), &outcome.history)?;
        }
        Cmd::Generate { ckpt, label, count, seed, out } => {
            let model = GanModel::load(&ckpt)?;
            let label = match label {
                LabelArg::A => Label::Apneic,
                LabelArg::N => Label::NonApneic,
            };
            write_json(&out, &generate(&model, label, count, seed)?)?;
        }
        Cmd::TrainMixture { data, plan, config, out } => {
            let ds = WindowedDataset::load(&data)?;
            let plan = MixturePlan::load(&plan)?;
            let cfg = GanConfig::load(&config)?;
            let gans = train_mixture(&plan, &training_windows(&ds), &cfg)?;
            mkdir(&out)?;
            let mut draws = Vec::new();
            for (j, g) in gans.iter().enumerate() {
                save_checkpoints(&out, &g.outcome.model, &g.outcome.checkpoints, &format!("gan{j}_"))?;
                draws.push(g.draws.clone());
            }
            write_json(&out.join("draws.json"), &draws)?;
        }
        Cmd::EvaluateQuality { real, synth, out, seed } => {
            let real: Vec<Window> = read_json(&real)?;
            let synth: Vec<Window> = read_json(&synth)?;
            let report = evaluate_quality(&real, &synth, &ClassifierSpec::all(seed), ScoreMetric::Accuracy, seed)?;
            write_json(&out, &report)?;
        }
        Cmd::TrainClassifiers { data, out, seed } => {
            let ds = WindowedDataset::load(&data)?;
            let windows = training_windows(&ds);
            mkdir(&out)?;
            for spec in ClassifierSpec::all(seed) {
                let path = out.join(format!("{}.json", spec.kind().name()));
                fit(&spec, &windows)?.save(&path)?;
                info!("wrote {}", path.display());
            }
        }
        Cmd::Experiment { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_experiment(&cfg)?;
            for p in emit_report(&report, &out)? {
                info!("wrote {}", p.display());
            }
            for w in &report.warnings {
                warn!("{w}");
            }
            return Ok(report.has_warnings());
        }
    }
    Ok(false)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli.cmd) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
