use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use modify_core::cli::ablation::{run_ablation, run_dir};
use modify_core::cli::config::{parse_config, parse_kv_text, Mode, TrainConfig};
use modify_core::cli::emit::{
    accuracy_csv, emit_flow_channel, emit_loss_curves, iterations_csv, metrics_csv, parse_accuracy_csv,
    parse_iterations_csv,
};
use modify_core::synthdata::{generate_dataset, write_samples};
use modify_core::trainer::{IterationSummary, RunResult, Trainer};
use modify_core::{verify, Error, Result};

#[derive(Parser)]
#[command(name = "modify", version, about = "Momentum-difficulty scheduled training on a synthetic color-shift task")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic dataset as binary sample files.
    GenData(ConfigArgs),
    /// Train one run and write its logs, accuracies and checkpoint.
    Train(ConfigArgs),
    /// Run the six ablation modes over a list of seeds.
    Ablation {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated seeds.
        #[arg(long, default_value = "0,1,2,3,4", value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Emit the capability vs augmentation-rate plot data for a FULL run.
    FlowChannel {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Read `iterations.csv` from this run directory instead of training.
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
    /// Emit smoothed loss curves for BASELINE, FULL and STRONG_DA runs.
    LossCurves {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Three run directories (no DA, MoDify, strong DA) instead of training.
        #[arg(long, num_args = 3, value_names = ["NO_DA", "MODIFY", "STRONG_DA"])]
        run_dirs: Option<Vec<PathBuf>>,
    },
    /// Run the acceptance suite.
    Verify {
        /// Scratch directory for intermediate runs (default: <out>/verify).
        #[arg(long)]
        scratch: Option<PathBuf>,
        #[arg(long, env = "MODIFY_OUT", default_value = "runs")]
        out_dir: PathBuf,
    },
}

/// Flags mirror the config-file keys; flags win over `--config`.
#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Omit the generation timestamp comment from SVG output.
    #[arg(long)]
    no_timestamp: bool,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// A number, or `ln_c` for the log of the class count.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    t_easy: Option<String>,
    #[arg(long)]
    t_hard: Option<String>,
    #[arg(long)]
    base_lr: Option<String>,
    #[arg(long)]
    momentum: Option<String>,
    #[arg(long)]
    weight_decay: Option<String>,
    #[arg(long)]
    poly_power: Option<String>,
    #[arg(long)]
    n_train: Option<String>,
    #[arg(long)]
    n_eval: Option<String>,
    #[arg(long)]
    k_targets: Option<String>,
    #[arg(long)]
    image_size: Option<String>,
    #[arg(long)]
    n_classes: Option<String>,
    /// Comma-separated hidden widths, or `none`.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    jitter_amplitude: Option<String>,
    /// Output root; `MODIFY_OUT` overrides the config file.
    #[arg(long, env = "MODIFY_OUT")]
    out_dir: Option<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let flags = [
            ("mode", &self.mode),
            ("seed", &self.seed),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("lambda", &self.lambda),
            ("alpha", &self.alpha),
            ("t_easy", &self.t_easy),
            ("t_hard", &self.t_hard),
            ("base_lr", &self.base_lr),
            ("momentum", &self.momentum),
            ("weight_decay", &self.weight_decay),
            ("poly_power", &self.poly_power),
            ("n_train", &self.n_train),
            ("n_eval", &self.n_eval),
            ("k_targets", &self.k_targets),
            ("image_size", &self.image_size),
            ("n_classes", &self.n_classes),
            ("hidden", &self.hidden),
            ("jitter_amplitude", &self.jitter_amplitude),
            ("out_dir", &self.out_dir),
        ];
        flags.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
    }

    /// Parse the config; `default_mode` fills in `mode` when neither the
    /// file nor the flags set it.
    fn load(&self, default_mode: Option<Mode>) -> Result<TrainConfig> {
        let text = match &self.config {
            Some(p) => Some(
                fs::read_to_string(p)
                    .map_err(|e| Error::config("config", format!("cannot read {}: {e}", p.display())))?,
            ),
            None => None,
        };
        let mut overrides = self.overrides();
        if let Some(m) = default_mode {
            let in_file = match &text {
                Some(t) => parse_kv_text(t)?.iter().any(|(k, _)| k == "mode"),
                None => false,
            };
            if !in_file && self.mode.is_none() {
                overrides.insert(0, ("mode".into(), m.name().into()));
            }
        }
        parse_config(text.as_deref(), &overrides)
    }

    fn timestamp(&self) -> Option<String> {
        (!self.no_timestamp).then(timestamp)
    }
}

fn timestamp() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("unix time {secs}")
}

fn gen_data(cfg: &TrainConfig) -> Result<()> {
    let data = generate_dataset(&cfg.data)?;
    let dir = cfg.out_dir.join(format!("data-s{}", cfg.seed));
    fs::create_dir_all(&dir)?;
    let c = data.n_classes;
    let mut f = fs::File::create(dir.join("train.mdfy"))?;
    write_samples(&mut f, &data.train, c)?;
    for d in &data.eval {
        let mut f = fs::File::create(dir.join(format!("eval_{}.mdfy", d.spec.name)))?;
        write_samples(&mut f, &d.samples, c)?;
    }
    println!(
        "wrote {} training and {} eval samples to {}",
        data.train.len(),
        data.eval.iter().map(|d| d.samples.len()).sum::<usize>(),
        dir.display()
    );
    Ok(())
}

/// Outcome of [`train_run`].
enum Trained {
    Fresh(Box<RunResult>),
    /// The checkpoint was already final and the run's outputs are on disk.
    Finished,
}

/// Train with a checkpoint after every epoch, resuming from one if present.
fn train_run(cfg: &TrainConfig) -> Result<(PathBuf, Trained)> {
    let dir = run_dir(&cfg.out_dir, cfg);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.txt"), cfg.to_kv_text())?;
    let ckpt = dir.join("checkpoint.mdck");
    let mut t = if ckpt.exists() {
        let t = Trainer::load_checkpoint(cfg, &ckpt)?;
        let outputs = ["metrics.csv", "iterations.csv", "accuracy.csv"];
        if t.epochs_done() >= cfg.epochs && outputs.iter().all(|f| dir.join(f).exists()) {
            eprintln!("{} already finished; reusing its outputs", cfg.run_name());
            return Ok((dir, Trained::Finished));
        }
        eprintln!("resuming {} at epoch {}; logs cover the remaining epochs", cfg.run_name(), t.epochs_done());
        t
    } else {
        Trainer::new(cfg)?
    };
    while t.epochs_done() < cfg.epochs {
        t.run_epoch()?;
        t.save_checkpoint(&ckpt)?;
    }
    let r = t.finish()?;
    write_run(&dir, &r)?;
    Ok((dir, Trained::Fresh(Box::new(r))))
}

fn write_run(dir: &Path, r: &RunResult) -> Result<()> {
    fs::write(dir.join("metrics.csv"), metrics_csv(&r.metrics))?;
    fs::write(dir.join("iterations.csv"), iterations_csv(&r.iterations))?;
    fs::write(dir.join("accuracy.csv"), accuracy_csv(&r.accuracies))?;
    Ok(())
}

/// Iteration log of a run, trained now or read back from disk.
fn run_log(cfg: &TrainConfig) -> Result<Vec<IterationSummary>> {
    match train_run(cfg)? {
        (_, Trained::Fresh(r)) => Ok(r.iterations),
        (dir, Trained::Finished) => read_log(&dir),
    }
}

fn train_cmd(args: &ConfigArgs) -> Result<()> {
    let cfg = args.load(None)?;
    let (dir, trained) = train_run(&cfg)?;
    let accuracies = match trained {
        Trained::Fresh(r) => r.accuracies,
        Trained::Finished => parse_accuracy_csv(&fs::read_to_string(dir.join("accuracy.csv"))?)?,
    };
    for a in &accuracies {
        println!("{:<10} {:.4}", a.domain, a.accuracy);
    }
    let targets: Vec<f64> = accuracies.iter().filter(|a| !a.is_source).map(|a| a.accuracy).collect();
    println!("mean target accuracy {:.4}; outputs in {}", modify_core::stats::mean(&targets), dir.display());
    Ok(())
}

fn ablation_cmd(args: &ConfigArgs, seeds: &[u64]) -> Result<()> {
    // the ablation driver sets the mode itself
    let cfg = args.load(Some(Mode::Full))?;
    let report = run_ablation(&cfg, seeds, &cfg.out_dir)?;
    println!("{:<15} {:<12} {:>8} {:>8}", "mode", "domain", "mean", "std");
    for r in report.summary() {
        println!("{:<15} {:<12} {:>8.4} {:>8.4}", r.mode, r.domain, r.mean, r.std);
    }
    if report.resumed > 0 {
        println!("{} run(s) reused from earlier invocations", report.resumed);
    }
    match report.failures.into_iter().next() {
        None => Ok(()),
        Some(f) => {
            eprintln!("run {} seed {} failed; partial results written", f.mode, f.seed);
            Err(f.error)
        }
    }
}

fn read_log(dir: &Path) -> Result<Vec<IterationSummary>> {
    let p = dir.join("iterations.csv");
    let text = fs::read_to_string(&p).map_err(|e| Error::Format(format!("cannot read {}: {e}", p.display())))?;
    parse_iterations_csv(&text)
}

fn flow_channel_cmd(args: &ConfigArgs, from: Option<&Path>) -> Result<()> {
    let cfg = args.load(Some(Mode::Full))?;
    let log = match from {
        Some(d) => read_log(d)?,
        None => run_log(&cfg)?,
    };
    let rows = emit_flow_channel(&cfg.out_dir, &log, args.timestamp())?;
    let mc: Vec<f64> = rows.iter().map(|r| r.mean_m_c).collect();
    let ar: Vec<f64> = rows.iter().map(|r| r.mean_applied_rate).collect();
    println!(
        "{} windows; Spearman(M_c, applied rate) = {:.4}; wrote {}",
        rows.len(),
        modify_core::stats::spearman(&mc, &ar),
        cfg.out_dir.join("flow_channel.csv").display()
    );
    Ok(())
}

fn loss_curves_cmd(args: &ConfigArgs, from: Option<&[PathBuf]>) -> Result<()> {
    let cfg = args.load(Some(Mode::Full))?;
    let logs = match from {
        Some(dirs) => dirs.iter().map(|d| read_log(d)).collect::<Result<Vec<_>>>()?,
        None => [Mode::Baseline, Mode::Full, Mode::StrongDa]
            .into_iter()
            .map(|m| {
                let mut c = cfg.clone();
                c.mode = m;
                run_log(&c)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let rows = emit_loss_curves(&cfg.out_dir, &logs[0], &logs[1], &logs[2], args.timestamp())?;
    if let Some(last) = rows.last() {
        println!(
            "final smoothed loss: no DA {:.4}, MoDify {:.4}, strong DA {:.4}",
            last.loss_no_da, last.loss_modify, last.loss_strong_da
        );
    }
    Ok(())
}

fn verify_cmd(scratch: Option<PathBuf>, out_dir: &Path) -> Result<bool> {
    let scratch = scratch.unwrap_or_else(|| out_dir.join("verify"));
    fs::create_dir_all(&scratch)?;
    let outcomes = verify::run_all(&scratch, |o| println!("{o}"));
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData(a) => a.load(Some(Mode::Baseline)).and_then(|c| gen_data(&c)),
        Command::Train(a) => train_cmd(a),
        Command::Ablation { cfg, seeds } => ablation_cmd(cfg, seeds),
        Command::FlowChannel { cfg, run_dir } => flow_channel_cmd(cfg, run_dir.as_deref()),
        Command::LossCurves { cfg, run_dirs } => loss_curves_cmd(cfg, run_dirs.as_deref()),
        Command::Verify { scratch, out_dir } => match verify_cmd(scratch.clone(), out_dir) {
            Ok(true) => return ExitCode::SUCCESS,
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
