//! `krgs`: synthetic data, fitting, prediction, cross-validation and Monte
//! Carlo experiment runs from the command line.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 solver failure
//! (including a run whose failed-trial share exceeds the threshold).

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use krgs::data::{self, make_pairs, pair_targets, random_node_table, SynthParams};
use krgs::experiment::{
    self, load_experiment_data, monte_carlo_experiment, nmse_db, select_hyperparams, ExperimentConfig, GridPoint,
};
use krgs::{fit_krgs, Error, KrgsModel, Matrix, TrainingSet};

#[derive(Parser)]
#[command(name = "krgs", version, about = "Kernel regression over graphs robust to sparse noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic node table and signal series as CSV.
    Synth {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit KRGS on the training pairs and save the model.
    Fit {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Model file (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Per-iteration summary CSV; defaults to the model path with a `.csv` extension.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Predict next-day signals for every day of a signals CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        signals: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid search over (alpha, beta, sigma) on corrupted training pairs.
    Cv {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Scores CSV (`alpha,beta,sigma,score_db`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full Monte Carlo experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Also write an SVG chart of NMSE against iteration.
        #[arg(long)]
        plot: bool,
        /// Override a config key, e.g. `--set trials=20`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Node table CSV; use together with `--signals`.
    #[arg(long)]
    nodes: Option<PathBuf>,
    #[arg(long)]
    signals: Option<PathBuf>,
    /// Override a config key, e.g. `--set alpha=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        build_config(self.config.as_deref(), self.seed, &self.overrides, |c| {
            if self.nodes.is_some() {
                c.nodes_path = self.nodes.clone();
            }
            if self.signals.is_some() {
                c.signals_path = self.signals.clone();
            }
        })
    }
}

fn build_config(
    path: Option<&Path>,
    seed: Option<u64>,
    overrides: &[String],
    extra: impl FnOnce(&mut ExperimentConfig),
) -> Result<ExperimentConfig, Error> {
    let mut config = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for o in overrides {
        config.apply_override(o)?;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    extra(&mut config);
    config.validate()?;
    Ok(config)
}

/// What `fit` writes and `predict` reads.
#[derive(Serialize, Deserialize)]
struct SavedModel {
    selection: GridPoint,
    model: KrgsModel,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_solver_failure() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> Error + '_ {
    move |e| Error::Io {
        context: format!("writing {}", path.display()),
        source: e,
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Synth { cfg, out_dir } => {
            let config = cfg.resolve()?;
            let seed = config.synth_seed();
            let table = random_node_table(config.synth_nodes, seed)?;
            let params = SynthParams {
                days: config.synth_days,
                bandwidth: config.synth_bandwidth,
                rho: config.synth_rho,
                noise_floor: config.synth_noise_floor,
                offset: config.synth_offset,
                amplitude: config.synth_amplitude,
                seed,
                ..SynthParams::default()
            };
            let series = data::synth_dataset(&table.geodesic_graph()?, &params)?;
            fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
            data::write_nodes(out_dir.join("nodes.csv"), &table)?;
            data::write_signals(out_dir.join("signals.csv"), &series)?;
            println!(
                "wrote {} nodes and {} days to {}",
                table.len(),
                series.len(),
                out_dir.display()
            );
        }
        Command::Fit { cfg, out, summary } => {
            let config = cfg.resolve()?;
            let data = load_experiment_data(&config)?;
            let selection = match (config.alpha, config.beta, config.sigma, config.kernel) {
                (Some(alpha), Some(beta), sigma, kernel)
                    if sigma.is_some() || kernel == experiment::KernelFamily::Linear =>
                {
                    GridPoint { alpha, beta, sigma }
                }
                _ => select_hyperparams(&config, &data)?.outcome.best,
            };
            let train = TrainingSet::new(data.train_inputs.clone(), data.train_targets.clone(), data.graph.clone())?;
            let model = fit_krgs(&train, &selection.kernel()?, &config.hyperparams(selection.alpha, selection.beta))?;
            let saved = SavedModel { selection, model };
            let json = serde_json::to_string(&saved).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            fs::write(&out, json).map_err(io_err(&out))?;

            let summary = summary.unwrap_or_else(|| out.with_extension("csv"));
            let mut text = String::from("iteration,cost_l1,psi_change,jitter\n");
            for r in saved.model.history() {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    r.iteration,
                    r.cost_l1,
                    r.psi_change.map(|c| c.to_string()).unwrap_or_default(),
                    r.jitter.map(|c| c.to_string()).unwrap_or_default()
                ));
            }
            fs::write(&summary, text).map_err(io_err(&summary))?;
            println!(
                "alpha={} beta={} sigma={} iterations={}",
                selection.alpha,
                selection.beta,
                selection.sigma.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
                saved.model.iterations()
            );
        }
        Command::Predict { model, signals, out } => {
            let text = fs::read_to_string(&model).map_err(|e| Error::Io {
                context: format!("reading {}", model.display()),
                source: e,
            })?;
            let saved: SavedModel = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", model.display())))?;
            let series = data::load_signals(&signals)?;
            if series.node_count() != saved.model.node_count() {
                return Err(Error::Dimension(format!(
                    "model predicts {} nodes, signals have {}",
                    saved.model.node_count(),
                    series.node_count()
                )));
            }
            let inputs: Vec<Vec<f64>> = (0..series.len()).map(|t| series.day(t)).collect();
            let predictions = saved.model.predict_batch(&inputs)?;
            write_predictions(&out, series.dates(), &predictions)?;
            if series.len() >= 2 {
                let pairs = make_pairs(&series)?;
                let n = pairs.len();
                let truth = pair_targets(&pairs);
                let score = nmse_db(&predictions.rows(0, n).into_owned(), &truth);
                match score {
                    Ok(db) => println!("next-day NMSE over {n} days: {db} dB"),
                    Err(e) => println!("next-day NMSE unavailable: {e}"),
                }
            }
        }
        Command::Cv { cfg, out } => {
            let config = cfg.resolve()?;
            let data = load_experiment_data(&config)?;
            let selection = select_hyperparams(&config, &data)?;
            if let Some(path) = out {
                let mut text = String::from("alpha,beta,sigma,score_db\n");
                for (p, s) in &selection.outcome.scores {
                    text.push_str(&format!(
                        "{},{},{},{}\n",
                        p.alpha,
                        p.beta,
                        p.sigma.map(|s| s.to_string()).unwrap_or_default(),
                        s
                    ));
                }
                fs::write(&path, text).map_err(io_err(&path))?;
            }
            let best = selection.outcome.best;
            println!(
                "alpha={} beta={} sigma={} score_db={}",
                best.alpha,
                best.beta,
                best.sigma.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
                selection.outcome.best_score
            );
        }
        Command::Run {
            config,
            seed,
            out_dir,
            plot,
            overrides,
        } => {
            let config = build_config(Some(&config), Some(seed), &overrides, |c| {
                c.out_dir = Some(out_dir.clone());
            })?;
            let result = monte_carlo_experiment(&config)?;
            let written = experiment::write_outputs(&out_dir, &result, plot)?;
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            for path in written {
                let _ = writeln!(lock, "wrote {}", path.display());
            }
            if result.failure_threshold_exceeded() {
                eprintln!("error: more than 10% of trials failed for at least one training size");
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Row `t` is the prediction for the day after `dates[t]`, labelled with
/// that input date.
fn write_predictions(path: &Path, dates: &[String], predictions: &Matrix) -> Result<(), Error> {
    let mut file = io::BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut header = vec!["input_date".to_string()];
    header.extend((0..predictions.ncols()).map(|i| format!("v{i}")));
    writeln!(file, "{}", header.join(",")).map_err(io_err(path))?;
    for (t, date) in dates.iter().enumerate() {
        let row: Vec<String> = predictions.row(t).iter().map(f64::to_string).collect();
        writeln!(file, "{date},{}", row.join(",")).map_err(io_err(path))?;
    }
    file.flush().map_err(io_err(path))
}
