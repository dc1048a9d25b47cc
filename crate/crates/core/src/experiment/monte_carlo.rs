use rand::seq::index::sample;
use rayon::prelude::*;

use crate::data::{
    load_dataset, make_pairs, pair_inputs, pair_targets, random_node_table, split_train_test,
    synth_dataset, SignalSeries, SynthParams,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernels::KernelSpec;
use crate::linalg::Matrix;
use crate::noise::snr_db;
use crate::regression::{fit_krgs, Hyperparams, TrainingSet};
use crate::rng::{stream_rng, RNG_ALGORITHM};

use super::config::ExperimentConfig;
use super::cv::{cross_validate, hyper_grid, CvOutcome};
use super::metrics::{aggregate_nmse_db, NmseParts};

/// RNG stream for the corruption used by cross-validation. Streams 0 and 1
/// belong to the synthetic data generator.
pub const CV_STREAM: u64 = 2;

/// RNG stream of trial `trial` at position `size_index` of the size sweep.
pub fn trial_stream(size_index: usize, trial: usize) -> u64 {
    ((size_index as u64 + 1) << 32) | trial as u64
}

/// Loaded or generated data, split into training and test pairs.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub graph: Graph,
    pub train_inputs: Vec<Vec<f64>>,
    /// Clean training targets.
    pub train_targets: Matrix,
    pub test_inputs: Vec<Vec<f64>>,
    pub test_targets: Matrix,
}

pub fn load_experiment_data(config: &ExperimentConfig) -> Result<ExperimentData> {
    let (graph, series): (Graph, SignalSeries) = match (&config.nodes_path, &config.signals_path) {
        (Some(nodes), Some(signals)) => {
            let (table, series) = load_dataset(nodes, signals)?;
            (table.geodesic_graph()?, series)
        }
        _ => {
            let seed = config.synth_seed();
            let graph = random_node_table(config.synth_nodes, seed)?.geodesic_graph()?;
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
            let series = synth_dataset(&graph, &params)?;
            (graph, series)
        }
    };
    let pairs = make_pairs(&series)?;
    let (train, test) = split_train_test(&pairs, config.n_train)
        .map_err(|e| Error::Config(format!("n_train: {e}")))?;
    Ok(ExperimentData {
        graph,
        train_inputs: pair_inputs(&train),
        train_targets: pair_targets(&train),
        test_inputs: pair_inputs(&test),
        test_targets: pair_targets(&test),
    })
}

/// Hyperparameters chosen once per experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub outcome: CvOutcome,
    /// SNR of the corrupted training targets cross-validation saw.
    pub train_snr_db: f64,
}

/// Cross-validates on the full training set, corrupted once on
/// [`CV_STREAM`].
pub fn select_hyperparams(config: &ExperimentConfig, data: &ExperimentData) -> Result<Selection> {
    let mut rng = stream_rng(config.seed, CV_STREAM);
    let corrupted = config.noise().apply(&data.train_targets, &mut rng)?;
    let grid = hyper_grid(config, &data.train_inputs);
    let outcome = cross_validate(
        &data.train_inputs,
        &corrupted,
        &data.graph,
        &grid,
        config.folds,
        &config.hyperparams(1.0, 0.0),
    )?;
    Ok(Selection {
        outcome,
        train_snr_db: snr_db(&data.train_targets, &corrupted)?,
    })
}

/// Per-iteration test NMSE of one trial. When IRLS stops early the last
/// iterate is repeated up to `i_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub per_iteration: Vec<NmseParts>,
    pub iterations_run: usize,
    pub jitter_events: usize,
}

/// Draws a training subset of size `n` (kept in chronological order),
/// corrupts its targets and fits KRGS.
pub fn run_trial(
    config: &ExperimentConfig,
    data: &ExperimentData,
    kernel: &KernelSpec,
    hyper: &Hyperparams,
    n: usize,
    stream: u64,
) -> Result<TrialOutcome> {
    let mut rng = stream_rng(config.seed, stream);
    let mut idx = sample(&mut rng, data.train_inputs.len(), n).into_vec();
    idx.sort_unstable();
    let clean = data.train_targets.select_rows(&idx);
    let noisy = config.noise().apply(&clean, &mut rng)?;
    let train = TrainingSet::new(
        idx.iter().map(|&i| data.train_inputs[i].clone()).collect(),
        noisy,
        data.graph.clone(),
    )?
    .with_clean_targets(clean)?;

    let model = fit_krgs(&train, kernel, hyper)?;
    let cross = model.cross_kernel(&data.test_inputs)?;
    let mut per_iteration = Vec::with_capacity(hyper.max_iter);
    for record in model.history() {
        let predictions = &cross * &record.psi;
        per_iteration.push(NmseParts::compute(&predictions, &data.test_targets)?);
    }
    let last = *per_iteration.last().expect("at least one iteration");
    per_iteration.resize(hyper.max_iter, last);
    Ok(TrialOutcome {
        per_iteration,
        iterations_run: model.iterations(),
        jitter_events: model.jitter_events(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmseRow {
    pub iteration: usize,
    pub n: usize,
    pub nmse_db: f64,
    pub trials_ok: usize,
    pub trials_failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeSummary {
    pub n: usize,
    pub trials_ok: usize,
    pub trials_failed: usize,
    pub jitter_events: usize,
    /// Total IRLS iterations actually run over successful trials.
    pub iterations_run: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub selection: Selection,
    /// Ordered by `N` (sweep order), then iteration.
    pub rows: Vec<NmseRow>,
    pub sizes: Vec<SizeSummary>,
    pub rng_algorithm: &'static str,
}

/// Largest tolerated share of failed trials per training size.
pub const MAX_FAILED_SHARE: f64 = 0.1;

impl ExperimentResult {
    pub fn failure_threshold_exceeded(&self) -> bool {
        self.sizes
            .iter()
            .any(|s| s.trials_failed as f64 > MAX_FAILED_SHARE * (s.trials_ok + s.trials_failed) as f64)
    }

    /// NMSE curve over iterations for training size `n`.
    pub fn curve(&self, n: usize) -> Vec<f64> {
        self.rows.iter().filter(|r| r.n == n).map(|r| r.nmse_db).collect()
    }
}

/// Runs cross-validation once, then `trials` corrupted fits for every
/// training size, and aggregates test NMSE per iteration across trials.
///
/// A trial whose solve fails numerically is excluded from aggregation and
/// counted; see [`ExperimentResult::failure_threshold_exceeded`].
pub fn monte_carlo_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let data = load_experiment_data(config)?;
    let selection = select_hyperparams(config, &data)?;
    let best = selection.outcome.best;
    let kernel = best.kernel()?;
    let hyper = config.hyperparams(best.alpha, best.beta);

    let mut rows = Vec::new();
    let mut sizes = Vec::new();
    for (size_index, n) in config.train_sizes().into_iter().enumerate() {
        let outcomes: Vec<Result<TrialOutcome>> = (0..config.trials)
            .into_par_iter()
            .map(|trial| run_trial(config, &data, &kernel, &hyper, n, trial_stream(size_index, trial)))
            .collect();

        let mut ok = Vec::with_capacity(outcomes.len());
        let mut failed = 0;
        for outcome in outcomes {
            match outcome {
                Ok(o) => ok.push(o),
                Err(e) if e.is_solver_failure() => failed += 1,
                Err(e) => return Err(e),
            }
        }
        for it in 0..config.i_max {
            let parts: Vec<NmseParts> = ok.iter().map(|o| o.per_iteration[it]).collect();
            let nmse_db = if parts.is_empty() { f64::NAN } else { aggregate_nmse_db(&parts)? };
            rows.push(NmseRow {
                iteration: it + 1,
                n,
                nmse_db,
                trials_ok: ok.len(),
                trials_failed: failed,
            });
        }
        sizes.push(SizeSummary {
            n,
            trials_ok: ok.len(),
            trials_failed: failed,
            jitter_events: ok.iter().map(|o| o.jitter_events).sum(),
            iterations_run: ok.iter().map(|o| o.iterations_run).sum(),
        });
    }
    Ok(ExperimentResult {
        config: config.clone(),
        selection,
        rows,
        sizes,
        rng_algorithm: RNG_ALGORITHM,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::metrics::nmse_db;
    use crate::regression::fit_krg;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            synth_nodes: 6,
            synth_days: 21,
            synth_bandwidth: 2,
            n_train: 12,
            sigma_scales: vec![1.0, 4.0],
            alpha_grid: vec![0.01, 1.0],
            beta_grid: vec![0.0, 0.1],
            i_max: 4,
            trials: 3,
            seed: 5,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        let c = small_config();
        assert_eq!(monte_carlo_experiment(&c).unwrap(), monte_carlo_experiment(&c).unwrap());
    }

    #[test]
    fn table_shape() {
        let mut c = small_config();
        c.train_sizes = vec![6, 12];
        let r = monte_carlo_experiment(&c).unwrap();
        assert_eq!(r.rows.len(), 8);
        assert_eq!((r.rows[0].n, r.rows[0].iteration), (6, 1));
        assert_eq!((r.rows[7].n, r.rows[7].iteration), (12, 4));
        assert!(r.rows.iter().all(|row| row.trials_ok == 3 && row.trials_failed == 0));
        assert!(!r.failure_threshold_exceeded());
    }

    #[test]
    fn single_trial_matches_direct_krg() {
        let mut c = small_config();
        c.trials = 1;
        c.i_max = 1;
        let r = monte_carlo_experiment(&c).unwrap();
        assert_eq!(r.rows.len(), 1);

        let data = load_experiment_data(&c).unwrap();
        let best = r.selection.outcome.best;
        let mut rng = stream_rng(c.seed, trial_stream(0, 0));
        let mut idx = sample(&mut rng, c.n_train, c.n_train).into_vec();
        idx.sort_unstable();
        let noisy = c.noise().apply(&data.train_targets.select_rows(&idx), &mut rng).unwrap();
        let train = TrainingSet::new(data.train_inputs.clone(), noisy, data.graph.clone()).unwrap();
        let model = fit_krg(&train, &best.kernel().unwrap(), best.alpha, best.beta).unwrap();
        let direct = nmse_db(&model.predict_batch(&data.test_inputs).unwrap(), &data.test_targets).unwrap();
        assert_eq!(r.rows[0].nmse_db, direct);
    }

    #[test]
    fn too_many_train_pairs() {
        let mut c = small_config();
        c.n_train = 20;
        assert!(matches!(monte_carlo_experiment(&c), Err(Error::Config(_))));
    }

    #[test]
    fn streams_are_distinct() {
        assert_ne!(trial_stream(0, 0), CV_STREAM);
        assert_ne!(trial_stream(0, 1), trial_stream(1, 0));
        assert!(trial_stream(0, 0) > 1);
    }
}
