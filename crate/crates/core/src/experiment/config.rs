use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseKind, NoiseSpec};
use crate::regression::{Hyperparams, WeightRule};

/// Kernel families usable in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Linear,
}

/// Everything an experiment run depends on. Loaded from a flat TOML file;
/// every key is optional and falls back to the default shown in
/// [`ExperimentConfig::default`].
///
/// When `nodes_path` and `signals_path` are both set the dataset is read
/// from CSV; otherwise a synthetic dataset is generated from the `synth_*`
/// keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub nodes_path: Option<PathBuf>,
    pub signals_path: Option<PathBuf>,

    pub synth_nodes: usize,
    pub synth_days: usize,
    pub synth_bandwidth: usize,
    pub synth_rho: f64,
    pub synth_noise_floor: f64,
    pub synth_offset: f64,
    pub synth_amplitude: f64,
    /// Seed of the synthetic dataset; the master seed when unset.
    pub synth_seed: Option<u64>,

    /// Number of leading pairs used for training; the rest are test pairs.
    pub n_train: usize,
    /// Training subset sizes to sweep; `[n_train]` when empty.
    pub train_sizes: Vec<usize>,

    pub kernel: KernelFamily,
    /// Gaussian bandwidths as multiples of the median pairwise input distance.
    pub sigma_scales: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    /// Fixed values; a parameter that is set is not cross-validated.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Absolute Gaussian bandwidth.
    pub sigma: Option<f64>,

    pub delta: f64,
    pub i_max: usize,
    pub tol: f64,
    pub weight_rule: WeightRule,

    pub noise_kind: NoiseKind,
    pub noise_fraction: f64,
    pub noise_factor: f64,

    pub trials: usize,
    pub folds: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            nodes_path: None,
            signals_path: None,
            synth_nodes: 45,
            synth_days: 92,
            synth_bandwidth: 5,
            synth_rho: 0.8,
            synth_noise_floor: 0.1,
            synth_offset: 8.0,
            synth_amplitude: 3.0,
            synth_seed: None,
            n_train: 46,
            train_sizes: Vec::new(),
            kernel: KernelFamily::Gaussian,
            sigma_scales: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            alpha_grid: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0],
            beta_grid: vec![0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0],
            alpha: None,
            beta: None,
            sigma: None,
            delta: 0.1,
            i_max: 10,
            tol: 1e-8,
            weight_rule: WeightRule::Damped,
            noise_kind: NoiseKind::Missing,
            noise_fraction: 0.25,
            noise_factor: 4.0,
            trials: 100,
            folds: 4,
            seed: 0,
            out_dir: None,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn fmt_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn fmt_list(v: &[impl ToString]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    /// Applies a `key=value` override. The value is read as a TOML value
    /// (`0.5`, `[1, 2]`, `"gaussian"`); a bare word is taken as a string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| config_err(format!("override {assignment:?} is not of the form key=value")))?;
        let key = key.trim();
        let value = value.trim();
        let parsed: toml::Table = toml::from_str(&format!("{key} = {value}"))
            .or_else(|_| toml::from_str(&format!("{key} = {}", toml::Value::from(value))))
            .map_err(|e| config_err(format!("override {assignment:?}: {e}")))?;
        let mut table = toml::Table::try_from(&*self).map_err(|e| config_err(e.to_string()))?;
        table.extend(parsed);
        *self = table
            .try_into()
            .map_err(|e: toml::de::Error| config_err(format!("override {assignment:?}: {e}")))?;
        Ok(())
    }

    pub fn train_sizes(&self) -> Vec<usize> {
        if self.train_sizes.is_empty() {
            vec![self.n_train]
        } else {
            self.train_sizes.clone()
        }
    }

    pub fn synth_seed(&self) -> u64 {
        self.synth_seed.unwrap_or(self.seed)
    }

    pub fn uses_files(&self) -> bool {
        self.nodes_path.is_some()
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            kind: self.noise_kind,
            fraction: self.noise_fraction,
            scale_factor: self.noise_factor,
            seed: self.seed,
        }
    }

    /// IRLS settings with the given regularization weights.
    pub fn hyperparams(&self, alpha: f64, beta: f64) -> Hyperparams {
        Hyperparams {
            alpha,
            beta,
            delta: self.delta,
            max_iter: self.i_max,
            tol: self.tol,
            weight_rule: self.weight_rule,
        }
    }

    /// Checks the config in isolation; dataset-dependent limits (number of
    /// pairs) are checked when the data is loaded.
    pub fn validate(&self) -> Result<()> {
        if self.nodes_path.is_some() != self.signals_path.is_some() {
            return Err(config_err("nodes_path and signals_path must be set together"));
        }
        let grid_ok = |name: &str, v: &[f64], allow_zero: bool| -> Result<()> {
            if v.is_empty() {
                return Err(config_err(format!("{name} must not be empty")));
            }
            if let Some(x) = v.iter().find(|&&x| !(x.is_finite() && (x > 0.0 || allow_zero && x == 0.0))) {
                return Err(config_err(format!("{name} contains invalid value {x}")));
            }
            Ok(())
        };
        match self.alpha {
            Some(a) => grid_ok("alpha", &[a], false)?,
            None => grid_ok("alpha_grid", &self.alpha_grid, false)?,
        }
        match self.beta {
            Some(b) => grid_ok("beta", &[b], true)?,
            None => grid_ok("beta_grid", &self.beta_grid, true)?,
        }
        if self.kernel == KernelFamily::Gaussian {
            match self.sigma {
                Some(s) => grid_ok("sigma", &[s], false)?,
                None => grid_ok("sigma_scales", &self.sigma_scales, false)?,
            }
        }
        if self.folds < 2 {
            return Err(config_err(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        if self.n_train < self.folds {
            return Err(config_err(format!(
                "n_train ({}) must be at least folds ({})",
                self.n_train, self.folds
            )));
        }
        if let Some(&n) = self.train_sizes().iter().find(|&&n| n == 0 || n > self.n_train) {
            return Err(config_err(format!(
                "training size {n} is outside 1..={}",
                self.n_train
            )));
        }
        self.hyperparams(1.0, 0.0)
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        self.noise().validate().map_err(|e| config_err(e.to_string()))?;
        if !self.uses_files() {
            if self.synth_days < 2 {
                return Err(config_err("synth_days must be at least 2"));
            }
            if self.synth_bandwidth == 0 || self.synth_bandwidth > self.synth_nodes {
                return Err(config_err("synth_bandwidth must be in 1..=synth_nodes"));
            }
        }
        Ok(())
    }

    /// `(key, value)` pairs of every setting that affects results, in
    /// declaration order, for run metadata. `out_dir` is left out so that
    /// runs written to different directories compare equal. Lists are
    /// `;`-separated and unset options are empty.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let kind = |k| match k {
            NoiseKind::Missing => "missing",
            NoiseKind::Scaling => "scaling",
        };
        vec![
            ("nodes_path", path(&self.nodes_path)),
            ("signals_path", path(&self.signals_path)),
            ("synth_nodes", self.synth_nodes.to_string()),
            ("synth_days", self.synth_days.to_string()),
            ("synth_bandwidth", self.synth_bandwidth.to_string()),
            ("synth_rho", self.synth_rho.to_string()),
            ("synth_noise_floor", self.synth_noise_floor.to_string()),
            ("synth_offset", self.synth_offset.to_string()),
            ("synth_amplitude", self.synth_amplitude.to_string()),
            ("synth_seed", self.synth_seed().to_string()),
            ("n_train", self.n_train.to_string()),
            ("train_sizes", fmt_list(&self.train_sizes())),
            (
                "kernel",
                match self.kernel {
                    KernelFamily::Gaussian => "gaussian",
                    KernelFamily::Linear => "linear",
                }
                .to_string(),
            ),
            ("sigma_scales", fmt_list(&self.sigma_scales)),
            ("alpha_grid", fmt_list(&self.alpha_grid)),
            ("beta_grid", fmt_list(&self.beta_grid)),
            ("alpha", fmt_opt(&self.alpha)),
            ("beta", fmt_opt(&self.beta)),
            ("sigma", fmt_opt(&self.sigma)),
            ("delta", self.delta.to_string()),
            ("i_max", self.i_max.to_string()),
            ("tol", self.tol.to_string()),
            (
                "weight_rule",
                match self.weight_rule {
                    WeightRule::Damped => "damped",
                    WeightRule::Literal => "literal",
                }
                .to_string(),
            ),
            ("noise_kind", kind(self.noise_kind).to_string()),
            ("noise_fraction", self.noise_fraction.to_string()),
            ("noise_factor", self.noise_factor.to_string()),
            ("trials", self.trials.to_string()),
            ("folds", self.folds.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_flat_keys() {
        let c = ExperimentConfig::from_toml_str(
            "trials = 20\nnoise_kind = \"scaling\"\nalpha_grid = [0.1, 1.0]\nbeta = 0.5\n",
        )
        .unwrap();
        assert_eq!(c.trials, 20);
        assert_eq!(c.noise_kind, NoiseKind::Scaling);
        assert_eq!(c.alpha_grid, vec![0.1, 1.0]);
        assert_eq!(c.beta, Some(0.5));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ExperimentConfig::from_toml_str("trails = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("trails"), "{err}");
    }

    #[test]
    fn overrides() {
        let mut c = ExperimentConfig::default();
        c.apply_override("trials=7").unwrap();
        c.apply_override("kernel = linear").unwrap();
        c.apply_override("sigma_scales=[1.0]").unwrap();
        c.apply_override("alpha=0.25").unwrap();
        assert_eq!(c.trials, 7);
        assert_eq!(c.kernel, KernelFamily::Linear);
        assert_eq!(c.sigma_scales, vec![1.0]);
        assert_eq!(c.alpha, Some(0.25));
        assert!(c.apply_override("no_such_key=1").is_err());
        assert!(c.apply_override("trials").is_err());
        assert!(c.apply_override("trials=\"many\"").is_err());
    }

    #[test]
    fn validation() {
        let bad = |f: fn(&mut ExperimentConfig)| {
            let mut c = ExperimentConfig::default();
            f(&mut c);
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        };
        bad(|c| c.folds = 1);
        bad(|c| c.trials = 0);
        bad(|c| c.alpha_grid.clear());
        bad(|c| c.alpha_grid = vec![0.0]);
        bad(|c| c.beta_grid = vec![-1.0]);
        bad(|c| c.sigma_scales.clear());
        bad(|c| c.train_sizes = vec![47]);
        bad(|c| c.n_train = 3);
        bad(|c| c.noise_fraction = 2.0);
        bad(|c| c.nodes_path = Some("n.csv".into()));
        bad(|c| c.delta = 0.0);
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::default();
        c.alpha = Some(0.5);
        c.train_sizes = vec![10, 20];
        let text = c.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn echo_covers_every_key() {
        let c = ExperimentConfig {
            out_dir: Some("out".into()),
            nodes_path: Some("n.csv".into()),
            ..ExperimentConfig::default()
        };
        let table = toml::Table::try_from(&c).unwrap();
        let echoed: Vec<&str> = c.echo().iter().map(|(k, _)| *k).collect();
        for key in table.keys().filter(|k| *k != "out_dir") {
            assert!(echoed.contains(&key.as_str()), "{key} missing from echo");
        }
    }
}
