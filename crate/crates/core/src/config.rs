//! Experiment configuration.
//!
//! The format is TOML restricted to scalars, arrays and tables; dotted keys
//! (`abc.eps = 0.5`) and `[section]` headers are interchangeable. Unknown keys
//! are rejected and every error names the offending key.
//!
//! ```toml
//! algorithm = "ntrials"          # marginal | naive | ntrials | nhit | collapsed |
//!                                # smc | alive | pmmh-standard | pmmh-alive | collapsed-pmmh
//! seed = 7
//! iterations = 10000
//! n = 250                        # trials / hits / particles; default depends on n_data
//! init = [0.5, 0.2, 0.1, 1.0]    # optional fixed start, else a prior draw
//!
//! model.id = "garch"             # normal-location | gaussian-scale | garch | sv | toy-hmm
//! model.alpha = 1.5
//!
//! abc.eps = 0.5
//! abc.noisy = true
//!
//! data.csv = "returns.csv"       # or data.synthetic.n / .theta / .seed
//!
//! proposal.kinds = ["log-random-walk", ...]   # one per parameter
//! proposal.scales = [0.1, ...]
//!
//! mcmc.early_reject = true
//! mcmc.quadrature_points = 401
//! mcmc.noise_move = "random-walk"   # or "independent"
//! mcmc.noise_scale = 1.0
//!
//! smc.resampling = "multinomial"    # or "systematic"
//! smc.importance_sd = 1.0
//!
//! caps.trials = 10000000          # per-datum / per-step trial cap
//! caps.init_attempts = 100
//! caps.init_trials = 1000000
//!
//! output.dir = "out"
//! output.burn_in = 0
//! output.acf_lags = 50
//! output.kde_points = 256
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::{default_trials, DEFAULT_CAP};
use crate::models::{
    GarchStable, GaussianScale, GaussianToyHmm, ModelKind, ModelSpec, Move, NormalLocation, Prior,
    Proposal, StochasticVolatility, Support,
};
use crate::smc::Resampling;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Marginal,
    Naive,
    Ntrials,
    Nhit,
    Collapsed,
    Smc,
    Alive,
    PmmhStandard,
    PmmhAlive,
    CollapsedPmmh,
}

/// What a CLI subcommand does with an algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Mcmc,
    Filter,
    Pmmh,
}

impl Algorithm {
    pub fn task(self) -> Task {
        match self {
            Algorithm::Marginal
            | Algorithm::Naive
            | Algorithm::Ntrials
            | Algorithm::Nhit
            | Algorithm::Collapsed => Task::Mcmc,
            Algorithm::Smc | Algorithm::Alive => Task::Filter,
            Algorithm::PmmhStandard | Algorithm::PmmhAlive | Algorithm::CollapsedPmmh => Task::Pmmh,
        }
    }

    pub fn needs_hmm(self) -> bool {
        self.task() != Task::Mcmc
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Marginal => "marginal",
            Algorithm::Naive => "naive",
            Algorithm::Ntrials => "ntrials",
            Algorithm::Nhit => "nhit",
            Algorithm::Collapsed => "collapsed",
            Algorithm::Smc => "smc",
            Algorithm::Alive => "alive",
            Algorithm::PmmhStandard => "pmmh-standard",
            Algorithm::PmmhAlive => "pmmh-alive",
            Algorithm::CollapsedPmmh => "collapsed-pmmh",
        }
    }
}

fn one() -> f64 {
    1.0
}
fn gamma_2_2() -> Prior {
    Prior::Gamma {
        shape: 2.0,
        rate: 2.0,
    }
}
fn std_normal_prior() -> Prior {
    Prior::Normal { mean: 0.0, sd: 1.0 }
}
fn garch_alpha() -> f64 {
    1.5
}
fn two() -> f64 {
    2.0
}
fn eighth() -> f64 {
    0.125
}
fn sv_alpha() -> f64 {
    1.75
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    NormalLocation {
        #[serde(default = "one")]
        obs_sd: f64,
        #[serde(default)]
        prior_mean: f64,
        #[serde(default = "one")]
        prior_sd: f64,
    },
    GaussianScale {
        #[serde(default = "gamma_2_2")]
        prior: Prior,
    },
    /// Stable GARCH(1,1); `x0 ~ Ga(a, b)`, `beta_j ~ Ga(c, d)`.
    Garch {
        #[serde(default = "garch_alpha")]
        alpha: f64,
        #[serde(default)]
        skew: f64,
        #[serde(default = "two")]
        a: f64,
        #[serde(default = "eighth")]
        b: f64,
        #[serde(default = "two")]
        c: f64,
        #[serde(default = "eighth")]
        d: f64,
    },
    Sv {
        #[serde(default = "sv_alpha")]
        alpha: f64,
        #[serde(default = "one")]
        skew: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    ToyHmm {
        #[serde(default = "one")]
        init_sd: f64,
        #[serde(default)]
        trans_sd: f64,
        #[serde(default = "one")]
        obs_sd: f64,
        #[serde(default = "std_normal_prior")]
        prior: Prior,
    },
}

/// A model built from its configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltModel {
    NormalLocation(NormalLocation),
    GaussianScale(GaussianScale),
    Garch(GarchStable),
    Sv(StochasticVolatility),
    ToyHmm(GaussianToyHmm),
}

impl BuiltModel {
    pub fn spec(&self) -> &dyn ModelSpec {
        match self {
            BuiltModel::NormalLocation(m) => m,
            BuiltModel::GaussianScale(m) => m,
            BuiltModel::Garch(m) => m,
            BuiltModel::Sv(m) => m,
            BuiltModel::ToyHmm(m) => m,
        }
    }

    fn tractable(&self) -> bool {
        matches!(self, BuiltModel::NormalLocation(_) | BuiltModel::GaussianScale(_))
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<BuiltModel> {
        let bad = |e: Error| Error::config("model", e.to_string());
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("model.{key}"), format!("must be positive, got {v}")))
            }
        };
        Ok(match *self {
            ModelConfig::NormalLocation {
                obs_sd,
                prior_mean,
                prior_sd,
            } => {
                positive("obs_sd", obs_sd)?;
                positive("prior_sd", prior_sd)?;
                if !prior_mean.is_finite() {
                    return Err(Error::config("model.prior_mean", "must be finite"));
                }
                BuiltModel::NormalLocation(NormalLocation {
                    obs_sd,
                    prior_mean,
                    prior_sd,
                })
            }
            ModelConfig::GaussianScale { prior } => {
                prior.validate().map_err(|e| Error::config("model.prior", e.to_string()))?;
                if prior.support() == Support::Real {
                    return Err(Error::config("model.prior", "a scale prior must live on (0, inf)"));
                }
                BuiltModel::GaussianScale(GaussianScale { prior })
            }
            ModelConfig::Garch {
                alpha,
                skew,
                a,
                b,
                c,
                d,
            } => BuiltModel::Garch(GarchStable::new(alpha, skew, a, b, c, d).map_err(bad)?),
            ModelConfig::Sv { alpha, skew, scale } => {
                BuiltModel::Sv(StochasticVolatility::new(scale, alpha, skew).map_err(bad)?)
            }
            ModelConfig::ToyHmm {
                init_sd,
                trans_sd,
                obs_sd,
                prior,
            } => {
                positive("init_sd", init_sd)?;
                positive("obs_sd", obs_sd)?;
                if !(trans_sd >= 0.0 && trans_sd.is_finite()) {
                    return Err(Error::config("model.trans_sd", "must be non-negative"));
                }
                prior.validate().map_err(|e| Error::config("model.prior", e.to_string()))?;
                BuiltModel::ToyHmm(GaussianToyHmm {
                    init_sd,
                    trans_sd,
                    obs_sd,
                    prior,
                })
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbcConfig {
    pub eps: f64,
    /// Perturb the data once and target the noisy-ABC posterior.
    #[serde(default)]
    pub noisy: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n: usize,
    /// Parameter value generating the data.
    pub theta: Vec<f64>,
    /// Defaults to the experiment seed; drawn on its own stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveKind {
    RandomWalk,
    LogRandomWalk,
    GammaMoment,
}

/// Per-parameter proposal; empty vectors are filled from the model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalConfig {
    #[serde(default)]
    pub kinds: Vec<MoveKind>,
    #[serde(default)]
    pub scales: Vec<f64>,
}

impl ProposalConfig {
    pub fn build(&self) -> Proposal {
        Proposal::new(
            self.kinds
                .iter()
                .zip(&self.scales)
                .map(|(k, &scale)| match k {
                    MoveKind::RandomWalk => Move::RandomWalk { scale },
                    MoveKind::LogRandomWalk => Move::LogRandomWalk { scale },
                    MoveKind::GammaMoment => Move::GammaMoment { cv: scale },
                })
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMoveKind {
    RandomWalk,
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    #[serde(default = "yes")]
    pub early_reject: bool,
    #[serde(default = "default_points")]
    pub quadrature_points: usize,
    #[serde(default = "default_noise_move")]
    pub noise_move: NoiseMoveKind,
    #[serde(default = "one")]
    pub noise_scale: f64,
}

fn default_points() -> usize {
    401
}
fn default_noise_move() -> NoiseMoveKind {
    NoiseMoveKind::RandomWalk
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            early_reject: true,
            quadrature_points: default_points(),
            noise_move: default_noise_move(),
            noise_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmcConfig {
    #[serde(default)]
    pub resampling: Resampling,
    /// Standard deviation of the importance law for noise without a sampler.
    #[serde(default = "one")]
    pub importance_sd: f64,
}

impl Default for SmcConfig {
    fn default() -> Self {
        Self {
            resampling: Resampling::Multinomial,
            importance_sd: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapsConfig {
    #[serde(default = "default_cap")]
    pub trials: u64,
    #[serde(default = "default_init_attempts")]
    pub init_attempts: usize,
    #[serde(default = "default_init_trials")]
    pub init_trials: u64,
}

fn default_cap() -> u64 {
    DEFAULT_CAP
}
fn default_init_attempts() -> usize {
    100
}
fn default_init_trials() -> u64 {
    1_000_000
}

impl Default for CapsConfig {
    fn default() -> Self {
        Self {
            trials: default_cap(),
            init_attempts: default_init_attempts(),
            init_trials: default_init_trials(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "default_lags")]
    pub acf_lags: usize,
    #[serde(default = "default_kde_points")]
    pub kde_points: usize,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_lags() -> usize {
    50
}
fn default_kde_points() -> usize {
    256
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            burn_in: 0,
            acf_lags: default_lags(),
            kde_points: default_kde_points(),
        }
    }
}

fn default_iterations() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Trials, hits or particles. Unset means `max(2, n_data / 2)` for the
    /// i.i.d. kernels and `n_data` for filters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<f64>>,
    pub model: ModelConfig,
    pub abc: AbcConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub proposal: ProposalConfig,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub smc: SmcConfig,
    #[serde(default)]
    pub caps: CapsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Parse, validate and fill the model-dependent defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.message().to_string()))?;
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { "<document>".to_string() } else { path };
        Error::config(key, e.into_inner().message().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Check invariants and materialize the proposal defaults.
    pub fn validate(&mut self) -> Result<()> {
        if !(self.abc.eps > 0.0 && self.abc.eps.is_finite()) {
            return Err(Error::config("abc.eps", format!("must be positive and finite, got {}", self.abc.eps)));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be at least 1"));
        }
        let min_n = match self.algorithm {
            Algorithm::Nhit | Algorithm::Alive | Algorithm::PmmhAlive => 2,
            _ => 1,
        };
        if let Some(n) = self.n {
            if n < min_n {
                return Err(Error::config("n", format!("must be at least {min_n} for {}", self.algorithm.as_str())));
            }
        }
        let model = self.model.build()?;
        let spec = model.spec();
        let is_hmm = spec.kind() == ModelKind::Hmm;
        if self.algorithm.needs_hmm() != is_hmm {
            let what = if is_hmm { "a hidden Markov model" } else { "an i.i.d. or observation-driven model" };
            return Err(Error::config(
                "algorithm",
                format!("{} cannot be used with {what}", self.algorithm.as_str()),
            ));
        }
        if matches!(self.algorithm, Algorithm::Marginal | Algorithm::Collapsed) && !model.tractable() {
            return Err(Error::config(
                "algorithm",
                format!("{} needs a model with a tractable ABC likelihood", self.algorithm.as_str()),
            ));
        }
        let dim = spec.dim();
        if self.proposal.kinds.is_empty() {
            self.proposal.kinds = spec
                .priors()
                .iter()
                .map(|p| match p.support() {
                    Support::Positive => MoveKind::LogRandomWalk,
                    _ => MoveKind::RandomWalk,
                })
                .collect();
        }
        if self.proposal.scales.is_empty() {
            self.proposal.scales = vec![0.2; dim];
        }
        if self.proposal.kinds.len() != dim {
            return Err(Error::config("proposal.kinds", format!("expected {dim} entries")));
        }
        if self.proposal.scales.len() != dim {
            return Err(Error::config("proposal.scales", format!("expected {dim} entries")));
        }
        if self.proposal.scales.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::config("proposal.scales", "scales must be non-negative"));
        }
        if let Some(init) = &self.init {
            if init.len() != dim {
                return Err(Error::config("init", format!("expected {dim} entries")));
            }
            spec.check_theta(init).map_err(|e| Error::config("init", e.to_string()))?;
        }
        match (&self.data.csv, &self.data.synthetic) {
            (Some(_), None) => {}
            (None, Some(s)) => {
                if s.n == 0 {
                    return Err(Error::config("data.synthetic.n", "must be at least 1"));
                }
                if s.theta.len() != dim {
                    return Err(Error::config("data.synthetic.theta", format!("expected {dim} entries")));
                }
                spec.check_theta(&s.theta)
                    .map_err(|e| Error::config("data.synthetic.theta", e.to_string()))?;
            }
            _ => return Err(Error::config("data", "give exactly one of data.csv and data.synthetic")),
        }
        if !(self.smc.importance_sd > 0.0) {
            return Err(Error::config("smc.importance_sd", "must be positive"));
        }
        if !(self.mcmc.noise_scale > 0.0) {
            return Err(Error::config("mcmc.noise_scale", "must be positive"));
        }
        if self.mcmc.quadrature_points < 3 {
            return Err(Error::config("mcmc.quadrature_points", "must be at least 3"));
        }
        if self.caps.trials == 0 || self.caps.init_trials == 0 || self.caps.init_attempts == 0 {
            return Err(Error::config("caps", "caps must be positive"));
        }
        if self.output.acf_lags == 0 || self.output.kde_points < 2 {
            return Err(Error::config("output", "acf_lags >= 1 and kde_points >= 2 are required"));
        }
        Ok(())
    }

    /// `n` with its data-length default applied.
    pub fn effective_n(&self, data_len: usize) -> usize {
        self.n.unwrap_or(match self.algorithm.task() {
            Task::Mcmc => default_trials(data_len),
            _ => data_len.max(2),
        })
    }

    /// Copy with every default materialized.
    pub fn resolved(&self, data_len: usize) -> ExperimentConfig {
        let mut c = self.clone();
        c.n = Some(self.effective_n(data_len));
        c
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }
}
