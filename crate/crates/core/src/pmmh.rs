//! Particle-marginal Metropolis–Hastings on `π^ε(θ | y_{1:n})` for hidden
//! Markov models, with the standard, alive or collapsed filter supplying the
//! likelihood estimate.

use serde::{Deserialize, Serialize};

use crate::abc::AbcKernel;
use crate::error::{Error, Result};
use crate::mcmc::{mh_accept, Init, Trace};
use crate::models::{CollapsedHmm, HiddenMarkovModel, ModelSpec, ObservationSeries, Proposal};
use crate::smc::{
    alive_smc_filter, collapsed_smc_filter, smc_abc_filter, FilterOptions, FilterResult, NcEstimate,
    NoiseStrategy, Propagation,
};
use crate::stochastics::RngStream;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    #[default]
    Standard,
    Alive,
}

/// Current point of a PMMH chain.
#[derive(Clone, Debug, PartialEq)]
pub struct PmmhState {
    pub theta: Vec<f64>,
    pub log_prior: f64,
    /// `ln p^{eps,N}_theta(y_{1:n})` from the last accepted filter run.
    pub log_nc: f64,
    pub meta: NcEstimate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PmmhOutcome {
    pub accepted: bool,
    /// The standard filter collapsed at the proposal.
    pub collapsed: bool,
    /// The alive filter ran out of attempts at the proposal.
    pub capped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PmmhSettings {
    pub iterations: usize,
    pub n_particles: usize,
    pub init: Init,
    /// Bounded number of attempts at a finite first estimate.
    pub init_attempts: usize,
    pub filter_options: FilterOptions,
}

impl PmmhSettings {
    /// `N = n` particles by default.
    pub fn new(iterations: usize, data_len: usize) -> Self {
        Self {
            iterations,
            n_particles: data_len.max(2),
            init: Init::Prior,
            init_attempts: 100,
            filter_options: FilterOptions::default(),
        }
    }
}

/// Run the bootstrap filter of the requested kind.
#[allow(clippy::too_many_arguments)]
pub fn run_filter<M: HiddenMarkovModel + ?Sized>(
    model: &M,
    theta: &[f64],
    data: &ObservationSeries,
    kernel: &AbcKernel,
    n_particles: usize,
    kind: FilterKind,
    options: &FilterOptions,
    rng: &mut RngStream,
) -> Result<FilterResult> {
    match kind {
        FilterKind::Standard => {
            smc_abc_filter(model, theta, data, kernel, n_particles, Propagation::Bootstrap, options, rng)
        }
        FilterKind::Alive => {
            alive_smc_filter(model, theta, data, kernel, n_particles, Propagation::Bootstrap, options, rng)
        }
    }
}

/// One PMMH transition with an arbitrary estimator of `ln p^eps_theta(y_{1:n})`.
///
/// Rejections keep `(θ, log_nc)` exactly; the current estimate is never refreshed.
pub fn pmmh_step_with<M, F>(
    model: &M,
    estimate: &mut F,
    state: &mut PmmhState,
    proposal: &Proposal,
    rng: &mut RngStream,
) -> Result<PmmhOutcome>
where
    M: ModelSpec + ?Sized,
    F: FnMut(&[f64], &mut RngStream) -> Result<NcEstimate>,
{
    let (theta, log_q) = proposal.propose(&state.theta, rng);
    let log_prior = model.log_prior(&theta);
    if log_prior == f64::NEG_INFINITY {
        return Ok(PmmhOutcome::default());
    }
    let nc = estimate(&theta, rng)?;
    let outcome = PmmhOutcome {
        accepted: false,
        collapsed: nc.collapsed_at.is_some(),
        capped: nc.capped_at.is_some(),
    };
    if !nc.is_finite() {
        return Ok(outcome);
    }
    let ratio = nc.log_value - state.log_nc + log_prior - state.log_prior + log_q;
    if !mh_accept(ratio, rng) {
        return Ok(outcome);
    }
    *state = PmmhState {
        theta,
        log_prior,
        log_nc: nc.log_value,
        meta: nc,
    };
    Ok(PmmhOutcome {
        accepted: true,
        ..outcome
    })
}

/// One PMMH transition with the bootstrap filter of kind `kind`.
#[allow(clippy::too_many_arguments)]
pub fn pmmh_step<M: HiddenMarkovModel + ?Sized>(
    model: &M,
    data: &ObservationSeries,
    kernel: &AbcKernel,
    n_particles: usize,
    kind: FilterKind,
    options: &FilterOptions,
    state: &mut PmmhState,
    proposal: &Proposal,
    rng: &mut RngStream,
) -> Result<PmmhOutcome> {
    let mut est = |t: &[f64], r: &mut RngStream| {
        Ok(run_filter(model, t, data, kernel, n_particles, kind, options, r)?.nc)
    };
    pmmh_step_with(model, &mut est, state, proposal, rng)
}

/// Initialize and iterate PMMH with any estimator. The trace carries a
/// `log_nc` column.
pub fn run_pmmh_with<M, F>(
    model: &M,
    mut estimate: F,
    proposal: &Proposal,
    iterations: usize,
    init: &Init,
    init_attempts: usize,
    rng: &mut RngStream,
) -> Result<Trace>
where
    M: ModelSpec + ?Sized,
    F: FnMut(&[f64], &mut RngStream) -> Result<NcEstimate>,
{
    if iterations == 0 {
        return Err(Error::usage("iterations must be at least 1"));
    }
    if proposal.moves.len() != model.dim() {
        return Err(Error::usage("proposal and parameter dimensions differ"));
    }
    if let Init::Fixed(t) = init {
        model.check_theta(t)?;
    }
    let mut state = None;
    for _ in 0..init_attempts.max(1) {
        let theta = match init {
            Init::Prior => model.sample_prior(rng),
            Init::Fixed(t) => t.clone(),
        };
        let log_prior = model.log_prior(&theta);
        if log_prior == f64::NEG_INFINITY {
            continue;
        }
        let nc = estimate(&theta, rng)?;
        if nc.is_finite() {
            state = Some(PmmhState {
                theta,
                log_prior,
                log_nc: nc.log_value,
                meta: nc,
            });
            break;
        }
    }
    let mut state = state.ok_or_else(|| {
        Error::Initialization(format!(
            "no finite likelihood estimate in {init_attempts} attempts; \
             try a larger eps, more particles or the alive filter"
        ))
    })?;
    let mut trace = Trace::new(model.param_names(), vec!["log_nc".into()]);
    for _ in 0..iterations {
        let out = pmmh_step_with(model, &mut estimate, &mut state, proposal, rng)?;
        trace.cap_events += out.capped as usize;
        trace.push(&state.theta, out.accepted, &[state.log_nc]);
    }
    Ok(trace)
}

/// PMMH with the bootstrap filter selected by `kind`.
pub fn run_pmmh<M: HiddenMarkovModel + ?Sized>(
    model: &M,
    data: &ObservationSeries,
    kernel: &AbcKernel,
    kind: FilterKind,
    proposal: &Proposal,
    settings: &PmmhSettings,
    rng: &mut RngStream,
) -> Result<Trace> {
    let est = |t: &[f64], r: &mut RngStream| {
        Ok(run_filter(model, t, data, kernel, settings.n_particles, kind, &settings.filter_options, r)?.nc)
    };
    run_pmmh_with(model, est, proposal, settings.iterations, &settings.init, settings.init_attempts, rng)
}

/// PMMH over the collapsed target, with the noise-space standard filter.
///
/// Each noise stream uses its sampler when the model has one and otherwise
/// importance-samples from `N(0, importance_sd²)` against its density.
pub fn run_collapsed_pmmh<M: CollapsedHmm + ?Sized>(
    model: &M,
    data: &ObservationSeries,
    kernel: &AbcKernel,
    proposal: &Proposal,
    settings: &PmmhSettings,
    importance_sd: f64,
    rng: &mut RngStream,
) -> Result<Trace> {
    let latent = NoiseStrategy::choose(model.latent_access(), importance_sd, "latent")?;
    let obs = NoiseStrategy::choose(model.obs_access(), importance_sd, "observation")?;
    let est = |t: &[f64], r: &mut RngStream| {
        Ok(collapsed_smc_filter(model, t, data, kernel, settings.n_particles, latent, obs, r)?.nc)
    };
    run_pmmh_with(model, est, proposal, settings.iterations, &settings.init, settings.init_attempts, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GaussianToyHmm, NoiseAccess, Prior, StochasticVolatility};

    fn toy() -> GaussianToyHmm {
        GaussianToyHmm::constant_latent(1.0, 1.0, Prior::Normal { mean: 0.0, sd: 1.0 })
    }

    fn setup() -> (GaussianToyHmm, ObservationSeries, AbcKernel) {
        let y = ObservationSeries::univariate(vec![0.4, 0.9, 0.1]).unwrap();
        (toy(), y, AbcKernel::new(1.0, 1).unwrap())
    }

    #[test]
    fn same_theta_same_seed_is_accepted() {
        let (m, y, k) = setup();
        let opts = FilterOptions::default();
        let mut est = |t: &[f64], _: &mut RngStream| {
            Ok(run_filter(&m, t, &y, &k, 20, FilterKind::Standard, &opts, &mut RngStream::new(99, 0))?.nc)
        };
        let nc = est(&[0.3], &mut RngStream::new(0, 0)).unwrap();
        let mut s = PmmhState {
            theta: vec![0.3],
            log_prior: m.log_prior(&[0.3]),
            log_nc: nc.log_value,
            meta: nc,
        };
        let mut rng = RngStream::new(1, 0);
        for _ in 0..50 {
            let out = pmmh_step_with(&m, &mut est, &mut s, &Proposal::random_walk(&[0.0]), &mut rng).unwrap();
            assert!(out.accepted);
        }
    }

    #[test]
    fn equal_estimates_give_prior_ratio() {
        let m = toy();
        let mut est = |_: &[f64], _: &mut RngStream| {
            Ok(NcEstimate {
                log_value: -3.0,
                per_step_log_factors: vec![-3.0],
                collapsed_at: None,
                trial_counts: None,
                capped_at: None,
            })
        };
        // the chain then samples the N(0, 1) prior
        let tr = run_pmmh_with(&m, &mut est, &Proposal::random_walk(&[1.5]), 100_000, &Init::Fixed(vec![0.0]), 1, &mut RngStream::new(2, 0))
            .unwrap();
        let xs = tr.column(0);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.05 && (var - 1.0).abs() < 0.08, "{mean} {var}");
    }

    #[test]
    fn rejections_keep_the_estimate() {
        let (m, y, k) = setup();
        let mut rng = RngStream::new(3, 0);
        let mut settings = PmmhSettings::new(2000, y.len());
        settings.n_particles = 30;
        let tr = run_pmmh(&m, &y, &k, FilterKind::Alive, &Proposal::random_walk(&[0.8]), &settings, &mut rng).unwrap();
        let ll = &tr.extras[0].values;
        for t in 1..tr.len() {
            if !tr.accepted[t] {
                assert_eq!(ll[t], ll[t - 1]);
                assert_eq!(tr.row(t), tr.row(t - 1));
            }
        }
        assert!(tr.acceptance_rate() > 0.1);
    }

    #[test]
    fn replay_is_identical() {
        let (m, y, k) = setup();
        let settings = PmmhSettings::new(300, y.len());
        let run = || {
            run_pmmh(&m, &y, &k, FilterKind::Standard, &Proposal::random_walk(&[0.5]), &settings, &mut RngStream::new(4, 0))
                .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn initialization_failure_mentions_remedies() {
        let m = toy();
        let y = ObservationSeries::univariate(vec![0.0, 1e5]).unwrap();
        let k = AbcKernel::new(0.01, 1).unwrap();
        let mut settings = PmmhSettings::new(10, 2);
        settings.init_attempts = 3;
        let r = run_pmmh(&m, &y, &k, FilterKind::Standard, &Proposal::random_walk(&[0.1]), &settings, &mut RngStream::new(5, 0));
        match r {
            Err(Error::Initialization(msg)) => assert!(msg.contains("alive")),
            other => panic!("{other:?}"),
        }
    }

    /// SV with the transition density hidden and only the η-sampler exposed.
    struct HiddenTransition(StochasticVolatility);

    impl ModelSpec for HiddenTransition {
        fn kind(&self) -> crate::models::ModelKind {
            self.0.kind()
        }
        fn param_names(&self) -> Vec<String> {
            self.0.param_names()
        }
        fn priors(&self) -> Vec<Prior> {
            self.0.priors()
        }
    }

    impl CollapsedHmm for HiddenTransition {
        fn latent_access(&self) -> NoiseAccess {
            NoiseAccess {
                sampler: true,
                density: false,
            }
        }
        fn obs_access(&self) -> NoiseAccess {
            self.0.obs_access()
        }
        fn latent_map(&self, t: &[f64], p: Option<&[f64]>, e: &[f64], o: &mut [f64]) {
            self.0.latent_map(t, p, e, o)
        }
        fn observation_map(&self, t: &[f64], x: &[f64], p: &[f64], o: &mut [f64]) {
            self.0.observation_map(t, x, p, o)
        }
        fn sample_latent_noise(&self, t: &[f64], r: &mut RngStream, o: &mut [f64]) -> Option<()> {
            self.0.sample_latent_noise(t, r, o)
        }
        fn log_latent_noise_density(&self, _: &[f64], _: &[f64]) -> Option<f64> {
            None
        }
        fn sample_obs_noise(&self, t: &[f64], r: &mut RngStream, o: &mut [f64]) -> Option<()> {
            self.0.sample_obs_noise(t, r, o)
        }
        fn log_obs_noise_density(&self, _: &[f64], _: &[f64]) -> Option<f64> {
            None
        }
    }

    #[test]
    fn collapsed_pmmh_runs_with_samplers_only() {
        let sv = StochasticVolatility::reference(1.75).unwrap();
        let theta = [0.5, 0.01, 0.5];
        let (y, _) = sv.simulate(&theta, 15, &mut RngStream::new(6, 0)).unwrap();
        let k = AbcKernel::new(1.0, 1).unwrap();
        let mut settings = PmmhSettings::new(200, y.len());
        settings.init = Init::Fixed(theta.to_vec());
        settings.n_particles = 100;
        let model = HiddenTransition(sv);
        let tr = run_collapsed_pmmh(&model, &y, &k, &Proposal::log_random_walk(&[0.1, 0.1, 0.1]), &settings, 1.0, &mut RngStream::new(7, 0))
            .unwrap();
        assert!(tr.extras[0].values.iter().all(|v| v.is_finite()));
    }
}
