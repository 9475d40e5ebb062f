//! ABC Metropolis–Hastings kernels for i.i.d. and observation-driven models.
//!
//! | kernel        | target                                     | auxiliary state       |
//! |---------------|--------------------------------------------|-----------------------|
//! | [`Marginal`]  | `π^ε(θ | y)`, exact ABC likelihood          | none                  |
//! | [`Naive`]     | `π^ε(θ, u_{1:n} | y)`                      | one hitting `u_i`     |
//! | [`NTrials`]   | `N` auxiliaries per datum                  | hit counts            |
//! | [`NHit`]      | sample until `N` hits per datum            | trial counts `m_i`    |
//! | [`Collapsed`] | `π^ε(θ, φ_{1:n} | y)` in noise space        | `φ_{1:n}`             |
//!
//! All share the θ-marginal `π^ε(θ | y_{1:n})`. Every kernel implements
//! [`MhKernel`], and [`run_chain`] drives any of them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::abc::{abc_loglik, AbcKernel};
use crate::error::{Error, Result};
use crate::models::{
    perturb_noisy, CollapsedDatumModel, CollapsedState, DatumModel, ModelSpec, ObservationSeries,
    Proposal, TractableDensity,
};
use crate::stochastics::RngStream;

/// Default per-datum trial cap for sample-until-hit loops.
pub const DEFAULT_CAP: u64 = 10_000_000;

/// Stream id reserved for the noisy-ABC perturbation of the data.
pub const NOISY_STREAM: u64 = u64::MAX;

/// `N = max(2, round(n / 2))`.
pub fn default_trials(n: usize) -> usize {
    ((n as f64 / 2.0).round() as usize).max(2)
}

/// Kernel-specific auxiliary variables.
#[derive(Clone, Debug, PartialEq)]
pub enum Aux {
    None,
    /// One hitting pseudo-observation per datum (`n x d_y`).
    Series(Vec<f64>),
    /// Hits among the `N` trials of each datum.
    HitCounts(Vec<u32>),
    /// Trials needed to reach `N` hits, per datum.
    TrialCounts(Vec<u64>),
    Collapsed(CollapsedState),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub theta: Vec<f64>,
    pub aux: Aux,
    pub log_prior: f64,
    /// Log of the θ-dependent likelihood factor (exact or estimated, up to constants).
    pub log_target_factor: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepOutcome {
    pub accepted: bool,
    /// The proposal was abandoned at the trial cap.
    pub capped: bool,
}

/// Everything a kernel step conditions on.
#[derive(Clone, Copy, Debug)]
pub struct AbcTarget<'a> {
    pub data: &'a ObservationSeries,
    pub kernel: AbcKernel,
}

impl<'a> AbcTarget<'a> {
    pub fn new(data: &'a ObservationSeries, eps: f64) -> Result<Self> {
        Ok(Self {
            data,
            kernel: AbcKernel::new(eps, data.dim())?,
        })
    }
}

/// A Metropolis–Hastings kernel on `(θ, aux)`.
pub trait MhKernel<M: ?Sized> {
    fn name(&self) -> &'static str;

    /// Build a valid state at `theta`, or `None` if none was found within `cap`.
    fn initialize(
        &self,
        model: &M,
        target: &AbcTarget,
        theta: &[f64],
        cap: u64,
        rng: &mut RngStream,
    ) -> Result<Option<ChainState>>;

    /// One MH transition. Rejections leave `state` untouched.
    fn step(
        &self,
        model: &M,
        target: &AbcTarget,
        state: &mut ChainState,
        proposal: &Proposal,
        rng: &mut RngStream,
    ) -> Result<StepOutcome>;

    /// Names of the per-iteration scalar channels recorded in the trace.
    fn extra_names(&self) -> Vec<String> {
        Vec::new()
    }

    fn extras(&self, _state: &ChainState, _out: &mut Vec<f64>) {}
}

/// Accept with probability `1 ∧ exp(log_ratio)`. A `-inf` ratio rejects without
/// consuming randomness.
#[inline]
pub fn mh_accept(log_ratio: f64, rng: &mut RngStream) -> bool {
    if log_ratio == f64::NEG_INFINITY || log_ratio.is_nan() {
        return false;
    }
    rng.open01().ln() < log_ratio
}

/// Conditioning states at `theta`; `None` if the recursion left the finite range.
fn conditioning<M: DatumModel + ?Sized>(
    model: &M,
    theta: &[f64],
    data: &ObservationSeries,
) -> Option<Vec<f64>> {
    let s = model.conditioning(theta, data);
    s.iter().all(|x| x.is_finite()).then_some(s)
}

#[inline]
fn state_at(states: &[f64], i: usize) -> Option<f64> {
    states.get(i).copied()
}

/// Proposed θ and the part of the log-ratio that does not depend on the kernel.
struct Proposed {
    theta: Vec<f64>,
    log_prior: f64,
    log_base: f64,
}

fn propose<M: ModelSpec + ?Sized>(
    model: &M,
    state: &ChainState,
    proposal: &Proposal,
    rng: &mut RngStream,
) -> Option<Proposed> {
    let (theta, log_q) = proposal.propose(&state.theta, rng);
    let log_prior = model.log_prior(&theta);
    (log_prior > f64::NEG_INFINITY).then_some(Proposed {
        theta,
        log_prior,
        log_base: log_prior - state.log_prior + log_q,
    })
}

/// Simulate until the first hit at datum `y`. Returns the hitting draw's trial index.
#[inline]
fn first_hit<M: DatumModel + ?Sized>(
    model: &M,
    theta: &[f64],
    state: Option<f64>,
    y: &[f64],
    kernel: &AbcKernel,
    cap: u64,
    rng: &mut RngStream,
    buf: &mut [f64],
) -> Option<u64> {
    for m in 1..=cap {
        model.sample_datum(theta, state, rng, buf);
        if kernel.hits(buf, y) {
            return Some(m);
        }
    }
    None
}

/// Number of hits among `n` fresh simulations at datum `y`.
#[inline]
fn count_hits<M: DatumModel + ?Sized>(
    model: &M,
    theta: &[f64],
    state: Option<f64>,
    y: &[f64],
    kernel: &AbcKernel,
    n: usize,
    rng: &mut RngStream,
    buf: &mut [f64],
) -> u32 {
    let mut hits = 0;
    for _ in 0..n {
        model.sample_datum(theta, state, rng, buf);
        hits += kernel.hits(buf, y) as u32;
    }
    hits
}

/// Trials `m` needed for `n_hits` hits at datum `y`, or `None` past `cap`.
///
/// `(n_hits - 1) / (m - 1)` is an unbiased estimate of the hit probability.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn trials_until_hits<M: DatumModel + ?Sized>(
    model: &M,
    theta: &[f64],
    state: Option<f64>,
    y: &[f64],
    kernel: &AbcKernel,
    n_hits: usize,
    cap: u64,
    rng: &mut RngStream,
    buf: &mut [f64],
) -> Option<u64> {
    let mut hits = 0;
    for m in 1..=cap {
        model.sample_datum(theta, state, rng, buf);
        if kernel.hits(buf, y) {
            hits += 1;
            if hits == n_hits {
                return Some(m);
            }
        }
    }
    None
}

/// Monte Carlo estimates of `α_i = P_θ(d(U_i, y_i) < ε)` from `trials` draws each.
pub fn estimate_hit_probabilities<M: DatumModel + ?Sized>(
    model: &M,
    theta: &[f64],
    target: &AbcTarget,
    trials: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::usage("need at least one trial"));
    }
    let states = conditioning(model, theta, target.data).unwrap_or_default();
    let mut buf = vec![0.0; target.data.dim()];
    Ok(target
        .data
        .rows()
        .enumerate()
        .map(|(i, y)| {
            let hits = count_hits(model, theta, state_at(&states, i), y, &target.kernel, trials, rng, &mut buf);
            hits as f64 / trials as f64
        })
        .collect())
}

/// Exact ABC likelihood, for oracle models.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Marginal {
    /// Quadrature resolution when the model has no closed form.
    pub quadrature_points: usize,
}

impl Default for Marginal {
    fn default() -> Self {
        Self {
            quadrature_points: 401,
        }
    }
}

impl<M: TractableDensity + ?Sized> MhKernel<M> for Marginal {
    fn name(&self) -> &'static str {
        "marginal"
    }

    fn initialize(
        &self,
        model: &M,
        target: &AbcTarget,
        theta: &[f64],
        _cap: u64,
        _rng: &mut RngStream,
    ) -> Result<Option<ChainState>> {
        let ll = abc_loglik(model, theta, target.data, target.kernel.eps(), self.quadrature_points)?;
        Ok(ll.is_finite().then(|| ChainState {
            theta: theta.to_vec(),
            aux: Aux::None,
            log_prior: model.log_prior(theta),
            log_target_factor: ll,
        }))
    }

    fn step(
        &self,
        model: &M,
        target: &AbcTarget,
        state: &mut ChainState,
        proposal: &Proposal,
        rng: &mut RngStream,
    ) -> Result<StepOutcome> {
        let Some(p) = propose(model, state, proposal, rng) else {
            return Ok(StepOutcome::default());
        };
        let ll = abc_loglik(model, &p.theta, target.data, target.kernel.eps(), self.quadrature_points)?;
        let accepted = mh_accept(p.log_base + ll - state.log_target_factor, rng);
        if accepted {
            *state = ChainState {
                theta: p.theta,
                aux: Aux::None,
                log_prior: p.log_prior,
                log_target_factor: ll,
            };
        }
        Ok(StepOutcome {
            accepted,
            capped: false,
        })
    }
}

/// One pseudo-observation per datum; accept only if all hit.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Naive {
    /// Stop simulating at the first miss. Same acceptance law, less randomness consumed.
    pub early_reject: bool,
}

impl<M: DatumModel + ?Sized> MhKernel<M> for Naive {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn initialize(
        &self,
        model: &M,
        target: &AbcTarget,
        theta: &[f64],
        cap: u64,
        rng: &mut RngStream,
    ) -> Result<Option<ChainState>> {
        let Some(states) = conditioning(model, theta, target.data) else {
            return Ok(None);
        };
        let d = target.data.dim();
        let mut u = vec![0.0; target.data.len() * d];
        for (i, y) in target.data.rows().enumerate() {
            let out = &mut u[i * d..(i + 1) * d];
            if first_hit(model, theta, state_at(&states, i), y, &target.kernel, cap, rng, out).is_none() {
                return Ok(None);
            }
        }
        Ok(Some(ChainState {
            theta: theta.to_vec(),
            aux: Aux::Series(u),
            log_prior: model.log_prior(theta),
            log_target_factor: 0.0,
        }))
    }

    fn step(
        &self,
        model: &M,
        target: &AbcTarget,
        state: &mut ChainState,
        proposal: &Proposal,
        rng: &mut RngStream,
    ) -> Result<StepOutcome> {
        if !matches!(state.aux, Aux::Series(_)) {
            return Err(Error::usage("naive ABC kernel needs a hitting auxiliary series"));
        }
        let Some(p) = propose(model, state, proposal, rng) else {
            return Ok(StepOutcome::default());
        };
        let Some(states) = conditioning(model, &p.theta, target.data) else {
            return Ok(StepOutcome::default());
        };
        let d = target.data.dim();
        let mut u = vec![0.0; target.data.len() * d];
        let mut all_hit = true;
        for (i, y) in target.data.rows().enumerate() {
            let out = &mut u[i * d..(i + 1) * d];
            model.sample_datum(&p.theta, state_at(&states, i), rng, out);
            if !target.kernel.hits(out, y) {
                all_hit = false;
                if self.early_reject {
                    break;
                }
            }
        }
        if !all_hit {
            return Ok(StepOutcome::default());
        }
        let accepted = mh_accept(p.log_base, rng);
        if accepted {
            *state = ChainState {
                theta: p.theta,
                aux: Aux::Series(u),
                log_prior: p.log_prior,
                log_target_factor: 0.0,
            };
        }
        Ok(StepOutcome {
            accepted,
            capped: false,
        })
    }
}

/// `N` trials per datum, acceptance through the ratio of hit counts.
///
/// Simulation stops at the first datum with no hit, which rejects surely.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NTrials {
    pub n: usize,
}

impl<M: DatumModel + ?Sized> MhKernel<M> for NTrials {
    fn name(&self) -> &'static str {
        "ntrials"
    }

    fn initialize(
        &self,
        model: &M,
        target: &AbcTarget,
        theta: &[f64],
        cap: u64,
        rng: &mut RngStream,
    ) -> Result<Option<ChainState>> {
        if self.n == 0 {
            return Err(Error::usage("N must be at least 1"));
        }
        let Some(states) = conditioning(model, theta, target.data) else {
            return Ok(None);
        };
        let mut buf = vec![0.0; target.data.dim()];
        let batches = (cap / self.n as u64).max(1);
        let mut counts = Vec::with_capacity(target.data.len());
        for (i, y) in target.data.rows().enumerate() {
            let st = state_at(&states, i);
            let c = (0..batches)
                .map(|_| count_hits(model, theta, st, y, &target.kernel, self.n, rng, &mut buf))
                .find(|&c| c > 0);
            match c {
                Some(c) => counts.push(c),
                None => return Ok(None),
            }
        }
        let factor = counts.iter().map(|&c| (c as f64).ln()).sum();
        Ok(Some(ChainState {
            theta: theta.to_vec(),
            aux: Aux::HitCounts(counts),
            log_prior: model.log_prior(theta),
            log_target_factor: factor,
        }))
    }

    fn step(
        &self,
        model: &M,
        target: &AbcTarget,
        state: &mut ChainState,
        proposal: &Proposal,
        rng: &mut RngStream,
    ) -> Result<StepOutcome> {
        if !matches!(state.aux, Aux::HitCounts(_)) {
            return Err(Error::usage("N-trials kernel needs stored hit counts"));
        }
        let Some(p) = propose(model, state, proposal, rng) else {
            return Ok(StepOutcome::default());
        };
        let Some(states) = conditioning(model, &p.theta, target.data) else {
            return Ok(StepOutcome::default());
        };
        let mut buf = vec![0.0; target.data.dim()];
        let mut counts = Vec::with_capacity(target.data.len());
        let mut factor = 0.0;
        for (i, y) in target.data.rows().enumerate() {
            let c = count_hits(model, &p.theta, state_at(&states, i), y, &target.kernel, self.n, rng, &mut buf);
            if c == 0 {
                return Ok(StepOutcome::default());
            }
            factor += (c as f64).ln();
            counts.push(c);
        }
        let accepted = mh_accept(p.log_base + factor - state.log_target_factor, rng);
        if accepted {
            *state = ChainState {
                theta: p.theta,
                aux: Aux::HitCounts(counts),
                log_prior: p.log_prior,
                log_target_factor: factor,
            };
        }
        Ok(StepOutcome {
            accepted,
            capped: false,
        })
    }
}

/// Simulate until `N` hits per datum; acceptance `∏ (m_i - 1) / (m'_i - 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NHit {
    pub n: usize,
    /// Per-datum trial cap; exceeding it abandons the proposal.
    pub cap: u64,
}

impl NHit {
    pub fn new(n: usize) -> Self {
        Self { n, cap: DEFAULT_CAP }
    }
}

impl<M: DatumModel + ?Sized> MhKernel<M> for NHit {
    fn name(&self) -> &'static str {
        "nhit"
    }

    fn initialize(
        &self,
        model: &M,
        target: &AbcTarget,
        theta: &[f64],
        cap: u64,
        rng: &mut RngStream,
    ) -> Result<Option<ChainState>> {
        if self.n < 2 {
            return Err(Error::usage("N-hit kernel needs N >= 2"));
        }
        let Some(states) = conditioning(model, theta, target.data) else {
            return Ok(None);
        };
        let mut buf = vec![0.0; target.data.dim()];
        let cap = cap.min(self.cap);
        let mut counts = Vec::with_capacity(target.data.len());
        for (i, y) in target.data.rows().enumerate() {
            match trials_until_hits(model, theta, state_at(&states, i), y, &target.kernel, self.n, cap, rng, &mut buf) {
                Some(m) => counts.push(m),
                None => return Ok(None),
            }
        }
        let factor = -counts.iter().map(|&m| ((m - 1) as f64).ln()).sum::<f64>();
        Ok(Some(ChainState {
            theta: theta.to_vec(),
            aux: Aux::TrialCounts(counts),
            log_prior: model.log_prior(theta),
            log_target_factor: factor,
        }))
    }

    fn step(
        &self,
        model: &M,
        target: &AbcTarget,
        state: &mut ChainState,
        proposal: &Proposal,
        rng: &mut RngStream,
    ) -> Result<StepOutcome> {
        if !matches!(state.aux, Aux::TrialCounts(_)) {
            return Err(Error::usage("N-hit kernel needs stored trial counts"));
        }
        let Some(p) = propose(model, state, proposal, rng) else {
            return Ok(StepOutcome::default());
        };
        let Some(states) = conditioning(model, &p.theta, target.data) else {
            return Ok(StepOutcome::default());
        };
        let mut buf = vec![0.0; target.data.dim()];
        let mut counts = Vec::with_capacity(target.data.len());
        let mut factor = 0.0;
        for (i, y) in target.data.rows().enumerate() {
            match trials_until_hits(model, &p.theta, state_at(&states, i), y, &target.kernel, self.n, self.cap, rng, &mut buf) {
                Some(m) => {
                    factor -= ((m - 1) as f64).ln();
                    counts.push(m);
                }
                None => {
                    return Ok(StepOutcome {
                        accepted: false,
                        capped: true,
                    })
                }
            }
        }
        let accepted = mh_accept(p.log_base + factor - state.log_target_factor, rng);
        if accepted {
            *state = ChainState {
                theta: p.theta,
                aux: Aux::TrialCounts(counts),
                log_prior: p.log_prior,
                log_target_factor: factor,
            };
        }
        Ok(StepOutcome {
            accepted,
            capped: false,
        })
    }

    fn extra_names(&self) -> Vec<String> {
        vec!["sum_m".into()]
    }

    fn extras(&self, state: &ChainState, out: &mut Vec<f64>) {
        if let Aux::TrialCounts(m) = &state.aux {
            out.push(m.iter().sum::<u64>() as f64);
        }
    }
}

/// How the collapsed kernel refreshes `φ_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "kebab-case")]
pub enum NoiseMove {
    /// `φ'_i = φ_i + scale * Z`, accepted by `I(hit) p(φ') / p(φ)`.
    RandomWalk { scale: f64 },
    /// `φ'_i ~ p_θ`, accepted iff the induced observation hits.
    Independent,
}

/// MH on `(θ, φ_{1:n})` under `π(θ) ∏ I(d(g_θ(φ_i), y_i) < ε) p_θ(φ_i)`.
///
/// Each iteration is a θ-move with `φ` held fixed followed by one sweep of
/// per-datum `φ` updates. Only the θ-move counts towards the acceptance rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Collapsed {
    pub noise_move: NoiseMove,
}

impl Default for Collapsed {
    fn default() -> Self {
        Self {
            noise_move: NoiseMove::RandomWalk { scale: 1.0 },
        }
    }
}

fn noise_log_density<M: CollapsedDatumModel + ?Sized>(model: &M, theta: &[f64], phi: &[f64]) -> Result<f64> {
    model
        .log_noise_density(theta, phi)
        .ok_or_else(|| Error::capability("collapsed MH needs the noise density p_theta(phi)"))
}

impl<M: CollapsedDatumModel + ?Sized> MhKernel<M> for Collapsed {
    fn name(&self) -> &'static str {
        "collapsed"
    }

    fn initialize(
        &self,
        model: &M,
        target: &AbcTarget,
        theta: &[f64],
        cap: u64,
        rng: &mut RngStream,
    ) -> Result<Option<ChainState>> {
        let Some(states) = conditioning(model, theta, target.data) else {
            return Ok(None);
        };
        let k = model.noise_dim();
        let mut phi = vec![0.0; target.data.len() * k];
        let mut buf = vec![0.0; target.data.dim()];
        for (i, y) in target.data.rows().enumerate() {
            let st = state_at(&states, i);
            let out = &mut phi[i * k..(i + 1) * k];
            if model.invert_observation(theta, st, y, out).is_some() {
                continue;
            }
            let mut found = false;
            for _ in 0..cap {
                model
                    .sample_noise(theta, rng, out)
                    .ok_or_else(|| Error::capability("collapsed MH needs an invertible map or a noise sampler to start"))?;
                model.observation_from_noise(theta, st, out, &mut buf);
                if target.kernel.hits(&buf, y) {
                    found = true;
                    break;
                }
            }
            if !found {
                return Ok(None);
            }
        }
        let mut factor = 0.0;
        for i in 0..target.data.len() {
            factor += noise_log_density(model, theta, &phi[i * k..(i + 1) * k])?;
        }
        if !factor.is_finite() {
            return Ok(None);
        }
        Ok(Some(ChainState {
            theta: theta.to_vec(),
            aux: Aux::Collapsed(CollapsedState {
                obs_noise: phi,
                obs_noise_dim: k,
                latent_noise: Vec::new(),
                latent_noise_dim: 0,
            }),
            log_prior: model.log_prior(theta),
            log_target_factor: factor,
        }))
    }

    fn step(
        &self,
        model: &M,
        target: &AbcTarget,
        state: &mut ChainState,
        proposal: &Proposal,
        rng: &mut RngStream,
    ) -> Result<StepOutcome> {
        let Aux::Collapsed(cs) = &state.aux else {
            return Err(Error::usage("collapsed kernel needs a noise state"));
        };
        let mut buf = vec![0.0; target.data.dim()];
        let mut accepted = false;

        // θ-move with φ fixed
        if let Some(p) = propose(model, state, proposal, rng) {
            if let Some(states) = conditioning(model, &p.theta, target.data) {
                let mut all_hit = true;
                let mut factor = 0.0;
                for (i, y) in target.data.rows().enumerate() {
                    model.observation_from_noise(&p.theta, state_at(&states, i), cs.obs(i), &mut buf);
                    if !target.kernel.hits(&buf, y) {
                        all_hit = false;
                        break;
                    }
                    factor += noise_log_density(model, &p.theta, cs.obs(i))?;
                }
                if all_hit && mh_accept(p.log_base + factor - state.log_target_factor, rng) {
                    state.theta = p.theta;
                    state.log_prior = p.log_prior;
                    state.log_target_factor = factor;
                    accepted = true;
                }
            }
        }

        // per-datum φ sweep at the current θ
        let theta = state.theta.clone();
        let states = conditioning(model, &theta, target.data)
            .ok_or_else(|| Error::usage("current collapsed state has non-finite conditioning"))?;
        let Aux::Collapsed(cs) = &mut state.aux else {
            unreachable!()
        };
        let k = cs.obs_noise_dim;
        let mut cand = vec![0.0; k];
        for (i, y) in target.data.rows().enumerate() {
            let cur_ld = noise_log_density(model, &theta, cs.obs(i))?;
            let log_q = match self.noise_move {
                NoiseMove::RandomWalk { scale } => {
                    if scale == 0.0 {
                        continue;
                    }
                    for (c, &v) in cand.iter_mut().zip(cs.obs(i)) {
                        *c = v + scale * rng.std_normal();
                    }
                    0.0
                }
                NoiseMove::Independent => {
                    model
                        .sample_noise(&theta, rng, &mut cand)
                        .ok_or_else(|| Error::capability("independent noise moves need a noise sampler"))?;
                    // q = p cancels the density ratio
                    cur_ld - noise_log_density(model, &theta, &cand)?
                }
            };
            model.observation_from_noise(&theta, state_at(&states, i), &cand, &mut buf);
            if !target.kernel.hits(&buf, y) {
                continue;
            }
            let new_ld = noise_log_density(model, &theta, &cand)?;
            if mh_accept(new_ld - cur_ld + log_q, rng) {
                cs.obs_mut(i).copy_from_slice(&cand);
                state.log_target_factor += new_ld - cur_ld;
            }
        }
        Ok(StepOutcome {
            accepted,
            capped: false,
        })
    }
}

/// Where the chain starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Draw θ from the prior, redrawing until a valid state is found.
    Prior,
    /// Start at the given θ; only the auxiliary variables are retried.
    Fixed(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainSettings {
    pub iterations: usize,
    pub init: Init,
    /// Bounded number of initialization attempts.
    pub init_attempts: usize,
    /// Per-datum trial cap while initializing.
    pub init_cap: u64,
}

impl ChainSettings {
    pub fn new(iterations: usize) -> Self {
        Self {
            iterations,
            init: Init::Prior,
            init_attempts: 100,
            init_cap: 1_000_000,
        }
    }
}

/// A named extra channel of the trace.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtraColumn {
    pub name: String,
    pub values: Vec<f64>,
}

/// Recorded chain: one row per iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub names: Vec<String>,
    /// Row-major `iterations x d_θ`.
    pub draws: Vec<f64>,
    pub accepted: Vec<bool>,
    pub extras: Vec<ExtraColumn>,
    /// Proposals abandoned at a trial cap.
    pub cap_events: usize,
}

impl Trace {
    pub fn new(names: Vec<String>, extra_names: Vec<String>) -> Self {
        Self {
            names,
            draws: Vec::new(),
            accepted: Vec::new(),
            extras: extra_names
                .into_iter()
                .map(|name| ExtraColumn {
                    name,
                    values: Vec::new(),
                })
                .collect(),
            cap_events: 0,
        }
    }

    pub fn push(&mut self, theta: &[f64], accepted: bool, extras: &[f64]) {
        debug_assert_eq!(theta.len(), self.names.len());
        self.draws.extend_from_slice(theta);
        self.accepted.push(accepted);
        for (col, &v) in self.extras.iter_mut().zip(extras) {
            col.values.push(v);
        }
    }

    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let d = self.dim();
        &self.draws[t * d..(t + 1) * d]
    }

    /// Draws of parameter `j` across iterations.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.iter().skip(j).step_by(self.dim()).copied().collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|&&a| a).count() as f64 / self.len() as f64
    }

    /// Trace with the first `n` iterations dropped.
    pub fn burn_in(&self, n: usize) -> Trace {
        let n = n.min(self.len());
        Trace {
            names: self.names.clone(),
            draws: self.draws[n * self.dim()..].to_vec(),
            accepted: self.accepted[n..].to_vec(),
            extras: self
                .extras
                .iter()
                .map(|c| ExtraColumn {
                    name: c.name.clone(),
                    values: c.values[n..].to_vec(),
                })
                .collect(),
            cap_events: self.cap_events,
        }
    }

    /// CSV with header `iter,accepted,<names>[,<extras>]`; floats in `{:.16e}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["iter".to_string(), "accepted".to_string()];
        header.extend(self.names.iter().cloned());
        header.extend(self.extras.iter().map(|c| c.name.clone()));
        writeln!(w, "{}", header.join(","))?;
        for t in 0..self.len() {
            write!(w, "{},{}", t, self.accepted[t] as u8)?;
            for v in self.row(t) {
                write!(w, ",{v:.16e}")?;
            }
            for c in &self.extras {
                write!(w, ",{:.16e}", c.values[t])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn check_target<M: ModelSpec + ?Sized>(model: &M, target: &AbcTarget) -> Result<()> {
    if model.obs_dim() != target.data.dim() || target.kernel.dim() != target.data.dim() {
        return Err(Error::usage(format!(
            "model, kernel and data dimensions differ ({}, {}, {})",
            model.obs_dim(),
            target.kernel.dim(),
            target.data.dim()
        )));
    }
    Ok(())
}

/// Find a valid starting state under `settings.init`.
pub fn initialize_chain<M, K>(
    model: &M,
    target: &AbcTarget,
    kernel: &K,
    settings: &ChainSettings,
    rng: &mut RngStream,
) -> Result<ChainState>
where
    M: ModelSpec + ?Sized,
    K: MhKernel<M> + ?Sized,
{
    check_target(model, target)?;
    if let Init::Fixed(theta) = &settings.init {
        model.check_theta(theta)?;
    }
    for _ in 0..settings.init_attempts.max(1) {
        let theta = match &settings.init {
            Init::Prior => model.sample_prior(rng),
            Init::Fixed(t) => t.clone(),
        };
        if model.log_prior(&theta) == f64::NEG_INFINITY {
            continue;
        }
        if let Some(s) = kernel.initialize(model, target, &theta, settings.init_cap, rng)? {
            return Ok(s);
        }
    }
    Err(Error::Initialization(format!(
        "{} kernel found no valid starting state in {} attempts (per-datum cap {}); \
         try a larger eps or a fixed initial theta",
        kernel.name(),
        settings.init_attempts,
        settings.init_cap
    )))
}

/// Initialize, then apply `kernel` for `settings.iterations` steps.
pub fn run_chain<M, K>(
    model: &M,
    target: &AbcTarget,
    kernel: &K,
    proposal: &Proposal,
    settings: &ChainSettings,
    rng: &mut RngStream,
) -> Result<Trace>
where
    M: ModelSpec + ?Sized,
    K: MhKernel<M> + ?Sized,
{
    if settings.iterations == 0 {
        return Err(Error::usage("iterations must be at least 1"));
    }
    if proposal.moves.len() != model.dim() {
        return Err(Error::usage(format!(
            "proposal has {} moves, model has {} parameters",
            proposal.moves.len(),
            model.dim()
        )));
    }
    let mut state = initialize_chain(model, target, kernel, settings, rng)?;
    let mut trace = Trace::new(model.param_names(), kernel.extra_names());
    let mut extras = Vec::new();
    for _ in 0..settings.iterations {
        let out = kernel.step(model, target, &mut state, proposal, rng)?;
        trace.cap_events += out.capped as usize;
        extras.clear();
        kernel.extras(&state, &mut extras);
        trace.push(&state.theta, out.accepted, &extras);
    }
    Ok(trace)
}

/// Noisy ABC: perturb `data` on the [`NOISY_STREAM`] substream of `rng`, then
/// run the chain on the perturbed series with `rng` itself.
pub fn run_chain_noisy<M, K>(
    model: &M,
    data: &ObservationSeries,
    eps: f64,
    kernel: &K,
    proposal: &Proposal,
    settings: &ChainSettings,
    rng: &mut RngStream,
) -> Result<(ObservationSeries, Trace)>
where
    M: ModelSpec + ?Sized,
    K: MhKernel<M> + ?Sized,
{
    let z = perturb_noisy(data, eps, &mut rng.substream(NOISY_STREAM))?;
    let target = AbcTarget::new(&z, eps)?;
    let trace = run_chain(model, &target, kernel, proposal, settings, rng)?;
    Ok((z, trace))
}
