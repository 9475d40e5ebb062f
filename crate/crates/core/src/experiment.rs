//! Running a configured experiment and writing its artifacts.
//!
//! Every file except `timing.json` is a deterministic function of the
//! configuration, the seed and the library version.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::abc::AbcKernel;
use crate::config::{Algorithm, BuiltModel, ExperimentConfig, NoiseMoveKind, Task};
use crate::diagnostics::{autocorrelation, kde, kde_grid, silverman_bandwidth, summarize, Bandwidth, TraceSummary};
use crate::error::{Error, Result};
use crate::mcmc::{
    run_chain, AbcTarget, ChainSettings, Collapsed, Init, Marginal, NHit, NTrials, Naive, NoiseMove, Trace,
    NOISY_STREAM,
};
use crate::models::{
    CollapsedDatumModel, CollapsedHmm, DatumModel, HiddenMarkovModel, ModelKind, ObservationSeries, Proposal,
    TractableDensity,
};
use crate::pmmh::{run_collapsed_pmmh, run_filter, run_pmmh, FilterKind, PmmhSettings};
use crate::smc::{write_filter_csv, FilterOptions, FilterResult};
use crate::stochastics::RngStream;
use crate::data::{load_csv, write_series_csv};
use crate::models::perturb_noisy;

/// Stream reserved for synthetic data generation.
pub const DATA_STREAM: u64 = u64::MAX - 1;

/// The observed series: loaded from CSV or simulated on [`DATA_STREAM`].
pub fn load_data(cfg: &ExperimentConfig) -> Result<ObservationSeries> {
    if let Some(path) = &cfg.data.csv {
        return load_csv(path);
    }
    let syn = cfg
        .data
        .synthetic
        .as_ref()
        .ok_or_else(|| Error::config("data", "no data source"))?;
    let mut rng = RngStream::new(syn.seed.unwrap_or(cfg.seed), DATA_STREAM);
    let model = cfg.model.build()?;
    let (y, _) = match &model {
        BuiltModel::NormalLocation(m) => DatumModel::simulate(m, &syn.theta, syn.n, &mut rng)?,
        BuiltModel::GaussianScale(m) => DatumModel::simulate(m, &syn.theta, syn.n, &mut rng)?,
        BuiltModel::Garch(m) => DatumModel::simulate(m, &syn.theta, syn.n, &mut rng)?,
        BuiltModel::Sv(m) => HiddenMarkovModel::simulate(m, &syn.theta, syn.n, &mut rng)?,
        BuiltModel::ToyHmm(m) => HiddenMarkovModel::simulate(m, &syn.theta, syn.n, &mut rng)?,
    };
    Ok(y)
}

/// Data the sampler conditions on: `y` itself, or its noisy-ABC perturbation.
pub fn conditioning_data(cfg: &ExperimentConfig, y: &ObservationSeries) -> Result<ObservationSeries> {
    if cfg.abc.noisy {
        perturb_noisy(y, cfg.abc.eps, &mut RngStream::new(cfg.seed, NOISY_STREAM))
    } else {
        Ok(y.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilterSummary {
    pub theta: Vec<f64>,
    pub log_nc: f64,
    pub collapsed_at: Option<usize>,
    pub capped_at: Option<usize>,
    pub simulations: u64,
}

/// Outcome of one chain or filter run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub trace: Option<Trace>,
    pub filter: Option<FilterResult>,
    pub filter_theta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub run: usize,
    pub stream: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub n_data: usize,
    pub runs: Vec<RunSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub wall_clock_seconds: f64,
    pub iterations: usize,
    pub runs: usize,
    pub seconds_per_iteration: f64,
}

/// Paths written by an experiment, in creation order.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: ExperimentSummary,
}

fn chain_settings(cfg: &ExperimentConfig) -> ChainSettings {
    ChainSettings {
        iterations: cfg.iterations,
        init: cfg.init.clone().map_or(Init::Prior, Init::Fixed),
        init_attempts: cfg.caps.init_attempts,
        init_cap: cfg.caps.init_trials,
    }
}

fn run_datum<M: DatumModel>(
    m: &M,
    cfg: &ExperimentConfig,
    n: usize,
    target: &AbcTarget,
    proposal: &Proposal,
    rng: &mut RngStream,
) -> Result<Trace> {
    let settings = chain_settings(cfg);
    match cfg.algorithm {
        Algorithm::Naive => run_chain(
            m,
            target,
            &Naive {
                early_reject: cfg.mcmc.early_reject,
            },
            proposal,
            &settings,
            rng,
        ),
        Algorithm::Ntrials => run_chain(m, target, &NTrials { n }, proposal, &settings, rng),
        Algorithm::Nhit => run_chain(m, target, &NHit { n, cap: cfg.caps.trials }, proposal, &settings, rng),
        other => Err(Error::config(
            "algorithm",
            format!("{} needs a tractable model", other.as_str()),
        )),
    }
}

fn run_tractable<M: TractableDensity + CollapsedDatumModel>(
    m: &M,
    cfg: &ExperimentConfig,
    n: usize,
    target: &AbcTarget,
    proposal: &Proposal,
    rng: &mut RngStream,
) -> Result<Trace> {
    let settings = chain_settings(cfg);
    match cfg.algorithm {
        Algorithm::Marginal => run_chain(
            m,
            target,
            &Marginal {
                quadrature_points: cfg.mcmc.quadrature_points,
            },
            proposal,
            &settings,
            rng,
        ),
        Algorithm::Collapsed => {
            let noise_move = match cfg.mcmc.noise_move {
                NoiseMoveKind::RandomWalk => NoiseMove::RandomWalk {
                    scale: cfg.mcmc.noise_scale,
                },
                NoiseMoveKind::Independent => NoiseMove::Independent,
            };
            run_chain(m, target, &Collapsed { noise_move }, proposal, &settings, rng)
        }
        _ => run_datum(m, cfg, n, target, proposal, rng),
    }
}

fn filter_theta(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    cfg.init
        .clone()
        .or_else(|| cfg.data.synthetic.as_ref().map(|s| s.theta.clone()))
        .ok_or_else(|| Error::config("init", "a filter run on CSV data needs `init` as its theta"))
}

fn run_hmm<M: HiddenMarkovModel + CollapsedHmm>(
    m: &M,
    cfg: &ExperimentConfig,
    n: usize,
    z: &ObservationSeries,
    kernel: &AbcKernel,
    proposal: &Proposal,
    rng: &mut RngStream,
) -> Result<RunOutput> {
    let options = FilterOptions {
        resampling: cfg.smc.resampling,
        cap: cfg.caps.trials,
    };
    let settings = PmmhSettings {
        iterations: cfg.iterations,
        n_particles: n,
        init: cfg.init.clone().map_or(Init::Prior, Init::Fixed),
        init_attempts: cfg.caps.init_attempts,
        filter_options: options,
    };
    let kind = |a| if a == Algorithm::Alive || a == Algorithm::PmmhAlive { FilterKind::Alive } else { FilterKind::Standard };
    match cfg.algorithm {
        Algorithm::Smc | Algorithm::Alive => {
            let theta = filter_theta(cfg)?;
            let res = run_filter(m, &theta, z, kernel, n, kind(cfg.algorithm), &options, rng)?;
            Ok(RunOutput {
                trace: None,
                filter: Some(res),
                filter_theta: theta,
            })
        }
        Algorithm::PmmhStandard | Algorithm::PmmhAlive => Ok(RunOutput {
            trace: Some(run_pmmh(m, z, kernel, kind(cfg.algorithm), proposal, &settings, rng)?),
            filter: None,
            filter_theta: Vec::new(),
        }),
        Algorithm::CollapsedPmmh => Ok(RunOutput {
            trace: Some(run_collapsed_pmmh(m, z, kernel, proposal, &settings, cfg.smc.importance_sd, rng)?),
            filter: None,
            filter_theta: Vec::new(),
        }),
        other => Err(Error::config(
            "algorithm",
            format!("{} is not a hidden Markov model algorithm", other.as_str()),
        )),
    }
}

/// One run on stream `stream`, conditioning on `z`.
pub fn run_once(cfg: &ExperimentConfig, z: &ObservationSeries, stream: u64) -> Result<RunOutput> {
    let model = cfg.model.build()?;
    let n = cfg.effective_n(z.len());
    let proposal = cfg.proposal.build();
    let mut rng = RngStream::new(cfg.seed, stream);
    let mcmc = |trace| {
        Ok(RunOutput {
            trace: Some(trace),
            filter: None,
            filter_theta: Vec::new(),
        })
    };
    if model.spec().kind() == ModelKind::Hmm {
        let kernel = AbcKernel::new(cfg.abc.eps, z.dim())?;
        return match &model {
            BuiltModel::Sv(m) => run_hmm(m, cfg, n, z, &kernel, &proposal, &mut rng),
            BuiltModel::ToyHmm(m) => run_hmm(m, cfg, n, z, &kernel, &proposal, &mut rng),
            _ => unreachable!("only hidden Markov models report ModelKind::Hmm"),
        };
    }
    let target = AbcTarget::new(z, cfg.abc.eps)?;
    match &model {
        BuiltModel::NormalLocation(m) => mcmc(run_tractable(m, cfg, n, &target, &proposal, &mut rng)?),
        BuiltModel::GaussianScale(m) => mcmc(run_tractable(m, cfg, n, &target, &proposal, &mut rng)?),
        BuiltModel::Garch(m) => mcmc(run_datum(m, cfg, n, &target, &proposal, &mut rng)?),
        _ => unreachable!("hidden Markov models handled above"),
    }
}

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path)?;
    files.push(path);
    Ok(BufWriter::new(f))
}

fn suffixed(stem: &str, run: usize, runs: usize) -> String {
    if runs == 1 {
        format!("{stem}.csv")
    } else {
        format!("{stem}_{run}.csv")
    }
}

/// `lag,<params>`; a constant column is written as NaN.
pub fn write_acf_csv<W: Write>(trace: &Trace, max_lag: usize, mut w: W) -> Result<()> {
    let lags = max_lag.min(trace.len().saturating_sub(1)).max(1);
    let cols: Vec<Vec<f64>> = (0..trace.dim())
        .map(|j| {
            autocorrelation(&trace.column(j), lags)
                .map(|a| a.rho)
                .unwrap_or_else(|_| vec![f64::NAN; lags + 1])
        })
        .collect();
    writeln!(w, "lag,{}", trace.names.join(","))?;
    for k in 0..=lags {
        write!(w, "{k}")?;
        for c in &cols {
            write!(w, ",{:.16e}", c[k])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Long format `param,x,density`; parameters without spread are skipped.
pub fn write_kde_csv<W: Write>(trace: &Trace, points: usize, mut w: W) -> Result<()> {
    writeln!(w, "param,x,density")?;
    for (j, name) in trace.names.iter().enumerate() {
        let xs = trace.column(j);
        let Ok(h) = silverman_bandwidth(&xs) else {
            continue;
        };
        let d = kde(&xs, &kde_grid(&xs, h, points), Bandwidth::Fixed(h))?;
        for (x, f) in d.grid.iter().zip(&d.density) {
            writeln!(w, "{name},{x:.16e},{f:.16e}")?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(value: &T, w: impl Write) -> Result<()> {
    let mut w = w;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    Ok(())
}

/// `acf.csv`, `kde.csv` and `summary.json` for an existing trace.
pub fn diagnose(trace: &Trace, dir: &Path, burn_in: usize, acf_lags: usize, kde_points: usize) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let t = trace.burn_in(burn_in);
    let mut files = Vec::new();
    write_acf_csv(&t, acf_lags, create(dir, "acf.csv", &mut files)?)?;
    write_kde_csv(&t, kde_points, create(dir, "kde.csv", &mut files)?)?;
    write_json(&summarize(&t)?, create(dir, "summary.json", &mut files)?)?;
    Ok(files)
}

/// Simulate the configured synthetic series and write it as `data.csv`.
pub fn simulate_to(cfg: &ExperimentConfig) -> Result<PathBuf> {
    if cfg.data.synthetic.is_none() {
        return Err(Error::config("data.synthetic", "simulate needs a synthetic data spec"));
    }
    let y = load_data(cfg)?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg.output.dir.join("data.csv");
    let mut w = BufWriter::new(File::create(&path)?);
    write_series_csv(&y, &mut w)?;
    w.flush()?;
    Ok(path)
}

/// Run `runs` independent chains (or filter replicates) on streams
/// `0..runs`, in parallel, and write all artifacts to `cfg.output.dir`.
pub fn run_experiment_chains(cfg: &ExperimentConfig, runs: usize) -> Result<Artifacts> {
    if runs == 0 {
        return Err(Error::config("chains", "must be at least 1"));
    }
    let start = Instant::now();
    let y = load_data(cfg)?;
    let z = conditioning_data(cfg, &y)?;
    let outputs: Vec<Result<RunOutput>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..runs)
            .map(|i| {
                let z = &z;
                s.spawn(move || run_once(cfg, z, i as u64))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::usage("worker panicked"))))
            .collect()
    });
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;
    let elapsed = start.elapsed().as_secs_f64();

    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    let mut summaries = Vec::new();
    for (i, out) in outputs.iter().enumerate() {
        let mut summary = RunSummary {
            run: i,
            stream: i as u64,
            trace: None,
            filter: None,
        };
        if let Some(trace) = &out.trace {
            let mut w = create(&dir, &suffixed("trace", i, runs), &mut files)?;
            trace.write_csv(&mut w)?;
            w.flush()?;
            let t = trace.burn_in(cfg.output.burn_in);
            if !t.is_empty() {
                let mut w = create(&dir, &suffixed("acf", i, runs), &mut files)?;
                write_acf_csv(&t, cfg.output.acf_lags, &mut w)?;
                w.flush()?;
                let mut w = create(&dir, &suffixed("kde", i, runs), &mut files)?;
                write_kde_csv(&t, cfg.output.kde_points, &mut w)?;
                w.flush()?;
                summary.trace = Some(summarize(&t)?);
            }
        }
        if let Some(f) = &out.filter {
            let mut w = create(&dir, &suffixed("filter", i, runs), &mut files)?;
            write_filter_csv(&f.history, &mut w)?;
            w.flush()?;
            summary.filter = Some(FilterSummary {
                theta: out.filter_theta.clone(),
                log_nc: f.nc.log_value,
                collapsed_at: f.nc.collapsed_at,
                capped_at: f.nc.capped_at,
                simulations: f.cost,
            });
        }
        summaries.push(summary);
    }
    let summary = ExperimentSummary {
        config: cfg.resolved(y.len()),
        seed: cfg.seed,
        n_data: y.len(),
        runs: summaries,
    };
    let mut w = create(&dir, "summary.json", &mut files)?;
    write_json(&summary, &mut w)?;
    w.flush()?;
    let iterations = if cfg.algorithm.task() == Task::Filter { 1 } else { cfg.iterations };
    let timing = Timing {
        wall_clock_seconds: elapsed,
        iterations,
        runs,
        seconds_per_iteration: elapsed / (iterations * runs) as f64,
    };
    let mut w = create(&dir, "timing.json", &mut files)?;
    write_json(&timing, &mut w)?;
    w.flush()?;
    Ok(Artifacts { dir, files, summary })
}

/// A single run on stream 0.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Artifacts> {
    run_experiment_chains(cfg, 1)
}
