use proptest::prelude::*;

use tsabc::abc::{abc_loglik_gaussian, AbcKernel};
use tsabc::config::parse_config;
use tsabc::data::{parse_csv, parse_trace_csv, write_series_csv};
use tsabc::models::ObservationSeries;
use tsabc::prelude::*;
use tsabc::smc::resample_indices;

fn toy() -> GaussianToyHmm {
    GaussianToyHmm::constant_latent(1.0, 0.5, Prior::Normal { mean: 0.0, sd: 1.0 })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stable_draws_are_finite(alpha in 0.3f64..=2.0, skew in -1.0f64..=1.0, seed in any::<u64>()) {
        let p = StableParams::new(alpha, skew, 1.0, 0.0).unwrap();
        let mut rng = RngStream::new(seed, 0);
        for _ in 0..200 {
            prop_assert!(sample_stable(&mut rng, &p).is_finite());
        }
    }

    #[test]
    fn gaussian_abc_density_is_bounded_by_the_mode(
        mu in -5.0f64..5.0, sigma in 0.05f64..5.0, y in -10.0f64..10.0, eps in 1e-3f64..10.0,
    ) {
        let l = abc_loglik_gaussian(mu, sigma, y, eps);
        let mode = -(sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
        prop_assert!(l <= mode + 1e-9, "{l} > {mode}");
    }

    #[test]
    fn gaussian_abc_density_is_symmetric(mu in -5.0f64..5.0, d in 0.0f64..8.0, sigma in 0.1f64..3.0, eps in 0.01f64..3.0) {
        let a = abc_loglik_gaussian(mu, sigma, mu + d, eps);
        let b = abc_loglik_gaussian(mu, sigma, mu - d, eps);
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn resampled_ancestors_are_in_range_and_never_weightless(
        weights in prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..5.0], 1..60),
        systematic in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let scheme = if systematic { Resampling::Systematic } else { Resampling::Multinomial };
        let mut rng = RngStream::new(seed, 1);
        match resample_indices(&weights, scheme, &mut rng) {
            None => prop_assert!(weights.iter().all(|&w| w == 0.0)),
            Some(idx) => {
                prop_assert_eq!(idx.len(), weights.len());
                for i in idx {
                    prop_assert!(weights[i] > 0.0);
                }
            }
        }
    }

    #[test]
    fn alive_filter_spends_at_least_n_trials(
        ys in prop::collection::vec(-2.0f64..2.0, 1..6),
        n in 2usize..20,
        eps in 0.2f64..2.0,
        seed in any::<u64>(),
    ) {
        let y = ObservationSeries::univariate(ys.clone()).unwrap();
        let k = AbcKernel::new(eps, 1).unwrap();
        let r = alive_smc_filter(&toy(), &[0.0], &y, &k, n, Propagation::Bootstrap, &FilterOptions::default(),
            &mut RngStream::new(seed, 0)).unwrap();
        prop_assert!(r.nc.is_finite());
        prop_assert_eq!(r.particles.len(), n - 1);
        let m = r.nc.trial_counts.unwrap();
        prop_assert_eq!(m.len(), ys.len());
        prop_assert!(m.iter().all(|&m| m >= n as u64));
        let total: f64 = r.nc.per_step_log_factors.iter().sum();
        prop_assert!((total - r.nc.log_value).abs() < 1e-9);
    }

    #[test]
    fn filters_replay_from_the_same_stream(seed in any::<u64>(), n in 2usize..30) {
        let y = ObservationSeries::univariate(vec![0.1, -0.3, 0.7]).unwrap();
        let k = AbcKernel::new(1.0, 1).unwrap();
        let opts = FilterOptions::default();
        let run = |s| smc_abc_filter(&toy(), &[0.0], &y, &k, n, Propagation::Bootstrap, &opts,
            &mut RngStream::new(s, 3)).unwrap();
        prop_assert_eq!(run(seed), run(seed));
    }

    #[test]
    fn series_csv_round_trips(
        values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 1..40),
        dim in 1usize..4,
    ) {
        let len = values.len() / dim * dim;
        prop_assume!(len > 0);
        let s = ObservationSeries::new(values[..len].to_vec(), dim, tsabc::models::SeriesKind::Raw).unwrap();
        let mut buf = Vec::new();
        write_series_csv(&s, &mut buf).unwrap();
        prop_assert_eq!(parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap(), s);
    }

    #[test]
    fn trace_csv_round_trips(rows in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6, any::<bool>(), -1e3f64..0.0), 1..30)) {
        let mut t = Trace::new(vec!["a".into(), "b".into()], vec!["log_nc".into()]);
        for (a, b, acc, nc) in rows {
            t.push(&[a, b], acc, &[nc]);
        }
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        prop_assert_eq!(parse_trace_csv(std::str::from_utf8(&buf).unwrap()).unwrap(), t);
    }

    #[test]
    fn resolved_config_round_trips_through_toml(
        seed in any::<u64>(),
        eps in 1e-3f64..100.0,
        iterations in 1usize..100_000,
        n_data in 1usize..1000,
        noisy in any::<bool>(),
    ) {
        let text = format!(
            "algorithm = \"nhit\"\nseed = {seed}\niterations = {iterations}\nmodel.id = \"normal-location\"\n\
             abc.eps = {eps:?}\nabc.noisy = {noisy}\ndata.synthetic.n = {n_data}\ndata.synthetic.theta = [0.0]\n"
        );
        let cfg = parse_config(&text).unwrap().resolved(n_data);
        let back = parse_config(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
