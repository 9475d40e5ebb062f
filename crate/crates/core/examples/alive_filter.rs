//! Stochastic volatility with stable noise (alpha = 1.2) at a small tolerance:
//! the standard ABC filter loses every particle, the alive filter keeps going
//! at the price of more simulations.

use tsabc::prelude::*;
use tsabc::smc::write_filter_csv;

fn run() -> tsabc::Result<()> {
    let sv = StochasticVolatility::reference(1.2)?;
    let theta = [0.5, 0.05, 0.9];
    let (y, _) = HiddenMarkovModel::simulate(&sv, &theta, 50, &mut RngStream::new(42, 0))?;
    let opts = FilterOptions::default();
    let mut rng = RngStream::new(1, 0);

    for eps in [2.0, 1.0, 0.5] {
        let k = AbcKernel::new(eps, 1)?;
        let runs = 200;
        let mut collapsed = 0;
        let mut alive_cost = 0;
        for _ in 0..runs {
            let s = smc_abc_filter(&sv, &theta, &y, &k, 30, Propagation::Bootstrap, &opts, &mut rng)?;
            collapsed += s.nc.collapsed_at.is_some() as usize;
            alive_cost += alive_smc_filter(&sv, &theta, &y, &k, 30, Propagation::Bootstrap, &opts, &mut rng)?.cost;
        }
        println!(
            "eps {eps}: standard collapsed {collapsed}/{runs}; alive mean simulations {} (standard {})",
            alive_cost / runs as u64,
            30 * y.len()
        );
    }

    let k = AbcKernel::new(0.5, 1)?;
    let r = alive_smc_filter(&sv, &theta, &y, &k, 30, Propagation::Bootstrap, &opts, &mut rng)?;
    println!("alive ln p^eps(y) = {:.3}", r.nc.log_value);
    write_filter_csv(&r.history, std::io::stdout().lock())?;
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
