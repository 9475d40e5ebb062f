//! PMMH on the stable stochastic volatility model with both filters. At a
//! tolerance where the standard filter collapses the standard chain hardly
//! moves; the alive chain mixes.

use tsabc::models::Move;
use tsabc::prelude::*;

fn run() -> tsabc::Result<()> {
    let sv = StochasticVolatility::reference(1.2)?;
    let theta = [0.5, 0.05, 0.9];
    let (y, _) = HiddenMarkovModel::simulate(&sv, &theta, 50, &mut RngStream::new(42, 0))?;
    let k = AbcKernel::new(0.5, 1)?;
    let prop = Proposal::new(vec![
        Move::RandomWalk { scale: 0.05 },
        Move::LogRandomWalk { scale: 0.05 },
        Move::LogRandomWalk { scale: 0.05 },
    ]);
    let mut settings = PmmhSettings::new(500, y.len());
    settings.n_particles = 30;
    settings.init = Init::Fixed(theta.to_vec());
    settings.init_attempts = 50;

    let alive = run_pmmh(&sv, &y, &k, FilterKind::Alive, &prop, &settings, &mut RngStream::new(1, 0))?;
    let s = summarize(&alive)?;
    print!("alive    acceptance {:.3}", s.acceptance_rate);
    for p in &s.params {
        print!("  {} {:.3} [{:.3}, {:.3}]", p.name, p.mean, p.q05, p.q95);
    }
    println!();

    match run_pmmh(&sv, &y, &k, FilterKind::Standard, &prop, &settings, &mut RngStream::new(1, 1)) {
        Ok(t) => println!("standard acceptance {:.3}", t.acceptance_rate()),
        Err(e) => println!("standard could not start: {e}"),
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
