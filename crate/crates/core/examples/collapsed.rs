//! Collapsed samplers keep the noise variables in the state. For normal means
//! the collapsed chain agrees with the marginal one; for stochastic volatility
//! the collapsed PMMH needs only noise samplers, never a transition density.

use tsabc::models::Move;
use tsabc::prelude::*;

fn run() -> tsabc::Result<()> {
    let model = NormalLocation::default();
    let mut rng = RngStream::new(5, 0);
    let y = simulate_iid(&model, &[0.7], 30, &mut rng)?;
    let target = AbcTarget::new(&y, 1.0)?;
    let prop = Proposal::random_walk(&[0.3]);
    let settings = ChainSettings::new(20_000);
    for (name, k) in [
        ("random-walk phi", Collapsed::default()),
        (
            "independent phi",
            Collapsed {
                noise_move: NoiseMove::Independent,
            },
        ),
    ] {
        let t = run_chain(&model, &target, &k, &prop, &settings, &mut rng)?;
        println!("collapsed ({name}) mean {:.4}", summarize(&t.burn_in(1000))?.params[0].mean);
    }
    let t = run_chain(&model, &target, &Marginal::default(), &prop, &settings, &mut rng)?;
    println!("marginal                    mean {:.4}", summarize(&t.burn_in(1000))?.params[0].mean);

    let sv = StochasticVolatility::reference(1.75)?;
    let theta = [0.5, 0.05, 0.9];
    let (ys, _) = HiddenMarkovModel::simulate(&sv, &theta, 20, &mut RngStream::new(6, 0))?;
    let k = AbcKernel::new(1.0, 1)?;
    let mut ps = PmmhSettings::new(300, ys.len());
    ps.n_particles = 100;
    ps.init = Init::Fixed(theta.to_vec());
    let prop = Proposal::new(vec![
        Move::RandomWalk { scale: 0.05 },
        Move::LogRandomWalk { scale: 0.05 },
        Move::LogRandomWalk { scale: 0.05 },
    ]);
    let tr = run_collapsed_pmmh(&sv, &ys, &k, &prop, &ps, 1.0, &mut RngStream::new(7, 0))?;
    println!("collapsed PMMH acceptance {:.3}", tr.acceptance_rate());
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
