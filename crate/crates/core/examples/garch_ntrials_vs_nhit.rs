//! GARCH(1,1) with stable innovations on synthetic data under a noisy ABC
//! target: N trials per datum against simulating until N hits. The second
//! kernel spends its simulations where hits are rare.

use std::time::Instant;

use tsabc::models::Move;
use tsabc::prelude::*;

fn run() -> tsabc::Result<()> {
    let model = GarchStable::reference();
    let truth = [0.5, 0.2, 0.001, 0.6];
    let mut rng = RngStream::new(32, 0);
    let (y, _) = DatumModel::simulate(&model, &truth, 100, &mut rng)?;
    let eps = 0.5;

    let prop = Proposal::new(vec![Move::LogRandomWalk { scale: 0.1 }; 4]);
    let mut settings = ChainSettings::new(2_000);
    // prior draws make the volatility recursion explode, so start at a sane point
    settings.init = Init::Fixed(truth.to_vec());
    let n = 20;

    let t = Instant::now();
    let (_, a) = run_chain_noisy(&model, &y, eps, &NTrials { n }, &prop, &settings, &mut RngStream::new(12, 0))?;
    let ta = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let (_, b) = run_chain_noisy(&model, &y, eps, &NHit::new(n), &prop, &settings, &mut RngStream::new(12, 1))?;
    let tb = t.elapsed().as_secs_f64();

    for (name, trace, secs) in [("ntrials", &a, ta), ("nhit", &b, tb)] {
        let s = summarize(&trace.burn_in(500))?;
        print!("{name:<8} acceptance {:.3} {:.2}s ", s.acceptance_rate, secs);
        for p in &s.params {
            print!(" {}={:.3}", p.name, p.mean);
        }
        println!();
    }
    let sum_m = &b.extras[0].values;
    println!("nhit: mean total trials per iteration {:.0}", sum_m.iter().sum::<f64>() / sum_m.len() as f64);
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
