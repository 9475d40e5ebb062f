//! Normal means with n = 100 and eps = 10: every i.i.d. kernel targets the
//! same ABC posterior. Standard and noisy posteriors are summarised and their
//! kernel density estimates written to `normal_means_kde.csv`.

use std::io::Write;

use tsabc::diagnostics::{kde_grid, silverman_bandwidth};
use tsabc::prelude::*;

fn run() -> tsabc::Result<()> {
    let model = NormalLocation::default();
    let mut rng = RngStream::new(1, 0);
    let y = simulate_iid(&model, &[0.0], 100, &mut rng)?;
    let eps = 10.0;
    let target = AbcTarget::new(&y, eps)?;
    let prop = Proposal::random_walk(&[1.0]);
    let settings = ChainSettings::new(20_000);

    let kernels: Vec<(&str, Box<dyn MhKernel<NormalLocation>>)> = vec![
        ("marginal", Box::new(Marginal::default())),
        ("naive", Box::new(Naive { early_reject: true })),
        ("ntrials", Box::new(NTrials { n: 100 })),
        ("nhit", Box::new(NHit::new(10))),
        ("collapsed", Box::new(Collapsed::default())),
    ];
    for (i, (name, k)) in kernels.iter().enumerate() {
        let trace = run_chain(&model, &target, k.as_ref(), &prop, &settings, &mut RngStream::new(2, i as u64))?;
        let s = summarize(&trace.burn_in(1000))?;
        let p = &s.params[0];
        println!(
            "{name:<10} mean {:>7.4} sd {:.4} ess {:>7.0} acceptance {:.3}",
            p.mean,
            p.sd,
            p.ess.unwrap_or(f64::NAN),
            s.acceptance_rate
        );
    }

    let standard = run_chain(&model, &target, &NTrials { n: 50 }, &prop, &settings, &mut RngStream::new(3, 0))?;
    let (_, noisy) = run_chain_noisy(&model, &y, eps, &NTrials { n: 50 }, &prop, &settings, &mut RngStream::new(3, 1))?;
    let mut out = std::io::BufWriter::new(std::fs::File::create("normal_means_kde.csv")?);
    writeln!(out, "target,theta,density")?;
    for (label, trace) in [("standard", &standard), ("noisy", &noisy)] {
        let xs = trace.burn_in(1000).column(0);
        let h = silverman_bandwidth(&xs)?;
        let d = kde(&xs, &kde_grid(&xs, h, 200), Bandwidth::Fixed(h))?;
        for (x, f) in d.grid.iter().zip(&d.density) {
            writeln!(out, "{label},{x:.6},{f:.6}")?;
        }
    }
    println!("wrote normal_means_kde.csv");
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
