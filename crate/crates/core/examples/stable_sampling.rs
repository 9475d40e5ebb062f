//! Draw alpha-stable variates and compare their quantiles with the two closed
//! forms: alpha = 2 is N(0, 2) and alpha = 1, beta = 0 is the standard Cauchy.

use tsabc::diagnostics::quantile_sorted;
use tsabc::special::norm_cdf;
use tsabc::stochastics::{sample_stable, RngStream, StableParams};

fn sorted_draws(p: &StableParams, n: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..n).map(|_| sample_stable(rng, p)).collect();
    xs.sort_by(f64::total_cmp);
    xs
}

fn run() -> tsabc::Result<()> {
    let mut rng = RngStream::new(2015, 0);
    let n = 50_000;

    let gauss = sorted_draws(&StableParams::new(2.0, 0.0, 1.0, 0.0)?, n, &mut rng);
    println!("alpha = 2 against N(0, 2):");
    for q in [0.05, 0.25, 0.5, 0.75, 0.95] {
        let x = quantile_sorted(&gauss, q);
        println!("  q{:<4} {:>8.4}  cdf {:.4}", q, x, norm_cdf(x / 2f64.sqrt()));
    }

    let cauchy = sorted_draws(&StableParams::new(1.0, 0.0, 1.0, 0.0)?, n, &mut rng);
    let iqr = quantile_sorted(&cauchy, 0.75) - quantile_sorted(&cauchy, 0.25);
    println!("alpha = 1: median {:.4} (0), IQR {:.4} (2)", quantile_sorted(&cauchy, 0.5), iqr);

    // the heavier the tail, the further out the 99th percentile
    for alpha in [1.9, 1.5, 1.2] {
        let xs = sorted_draws(&StableParams::new(alpha, 1.0, 1.0, 0.0)?, n, &mut rng);
        println!(
            "alpha = {alpha}, beta = 1: q01 {:>9.3}  q50 {:>7.3}  q99 {:>9.3}",
            quantile_sorted(&xs, 0.01),
            quantile_sorted(&xs, 0.5),
            quantile_sorted(&xs, 0.99)
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
