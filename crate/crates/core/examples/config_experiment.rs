//! Drive a full experiment from a configuration file, as the `tsabc` binary
//! does, and list the artifacts it wrote.

use tsabc::config::parse_config;
use tsabc::experiment::run_experiment_chains;

fn run() -> tsabc::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/normal_means.toml").into());
    let mut cfg = parse_config(&std::fs::read_to_string(&path)?)?;
    cfg.output.dir = std::env::temp_dir().join("tsabc-config-example");
    let art = run_experiment_chains(&cfg, 2)?;
    for f in &art.files {
        println!("{}", f.display());
    }
    for run in &art.summary.runs {
        if let Some(t) = &run.trace {
            println!("run {} acceptance {:.3} mean {:.4}", run.run, t.acceptance_rate, t.params[0].mean);
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
