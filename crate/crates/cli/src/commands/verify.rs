use minent_core::exec;
use minent_core::verify::run_all;

use crate::config::{CommonOpts, RunConfig};
use crate::CliError;

pub fn run(opts: &CommonOpts) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(opts)?;
    if cfg.trials < 1000 {
        return Err(CliError::Config(format!(
            "config field `trials`: verify needs at least 1000 trials, got {}",
            cfg.trials
        )));
    }
    print!("{}", cfg.echo("verify"));
    let results = exec::with_workers(cfg.workers, || run_all(cfg.trials, cfg.seed));
    let mut failures = 0usize;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status} {:<45} {}", r.name, r.detail);
        if !r.passed {
            failures += 1;
        }
    }
    println!(
        "verify: {}/{} checks passed",
        results.len() - failures,
        results.len()
    );
    if failures > 0 {
        return Err(CliError::Verification(format!(
            "{failures} invariant check(s) failed"
        )));
    }
    Ok(())
}
