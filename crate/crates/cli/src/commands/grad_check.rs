//! `grad-check`: finite-difference verification of all loss gradients;
//! exits nonzero unless the max relative error is under the tolerance.

use anyhow::Result;

use tutor_align_core::gradcheck::{run as run_suite, GradCheckConfig, GRAD_TOLERANCE};

use crate::{Globals, GradCheckArgs};

pub fn run(globals: &Globals, args: &GradCheckArgs) -> Result<()> {
    let config = globals.optional_config()?;
    let seed = globals
        .seed
        .or_else(|| config.as_ref().map(|c| c.seed))
        .unwrap_or_else(|| GradCheckConfig::default().seed);

    let cfg = GradCheckConfig {
        pair_trials: args.trials,
        chain_trials: (args.trials / 2).max(1),
        seed,
    };
    let report = run_suite(&cfg)?;
    for method in &report.methods {
        println!(
            "grad-check: {:<6} pair max rel err {:.3e}, chain max rel err {:.3e} ({} checks)",
            method.method.name(),
            method.pair_max_rel_err,
            method.chain_max_rel_err,
            method.checks
        );
    }
    println!(
        "grad-check: overall max relative error {:.3e} over {} checks (tolerance {GRAD_TOLERANCE:.0e})",
        report.max_rel_err, report.total_checks
    );
    if !report.passed() {
        anyhow::bail!(
            "gradient check failed: max relative error {:.3e} >= {GRAD_TOLERANCE:.0e}",
            report.max_rel_err
        );
    }
    Ok(())
}
