//! Perturb a delta-potential problem by eps^q bumps and fit the decay of the
//! solution differences. The Duhamel oracle solves the difference equation
//! directly at the smallest eps.
//!
//!     cargo run --release --example uniqueness

use vwlab::vws_harness::{
    run_uniqueness, NetSettings, Perturbation, PerturbationTarget, ProblemTemplate,
    RegularizationSpec, VerdictThresholds,
};

fn main() -> vwlab::Result<()> {
    let template = ProblemTemplate::bundled("delta_potential")?;
    let settings = NetSettings {
        ladder: vec![(0.0, 0.0), (1.0, 1.0)],
        ..NetSettings::default()
    };
    for (q, targets) in [
        (0.0, vec![PerturbationTarget::G]),
        (2.0, vec![PerturbationTarget::G]),
        (4.0, vec![PerturbationTarget::C0, PerturbationTarget::G]),
    ] {
        let p = Perturbation::new(q, &targets);
        let r = run_uniqueness(
            &template,
            &RegularizationSpec::default(),
            &p,
            &settings,
            &VerdictThresholds::default(),
        )?;
        println!("q = {q} on {targets:?}: {}", r.verdict.label());
        for f in &r.fits {
            println!("  (m={}, M={}) slope {:+.3}", f.m, f.weight, f.fit.slope);
        }
        if let Some(o) = &r.oracle {
            println!(
                "  oracle at eps {}: relative mismatch {:.2e}",
                o.eps, o.relative_mismatch
            );
        }
    }
    Ok(())
}
