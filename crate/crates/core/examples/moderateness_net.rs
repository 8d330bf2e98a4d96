//! Epsilon-net for a delta potential: norm table, power-law fits and the
//! moderateness verdict per (m, M).
//!
//!     cargo run --release --example moderateness_net [template]

use vwlab::vws_harness::{
    run_existence, NetSettings, ProblemTemplate, RegularizationSpec, VerdictThresholds,
};

fn main() -> vwlab::Result<()> {
    let name = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "delta_potential".into());
    let template = ProblemTemplate::bundled(&name)?;
    let r = run_existence(
        &template,
        &RegularizationSpec::default(),
        &NetSettings::default(),
        &VerdictThresholds::default(),
    )?;
    if let Some(net) = &r.net {
        println!("eps   {:.4?}", net.eps);
        println!("omega {:.4?}", net.omegas);
        println!(
            "||u_eps(T)||_L2 {:.6?}",
            net.norms((0.0, 0.0), template.t_final)
        );
    }
    for f in &r.fits {
        println!(
            "(m={}, M={}) slope {:+.3} r2 {:.3} {}",
            f.m,
            f.weight,
            f.fit.slope,
            f.fit.r_squared,
            f.fit.verdict.label()
        );
    }
    println!(
        "{name}: {}",
        if r.pass { "moderate" } else { "not moderate" }
    );
    Ok(())
}
