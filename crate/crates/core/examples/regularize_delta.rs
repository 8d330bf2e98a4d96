//! Regularize the Dirac delta with both mollifier pairs and print the L^2
//! growth in 1/eps together with the iterated-log widths.
//!
//!     cargo run --example regularize_delta

use vwlab::dist_catalog::DistributionExpr;
use vwlab::mollifier::{l2_norm_quad, regularize, EpsilonScale, MollifierPair};
use vwlab::vws_harness::{default_eps_grid, loglog_fit};

fn main() -> vwlab::Result<()> {
    let eps = default_eps_grid();
    let delta = DistributionExpr::delta(0.0);
    let log_scale = EpsilonScale::IteratedLog { depth: 1 };

    println!(
        "{:>10} {:>12} {:>14} {:>14}",
        "eps", "omega", "gaussian", "flat"
    );
    let mut norms = Vec::new();
    for &e in &eps {
        let g = l2_norm_quad(&regularize(
            &delta,
            &MollifierPair::gaussian(),
            &EpsilonScale::Identity,
            e,
        )?)?;
        let f = l2_norm_quad(&regularize(
            &delta,
            &MollifierPair::flat(),
            &EpsilonScale::Identity,
            e,
        )?)?;
        println!(
            "{e:>10.6} {:>12.6} {g:>14.6} {f:>14.6}",
            log_scale.omega(e)?
        );
        norms.push(g);
    }
    let (slope, _, r2) = loglog_fit(&eps, &norms)?;
    println!("gaussian pair: ||delta_eps||_L2 ~ eps^-{slope:.4} (r2 {r2:.6})");

    // pointwise values of the regularized delta near the origin
    let d = regularize(
        &delta,
        &MollifierPair::gaussian(),
        &EpsilonScale::Identity,
        0.125,
    )?;
    for x in [-0.25, 0.0, 0.25] {
        println!("delta_eps({x:+.2}) = {:.6}", d.value(x)?.re);
    }
    Ok(())
}
