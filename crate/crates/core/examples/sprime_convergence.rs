//! Pairings <u_eps, h> converge to <u, h> over the versioned test family.
//! Also shows the regularization error order of both pairs.
//!
//!     cargo run --release --example sprime_convergence

use vwlab::cli::{order_table, pairing_table, OrderCheck, PairingCheck};
use vwlab::dist_catalog::{CatalogSmooth, DistributionExpr};
use vwlab::mollifier::MollifierPair;
use vwlab::vws_harness::default_eps_grid;

fn main() -> vwlab::Result<()> {
    let eps = default_eps_grid();
    let inputs = vec![
        DistributionExpr::delta(0.0),
        DistributionExpr::delta_derivative(0.3, 1),
        DistributionExpr::heaviside(0.0),
        DistributionExpr::polynomial(&[1.0, 1.0, -0.5]),
        DistributionExpr::catalog(CatalogSmooth::sech(0.0, 1.0)),
    ];
    for pair in [MollifierPair::gaussian(), MollifierPair::flat()] {
        let t = pairing_table(&inputs, &pair, &eps, &PairingCheck::default())?;
        println!(
            "{:?} pair ({}): monotone {}, worst final gap {:.3e}",
            pair.name, t.family_version, t.all_monotone, t.worst_final
        );
        // delta against the first family member
        println!("  delta vs h0: {}", sci(&t.gaps[0][0]));

        for row in order_table(&OrderCheck::default(), &pair, &eps, &eps)? {
            println!(
                "  sup <x>^{} |d^{} (u_eps - u)| decays like eps^{:.2}",
                row.weight, row.beta, row.decay
            );
        }
    }
    Ok(())
}

fn sci(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", s.join(", "))
}
