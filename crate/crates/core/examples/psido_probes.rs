//! Quantization probes: boundedness ratio, composition remainder and the
//! lower bound of Re <p(x,D)u, u>, each at N and 2N.
//!
//!     cargo run --release --example psido_probes

use vwlab::dist_catalog::CatalogSmooth;
use vwlab::grid_field::Grid;
use vwlab::psido::{
    composition_residual, cv_bound_probe, garding_probe, symbol_seminorms, SymbolSpec, XiFactor,
};
use vwlab::smooth::SmoothFunction;

fn main() -> vwlab::Result<()> {
    let grid = Grid::new(20.0, 512)?;
    let sech = || SmoothFunction::Catalog(CatalogSmooth::sech(0.0, 1.0));
    let a = SymbolSpec::multiplication(sech());

    let r = cv_bound_probe(&SymbolSpec::bessel(1.0), 0.0, grid)?;
    println!("<xi>: ratio {} / {}", r.value, r.refined);
    let r = cv_bound_probe(
        &SymbolSpec::term(sech(), XiFactor::bracket(1.0), 1.0),
        0.0,
        grid,
    )?;
    println!("sech(x)<xi>: ratio {:.6} / {:.6}", r.value, r.refined);

    for n in 1..=3 {
        let r = composition_residual(&SymbolSpec::bessel(1.0), &a, n, grid)?;
        println!("<xi> o sech, N={n}: remainder {:.3e}", r.value);
    }
    let r = composition_residual(&SymbolSpec::xi_power(2), &a, 3, grid)?;
    println!("xi^2 o sech, N=3: remainder {:.3e}", r.value);

    let g = garding_probe(
        &SymbolSpec::term(sech().times(sech()), XiFactor::abs(), 1.0),
        grid,
    )?;
    println!(
        "|xi| sech^2: min Re<pu,u>/|u|^2 {:.6} / {:.6}",
        g.value, g.refined
    );
    println!(
        "seminorms of <xi>: {:.4?}",
        symbol_seminorms(&SymbolSpec::bessel(1.0), 4, grid)?
    );
    Ok(())
}
