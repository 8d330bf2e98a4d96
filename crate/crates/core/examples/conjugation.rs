//! Weight conjugation <x>^s S <x>^-s: coefficients and the operator identity.
//!
//!     cargo run --example conjugation

use vwlab::grid_field::{Field, Grid};
use vwlab::pde_solver::CoefficientSet;
use vwlab::psido::{conjugated_coefficients, conjugation_identity_error, conjugation_test_sets};

fn main() -> vwlab::Result<()> {
    let c = conjugated_coefficients(&CoefficientSet::zero(), 1);
    for x in [0.0, 1.0, 2.0] {
        println!(
            "s=1, c=0: c1'({x}) = {:.6}, c0'({x}) = {:.6}",
            c.c1.terms[0].value.value(x)?,
            c.c0.terms[0].value.value(x)?
        );
    }
    let grid = Grid::new(20.0, 1024)?;
    let v = Field::from_real_fn(grid, |x| (-x * x).exp());
    for (name, set) in conjugation_test_sets() {
        let errs = (0..=3)
            .map(|s| conjugation_identity_error(&set, s, 0.3, &v))
            .collect::<vwlab::Result<Vec<_>>>()?;
        println!("{name:>22}: {}", sci(&errs));
    }
    Ok(())
}

fn sci(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", s.join(", "))
}
