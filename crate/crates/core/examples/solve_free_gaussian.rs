//! Pseudospectral solve of the free equation against the closed form,
//! followed by the solver validation suite.
//!
//!     cargo run --release --example solve_free_gaussian

use vwlab::grid_field::{Field, Grid};
use vwlab::pde_solver::{
    free_gaussian, solve, validation_suite, CauchyProblem, RecordSpec, ValidationSettings,
};

fn main() -> vwlab::Result<()> {
    let grid = Grid::default();
    let g = Field::from_real_fn(grid, |x| (-x * x / 2.0).exp());
    let record = RecordSpec {
        t_nodes: vec![0.25],
        norms: vec![(0.0, 0.0), (1.0, 1.0)],
    };
    let report = solve(&CauchyProblem::free(g, 0.5).with_record(record))?;
    let u = report.final_state().expect("completed");
    let err = (0..grid.points)
        .map(|i| (u.values[i] - free_gaussian(0.5, grid.node(i))).norm())
        .fold(0.0, f64::max);
    println!("{} steps, max error vs closed form {err:.3e}", report.steps);
    for n in &report.norms {
        println!(
            "  t={:.2} ||u||_H^({},{}) = {:.8}",
            n.t, n.m, n.weight, n.value
        );
    }

    let v = validation_suite(&ValidationSettings::default())?;
    println!(
        "temporal order {:.3} from errors {}; manufactured {:.2e} / {:.2e}",
        v.temporal_order,
        sci(&v.order_errors),
        v.manufactured_free,
        v.manufactured_coefficients
    );
    Ok(())
}

fn sci(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", s.join(", "))
}
