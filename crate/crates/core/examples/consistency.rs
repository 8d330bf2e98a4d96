//! Regularized solves of a smooth problem converge to the unregularized one,
//! for both mollifier pairs.
//!
//!     cargo run --release --example consistency

use vwlab::vws_harness::{run_consistency, ConsistencySettings, ProblemTemplate};

fn main() -> vwlab::Result<()> {
    let r = run_consistency(
        &ProblemTemplate::bundled("regular")?,
        &ConsistencySettings::default(),
    )?;
    println!(
        "reference ||u(T)||_H^(1,1) = {:.6}, dt = {}",
        r.reference_norm, r.dt
    );
    for c in &r.curves {
        println!("{:?}: {} monotone {}", c.pair, sci(&c.errors), c.monotone);
    }
    println!("limit gap {:.3e}, pass {}", r.limit_gap, r.pass);
    Ok(())
}

fn sci(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", s.join(", "))
}
