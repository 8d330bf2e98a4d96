//! Uniform bounds when Im c1 decays like 1/<x>, and the regime flag when it
//! does not.
//!
//!     cargo run --release --example classical_regime

use vwlab::cli::regime_label;
use vwlab::mollifier::EpsilonScale;
use vwlab::vws_harness::{run_classical, ClassicalSettings, ProblemTemplate, RegularizationSpec};

fn main() -> vwlab::Result<()> {
    let reg = RegularizationSpec {
        scale: EpsilonScale::Identity,
        ..RegularizationSpec::default()
    };
    for (name, s) in [
        ("decaying_imaginary", 1.0),
        ("nondecaying_imaginary", 1.0),
        ("free", 0.0),
    ] {
        let cs = ClassicalSettings {
            s,
            ..ClassicalSettings::default()
        };
        let r = run_classical(&ProblemTemplate::bundled(name)?, &reg, &cs)?;
        println!("{name}: {} loss {:?}", regime_label(r.verdict), r.loss);
        println!("  spreads {:.4?}", r.spreads);
        println!("  {}", r.reason);
    }
    Ok(())
}
