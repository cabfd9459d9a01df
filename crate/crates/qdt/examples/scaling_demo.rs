//! Minimal end-to-end run: build a rank-deficient binary detector, sweep the
//! two-step adaptive protocol over three shot budgets, and print the fitted
//! per-element infidelity slopes (expected near -1).
//!
//! ```sh
//! cargo run --release -p qdt --example scaling_demo
//! ```

use qdt::{
    build_detector, scaling_experiment, sic_states_d4, DetectorSpec, Protocol, Rotation,
    Step2Family,
};

fn main() -> qdt::Result<()> {
    let truth = build_detector(&DetectorSpec::BinaryMu {
        mu: 1.0,
        rotation: Rotation::Haar { seed: 2025 },
    })?;
    let protocol = Protocol::TwoStep {
        step1_set: sic_states_d4(),
        family: Step2Family::Gpb,
    };
    let record = scaling_experiment(&truth, &protocol, &[1_000, 10_000, 100_000], 50, 7)?;
    for e in &record.elements {
        println!(
            "element {}: slope {:?}, mean infidelity {:.3e} at N = 100000",
            e.element,
            e.slope,
            e.mean_infidelity.last().unwrap()
        );
    }
    Ok(())
}
