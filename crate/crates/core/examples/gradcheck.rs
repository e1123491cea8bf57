//! Finite-difference check of every differentiable component.

use dmtn::harness::{check_component, GradCheckTarget, GRADCHECK_TOLERANCE};

fn main() -> dmtn::Result<()> {
    let mut worst: f64 = 0.0;
    for target in GradCheckTarget::all() {
        let r = check_component(target, 7)?;
        let (name, index) = r.worst.clone().unwrap_or_default();
        println!(
            "{:<24} {:>5} entries  max rel err {:.2e}  (at {name}[{index}])",
            target.to_string(),
            r.entries_checked,
            r.max_relative_error
        );
        worst = worst.max(r.max_relative_error);
    }
    println!("worst {worst:.2e}, tolerance {GRADCHECK_TOLERANCE:.0e}");
    Ok(())
}
