//! Runs every check suite on the built-in instances and prints one line per
//! check, merged by name.

use tasep_core::fredholm::WindowPlan;
use tasep_core::verify::{default_instances, merge_by_name, run_suite, Suite};

fn main() -> tasep_core::Result<()> {
    let reports = run_suite(Suite::All, &default_instances(), &WindowPlan::default(), 2024)?;
    let merged = merge_by_name(reports);
    for r in &merged {
        println!("{r}");
    }
    let failed = merged.iter().filter(|r| !r.passed).count();
    println!("{} checks, {failed} failing", merged.len());
    Ok(())
}
