//! A time sweep driven by a JSON configuration, printed as CSV.

use tasep_core::run::{cmd_sweep, RunConfig};

fn main() -> tasep_core::Result<()> {
    let cfg = RunConfig::from_json(
        r#"{
            "model": "pushasep", "r": 1.0, "l": 0.5,
            "x0": [0, -1, -3], "n": [1, 3], "a": [0, -4],
            "t": [0.0, 0.5, 1.0, 1.5],
            "mc": {"samples": 50000, "seed": 3}
        }"#,
    )?;
    print!("{}", cmd_sweep(&cfg)?.to_csv());
    Ok(())
}
