//! Builds a run from TOML text, as the `sde-descent` binary does, and writes
//! the solve artifacts into a temporary directory.

use sde_descent::cli::{cmd_solve, RunConfig};

const CONFIG: &str = r#"
[problem]
horizon = 2.0
alpha = 0.5

[grid]
n_x = 32
n_eta = 4

[algorithm]
epsilon = 0.01

[output]
snapshot_times = [0.0, 1.0, 2.0]
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::parse(CONFIG, "inline")?;
    let mut plan = cfg.plan(None)?;
    plan.output_dir = std::env::temp_dir().join("sde-descent-run-config");
    std::fs::create_dir_all(&plan.output_dir)?;
    let code = cmd_solve(&plan, false)?;
    println!("exit code {code}");
    let mut names: Vec<String> = std::fs::read_dir(&plan.output_dir)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()?;
    names.sort();
    for name in names {
        println!("  {name}");
    }
    println!("\nresolved config:\n{}", cfg.to_toml());
    Ok(())
}
