//! Runs the configuration-driven pipeline in memory, as the command line does.

use funquant::config::ExperimentConfig;
use funquant::runner::{run_quantize, RunOptions};

const CONFIG: &str = r#"
[process]
kind = "ou"
c = 1.0

[space]
m = 128
t_end = 4.0
measure = "exponential"
b = 1.0

[quantizer]
n = 1

[sample]
n_paths = 20000
seed = 42
"#;

fn main() {
    let cfg = ExperimentConfig::from_toml_str(CONFIG).expect("valid config");
    let outcome = run_quantize(&cfg, &RunOptions { dry_run: true, ..RunOptions::default() }).expect("run succeeds");
    println!("config hash {}", cfg.hash());
    println!("{:#}", outcome.summary);
}
