//! Runs an experiment config in-process and writes results, history and the
//! manifest, as the `fjsim run` command does.

use fjsim::harness::{run_config, ExperimentConfig, Overrides};

fn main() -> fjsim::Result<()> {
    let text = r#"{
        "experiment": "secrecy_vs_snr",
        "antennas": {"nt": 4, "nr": 2, "ne": 2},
        "snr_grid_db": [0, 5, 10, 15, 20],
        "scheme": "conventional_exhaustive",
        "mc_draws": 2000,
        "seed": 42
    }"#;
    let cfg = ExperimentConfig::parse(text)?;
    let out = std::env::temp_dir().join("fjsim-harness-example");
    let res = run_config(cfg, &out, &Overrides::default(), false)?;
    print!("{}", std::fs::read_to_string(out.join("results.csv"))?);
    for d in &res.manifest.outputs {
        println!("{} {}", d.sha256, d.file);
    }
    Ok(())
}
