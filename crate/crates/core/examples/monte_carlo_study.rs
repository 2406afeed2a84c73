//! Runs a small Monte Carlo study comparing Halton draws with designed
//! quadrature and prints the report table. Stored fits are reused, so a
//! second run finishes at once.
//!
//! ```text
//! cargo run --release --example monte_carlo_study -- [out-dir] [config.toml]
//! ```

use std::path::PathBuf;

use dquad::dqgen::RuleCache;
use dquad::simstudy::{run_study, StudyConfig};

const DEFAULT: &str = r#"
seed = 42
resamples = 3
individuals = 200
dims = [3]
covariances = ["diagonal", "full"]

[[methods]]
kind = "halton"
draws = [50, 100, 500]

[[methods]]
kind = "mlhs"
draws = [50, 100]

[[methods]]
kind = "dq"
orders = [6]
draws = [30, 50]
"#;

fn main() -> dquad::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = PathBuf::from(args.first().map_or("study-out", String::as_str));
    let config = match args.get(1) {
        Some(p) => StudyConfig::load(p.as_ref())?,
        None => StudyConfig::from_toml(DEFAULT)?,
    };
    let cache = RuleCache::resolve(None);
    let report = run_study(&config, &out, &cache, &|line| eprintln!("{line}"))?;
    print!("{}", report.to_tsv());
    print!("{}", report.timing_tsv());
    Ok(())
}
