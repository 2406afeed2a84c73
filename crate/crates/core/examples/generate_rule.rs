//! Generates a designed quadrature rule and stores it in a rule cache.
//!
//! ```text
//! cargo run --release --example generate_rule -- normal 5 6 100 [seed] [cache-dir]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use dquad::dqgen::{DqOptions, DqOutcome, RuleCache};
use dquad::orthopoly::WeightFamily;

fn main() -> dquad::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let family: WeightFamily = arg(0, "normal").parse()?;
    let dim: usize = arg(1, "3").parse().expect("dimension");
    let order: u32 = arg(2, "6").parse().expect("order");
    let nodes: usize = arg(3, "30").parse().expect("node count");
    let seed: u64 = arg(4, "0").parse().expect("seed");
    let cache = RuleCache::new(PathBuf::from(arg(5, "rules")));

    let opts = DqOptions::default().with_seed(seed);
    let start = Instant::now();
    match cache.get_or_generate(family, dim, order, nodes, &opts)? {
        DqOutcome::Converged(rule) => {
            let mass: f64 = rule.weights().iter().sum();
            let min_w = rule.weights().min();
            println!(
                "{}: {} nodes, residual {:.3e}, mass {mass:.15}, min weight {min_w:.3e}, {:.1?}",
                rule.cache_key(),
                rule.len(),
                rule.residual(),
                start.elapsed()
            );
            println!("stored in {}", cache.path_for(&rule.cache_key()).display());
        }
        DqOutcome::Infeasible(report) => println!("{report} ({:.1?})", start.elapsed()),
    }
    Ok(())
}
