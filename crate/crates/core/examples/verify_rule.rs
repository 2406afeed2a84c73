//! Loads a rule file, recomputes its moment residual and lists any broken
//! invariant. Without an argument it checks a tensor rule and a tampered
//! copy of it.
//!
//! ```text
//! cargo run --example verify_rule -- [path-or-cache-key] [cache-dir]
//! ```

use std::path::PathBuf;

use dquad::dqgen::{parse_rule, save_rule, write_rule, RuleCache};
use dquad::multiindex::tensor_rule;
use dquad::orthopoly::WeightFamily;

fn report(path: &std::path::Path) -> dquad::Result<()> {
    let rule = parse_rule(path)?;
    println!("{} from {}", rule.cache_key(), path.display());
    println!("  stored residual {:.3e}, recomputed {:.3e}", rule.residual(), rule.recompute_residual()?);
    let errors = rule.moment_errors()?;
    if let Some((alpha, e)) = errors.iter().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())) {
        println!("  worst moment {alpha}: {e:+.3e}");
    }
    let violations = rule.invariant_violations();
    if violations.is_empty() {
        println!("  OK");
    }
    for v in violations {
        println!("  FAIL {v}");
    }
    Ok(())
}

fn main() -> dquad::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let Some(spec) = args.first() {
        let cache = RuleCache::resolve(args.get(1).map(PathBuf::from).as_deref());
        return report(&cache.locate(spec)?);
    }
    let dir = std::env::temp_dir().join("dquad-verify-example");
    std::fs::create_dir_all(&dir)?;
    let rule = tensor_rule(WeightFamily::StandardNormal, 3, 4)?;
    let good = dir.join("tensor.rule");
    save_rule(&rule, &good)?;
    report(&good)?;

    // flip the sign of the last weight
    let text = write_rule(&rule);
    let (head, last) = text.trim_end().rsplit_once(' ').expect("weight column");
    let bad = dir.join("tampered.rule");
    std::fs::write(&bad, format!("{head} -{last}\n"))?;
    report(&bad)
}
