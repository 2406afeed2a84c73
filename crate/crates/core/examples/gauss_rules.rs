//! Gauss rules for both weight families and their polynomial exactness.
//!
//! ```text
//! cargo run --example gauss_rules -- [max-n]
//! ```

use dquad::orthopoly::{gauss_rule_1d, recurrence_coeffs, WeightFamily};

fn main() -> dquad::Result<()> {
    let max_n: usize = std::env::args().nth(1).map_or(5, |s| s.parse().expect("max n"));
    for family in [WeightFamily::StandardNormal, WeightFamily::UniformUnit] {
        let rc = recurrence_coeffs(family, 3);
        println!("{family}: a = {:?}, b = {:?}", rc.a, rc.b);
        for n in 1..=max_n {
            let rule = gauss_rule_1d(family, n)?;
            // E[x^k] through the rule against the closed form
            let worst = (0..=rule.order_exact)
                .map(|k| {
                    let q: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
                    let exact = family.raw_moment(k as u32);
                    (q - exact).abs() / exact.abs().max(1.0)
                })
                .fold(0.0, f64::max);
            println!("  n={n:2} nodes {:.6?}", rule.nodes);
            println!("       weights {:.6?}  worst relative moment error up to degree {}: {worst:.1e}", rule.weights, rule.order_exact);
        }
    }
    Ok(())
}
