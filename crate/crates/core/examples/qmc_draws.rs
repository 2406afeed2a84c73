//! Randomized Halton, scrambled Halton and MLHS draws: the first points of
//! one individual, their 1D star discrepancy and the normal transform.
//!
//! ```text
//! cargo run --example qmc_draws -- [draws] [seed]
//! ```

use dquad::qmc::{draws, inverse_normal_cdf, star_discrepancy_1d, to_normal_rule, Generator};

fn main() -> dquad::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let r: usize = args.first().map_or(200, |s| s.parse().expect("draws"));
    let seed: u64 = args.get(1).map_or(1, |s| s.parse().expect("seed"));
    let (dim, individuals) = (3, 2);
    for g in [Generator::HaltonRandomized, Generator::HaltonScrambled, Generator::Mlhs] {
        let dm = draws(g, dim, individuals, r, seed)?;
        println!("{g}:");
        for k in 0..3 {
            println!("  point {k}: {:.4?}", dm.point(0, k));
        }
        for j in 0..dim {
            let d = star_discrepancy_1d(&dm.coordinate(0, j));
            println!("  dimension {j}: star discrepancy {d:.4}");
        }
        let rule = to_normal_rule(&dm, 0)?;
        let mean: Vec<f64> = (0..dim).map(|j| rule.integrate(|x| x[j])).collect();
        let var: Vec<f64> = (0..dim).map(|j| rule.integrate(|x| x[j] * x[j])).collect();
        println!("  normal transform: mean {mean:+.4?}, second moment {var:.4?}");
    }
    println!("inverse normal at 0.975: {:.15}", inverse_normal_cdf(0.975));
    Ok(())
}
