//! Simulates a mixed logit panel and fits it with QMC draws or a designed
//! quadrature rule.
//!
//! ```text
//! cargo run --release --example fit_mixed_logit -- [dim] [diagonal|full] [halton|halton-scrambled|mlhs|dq] [draws] [order] [individuals]
//! ```

use std::path::PathBuf;

use dquad::dqgen::{DqOptions, DqOutcome, RuleCache};
use dquad::mmnl::{fit, CovarianceStructure, FitOptions, MmnlParams, SimulationNodes};
use dquad::orthopoly::WeightFamily;
use dquad::qmc::{draws, Generator};
use dquad::simstudy::{generate_dataset, parameter_ratios, DgpSpec};

fn main() -> dquad::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let dim: usize = arg(0, "3").parse().expect("dimension");
    let cov = CovarianceStructure::parse(&arg(1, "full")).expect("diagonal or full");
    let method = arg(2, "halton");
    let n: usize = arg(3, "100").parse().expect("draws");
    let order: u32 = arg(4, "6").parse().expect("order");
    let individuals: usize = arg(5, "500").parse().expect("individuals");

    let spec = DgpSpec::standard(dim, cov)?.with_individuals(individuals);
    let data = generate_dataset(&spec, 2024)?;
    let nodes = if method == "dq" {
        let cache = RuleCache::new(PathBuf::from("rules"));
        match cache.get_or_generate(WeightFamily::StandardNormal, dim, order, n, &DqOptions::default())? {
            DqOutcome::Converged(rule) => SimulationNodes::Shared(rule),
            DqOutcome::Infeasible(report) => {
                eprintln!("{report}");
                std::process::exit(3);
            }
        }
    } else {
        let generator = Generator::parse(&method).expect("unknown method");
        SimulationNodes::from_draws(&draws(generator, dim, data.len(), n, 99)?)?
    };

    let start = MmnlParams::default_start(data.fixed_dim(), data.random_dim());
    let res = fit(&data, &nodes, &start, &FitOptions::default().with_structure(cov))?;
    println!(
        "loglik {:.4}  iterations {}  evaluations {}  {}  {:.2}s",
        res.loglik,
        res.iterations,
        res.loglik_evaluations,
        res.termination.name(),
        res.wall_time
    );
    let names = MmnlParams::names(data.fixed_dim(), data.random_dim(), cov);
    let est = res.params.pack(cov);
    let truth = spec.true_params()?.pack(cov);
    let se = &res.standard_errors;
    for (k, name) in names.iter().enumerate() {
        let se = se.get(k).filter(|s| s.is_finite()).map_or(String::new(), |s| format!("({s:.4})"));
        println!("{name:>8} {:>9.4} {se:>10}  true {:>7.4}", est[k], truth[k]);
    }
    let ratios = parameter_ratios(&res.params)?;
    println!("ratios {:.3?}", ratios);
    Ok(())
}
