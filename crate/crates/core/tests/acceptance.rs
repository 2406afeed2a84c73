//! Acceptance checks. Prints one PASS or FAIL line per criterion and exits
//! with status 1 if any criterion fails.
//!
//! Set `DQUAD_STRETCH=1` to also attempt the d=10, r=5, n=148 rule.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dquad::dqgen::{generate_dq, generate_dq_with, load_rule, DqOptions, DqOutcome, QuadratureRule, RuleCache};
use dquad::mmnl::{simulated_loglik, simulated_loglik_gradient, CovarianceStructure, MmnlParams, SimulationNodes};
use dquad::multiindex::{tensor_rule, total_order_set};
use dquad::orthopoly::{gauss_rule_1d, WeightFamily};
use dquad::qmc::{draws, Generator};
use dquad::simstudy::{generate_dataset, run_study, DgpSpec, MethodKind, ResampleStatus, StudyConfig, StudyReport};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use CovarianceStructure::{Diagonal, Full};
use WeightFamily::StandardNormal;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn fail(detail: impl Into<String>) -> Verdict {
    verdict(false, detail)
}

/// E[x^k] under the standard normal: (k-1)!! for even k.
fn normal_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        (1..k).step_by(2).map(f64::from).product()
    }
}

fn gaussian_exactness() -> Verdict {
    let mut worst = (0.0f64, 0, 0);
    for n in 1..=15usize {
        let rule = match gauss_rule_1d(StandardNormal, n) {
            Ok(r) => r,
            Err(e) => return fail(format!("n={n}: {e}")),
        };
        for k in 0..=(2 * n as u32 - 1) {
            let q: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
            let exact = normal_moment(k);
            let scale = if k % 2 == 0 { exact } else { normal_moment(k - 1) }.max(1.0);
            let err = (q - exact).abs() / scale;
            if err > worst.0 {
                worst = (err, n, k);
            }
        }
    }
    verdict(
        worst.0 <= 1e-10,
        format!("worst scaled moment error {:.2e} at n={} degree {}", worst.0, worst.1, worst.2),
    )
}

const FRONTIER: [(usize, u32, usize); 6] = [(3, 6, 30), (3, 7, 50), (5, 6, 100), (5, 7, 200), (10, 4, 100), (10, 5, 200)];

fn check_rule(rule: &QuadratureRule, n: usize) -> Result<f64, String> {
    let eps = rule.recompute_residual().map_err(|e| e.to_string())?;
    if rule.len() != n {
        return Err(format!("{} nodes instead of {n}", rule.len()));
    }
    if eps > 1e-8 {
        return Err(format!("residual {eps:.2e}"));
    }
    if rule.weights().iter().any(|&w| !(w > 0.0)) {
        return Err("non-positive weight".into());
    }
    Ok(eps)
}

fn feasibility_frontier(cache: &RuleCache) -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;
    for (d, r, n) in FRONTIER {
        let t = Instant::now();
        match generate_dq_with(StandardNormal, d, r, n, &DqOptions::default()) {
            Ok(DqOutcome::Converged(rule)) => match check_rule(&rule, n) {
                Ok(eps) => {
                    notes.push(format!("({d},{r},{n}) {eps:.1e} {:.1}s", t.elapsed().as_secs_f64()));
                    if let Err(e) = cache.store(&rule) {
                        return fail(format!("cannot store rule: {e}"));
                    }
                }
                Err(e) => {
                    pass = false;
                    notes.push(format!("({d},{r},{n}) {e}"));
                }
            },
            Ok(DqOutcome::Infeasible(rep)) => {
                pass = false;
                notes.push(format!("({d},{r},{n}) infeasible, best {:.2e}", rep.best_residual));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("({d},{r},{n}) error {e}"));
            }
        }
    }
    verdict(pass, notes.join("; "))
}

fn stretch_cell() {
    if std::env::var("DQUAD_STRETCH").as_deref() != Ok("1") {
        println!("SKIP stretch d=10 r=5 n=148 (set DQUAD_STRETCH=1)");
        return;
    }
    let t = Instant::now();
    match generate_dq_with(StandardNormal, 10, 5, 148, &DqOptions::default()) {
        Ok(DqOutcome::Converged(rule)) => println!(
            "STRETCH d=10 r=5 n=148: converged, residual {:.2e}, {:.0}s",
            rule.residual(),
            t.elapsed().as_secs_f64()
        ),
        Ok(DqOutcome::Infeasible(rep)) => println!(
            "STRETCH d=10 r=5 n=148: infeasible, best residual {:.2e} after {} attempts, {:.0}s",
            rep.best_residual,
            rep.restarts,
            t.elapsed().as_secs_f64()
        ),
        Err(e) => println!("STRETCH d=10 r=5 n=148: error {e}"),
    }
}

fn dq_gauss_equivalence() -> Verdict {
    let mut worst = 0.0f64;
    for n in 2..=4usize {
        let dq = match generate_dq(StandardNormal, 1, 2 * n as u32 - 1, n, 1e-8, 0, 20) {
            Ok(DqOutcome::Converged(rule)) => rule,
            other => return fail(format!("n={n}: no rule ({:?})", other.map(|o| o.rule().is_some()))),
        };
        let gauss = gauss_rule_1d(StandardNormal, n).expect("gauss rule");
        let mut pairs: Vec<(f64, f64)> = (0..n).map(|q| (dq.node(q)[0], dq.weights()[q])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (q, (x, w)) in pairs.iter().enumerate() {
            worst = worst.max((x - gauss.nodes[q]).abs()).max((w - gauss.weights[q]).abs());
        }
    }
    verdict(worst <= 1e-6, format!("max node/weight deviation {worst:.2e}"))
}

fn oracle_integration(cache: &RuleCache) -> Verdict {
    let dq = match load_rule(&cache.path_for("normal-d3-r6-n30")) {
        Ok(r) => r,
        Err(e) => return fail(format!("rule unavailable: {e}")),
    };
    let oracle = tensor_rule(StandardNormal, 3, 8).expect("tensor rule");
    let monomials = total_order_set(3, 6).expect("index set");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let coef: Vec<f64> = (0..monomials.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let poly = |x: &[f64]| -> f64 {
            monomials
                .indices()
                .iter()
                .zip(&coef)
                .map(|(a, c)| c * a.components().iter().zip(x).map(|(&p, xi)| xi.powi(p as i32)).product::<f64>())
                .sum()
        };
        worst = worst.max((dq.integrate(poly) - oracle.integrate(poly)).abs());
    }
    verdict(worst <= 1e-6, format!("max |DQ - tensor(8)| over 20 polynomials {worst:.2e}"))
}

fn gradient_check() -> Verdict {
    let spec = DgpSpec::standard(3, Full).expect("spec").with_individuals(50);
    let data = generate_dataset(&spec, 5).expect("dataset");
    let nodes = SimulationNodes::from_draws(&draws(Generator::HaltonRandomized, 3, 50, 50, 3).expect("draws"))
        .expect("nodes");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let alpha = DVector::from_fn(1, |_, _| rng.random_range(-1.5..1.5));
        let gamma = DVector::from_fn(3, |_, _| rng.random_range(-1.5..1.5));
        let chol = DMatrix::from_fn(3, 3, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => rng.random_range(0.2..1.5),
            std::cmp::Ordering::Greater => rng.random_range(-0.5..0.5),
        });
        let params = MmnlParams::new(alpha, gamma, chol).expect("params");
        let g = simulated_loglik_gradient(&data, &params, &nodes, Full).expect("gradient").gradient;
        let theta = params.pack(Full);
        let value = |v: &[f64]| {
            let p = MmnlParams::unpack(1, 3, Full, v).expect("unpack");
            simulated_loglik(&data, &p, &nodes).expect("loglik").value
        };
        let mut err = 0.0f64;
        for k in 0..theta.len() {
            let h = 1e-5 * theta[k].abs().max(1.0);
            let (mut up, mut down) = (theta.clone(), theta.clone());
            up[k] += h;
            down[k] -= h;
            let fd = (value(&up) - value(&down)) / (2.0 * h);
            err = err.max((g[k] - fd).abs());
        }
        worst = worst.max(err / g.amax().max(1.0));
    }
    verdict(worst <= 1e-6, format!("max relative gradient error over 20 points {worst:.2e}"))
}

const DESK_CONFIG: &str = r#"
seed = 20240611
resamples = 10
individuals = 500
tasks = 5
alternatives = 5
dims = [5]
covariances = ["diagonal", "full"]

[[methods]]
kind = "halton"
draws = [100, 200, 1000]
covariances = ["diagonal"]

[[methods]]
kind = "halton"
draws = [100, 200, 500]
covariances = ["full"]

[[methods]]
kind = "mlhs"
draws = [100, 200, 500]
covariances = ["diagonal"]

[[methods]]
kind = "mlhs"
draws = [100, 200]
covariances = ["full"]

[[methods]]
kind = "dq"
orders = [6]
draws = [100, 200]

[[methods]]
kind = "dq"
orders = [7]
draws = [200]
covariances = ["full"]
"#;

struct Desk {
    reports: Vec<StudyReport>,
    dirs: Vec<PathBuf>,
}

fn desk_study(root: &Path, cache: &RuleCache) -> Result<Desk, String> {
    let config = StudyConfig::from_toml(DESK_CONFIG).map_err(|e| e.to_string())?;
    let mut desk = Desk {
        reports: Vec::new(),
        dirs: Vec::new(),
    };
    for run in ["desk-a", "desk-b"] {
        let dir = root.join(run);
        let _ = fs::remove_dir_all(&dir);
        let t = Instant::now();
        let report = run_study(&config, &dir, cache, &|_| {}).map_err(|e| e.to_string())?;
        println!("    {run}: {} cells in {:.0}s", report.cells.len(), t.elapsed().as_secs_f64());
        desk.reports.push(report);
        desk.dirs.push(dir);
    }
    Ok(desk)
}

fn positivity(desk: &Desk) -> Verdict {
    let mut fits = 0;
    let mut clamped = 0;
    for report in &desk.reports {
        let diag = report.diagnostics();
        clamped += diag.clamped;
        if diag.invalid > 0 || diag.non_finite_totals > 0 {
            return fail(format!(
                "{} invalid probabilities, {} non-finite loglikelihoods",
                diag.invalid, diag.non_finite_totals
            ));
        }
        for c in &report.cells {
            for o in &c.outcomes {
                if let Some(ll) = o.loglik {
                    fits += 1;
                    if !ll.is_finite() {
                        return fail(format!("{}: loglik {ll}", c.label()));
                    }
                }
            }
        }
    }
    verdict(
        fits > 0,
        format!("{fits} fits, 0 negative or non-finite probabilities ({clamped} floor clamps)"),
    )
}

fn per_resample<T>(report: &StudyReport, cov: CovarianceStructure, kind: MethodKind, order: Option<u32>, n: usize, f: impl Fn(&dquad::simstudy::ResampleOutcome) -> Option<T>) -> Vec<Option<T>> {
    report
        .cell(5, cov, kind, order, n)
        .map(|c| {
            c.outcomes
                .iter()
                .map(|o| if o.status == ResampleStatus::Ok { f(o) } else { None })
                .collect()
        })
        .unwrap_or_default()
}

fn trend_diagonal(desk: &Desk) -> Verdict {
    let report = &desk.reports[0];
    let (Some(dq), Some(h1000)) = (
        report.cell(5, Diagonal, MethodKind::Dq, Some(6), 100),
        report.cell(5, Diagonal, MethodKind::Halton, None, 1000),
    ) else {
        return fail("cells missing");
    };
    let (Some(a), Some(b)) = (dq.mean_neg_loglik, h1000.mean_neg_loglik) else {
        return fail("no completed resamples");
    };
    let nll = |o: &dquad::simstudy::ResampleOutcome| o.loglik.map(|l| -l);
    let dq_r = per_resample(report, Diagonal, MethodKind::Dq, Some(6), 100, nll);
    let h100 = per_resample(report, Diagonal, MethodKind::Halton, None, 100, nll);
    let better = dq_r
        .iter()
        .zip(&h100)
        .filter(|(x, y)| matches!((x, y), (Some(x), Some(y)) if x < y))
        .count();
    let gap = (a - b).abs();
    verdict(
        gap <= 2.0 && better >= 8,
        format!("-ll DQ(r6,n100) {a:.2} vs Halton@1000 {b:.2} (gap {gap:.2}); DQ below Halton@100 on {better}/10"),
    )
}

fn trend_full(desk: &Desk) -> Verdict {
    let report = &desk.reports[0];
    let apb = |o: &dquad::simstudy::ResampleOutcome| o.apb;
    let dq = per_resample(report, Full, MethodKind::Dq, Some(7), 200, apb);
    let h = per_resample(report, Full, MethodKind::Halton, None, 200, apb);
    let wins = dq
        .iter()
        .zip(&h)
        .filter(|(x, y)| matches!((x, y), (Some(x), Some(y)) if x <= y))
        .count();
    let mean = |cov, kind, order| {
        report
            .cell(5, cov, kind, order, 200)
            .and_then(|c| c.mean_apb)
            .map_or("NA".to_string(), |v| format!("{v:.2}"))
    };
    verdict(
        wins >= 7,
        format!(
            "APB DQ(r7,n200) <= Halton@200 on {wins}/10 resamples; means {} vs {}",
            mean(Full, MethodKind::Dq, Some(7)),
            mean(Full, MethodKind::Halton, None)
        ),
    )
}

fn monotonicity(desk: &Desk) -> Verdict {
    let report = &desk.reports[0];
    let mut series: Vec<((CovarianceStructure, MethodKind, Option<u32>), Vec<(usize, Option<f64>)>)> = Vec::new();
    for c in &report.cells {
        let key = (c.covariance, c.method, c.order);
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push((c.draws, c.mean_apb)),
            None => series.push((key, vec![(c.draws, c.mean_apb)])),
        }
    }
    let mut pass = true;
    let mut notes = Vec::new();
    for ((cov, kind, order), mut points) in series {
        if points.len() < 2 {
            continue;
        }
        points.sort_by_key(|p| p.0);
        let Some(values) = points.iter().map(|p| p.1).collect::<Option<Vec<f64>>>() else {
            pass = false;
            notes.push(format!("{} {}: missing APB", cov.name(), kind.name()));
            continue;
        };
        let inversions = values.windows(2).filter(|w| w[1] > w[0]).count();
        pass &= inversions <= 1;
        let order = order.map(|o| format!(" r{o}")).unwrap_or_default();
        let shown: Vec<String> = values.iter().map(|v| format!("{v:.2}")).collect();
        notes.push(format!("{} {}{order} [{}] {inversions} inv", cov.name(), kind.name(), shown.join(" ")));
    }
    verdict(pass, notes.join("; "))
}

fn determinism(desk: &Desk) -> Verdict {
    for file in ["report.tsv", "report.json"] {
        let a = fs::read(desk.dirs[0].join(file));
        let b = fs::read(desk.dirs[1].join(file));
        match (a, b) {
            (Ok(a), Ok(b)) if a == b => {}
            (Ok(_), Ok(_)) => return fail(format!("{file} differs between runs")),
            _ => return fail(format!("{file} missing")),
        }
    }
    verdict(true, "report.tsv and report.json byte-identical across two fresh runs")
}

fn main() {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&root).expect("scratch directory");
    let cache = RuleCache::new(root.join("rules"));
    let mut failures = 0;
    let mut report = |id: u32, name: &str, t: Instant, v: Verdict| {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        failures += usize::from(!v.pass);
        println!("{tag} criterion {id:2} {name}: {} [{:.1}s]", v.detail, t.elapsed().as_secs_f64());
    };

    let t = Instant::now();
    report(1, "gaussian exactness", t, gaussian_exactness());
    let t = Instant::now();
    report(2, "feasibility frontier", t, feasibility_frontier(&cache));
    stretch_cell();
    let t = Instant::now();
    report(3, "1D DQ equals Gauss", t, dq_gauss_equivalence());
    let t = Instant::now();
    report(4, "oracle integration", t, oracle_integration(&cache));
    let t = Instant::now();
    report(5, "gradient", t, gradient_check());

    let t = Instant::now();
    match desk_study(&root, &cache) {
        Ok(desk) => {
            println!("    desk study: two runs in {:.0}s", t.elapsed().as_secs_f64());
            let t = Instant::now();
            report(6, "positivity and finiteness", t, positivity(&desk));
            report(7, "trend diagonal d=5", t, trend_diagonal(&desk));
            report(8, "trend full d=5", t, trend_full(&desk));
            report(9, "APB monotonicity", t, monotonicity(&desk));
            report(10, "determinism", t, determinism(&desk));
            for line in desk.reports[0].to_tsv().lines() {
                println!("    {line}");
            }
        }
        Err(e) => {
            for (id, name) in [(6, "positivity and finiteness"), (7, "trend diagonal d=5"), (8, "trend full d=5"), (9, "APB monotonicity"), (10, "determinism")] {
                report(id, name, t, fail(format!("desk study failed: {e}")));
            }
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
