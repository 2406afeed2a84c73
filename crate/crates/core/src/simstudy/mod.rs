//! Monte Carlo benchmark harness: the data generating process, the
//! recovery metrics (APB, FSSE-based t statistic, numeraire ratios) and the
//! resample loop over methods and draw counts.
//!
//! Scale is not identified in a logit model, so recovery is measured on
//! ratios: every mean `gamma_k` and every standard deviation
//! `sqrt(Delta_kk)` is divided by the fixed coefficient `alpha_1`.

mod study;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gumbel, StandardNormal};

pub use study::{
    derive_seed, run_study, CellReport, CellTiming, MethodKind, MethodSpec, ResampleOutcome, ResampleStatus,
    StudyConfig, StudyReport,
};

use crate::error::{Error, Result};
use crate::mmnl::{ChoiceDataset, CovarianceStructure, Individual, MmnlParams};

/// Numeraire used for every reported ratio.
pub const NUMERAIRE: &str = "alpha_1";

/// `Delta` with 0.5 off the diagonal and a diagonal of ones except 1.5 in
/// the first and last entries.
pub fn build_full_cov(d: usize) -> Result<DMatrix<f64>> {
    if d < 2 {
        return Err(Error::invalid(format!("full covariance pattern needs d >= 2, got {d}")));
    }
    let mut m = DMatrix::from_element(d, d, 0.5);
    for k in 0..d {
        m[(k, k)] = 1.0;
    }
    m[(0, 0)] = 1.5;
    m[(d - 1, d - 1)] = 1.5;
    Ok(m)
}

/// Data generating process.
#[derive(Clone, Debug, PartialEq)]
pub struct DgpSpec {
    pub individuals: usize,
    pub alternatives: usize,
    pub tasks: usize,
    pub covariance: CovarianceStructure,
    pub alpha: DVector<f64>,
    pub gamma: DVector<f64>,
    pub delta: DMatrix<f64>,
    /// Drops the extreme value shocks; choices become the deterministic argmax.
    pub suppress_shocks: bool,
}

impl DgpSpec {
    /// `N = 1000`, `J = T = 5`, `alpha = (1)`, `gamma = (1, -1, 1, ...)` and
    /// `Delta` from [`build_full_cov`] (its diagonal only, for `Diagonal`).
    pub fn standard(d: usize, covariance: CovarianceStructure) -> Result<Self> {
        let full = build_full_cov(d)?;
        let delta = match covariance {
            CovarianceStructure::Full => full,
            CovarianceStructure::Diagonal => DMatrix::from_diagonal(&full.diagonal()),
        };
        Ok(DgpSpec {
            individuals: 1000,
            alternatives: 5,
            tasks: 5,
            covariance,
            alpha: DVector::from_element(1, 1.0),
            gamma: DVector::from_fn(d, |k, _| if k % 2 == 0 { 1.0 } else { -1.0 }),
            delta,
            suppress_shocks: false,
        })
    }

    pub fn with_individuals(mut self, n: usize) -> Self {
        self.individuals = n;
        self
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// Truth as model parameters, with `L` the Cholesky factor of `Delta`
    /// (zero when `Delta` is zero).
    pub fn true_params(&self) -> Result<MmnlParams> {
        let chol = if self.delta.iter().all(|&v| v == 0.0) {
            self.delta.clone()
        } else {
            self.delta
                .clone()
                .cholesky()
                .ok_or_else(|| Error::invalid("Delta must be positive definite"))?
                .l()
        };
        MmnlParams::new(self.alpha.clone(), self.gamma.clone(), chol)
    }
}

/// Draws `beta_i ~ N(gamma, Delta)`, covariates `x, z ~ U(-1, 1)` and
/// Gumbel shocks, and records the utility-maximising alternative.
pub fn generate_dataset(spec: &DgpSpec, seed: u64) -> Result<ChoiceDataset> {
    let truth = spec.true_params()?;
    let (p, d, j, tasks) = (spec.alpha.len(), spec.dim(), spec.alternatives, spec.tasks);
    if j < 2 || tasks == 0 || spec.individuals == 0 {
        return Err(Error::invalid("DGP needs J >= 2, T >= 1 and N >= 1"));
    }
    let gumbel = Gumbel::new(0.0, 1.0).expect("valid Gumbel scale");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = tasks * j;
    let mut inds = Vec::with_capacity(spec.individuals);
    for i in 0..spec.individuals {
        let eta = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let beta = &spec.gamma + truth.chol() * eta;
        let mut x = DMatrix::zeros(rows, p);
        let mut z = DMatrix::zeros(rows, d);
        let mut chosen = Vec::with_capacity(tasks);
        for t in 0..tasks {
            let mut best = (f64::NEG_INFINITY, 0);
            for a in 0..j {
                let row = t * j + a;
                for k in 0..p {
                    x[(row, k)] = rng.random_range(-1.0..1.0);
                }
                for k in 0..d {
                    z[(row, k)] = rng.random_range(-1.0..1.0);
                }
                let shock: f64 = rng.sample(gumbel);
                let mut v = x.row(row).dot(&spec.alpha.transpose()) + z.row(row).dot(&beta.transpose());
                if !spec.suppress_shocks {
                    v += shock;
                }
                if v > best.0 {
                    best = (v, a);
                }
            }
            chosen.push(best.1);
        }
        let alt_ids = (0..rows as u64).map(|r| r % j as u64 + 1).collect();
        inds.push(Individual::new(i as u64 + 1, (1..=tasks as u64).collect(), alt_ids, x, z, chosen)?);
    }
    ChoiceDataset::new(p, d, inds)
}

/// `|(estimate - truth) / truth| * 100`; `None` when the truth is zero.
pub fn apb(estimate: f64, truth: f64) -> Option<f64> {
    (truth != 0.0).then(|| ((estimate - truth) / truth).abs() * 100.0)
}

/// `(mean - truth) / FSSE` across resamples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TStat {
    pub value: f64,
    pub fsse: f64,
    /// Set when every estimate coincides; the value is then 0 (estimates at
    /// the truth) or infinite.
    pub zero_fsse: bool,
}

pub fn t_stat(estimates: &[f64], truth: f64) -> Result<TStat> {
    if estimates.len() < 2 {
        return Err(Error::invalid("t statistic needs at least two resamples"));
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let fsse = var.sqrt();
    let diff = mean - truth;
    if fsse == 0.0 {
        let value = if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY };
        return Ok(TStat {
            value,
            fsse,
            zero_fsse: true,
        });
    }
    Ok(TStat {
        value: diff / fsse,
        fsse,
        zero_fsse: false,
    })
}

/// `gamma_k / alpha_1` followed by `sqrt(Delta_kk) / alpha_1`.
pub fn parameter_ratios(params: &MmnlParams) -> Result<Vec<f64>> {
    let denom = *params
        .alpha()
        .get(0)
        .ok_or_else(|| Error::invalid("ratios need at least one fixed coefficient"))?;
    if denom.abs() < 1e-8 {
        return Err(Error::invalid(format!("numeraire {NUMERAIRE} = {denom:e} is too close to zero")));
    }
    let sd = params.covariance().diagonal().map(f64::sqrt);
    Ok(params.gamma().iter().chain(sd.iter()).map(|v| v / denom).collect())
}

/// Names matching [`parameter_ratios`].
pub fn ratio_names(d: usize) -> Vec<String> {
    (1..=d)
        .map(|k| format!("gamma_{k}/{NUMERAIRE}"))
        .chain((1..=d).map(|k| format!("sd_{k}/{NUMERAIRE}")))
        .collect()
}
