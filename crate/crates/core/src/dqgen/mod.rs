//! Designed quadrature: positive-weight rules from moment matching.
//!
//! For an index set `Lambda` with `M` elements and `n` candidate nodes
//! `X = [x_1 .. x_n]`, the Vandermonde-like matrix has entries
//! `V[k, j] = pi_{alpha(k)}(x_j)`. A rule is accepted once
//! `||V(X) w - e_1||_2 <= eps` with every `w_j > 0` and every node inside the
//! support of the weight.
//!
//! The constrained problem is made unconstrained by writing `w_j = s_j^2`
//! (and `x = logistic(y)` on `[0, 1]`), then solved by Levenberg-Marquardt
//! with an analytic Jacobian from the derivative recurrence. Random restarts
//! draw fresh nodes from the weight itself.
//!
//! Both supported weights are reflection-symmetric, so a rule built from
//! mirrored node pairs with equal weights integrates every odd-degree basis
//! function to zero for free. [`Symmetry::Auto`] uses that parameterisation
//! for odd `r`, where the top layer of `Lambda_{T_r}` is entirely odd and
//! drops out of the system.

pub(crate) mod basis;
mod io;
pub(crate) mod lm;
mod rule;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

pub use io::{load_rule, parse_rule, save_rule, write_rule, RuleCache, RULE_CACHE_ENV};
pub use rule::{InvariantViolation, Provenance, QuadratureRule};

use self::basis::BasisTable;
use self::lm::{LeastSquares, LmConfig, Termination};
use crate::error::{Error, Result};
use crate::multiindex::{total_order_set, MultiIndexSet};
use crate::orthopoly::WeightFamily;

/// Cache key `family-d{d}-r{r}-n{n}`.
pub fn cache_key(family: WeightFamily, dim: usize, order: u32, nodes: usize) -> String {
    format!("{}-d{dim}-r{order}-n{nodes}", family.name())
}

/// Moment-matching system `V(X) w = e_1 / pi_0` over an index set.
#[derive(Clone, Debug)]
pub struct MomentSystem {
    family: WeightFamily,
    index_set: MultiIndexSet,
    target: DVector<f64>,
}

impl MomentSystem {
    pub fn new(family: WeightFamily, index_set: MultiIndexSet) -> Self {
        // pi_0 = 1 for a probability weight
        let mut target = DVector::zeros(index_set.len());
        target[0] = 1.0;
        MomentSystem {
            family,
            index_set,
            target,
        }
    }

    pub fn total_order(family: WeightFamily, dim: usize, order: u32) -> Result<Self> {
        Ok(Self::new(family, total_order_set(dim, order)?))
    }

    pub fn family(&self) -> WeightFamily {
        self.family
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.index_set
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.index_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_set.is_empty()
    }
}

/// `V[k, j] = pi_{alpha(k)}(x_j)` with rows in the index set's order.
pub fn vandermonde(sys: &MomentSystem, nodes: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = sys.index_set.dim();
    if nodes.nrows() != d {
        return Err(Error::dimension_mismatch("node matrix rows", d, nodes.nrows()));
    }
    let table = BasisTable::new(sys.family, &sys.index_set);
    let mut scratch = table.scratch();
    let mut v = DMatrix::zeros(sys.len(), nodes.ncols());
    for (j, mut col) in v.column_iter_mut().enumerate() {
        let x: Vec<f64> = nodes.column(j).iter().copied().collect();
        table.column(&x, &mut scratch, col.as_mut_slice());
    }
    Ok(v)
}

/// `||V(X) w - e_1 / pi_0||_2`.
pub fn residual(sys: &MomentSystem, nodes: &DMatrix<f64>, weights: &DVector<f64>) -> Result<f64> {
    let d = sys.index_set.dim();
    if nodes.nrows() != d {
        return Err(Error::dimension_mismatch("node matrix rows", d, nodes.nrows()));
    }
    if nodes.ncols() != weights.len() {
        return Err(Error::dimension_mismatch("weight vector", nodes.ncols(), weights.len()));
    }
    let table = BasisTable::new(sys.family, &sys.index_set);
    let mut scratch = table.scratch();
    let mut column = vec![0.0; sys.len()];
    let mut acc: Vec<f64> = sys.target.iter().map(|t| -t).collect();
    for j in 0..nodes.ncols() {
        let x: Vec<f64> = nodes.column(j).iter().copied().collect();
        table.column(&x, &mut scratch, &mut column);
        let w = weights[j];
        for (a, v) in acc.iter_mut().zip(&column) {
            *a += w * v;
        }
    }
    Ok(acc.iter().map(|a| a * a).sum::<f64>().sqrt())
}

/// Node parameterisation used by the optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    /// Every node and weight free.
    None,
    /// Mirrored node pairs with equal weights, plus a centre node when `n` is odd.
    Central,
    /// `Central` for odd orders, `None` for even orders.
    #[default]
    Auto,
}

impl Symmetry {
    fn resolve(self, order: u32) -> bool {
        match self {
            Symmetry::None => false,
            Symmetry::Central => true,
            Symmetry::Auto => order % 2 == 1,
        }
    }
}

/// Knobs for [`generate_dq_with`].
#[derive(Clone, Debug, PartialEq)]
pub struct DqOptions {
    pub eps_target: f64,
    pub seed: u64,
    /// Number of independent attempts; attempt `k` uses seed `seed + k`.
    pub max_restarts: usize,
    pub max_iterations: usize,
    pub min_step: f64,
    pub symmetry: Symmetry,
    /// When set, nodes whose weight falls below this after convergence are
    /// dropped, so the rule may come out smaller than requested.
    pub prune_threshold: Option<f64>,
}

impl Default for DqOptions {
    fn default() -> Self {
        DqOptions {
            eps_target: 1e-8,
            seed: 0,
            max_restarts: 20,
            max_iterations: 2000,
            min_step: 1e-14,
            symmetry: Symmetry::Auto,
            prune_threshold: None,
        }
    }
}

impl DqOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps_target = eps;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.max_restarts = restarts;
        self
    }

    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Self {
        self.symmetry = symmetry;
        self
    }
}

/// Why no rule was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    pub family: WeightFamily,
    pub dim: usize,
    pub order: u32,
    pub nodes: usize,
    pub eps_target: f64,
    pub best_residual: f64,
    pub restarts: usize,
}

impl std::fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "no {} rule with d={} r={} n={} reached eps={:e} after {} restarts (best residual {:e})",
            self.family, self.dim, self.order, self.nodes, self.eps_target, self.restarts, self.best_residual
        )
    }
}

#[derive(Clone, Debug)]
pub enum DqOutcome {
    Converged(QuadratureRule),
    Infeasible(InfeasibilityReport),
}

impl DqOutcome {
    pub fn rule(self) -> Option<QuadratureRule> {
        match self {
            DqOutcome::Converged(r) => Some(r),
            DqOutcome::Infeasible(_) => None,
        }
    }
}

/// Designed quadrature with the default optimizer settings.
pub fn generate_dq(
    family: WeightFamily,
    dim: usize,
    order: u32,
    nodes: usize,
    eps_target: f64,
    seed: u64,
    max_restarts: usize,
) -> Result<DqOutcome> {
    let opts = DqOptions::default()
        .with_eps(eps_target)
        .with_seed(seed)
        .with_restarts(max_restarts);
    generate_dq_with(family, dim, order, nodes, &opts)
}

pub fn generate_dq_with(
    family: WeightFamily,
    dim: usize,
    order: u32,
    nodes: usize,
    opts: &DqOptions,
) -> Result<DqOutcome> {
    if nodes == 0 {
        return Err(Error::invalid("a rule needs at least one node"));
    }
    if !(opts.eps_target > 0.0) {
        return Err(Error::invalid("eps_target must be positive"));
    }
    let set = total_order_set(dim, order)?;
    let symmetric = opts.symmetry.resolve(order);
    let problem = DesignProblem::new(family, &set, nodes, symmetric);
    let lm_cfg = LmConfig {
        // margin for re-verification on the expanded rule
        tolerance: 0.5 * opts.eps_target,
        min_step: opts.min_step,
        max_iterations: opts.max_iterations,
        initial_damping: 1e-3,
    };

    let attempts = opts.max_restarts.max(1);
    let mut best = f64::INFINITY;
    for attempt in 0..attempts {
        let start = problem.initial_guess(opts.seed.wrapping_add(attempt as u64));
        let rep = lm::minimize(&problem, start, &lm_cfg);
        if rep.residual_norm.is_finite() {
            best = best.min(rep.residual_norm);
        }
        if rep.termination == Termination::NonFinite {
            continue;
        }
        let (x, w) = problem.expand(&rep.params, opts.prune_threshold);
        let rule = QuadratureRule::with_computed_residual(family, order, x, w, opts.seed, Provenance::Dq)?;
        best = best.min(rule.residual());
        if rule.residual() <= opts.eps_target && rule.invariant_violations().is_empty() {
            return Ok(DqOutcome::Converged(rule.sorted()));
        }
    }
    Ok(DqOutcome::Infeasible(InfeasibilityReport {
        family,
        dim,
        order,
        nodes,
        eps_target: opts.eps_target,
        best_residual: best,
        restarts: attempts,
    }))
}

/// Result of [`min_nodes_search`].
#[derive(Clone, Debug)]
pub enum MinNodes {
    Found { nodes: usize, rule: QuadratureRule },
    NotFound { upper: usize, best_residual: f64 },
}

/// Smallest `n` in `[lo, hi]` admitting a rule, by bisection over the
/// (assumed monotone) feasibility of `n`. The upper end is probed first;
/// every probe runs the full restart budget.
pub fn min_nodes_search(
    family: WeightFamily,
    dim: usize,
    order: u32,
    lo: usize,
    hi: usize,
    opts: &DqOptions,
) -> Result<MinNodes> {
    if lo == 0 || lo > hi {
        return Err(Error::invalid(format!("bad node range [{lo}, {hi}]")));
    }
    let mut best_rule = match generate_dq_with(family, dim, order, hi, opts)? {
        DqOutcome::Converged(rule) => rule,
        DqOutcome::Infeasible(rep) => {
            return Ok(MinNodes::NotFound {
                upper: hi,
                best_residual: rep.best_residual,
            })
        }
    };
    let (mut lo, mut hi) = (lo, hi);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        match generate_dq_with(family, dim, order, mid, opts)? {
            DqOutcome::Converged(rule) => {
                hi = mid;
                best_rule = rule;
            }
            DqOutcome::Infeasible(_) => lo = mid + 1,
        }
    }
    best_rule.verify()?;
    Ok(MinNodes::Found {
        nodes: hi,
        rule: best_rule,
    })
}

/// Least-squares view of the moment system in `(y, s)` coordinates.
struct DesignProblem {
    family: WeightFamily,
    dim: usize,
    table: BasisTable,
    target: Vec<f64>,
    free_nodes: usize,
    center: Option<Vec<f64>>,
    symmetric: bool,
    total_nodes: usize,
}

impl DesignProblem {
    fn new(family: WeightFamily, set: &MultiIndexSet, nodes: usize, symmetric: bool) -> Self {
        let table = if symmetric {
            BasisTable::from_rows(family, set, |deg| deg % 2 == 0)
        } else {
            BasisTable::new(family, set)
        };
        let mut target = vec![0.0; table.rows()];
        target[0] = 1.0;
        let dim = set.dim();
        let (free_nodes, center) = if symmetric {
            let c = vec![family.center(); dim];
            let center = (nodes % 2 == 1).then(|| {
                let mut scratch = table.scratch();
                table.fill(&c, &mut scratch, false);
                (0..table.rows()).map(|k| table.row_value(k, &scratch.vals)).collect()
            });
            (nodes / 2, center)
        } else {
            (nodes, None)
        };
        DesignProblem {
            family,
            dim,
            table,
            target,
            free_nodes,
            center,
            symmetric,
            total_nodes: nodes,
        }
    }

    fn weight_offset(&self) -> usize {
        self.free_nodes * self.dim
    }

    fn initial_guess(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(self.param_count());
        for _ in 0..self.free_nodes * self.dim {
            let y = match self.family {
                WeightFamily::StandardNormal => rng.sample::<f64, _>(StandardNormal),
                WeightFamily::UniformUnit => {
                    let u: f64 = rng.sample(Open01);
                    (u / (1.0 - u)).ln()
                }
            };
            params.push(y);
        }
        let s = (1.0 / self.total_nodes as f64).sqrt();
        params.resize(self.param_count(), s);
        params
    }

    #[inline]
    fn to_node(&self, y: f64) -> (f64, f64) {
        match self.family {
            WeightFamily::StandardNormal => (y, 1.0),
            WeightFamily::UniformUnit => {
                let x = 1.0 / (1.0 + (-y).exp());
                (x, x * (1.0 - x))
            }
        }
    }

    /// Full node matrix and weights, mirrored pairs expanded.
    fn expand(&self, params: &[f64], prune: Option<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let d = self.dim;
        let c = self.family.center();
        let prune = prune.unwrap_or(f64::NEG_INFINITY);
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        let off = self.weight_offset();
        for j in 0..self.free_nodes {
            let w = params[off + j].powi(2);
            if w < prune {
                continue;
            }
            let x: Vec<f64> = params[j * d..(j + 1) * d].iter().map(|&y| self.to_node(y).0).collect();
            if self.symmetric {
                coords.extend(x.iter().map(|&v| 2.0 * c - v));
                weights.push(w);
            }
            coords.extend_from_slice(&x);
            weights.push(w);
        }
        if self.center.is_some() {
            let w = params[off + self.free_nodes].powi(2);
            if w >= prune {
                coords.extend(std::iter::repeat_n(c, d));
                weights.push(w);
            }
        }
        let n = weights.len();
        (DMatrix::from_vec(d, n, coords), DVector::from_vec(weights))
    }
}

impl LeastSquares for DesignProblem {
    fn residual_count(&self) -> usize {
        self.table.rows()
    }

    fn param_count(&self) -> usize {
        self.free_nodes * (self.dim + 1) + usize::from(self.center.is_some())
    }

    fn evaluate(&self, params: &[f64], out: &mut [f64], mut jacobian: Option<&mut DMatrix<f64>>) {
        let d = self.dim;
        let rows = self.table.rows();
        let stride = self.table.stride();
        let mult = if self.symmetric { 2.0 } else { 1.0 };
        let off = self.weight_offset();
        for (o, t) in out.iter_mut().zip(&self.target) {
            *o = -t;
        }
        if let Some(jac) = jacobian.as_deref_mut() {
            jac.fill(0.0);
        }
        let mut scratch = self.table.scratch();
        let mut x = vec![0.0; d];
        let mut dxdy = vec![0.0; d];
        for j in 0..self.free_nodes {
            for l in 0..d {
                (x[l], dxdy[l]) = self.to_node(params[j * d + l]);
            }
            let s = params[off + j];
            let w = mult * s * s;
            self.table.fill(&x, &mut scratch, jacobian.is_some());
            match jacobian.as_deref_mut() {
                None => {
                    for (k, o) in out.iter_mut().enumerate() {
                        *o += w * self.table.row_value(k, &scratch.vals);
                    }
                }
                Some(jac) => {
                    for k in 0..rows {
                        let terms = self.table.terms(k);
                        let val: f64 = terms.iter().map(|&(l, a)| scratch.vals[l * stride + a]).product();
                        out[k] += w * val;
                        jac[(k, off + j)] = 2.0 * mult * s * val;
                        for (t, &(l, a)) in terms.iter().enumerate() {
                            let mut partial = scratch.ders[l * stride + a];
                            for (u, &(l2, a2)) in terms.iter().enumerate() {
                                if u != t {
                                    partial *= scratch.vals[l2 * stride + a2];
                                }
                            }
                            jac[(k, j * d + l)] = w * partial * dxdy[l];
                        }
                    }
                }
            }
        }
        if let Some(center) = &self.center {
            let s = params[off + self.free_nodes];
            for k in 0..rows {
                out[k] += s * s * center[k];
                if let Some(jac) = jacobian.as_deref_mut() {
                    jac[(k, off + self.free_nodes)] = 2.0 * s * center[k];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiindex::tensor_rule;
    use crate::orthopoly::{eval_orthonormal, gauss_rule_1d};

    const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn vandermonde_examples() {
        let sys = MomentSystem::total_order(WeightFamily::StandardNormal, 1, 2).unwrap();
        let v = vandermonde(&sys, &DMatrix::from_element(1, 1, 0.0)).unwrap();
        assert_eq!(v.shape(), (3, 1));
        assert!((v[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(v[(1, 0)].abs() < 1e-15);
        assert!((v[(2, 0)] + SQRT_HALF).abs() < 1e-15);

        let sys = MomentSystem::total_order(WeightFamily::StandardNormal, 2, 0).unwrap();
        let v = vandermonde(&sys, &DMatrix::from_column_slice(2, 1, &[0.4, -3.0])).unwrap();
        assert_eq!(v.shape(), (1, 1));
        assert_eq!(v[(0, 0)], 1.0);

        let sys = MomentSystem::total_order(WeightFamily::StandardNormal, 1, 3).unwrap();
        let x = DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]);
        let v = vandermonde(&sys, &x).unwrap();
        for k in 0..4 {
            for (j, xj) in [-1.0, 1.0].into_iter().enumerate() {
                assert!((v[(k, j)] - eval_orthonormal(WeightFamily::StandardNormal, k, xj)).abs() < 1e-15);
            }
        }
        assert!(vandermonde(&sys, &DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn residual_examples() {
        let f = WeightFamily::StandardNormal;
        let t = tensor_rule(f, 2, 2).unwrap();
        let sys = MomentSystem::total_order(f, 2, 3).unwrap();
        assert!(residual(&sys, t.nodes(), t.weights()).unwrap() < 1e-13);

        let sys = MomentSystem::total_order(f, 1, 2).unwrap();
        let origin = DMatrix::from_element(1, 1, 0.0);
        let r = residual(&sys, &origin, &DVector::from_element(1, 1.0)).unwrap();
        assert!((r - SQRT_HALF).abs() < 1e-15);

        let r = residual(&sys, &origin, &DVector::zeros(1)).unwrap();
        assert_eq!(r, 1.0);
    }

    fn check_jacobian(problem: &DesignProblem, params: &[f64]) {
        let m = problem.residual_count();
        let p = problem.param_count();
        let mut r = vec![0.0; m];
        let mut jac = DMatrix::zeros(m, p);
        problem.evaluate(params, &mut r, Some(&mut jac));
        let mut r_only = vec![0.0; m];
        problem.evaluate(params, &mut r_only, None);
        assert_eq!(r, r_only);
        let h = 1e-6;
        let (mut rp, mut rm) = (vec![0.0; m], vec![0.0; m]);
        for c in 0..p {
            let mut plus = params.to_vec();
            let mut minus = params.to_vec();
            plus[c] += h;
            minus[c] -= h;
            problem.evaluate(&plus, &mut rp, None);
            problem.evaluate(&minus, &mut rm, None);
            for k in 0..m {
                let fd = (rp[k] - rm[k]) / (2.0 * h);
                assert!((fd - jac[(k, c)]).abs() < 1e-6 * (1.0 + fd.abs()), "row {k} col {c}: {fd} vs {}", jac[(k, c)]);
            }
        }
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        for family in [WeightFamily::StandardNormal, WeightFamily::UniformUnit] {
            let set = total_order_set(3, 4).unwrap();
            for (n, symmetric) in [(5, false), (5, true), (6, true)] {
                let problem = DesignProblem::new(family, &set, n, symmetric);
                let params = problem.initial_guess(11);
                check_jacobian(&problem, &params);
            }
        }
    }

    #[test]
    fn one_dimensional_dq_reproduces_gauss() {
        for family in [WeightFamily::StandardNormal, WeightFamily::UniformUnit] {
            for symmetry in [Symmetry::Auto, Symmetry::None] {
                for n in 2..=4 {
                    let opts = DqOptions::default().with_seed(3).with_symmetry(symmetry);
                    let rule = generate_dq_with(family, 1, (2 * n - 1) as u32, n, &opts)
                        .unwrap()
                        .rule()
                        .unwrap_or_else(|| panic!("{family} n={n} {symmetry:?}"));
                    let gauss = gauss_rule_1d(family, n).unwrap();
                    assert_eq!(rule.len(), n);
                    for q in 0..n {
                        assert!((rule.node(q)[0] - gauss.nodes[q]).abs() < 1e-6);
                        assert!((rule.weights()[q] - gauss.weights[q]).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn origin_solves_order_one() {
        let rule = generate_dq(WeightFamily::StandardNormal, 2, 1, 1, 1e-8, 0, 5).unwrap().rule().unwrap();
        assert!(rule.node(0).iter().all(|x| x.abs() < 1e-8));
        assert!((rule.weights()[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn small_rules_satisfy_raw_moment_checks() {
        let f = WeightFamily::StandardNormal;
        let rule = generate_dq(f, 2, 4, 8, 1e-8, 1, 20).unwrap().rule().expect("d=2 r=4 n=8");
        assert!(rule.residual() <= 1e-8);
        for i in 0..2 {
            let m1 = rule.integrate(|x| x[i]);
            let m2 = rule.integrate(|x| x[i] * x[i]);
            assert!(m1.abs() < 1e-7 && (m2 - 1.0).abs() < 1e-7);
        }
        assert!(rule.integrate(|x| x[0] * x[1]).abs() < 1e-7);
    }

    #[test]
    fn too_few_nodes_is_reported_not_raised() {
        let out = generate_dq(WeightFamily::StandardNormal, 5, 6, 10, 1e-8, 0, 3).unwrap();
        match out {
            DqOutcome::Infeasible(rep) => {
                assert_eq!(rep.restarts, 3);
                assert!(rep.best_residual > 1e-8);
            }
            DqOutcome::Converged(_) => panic!("10 nodes cannot match 462 moments"),
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_dq(WeightFamily::StandardNormal, 2, 5, 7, 1e-8, 9, 5).unwrap().rule().unwrap();
        let b = generate_dq(WeightFamily::StandardNormal, 2, 5, 7, 1e-8, 9, 5).unwrap().rule().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn min_nodes_examples() {
        let opts = DqOptions::default().with_restarts(5);
        match min_nodes_search(WeightFamily::StandardNormal, 1, 5, 1, 6, &opts).unwrap() {
            MinNodes::Found { nodes, .. } => assert_eq!(nodes, 3),
            other => panic!("{other:?}"),
        }
        match min_nodes_search(WeightFamily::StandardNormal, 2, 1, 1, 4, &opts).unwrap() {
            MinNodes::Found { nodes, rule } => {
                assert_eq!(nodes, 1);
                assert!(rule.node(0).iter().all(|x| x.abs() < 1e-8));
            }
            other => panic!("{other:?}"),
        }
    }
}
