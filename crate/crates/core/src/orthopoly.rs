//! Univariate orthonormal polynomials and Gaussian quadrature.
//!
//! Two probability weights are supported: the standard normal density on the
//! real line (probabilists' Hermite polynomials) and the uniform density on
//! `[0, 1]` (shifted Legendre polynomials). Both are evaluated through the
//! orthonormal three-term recurrence
//!
//! ```text
//! x p_m(x) = sqrt(b_m) p_{m-1}(x) + a_m p_m(x) + sqrt(b_{m+1}) p_{m+1}(x)
//! ```
//!
//! with `p_{-1} = 0` and `p_0 = 1 / sqrt(b_0) = 1`. The orthonormal form keeps
//! values bounded at high degree where monic recurrences overflow.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability weight function defining an orthonormal family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightFamily {
    /// Standard normal density on the whole real line.
    StandardNormal,
    /// Uniform density on `[0, 1]`.
    UniformUnit,
}

impl WeightFamily {
    /// Short name used in rule files and cache keys.
    pub fn name(self) -> &'static str {
        match self {
            WeightFamily::StandardNormal => "normal",
            WeightFamily::UniformUnit => "uniform",
        }
    }

    /// Closed support `(lo, hi)`; infinite ends for the normal weight.
    pub fn support(self) -> (f64, f64) {
        match self {
            WeightFamily::StandardNormal => (f64::NEG_INFINITY, f64::INFINITY),
            WeightFamily::UniformUnit => (0.0, 1.0),
        }
    }

    pub fn contains(self, x: f64) -> bool {
        let (lo, hi) = self.support();
        x.is_finite() && x >= lo && x <= hi
    }

    /// Reflection centre: every `p_k` satisfies `p_k(2c - x) = (-1)^k p_k(x)`.
    pub fn center(self) -> f64 {
        match self {
            WeightFamily::StandardNormal => 0.0,
            WeightFamily::UniformUnit => 0.5,
        }
    }

    /// Analytic raw moment `E[X^k]` under the weight.
    pub fn raw_moment(self, k: u32) -> f64 {
        match self {
            WeightFamily::StandardNormal => {
                if k % 2 == 1 {
                    0.0
                } else {
                    // (k - 1)!!
                    (1..k).step_by(2).map(f64::from).product()
                }
            }
            WeightFamily::UniformUnit => 1.0 / f64::from(k + 1),
        }
    }

    #[inline]
    pub(crate) fn a(self, _k: usize) -> f64 {
        match self {
            WeightFamily::StandardNormal => 0.0,
            WeightFamily::UniformUnit => 0.5,
        }
    }

    #[inline]
    pub(crate) fn b(self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let k = k as f64;
        match self {
            WeightFamily::StandardNormal => k,
            WeightFamily::UniformUnit => 1.0 / (4.0 * (4.0 - 1.0 / (k * k))),
        }
    }
}

impl fmt::Display for WeightFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "standard-normal" | "standardnormal" | "gaussian" | "hermite" => {
                Ok(WeightFamily::StandardNormal)
            }
            "uniform" | "uniform-unit" | "uniformunit" | "legendre" => Ok(WeightFamily::UniformUnit),
            other => Err(Error::UnsupportedFamily(other.to_string())),
        }
    }
}

/// Recurrence coefficients `a_0..=a_m` and `b_0..=b_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrenceCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Closed-form recurrence coefficients up to `max_degree`.
///
/// Hermite: `a_k = 0`, `b_k = k`. Shifted Legendre: `a_k = 1/2`,
/// `b_k = 1 / (4 (4 - k^-2))`. Both have `b_0 = 1`.
pub fn recurrence_coeffs(family: WeightFamily, max_degree: usize) -> RecurrenceCoefficients {
    RecurrenceCoefficients {
        a: (0..=max_degree).map(|k| family.a(k)).collect(),
        b: (0..=max_degree).map(|k| family.b(k)).collect(),
    }
}

/// Value of the orthonormal polynomial `p_degree(x)`.
pub fn eval_orthonormal(family: WeightFamily, degree: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for m in 0..degree {
        let next = ((x - family.a(m)) * cur - family.b(m).sqrt() * prev) / family.b(m + 1).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `values[k] = p_k(x)` for `k < values.len()`.
pub fn eval_orthonormal_all(family: WeightFamily, x: f64, values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    values[0] = 1.0;
    let mut prev = 0.0;
    for m in 0..values.len() - 1 {
        let cur = values[m];
        values[m + 1] = ((x - family.a(m)) * cur - family.b(m).sqrt() * prev) / family.b(m + 1).sqrt();
        prev = cur;
    }
}

/// Fills `p_k(x)` and `p_k'(x)`; derivatives follow from differentiating the
/// recurrence: `sqrt(b_{m+1}) p'_{m+1} = p_m + (x - a_m) p'_m - sqrt(b_m) p'_{m-1}`.
pub fn eval_orthonormal_with_derivative(
    family: WeightFamily,
    x: f64,
    values: &mut [f64],
    derivs: &mut [f64],
) {
    debug_assert_eq!(values.len(), derivs.len());
    if values.is_empty() {
        return;
    }
    values[0] = 1.0;
    derivs[0] = 0.0;
    let (mut prev, mut dprev) = (0.0, 0.0);
    for m in 0..values.len() - 1 {
        let (cur, dcur) = (values[m], derivs[m]);
        let sb = family.b(m).sqrt();
        let sb1 = family.b(m + 1).sqrt();
        let shift = x - family.a(m);
        values[m + 1] = (shift * cur - sb * prev) / sb1;
        derivs[m + 1] = (cur + shift * dcur - sb * dprev) / sb1;
        prev = cur;
        dprev = dcur;
    }
}

/// Univariate Gaussian rule, exact on polynomials of degree `order_exact = 2n - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnivariateRule {
    pub family: WeightFamily,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order_exact: usize,
}

impl UnivariateRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_q f(x_q) w_q`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| f(x) * w).sum()
    }
}

/// Gauss rule with `n` nodes via the Jacobi-matrix eigenproblem.
///
/// Nodes are the eigenvalues of the symmetric tridiagonal matrix with diagonal
/// `a_0..a_{n-1}` and off-diagonal `sqrt(b_1)..sqrt(b_{n-1})`; weights are
/// `b_0` times the squared first component of each normalized eigenvector.
pub fn gauss_rule_1d(family: WeightFamily, n: usize) -> Result<UnivariateRule> {
    if n == 0 {
        return Err(Error::invalid("a Gauss rule needs at least one node"));
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jacobi[(k, k)] = family.a(k);
        if k + 1 < n {
            let off = family.b(k + 1).sqrt();
            jacobi[(k, k + 1)] = off;
            jacobi[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::try_new(jacobi, f64::EPSILON, 1000 * n.max(10))
        .ok_or(Error::EigenNonConvergence { n })?;

    let b0 = family.b(0);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|q| {
            let v0 = eig.eigenvectors[(0, q)];
            (eig.eigenvalues[q], b0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|l, r| l.0.total_cmp(&r.0));

    // the weight is reflection-symmetric about its centre; impose it exactly
    let c = family.center();
    for q in 0..n / 2 {
        let mirror = n - 1 - q;
        let half_gap = 0.5 * ((pairs[mirror].0 - c) - (pairs[q].0 - c));
        let w = 0.5 * (pairs[q].1 + pairs[mirror].1);
        pairs[q] = (c - half_gap, w);
        pairs[mirror] = (c + half_gap, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = c;
    }

    let (nodes, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(UnivariateRule {
        family,
        nodes,
        weights,
        order_exact: 2 * n - 1,
    })
}
