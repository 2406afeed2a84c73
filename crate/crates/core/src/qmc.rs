//! Quasi-Monte Carlo baselines: randomized Halton, scrambled Halton and
//! modified Latin hypercube sampling (MLHS), plus the inverse-normal map that
//! turns a block of uniform draws into an equal-weight rule on `R^d`.
//!
//! Draws for `N` individuals come in consecutive blocks of `R` points. For
//! Halton the blocks are cut from one long sequence whose first ten points
//! are discarded; for MLHS every individual gets a fresh design.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::dqgen::{Provenance, QuadratureRule};
use crate::error::{Error, Result};
use crate::orthopoly::WeightFamily;

/// Bases for Halton dimensions `1..=25`.
pub const PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

/// Leading Halton points skipped before the first block.
pub const HALTON_DISCARD: u64 = 10;

/// Total order over which wrapped rules report their moment residual.
pub const WRAPPED_RESIDUAL_ORDER: u32 = 2;

// keep every coordinate strictly inside (0, 1)
const LO: f64 = f64::EPSILON / 2.0;
const HI: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    HaltonRandomized,
    HaltonScrambled,
    Mlhs,
}

impl Generator {
    pub fn name(self) -> &'static str {
        match self {
            Generator::HaltonRandomized => "halton",
            Generator::HaltonScrambled => "halton-scrambled",
            Generator::Mlhs => "mlhs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "halton" | "halton-randomized" => Some(Generator::HaltonRandomized),
            "halton-scrambled" => Some(Generator::HaltonScrambled),
            "mlhs" => Some(Generator::Mlhs),
            _ => None,
        }
    }
}

impl std::fmt::Display for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `N` blocks of `R` points in `(0, 1)^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct DrawMatrix {
    dim: usize,
    count: usize,
    individuals: usize,
    generator: Generator,
    seed: u64,
    // point (i, r) occupies data[(i * count + r) * dim ..][..dim]
    data: Vec<f64>,
}

impl DrawMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Draws per individual, `R`.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn individuals(&self) -> usize {
        self.individuals
    }

    pub fn generator(&self) -> Generator {
        self.generator
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn point(&self, individual: usize, r: usize) -> &[f64] {
        let start = (individual * self.count + r) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// Column `j` of individual `i`'s block: `R` values.
    pub fn coordinate(&self, individual: usize, j: usize) -> Vec<f64> {
        (0..self.count).map(|r| self.point(individual, r)[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Digit reversal of `k` in `base`.
pub fn radical_inverse(base: u32, k: u64) -> f64 {
    scrambled_radical_inverse(base, k, None)
}

/// Radical inverse with every digit `a` replaced by `perm[a]`. `perm[0]`
/// must be 0 so that the infinite tail of zero digits stays zero.
fn scrambled_radical_inverse(base: u32, mut k: u64, perm: Option<&[u32]>) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut x = 0.0;
    while k > 0 {
        let digit = (k % b) as usize;
        let digit = perm.map_or(digit as u32, |p| p[digit]);
        x += digit as f64 * scale;
        scale *= inv;
        k /= b;
    }
    x
}

fn check_common(d: usize, n: usize, r: usize) -> Result<()> {
    if d == 0 || n == 0 || r == 0 {
        return Err(Error::invalid(format!("draw matrix needs positive d, N, R (got {d}, {n}, {r})")));
    }
    Ok(())
}

/// Randomized (and optionally scrambled) Halton draws.
///
/// A single uniform shift per dimension is added modulo 1. Scrambling applies
/// one random permutation of the non-zero digits per base, fixed across the
/// sequence; base 2 has no non-zero digit to permute.
pub fn halton_draws(d: usize, n: usize, r: usize, seed: u64, scrambled: bool) -> Result<DrawMatrix> {
    check_common(d, n, r)?;
    if d > PRIMES.len() {
        return Err(Error::CapExceeded {
            what: "Halton dimension",
            requested: d as u128,
            cap: PRIMES.len() as u128,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let perms: Vec<Vec<u32>> = PRIMES[..d]
        .iter()
        .map(|&b| {
            let mut p: Vec<u32> = (0..b).collect();
            if scrambled {
                p[1..].shuffle(&mut rng);
            }
            p
        })
        .collect();
    let mut data = Vec::with_capacity(n * r * d);
    for k in 0..(n * r) as u64 {
        let index = HALTON_DISCARD + 1 + k;
        for j in 0..d {
            let perm = scrambled.then_some(perms[j].as_slice());
            let x = scrambled_radical_inverse(PRIMES[j], index, perm);
            data.push(shift_mod1(x, shifts[j]));
        }
    }
    Ok(DrawMatrix {
        dim: d,
        count: r,
        individuals: n,
        generator: if scrambled {
            Generator::HaltonScrambled
        } else {
            Generator::HaltonRandomized
        },
        seed,
        data,
    })
}

/// `frac(p + u)`, clamped into the open unit interval.
pub fn shift_mod1(p: f64, u: f64) -> f64 {
    let s = p + u;
    let s = s - s.floor();
    s.clamp(LO, HI)
}

/// MLHS points `(perm[i] + u) / R` for one dimension of one individual.
pub fn mlhs_points(r: usize, u: f64, perm: &[usize]) -> Vec<f64> {
    perm.iter().map(|&p| (p as f64 + u) / r as f64).collect()
}

/// Modified Latin hypercube draws: per individual and dimension, one uniform
/// offset shared by the `R` strata and an independent shuffle of the strata.
pub fn mlhs_draws(d: usize, n: usize, r: usize, seed: u64) -> Result<DrawMatrix> {
    check_common(d, n, r)?;
    let mut data = vec![0.0; n * r * d];
    let mut perm: Vec<usize> = (0..r).collect();
    for i in 0..n {
        // one stream per individual, so blocks do not depend on N
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        for j in 0..d {
            let u: f64 = rng.sample(Open01);
            perm.iter_mut().enumerate().for_each(|(s, p)| *p = s);
            perm.shuffle(&mut rng);
            for (q, x) in mlhs_points(r, u, &perm).into_iter().enumerate() {
                data[(i * r + q) * d + j] = x.clamp(LO, HI);
            }
        }
    }
    Ok(DrawMatrix {
        dim: d,
        count: r,
        individuals: n,
        generator: Generator::Mlhs,
        seed,
        data,
    })
}

/// Dispatches on the generator.
pub fn draws(generator: Generator, d: usize, n: usize, r: usize, seed: u64) -> Result<DrawMatrix> {
    match generator {
        Generator::HaltonRandomized => halton_draws(d, n, r, seed, false),
        Generator::HaltonScrambled => halton_draws(d, n, r, seed, true),
        Generator::Mlhs => mlhs_draws(d, n, r, seed),
    }
}

/// Standard normal quantile. Acklam's rational approximation refined by one
/// Halley step on `Phi(x) - p` using the complementary error function.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549671010331685,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;

    if p.is_nan() || p <= 0.0 {
        return if p == 0.0 { f64::NEG_INFINITY } else { f64::NAN };
    }
    if p >= 1.0 {
        return if p == 1.0 { f64::INFINITY } else { f64::NAN };
    }
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let t = q * q;
        (((((A[0] * t + A[1]) * t + A[2]) * t + A[3]) * t + A[4]) * t + A[5]) * q
            / (((((B[0] * t + B[1]) * t + B[2]) * t + B[3]) * t + B[4]) * t + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley step; the error is evaluated on the tail nearer to p
    let e = if x < 0.0 {
        0.5 * erfc(-x / std::f64::consts::SQRT_2) - p
    } else {
        (1.0 - p) - 0.5 * erfc(x / std::f64::consts::SQRT_2)
    };
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Individual `i`'s block mapped through the normal quantile, with weights
/// `1/R` and the moment residual measured over total order 2.
pub fn to_normal_rule(draws: &DrawMatrix, individual: usize) -> Result<QuadratureRule> {
    if individual >= draws.individuals {
        return Err(Error::invalid(format!(
            "individual {individual} out of range (N = {})",
            draws.individuals
        )));
    }
    let (d, r) = (draws.dim, draws.count);
    let start = individual * r * d;
    let coords: Vec<f64> = draws.data[start..start + r * d].iter().map(|&u| inverse_normal_cdf(u)).collect();
    QuadratureRule::with_computed_residual(
        WeightFamily::StandardNormal,
        WRAPPED_RESIDUAL_ORDER,
        DMatrix::from_vec(d, r, coords),
        DVector::from_element(r, 1.0 / r as f64),
        draws.seed,
        Provenance::QmcWrapped,
    )
}

/// One-dimensional star discrepancy of a point set in `[0, 1]`.
pub fn star_discrepancy_1d(points: &[f64]) -> f64 {
    let mut x = points.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let worst = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| (xi - (2 * i + 1) as f64 / (2.0 * n)).abs())
        .fold(0.0, f64::max);
    1.0 / (2.0 * n) + worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_examples() {
        assert_eq!(radical_inverse(2, 1), 0.5);
        assert_eq!(radical_inverse(2, 3), 0.75);
        assert!((radical_inverse(3, 2) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(radical_inverse(2, 11), 0.8125);
    }

    /// Digit reversal through string formatting of `k` in base `b`.
    fn reversal_oracle(b: u32, k: u64) -> f64 {
        let mut digits = Vec::new();
        let mut m = k;
        while m > 0 {
            digits.push((m % b as u64) as u32);
            m /= b as u64;
        }
        digits.iter().rev().fold(0.0, |acc, &dg| (acc + dg as f64) / b as f64)
    }

    #[test]
    fn radical_inverse_matches_oracle() {
        for &b in &PRIMES[..6] {
            for k in 1..500 {
                assert!((radical_inverse(b, k) - reversal_oracle(b, k)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn halton_blocks_follow_the_sequence() {
        let dm = halton_draws(2, 3, 4, 5, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shifts = [rng.random::<f64>(), rng.random::<f64>()];
        for i in 0..3 {
            for r in 0..4 {
                let k = 11 + (i * 4 + r) as u64;
                for j in 0..2 {
                    let want = shift_mod1(radical_inverse(PRIMES[j], k), shifts[j]);
                    assert_eq!(dm.point(i, r)[j], want);
                }
            }
        }
    }

    #[test]
    fn unshifted_first_block() {
        let block: Vec<f64> = (11..=13).map(|k| radical_inverse(2, k)).collect();
        assert_eq!(block, vec![0.8125, 0.1875, 0.6875]);
        assert_eq!(shift_mod1(0.8125, 0.25), 0.0625);
    }

    #[test]
    fn scrambling_leaves_base_two_alone_and_changes_others() {
        let plain = halton_draws(3, 1, 50, 9, false).unwrap();
        let scr = halton_draws(3, 1, 50, 9, true).unwrap();
        assert_ne!(plain.coordinate(0, 2), scr.coordinate(0, 2));
        let plain_b2 = plain.coordinate(0, 0);
        // shifts come first from the stream, so base-2 coordinates coincide
        assert_eq!(plain_b2, scr.coordinate(0, 0));
    }

    #[test]
    fn identical_seeds_identical_draws() {
        for g in [Generator::HaltonRandomized, Generator::HaltonScrambled, Generator::Mlhs] {
            assert_eq!(draws(g, 3, 4, 7, 42).unwrap(), draws(g, 3, 4, 7, 42).unwrap());
            assert_ne!(draws(g, 3, 4, 7, 42).unwrap(), draws(g, 3, 4, 7, 43).unwrap());
        }
    }

    #[test]
    fn halton_dimension_cap() {
        assert!(matches!(halton_draws(26, 1, 1, 0, false), Err(Error::CapExceeded { .. })));
        assert!(halton_draws(25, 1, 1, 0, true).is_ok());
    }

    #[test]
    fn mlhs_examples() {
        assert_eq!(mlhs_points(4, 0.0, &[0, 1, 2, 3]), vec![0.0, 0.25, 0.5, 0.75]);
    }

    #[test]
    fn mlhs_stratification_is_exact() {
        for seed in 0..5 {
            let dm = mlhs_draws(3, 4, 17, seed).unwrap();
            for i in 0..4 {
                for j in 0..3 {
                    let mut strata: Vec<usize> = dm.coordinate(i, j).iter().map(|x| (x * 17.0).floor() as usize).collect();
                    strata.sort();
                    assert_eq!(strata, (0..17).collect::<Vec<_>>());
                }
            }
        }
    }

    #[test]
    fn draws_stay_inside_the_open_interval() {
        for g in [Generator::HaltonRandomized, Generator::HaltonScrambled, Generator::Mlhs] {
            let dm = draws(g, 5, 10, 30, 1).unwrap();
            assert!(dm.as_slice().iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn inverse_normal_examples() {
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
        assert!((inverse_normal_cdf(0.975) - 1.959963984540054).abs() < 1e-12);
        assert!((inverse_normal_cdf(0.025) + 1.959963984540054).abs() < 1e-12);
        // tabulated quantiles
        assert!((inverse_normal_cdf(0.84134474606854293) - 1.0).abs() < 1e-12);
        assert!((inverse_normal_cdf(1e-10) + 6.361340902404056).abs() < 1e-9);
    }

    #[test]
    fn inverse_normal_round_trips_through_cdf() {
        // accuracy of x is checked through Phi(x), scaled by the density
        let phi = |x: f64| 0.5 * erfc(-x / std::f64::consts::SQRT_2);
        let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for e in 1..=15 {
            for &p in &[10f64.powi(-e), 3.0 * 10f64.powi(-e)] {
                for q in [p, 1.0 - p] {
                    if q <= 1e-15 || q >= 1.0 - 1e-15 {
                        continue;
                    }
                    let x = inverse_normal_cdf(q);
                    let tail = if x < 0.0 { phi(x) - q } else { (1.0 - q) - 0.5 * erfc(x / std::f64::consts::SQRT_2) };
                    assert!((tail / density(x)).abs() < 1e-9, "p={q} x={x}");
                }
            }
        }
    }

    #[test]
    fn wrapped_rule_has_equal_weights() {
        let dm = halton_draws(2, 3, 100, 0, false).unwrap();
        let rule = to_normal_rule(&dm, 1).unwrap();
        assert_eq!(rule.len(), 100);
        assert!((rule.weights().sum() - 1.0).abs() < 1e-14);
        assert!(rule.weights().iter().all(|&w| w == 0.01));
        assert_eq!(rule.provenance(), Provenance::QmcWrapped);
        assert!(rule.invariant_violations().is_empty());
        assert!(to_normal_rule(&dm, 3).is_err());
    }

    #[test]
    fn star_discrepancy_shrinks_with_r() {
        let ds: Vec<f64> = [50, 100, 500]
            .iter()
            .map(|&r| {
                let dm = halton_draws(1, 1, r, 3, false).unwrap();
                star_discrepancy_1d(&dm.coordinate(0, 0))
            })
            .collect();
        assert!(ds[0] > ds[1] && ds[1] > ds[2], "{ds:?}");
        assert_eq!(star_discrepancy_1d(&[0.5]), 0.5);
    }
}
